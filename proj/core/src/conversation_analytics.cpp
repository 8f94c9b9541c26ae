#include "alterforge/conversation_analytics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "alterforge/error.hpp"
#include "resources.hpp"
#include "text_util.hpp"

namespace alterforge {

Vectors embed_transcript(const Transcript& transcript, const Embedder& embedder) {
  if (transcript.empty()) throw Error(Errc::invalid_argument, "transcript is empty");
  Vectors out;
  out.reserve(transcript.size());
  for (const auto& turn : transcript) out.push_back(turn.embedding ? *turn.embedding : embedder.embed(turn.text));
  return out;
}

// --- projection --------------------------------------------------------------

Projection project_2d(const Vectors& vectors, const PcaOptions& options) {
  const auto n = static_cast<Eigen::Index>(vectors.size());
  if (n < 3) throw Error(Errc::degenerate_input, "projection needs at least 3 vectors");
  const auto d = static_cast<Eigen::Index>(vectors.front().size());
  if (d < 2) throw Error(Errc::degenerate_input, "projection needs at least 2 dimensions");
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(vectors[static_cast<std::size_t>(i)].size()) != d) {
      throw Error(Errc::degenerate_input, "vectors have different dimensions");
    }
    x.row(i) = Eigen::Map<const Eigen::RowVectorXd>(vectors[static_cast<std::size_t>(i)].data(), d);
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const double total = x.squaredNorm();
  if (!(total > 1e-300)) throw Error(Errc::degenerate_rank, "all vectors are identical");

  const Eigen::Index block = std::clamp<Eigen::Index>(options.block_size, 2, d);

  // Deterministic start block.
  std::uint64_t state = 0x5eed5eedULL;
  Eigen::MatrixXd q(d, block);
  for (Eigen::Index j = 0; j < block; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      q(i, j) = static_cast<double>(detail::splitmix64(state) >> 11) * 0x1.0p-53 - 0.5;
    }
  }
  q = Eigen::HouseholderQR<Eigen::MatrixXd>(q).householderQ() * Eigen::MatrixXd::Identity(d, block);

  Eigen::MatrixXd v(d, block);
  Eigen::VectorXd lambda(block);
  int iteration = 0;
  while (true) {
    ++iteration;
    const Eigen::MatrixXd y = x * q;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(y.transpose() * y);
    // Eigen sorts ascending; flip to descending.
    const Eigen::MatrixXd w = ritz.eigenvectors().rowwise().reverse();
    lambda = ritz.eigenvalues().reverse();
    v = q * w;
    const Eigen::MatrixXd z = x.transpose() * (y * w);  // C v_j for every Ritz vector
    const double scale = std::max(lambda(0), 1e-300);
    double residual = 0.0;
    for (Eigen::Index j = 0; j < 2; ++j) residual = std::max(residual, (z.col(j) - lambda(j) * v.col(j)).norm() / scale);
    if (residual < options.tolerance || iteration >= options.max_iterations) break;
    q = Eigen::HouseholderQR<Eigen::MatrixXd>(z).householderQ() * Eigen::MatrixXd::Identity(d, block);
  }

  Projection result;
  result.iterations = iteration;
  result.mean.assign(mean.data(), mean.data() + d);
  Eigen::MatrixXd coords = x * v.leftCols(2);
  const double tiny = 1e-12 * std::sqrt(total);
  for (Eigen::Index c = 0; c < 2; ++c) {
    // Orient by the first point with a clearly non-zero coordinate.
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::fabs(coords(i, c)) > tiny) {
        if (coords(i, c) < 0) {
          coords.col(c) *= -1.0;
          v.col(c) *= -1.0;
        }
        break;
      }
    }
    result.components.emplace_back(v.col(c).data(), v.col(c).data() + d);
    result.variances.push_back(std::max(0.0, lambda(c)) / static_cast<double>(n - 1));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    result.points.push_back({static_cast<int>(i), coords(i, 0), coords(i, 1)});
  }
  return result;
}

// --- attractor ---------------------------------------------------------------

std::vector<std::string> default_farewell_lexicon() { return {"good-bye", "goodbye", "bye", "farewell", "see you"}; }

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

}  // namespace

bool is_farewell(std::string_view text, const std::vector<std::string>& lexicon) {
  const auto lower = detail::to_lower(text);
  for (const auto& raw : lexicon) {
    const auto phrase = detail::to_lower(raw);
    if (phrase.empty()) continue;
    for (auto pos = lower.find(phrase); pos != std::string::npos; pos = lower.find(phrase, pos + 1)) {
      const bool left = pos == 0 || !is_alnum(lower[pos - 1]);
      const auto end = pos + phrase.size();
      const bool right = end == lower.size() || !is_alnum(lower[end]);
      if (left && right) return true;
    }
  }
  return false;
}

AttractorReport detect_attractor_from_flags(const std::vector<bool>& farewell, int window, double fraction) {
  if (window < 1) throw Error(Errc::invalid_argument, "window must be at least 1");
  AttractorReport report;
  report.window = window;
  report.fraction = fraction;
  const auto n = static_cast<int>(farewell.size());
  for (int start = 0; start < n; start += window) {
    const int end = std::min(n, start + window);
    int hits = 0;
    for (int i = start; i < end; ++i) hits += farewell[static_cast<std::size_t>(i)] ? 1 : 0;
    report.farewell_fraction_curve.push_back(static_cast<double>(hits) / (end - start));
  }
  // Walk back from the last window while the fraction holds.
  auto w = static_cast<int>(report.farewell_fraction_curve.size());
  while (w > 0 && report.farewell_fraction_curve[static_cast<std::size_t>(w - 1)] >= fraction) --w;
  if (w < static_cast<int>(report.farewell_fraction_curve.size())) {
    report.detected = true;
    report.entry_turn = w * window;
  }
  return report;
}

AttractorReport detect_goodbye_attractor(const Transcript& transcript, const std::vector<std::string>& lexicon,
                                         int window, double fraction) {
  std::vector<bool> flags;
  flags.reserve(transcript.size());
  for (const auto& turn : transcript) flags.push_back(is_farewell(turn.text, lexicon));
  return detect_attractor_from_flags(flags, window, fraction);
}

AttractorReport detect_goodbye_attractor_embedding(const Transcript& transcript, const Embedder& embedder,
                                                   const std::vector<std::string>& lexicon, int window,
                                                   double fraction, double similarity) {
  std::vector<double> centroid(embedder.dimension(), 0.0);
  for (const auto& phrase : lexicon) {
    const auto e = embedder.embed(phrase);
    for (std::size_t i = 0; i < centroid.size(); ++i) centroid[i] += e[i];
  }
  normalize(centroid);
  std::vector<bool> flags;
  flags.reserve(transcript.size());
  for (const auto& turn : transcript) {
    const auto e = turn.embedding ? *turn.embedding : embedder.embed(turn.text);
    flags.push_back(cosine(e, centroid) >= similarity);
  }
  return detect_attractor_from_flags(flags, window, fraction);
}

// --- word windows ------------------------------------------------------------

std::set<std::string> parse_stopwords(std::string_view text) {
  std::set<std::string> words;
  for (const auto raw : detail::split_lines(text)) {
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    words.insert(detail::to_lower(line));
  }
  return words;
}

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = parse_stopwords(detail::embedded_resource("stopwords_en.txt"));
  return words;
}

std::vector<std::string> content_words(std::string_view text, const std::set<std::string>& stopwords) {
  std::vector<std::string> out;
  for (auto& word : tokenize_words(text)) {
    if (!stopwords.contains(word)) out.push_back(std::move(word));
  }
  return out;
}

std::vector<WordWindow> word_windows(const Transcript& transcript, int width, const std::set<std::string>& stopwords) {
  if (width < 1) throw Error(Errc::invalid_argument, "width must be at least 1");
  std::vector<WordWindow> windows;
  const auto n = static_cast<int>(transcript.size());
  for (int start = 0; start < n; start += width) {
    WordWindow w;
    w.window_start = start;
    w.window_end = std::min(n, start + width);
    for (int i = start; i < w.window_end; ++i) {
      for (auto& word : content_words(transcript[static_cast<std::size_t>(i)].text, stopwords)) ++w.counts[word];
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

std::string trajectory_to_csv(const std::vector<TrajectoryPoint>& points) {
  std::ostringstream out;
  out.precision(17);
  out << "turn,x,y\n";
  for (const auto& p : points) out << p.turn_index << ',' << p.x << ',' << p.y << '\n';
  return out.str();
}

namespace {

std::string csv_cell(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  return "\"" + detail::replace_all(text, "\"", "\"\"") + "\"";
}

}  // namespace

std::string word_windows_to_csv(const std::vector<WordWindow>& windows) {
  std::ostringstream out;
  out << "window,word,count\n";
  for (std::size_t i = 0; i < windows.size(); ++i) {
    for (const auto& [word, count] : windows[i].counts) out << i << ',' << csv_cell(word) << ',' << count << '\n';
  }
  return out.str();
}

// --- report ------------------------------------------------------------------

nlohmann::json AnalysisReport::to_json() const {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : trajectory) points.push_back({{"turn", p.turn_index}, {"x", p.x}, {"y", p.y}});
  nlohmann::json wins = nlohmann::json::array();
  for (const auto& w : windows) {
    wins.push_back({{"window_start", w.window_start}, {"window_end", w.window_end}, {"counts", w.counts}});
  }
  nlohmann::json doc = {
      {"trajectory", std::move(points)},
      {"attractor",
       {{"detected", attractor.detected},
        {"entry_turn", attractor.entry_turn ? nlohmann::json(*attractor.entry_turn) : nlohmann::json()},
        {"farewell_fraction_curve", attractor.farewell_fraction_curve},
        {"window", attractor.window},
        {"fraction", attractor.fraction}}},
      {"word_windows", std::move(wins)},
  };
  if (trajectory_note) doc["trajectory_note"] = *trajectory_note;
  return doc;
}

AnalysisReport analyze_transcript(const Transcript& transcript, const Embedder& embedder,
                                  const AnalysisOptions& options) {
  AnalysisReport report;
  if (transcript.size() >= 3) {
    try {
      report.trajectory = project_2d(embed_transcript(transcript, embedder)).points;
      for (std::size_t i = 0; i < report.trajectory.size(); ++i) report.trajectory[i].turn_index = transcript[i].index;
    } catch (const Error& e) {
      if (e.code() != Errc::degenerate_rank) throw;
      report.trajectory_note = e.what();
    }
  } else {
    report.trajectory_note = "projection needs at least 3 turns";
  }
  report.attractor =
      detect_goodbye_attractor(transcript, default_farewell_lexicon(), options.attractor_window, options.attractor_fraction);
  report.windows = word_windows(transcript, options.word_window);
  return report;
}

}  // namespace alterforge

#include "alterforge/eval_stats.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "alterforge/error.hpp"
#include "text_util.hpp"

namespace alterforge {

void RatingMatrix::validate() const {
  const auto n = values.size();
  const auto k = motion_labels.size();
  if (n < 2 || k < 3) {
    throw Error(Errc::degenerate_input, "need at least 2 subjects and 3 motions, got " + std::to_string(n) + "x" +
                                            std::to_string(k));
  }
  if (!subject_ids.empty() && subject_ids.size() != n) {
    throw Error(Errc::invalid_argument, "subject id count does not match row count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (values[i].size() != k) {
      throw Error(Errc::invalid_argument, "row " + std::to_string(i + 1) + " has " +
                                              std::to_string(values[i].size()) + " ratings, expected " +
                                              std::to_string(k));
    }
    for (int v : values[i]) {
      if (v < 1 || v > 5) {
        throw Error(Errc::value_range, "rating " + std::to_string(v) + " in row " + std::to_string(i + 1) +
                                           " is outside 1..5");
      }
    }
  }
}

// --- CSV ---------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_row(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back(detail::trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  if (quoted) throw Error(Errc::malformed, "unterminated quote in CSV row");
  cells.emplace_back(detail::trim(cell));
  return cells;
}

bool is_subject_header(std::string_view cell) {
  const auto lower = detail::to_lower(cell);
  return lower == "subject" || lower == "subject_id" || lower == "id";
}

}  // namespace

RatingMatrix parse_ratings_csv(std::string_view text) {
  RatingMatrix m;
  bool header = true;
  bool id_column = false;
  int line_no = 0;
  for (const auto raw : detail::split_lines(text)) {
    ++line_no;
    if (detail::trim(raw).empty()) continue;
    auto cells = split_csv_row(raw);
    if (header) {
      id_column = is_subject_header(cells.front());
      m.motion_labels.assign(cells.begin() + (id_column ? 1 : 0), cells.end());
      header = false;
      continue;
    }
    std::vector<int> row;
    for (std::size_t c = id_column ? 1 : 0; c < cells.size(); ++c) {
      const auto& cell = cells[c];
      int v = 0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw Error(Errc::malformed, "line " + std::to_string(line_no) + ": '" + cell + "' is not an integer rating");
      }
      row.push_back(v);
    }
    m.subject_ids.push_back(id_column ? cells.front() : std::to_string(m.values.size() + 1));
    m.values.push_back(std::move(row));
  }
  if (header) throw Error(Errc::malformed, "ratings CSV is empty");
  m.validate();
  return m;
}

RatingMatrix load_ratings_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::storage_io, "cannot read " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_ratings_csv(buffer.str());
}

// --- ranks and Friedman --------------------------------------------------------

namespace {

// Ranks doubled so that tied averages stay integral.
std::vector<std::int64_t> doubled_ranks(const std::vector<int>& row) {
  const auto k = row.size();
  std::vector<std::size_t> order(k);
  for (std::size_t j = 0; j < k; ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row[a] < row[b]; });
  std::vector<std::int64_t> ranks(k);
  for (std::size_t i = 0; i < k;) {
    std::size_t j = i;
    while (j + 1 < k && row[order[j + 1]] == row[order[i]]) ++j;
    // positions i..j (0-based) share (i+1 + j+1)/2
    const auto doubled = static_cast<std::int64_t>(i + j + 2);
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = doubled;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::vector<std::vector<double>> rank_rows(const RatingMatrix& matrix) {
  matrix.validate();
  std::vector<std::vector<double>> out;
  out.reserve(matrix.values.size());
  for (const auto& row : matrix.values) {
    std::vector<double> ranks;
    for (auto r : doubled_ranks(row)) ranks.push_back(static_cast<double>(r) / 2.0);
    out.push_back(std::move(ranks));
  }
  return out;
}

FriedmanResult friedman(const RatingMatrix& matrix, bool tie_correction) {
  matrix.validate();
  const auto n = static_cast<std::int64_t>(matrix.subjects());
  const auto k = static_cast<std::int64_t>(matrix.motions());

  std::vector<std::int64_t> doubled_sums(static_cast<std::size_t>(k), 0);
  std::int64_t tie_term = 0;  // sum over tie groups of t^3 - t
  for (const auto& row : matrix.values) {
    const auto ranks = doubled_ranks(row);
    for (std::size_t j = 0; j < ranks.size(); ++j) doubled_sums[j] += ranks[j];
    auto sorted = row;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
      const auto t = static_cast<std::int64_t>(j - i);
      tie_term += t * t * t - t;
      i = j;
    }
  }

  // With U_j = 2 T_j the statistic is (3 sum U^2 - 3 n^2 k (k+1)^2) / (n k (k+1)),
  // an exact integer ratio.
  std::int64_t sum_u2 = 0;
  for (auto u : doubled_sums) sum_u2 += u * u;
  const std::int64_t numerator = 3 * sum_u2 - 3 * n * n * k * (k + 1) * (k + 1);
  const std::int64_t denominator = n * k * (k + 1);

  FriedmanResult result;
  result.degrees_of_freedom = static_cast<int>(k - 1);
  result.statistic = static_cast<double>(numerator) / static_cast<double>(denominator);
  for (auto u : doubled_sums) result.rank_sums.push_back(static_cast<double>(u) / 2.0);
  if (tie_correction) {
    result.tie_corrected = true;
    const double c = 1.0 - static_cast<double>(tie_term) / static_cast<double>(n * (k * k * k - k));
    result.statistic = c > 0.0 ? result.statistic / c : 0.0;
  }
  if (result.statistic < 0.0) result.statistic = 0.0;  // rounding guard, never hit for exact ratios
  result.p_value = chi_square_sf(result.statistic, result.degrees_of_freedom);
  return result;
}

// --- special functions ---------------------------------------------------------

namespace {

constexpr double kGammaEps = 1e-16;
constexpr int kGammaMaxIter = 10000;

double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kGammaMaxIter; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kGammaEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kGammaMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kGammaEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw Error(Errc::invalid_argument, "regularized gamma needs a > 0, x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_fraction(a, x);
}

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw Error(Errc::invalid_argument, "regularized gamma needs a > 0, x >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_fraction(a, x);
}

double chi_square_sf(double x, int df) {
  if (df < 1) throw Error(Errc::invalid_argument, "chi-square needs df >= 1");
  if (x <= 0.0) return 1.0;
  return std::clamp(regularized_gamma_q(0.5 * df, 0.5 * x), 0.0, 1.0);
}

namespace {

// Phi(z) - Phi(z - q), written so neither branch subtracts two values near 1.
double normal_band(double z, double q) {
  constexpr double r = std::numbers::sqrt2;
  if (z > 0.5 * q) return 0.5 * (std::erfc((z - q) / r) - std::erfc(z / r));
  return 0.5 * (std::erfc(-z / r) - std::erfc((q - z) / r));
}

// 20-point Gauss-Legendre nodes/weights on [-1, 1] (positive half).
constexpr std::array<double, 10> kGlNodes = {
    0.0765265211334973337546404, 0.2277858511416450780804962, 0.3737060887154195606725482,
    0.5108670019508270980043641, 0.6360536807265150254528367, 0.7463319064601507926143051,
    0.8391169718222188233945291, 0.9122344282513259058677524, 0.9639719272779137912676661,
    0.9931285991850949247861224};
constexpr std::array<double, 10> kGlWeights = {
    0.1527533871307258506980843, 0.1491729864726037467878287, 0.1420961093183820513292983,
    0.1316886384491766268984945, 0.1181945319615184173123774, 0.1019301198172404350367501,
    0.0832767415767047487247581, 0.0626720483341090635695065, 0.0406014298003869413310400,
    0.0176140071391521183118620};

template <class F>
double gauss_legendre(F&& f, double lo, double hi, int panels) {
  const double width = (hi - lo) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * width;
    const double half = 0.5 * width;
    double s = 0.0;
    for (std::size_t i = 0; i < kGlNodes.size(); ++i) {
      s += kGlWeights[i] * (f(mid - half * kGlNodes[i]) + f(mid + half * kGlNodes[i]));
    }
    total += s * half;
  }
  return total;
}

}  // namespace

// P(range of k standard normals <= q) = k * int phi(z) [Phi(z) - Phi(z - q)]^(k-1) dz.
// The integrand vanishes (below 1e-20) outside [-9, 9 + q].
double studentized_range_cdf(double q, int k) {
  if (k < 2) throw Error(Errc::invalid_argument, "studentized range needs k >= 2");
  if (!(q > 0.0)) return 0.0;
  if (std::isinf(q)) return 1.0;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  auto f = [&](double z) { return inv_sqrt_2pi * std::exp(-0.5 * z * z) * std::pow(normal_band(z, q), k - 1); };
  const double value = k * gauss_legendre(f, -9.0, 9.0 + q, 64);
  return std::clamp(value, 0.0, 1.0);
}

// Integrates the complement directly so small tail probabilities keep
// relative precision: 1 - cdf = k * int phi(z) [Phi(z)^(k-1) - band^(k-1)] dz.
double studentized_range_sf(double q, int k) {
  if (k < 2) throw Error(Errc::invalid_argument, "studentized range needs k >= 2");
  if (!(q > 0.0)) return 1.0;
  if (std::isinf(q)) return 0.0;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  constexpr double r = std::numbers::sqrt2;
  auto f = [&](double z) {
    const double a = 0.5 * std::erfc(-z / r);  // Phi(z)
    const double b = normal_band(z, q);
    const double diff = 0.5 * std::erfc((q - z) / r);  // Phi(z - q) = a - b
    // a^m - b^m = (a - b) * sum a^(m-1-i) b^i, free of cancellation.
    const int m = k - 1;
    double acc = 0.0;
    for (int i = 0; i < m; ++i) acc += std::pow(a, m - 1 - i) * std::pow(b, i);
    return inv_sqrt_2pi * std::exp(-0.5 * z * z) * diff * acc;
  };
  const double value = k * gauss_legendre(f, -9.0, 9.0 + q, 64);
  return std::clamp(value, 0.0, 1.0);
}

// --- Nemenyi -----------------------------------------------------------------

NemenyiResult nemenyi(const RatingMatrix& matrix) {
  const auto ranks = rank_rows(matrix);
  const auto n = matrix.subjects();
  const auto k = matrix.motions();
  NemenyiResult result;
  result.mean_ranks.assign(k, 0.0);
  for (const auto& row : ranks) {
    for (std::size_t j = 0; j < k; ++j) result.mean_ranks[j] += row[j];
  }
  for (auto& r : result.mean_ranks) r /= static_cast<double>(n);

  const double se = std::sqrt(static_cast<double>(k * (k + 1)) / (12.0 * static_cast<double>(n)));
  result.p_matrix.assign(k, std::vector<double>(k, 1.0));
  result.q_matrix.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double q = std::fabs(result.mean_ranks[i] - result.mean_ranks[j]) / se;
      const double p = studentized_range_sf(q, static_cast<int>(k));
      result.q_matrix[i][j] = result.q_matrix[j][i] = q;
      result.p_matrix[i][j] = result.p_matrix[j][i] = p;
    }
  }
  return result;
}

// --- report ------------------------------------------------------------------

SignificanceReport significance_report(const RatingMatrix& matrix, double alpha, bool tie_correction) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::invalid_argument, "alpha must be in (0, 1)");
  SignificanceReport report;
  report.alpha = alpha;
  report.motion_labels = matrix.motion_labels;
  report.subjects = matrix.subjects();
  report.friedman = friedman(matrix, tie_correction);
  if (report.significant()) {
    report.nemenyi = nemenyi(matrix);
    const auto k = matrix.motions();
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        const double p = report.nemenyi->p_matrix[i][j];
        if (p <= alpha) report.significant_pairs.push_back({i, j, p});
      }
    }
  }
  return report;
}

namespace {

std::string format_number(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

}  // namespace

std::string SignificanceReport::text() const {
  std::ostringstream out;
  out << "Friedman test over " << subjects << " subjects and " << motion_labels.size() << " motions\n";
  out << "  motions: " << detail::join(motion_labels, ", ") << '\n';
  out << "  rank sums:";
  for (std::size_t j = 0; j < friedman.rank_sums.size(); ++j) {
    out << ' ' << motion_labels[j] << '=' << format_number(friedman.rank_sums[j]);
  }
  out << '\n';
  out << "  F_r = " << format_number(friedman.statistic) << ", df = " << friedman.degrees_of_freedom
      << ", p = " << format_number(friedman.p_value) << (friedman.tie_corrected ? " (tie-corrected)" : "") << '\n';
  out << "  alpha = " << format_number(alpha) << '\n';
  if (!significant()) {
    out << "no significant differences\n";
    return out.str();
  }
  out << "Nemenyi pairwise comparisons (p <= alpha):\n";
  if (significant_pairs.empty()) out << "  none\n";
  for (const auto& pair : significant_pairs) {
    out << "  " << motion_labels[pair.first] << " vs " << motion_labels[pair.second]
        << ": p = " << format_number(pair.p_value) << '\n';
  }
  return out.str();
}

nlohmann::json SignificanceReport::to_json() const {
  nlohmann::json doc = {
      {"alpha", alpha},
      {"motion_labels", motion_labels},
      {"subjects", subjects},
      {"friedman",
       {{"statistic", friedman.statistic},
        {"degrees_of_freedom", friedman.degrees_of_freedom},
        {"p_value", friedman.p_value},
        {"rank_sums", friedman.rank_sums},
        {"tie_corrected", friedman.tie_corrected}}},
      {"significant", significant()},
  };
  if (nemenyi) {
    doc["nemenyi"] = {{"p_matrix", nemenyi->p_matrix},
                      {"q_matrix", nemenyi->q_matrix},
                      {"mean_ranks", nemenyi->mean_ranks}};
  } else {
    doc["nemenyi"] = nullptr;
  }
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : significant_pairs) {
    pairs.push_back({{"first", motion_labels[p.first]}, {"second", motion_labels[p.second]}, {"p_value", p.p_value}});
  }
  doc["significant_pairs"] = std::move(pairs);
  return doc;
}

}  // namespace alterforge

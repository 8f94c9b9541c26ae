#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "alterforge/embedder.hpp"
#include "alterforge/transcript.hpp"

namespace alterforge {

using Vectors = std::vector<std::vector<double>>;

Vectors embed_transcript(const Transcript& transcript, const Embedder& embedder);

struct TrajectoryPoint {
  int turn_index = 0;
  double x = 0.0;
  double y = 0.0;
};

struct PcaOptions {
  double tolerance = 1e-10;
  int max_iterations = 1000;
  // Width of the iterated block. Extra guard vectors make the top two
  // directions converge at rate lambda_{block+1} / lambda_2 instead of
  // lambda_2 / lambda_1, which matters for nearly-equal leading eigenvalues.
  int block_size = 10;
};

struct Projection {
  std::vector<TrajectoryPoint> points;
  std::vector<double> mean;
  std::vector<std::vector<double>> components;  // two unit rows
  std::vector<double> variances;                // per component, divided by n - 1
  int iterations = 0;
};

// Centres the rows, finds the two leading principal directions by block
// power iteration, and projects. Signs make the first point's coordinates
// non-negative. Throws degenerate_input for fewer than 3 rows or ragged rows,
// degenerate_rank when every row is the same.
Projection project_2d(const Vectors& vectors, const PcaOptions& options = {});

std::vector<std::string> default_farewell_lexicon();

// Case-insensitive phrase match at word boundaries.
bool is_farewell(std::string_view text, const std::vector<std::string>& lexicon);

struct AttractorReport {
  bool detected = false;
  std::optional<int> entry_turn;
  std::vector<double> farewell_fraction_curve;  // one value per window
  int window = 20;
  double fraction = 0.8;
};

// Non-overlapping windows of `window` turns (the last may be short). Detected
// at the first window whose farewell fraction reaches `fraction` and stays
// there through the final window; entry_turn is that window's first turn.
AttractorReport detect_goodbye_attractor(const Transcript& transcript,
                                         const std::vector<std::string>& lexicon = default_farewell_lexicon(),
                                         int window = 20, double fraction = 0.8);
AttractorReport detect_attractor_from_flags(const std::vector<bool>& farewell, int window = 20,
                                            double fraction = 0.8);
// Embedding variant: a turn counts as a farewell when its cosine to the
// normalised centroid of the lexicon phrases' embeddings is >= `similarity`.
AttractorReport detect_goodbye_attractor_embedding(const Transcript& transcript, const Embedder& embedder,
                                                   const std::vector<std::string>& lexicon = default_farewell_lexicon(),
                                                   int window = 20, double fraction = 0.8,
                                                   double similarity = 0.8);

struct WordWindow {
  int window_start = 0;
  int window_end = 0;  // exclusive
  std::map<std::string, int> counts;
};

const std::set<std::string>& default_stopwords();
std::set<std::string> parse_stopwords(std::string_view text);

// Lowercased words with punctuation removed.
std::vector<std::string> content_words(std::string_view text, const std::set<std::string>& stopwords);

std::vector<WordWindow> word_windows(const Transcript& transcript, int width = 100,
                                     const std::set<std::string>& stopwords = default_stopwords());

std::string trajectory_to_csv(const std::vector<TrajectoryPoint>& points);
std::string word_windows_to_csv(const std::vector<WordWindow>& windows);

struct AnalysisOptions {
  int attractor_window = 20;
  double attractor_fraction = 0.8;
  int word_window = 100;
};

struct AnalysisReport {
  std::vector<TrajectoryPoint> trajectory;  // empty when the projection is undefined
  std::optional<std::string> trajectory_note;
  AttractorReport attractor;
  std::vector<WordWindow> windows;

  nlohmann::json to_json() const;
};

AnalysisReport analyze_transcript(const Transcript& transcript, const Embedder& embedder,
                                  const AnalysisOptions& options = {});

}  // namespace alterforge

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace alterforge {

// n subjects (rows) by k motions (columns), ratings on a 1..5 scale.
struct RatingMatrix {
  std::vector<std::vector<int>> values;
  std::vector<std::string> subject_ids;
  std::vector<std::string> motion_labels;

  std::size_t subjects() const noexcept { return values.size(); }
  std::size_t motions() const noexcept { return motion_labels.size(); }
  // Throws degenerate_input for n < 2 or k < 3, value_range for ratings
  // outside 1..5, invalid_argument for ragged rows or label count mismatch.
  void validate() const;
};

// CSV: the first row holds the motion labels, then one row per subject. If
// the first header cell is `subject` (or `subject_id`, `id`) that column
// carries subject ids; otherwise subjects are numbered from 1.
RatingMatrix parse_ratings_csv(std::string_view text);
RatingMatrix load_ratings_csv(const std::string& path);

// Ascending within-row ranks, ties share the mean of their positions.
std::vector<std::vector<double>> rank_rows(const RatingMatrix& matrix);

struct FriedmanResult {
  double statistic = 0.0;
  int degrees_of_freedom = 0;
  double p_value = 1.0;
  std::vector<double> rank_sums;
  bool tie_corrected = false;
};

// Uncorrected statistic 12/(nk(k+1)) * sum T_j^2 - 3n(k+1) by default; with
// `tie_correction` it is divided by 1 - sum(t^3 - t) / (n(k^3 - k)).
FriedmanResult friedman(const RatingMatrix& matrix, bool tie_correction = false);

struct NemenyiResult {
  std::vector<std::vector<double>> p_matrix;
  std::vector<std::vector<double>> q_matrix;
  std::vector<double> mean_ranks;
};

NemenyiResult nemenyi(const RatingMatrix& matrix);

// Regularized gamma functions, P(a, x) + Q(a, x) = 1.
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);
double chi_square_sf(double x, int df);

// Studentized range with k groups and infinite degrees of freedom.
double studentized_range_cdf(double q, int k);
double studentized_range_sf(double q, int k);

struct SignificantPair {
  std::size_t first;
  std::size_t second;
  double p_value;
};

struct SignificanceReport {
  double alpha = 0.001;
  std::vector<std::string> motion_labels;
  std::size_t subjects = 0;
  FriedmanResult friedman;
  std::optional<NemenyiResult> nemenyi;  // only when the Friedman test rejects
  std::vector<SignificantPair> significant_pairs;

  bool significant() const noexcept { return friedman.p_value <= alpha; }
  std::string text() const;
  nlohmann::json to_json() const;
};

SignificanceReport significance_report(const RatingMatrix& matrix, double alpha = 0.001,
                                       bool tie_correction = false);

}  // namespace alterforge

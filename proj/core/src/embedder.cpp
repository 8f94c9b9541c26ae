#include "alterforge/embedder.hpp"

#include <cmath>

#include "alterforge/error.hpp"
#include "text_util.hpp"

namespace alterforge {

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char c : text) {
    if (c == '\'') continue;
    if (detail::is_word_char(c)) {
      current.push_back(detail::ascii_lower(c));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

void normalize(std::vector<double>& v) noexcept {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  if (sum <= 0.0) return;
  const double inv = 1.0 / std::sqrt(sum);
  for (double& x : v) x *= inv;
}

std::vector<double> HashingEmbedder::embed(std::string_view text) const {
  std::vector<double> v(dimension_, 0.0);
  for (const auto& word : tokenize_words(text)) v[detail::fnv1a32(word) % dimension_] += 1.0;
  normalize(v);
  return v;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(Errc::invalid_argument, "cosine of vectors with different dimensions");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace alterforge

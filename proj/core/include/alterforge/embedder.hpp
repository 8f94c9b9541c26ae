#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace alterforge {

// Maps text to a unit vector (or the zero vector for text with no words).
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(std::string_view text) const = 0;
  virtual std::size_t dimension() const noexcept = 0;
};

// Lowercased word unigrams (runs of ASCII letters, digits, apostrophes and
// non-ASCII bytes), with apostrophes dropped.
std::vector<std::string> tokenize_words(std::string_view text);

// Offline embedder: each word's FNV-1a 32-bit hash modulo the dimension
// selects a bucket, buckets hold counts, then the vector is L2-normalised.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dimension = 256) : dimension_(dimension) {}
  std::vector<double> embed(std::string_view text) const override;
  std::size_t dimension() const noexcept override { return dimension_; }

 private:
  std::size_t dimension_;
};

// Embeddings endpoint (`<base_url>/embeddings`), e.g. 1536-dimensional models.
class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(std::string base_url, std::string api_key, std::string model = "text-embedding-ada-002",
               std::size_t dimension = 1536);
  std::vector<double> embed(std::string_view text) const override;
  std::size_t dimension() const noexcept override { return dimension_; }

 private:
  std::string base_url_;
  std::string api_key_;
  std::string model_;
  std::size_t dimension_;
};

void normalize(std::vector<double>& v) noexcept;

// 0 when either vector is zero. Vectors must have equal length.
double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace alterforge

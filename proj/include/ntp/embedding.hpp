#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ntp/logic.hpp"

namespace ntp {

// One dense vector per symbol id; the only trainable state of the model.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(std::size_t n_symbols, std::size_t dim) : dim_(dim), values_(n_symbols * dim, 0.0) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : values_.size() / dim_; }

  std::span<double> row(SymbolId id) { return std::span(values_).subspan(id.value * dim_, dim_); }
  std::span<const double> row(SymbolId id) const { return std::span(values_).subspan(id.value * dim_, dim_); }
  std::span<const double> values() const { return values_; }

  bool all_finite() const;

  friend bool operator==(const EmbeddingStore&, const EmbeddingStore&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

double euclidean_distance(std::span<const double> a, std::span<const double> b);

}  // namespace ntp

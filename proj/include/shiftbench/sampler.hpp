#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "shiftbench/errors.hpp"
#include "shiftbench/rng.hpp"

namespace shiftbench {

// Walker/Vose alias table over a non-negative weight vector. Build is O(n),
// each draw is O(1): one bounded integer, one coin, one table cell.
class AliasTable {
 public:
  AliasTable() = default;

  explicit AliasTable(std::span<const double> weights) { build(weights); }

  void build(std::span<const double> weights) {
    size_t n = weights.size();
    if (n == 0) throw DegenerateError("empty weight vector");
    double sum = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw NegativeWeightError("weight " + std::to_string(w));
      sum += w;
    }
    if (sum <= 0.0) throw DegenerateError("all weights are zero");

    cells_.assign(n, Cell{});
    std::vector<double> scaled(n);
    std::vector<uint32_t> small, large;
    small.reserve(n);
    large.reserve(n);
    double factor = static_cast<double>(n) / sum;
    for (size_t i = 0; i < n; ++i) {
      scaled[i] = weights[i] * factor;
      if (scaled[i] < 1.0)
        small.push_back(static_cast<uint32_t>(i));
      else
        large.push_back(static_cast<uint32_t>(i));
    }

    while (!small.empty() && !large.empty()) {
      uint32_t s = small.back();
      uint32_t l = large.back();
      small.pop_back();
      large.pop_back();
      cells_[s].prob = scaled[s];
      cells_[s].alias = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      if (scaled[l] < 1.0)
        small.push_back(l);
      else
        large.push_back(l);
    }
    // Residual entries carry probability 1 up to rounding.
    for (uint32_t i : large) {
      cells_[i].prob = 1.0;
      cells_[i].alias = i;
    }
    for (uint32_t i : small) {
      cells_[i].prob = 1.0;
      cells_[i].alias = i;
    }
  }

  size_t size() const { return cells_.size(); }

  size_t draw(Pcg32& rng) const {
    auto slot = static_cast<size_t>(rng.bounded(cells_.size()));
    const Cell& c = cells_[slot];
    return rng.next_double() < c.prob ? slot : c.alias;
  }

  // Decodes the table back into the distribution it encodes.
  std::vector<double> reconstruct() const {
    std::vector<double> p(cells_.size(), 0.0);
    double inv_n = 1.0 / static_cast<double>(cells_.size());
    for (size_t i = 0; i < cells_.size(); ++i) {
      p[i] += cells_[i].prob * inv_n;
      p[cells_[i].alias] += (1.0 - cells_[i].prob) * inv_n;
    }
    return p;
  }

 private:
  struct Cell {
    double prob = 1.0;
    uint32_t alias = 0;
  };
  std::vector<Cell> cells_;
};

// Owns the alias table plus a private generator stream: the resampling
// distribution of one training run. Single-owner mutable; clone with a fresh
// seed for parallel consumers.
class IndexSampler {
 public:
  IndexSampler(std::span<const double> weights, uint64_t seed)
      : table_(weights), rng_(derive_seed(seed, fnv1a64("index-sampler"))) {}

  size_t size() const { return table_.size(); }

  size_t draw_one() { return table_.draw(rng_); }

  std::vector<size_t> draw(size_t m) {
    std::vector<size_t> out;
    out.reserve(m);
    for (size_t i = 0; i < m; ++i) out.push_back(table_.draw(rng_));
    return out;
  }

  const AliasTable& table() const { return table_; }

 private:
  AliasTable table_;
  Pcg32 rng_;
};

// One slot of a mixture draw: either a real train-entry index or a request
// for a synthetic sample with the given target attribute values.
struct MixtureSlot {
  enum class Source : uint8_t { real, augmented };
  Source source = Source::real;
  size_t index = 0;  // train entry index; for augmented slots, the base record
  uint32_t target_label = 0;
  uint32_t target_nuisance = 0;
};

// Draws from (1 - alpha) * resampled-real + alpha * synthetic, deciding
// per slot. Augmented slots carry target attributes uniform over the full
// label x nuisance grid.
class MixtureSampler {
 public:
  MixtureSampler(IndexSampler base, double alpha, size_t num_labels,
                 size_t num_nuisance, uint64_t seed)
      : base_(std::move(base)),
        alpha_(alpha),
        num_labels_(num_labels),
        num_nuisance_(num_nuisance),
        rng_(derive_seed(seed, fnv1a64("mixture-sampler"))) {
    if (alpha_ < 0.0 || alpha_ > 1.0) throw RangeError("alpha outside [0,1]");
    if (num_labels_ == 0 || num_nuisance_ == 0)
      throw RangeError("empty attribute grid");
  }

  double alpha() const { return alpha_; }

  std::vector<MixtureSlot> draw(size_t m) {
    std::vector<MixtureSlot> out;
    out.reserve(m);
    for (size_t i = 0; i < m; ++i) {
      MixtureSlot slot;
      bool augmented = alpha_ > 0.0 && rng_.next_double() < alpha_;
      slot.index = base_.draw_one();
      if (augmented) {
        slot.source = MixtureSlot::Source::augmented;
        slot.target_label = static_cast<uint32_t>(rng_.bounded(num_labels_));
        slot.target_nuisance = static_cast<uint32_t>(rng_.bounded(num_nuisance_));
      }
      out.push_back(slot);
    }
    return out;
  }

 private:
  IndexSampler base_;
  double alpha_;
  size_t num_labels_;
  size_t num_nuisance_;
  Pcg32 rng_;
};

inline IndexSampler build_sampler(std::span<const double> weights, uint64_t seed) {
  return IndexSampler(weights, seed);
}

}  // namespace shiftbench

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "shiftbench/dataset.hpp"
#include "shiftbench/errors.hpp"
#include "shiftbench/manifest.hpp"
#include "shiftbench/rng.hpp"
#include "shiftbench/shift_spec.hpp"

namespace shiftbench {

namespace seed_tag {
inline constexpr uint64_t kTestSplit = fnv1a64("test-split");
inline constexpr uint64_t kScUncorrelated = fnv1a64("sc-uncorrelated");
inline constexpr uint64_t kLowDataDraw = fnv1a64("lowdata-draw");
inline constexpr uint64_t kValCarve = fnv1a64("val-carve");
inline constexpr uint64_t kLabelNoise = fnv1a64("label-noise");
inline constexpr uint64_t kSizeCap = fnv1a64("size-cap");
}  // namespace seed_tag

// Exact stratified test split: per_cell ids for every (label, nuisance) cell,
// chosen by seeded shuffle within the cell. Reserved ids never enter train/val.
struct TestSplit {
  std::vector<uint64_t> test_ids;  // sorted
  std::vector<uint64_t> pool_ids;  // sorted, everything not reserved
};

namespace detail {

// Ids grouped by (label value, nuisance value), ascending within each cell.
inline std::vector<std::vector<uint64_t>> cells_by_value(
    const AttributedDataset& dataset, const AttributeSchema& schema,
    const std::vector<uint64_t>& ids) {
  size_t num_labels = schema.num_label_values();
  size_t num_nuisance = schema.num_nuisance_values();
  std::vector<std::vector<uint64_t>> cells(num_labels * num_nuisance);
  for (uint64_t id : ids) {
    const ExampleRecord& r = dataset.record(id);
    size_t u = r.attr[schema.label_index];
    size_t v = r.attr[schema.nuisance_index];
    cells[u * num_nuisance + v].push_back(id);
  }
  return cells;
}

// Moves a stratified-by-label validation split out of `train`. Only entries
// of the carveable origins are eligible, and only ids with a single train
// entry, so exact-count invariants on the special origins survive.
inline void carve_validation(SplitManifest& manifest,
                             const AttributedDataset& dataset,
                             const AttributeSchema& schema, double val_fraction,
                             Pcg32& rng, std::set<Origin> carveable) {
  std::map<uint64_t, size_t> entry_count;
  for (const auto& e : manifest.train) entry_count[e.id]++;

  size_t num_labels = schema.num_label_values();
  std::vector<std::vector<uint64_t>> by_label(num_labels);
  for (const auto& e : manifest.train) {
    if (!carveable.count(e.origin)) continue;
    if (entry_count[e.id] != 1) continue;
    by_label[dataset.record(e.id).attr[schema.label_index]].push_back(e.id);
  }

  std::set<uint64_t> chosen;
  for (size_t lv = 0; lv < num_labels; ++lv) {
    auto& group = by_label[lv];
    std::sort(group.begin(), group.end());
    auto take = static_cast<size_t>(
        std::llround(val_fraction * static_cast<double>(group.size())));
    if (take == 0) continue;
    auto picked = sample_without_replacement(group, take, rng);
    chosen.insert(picked.begin(), picked.end());
  }

  std::vector<TrainEntry> kept;
  kept.reserve(manifest.train.size());
  for (auto& e : manifest.train) {
    if (chosen.count(e.id)) continue;
    kept.push_back(e);
  }
  manifest.train = std::move(kept);
  manifest.val.assign(chosen.begin(), chosen.end());
}

}  // namespace detail

inline TestSplit make_test_split(const AttributedDataset& dataset,
                                 const AttributeSchema& schema,
                                 uint64_t per_cell, uint64_t seed) {
  if (per_cell < 1) throw RangeError("per_cell must be >= 1");
  Pcg32 rng(derive_seed(seed, seed_tag::kTestSplit));
  auto cells = detail::cells_by_value(dataset, schema, dataset.all_ids());

  size_t num_nuisance = schema.num_nuisance_values();
  TestSplit split;
  std::set<uint64_t> reserved;
  for (size_t c = 0; c < cells.size(); ++c) {
    if (cells[c].size() < per_cell)
      throw InsufficientDataError(
          "cell=(" + std::to_string(c / num_nuisance) + "," +
          std::to_string(c % num_nuisance) + ") has " +
          std::to_string(cells[c].size()) + " records, needs " +
          std::to_string(per_cell));
    auto picked = sample_without_replacement(cells[c], per_cell, rng);
    reserved.insert(picked.begin(), picked.end());
  }
  split.test_ids.assign(reserved.begin(), reserved.end());
  for (uint64_t id : dataset.all_ids())
    if (!reserved.count(id)) split.pool_ids.push_back(id);
  return split;
}

// Shift 1: all pool records whose nuisance value matches the label mapping
// (origin=correlated) plus exactly N draws from the whole pool across all
// cells (origin=uncorrelated). A record drawn from a matching cell appears as
// both a correlated and an uncorrelated entry.
inline SplitManifest make_spurious_correlation(const AttributedDataset& dataset,
                                               const AttributeSchema& schema,
                                               const ShiftSpec& spec,
                                               uint64_t seed,
                                               const TestSplit& test_split) {
  if (spec.kind != ShiftKind::spurious_correlation)
    throw ConstraintError("spec kind is not spurious_correlation");
  spec.validate(schema);

  SplitManifest manifest;
  manifest.seed = seed;
  manifest.spec_digest = spec.digest();
  manifest.test = test_split.test_ids;

  for (uint64_t id : test_split.pool_ids) {
    const ExampleRecord& r = dataset.record(id);
    uint32_t lv = r.attr[schema.label_index];
    auto it = spec.mapping.find(lv);
    if (it == spec.mapping.end())
      throw MappingError("no mapping for label value " + std::to_string(lv));
    if (r.attr[schema.nuisance_index] == it->second)
      manifest.train.push_back({id, 1.0, Origin::correlated, std::nullopt});
  }

  if (spec.n > test_split.pool_ids.size())
    throw InsufficientDataError("uncorrelated draw of " + std::to_string(spec.n) +
                                " exceeds pool of " +
                                std::to_string(test_split.pool_ids.size()));
  Pcg32 rng(derive_seed(seed, seed_tag::kScUncorrelated));
  auto picked = sample_without_replacement(test_split.pool_ids, spec.n, rng);
  std::sort(picked.begin(), picked.end());
  for (uint64_t id : picked)
    manifest.train.push_back({id, 1.0, Origin::uncorrelated, std::nullopt});

  Pcg32 carve_rng(derive_seed(seed, seed_tag::kValCarve));
  detail::carve_validation(manifest, dataset, schema, spec.val_fraction,
                           carve_rng, {Origin::correlated});
  manifest.canonicalize();
  manifest.validate();
  return manifest;
}

namespace detail {

inline SplitManifest make_low_data_impl(const AttributedDataset& dataset,
                                        const AttributeSchema& schema,
                                        const ShiftSpec& spec, uint64_t n,
                                        uint64_t seed,
                                        const TestSplit& test_split) {
  SplitManifest manifest;
  manifest.seed = seed;
  manifest.spec_digest = spec.digest();
  manifest.test = test_split.test_ids;

  std::set<uint32_t> constrained(spec.constrained.begin(), spec.constrained.end());
  std::vector<std::vector<uint64_t>> by_value(schema.num_nuisance_values());
  for (uint64_t id : test_split.pool_ids) {
    const ExampleRecord& r = dataset.record(id);
    uint32_t v = r.attr[schema.nuisance_index];
    if (constrained.count(v)) {
      by_value[v].push_back(id);
    } else {
      manifest.train.push_back({id, 1.0, Origin::bulk, std::nullopt});
    }
  }

  for (uint32_t v : spec.constrained) {
    auto& candidates = by_value[v];
    if (candidates.size() < n)
      throw InsufficientDataError("nuisance value " + std::to_string(v) +
                                  " has " + std::to_string(candidates.size()) +
                                  " records, needs " + std::to_string(n));
    Pcg32 rng(derive_seed(seed, seed_tag::kLowDataDraw, v));
    auto picked = sample_without_replacement(candidates, n, rng);
    std::sort(picked.begin(), picked.end());
    for (uint64_t id : picked)
      manifest.train.push_back({id, 1.0, Origin::lowdata, std::nullopt});
  }

  Pcg32 carve_rng(derive_seed(seed, seed_tag::kValCarve));
  carve_validation(manifest, dataset, schema, spec.val_fraction, carve_rng,
                   {Origin::bulk});
  manifest.canonicalize();
  manifest.validate();
  return manifest;
}

}  // namespace detail

// Shift 2: every pool record outside the constrained nuisance values
// (origin=bulk) plus exactly N seeded draws per constrained value
// (origin=lowdata).
inline SplitManifest make_low_data(const AttributedDataset& dataset,
                                   const AttributeSchema& schema,
                                   const ShiftSpec& spec, uint64_t seed,
                                   const TestSplit& test_split) {
  if (spec.kind != ShiftKind::low_data)
    throw ConstraintError("spec kind is not low_data");
  spec.validate(schema);
  return detail::make_low_data_impl(dataset, schema, spec, spec.n, seed,
                                    test_split);
}

// Shift 3: low-data with N = 0; constrained values never appear in train/val.
inline SplitManifest make_unseen(const AttributedDataset& dataset,
                                 const AttributeSchema& schema,
                                 const ShiftSpec& spec, uint64_t seed,
                                 const TestSplit& test_split) {
  if (spec.kind != ShiftKind::unseen)
    throw ConstraintError("spec kind is not unseen");
  spec.validate(schema);
  return detail::make_low_data_impl(dataset, schema, spec, 0, seed, test_split);
}

// Condition 1: independently per train entry, with probability p the label is
// replaced by a uniform draw over the other label values. Expects the
// pre-noise manifest; existing overrides are discarded first.
inline SplitManifest apply_label_noise(const SplitManifest& manifest,
                                       const AttributedDataset& dataset,
                                       const AttributeSchema& schema, double p,
                                       uint64_t seed) {
  if (p < 0.0 || p > 1.0) throw RangeError("noise probability outside [0,1]");
  auto num_labels = static_cast<uint32_t>(schema.num_label_values());
  SplitManifest out = manifest;
  Pcg32 rng(derive_seed(seed, seed_tag::kLabelNoise));
  for (auto& e : out.train) {
    e.label_override.reset();
    if (p == 0.0) continue;
    if (rng.next_double() < p) {
      uint32_t original = dataset.record(e.id).attr[schema.label_index];
      uint32_t offset = 1 + static_cast<uint32_t>(rng.bounded(num_labels - 1));
      e.label_override = (original + offset) % num_labels;
    }
  }
  return out;
}

// Condition 2: seeded downsampling of train to exactly n_total entries, of
// which exactly round(ratio * n_total) have origin=lowdata. The remainder is
// allocated over the other origins proportionally (largest remainder).
inline SplitManifest apply_size_cap(const SplitManifest& manifest,
                                    const SizeCap& cap, uint64_t seed) {
  if (cap.n_total > manifest.train.size())
    throw InsufficientDataError("size cap " + std::to_string(cap.n_total) +
                                " exceeds train size " +
                                std::to_string(manifest.train.size()));
  auto want_lowdata = static_cast<uint64_t>(
      std::llround(cap.ratio * static_cast<double>(cap.n_total)));

  std::array<std::vector<size_t>, 4> strata;  // entry indices per origin
  for (size_t i = 0; i < manifest.train.size(); ++i)
    strata[static_cast<size_t>(manifest.train[i].origin)].push_back(i);

  auto lowdata_idx = static_cast<size_t>(Origin::lowdata);
  if (want_lowdata > strata[lowdata_idx].size())
    throw InsufficientDataError(
        "size cap needs " + std::to_string(want_lowdata) +
        " lowdata entries, manifest has " +
        std::to_string(strata[lowdata_idx].size()));
  uint64_t want_other = cap.n_total - want_lowdata;
  size_t other_total = manifest.train.size() - strata[lowdata_idx].size();
  if (want_other > other_total)
    throw InsufficientDataError("size cap needs " + std::to_string(want_other) +
                                " non-lowdata entries, manifest has " +
                                std::to_string(other_total));

  // Proportional quotas with largest-remainder rounding, origin-order ties.
  std::array<uint64_t, 4> quota{};
  quota[lowdata_idx] = want_lowdata;
  if (want_other > 0) {
    std::array<double, 4> frac{};
    uint64_t assigned = 0;
    for (size_t o = 0; o < 4; ++o) {
      if (o == lowdata_idx) continue;
      double exact = static_cast<double>(want_other) *
                     static_cast<double>(strata[o].size()) /
                     static_cast<double>(other_total);
      quota[o] = static_cast<uint64_t>(exact);
      frac[o] = exact - static_cast<double>(quota[o]);
      assigned += quota[o];
    }
    while (assigned < want_other) {
      size_t best = 4;
      for (size_t o = 0; o < 4; ++o) {
        if (o == lowdata_idx || quota[o] >= strata[o].size()) continue;
        if (best == 4 || frac[o] > frac[best]) best = o;
      }
      if (best == 4) throw InsufficientDataError("size cap quota infeasible");
      quota[best]++;
      frac[best] = -1.0;
      assigned++;
    }
  }

  SplitManifest out = manifest;
  out.train.clear();
  Pcg32 rng(derive_seed(seed, seed_tag::kSizeCap));
  for (size_t o = 0; o < 4; ++o) {
    if (quota[o] > strata[o].size())
      throw InsufficientDataError("size cap stratum overflow");
    auto picked = sample_without_replacement(strata[o], quota[o], rng);
    for (size_t idx : picked) out.train.push_back(manifest.train[idx]);
  }
  out.canonicalize();
  out.validate();
  return out;
}

// Importance weights toward the uniform attribute joint: entries in cell
// (u,v) with empirical train probability q get raw weight
// (1/(|A^l||A^a|)) / q, rescaled so the train mean is 1. Cells absent from
// train are excluded from the target (their mass is unreachable).
inline SplitManifest compute_reweight_weights(const SplitManifest& manifest,
                                              const AttributedDataset& dataset,
                                              const AttributeSchema& schema) {
  if (manifest.train.empty()) throw DegenerateError("empty train split");
  size_t num_labels = schema.num_label_values();
  size_t num_nuisance = schema.num_nuisance_values();

  std::vector<uint64_t> counts(num_labels * num_nuisance, 0);
  std::vector<size_t> cell_of(manifest.train.size());
  for (size_t i = 0; i < manifest.train.size(); ++i) {
    const auto& e = manifest.train[i];
    const ExampleRecord& r = dataset.record(e.id);
    uint32_t lv = e.label_override ? *e.label_override
                                   : r.attr[schema.label_index];
    size_t cell = static_cast<size_t>(lv) * num_nuisance +
                  r.attr[schema.nuisance_index];
    cell_of[i] = cell;
    counts[cell]++;
  }

  size_t occupied = 0;
  for (uint64_t c : counts) occupied += (c > 0);
  if (occupied < 2) throw DegenerateError("train occupies a single cell");

  double total = static_cast<double>(manifest.train.size());
  double target = 1.0 / static_cast<double>(num_labels * num_nuisance);
  SplitManifest out = manifest;
  double raw_sum = 0.0;
  std::vector<double> raw(out.train.size());
  for (size_t i = 0; i < out.train.size(); ++i) {
    double q = static_cast<double>(counts[cell_of[i]]) / total;
    raw[i] = target / q;
    raw_sum += raw[i];
  }
  double scale = total / raw_sum;
  for (size_t i = 0; i < out.train.size(); ++i) out.train[i].weight = raw[i] * scale;
  return out;
}

// Full recipe: reserve the test split, materialize the shift, then apply the
// optional noise and size-cap conditions. Weights stay at 1; reweighting is a
// method decision made at training time.
inline SplitManifest build_manifest(const AttributedDataset& dataset,
                                    const AttributeSchema& schema,
                                    const ShiftSpec& spec, uint64_t seed) {
  spec.validate(schema);
  TestSplit split = make_test_split(dataset, schema, spec.test_per_cell, seed);
  SplitManifest manifest;
  switch (spec.kind) {
    case ShiftKind::spurious_correlation:
      manifest = make_spurious_correlation(dataset, schema, spec, seed, split);
      break;
    case ShiftKind::low_data:
      manifest = make_low_data(dataset, schema, spec, seed, split);
      break;
    case ShiftKind::unseen:
      manifest = make_unseen(dataset, schema, spec, seed, split);
      break;
  }
  if (spec.noise_p > 0.0)
    manifest = apply_label_noise(manifest, dataset, schema, spec.noise_p, seed);
  if (spec.size_cap) manifest = apply_size_cap(manifest, *spec.size_cap, seed);
  return manifest;
}

}  // namespace shiftbench

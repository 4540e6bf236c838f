#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "shiftbench/dataset.hpp"
#include "shiftbench/errors.hpp"

namespace shiftbench {

// Empirical joint over two attributes for a set of record ids.
struct JointDistribution {
  size_t axis_i = 0;
  size_t axis_j = 0;
  std::vector<std::vector<uint64_t>> counts;  // |A^i| x |A^j|
  std::vector<std::vector<double>> probs;
  uint64_t total = 0;
  bool probs_defined = false;  // false when the id set is empty

  std::vector<double> marginal_i() const {
    std::vector<double> m(counts.size(), 0.0);
    for (size_t u = 0; u < counts.size(); ++u)
      for (size_t v = 0; v < counts[u].size(); ++v) m[u] += probs[u][v];
    return m;
  }
};

inline JointDistribution compute_joint(const AttributedDataset& dataset,
                                       std::span<const uint64_t> ids, size_t i,
                                       size_t j) {
  const auto& schema = dataset.schema();
  if (i >= schema.num_attributes() || j >= schema.num_attributes())
    throw AxisError("attribute axis out of range");
  if (i == j) throw AxisError("joint requires two distinct axes");

  JointDistribution jd;
  jd.axis_i = i;
  jd.axis_j = j;
  size_t ni = schema.cardinality(i);
  size_t nj = schema.cardinality(j);
  jd.counts.assign(ni, std::vector<uint64_t>(nj, 0));
  jd.probs.assign(ni, std::vector<double>(nj, 0.0));

  for (uint64_t id : ids) {
    const ExampleRecord& r = dataset.record(id);  // throws UnknownIdError
    jd.counts[r.attr[i]][r.attr[j]]++;
    jd.total++;
  }

  if (jd.total > 0) {
    jd.probs_defined = true;
    for (size_t u = 0; u < ni; ++u)
      for (size_t v = 0; v < nj; ++v)
        jd.probs[u][v] =
            static_cast<double>(jd.counts[u][v]) / static_cast<double>(jd.total);
  }
  return jd;
}

}  // namespace shiftbench

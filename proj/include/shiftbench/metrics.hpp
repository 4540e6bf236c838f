#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "shiftbench/errors.hpp"
#include "shiftbench/jsonio.hpp"

namespace shiftbench {

// One model-selection outcome: the chosen hyperparameters for a
// (method, shift, N, seed) cell with its validation and test accuracy.
struct MetricsRow {
  std::string method;
  std::string shift_id;
  uint64_t n = 0;
  uint64_t seed = 0;
  std::string hyper;
  double val_top1 = 0.0;
  double test_top1 = 0.0;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;

  void validate() const {
    std::set<std::string> keys;
    for (const auto& r : rows) {
      if (r.val_top1 < 0.0 || r.val_top1 > 1.0 || r.test_top1 < 0.0 ||
          r.test_top1 > 1.0)
        throw RangeError("accuracy outside [0,1] for method " + r.method);
      std::string key = r.method + '\x1f' + r.shift_id + '\x1f' +
                        std::to_string(r.n) + '\x1f' + std::to_string(r.seed);
      if (!keys.insert(key).second)
        throw FormatError("duplicate metrics cell: " + r.method + "/" +
                          r.shift_id + "/n=" + std::to_string(r.n) +
                          "/seed=" + std::to_string(r.seed));
    }
  }

  std::string to_csv(const std::string& config_digest = "") const {
    std::string out;
    if (!config_digest.empty()) out += "# config_digest=" + config_digest + "\n";
    out += "method,shift,n,seed,hyper,val_top1,test_top1\n";
    for (const auto& r : rows) {
      out += r.method + ',' + r.shift_id + ',' + std::to_string(r.n) + ',' +
             std::to_string(r.seed) + ',' + r.hyper + ',' +
             format_float9(r.val_top1) + ',' + format_float9(r.test_top1) + '\n';
    }
    return out;
  }

  static MetricsTable from_csv(const std::string& text) {
    MetricsTable table;
    size_t pos = 0;
    bool saw_header = false;
    while (pos < text.size()) {
      size_t eol = text.find('\n', pos);
      std::string line = text.substr(
          pos, (eol == std::string::npos ? text.size() : eol) - pos);
      pos = (eol == std::string::npos) ? text.size() : eol + 1;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      if (!saw_header) {
        if (line != "method,shift,n,seed,hyper,val_top1,test_top1")
          throw ParseError("bad metrics CSV header: " + line);
        saw_header = true;
        continue;
      }
      std::vector<std::string> fields;
      size_t start = 0;
      while (true) {
        size_t comma = line.find(',', start);
        fields.push_back(line.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      if (fields.size() != 7) throw ParseError("bad metrics CSV row: " + line);
      MetricsRow r;
      r.method = fields[0];
      r.shift_id = fields[1];
      try {
        r.n = std::stoull(fields[2]);
        r.seed = std::stoull(fields[3]);
        r.hyper = fields[4];
        r.val_top1 = std::stod(fields[5]);
        r.test_top1 = std::stod(fields[6]);
      } catch (const std::exception&) {
        throw ParseError("bad metrics CSV row: " + line);
      }
      table.rows.push_back(std::move(r));
    }
    if (!saw_header) throw ParseError("metrics CSV has no header");
    table.validate();
    return table;
  }
};

// A (shift, N) pair: one column of the aggregate artifacts.
struct Setting {
  std::string shift_id;
  uint64_t n = 0;

  bool operator==(const Setting&) const = default;

  std::string label() const { return shift_id + ":" + std::to_string(n); }
};

namespace detail {

inline std::vector<std::string> methods_in_order(const MetricsTable& table) {
  std::vector<std::string> methods;
  for (const auto& r : table.rows)
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
      methods.push_back(r.method);
  return methods;
}

inline std::vector<Setting> settings_in_order(const MetricsTable& table) {
  std::vector<Setting> settings;
  for (const auto& r : table.rows) {
    Setting s{r.shift_id, r.n};
    if (std::find(settings.begin(), settings.end(), s) == settings.end())
      settings.push_back(s);
  }
  return settings;
}

}  // namespace detail

struct SummaryRow {
  std::string method;
  std::string shift_id;
  uint64_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population (divide by count)
  size_t count = 0;
};

inline std::vector<SummaryRow> aggregate_mean_std(const MetricsTable& table) {
  table.validate();
  auto methods = detail::methods_in_order(table);
  auto settings = detail::settings_in_order(table);
  std::vector<SummaryRow> out;
  for (const auto& method : methods) {
    for (const auto& setting : settings) {
      std::vector<double> vals;
      for (const auto& r : table.rows)
        if (r.method == method && r.shift_id == setting.shift_id &&
            r.n == setting.n)
          vals.push_back(r.test_top1);
      if (vals.empty()) continue;
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double var = 0.0;
      for (double v : vals) var += (v - mean) * (v - mean);
      var /= static_cast<double>(vals.size());
      out.push_back({method, setting.shift_id, setting.n, mean, std::sqrt(var),
                     vals.size()});
    }
  }
  return out;
}

// method x setting grid of values; NaN marks undefined cells.
struct AggregateMatrix {
  std::vector<std::string> methods;
  std::vector<Setting> settings;
  std::vector<std::vector<double>> cells;  // [method][setting]
};

// Percent change of each method's mean test accuracy over the baseline:
// 100 * (mean(method) - mean(baseline)) / mean(baseline). By default means
// pool all rows of a setting before the ratio; per_seed_ratio instead
// averages the per-seed ratios.
inline AggregateMatrix percent_change(const MetricsTable& table,
                                      const std::string& baseline_method,
                                      bool per_seed_ratio = false) {
  table.validate();
  AggregateMatrix out;
  out.methods = detail::methods_in_order(table);
  out.settings = detail::settings_in_order(table);
  if (std::find(out.methods.begin(), out.methods.end(), baseline_method) ==
      out.methods.end())
    throw MissingCellError("baseline method not in table: " + baseline_method);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.cells.assign(out.methods.size(),
                   std::vector<double>(out.settings.size(), nan));

  for (size_t si = 0; si < out.settings.size(); ++si) {
    const auto& setting = out.settings[si];
    auto rows_of = [&](const std::string& method) {
      std::vector<const MetricsRow*> rows;
      for (const auto& r : table.rows)
        if (r.method == method && r.shift_id == setting.shift_id &&
            r.n == setting.n)
          rows.push_back(&r);
      return rows;
    };
    auto baseline_rows = rows_of(baseline_method);
    if (baseline_rows.empty())
      throw MissingCellError("baseline missing in setting " + setting.label());

    for (size_t mi = 0; mi < out.methods.size(); ++mi) {
      auto method_rows = rows_of(out.methods[mi]);
      if (method_rows.empty()) continue;
      if (per_seed_ratio) {
        std::map<uint64_t, double> base_by_seed;
        for (const auto* r : baseline_rows) base_by_seed[r->seed] = r->test_top1;
        double sum = 0.0;
        size_t count = 0;
        bool undefined = false;
        for (const auto* r : method_rows) {
          auto it = base_by_seed.find(r->seed);
          if (it == base_by_seed.end())
            throw MissingCellError("baseline missing seed " +
                                   std::to_string(r->seed) + " in setting " +
                                   setting.label());
          if (it->second == 0.0) {
            undefined = true;
            break;
          }
          sum += 100.0 * (r->test_top1 - it->second) / it->second;
          ++count;
        }
        if (!undefined && count > 0)
          out.cells[mi][si] = sum / static_cast<double>(count);
      } else {
        double base_mean = 0.0;
        for (const auto* r : baseline_rows) base_mean += r->test_top1;
        base_mean /= static_cast<double>(baseline_rows.size());
        double method_mean = 0.0;
        for (const auto* r : method_rows) method_mean += r->test_top1;
        method_mean /= static_cast<double>(method_rows.size());
        if (base_mean != 0.0)
          out.cells[mi][si] = 100.0 * (method_mean - base_mean) / base_mean;
      }
    }
  }
  return out;
}

// Per-(setting, seed) rank vectors (best rank 1, ties share the mean of the
// occupied positions) plus each method's median rank over all groups.
struct RankResult {
  std::vector<std::string> methods;
  struct Group {
    Setting setting;
    uint64_t seed = 0;
    std::vector<double> ranks;  // aligned with methods
  };
  std::vector<Group> groups;
  std::vector<double> median_rank;  // aligned with methods
};

inline std::vector<double> rank_descending(const std::vector<double>& values) {
  size_t n = values.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return values[a] > values[b];
  });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

inline double median_of(std::vector<double> values) {
  if (values.empty()) throw DegenerateError("median of empty list");
  std::sort(values.begin(), values.end());
  size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

inline RankResult rank_methods(const MetricsTable& table) {
  table.validate();
  RankResult out;
  out.methods = detail::methods_in_order(table);
  auto settings = detail::settings_in_order(table);

  for (const auto& setting : settings) {
    std::set<uint64_t> seeds;
    for (const auto& r : table.rows)
      if (r.shift_id == setting.shift_id && r.n == setting.n) seeds.insert(r.seed);
    for (uint64_t seed : seeds) {
      std::vector<double> acc(out.methods.size());
      for (size_t mi = 0; mi < out.methods.size(); ++mi) {
        const MetricsRow* found = nullptr;
        for (const auto& r : table.rows)
          if (r.method == out.methods[mi] && r.shift_id == setting.shift_id &&
              r.n == setting.n && r.seed == seed)
            found = &r;
        if (!found)
          throw MissingCellError("method " + out.methods[mi] +
                                 " missing in setting " + setting.label() +
                                 " seed " + std::to_string(seed));
        acc[mi] = found->test_top1;
      }
      out.groups.push_back({setting, seed, rank_descending(acc)});
    }
  }

  out.median_rank.resize(out.methods.size());
  for (size_t mi = 0; mi < out.methods.size(); ++mi) {
    std::vector<double> ranks;
    ranks.reserve(out.groups.size());
    for (const auto& g : out.groups) ranks.push_back(g.ranks[mi]);
    out.median_rank[mi] = median_of(std::move(ranks));
  }
  return out;
}

}  // namespace shiftbench

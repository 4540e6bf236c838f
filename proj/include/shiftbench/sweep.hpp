#pragma once

#include <atomic>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "shiftbench/errors.hpp"
#include "shiftbench/features.hpp"
#include "shiftbench/jsonio.hpp"
#include "shiftbench/metrics.hpp"
#include "shiftbench/shift_engine.hpp"
#include "shiftbench/trainer.hpp"

namespace shiftbench {

struct MethodSpec {
  std::string name;
  SamplerMode mode = SamplerMode::plain;
  double alpha = 0.0;
  std::vector<TransformSetting> transforms;
  ModelSpec::Kind model_kind = ModelSpec::Kind::mlp1;
  size_t hidden = 64;
};

struct ShiftEntry {
  std::string id;
  ShiftSpec spec;
};

// A hyperparameter grid as a map of lists; the grid order is the cartesian
// product with keys alphabetical and the last key varying fastest.
using HyperGrid = std::map<std::string, std::vector<double>>;

struct HyperChoice {
  std::vector<std::pair<std::string, double>> values;

  std::string label() const {
    std::string out;
    for (size_t i = 0; i < values.size(); ++i) {
      if (i) out += ';';
      out += values[i].first + '=' + format_float9(values[i].second);
    }
    return out.empty() ? "default" : out;
  }

  void apply(TrainConfig& config) const {
    for (const auto& [key, value] : values) {
      if (key == "learning_rate") {
        config.learning_rate = value;
      } else if (key == "batch_size") {
        config.batch_size = static_cast<size_t>(value);
      } else if (key == "max_steps") {
        config.max_steps = static_cast<uint64_t>(value);
      } else if (key == "eval_every") {
        config.eval_every = static_cast<uint64_t>(value);
      } else if (key == "patience") {
        config.patience = static_cast<size_t>(value);
      } else {
        throw ValidationError("/sweep/hyper/" + key, "unknown hyperparameter");
      }
    }
  }
};

inline std::vector<HyperChoice> enumerate_grid(const HyperGrid& grid) {
  std::vector<HyperChoice> out;
  out.push_back({});
  for (const auto& [key, values] : grid) {
    if (values.empty()) throw ValidationError("/sweep/hyper/" + key, "empty list");
    std::vector<HyperChoice> next;
    next.reserve(out.size() * values.size());
    for (const auto& partial : out) {
      for (double v : values) {
        HyperChoice c = partial;
        c.values.emplace_back(key, v);
        next.push_back(std::move(c));
      }
    }
    out = std::move(next);
  }
  return out;
}

struct SweepSpec {
  std::vector<MethodSpec> methods;
  std::vector<ShiftEntry> shifts;
  size_t num_seeds = 5;
  HyperGrid hyper;
  TrainConfig base_config;

  void validate(const AttributeSchema& schema) const {
    if (methods.empty()) throw ValidationError("/sweep/methods", "empty");
    if (shifts.empty()) throw ValidationError("/sweep/shifts", "empty");
    if (num_seeds < 1) throw ValidationError("/sweep/seeds", "must be >= 1");
    std::set<std::string> names;
    for (const auto& m : methods) {
      if (!names.insert(m.name).second)
        throw ValidationError("/sweep/methods", "duplicate name: " + m.name);
      validate_transforms(m.transforms);
      if (m.alpha < 0.0 || m.alpha > 1.0)
        throw ValidationError("/sweep/methods", m.name + ": alpha outside [0,1]");
    }
    for (const auto& s : shifts) s.spec.validate(schema);
    base_config.validate();
    enumerate_grid(hyper);
  }

  // Digest over the sweep definition; guards resume against stale logs.
  std::string digest(uint64_t master_seed) const {
    std::string repr = "seed=" + std::to_string(master_seed);
    for (const auto& m : methods) {
      repr += "|m:" + m.name + ':' + sampler_mode_name(m.mode) + ':' +
              format_float9(m.alpha) + ':' + ModelSpec::kind_name(m.model_kind) +
              ':' + std::to_string(m.hidden);
      for (const auto& t : m.transforms)
        repr += ':' + t.name + (t.enabled ? "+" : "-") + format_float9(t.magnitude);
    }
    for (const auto& s : shifts) repr += "|s:" + s.id + ':' + s.spec.to_canonical_json();
    repr += "|seeds:" + std::to_string(num_seeds);
    for (const auto& [k, vs] : hyper) {
      repr += "|h:" + k;
      for (double v : vs) repr += ':' + format_float9(v);
    }
    repr += "|cfg:" + format_float9(base_config.learning_rate) + ':' +
            std::to_string(base_config.batch_size) + ':' +
            std::to_string(base_config.max_steps) + ':' +
            std::to_string(base_config.patience) + ':' +
            std::to_string(base_config.eval_every);
    return to_hex16(fnv1a64(repr));
  }
};

namespace seed_tag {
inline constexpr uint64_t kSweepShift = fnv1a64("sweep-shift");
inline constexpr uint64_t kSweepTrain = fnv1a64("sweep-train");
inline constexpr uint64_t kSweepSampler = fnv1a64("sweep-sampler");
}  // namespace seed_tag

// Model selection over the hyperparameter grid: highest validation accuracy,
// ties resolved to the first grid entry.
inline size_t select_best_index(std::span<const double> val_accuracies) {
  if (val_accuracies.empty()) throw DegenerateError("empty selection");
  size_t best = 0;
  for (size_t i = 1; i < val_accuracies.size(); ++i)
    if (val_accuracies[i] > val_accuracies[best]) best = i;
  return best;
}

// Append-only JSON-lines run log; one object per completed cell.
class RunLog {
 public:
  RunLog(std::string path, std::string sweep_digest)
      : path_(std::move(path)), digest_(std::move(sweep_digest)) {}

  // Rows from a previous run of the same sweep, keyed by cell.
  std::map<std::string, MetricsRow> load_completed() const {
    std::map<std::string, MetricsRow> done;
    if (path_.empty()) return done;
    std::ifstream in(path_);
    if (!in) return done;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception&) {
        continue;  // torn tail line from an interrupted run
      }
      if (doc.value("sweep_digest", "") != digest_) continue;
      MetricsRow row;
      row.method = doc.value("method", "");
      row.shift_id = doc.value("shift", "");
      row.n = doc.value("n", uint64_t{0});
      row.seed = doc.value("seed", uint64_t{0});
      row.hyper = doc.value("hyper", "");
      row.val_top1 = doc.value("val_top1", 0.0);
      row.test_top1 = doc.value("test_top1", 0.0);
      done[key(row.method, row.shift_id, row.n, row.seed)] = row;
    }
    return done;
  }

  void append(const MetricsRow& row, const std::string& model_digest) {
    if (path_.empty()) return;
    std::string line = "{\"method\":\"" + json_escape(row.method) + "\"";
    line += ",\"shift\":\"" + json_escape(row.shift_id) + "\"";
    line += ",\"n\":" + std::to_string(row.n);
    line += ",\"seed\":" + std::to_string(row.seed);
    line += ",\"hyper\":\"" + json_escape(row.hyper) + "\"";
    line += ",\"val_top1\":" + format_float9(row.val_top1);
    line += ",\"test_top1\":" + format_float9(row.test_top1);
    line += ",\"model_digest\":\"" + json_escape(model_digest) + "\"";
    line += ",\"sweep_digest\":\"" + digest_ + "\"}\n";
    std::lock_guard<std::mutex> lock(mutex_);
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("cannot append run log: " + path_);
    out << line;
    if (!out.good()) throw IoError("run log write failure: " + path_);
  }

  static std::string key(const std::string& method, const std::string& shift,
                         uint64_t n, uint64_t seed) {
    return method + '\x1f' + shift + '\x1f' + std::to_string(n) + '\x1f' +
           std::to_string(seed);
  }

 private:
  std::string path_;
  std::string digest_;
  std::mutex mutex_;
};

// Runs the (method x shift x seed) grid: one manifest per (shift, seed), one
// training per hyperparameter choice, best-by-validation selection (ties to
// the first grid entry), test accuracy of the selected model. Cells run in
// parallel over `jobs` workers; the metrics table order is canonical
// regardless of completion order.
inline MetricsTable run_sweep(const SweepSpec& sweep,
                              const AttributedDataset& dataset,
                              const AttributeSchema& schema,
                              uint64_t master_seed,
                              const std::string& log_path = "",
                              size_t jobs = 1) {
  sweep.validate(schema);
  DataAccess access(dataset);
  auto grid = enumerate_grid(sweep.hyper);

  bool needs_oracle = false;
  for (const auto& m : sweep.methods)
    if (m.mode == SamplerMode::mixture && m.alpha > 0.0) needs_oracle = true;
  std::optional<SpriteSwapOracle> oracle;
  if (needs_oracle) oracle.emplace(schema);

  // Manifests are shared by every method in a (shift, seed) cell; the
  // shift seed varies with the run seed so low-data draws differ per seed.
  size_t n_shift_cells = sweep.shifts.size() * sweep.num_seeds;
  std::vector<SplitManifest> manifests(n_shift_cells);
  for (size_t si = 0; si < sweep.shifts.size(); ++si) {
    for (size_t seed_idx = 0; seed_idx < sweep.num_seeds; ++seed_idx) {
      uint64_t shift_seed =
          derive_seed(master_seed, seed_tag::kSweepShift, si, seed_idx);
      manifests[si * sweep.num_seeds + seed_idx] =
          build_manifest(dataset, schema, sweep.shifts[si].spec, shift_seed);
    }
  }

  RunLog log(log_path, sweep.digest(master_seed));
  auto completed = log.load_completed();

  struct Cell {
    size_t mi, si, seed_idx;
  };
  std::vector<Cell> cells;
  for (size_t mi = 0; mi < sweep.methods.size(); ++mi)
    for (size_t si = 0; si < sweep.shifts.size(); ++si)
      for (size_t seed_idx = 0; seed_idx < sweep.num_seeds; ++seed_idx)
        cells.push_back({mi, si, seed_idx});

  std::vector<MetricsRow> rows(cells.size());
  std::atomic<size_t> next_cell{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&]() {
    while (true) {
      size_t c = next_cell.fetch_add(1);
      if (c >= cells.size()) return;
      {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error) return;
      }
      const Cell& cell = cells[c];
      const MethodSpec& method = sweep.methods[cell.mi];
      const ShiftEntry& shift = sweep.shifts[cell.si];
      try {
        auto done_it = completed.find(RunLog::key(
            method.name, shift.id, shift.spec.n, cell.seed_idx));
        if (done_it != completed.end()) {
          rows[c] = done_it->second;
          continue;
        }

        const SplitManifest& manifest =
            manifests[cell.si * sweep.num_seeds + cell.seed_idx];
        ModelSpec spec;
        spec.kind = method.model_kind;
        spec.hidden = method.hidden;
        spec.input_dim = access.feature_dim();
        spec.num_classes = schema.num_label_values();

        std::optional<TrainedModel> best;
        std::vector<double> val_accuracies;
        for (size_t hi = 0; hi < grid.size(); ++hi) {
          TrainConfig config = sweep.base_config;
          config.transforms = method.transforms;
          grid[hi].apply(config);
          uint64_t train_seed = derive_seed(master_seed, seed_tag::kSweepTrain,
                                            cell.si, cell.seed_idx, cell.mi, hi);
          TrainingSampler sampler = make_training_sampler(
              manifest, dataset, schema, method.mode, method.alpha,
              oracle ? &*oracle : nullptr,
              derive_seed(train_seed, seed_tag::kSweepSampler));
          TrainedModel model = train(spec, config, manifest, access,
                                     std::move(sampler), train_seed);
          val_accuracies.push_back(model.best_val_top1);
          if (!best || model.best_val_top1 > best->best_val_top1)
            best = std::move(model);
        }
        size_t chosen = select_best_index(val_accuracies);

        MetricsRow row;
        row.method = method.name;
        row.shift_id = shift.id;
        row.n = shift.spec.n;
        row.seed = cell.seed_idx;
        row.hyper = grid[chosen].label();
        row.val_top1 = best->best_val_top1;
        row.test_top1 = evaluate_top1(*best, manifest.test, access);
        rows[c] = row;
        log.append(row, best->param_digest());
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) {
          std::string where = " [cell method=" + method.name +
                              " shift=" + shift.id +
                              " n=" + std::to_string(shift.spec.n) +
                              " seed=" + std::to_string(cell.seed_idx) + "]";
          try {
            throw;
          } catch (const Error& e) {
            std::string message = e.what();
            std::string prefix = e.code() + ": ";
            if (message.rfind(prefix, 0) == 0) message = message.substr(prefix.size());
            first_error = std::make_exception_ptr(Error(e.code(), message + where));
          } catch (...) {
            first_error = std::current_exception();
          }
        }
      }
    }
  };

  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  MetricsTable table;
  table.rows = std::move(rows);
  table.validate();
  return table;
}

}  // namespace shiftbench

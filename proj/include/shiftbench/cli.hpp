#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "shiftbench/errors.hpp"
#include "shiftbench/features.hpp"
#include "shiftbench/jsonio.hpp"
#include "shiftbench/manifest.hpp"
#include "shiftbench/metrics.hpp"
#include "shiftbench/report.hpp"
#include "shiftbench/sampler.hpp"
#include "shiftbench/schema.hpp"
#include "shiftbench/shift_engine.hpp"
#include "shiftbench/shift_spec.hpp"
#include "shiftbench/sprites.hpp"
#include "shiftbench/sweep.hpp"
#include "shiftbench/trainer.hpp"

namespace shiftbench {

namespace cfg {

// Typed field access with JSON-pointer error paths. Reasons follow a fixed
// vocabulary: required / type / range / enum.

inline const nlohmann::json& require(const nlohmann::json& doc,
                                     const std::string& path,
                                     const std::string& key) {
  if (!doc.is_object() || !doc.contains(key))
    throw ValidationError(path + "/" + key, "required");
  return doc.at(key);
}

inline std::string req_string(const nlohmann::json& doc, const std::string& path,
                              const std::string& key) {
  const auto& v = require(doc, path, key);
  if (!v.is_string()) throw ValidationError(path + "/" + key, "type");
  return v.get<std::string>();
}

inline uint64_t req_uint(const nlohmann::json& doc, const std::string& path,
                         const std::string& key) {
  const auto& v = require(doc, path, key);
  if (!v.is_number_integer()) throw ValidationError(path + "/" + key, "type");
  if (!v.is_number_unsigned() && v.get<int64_t>() < 0)
    throw ValidationError(path + "/" + key, "range");
  return v.get<uint64_t>();
}

inline double req_double(const nlohmann::json& doc, const std::string& path,
                         const std::string& key) {
  const auto& v = require(doc, path, key);
  if (!v.is_number()) throw ValidationError(path + "/" + key, "type");
  return v.get<double>();
}

inline uint64_t opt_uint(const nlohmann::json& doc, const std::string& path,
                         const std::string& key, uint64_t fallback) {
  if (!doc.is_object() || !doc.contains(key)) return fallback;
  return req_uint(doc, path, key);
}

inline double opt_double(const nlohmann::json& doc, const std::string& path,
                         const std::string& key, double fallback) {
  if (!doc.is_object() || !doc.contains(key)) return fallback;
  return req_double(doc, path, key);
}

inline std::string opt_string(const nlohmann::json& doc, const std::string& path,
                              const std::string& key, const std::string& fallback) {
  if (!doc.is_object() || !doc.contains(key)) return fallback;
  return req_string(doc, path, key);
}

inline bool opt_bool(const nlohmann::json& doc, const std::string& path,
                     const std::string& key, bool fallback) {
  if (!doc.is_object() || !doc.contains(key)) return fallback;
  const auto& v = doc.at(key);
  if (!v.is_boolean()) throw ValidationError(path + "/" + key, "type");
  return v.get<bool>();
}

inline void check_range(bool ok, const std::string& path) {
  if (!ok) throw ValidationError(path, "range");
}

inline std::vector<TransformSetting> parse_transforms(const nlohmann::json& doc,
                                                      const std::string& path) {
  std::vector<TransformSetting> out;
  if (!doc.is_array()) throw ValidationError(path, "type");
  for (size_t i = 0; i < doc.size(); ++i) {
    std::string p = path + "/" + std::to_string(i);
    const auto& t = doc.at(i);
    TransformSetting ts;
    ts.name = req_string(t, p, "name");
    ts.enabled = opt_bool(t, p, "enabled", true);
    ts.magnitude = opt_double(t, p, "magnitude", 0.0);
    bool known = false;
    for (const char* name : transform_registry()) known |= (ts.name == name);
    if (!known) throw ValidationError(p + "/name", "enum");
    out.push_back(std::move(ts));
  }
  return out;
}

inline ShiftSpec parse_shift_spec(const nlohmann::json& doc,
                                  const std::string& path) {
  std::string kind = req_string(doc, path, "kind");
  if (kind != "spurious_correlation" && kind != "low_data" && kind != "unseen")
    throw ValidationError(path + "/kind", "enum");
  double noise_p = opt_double(doc, path, "noise_p", 0.0);
  check_range(noise_p >= 0.0 && noise_p <= 1.0, path + "/noise_p");
  double val_fraction = opt_double(doc, path, "val_fraction", 0.1);
  check_range(val_fraction > 0.0 && val_fraction < 1.0, path + "/val_fraction");
  uint64_t test_per_cell = opt_uint(doc, path, "test_per_cell", 1);
  check_range(test_per_cell >= 1, path + "/test_per_cell");
  if (doc.contains("size_cap") && !doc.at("size_cap").is_null()) {
    const auto& cap = doc.at("size_cap");
    uint64_t n_total = req_uint(cap, path + "/size_cap", "n_total");
    check_range(n_total >= 1, path + "/size_cap/n_total");
    double ratio = req_double(cap, path + "/size_cap", "ratio");
    check_range(ratio >= 0.0 && ratio <= 1.0, path + "/size_cap/ratio");
  }
  try {
    return ShiftSpec::from_json_value(doc);
  } catch (const ParseError& e) {
    throw ValidationError(path, std::string("type (") + e.what() + ")");
  }
}

inline TrainConfig parse_train_config(const nlohmann::json& doc,
                                      const std::string& path) {
  TrainConfig config;
  config.learning_rate = opt_double(doc, path, "learning_rate", config.learning_rate);
  check_range(config.learning_rate > 0.0, path + "/learning_rate");
  config.batch_size = opt_uint(doc, path, "batch_size", config.batch_size);
  check_range(config.batch_size >= 1, path + "/batch_size");
  config.max_steps = opt_uint(doc, path, "max_steps", config.max_steps);
  config.patience = opt_uint(doc, path, "patience", config.patience);
  check_range(config.patience >= 1, path + "/patience");
  config.eval_every = opt_uint(doc, path, "eval_every", config.eval_every);
  check_range(config.eval_every >= 1, path + "/eval_every");
  std::string opt = opt_string(doc, path, "optimizer", "adam");
  if (opt == "adam") {
    config.optimizer = TrainConfig::Optimizer::adam;
  } else if (opt == "sgd") {
    config.optimizer = TrainConfig::Optimizer::sgd;
  } else {
    throw ValidationError(path + "/optimizer", "enum");
  }
  if (doc.contains("transforms"))
    config.transforms = parse_transforms(doc.at("transforms"), path + "/transforms");
  return config;
}

inline std::pair<ModelSpec::Kind, size_t> parse_model(const nlohmann::json& doc,
                                                      const std::string& path) {
  std::string kind = req_string(doc, path, "kind");
  if (kind != "softmax_linear" && kind != "mlp1")
    throw ValidationError(path + "/kind", "enum");
  size_t hidden = opt_uint(doc, path, "hidden", 64);
  if (kind == "mlp1") check_range(hidden >= 1, path + "/hidden");
  return {ModelSpec::kind_from_name(kind), hidden};
}

}  // namespace cfg

struct GenDataCmd {
  size_t per_cell = 0;
  std::string out;
  size_t label_axis = 0;
  size_t nuisance_axis = 1;
};

struct MakeShiftCmd {
  std::string schema_path, dataset_path, out;
  ShiftSpec spec;
  bool reweight = false;
};

struct SampleCmd {
  std::string manifest_path, out;
  uint64_t count = 0;
};

struct TrainCmd {
  std::string schema_path, dataset_path, manifest_path, out, metrics_out, name;
  ModelSpec::Kind model_kind = ModelSpec::Kind::mlp1;
  size_t hidden = 64;
  TrainConfig train;
  SamplerMode mode = SamplerMode::plain;
  double alpha = 0.0;
};

struct SweepCmd {
  std::string schema_path, dataset_path, out;
  SweepSpec sweep;
  size_t jobs = 1;
};

struct ReportCmd {
  std::string metrics_path, out, baseline, kind, format;
  bool per_seed_ratio = false;
};

struct RunConfig {
  std::string cmd;
  uint64_t seed = 0;
  std::string digest;  // over the canonical parsed config
  std::variant<GenDataCmd, MakeShiftCmd, SampleCmd, TrainCmd, SweepCmd, ReportCmd>
      payload;
};

inline RunConfig parse_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("", "type");

  RunConfig config;
  config.digest = to_hex16(fnv1a64(doc.dump()));
  config.cmd = cfg::req_string(doc, "", "cmd");

  if (config.cmd == "gen-data") {
    GenDataCmd cmd;
    cmd.per_cell = cfg::req_uint(doc, "", "per_cell");
    cfg::check_range(cmd.per_cell >= 1, "/per_cell");
    config.seed = cfg::req_uint(doc, "", "seed");
    cmd.out = cfg::req_string(doc, "", "out");
    std::string label_attr = cfg::opt_string(doc, "", "label_attr", "shape");
    if (label_attr == "shape") {
      cmd.label_axis = 0;
      cmd.nuisance_axis = 1;
    } else if (label_attr == "color") {
      cmd.label_axis = 1;
      cmd.nuisance_axis = 0;
    } else {
      throw ValidationError("/label_attr", "enum");
    }
    config.payload = cmd;
  } else if (config.cmd == "make-shift") {
    MakeShiftCmd cmd;
    cmd.schema_path = cfg::req_string(doc, "", "schema");
    cmd.dataset_path = cfg::req_string(doc, "", "dataset");
    cmd.out = cfg::req_string(doc, "", "out");
    config.seed = cfg::req_uint(doc, "", "seed");
    cmd.spec = cfg::parse_shift_spec(cfg::require(doc, "", "spec"), "/spec");
    cmd.reweight = cfg::opt_bool(doc, "", "reweight", false);
    config.payload = cmd;
  } else if (config.cmd == "sample") {
    SampleCmd cmd;
    cmd.manifest_path = cfg::req_string(doc, "", "manifest");
    cmd.count = cfg::req_uint(doc, "", "count");
    cmd.out = cfg::req_string(doc, "", "out");
    config.seed = cfg::req_uint(doc, "", "seed");
    config.payload = cmd;
  } else if (config.cmd == "train") {
    TrainCmd cmd;
    cmd.schema_path = cfg::req_string(doc, "", "schema");
    cmd.dataset_path = cfg::req_string(doc, "", "dataset");
    cmd.manifest_path = cfg::req_string(doc, "", "manifest");
    cmd.out = cfg::req_string(doc, "", "out");
    cmd.metrics_out = cfg::opt_string(doc, "", "metrics_out", "");
    config.seed = cfg::req_uint(doc, "", "seed");
    auto [kind, hidden] = cfg::parse_model(cfg::require(doc, "", "model"), "/model");
    cmd.model_kind = kind;
    cmd.hidden = hidden;
    if (doc.contains("train"))
      cmd.train = cfg::parse_train_config(doc.at("train"), "/train");
    if (doc.contains("sampler")) {
      const auto& s = doc.at("sampler");
      std::string mode = cfg::req_string(s, "/sampler", "mode");
      if (mode != "plain" && mode != "reweight" && mode != "mixture")
        throw ValidationError("/sampler/mode", "enum");
      cmd.mode = sampler_mode_from_name(mode);
      cmd.alpha = cfg::opt_double(s, "/sampler", "alpha", 0.0);
      cfg::check_range(cmd.alpha >= 0.0 && cmd.alpha <= 1.0, "/sampler/alpha");
    }
    cmd.name = cfg::opt_string(doc, "", "name", sampler_mode_name(cmd.mode));
    config.payload = cmd;
  } else if (config.cmd == "sweep") {
    SweepCmd cmd;
    cmd.schema_path = cfg::req_string(doc, "", "schema");
    cmd.dataset_path = cfg::req_string(doc, "", "dataset");
    cmd.out = cfg::req_string(doc, "", "out");
    config.seed = cfg::req_uint(doc, "", "seed");
    cmd.jobs = cfg::opt_uint(doc, "", "jobs", 1);
    cfg::check_range(cmd.jobs >= 1, "/jobs");

    const auto& sw = cfg::require(doc, "", "sweep");
    const auto& methods = cfg::require(sw, "/sweep", "methods");
    if (!methods.is_array() || methods.empty())
      throw ValidationError("/sweep/methods", "type");
    for (size_t i = 0; i < methods.size(); ++i) {
      std::string p = "/sweep/methods/" + std::to_string(i);
      const auto& m = methods.at(i);
      MethodSpec ms;
      ms.name = cfg::req_string(m, p, "name");
      std::string mode = cfg::opt_string(m, p, "sampler", "plain");
      if (mode != "plain" && mode != "reweight" && mode != "mixture")
        throw ValidationError(p + "/sampler", "enum");
      ms.mode = sampler_mode_from_name(mode);
      ms.alpha = cfg::opt_double(m, p, "alpha", 0.0);
      cfg::check_range(ms.alpha >= 0.0 && ms.alpha <= 1.0, p + "/alpha");
      if (m.contains("model")) {
        auto [kind, hidden] = cfg::parse_model(m.at("model"), p + "/model");
        ms.model_kind = kind;
        ms.hidden = hidden;
      }
      if (m.contains("transforms"))
        ms.transforms = cfg::parse_transforms(m.at("transforms"), p + "/transforms");
      cmd.sweep.methods.push_back(std::move(ms));
    }
    const auto& shifts = cfg::require(sw, "/sweep", "shifts");
    if (!shifts.is_array() || shifts.empty())
      throw ValidationError("/sweep/shifts", "type");
    for (size_t i = 0; i < shifts.size(); ++i) {
      std::string p = "/sweep/shifts/" + std::to_string(i);
      const auto& s = shifts.at(i);
      ShiftEntry entry;
      entry.spec = cfg::parse_shift_spec(s, p);
      entry.id = cfg::opt_string(s, p, "id", shift_kind_name(entry.spec.kind));
      cmd.sweep.shifts.push_back(std::move(entry));
    }
    cmd.sweep.num_seeds = cfg::opt_uint(sw, "/sweep", "seeds", 5);
    cfg::check_range(cmd.sweep.num_seeds >= 1, "/sweep/seeds");
    if (sw.contains("hyper")) {
      const auto& hyper = sw.at("hyper");
      if (!hyper.is_object()) throw ValidationError("/sweep/hyper", "type");
      for (const auto& [key, values] : hyper.items()) {
        if (!values.is_array() || values.empty())
          throw ValidationError("/sweep/hyper/" + key, "type");
        std::vector<double> list;
        for (const auto& v : values) {
          if (!v.is_number()) throw ValidationError("/sweep/hyper/" + key, "type");
          list.push_back(v.get<double>());
        }
        cmd.sweep.hyper[key] = std::move(list);
      }
    }
    if (sw.contains("train"))
      cmd.sweep.base_config = cfg::parse_train_config(sw.at("train"), "/sweep/train");
    config.payload = cmd;
  } else if (config.cmd == "report") {
    ReportCmd cmd;
    cmd.metrics_path = cfg::req_string(doc, "", "metrics");
    cmd.out = cfg::req_string(doc, "", "out");
    cmd.kind = cfg::req_string(doc, "", "kind");
    if (cmd.kind != "percent_change" && cmd.kind != "mean_std" && cmd.kind != "ranks")
      throw ValidationError("/kind", "enum");
    cmd.format = cfg::opt_string(doc, "", "format", "csv");
    if (cmd.format != "csv" && cmd.format != "svg" && cmd.format != "json")
      throw ValidationError("/format", "enum");
    cmd.baseline = cfg::opt_string(doc, "", "baseline", "");
    if (cmd.kind == "percent_change" && cmd.baseline.empty())
      throw ValidationError("/baseline", "required");
    cmd.per_seed_ratio = cfg::opt_bool(doc, "", "per_seed_ratio", false);
    config.payload = cmd;
  } else {
    throw ValidationError("/cmd", "enum");
  }
  return config;
}

namespace detail {

inline void ensure_parent_dir(const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

// Input files must exist when a command dispatches.
inline void require_inputs(
    std::initializer_list<std::pair<const char*, const std::string*>> inputs) {
  for (const auto& [key, path] : inputs) {
    if (!std::filesystem::exists(*path))
      throw ValidationError(std::string("/") + key, "missing file: " + *path);
  }
}

inline AggregateMatrix mean_matrix(const MetricsTable& table) {
  auto summary = aggregate_mean_std(table);
  AggregateMatrix matrix;
  matrix.methods = detail::methods_in_order(table);
  matrix.settings = detail::settings_in_order(table);
  matrix.cells.assign(matrix.methods.size(),
                      std::vector<double>(matrix.settings.size(),
                                          std::numeric_limits<double>::quiet_NaN()));
  for (const auto& row : summary) {
    size_t mi = static_cast<size_t>(
        std::find(matrix.methods.begin(), matrix.methods.end(), row.method) -
        matrix.methods.begin());
    Setting s{row.shift_id, row.n};
    size_t si = static_cast<size_t>(
        std::find(matrix.settings.begin(), matrix.settings.end(), s) -
        matrix.settings.begin());
    matrix.cells[mi][si] = row.mean;
  }
  return matrix;
}

inline AggregateMatrix median_rank_matrix(const MetricsTable& table,
                                          const RankResult& ranks) {
  AggregateMatrix matrix;
  matrix.methods = ranks.methods;
  matrix.settings = detail::settings_in_order(table);
  matrix.cells.assign(matrix.methods.size(),
                      std::vector<double>(matrix.settings.size(), 0.0));
  for (size_t si = 0; si < matrix.settings.size(); ++si) {
    for (size_t mi = 0; mi < matrix.methods.size(); ++mi) {
      std::vector<double> vals;
      for (const auto& g : ranks.groups)
        if (g.setting == matrix.settings[si]) vals.push_back(g.ranks[mi]);
      matrix.cells[mi][si] = median_of(std::move(vals));
    }
  }
  return matrix;
}

}  // namespace detail

inline int dispatch(const RunConfig& config) {
  if (const auto* cmd = std::get_if<GenDataCmd>(&config.payload)) {
    AttributedDataset dataset = gen_sprites(cmd->per_cell, config.seed,
                                            cmd->label_axis, cmd->nuisance_axis);
    std::filesystem::create_directories(cmd->out);
    std::filesystem::path dir(cmd->out);
    write_file((dir / "schema.json").string(), dataset.schema().to_json() + "\n");
    write_file((dir / "dataset.csv").string(), dataset.to_csv());
    write_file((dir / "provenance.json").string(),
               "{\"config_digest\":\"" + config.digest + "\"}\n");
    return 0;
  }

  if (const auto* cmd = std::get_if<MakeShiftCmd>(&config.payload)) {
    detail::require_inputs({{"schema", &cmd->schema_path},
                            {"dataset", &cmd->dataset_path}});
    AttributeSchema schema = load_schema(read_file(cmd->schema_path));
    AttributedDataset dataset = load_dataset(schema, read_file(cmd->dataset_path));
    SplitManifest manifest = build_manifest(dataset, schema, cmd->spec, config.seed);
    if (cmd->reweight)
      manifest = compute_reweight_weights(manifest, dataset, schema);
    detail::ensure_parent_dir(cmd->out);
    manifest.write(cmd->out);
    return 0;
  }

  if (const auto* cmd = std::get_if<SampleCmd>(&config.payload)) {
    detail::require_inputs({{"manifest", &cmd->manifest_path}});
    SplitManifest manifest = read_manifest(cmd->manifest_path);
    if (manifest.train.empty()) throw DegenerateError("manifest has no train entries");
    std::vector<double> weights;
    weights.reserve(manifest.train.size());
    for (const auto& e : manifest.train) weights.push_back(e.weight);
    IndexSampler sampler(weights, config.seed);
    std::string out;
    for (size_t idx : sampler.draw(cmd->count)) {
      out += std::to_string(idx);
      out += '\n';
    }
    detail::ensure_parent_dir(cmd->out);
    write_file(cmd->out, out);
    return 0;
  }

  if (const auto* cmd = std::get_if<TrainCmd>(&config.payload)) {
    detail::require_inputs({{"schema", &cmd->schema_path},
                            {"dataset", &cmd->dataset_path},
                            {"manifest", &cmd->manifest_path}});
    AttributeSchema schema = load_schema(read_file(cmd->schema_path));
    AttributedDataset dataset = load_dataset(schema, read_file(cmd->dataset_path));
    SplitManifest manifest = read_manifest(cmd->manifest_path);
    DataAccess access(dataset);

    ModelSpec spec;
    spec.kind = cmd->model_kind;
    spec.hidden = cmd->hidden;
    spec.input_dim = access.feature_dim();
    spec.num_classes = schema.num_label_values();

    std::optional<SpriteSwapOracle> oracle;
    if (cmd->mode == SamplerMode::mixture && cmd->alpha > 0.0)
      oracle.emplace(schema);
    TrainingSampler sampler = make_training_sampler(
        manifest, dataset, schema, cmd->mode, cmd->alpha,
        oracle ? &*oracle : nullptr,
        derive_seed(config.seed, fnv1a64("cli-sampler")));
    TrainedModel model =
        train(spec, cmd->train, manifest, access, std::move(sampler), config.seed);

    detail::ensure_parent_dir(cmd->out);
    model.save(cmd->out, config.digest);

    double test_top1 = evaluate_top1(model, manifest.test, access);
    if (!cmd->metrics_out.empty()) {
      MetricsTable table;
      MetricsRow row;
      row.method = cmd->name;
      row.shift_id = manifest.spec_digest;
      row.n = 0;
      row.seed = config.seed;
      row.hyper = "lr=" + format_float9(cmd->train.learning_rate);
      row.val_top1 = model.best_val_top1;
      row.test_top1 = test_top1;
      table.rows.push_back(std::move(row));
      detail::ensure_parent_dir(cmd->metrics_out);
      write_file(cmd->metrics_out, table.to_csv(config.digest));
    }
    std::cout << "{\"val_top1\":" << format_float9(model.best_val_top1)
              << ",\"test_top1\":" << format_float9(test_top1)
              << ",\"steps_run\":" << model.steps_run << ",\"param_digest\":\""
              << model.param_digest() << "\"}" << std::endl;
    return 0;
  }

  if (const auto* cmd = std::get_if<SweepCmd>(&config.payload)) {
    detail::require_inputs({{"schema", &cmd->schema_path},
                            {"dataset", &cmd->dataset_path}});
    AttributeSchema schema = load_schema(read_file(cmd->schema_path));
    AttributedDataset dataset = load_dataset(schema, read_file(cmd->dataset_path));
    std::filesystem::create_directories(cmd->out);
    std::filesystem::path dir(cmd->out);
    MetricsTable table =
        run_sweep(cmd->sweep, dataset, schema, config.seed,
                  (dir / "runlog.jsonl").string(), cmd->jobs);
    write_file((dir / "metrics.csv").string(), table.to_csv(config.digest));
    return 0;
  }

  if (const auto* cmd = std::get_if<ReportCmd>(&config.payload)) {
    detail::require_inputs({{"metrics", &cmd->metrics_path}});
    MetricsTable table = MetricsTable::from_csv(read_file(cmd->metrics_path));
    if (table.rows.empty()) throw DegenerateError("empty metrics table");
    detail::ensure_parent_dir(cmd->out);

    if (cmd->kind == "percent_change") {
      AggregateMatrix matrix =
          percent_change(table, cmd->baseline, cmd->per_seed_ratio);
      emit_report(matrix, cmd->format, cmd->out,
                  "percent change over " + cmd->baseline, config.digest);
    } else if (cmd->kind == "mean_std") {
      if (cmd->format == "csv") {
        write_file(cmd->out, summary_to_csv(aggregate_mean_std(table), config.digest));
      } else if (cmd->format == "json") {
        auto rows = aggregate_mean_std(table);
        std::string out = "{\"config_digest\":\"" + config.digest + "\",\"rows\":[";
        for (size_t i = 0; i < rows.size(); ++i) {
          if (i) out += ',';
          out += "{\"method\":\"" + json_escape(rows[i].method) + "\",\"shift\":\"" +
                 json_escape(rows[i].shift_id) + "\",\"n\":" +
                 std::to_string(rows[i].n) + ",\"mean\":" +
                 format_float9(rows[i].mean) + ",\"std\":" +
                 format_float9(rows[i].stddev) + ",\"seeds\":" +
                 std::to_string(rows[i].count) + "}";
        }
        out += "]}\n";
        write_file(cmd->out, out);
      } else {
        emit_report(detail::mean_matrix(table), "svg", cmd->out,
                    "mean test top-1", config.digest);
      }
    } else {  // ranks
      RankResult ranks = rank_methods(table);
      if (cmd->format == "csv") {
        write_file(cmd->out, ranks_to_csv(ranks, config.digest));
      } else if (cmd->format == "json") {
        write_file(cmd->out, ranks_to_json(ranks, config.digest) + "\n");
      } else {
        emit_report(detail::median_rank_matrix(table, ranks), "svg", cmd->out,
                    "median rank", config.digest);
      }
    }
    return 0;
  }
  throw ValidationError("/cmd", "enum");
}

// Exit-code contract: 0 success, 1 validation/precondition failure,
// 2 runtime failure. Errors emit one machine-parsable JSON line on stderr.
inline int run_cli(const std::string& config_text) {
  try {
    RunConfig config = parse_config(config_text);
    return dispatch(config);
  } catch (const Error& e) {
    std::string message = e.what();
    std::string prefix = e.code() + ": ";
    if (message.rfind(prefix, 0) == 0) message = message.substr(prefix.size());
    std::cerr << "{\"error\":\"" << e.code() << "\",\"message\":\""
              << json_escape(message) << "\"}" << std::endl;
    bool runtime = e.code() == "IoError" || e.code() == "NonFiniteLossError";
    return runtime ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "{\"error\":\"InternalError\",\"message\":\""
              << json_escape(e.what()) << "\"}" << std::endl;
    return 2;
  }
}

}  // namespace shiftbench

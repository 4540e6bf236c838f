// Command-line surface: gen-data, make-shift, sample, train, sweep, report.
// Flags mirror the config-file keys; on conflict the config file wins and a
// warning is printed.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "shiftbench/cli.hpp"
#include "shiftbench/jsonio.hpp"

namespace {

using nlohmann::json;

// Overlay flag-provided values under config-file values, warning when a flag
// value is discarded.
void merge_flags(json& config, const json& flags) {
  for (const auto& [key, value] : flags.items()) {
    if (!config.contains(key)) {
      config[key] = value;
      continue;
    }
    if (config.at(key).is_object() && value.is_object()) {
      json merged = config.at(key);
      merge_flags(merged, value);
      config[key] = merged;
      continue;
    }
    if (config.at(key) != value)
      std::cerr << "warning: config file overrides flag value for '" << key
                << "'" << std::endl;
  }
}

struct FlagValues {
  std::optional<uint64_t> seed, per_cell, count, jobs, hidden, batch_size,
      max_steps, patience, eval_every;
  std::optional<double> lr, alpha, noise_p, val_fraction;
  std::optional<std::string> out, schema, dataset, manifest, metrics, baseline,
      kind, format, label_attr, name, model_kind, sampler_mode, optimizer,
      metrics_out;
  std::optional<bool> reweight, per_seed_ratio;
};

json flags_to_json(const std::string& cmd, const FlagValues& f) {
  json j;
  j["cmd"] = cmd;
  auto set = [&](const char* key, const auto& opt) {
    if (opt) j[key] = *opt;
  };
  set("seed", f.seed);
  set("per_cell", f.per_cell);
  set("count", f.count);
  set("jobs", f.jobs);
  set("out", f.out);
  set("schema", f.schema);
  set("dataset", f.dataset);
  set("manifest", f.manifest);
  set("metrics", f.metrics);
  set("baseline", f.baseline);
  set("kind", f.kind);
  set("format", f.format);
  set("label_attr", f.label_attr);
  set("name", f.name);
  set("metrics_out", f.metrics_out);
  set("reweight", f.reweight);
  set("per_seed_ratio", f.per_seed_ratio);
  if (f.model_kind || f.hidden) {
    json model;
    if (f.model_kind) model["kind"] = *f.model_kind;
    if (f.hidden) model["hidden"] = *f.hidden;
    j["model"] = model;
  }
  if (f.sampler_mode || f.alpha) {
    json sampler;
    sampler["mode"] = f.sampler_mode.value_or("plain");
    if (f.alpha) sampler["alpha"] = *f.alpha;
    j["sampler"] = sampler;
  }
  json train;
  if (f.lr) train["learning_rate"] = *f.lr;
  if (f.batch_size) train["batch_size"] = *f.batch_size;
  if (f.max_steps) train["max_steps"] = *f.max_steps;
  if (f.patience) train["patience"] = *f.patience;
  if (f.eval_every) train["eval_every"] = *f.eval_every;
  if (f.optimizer) train["optimizer"] = *f.optimizer;
  if (!train.empty()) j["train"] = train;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic distribution-shift benchmark pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  FlagValues f;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", f.seed, "master seed (no wall-clock seeding)");
    sub->add_option("--out", f.out, "output path");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate the sprites dataset");
  add_common(gen);
  gen->add_option("--per-cell", f.per_cell, "records per (shape,color) cell");
  gen->add_option("--label-attr", f.label_attr, "label attribute: shape|color");

  CLI::App* shift = app.add_subcommand("make-shift", "materialize a shift manifest");
  add_common(shift);
  shift->add_option("--schema", f.schema);
  shift->add_option("--dataset", f.dataset);
  shift->add_flag("--reweight", f.reweight, "store importance weights");

  CLI::App* sample = app.add_subcommand("sample", "export sampled train indices");
  add_common(sample);
  sample->add_option("--manifest", f.manifest);
  sample->add_option("--count", f.count);

  CLI::App* train = app.add_subcommand("train", "train one classifier");
  add_common(train);
  train->add_option("--schema", f.schema);
  train->add_option("--dataset", f.dataset);
  train->add_option("--manifest", f.manifest);
  train->add_option("--name", f.name, "method name for the metrics row");
  train->add_option("--model-kind", f.model_kind, "softmax_linear|mlp1");
  train->add_option("--hidden", f.hidden);
  train->add_option("--lr", f.lr);
  train->add_option("--batch-size", f.batch_size);
  train->add_option("--max-steps", f.max_steps);
  train->add_option("--patience", f.patience);
  train->add_option("--eval-every", f.eval_every);
  train->add_option("--optimizer", f.optimizer, "adam|sgd");
  train->add_option("--sampler-mode", f.sampler_mode, "plain|reweight|mixture");
  train->add_option("--alpha", f.alpha, "synthetic fraction for mixture");
  train->add_option("--metrics-out", f.metrics_out);

  CLI::App* sweep = app.add_subcommand("sweep", "run a method x shift x seed grid");
  add_common(sweep);
  sweep->add_option("--schema", f.schema);
  sweep->add_option("--dataset", f.dataset);
  sweep->add_option("--jobs", f.jobs, "parallel cells");

  CLI::App* report = app.add_subcommand("report", "aggregate a metrics table");
  add_common(report);
  report->add_option("--metrics", f.metrics);
  report->add_option("--kind", f.kind, "percent_change|mean_std|ranks");
  report->add_option("--baseline", f.baseline);
  report->add_option("--format", f.format, "csv|svg|json");
  report->add_flag("--per-seed-ratio", f.per_seed_ratio);

  CLI11_PARSE(app, argc, argv);

  std::string cmd = app.get_subcommands().front()->get_name();
  json config = json::object();
  if (!config_path.empty()) {
    try {
      config = json::parse(shiftbench::read_file(config_path));
    } catch (const shiftbench::Error& e) {
      std::cerr << "{\"error\":\"" << e.code() << "\",\"message\":\""
                << shiftbench::json_escape(e.what()) << "\"}" << std::endl;
      return 2;
    } catch (const json::exception& e) {
      std::cerr << "{\"error\":\"ParseError\",\"message\":\""
                << shiftbench::json_escape(e.what()) << "\"}" << std::endl;
      return 1;
    }
    if (!config.is_object()) {
      std::cerr << "{\"error\":\"ValidationError\",\"message\":\"config root "
                   "must be an object\"}"
                << std::endl;
      return 1;
    }
    if (config.contains("cmd") && config.at("cmd") != cmd) {
      std::cerr << "warning: config file overrides flag value for 'cmd'"
                << std::endl;
    }
  }
  merge_flags(config, flags_to_json(cmd, f));
  return shiftbench::run_cli(config.dump());
}

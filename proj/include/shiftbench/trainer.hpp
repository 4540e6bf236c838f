#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "shiftbench/errors.hpp"
#include "shiftbench/features.hpp"
#include "shiftbench/jsonio.hpp"
#include "shiftbench/manifest.hpp"
#include "shiftbench/model.hpp"
#include "shiftbench/rng.hpp"
#include "shiftbench/sampler.hpp"
#include "shiftbench/shift_engine.hpp"
#include "shiftbench/transforms.hpp"

namespace shiftbench {

struct TrainConfig {
  double learning_rate = 1e-3;
  size_t batch_size = 128;
  uint64_t max_steps = 20000;
  size_t patience = 10;      // early-stop evaluations without improvement
  uint64_t eval_every = 200;  // steps between validation evaluations
  enum class Optimizer : uint8_t { sgd, adam } optimizer = Optimizer::adam;
  std::vector<TransformSetting> transforms;

  void validate() const {
    if (learning_rate <= 0.0) throw RangeError("learning_rate must be > 0");
    if (batch_size < 1) throw RangeError("batch_size must be >= 1");
    if (patience < 1) throw RangeError("patience must be >= 1");
    if (eval_every < 1) throw RangeError("eval_every must be >= 1");
    validate_transforms(transforms);
  }
};

struct TrainedModel {
  ModelSpec spec;
  std::vector<float> parameters;
  double best_val_top1 = 0.0;
  uint64_t steps_run = 0;

  std::string param_digest() const {
    auto bytes = std::as_bytes(std::span<const float>(parameters));
    return to_hex16(fnv1a64(std::span<const uint8_t>(
        reinterpret_cast<const uint8_t*>(bytes.data()), bytes.size())));
  }

  // Header JSON line, then the raw little-endian float32 parameter block.
  void save(const std::string& path, const std::string& config_digest) const {
    std::string header = "{\"spec\":{\"kind\":\"";
    header += ModelSpec::kind_name(spec.kind);
    header += "\",\"input_dim\":" + std::to_string(spec.input_dim);
    header += ",\"num_classes\":" + std::to_string(spec.num_classes);
    header += ",\"hidden\":" + std::to_string(spec.hidden);
    header += "},\"metrics\":{\"best_val_top1\":" + format_float9(best_val_top1);
    header += ",\"steps_run\":" + std::to_string(steps_run);
    header += ",\"param_digest\":\"" + param_digest() + "\"";
    header += ",\"config_digest\":\"" + json_escape(config_digest) + "\"}}\n";

    std::string blob = header;
    size_t bytes = parameters.size() * sizeof(float);
    blob.resize(header.size() + bytes);
    std::memcpy(blob.data() + header.size(), parameters.data(), bytes);
    write_file(path, blob);
  }

  static TrainedModel load(const std::string& path) {
    std::string blob = read_file(path);
    size_t nl = blob.find('\n');
    if (nl == std::string::npos) throw FormatError("model file has no header");
    nlohmann::json header;
    try {
      header = nlohmann::json::parse(blob.substr(0, nl));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("model header: ") + e.what());
    }
    TrainedModel model;
    try {
      const auto& s = header.at("spec");
      model.spec.kind = ModelSpec::kind_from_name(s.at("kind").get<std::string>());
      model.spec.input_dim = s.at("input_dim").get<size_t>();
      model.spec.num_classes = s.at("num_classes").get<size_t>();
      model.spec.hidden = s.at("hidden").get<size_t>();
      model.best_val_top1 = header.at("metrics").at("best_val_top1").get<double>();
      model.steps_run = header.at("metrics").at("steps_run").get<uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("model header: ") + e.what());
    }
    size_t count = model.spec.param_count();
    if (blob.size() - nl - 1 != count * sizeof(float))
      throw FormatError("parameter block size mismatch");
    model.parameters.resize(count);
    std::memcpy(model.parameters.data(), blob.data() + nl + 1,
                count * sizeof(float));
    return model;
  }
};

enum class SamplerMode : uint8_t { plain, reweight, mixture };

inline const char* sampler_mode_name(SamplerMode m) {
  switch (m) {
    case SamplerMode::plain: return "plain";
    case SamplerMode::reweight: return "reweight";
    case SamplerMode::mixture: return "mixture";
  }
  throw FormatError("unreachable sampler mode");
}

inline SamplerMode sampler_mode_from_name(const std::string& s) {
  if (s == "plain") return SamplerMode::plain;
  if (s == "reweight") return SamplerMode::reweight;
  if (s == "mixture") return SamplerMode::mixture;
  throw ParseError("unknown sampler mode: " + s);
}

// The resampling source a training run draws from. `plain` honors the
// weights stored in the manifest; `reweight` and `mixture` recompute the
// uniform-target importance weights first.
struct TrainingSampler {
  std::variant<IndexSampler, MixtureSampler> sampler;
  const AugmentationSource* aug_source = nullptr;
};

inline TrainingSampler make_training_sampler(
    const SplitManifest& manifest, const AttributedDataset& dataset,
    const AttributeSchema& schema, SamplerMode mode, double alpha,
    const AugmentationSource* aug_source, uint64_t seed) {
  if (manifest.train.empty()) throw DegenerateError("empty train split");

  std::vector<double> weights;
  weights.reserve(manifest.train.size());
  if (mode == SamplerMode::plain) {
    for (const auto& e : manifest.train) weights.push_back(e.weight);
  } else {
    SplitManifest reweighted = compute_reweight_weights(manifest, dataset, schema);
    for (const auto& e : reweighted.train) weights.push_back(e.weight);
  }

  IndexSampler base(weights, seed);
  if (mode == SamplerMode::mixture) {
    if (alpha > 0.0 && aug_source == nullptr)
      throw AugSourceError("mixture sampling requires an augmentation source");
    return {MixtureSampler(std::move(base), alpha, schema.num_label_values(),
                           schema.num_nuisance_values(), seed),
            aug_source};
  }
  return {std::move(base), nullptr};
}

namespace detail {

class BatchBuilder {
 public:
  BatchBuilder(const SplitManifest& manifest, const DataAccess& access,
               const TrainConfig& config, size_t input_dim, uint64_t seed)
      : manifest_(&manifest),
        access_(&access),
        config_(&config),
        rng_(derive_seed(seed, fnv1a64("transforms"))),
        x_(static_cast<Eigen::Index>(input_dim),
           static_cast<Eigen::Index>(config.batch_size)),
        labels_(config.batch_size) {
    for (const auto& t : config.transforms) use_transforms_ |= t.enabled;
    if (use_transforms_ && !access.has_images())
      throw DimensionError("transforms require image payloads");
  }

  // Fills the batch from the sampler; returns (inputs, labels).
  void fill(TrainingSampler& ts) {
    if (auto* plain = std::get_if<IndexSampler>(&ts.sampler)) {
      for (size_t i = 0; i < config_->batch_size; ++i)
        fill_real(i, plain->draw_one());
      return;
    }
    auto& mix = std::get<MixtureSampler>(ts.sampler);
    auto slots = mix.draw(config_->batch_size);
    for (size_t i = 0; i < slots.size(); ++i) {
      if (slots[i].source == MixtureSlot::Source::real) {
        fill_real(i, slots[i].index);
      } else {
        const auto& entry = manifest_->train[slots[i].index];
        SpriteImage img = ts.aug_source->sample(access_->record(entry.id),
                                                slots[i].target_label,
                                                slots[i].target_nuisance);
        place_image(i, img);
        labels_[i] = slots[i].target_label;
      }
    }
  }

  const Eigen::MatrixXf& inputs() const { return x_; }
  std::span<const uint32_t> labels() const { return labels_; }

 private:
  void fill_real(size_t col, size_t entry_index) {
    const auto& entry = manifest_->train[entry_index];
    labels_[col] = entry.label_override ? *entry.label_override
                                        : access_->label(entry.id);
    if (use_transforms_) {
      SpriteImage img = access_->image(entry.id);
      apply_transforms(img, config_->transforms, rng_);
      place_image(col, img);
    } else {
      auto feats = access_->features(entry.id);
      std::memcpy(x_.col(static_cast<Eigen::Index>(col)).data(), feats.data(),
                  feats.size() * sizeof(float));
    }
  }

  void place_image(size_t col, const SpriteImage& img) {
    float* dst = x_.col(static_cast<Eigen::Index>(col)).data();
    for (size_t i = 0; i < kSpritePixels; ++i)
      dst[i] = static_cast<float>(img.pixels[i]) / 255.0f;
  }

  const SplitManifest* manifest_;
  const DataAccess* access_;
  const TrainConfig* config_;
  Pcg32 rng_;
  bool use_transforms_ = false;
  Eigen::MatrixXf x_;
  std::vector<uint32_t> labels_;
};

}  // namespace detail

// Fraction of ids whose argmax logit equals the true label.
inline double evaluate_top1(const ModelSpec& spec,
                            std::span<const float> parameters,
                            std::span<const uint64_t> ids,
                            const DataAccess& access) {
  if (ids.empty()) throw DegenerateError("evaluate_top1 on empty id list");
  constexpr size_t kChunk = 512;
  size_t correct = 0;
  Eigen::MatrixXf x(static_cast<Eigen::Index>(spec.input_dim),
                    static_cast<Eigen::Index>(std::min(ids.size(), kChunk)));
  for (size_t start = 0; start < ids.size(); start += kChunk) {
    size_t count = std::min(kChunk, ids.size() - start);
    x.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(count));
    for (size_t i = 0; i < count; ++i) {
      auto feats = access.features(ids[start + i]);
      if (feats.size() != spec.input_dim)
        throw DimensionError("feature dim mismatch at id " +
                             std::to_string(ids[start + i]));
      std::memcpy(x.col(static_cast<Eigen::Index>(i)).data(), feats.data(),
                  feats.size() * sizeof(float));
    }
    Eigen::MatrixXf z = Network<float>::logits(spec, parameters, x);
    for (size_t i = 0; i < count; ++i) {
      Eigen::Index argmax = 0;
      z.col(static_cast<Eigen::Index>(i)).maxCoeff(&argmax);
      if (static_cast<uint32_t>(argmax) == access.label(ids[start + i])) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(ids.size());
}

inline double evaluate_top1(const TrainedModel& model,
                            std::span<const uint64_t> ids,
                            const DataAccess& access) {
  return evaluate_top1(model.spec, model.parameters, ids, access);
}

// Minimizes cross-entropy over minibatches drawn from the supplied sampler,
// evaluating validation top-1 every eval_every steps. Stops at max_steps or
// after `patience` evaluations without improvement; returns the parameters of
// the best evaluation (earliest on ties).
inline TrainedModel train(const ModelSpec& spec, const TrainConfig& config,
                          const SplitManifest& manifest,
                          const DataAccess& access, TrainingSampler sampler,
                          uint64_t seed) {
  spec.validate();
  config.validate();
  if (manifest.train.empty() || manifest.val.empty())
    throw DegenerateError("train and val splits must be non-empty");
  if (access.feature_dim() != spec.input_dim)
    throw DimensionError("input_dim " + std::to_string(spec.input_dim) +
                         " != payload dim " +
                         std::to_string(access.feature_dim()));

  size_t n_params = spec.param_count();
  std::vector<float> params(n_params);
  init_params(spec, params, seed);

  TrainedModel best;
  best.spec = spec;
  best.parameters = params;
  best.best_val_top1 = evaluate_top1(spec, params, manifest.val, access);
  best.steps_run = 0;

  if (config.max_steps == 0) return best;

  detail::BatchBuilder batch(manifest, access, config, spec.input_dim, seed);
  std::vector<float> grad(n_params);
  std::vector<float> m(n_params, 0.0f), v(n_params, 0.0f);  // adam moments
  constexpr float kBeta1 = 0.9f, kBeta2 = 0.999f, kEps = 1e-8f;
  auto lr = static_cast<float>(config.learning_rate);

  size_t evals_since_best = 0;
  uint64_t step = 0;
  while (step < config.max_steps) {
    ++step;
    batch.fill(sampler);
    float loss = Network<float>::loss_and_grad(spec, params, batch.inputs(),
                                               batch.labels(), grad);
    if (!std::isfinite(loss))
      throw NonFiniteLossError("loss diverged at step " + std::to_string(step));

    if (config.optimizer == TrainConfig::Optimizer::adam) {
      float c1 = 1.0f - std::pow(kBeta1, static_cast<float>(step));
      float c2 = 1.0f - std::pow(kBeta2, static_cast<float>(step));
      for (size_t i = 0; i < n_params; ++i) {
        m[i] = kBeta1 * m[i] + (1.0f - kBeta1) * grad[i];
        v[i] = kBeta2 * v[i] + (1.0f - kBeta2) * grad[i] * grad[i];
        params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
      }
    } else {
      for (size_t i = 0; i < n_params; ++i) params[i] -= lr * grad[i];
    }

    if (step % config.eval_every == 0) {
      double acc = evaluate_top1(spec, params, manifest.val, access);
      if (acc > best.best_val_top1) {
        best.best_val_top1 = acc;
        best.parameters = params;
        evals_since_best = 0;
      } else {
        ++evals_since_best;
        if (evals_since_best >= config.patience) break;
      }
    }
  }
  best.steps_run = step;
  return best;
}

}  // namespace shiftbench

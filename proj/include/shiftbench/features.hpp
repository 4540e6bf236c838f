#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "shiftbench/dataset.hpp"
#include "shiftbench/errors.hpp"
#include "shiftbench/sprites.hpp"

namespace shiftbench {

// Read-only bridge from dataset payloads to classifier inputs. Latent
// payloads are rendered once up front (images plus [0,1] float features);
// feature payloads pass through. Safe to share across concurrent readers.
class DataAccess {
 public:
  explicit DataAccess(const AttributedDataset& dataset) : dataset_(&dataset) {
    const auto& records = dataset.records();
    if (records.empty()) throw DegenerateError("empty dataset");

    Payload::Kind kind = records.front().payload.kind;
    for (const auto& r : records)
      if (r.payload.kind != kind)
        throw DimensionError("mixed payload kinds in dataset");
    if (kind == Payload::Kind::path)
      throw DimensionError("path payloads carry no trainable features");

    has_images_ = (kind == Payload::Kind::latent);
    if (has_images_) {
      dim_ = kSpritePixels;
      images_.reserve(records.size());
      features_.reserve(records.size() * kSpritePixels);
      for (const auto& r : records) {
        SpriteImage img = render(latents_of(r), r.attr[0], r.attr[1]);
        for (uint8_t p : img.pixels)
          features_.push_back(static_cast<float>(p) / 255.0f);
        images_.push_back(std::move(img));
      }
    } else {
      dim_ = records.front().payload.features.size();
      features_.reserve(records.size() * dim_);
      for (const auto& r : records) {
        if (r.payload.features.size() != dim_)
          throw DimensionError("inconsistent feature dimension at id " +
                               std::to_string(r.sample_id));
        features_.insert(features_.end(), r.payload.features.begin(),
                         r.payload.features.end());
      }
    }

    for (size_t i = 0; i < records.size(); ++i) pos_[records[i].sample_id] = i;
  }

  const AttributedDataset& dataset() const { return *dataset_; }
  const AttributeSchema& schema() const { return dataset_->schema(); }
  size_t feature_dim() const { return dim_; }
  bool has_images() const { return has_images_; }

  std::span<const float> features(uint64_t id) const {
    return {features_.data() + index_of(id) * dim_, dim_};
  }

  const SpriteImage& image(uint64_t id) const {
    if (!has_images_) throw AugSourceError("dataset has no renderable payloads");
    return images_[index_of(id)];
  }

  const ExampleRecord& record(uint64_t id) const {
    return dataset_->records()[index_of(id)];
  }

  uint32_t label(uint64_t id) const {
    return record(id).attr[schema().label_index];
  }

 private:
  size_t index_of(uint64_t id) const {
    auto it = pos_.find(id);
    if (it == pos_.end()) throw UnknownIdError("sample_id " + std::to_string(id));
    return it->second;
  }

  const AttributedDataset* dataset_;
  size_t dim_ = 0;
  bool has_images_ = false;
  std::vector<float> features_;
  std::vector<SpriteImage> images_;
  std::map<uint64_t, size_t> pos_;
};

// Source of synthetic samples conditioned on target attribute values.
class AugmentationSource {
 public:
  virtual ~AugmentationSource() = default;

  // Renders a sample carrying the base record's latents with the label and
  // nuisance attributes replaced by the targets.
  virtual SpriteImage sample(const ExampleRecord& base, uint32_t target_label,
                             uint32_t target_nuisance) const = 0;
};

// The exact swap oracle: re-renders the base latents under the substituted
// attribute values, i.e. a perfect conditional-generator draw.
class SpriteSwapOracle : public AugmentationSource {
 public:
  explicit SpriteSwapOracle(const AttributeSchema& schema) : schema_(&schema) {
    if (schema.num_attributes() != 2)
      throw AugSourceError("sprite oracle requires the 2-attribute sprite schema");
  }

  SpriteImage sample(const ExampleRecord& base, uint32_t target_label,
                     uint32_t target_nuisance) const override {
    SpriteLatents latents = latents_of(base);  // AugSourceError if absent
    std::array<uint32_t, 2> attrs = {base.attr[0], base.attr[1]};
    attrs[schema_->label_index] = target_label;
    attrs[schema_->nuisance_index] = target_nuisance;
    return render(latents, attrs[0], attrs[1]);
  }

 private:
  const AttributeSchema* schema_;
};

}  // namespace shiftbench

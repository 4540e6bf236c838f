#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shiftbench/errors.hpp"
#include "shiftbench/rng.hpp"
#include "shiftbench/sprites.hpp"

namespace shiftbench {

struct TransformSetting {
  std::string name;
  bool enabled = false;
  double magnitude = 0.0;
};

// Registry order is fixed; enabled transforms are applied in this order.
inline const std::array<const char*, 5>& transform_registry() {
  static const std::array<const char*, 5> names = {
      "hflip", "translate", "color_jitter", "channel_swap", "invert"};
  return names;
}

inline void tf_hflip(SpriteImage& img) {
  for (size_t y = 0; y < kSpriteSize; ++y) {
    for (size_t x = 0; x < kSpriteSize / 2; ++x) {
      size_t a = (y * kSpriteSize + x) * 3;
      size_t b = (y * kSpriteSize + (kSpriteSize - 1 - x)) * 3;
      for (size_t c = 0; c < 3; ++c) std::swap(img.pixels[a + c], img.pixels[b + c]);
    }
  }
}

inline void tf_translate(SpriteImage& img, int dx, int dy) {
  SpriteImage out;  // zero-filled
  for (size_t y = 0; y < kSpriteSize; ++y) {
    auto sy = static_cast<int>(y) - dy;
    if (sy < 0 || sy >= static_cast<int>(kSpriteSize)) continue;
    for (size_t x = 0; x < kSpriteSize; ++x) {
      auto sx = static_cast<int>(x) - dx;
      if (sx < 0 || sx >= static_cast<int>(kSpriteSize)) continue;
      for (size_t c = 0; c < 3; ++c)
        out.pixels[(y * kSpriteSize + x) * 3 + c] =
            img.pixels[(static_cast<size_t>(sy) * kSpriteSize +
                        static_cast<size_t>(sx)) * 3 + c];
    }
  }
  img = out;
}

inline void tf_color_jitter(SpriteImage& img, double s0, double s1, double s2) {
  std::array<double, 3> s = {s0, s1, s2};
  for (size_t i = 0; i < kSpritePixels; ++i) {
    double v = static_cast<double>(img.pixels[i]) * s[i % 3];
    img.pixels[i] = static_cast<uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
  }
}

// perm maps destination channel -> source channel.
inline void tf_channel_permute(SpriteImage& img, const std::array<int, 3>& perm) {
  for (size_t i = 0; i < kSpritePixels; i += 3) {
    std::array<uint8_t, 3> old = {img.pixels[i], img.pixels[i + 1], img.pixels[i + 2]};
    for (size_t c = 0; c < 3; ++c)
      img.pixels[i + c] = old[static_cast<size_t>(perm[c])];
  }
}

inline void tf_invert(SpriteImage& img) {
  for (auto& p : img.pixels) p = static_cast<uint8_t>(255 - p);
}

inline void validate_transforms(std::span<const TransformSetting> transforms) {
  const auto& registry = transform_registry();
  for (const auto& t : transforms) {
    bool known = false;
    for (const char* name : registry) known |= (t.name == name);
    if (!known) throw UnknownTransformError(t.name);
    if (t.name == "color_jitter" && (t.magnitude < 0.0 || t.magnitude > 1.0))
      throw RangeError("color_jitter magnitude outside [0,1]");
  }
}

// Applies the enabled transforms in registry order; each one is independently
// replaced by the identity with probability 0.5 per draw.
inline void apply_transforms(SpriteImage& img,
                             std::span<const TransformSetting> transforms,
                             Pcg32& rng) {
  validate_transforms(transforms);
  for (const char* name : transform_registry()) {
    const TransformSetting* setting = nullptr;
    for (const auto& t : transforms)
      if (t.name == name && t.enabled) setting = &t;
    if (!setting) continue;
    if (rng.next_double() < 0.5) continue;  // identity branch

    std::string_view n = name;
    if (n == "hflip") {
      tf_hflip(img);
    } else if (n == "translate") {
      int dx = static_cast<int>(rng.bounded(9)) - 4;
      int dy = static_cast<int>(rng.bounded(9)) - 4;
      tf_translate(img, dx, dy);
    } else if (n == "color_jitter") {
      double m = setting->magnitude;
      double s0 = 1.0 - m + 2.0 * m * rng.next_double();
      double s1 = 1.0 - m + 2.0 * m * rng.next_double();
      double s2 = 1.0 - m + 2.0 * m * rng.next_double();
      tf_color_jitter(img, s0, s1, s2);
    } else if (n == "channel_swap") {
      // The two derangements of (R,G,B): every channel moves.
      static constexpr std::array<std::array<int, 3>, 2> kCycles = {
          {{1, 2, 0}, {2, 0, 1}}};
      tf_channel_permute(img, kCycles[rng.bounded(2)]);
    } else if (n == "invert") {
      tf_invert(img);
    }
  }
}

}  // namespace shiftbench

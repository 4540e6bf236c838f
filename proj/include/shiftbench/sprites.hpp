#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "shiftbench/dataset.hpp"
#include "shiftbench/errors.hpp"
#include "shiftbench/rng.hpp"
#include "shiftbench/schema.hpp"

namespace shiftbench {

// ---- Q16.16 fixed point ----------------------------------------------------
// All sprite geometry runs in 32-bit fixed point (16 fractional bits) so that
// identical latents raster to identical pixels on every platform.

using Fixed = int32_t;
inline constexpr Fixed kFixedOne = 1 << 16;
inline constexpr Fixed kFixedHalf = 1 << 15;
inline constexpr Fixed kFixedPi = 205887;
inline constexpr Fixed kFixedHalfPi = 102944;
inline constexpr Fixed kFixedTwoPi = 411775;

inline constexpr Fixed fixed_from_double(double v) {
  return static_cast<Fixed>(v * kFixedOne + (v >= 0 ? 0.5 : -0.5));
}

inline constexpr double fixed_to_double(Fixed v) {
  return static_cast<double>(v) / kFixedOne;
}

inline constexpr Fixed fixed_mul(Fixed a, Fixed b) {
  return static_cast<Fixed>((static_cast<int64_t>(a) * b) >> 16);
}

// CORDIC (circular rotation mode), 17 iterations. Returns (cos, sin) in
// Q16.16 for an angle in [0, 2pi) given in Q16.16 radians.
inline std::pair<Fixed, Fixed> fixed_sincos(Fixed angle) {
  static constexpr std::array<Fixed, 17> kAtanTable = {
      51472, 30386, 16055, 8150, 4091, 2047, 1024, 512, 256,
      128,   64,    32,    16,   8,    4,    2,    1};
  static constexpr Fixed kCordicGain = 39797;  // prod 1/sqrt(1+2^-2i)

  // Reduce to [-pi/2, pi/2]; outside that range use
  // cos(t) = -cos(u), sin(t) = sin(u) with u mirrored about +-pi.
  Fixed t = angle;
  while (t >= kFixedPi) t -= kFixedTwoPi;
  while (t < -kFixedPi) t += kFixedTwoPi;
  bool flip = false;
  if (t > kFixedHalfPi) {
    t = kFixedPi - t;
    flip = true;
  } else if (t < -kFixedHalfPi) {
    t = -kFixedPi - t;
    flip = true;
  }

  int64_t x = kCordicGain;
  int64_t y = 0;
  Fixed z = t;
  for (size_t i = 0; i < kAtanTable.size(); ++i) {
    int64_t xs = x >> i;
    int64_t ys = y >> i;
    if (z >= 0) {
      x -= ys;
      y += xs;
      z -= kAtanTable[i];
    } else {
      x += ys;
      y -= xs;
      z += kAtanTable[i];
    }
  }
  Fixed c = static_cast<Fixed>(x);
  Fixed s = static_cast<Fixed>(y);
  if (flip) c = -c;
  return {c, s};
}

// ---- Sprite model -----------------------------------------------------------

inline constexpr size_t kSpriteSize = 32;
inline constexpr size_t kSpritePixels = kSpriteSize * kSpriteSize * 3;

inline constexpr uint32_t kShapeSquare = 0;
inline constexpr uint32_t kShapeEllipse = 1;
inline constexpr uint32_t kShapeHeart = 2;
inline constexpr size_t kNumShapes = 3;
inline constexpr size_t kNumColors = 3;

// Continuous generator latents: position in [0,1], scale in [0.5,1],
// orientation in [0,2pi). Stored exactly as Q16.16 words.
struct SpriteLatents {
  Fixed x_pos = 0;
  Fixed y_pos = 0;
  Fixed scale = kFixedOne;
  Fixed orientation = 0;

  std::array<uint32_t, 4> to_words() const {
    return {static_cast<uint32_t>(x_pos), static_cast<uint32_t>(y_pos),
            static_cast<uint32_t>(scale), static_cast<uint32_t>(orientation)};
  }

  static SpriteLatents from_words(const std::array<uint32_t, 4>& w) {
    SpriteLatents l;
    l.x_pos = static_cast<Fixed>(w[0]);
    l.y_pos = static_cast<Fixed>(w[1]);
    l.scale = static_cast<Fixed>(w[2]);
    l.orientation = static_cast<Fixed>(w[3]);
    return l;
  }

  static SpriteLatents draw(Pcg32& rng) {
    SpriteLatents l;
    l.x_pos = static_cast<Fixed>(rng.bounded(kFixedOne));
    l.y_pos = static_cast<Fixed>(rng.bounded(kFixedOne));
    l.scale = static_cast<Fixed>(kFixedHalf + rng.bounded(kFixedHalf + 1));
    l.orientation = static_cast<Fixed>(rng.bounded(kFixedTwoPi));
    return l;
  }
};

// 32x32 RGB raster; background (0,0,0), foreground 255 in the pure channel.
struct SpriteImage {
  std::array<uint8_t, kSpritePixels> pixels{};

  uint8_t at(size_t x, size_t y, size_t c) const {
    return pixels[(y * kSpriteSize + x) * 3 + c];
  }

  size_t foreground_count() const {
    size_t n = 0;
    for (size_t i = 0; i < kSpritePixels; i += 3)
      if (pixels[i] | pixels[i + 1] | pixels[i + 2]) ++n;
    return n;
  }
};

namespace detail {

// Inside tests take sprite-frame offsets (u, v) and half-extent h, all
// Q16.16 pixels. Quadratic tests drop to Q16.8 to stay within int64.
inline bool inside_square(int64_t u, int64_t v, Fixed h) {
  return std::abs(u) <= h && std::abs(v) <= h;
}

inline bool inside_ellipse(int64_t u, int64_t v, Fixed h) {
  // Semi-axes (h, h/2): (u*b)^2 + (v*a)^2 <= (a*b)^2.
  int64_t a = h >> 8;
  int64_t b = h >> 9;
  int64_t u8 = u >> 8;
  int64_t v8 = v >> 8;
  int64_t lhs = (u8 * b) * (u8 * b) + (v8 * a) * (v8 * a);
  int64_t rhs = (a * b) * (a * b);
  return lhs <= rhs;
}

inline bool inside_heart(int64_t u, int64_t v, Fixed h) {
  // Two half-disks of radius h/2 atop a triangle with apex at (0, h).
  if (v >= 0) return std::abs(u) + v <= h;
  int64_t r = h >> 9;  // disk radius and center offset, Q16.8
  int64_t u8 = u >> 8;
  int64_t v8 = v >> 8;
  int64_t du = std::abs(u8) - r;
  return du * du + v8 * v8 <= r * r;
}

}  // namespace detail

// Deterministic raster of one sprite. Pure function of its arguments.
inline SpriteImage render(const SpriteLatents& latents, uint32_t shape,
                          uint32_t color) {
  if (shape >= kNumShapes) throw RangeError("shape index out of range");
  if (color >= kNumColors) throw RangeError("color index out of range");

  SpriteImage img;
  Fixed cx = latents.x_pos << 5;  // [0,1] -> [0,32] px
  Fixed cy = latents.y_pos << 5;
  Fixed h = latents.scale << 3;  // half-extent = scale * 8 px
  auto [cosv, sinv] = fixed_sincos(latents.orientation);

  for (size_t py = 0; py < kSpriteSize; ++py) {
    int64_t dy = (static_cast<int64_t>(py) << 16) + kFixedHalf - cy;
    for (size_t px = 0; px < kSpriteSize; ++px) {
      int64_t dx = (static_cast<int64_t>(px) << 16) + kFixedHalf - cx;
      // Rotate the canvas offset back into the sprite frame.
      int64_t u = (dx * cosv + dy * sinv) >> 16;
      int64_t v = (-dx * sinv + dy * cosv) >> 16;
      bool inside = false;
      switch (shape) {
        case kShapeSquare: inside = detail::inside_square(u, v, h); break;
        case kShapeEllipse: inside = detail::inside_ellipse(u, v, h); break;
        case kShapeHeart: inside = detail::inside_heart(u, v, h); break;
      }
      if (inside) img.pixels[(py * kSpriteSize + px) * 3 + color] = 255;
    }
  }
  return img;
}

// The canonical sprites schema: shape is attribute 0, color attribute 1.
inline AttributeSchema sprites_schema(size_t label_axis = 0,
                                      size_t nuisance_axis = 1) {
  AttributeSchema schema;
  schema.attributes = {{"shape", {"square", "ellipse", "heart"}},
                       {"color", {"red", "green", "blue"}}};
  schema.label_index = label_axis;
  schema.nuisance_index = nuisance_axis;
  schema.validate();
  return schema;
}

// Generates per_cell records for each of the 9 (shape, color) cells with iid
// seeded latents; payloads carry the latent words.
inline AttributedDataset gen_sprites(size_t per_cell, uint64_t seed,
                                     size_t label_axis = 0,
                                     size_t nuisance_axis = 1) {
  if (per_cell < 1) throw RangeError("per_cell must be >= 1");
  Pcg32 rng(derive_seed(seed, fnv1a64("gen-sprites")));
  std::vector<ExampleRecord> records;
  records.reserve(per_cell * kNumShapes * kNumColors);
  uint64_t next_id = 0;
  for (uint32_t shape = 0; shape < kNumShapes; ++shape) {
    for (uint32_t color = 0; color < kNumColors; ++color) {
      for (size_t k = 0; k < per_cell; ++k) {
        ExampleRecord rec;
        rec.sample_id = next_id++;
        rec.attr = {shape, color};
        rec.payload = Payload::make_latent(SpriteLatents::draw(rng).to_words());
        records.push_back(std::move(rec));
      }
    }
  }
  return AttributedDataset(sprites_schema(label_axis, nuisance_axis),
                           std::move(records));
}

inline SpriteLatents latents_of(const ExampleRecord& record) {
  if (record.payload.kind != Payload::Kind::latent)
    throw AugSourceError("record " + std::to_string(record.sample_id) +
                         " has no generator latents");
  return SpriteLatents::from_words(record.payload.latent_words);
}

// Re-renders the record's latents with one attribute substituted: an exact
// sample from the generator conditioned on the new attribute combination.
inline SpriteImage attribute_swap(const ExampleRecord& record, size_t axis,
                                  uint32_t new_value) {
  SpriteLatents latents = latents_of(record);
  if (axis >= 2) throw AxisError("sprite attribute axis out of range");
  std::array<uint32_t, 2> attrs = {record.attr.at(0), record.attr.at(1)};
  attrs[axis] = new_value;
  return render(latents, attrs[0], attrs[1]);
}

}  // namespace shiftbench

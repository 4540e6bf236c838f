#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shiftbench/errors.hpp"
#include "shiftbench/rng.hpp"

namespace shiftbench {

// Desk-scale classifiers: a softmax-linear readout or a one-hidden-layer
// rectifier MLP over flattened inputs.
struct ModelSpec {
  enum class Kind : uint8_t { softmax_linear, mlp1 };

  Kind kind = Kind::softmax_linear;
  size_t input_dim = 0;
  size_t num_classes = 0;
  size_t hidden = 0;  // mlp1 only

  void validate() const {
    if (input_dim < 1) throw DimensionError("input_dim must be >= 1");
    if (num_classes < 2) throw DimensionError("num_classes must be >= 2");
    if (kind == Kind::mlp1 && hidden < 1)
      throw DimensionError("mlp1 requires hidden >= 1");
  }

  size_t param_count() const {
    switch (kind) {
      case Kind::softmax_linear:
        return num_classes * input_dim + num_classes;
      case Kind::mlp1:
        return hidden * input_dim + hidden + num_classes * hidden + num_classes;
    }
    throw DimensionError("unreachable model kind");
  }

  static const char* kind_name(Kind k) {
    return k == Kind::softmax_linear ? "softmax_linear" : "mlp1";
  }

  static Kind kind_from_name(const std::string& s) {
    if (s == "softmax_linear") return Kind::softmax_linear;
    if (s == "mlp1") return Kind::mlp1;
    throw ParseError("unknown model kind: " + s);
  }
};

// Glorot-uniform weights (seeded, drawn in storage order), zero biases.
inline void init_params(const ModelSpec& spec, std::span<float> params,
                        uint64_t seed) {
  spec.validate();
  if (params.size() != spec.param_count())
    throw DimensionError("parameter buffer size mismatch");
  Pcg32 rng(derive_seed(seed, fnv1a64("param-init")));
  auto glorot = [&](float* w, size_t count, size_t fan_in, size_t fan_out) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (size_t i = 0; i < count; ++i)
      w[i] = static_cast<float>((2.0 * rng.next_double() - 1.0) * bound);
  };

  float* p = params.data();
  if (spec.kind == ModelSpec::Kind::softmax_linear) {
    glorot(p, spec.num_classes * spec.input_dim, spec.input_dim, spec.num_classes);
    std::fill(p + spec.num_classes * spec.input_dim, p + spec.param_count(), 0.0f);
  } else {
    size_t w1 = spec.hidden * spec.input_dim;
    size_t w2 = spec.num_classes * spec.hidden;
    glorot(p, w1, spec.input_dim, spec.hidden);
    std::fill(p + w1, p + w1 + spec.hidden, 0.0f);
    glorot(p + w1 + spec.hidden, w2, spec.hidden, spec.num_classes);
    std::fill(p + w1 + spec.hidden + w2, p + spec.param_count(), 0.0f);
  }
}

// Forward/backward math, templated so tests can run in double precision.
template <typename Scalar>
struct Network {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Vector<Scalar, Eigen::Dynamic>;
  using MapMat = Eigen::Map<const Mat>;
  using MapVec = Eigen::Map<const Vec>;

  // Logits for a batch X (input_dim x batch), column per sample.
  static Mat logits(const ModelSpec& spec, std::span<const Scalar> params,
                    const Eigen::Ref<const Mat>& x) {
    check(spec, params, x);
    auto d = static_cast<Eigen::Index>(spec.input_dim);
    auto c = static_cast<Eigen::Index>(spec.num_classes);
    const Scalar* p = params.data();
    if (spec.kind == ModelSpec::Kind::softmax_linear) {
      MapMat w(p, c, d);
      MapVec b(p + c * d, c);
      return (w * x).colwise() + b;
    }
    auto h = static_cast<Eigen::Index>(spec.hidden);
    MapMat w1(p, h, d);
    MapVec b1(p + h * d, h);
    MapMat w2(p + h * d + h, c, h);
    MapVec b2(p + h * d + h + c * h, c);
    Mat a1 = ((w1 * x).colwise() + b1).cwiseMax(Scalar(0));
    return (w2 * a1).colwise() + b2;
  }

  // Column-wise softmax of logits (stable).
  static Mat softmax(const Eigen::Ref<const Mat>& z) {
    Mat p = z;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      Scalar m = p.col(j).maxCoeff();
      p.col(j) = (p.col(j).array() - m).exp();
      p.col(j) /= p.col(j).sum();
    }
    return p;
  }

  // Mean cross-entropy over the batch plus its gradient w.r.t. every
  // parameter, written into grad (same layout as params).
  static Scalar loss_and_grad(const ModelSpec& spec,
                              std::span<const Scalar> params,
                              const Eigen::Ref<const Mat>& x,
                              std::span<const uint32_t> labels,
                              std::span<Scalar> grad) {
    check(spec, params, x);
    if (labels.size() != static_cast<size_t>(x.cols()))
      throw DimensionError("label count does not match batch");
    if (grad.size() != params.size())
      throw DimensionError("gradient buffer size mismatch");

    auto d = static_cast<Eigen::Index>(spec.input_dim);
    auto c = static_cast<Eigen::Index>(spec.num_classes);
    Eigen::Index batch = x.cols();
    const Scalar* p = params.data();
    Scalar* g = grad.data();
    Scalar inv_b = Scalar(1) / static_cast<Scalar>(batch);

    auto ce_and_dz = [&](Mat& z) -> Scalar {
      Scalar loss = 0;
      for (Eigen::Index j = 0; j < batch; ++j) {
        auto y = static_cast<Eigen::Index>(labels[static_cast<size_t>(j)]);
        if (y >= c) throw DimensionError("label out of range");
        Scalar m = z.col(j).maxCoeff();
        Scalar lse = m + std::log((z.col(j).array() - m).exp().sum());
        loss += lse - z(y, j);
        z.col(j) = (z.col(j).array() - lse).exp();  // now the softmax
        z(y, j) -= Scalar(1);
      }
      z *= inv_b;  // z is now dL/dlogits
      return loss * inv_b;
    };

    if (spec.kind == ModelSpec::Kind::softmax_linear) {
      MapMat w(p, c, d);
      MapVec b(p + c * d, c);
      Mat z = (w * x).colwise() + b;
      Scalar loss = ce_and_dz(z);
      Eigen::Map<Mat>(g, c, d).noalias() = z * x.transpose();
      Eigen::Map<Vec>(g + c * d, c) = z.rowwise().sum();
      return loss;
    }

    auto h = static_cast<Eigen::Index>(spec.hidden);
    MapMat w1(p, h, d);
    MapVec b1(p + h * d, h);
    MapMat w2(p + h * d + h, c, h);
    MapVec b2(p + h * d + h + c * h, c);

    Mat z1 = (w1 * x).colwise() + b1;
    Mat a1 = z1.cwiseMax(Scalar(0));
    Mat z2 = (w2 * a1).colwise() + b2;
    Scalar loss = ce_and_dz(z2);

    Eigen::Map<Mat> gw1(g, h, d);
    Eigen::Map<Vec> gb1(g + h * d, h);
    Eigen::Map<Mat> gw2(g + h * d + h, c, h);
    Eigen::Map<Vec> gb2(g + h * d + h + c * h, c);

    gw2.noalias() = z2 * a1.transpose();
    gb2 = z2.rowwise().sum();
    Mat dz1 = w2.transpose() * z2;
    dz1 = (z1.array() > Scalar(0)).select(dz1, Scalar(0));
    gw1.noalias() = dz1 * x.transpose();
    gb1 = dz1.rowwise().sum();
    return loss;
  }

 private:
  static void check(const ModelSpec& spec, std::span<const Scalar> params,
                    const Eigen::Ref<const Mat>& x) {
    spec.validate();
    if (params.size() != spec.param_count())
      throw DimensionError("parameter buffer size mismatch");
    if (x.rows() != static_cast<Eigen::Index>(spec.input_dim))
      throw DimensionError("input rows " + std::to_string(x.rows()) +
                           " != input_dim " + std::to_string(spec.input_dim));
  }
};

}  // namespace shiftbench

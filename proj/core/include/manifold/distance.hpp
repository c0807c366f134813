#pragma once

#include <optional>
#include <vector>

#include "manifold/diffmap.hpp"
#include "manifold/generators.hpp"

namespace manifold {

// Untrained, seeded network whose tapped activations form a feature map.
// Plays the role of a fixed perceptual embedding of generator outputs.
struct FeatureEncoder {
  DiffMap net;
  std::vector<int> taps;  // layer indices whose outputs are concatenated
  int feature_dim = 0;

  FeatureEncoder() = default;
  FeatureEncoder(DiffMap network, std::vector<int> tap_layers);

  Vec value(const Vec& input) const;
  Vec vjp(const Vec& input, const Vec& cotangent) const;
  Vec jvp(const Vec& input, const Vec& tangent) const;

  // Default encoder for a given generator output size: two tanh stages with
  // taps after each one. Deterministic in (input_dim, seed).
  static FeatureEncoder standard(int input_dim, std::uint64_t seed = 1234);
};

// The differentiable composite z -> sqrt(scale) * phi(G(z)), where phi is
// identity (pixel) or a tapped feature encoder. All metric computations run
// through this interface.
class PullbackMap {
 public:
  PullbackMap() = default;
  PullbackMap(DiffMap generator, double scale = 1.0);
  PullbackMap(DiffMap generator, FeatureEncoder encoder, double scale = 1.0);

  int input_dim() const { return generator_.input_dim(); }
  int output_dim() const { return out_dim_; }
  const DiffMap& generator() const { return generator_; }
  bool has_encoder() const { return encoder_.has_value(); }

  Vec value(const Vec& z) const;
  Vec vjp(const Vec& z, const Vec& cotangent) const;
  Vec jvp(const Vec& z, const Vec& tangent) const;

  // Applies sqrt(scale) * phi to a raw generator output (used for fixed
  // inversion targets).
  Vec encode_output(const Vec& output) const;

 private:
  DiffMap generator_;
  std::optional<FeatureEncoder> encoder_;
  double sqrt_scale_ = 1.0;
  int out_dim_ = 0;
};

enum class DistanceKind { pixel_sq_l2, feature_sq_l2 };

// Squared distance pulled back through a generator:
// d2(z1, z2) = scale * 1/2 || phi(G(z1)) - phi(G(z2)) ||^2.
class DistanceMetric {
 public:
  static DistanceMetric pixel(DiffMap generator, double scale = 1.0);
  static DistanceMetric feature(DiffMap generator, FeatureEncoder encoder, double scale = 1.0);

  DistanceKind kind() const { return kind_; }
  double scale() const { return scale_; }
  const PullbackMap& pullback() const { return pullback_; }
  int latent_dim() const { return pullback_.input_dim(); }

  double d2(const Vec& z1, const Vec& z2) const;

  // gradient of z -> d2(z0, z) at z
  Vec grad_d2(const Vec& z0, const Vec& z) const;

  // distance to a fixed target output (an image / flat output vector)
  Vec encode_target(const Vec& target_output) const { return pullback_.encode_output(target_output); }
  double d2_to_encoded(const Vec& z, const Vec& encoded_target) const;
  Vec grad_d2_to_encoded(const Vec& z, const Vec& encoded_target) const;

 private:
  DistanceKind kind_ = DistanceKind::pixel_sq_l2;
  double scale_ = 1.0;
  PullbackMap pullback_;
};

}  // namespace manifold

#include "manifold/distance.hpp"

#include <algorithm>
#include <cmath>

namespace manifold {

FeatureEncoder::FeatureEncoder(DiffMap network, std::vector<int> tap_layers)
    : net(std::move(network)), taps(std::move(tap_layers)) {
  if (taps.empty()) throw Error(ErrorKind::spec, "feature encoder needs at least one tap");
  std::sort(taps.begin(), taps.end());
  for (int t : taps)
    if (t < 0 || t >= static_cast<int>(net.layers().size()))
      throw Error(ErrorKind::spec, "feature tap index out of range");
  feature_dim = 0;
  for (int t : taps) feature_dim += static_cast<int>(Tensor::numel(net.shape_after(t)));
}

Vec FeatureEncoder::value(const Vec& input) const {
  const auto acts = net.forward_activations(input);
  Vec out(feature_dim);
  Eigen::Index at = 0;
  for (int t : taps) {
    const Vec& a = acts[static_cast<std::size_t>(t) + 1];
    out.segment(at, a.size()) = a;
    at += a.size();
  }
  return out;
}

Vec FeatureEncoder::vjp(const Vec& input, const Vec& cotangent) const {
  require_length(cotangent, feature_dim, "feature cotangent");
  const auto acts = net.forward_activations(input);
  // walk backwards from the deepest tap, injecting each tap's cotangent
  // segment where its activation was produced
  std::vector<Eigen::Index> seg_start(taps.size());
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < taps.size(); ++i) {
    seg_start[i] = at;
    at += Tensor::numel(net.shape_after(taps[i]));
  }
  int deepest = taps.back();
  Vec cot = Vec::Zero(acts[static_cast<std::size_t>(deepest) + 1].size());
  for (int li = deepest; li >= 0; --li) {
    for (std::size_t i = 0; i < taps.size(); ++i) {
      if (taps[i] == li) {
        const Eigen::Index len = Tensor::numel(net.shape_after(li));
        cot += cotangent.segment(seg_start[i], len);
      }
    }
    cot = layer_vjp(net.layers()[static_cast<std::size_t>(li)], net.weights()->find(li),
                    acts[static_cast<std::size_t>(li)], cot);
  }
  return cot;
}

Vec FeatureEncoder::jvp(const Vec& input, const Vec& tangent) const {
  Vec x = input;
  Vec t = tangent;
  Vec out(feature_dim);
  Eigen::Index at = 0;
  std::size_t tap_pos = 0;
  for (int li = 0; li <= taps.back(); ++li) {
    x = layer_apply(net.layers()[static_cast<std::size_t>(li)], net.weights()->find(li), x, &t);
    while (tap_pos < taps.size() && taps[tap_pos] == li) {
      out.segment(at, t.size()) = t;
      at += t.size();
      ++tap_pos;
    }
  }
  return out;
}

FeatureEncoder FeatureEncoder::standard(int input_dim, std::uint64_t seed) {
  const int h1 = std::max(8, input_dim / 4);
  const int h2 = std::max(4, h1 / 2);
  GeneratorSpec spec;
  spec.architecture = {LayerSpec::Dense(input_dim, h1), LayerSpec::Bias(h1),
                       LayerSpec::Elementwise(Activation::tanh),
                       LayerSpec::Dense(h1, h2),        LayerSpec::Bias(h2),
                       LayerSpec::Elementwise(Activation::tanh)};
  spec.latent_dim = input_dim;
  spec.output_shape = {h2};
  spec.init_seed = seed;
  return FeatureEncoder(build_generator(spec), {2, 5});
}

PullbackMap::PullbackMap(DiffMap generator, double scale)
    : generator_(std::move(generator)), sqrt_scale_(std::sqrt(scale)) {
  if (scale <= 0.0) throw Error(ErrorKind::argument, "distance scale must be positive");
  out_dim_ = generator_.output_dim();
}

PullbackMap::PullbackMap(DiffMap generator, FeatureEncoder encoder, double scale)
    : generator_(std::move(generator)), encoder_(std::move(encoder)),
      sqrt_scale_(std::sqrt(scale)) {
  if (scale <= 0.0) throw Error(ErrorKind::argument, "distance scale must be positive");
  if (encoder_->net.input_dim() != generator_.output_dim())
    throw Error(ErrorKind::dimension, "feature encoder input does not match generator output");
  out_dim_ = encoder_->feature_dim;
}

Vec PullbackMap::value(const Vec& z) const {
  Vec out = generator_.forward(z);
  if (encoder_) out = encoder_->value(out);
  if (sqrt_scale_ != 1.0) out *= sqrt_scale_;
  return out;
}

Vec PullbackMap::vjp(const Vec& z, const Vec& cotangent) const {
  Vec cot = cotangent;
  if (sqrt_scale_ != 1.0) cot *= sqrt_scale_;
  if (encoder_) {
    const Vec img = generator_.forward(z);
    cot = encoder_->vjp(img, cot);
  }
  return generator_.vjp(z, cot);
}

Vec PullbackMap::jvp(const Vec& z, const Vec& tangent) const {
  if (!encoder_) {
    Vec t = generator_.jvp(z, tangent);
    if (sqrt_scale_ != 1.0) t *= sqrt_scale_;
    return t;
  }
  // propagate value and tangent jointly through generator, then encoder
  const Vec img = generator_.forward(z);
  Vec t = generator_.jvp(z, tangent);
  t = encoder_->jvp(img, t);
  if (sqrt_scale_ != 1.0) t *= sqrt_scale_;
  return t;
}

Vec PullbackMap::encode_output(const Vec& output) const {
  require_length(output, generator_.output_dim(), "target output");
  Vec out = encoder_ ? encoder_->value(output) : output;
  if (sqrt_scale_ != 1.0) out *= sqrt_scale_;
  return out;
}

DistanceMetric DistanceMetric::pixel(DiffMap generator, double scale) {
  DistanceMetric d;
  d.kind_ = DistanceKind::pixel_sq_l2;
  d.scale_ = scale;
  d.pullback_ = PullbackMap(std::move(generator), scale);
  return d;
}

DistanceMetric DistanceMetric::feature(DiffMap generator, FeatureEncoder encoder, double scale) {
  DistanceMetric d;
  d.kind_ = DistanceKind::feature_sq_l2;
  d.scale_ = scale;
  d.pullback_ = PullbackMap(std::move(generator), std::move(encoder), scale);
  return d;
}

double DistanceMetric::d2(const Vec& z1, const Vec& z2) const {
  return 0.5 * (pullback_.value(z1) - pullback_.value(z2)).squaredNorm();
}

Vec DistanceMetric::grad_d2(const Vec& z0, const Vec& z) const {
  const Vec diff = pullback_.value(z) - pullback_.value(z0);
  return pullback_.vjp(z, diff);
}

double DistanceMetric::d2_to_encoded(const Vec& z, const Vec& encoded_target) const {
  return 0.5 * (pullback_.value(z) - encoded_target).squaredNorm();
}

Vec DistanceMetric::grad_d2_to_encoded(const Vec& z, const Vec& encoded_target) const {
  const Vec diff = pullback_.value(z) - encoded_target;
  return pullback_.vjp(z, diff);
}

}  // namespace manifold

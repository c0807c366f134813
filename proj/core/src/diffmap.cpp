#include "manifold/diffmap.hpp"

#include <cmath>

#include "manifold/rng.hpp"

namespace manifold {

DiffMap::DiffMap(std::vector<LayerSpec> layers, std::shared_ptr<const WeightStore> weights,
                 std::vector<int> input_shape)
    : layers_(std::move(layers)), weights_(std::move(weights)) {
  shapes_.reserve(layers_.size() + 1);
  shapes_.push_back(std::move(input_shape));
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& spec = layers_[i];
    if (spec.has_weights()) {
      const Tensor* w = weights_ ? weights_->find(static_cast<int>(i)) : nullptr;
      if (!w) throw Error(ErrorKind::spec, "missing weights for layer " + std::to_string(i));
      if (w->shape != spec.weight_shape())
        throw Error(ErrorKind::spec, "weight shape mismatch at layer " + std::to_string(i) +
                                         ": " + shape_to_string(w->shape) + " vs " +
                                         shape_to_string(spec.weight_shape()));
    }
    shapes_.push_back(spec.output_shape(shapes_.back()));
  }
  input_dim_ = static_cast<int>(Tensor::numel(shapes_.front()));
  output_dim_ = static_cast<int>(Tensor::numel(shapes_.back()));
}

const std::vector<int>& DiffMap::shape_after(int layer_index) const {
  if (layer_index < -1 || layer_index >= static_cast<int>(layers_.size()))
    throw Error(ErrorKind::argument, "layer index out of range");
  return shapes_[static_cast<std::size_t>(layer_index + 1)];
}

Vec DiffMap::forward(const Vec& z) const {
  require_length(z, input_dim_, "forward input");
  Vec x = z;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    x = layer_apply(layers_[i], weights_->find(static_cast<int>(i)), x, nullptr);
  return x;
}

std::vector<Vec> DiffMap::forward_activations(const Vec& z) const {
  require_length(z, input_dim_, "forward input");
  std::vector<Vec> acts;
  acts.reserve(layers_.size() + 1);
  acts.push_back(z);
  for (std::size_t i = 0; i < layers_.size(); ++i)
    acts.push_back(layer_apply(layers_[i], weights_->find(static_cast<int>(i)), acts.back(), nullptr));
  return acts;
}

Vec DiffMap::vjp(const Vec& z, const Vec& cotangent) const {
  require_length(cotangent, output_dim_, "vjp cotangent");
  const std::vector<Vec> acts = forward_activations(z);
  Vec cot = cotangent;
  for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i)
    cot = layer_vjp(layers_[static_cast<std::size_t>(i)], weights_->find(i),
                    acts[static_cast<std::size_t>(i)], cot);
  return cot;
}

Vec DiffMap::jvp(const Vec& z, const Vec& tangent) const {
  require_length(z, input_dim_, "jvp input");
  require_length(tangent, input_dim_, "jvp tangent");
  Vec x = z;
  Vec t = tangent;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    x = layer_apply(layers_[i], weights_->find(static_cast<int>(i)), x, &t);
  return t;
}

DiffMap DiffMap::prefix(int count) const {
  if (count < 1 || count > static_cast<int>(layers_.size()))
    throw Error(ErrorKind::argument, "prefix length out of range");
  std::vector<LayerSpec> sub(layers_.begin(), layers_.begin() + count);
  return DiffMap(std::move(sub), weights_, shapes_.front());
}

DiffMap DiffMap::with_weights(std::shared_ptr<const WeightStore> weights) const {
  return DiffMap(layers_, std::move(weights), shapes_.front());
}

double DiffMap::kink_distance(const Vec& z) const {
  const std::vector<Vec> acts = forward_activations(z);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < layers_.size(); ++i)
    m = std::min(m, layer_kink_distance(layers_[i], acts[i]));
  return m;
}

Mat dense_jacobian(const DiffMap& map, const Vec& z, Eigen::Index entry_cap) {
  const Eigen::Index n = map.input_dim();
  const Eigen::Index m = map.output_dim();
  if (n * m > entry_cap)
    throw Error(ErrorKind::capacity, "dense Jacobian would hold " + std::to_string(n * m) +
                                         " entries, cap is " + std::to_string(entry_cap));
  Mat J(m, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec e = Vec::Zero(n);
    e[i] = 1.0;
    J.col(i) = map.jvp(z, e);
  }
  return J;
}

CheckReport grad_check(const DiffMap& map, const Vec& z, int n_probes, double tol,
                       std::uint64_t seed, double fd_step) {
  if (n_probes < 1) throw Error(ErrorKind::argument, "n_probes must be >= 1");
  CheckReport rep;
  rep.probes = n_probes;
  rep.tol = tol;
  Rng rng(mix_seed(seed, 0xc0ffee));
  const Eigen::Index n = map.input_dim();
  const Eigen::Index m = map.output_dim();
  for (int p = 0; p < n_probes; ++p) {
    Vec v = rng.normal_vector(n);
    v /= v.norm();
    Vec u = rng.normal_vector(m);
    u /= u.norm();

    const double kink = std::min(map.kink_distance(z + fd_step * v),
                                 std::min(map.kink_distance(z - fd_step * v), map.kink_distance(z)));
    if (kink <= 1e-9) {
      ++rep.kink_probes;
      continue;
    }

    const Vec fd_dir = (map.forward(z + fd_step * v) - map.forward(z - fd_step * v)) / (2.0 * fd_step);
    const double jvp_err = (map.jvp(z, v) - fd_dir).cwiseAbs().maxCoeff();
    // <u, J v> computed from the vjp side against the finite difference
    const double vjp_err = std::abs(map.vjp(z, u).dot(v) - u.dot(fd_dir));
    rep.max_jvp_error = std::max(rep.max_jvp_error, jvp_err);
    rep.max_vjp_error = std::max(rep.max_vjp_error, vjp_err);
  }
  rep.passed = rep.max_jvp_error < tol && rep.max_vjp_error < tol;
  return rep;
}

}  // namespace manifold

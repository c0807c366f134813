#pragma once

#include <memory>
#include <vector>

#include "manifold/layers.hpp"
#include "manifold/tensor.hpp"

namespace manifold {

// Weight tensors keyed by layer index.
struct WeightEntry {
  int layer = 0;
  std::string name;
  Tensor tensor;
};

struct WeightStore {
  std::vector<WeightEntry> entries;

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& e : entries) n += e.tensor.size();
    return n;
  }

  const Tensor* find(int layer) const {
    for (const auto& e : entries)
      if (e.layer == layer) return &e.tensor;
    return nullptr;
  }

  Tensor* find(int layer) {
    for (auto& e : entries)
      if (e.layer == layer) return &e.tensor;
    return nullptr;
  }
};

struct CheckReport {
  int probes = 0;
  int kink_probes = 0;  // probes skipped because a relu pre-activation sat on the kink
  double max_vjp_error = 0.0;
  double max_jvp_error = 0.0;
  double tol = 0.0;
  bool passed = false;
};

// A differentiable map from latent vectors to flat output vectors, realized
// as an ordered layer stack over a shared weight store. Values are immutable
// after construction; evaluation is safe from many threads.
class DiffMap {
 public:
  DiffMap() = default;
  DiffMap(std::vector<LayerSpec> layers, std::shared_ptr<const WeightStore> weights,
          std::vector<int> input_shape);

  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  const std::vector<int>& input_shape() const { return shapes_.front(); }
  const std::vector<int>& output_shape() const { return shapes_.back(); }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  const std::shared_ptr<const WeightStore>& weights() const { return weights_; }

  // Shape of the activation after layer i (shape_after(-1) is the input shape).
  const std::vector<int>& shape_after(int layer_index) const;

  Vec forward(const Vec& z) const;

  // All activations: result[0] = z, result[i+1] = output of layer i.
  std::vector<Vec> forward_activations(const Vec& z) const;

  // J(z)^T * cotangent
  Vec vjp(const Vec& z, const Vec& cotangent) const;

  // J(z) * tangent, propagated through the same code path as forward
  Vec jvp(const Vec& z, const Vec& tangent) const;

  // Truncation to the first `count` layers.
  DiffMap prefix(int count) const;

  // Re-bind the same architecture to another weight store (shapes must match).
  DiffMap with_weights(std::shared_ptr<const WeightStore> weights) const;

  // Smallest |pre-activation| over all relu-family layers for this input.
  double kink_distance(const Vec& z) const;

 private:
  std::vector<LayerSpec> layers_;
  std::shared_ptr<const WeightStore> weights_;
  std::vector<std::vector<int>> shapes_;  // shapes_[0] = input, shapes_[i+1] = after layer i
  int input_dim_ = 0;
  int output_dim_ = 0;
};

// Dense Jacobian, column i = jvp(map, z, e_i). Guarded by an entry cap
// (default 2^24) because it materializes an output_dim x input_dim matrix.
Mat dense_jacobian(const DiffMap& map, const Vec& z,
                   Eigen::Index entry_cap = Eigen::Index(1) << 24);

// Compares vjp/jvp against central finite differences of forward() on
// n_probes random directions. Probes whose forward pass passes within 1e-9 of
// a relu kink are counted separately instead of failing the check.
CheckReport grad_check(const DiffMap& map, const Vec& z, int n_probes, double tol,
                       std::uint64_t seed = 0, double fd_step = 1e-5);

}  // namespace manifold

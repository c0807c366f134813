#pragma once

#include <optional>
#include <string>
#include <vector>

#include "manifold/tensor.hpp"

namespace manifold {

enum class LayerKind { dense, bias, elementwise, transposed_conv2d, reshape };

enum class Activation { relu, leaky_relu, tanh, identity };

// One layer of a generator / encoder stack. Weight shapes are implied by the
// kind: dense -> W(out_dim x in_dim), bias -> b(dim),
// transposed_conv2d -> K(in_ch, out_ch, kernel, kernel).
struct LayerSpec {
  LayerKind kind = LayerKind::dense;

  int in_dim = 0;   // dense
  int out_dim = 0;  // dense

  Activation act = Activation::identity;  // elementwise
  double slope = 0.0;                     // leaky_relu, must be in (0,1)

  int in_ch = 0, out_ch = 0, kernel = 0, stride = 1, pad = 0;  // transposed_conv2d

  std::vector<int> target_shape;  // reshape

  static LayerSpec Dense(int in, int out);
  static LayerSpec Bias(int dim);
  static LayerSpec Elementwise(Activation a, double slope = 0.0);
  static LayerSpec TransposedConv2d(int in_ch, int out_ch, int kernel, int stride, int pad);
  static LayerSpec Reshape(std::vector<int> shape);

  bool has_weights() const {
    return kind == LayerKind::dense || kind == LayerKind::bias ||
           kind == LayerKind::transposed_conv2d;
  }

  // Shape of the single weight tensor, if any.
  std::vector<int> weight_shape() const;

  // Output shape for a given input shape; throws ErrorKind::spec on
  // incompatible chains. Shapes for conv layers are (C, H, W).
  std::vector<int> output_shape(const std::vector<int>& input_shape) const;

  std::string kind_name() const;
};

// Forward evaluation that optionally carries a directional derivative: if
// `tangent` is non-null it is replaced by the pushed-forward tangent. Forward
// and forward-mode differentiation share this single code path.
Vec layer_apply(const LayerSpec& spec, const Tensor* weight, const Vec& x,
                Vec* tangent);

// Pullback of `cotangent` (defined on the layer output) to the layer input,
// linearized at input `x`.
Vec layer_vjp(const LayerSpec& spec, const Tensor* weight, const Vec& x,
              const Vec& cotangent);

// Gradient of a scalar loss with respect to the layer weights, given the
// layer input and the cotangent on the layer output. Accumulates into `grad`.
void layer_weight_grad(const LayerSpec& spec, const Vec& x, const Vec& cotangent,
                       Tensor& grad);

// Smallest |pre-activation| over the nonsmooth entries of an elementwise
// layer input; +inf for smooth layers. Used to flag derivative checks that
// probe a relu kink.
double layer_kink_distance(const LayerSpec& spec, const Vec& x);

}  // namespace manifold

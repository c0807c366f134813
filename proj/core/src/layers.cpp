#include "manifold/layers.hpp"

#include <cmath>
#include <limits>

namespace manifold {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

LayerSpec LayerSpec::Dense(int in, int out) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.in_dim = in;
  s.out_dim = out;
  if (in <= 0 || out <= 0) throw Error(ErrorKind::spec, "dense dims must be positive");
  return s;
}

LayerSpec LayerSpec::Bias(int dim) {
  LayerSpec s;
  s.kind = LayerKind::bias;
  s.in_dim = s.out_dim = dim;
  if (dim <= 0) throw Error(ErrorKind::spec, "bias dim must be positive");
  return s;
}

LayerSpec LayerSpec::Elementwise(Activation a, double slope) {
  LayerSpec s;
  s.kind = LayerKind::elementwise;
  s.act = a;
  s.slope = slope;
  if (a == Activation::leaky_relu && (slope <= 0.0 || slope >= 1.0))
    throw Error(ErrorKind::spec, "leaky_relu slope must be in (0,1)");
  return s;
}

LayerSpec LayerSpec::TransposedConv2d(int in_ch, int out_ch, int kernel, int stride, int pad) {
  LayerSpec s;
  s.kind = LayerKind::transposed_conv2d;
  s.in_ch = in_ch;
  s.out_ch = out_ch;
  s.kernel = kernel;
  s.stride = stride;
  s.pad = pad;
  if (in_ch <= 0 || out_ch <= 0 || kernel <= 0 || stride <= 0 || pad < 0)
    throw Error(ErrorKind::spec, "invalid transposed_conv2d parameters");
  return s;
}

LayerSpec LayerSpec::Reshape(std::vector<int> shape) {
  LayerSpec s;
  s.kind = LayerKind::reshape;
  s.target_shape = std::move(shape);
  Tensor::numel(s.target_shape);  // validates positivity
  return s;
}

std::vector<int> LayerSpec::weight_shape() const {
  switch (kind) {
    case LayerKind::dense: return {out_dim, in_dim};
    case LayerKind::bias: return {in_dim};
    case LayerKind::transposed_conv2d: return {in_ch, out_ch, kernel, kernel};
    default: return {};
  }
}

std::string LayerSpec::kind_name() const {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::bias: return "bias";
    case LayerKind::elementwise: return "elementwise";
    case LayerKind::transposed_conv2d: return "transposed_conv2d";
    case LayerKind::reshape: return "reshape";
  }
  return "?";
}

std::vector<int> LayerSpec::output_shape(const std::vector<int>& in) const {
  const Eigen::Index flat = Tensor::numel(in);
  switch (kind) {
    case LayerKind::dense:
      if (flat != in_dim)
        throw Error(ErrorKind::spec, "dense layer expects input length " +
                                         std::to_string(in_dim) + ", got " +
                                         shape_to_string(in));
      return {out_dim};
    case LayerKind::bias:
      if (flat != in_dim)
        throw Error(ErrorKind::spec, "bias layer expects input length " +
                                         std::to_string(in_dim));
      return in;
    case LayerKind::elementwise:
      return in;
    case LayerKind::transposed_conv2d: {
      if (in.size() != 3 || in[0] != in_ch)
        throw Error(ErrorKind::spec,
                    "transposed_conv2d expects (C,H,W) input with C=" +
                        std::to_string(in_ch) + ", got " + shape_to_string(in));
      const int h = in[1], w = in[2];
      const int oh = (h - 1) * stride - 2 * pad + kernel;
      const int ow = (w - 1) * stride - 2 * pad + kernel;
      if (oh <= 0 || ow <= 0)
        throw Error(ErrorKind::spec, "transposed_conv2d output collapses to zero size");
      return {out_ch, oh, ow};
    }
    case LayerKind::reshape:
      if (flat != Tensor::numel(target_shape))
        throw Error(ErrorKind::spec, "reshape size mismatch: " + shape_to_string(in) +
                                         " -> " + shape_to_string(target_shape));
      return target_shape;
  }
  throw Error(ErrorKind::spec, "unknown layer kind");
}

namespace {

inline double act_value(Activation a, double slope, double x) {
  switch (a) {
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::leaky_relu: return x > 0.0 ? x : slope * x;
    case Activation::tanh: return std::tanh(x);
    case Activation::identity: return x;
  }
  return x;
}

// Left-branch convention at the kink: relu'(0) = 0, leaky'(0) = slope.
inline double act_deriv(Activation a, double slope, double x, double y) {
  switch (a) {
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::leaky_relu: return x > 0.0 ? 1.0 : slope;
    case Activation::tanh: return 1.0 - y * y;
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

struct ConvDims {
  int h, w, oh, ow;
};

// Input spatial size is recovered from the flat length; the layer spec fixes
// the channel counts.
ConvDims conv_dims(const LayerSpec& s, Eigen::Index in_len) {
  const Eigen::Index per_ch = in_len / s.in_ch;
  const int hw = static_cast<int>(std::lround(std::sqrt(static_cast<double>(per_ch))));
  if (static_cast<Eigen::Index>(s.in_ch) * hw * hw != in_len)
    throw Error(ErrorKind::dimension, "transposed_conv2d input is not square (C,H,W)");
  ConvDims d;
  d.h = d.w = hw;
  d.oh = (d.h - 1) * s.stride - 2 * s.pad + s.kernel;
  d.ow = (d.w - 1) * s.stride - 2 * s.pad + s.kernel;
  return d;
}

}  // namespace

Vec layer_apply(const LayerSpec& spec, const Tensor* weight, const Vec& x, Vec* tangent) {
  switch (spec.kind) {
    case LayerKind::dense: {
      require_length(x, spec.in_dim, "dense input");
      const Eigen::Map<const RowMat> W(weight->data.data(), spec.out_dim, spec.in_dim);
      Vec y = W * x;
      if (tangent) *tangent = W * (*tangent);
      return y;
    }
    case LayerKind::bias: {
      require_length(x, spec.in_dim, "bias input");
      return x + weight->data;  // tangent unchanged
    }
    case LayerKind::elementwise: {
      Vec y(x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i)
        y[i] = act_value(spec.act, spec.slope, x[i]);
      if (tangent) {
        for (Eigen::Index i = 0; i < x.size(); ++i)
          (*tangent)[i] *= act_deriv(spec.act, spec.slope, x[i], y[i]);
      }
      return y;
    }
    case LayerKind::transposed_conv2d: {
      const ConvDims d = conv_dims(spec, x.size());
      Vec y = Vec::Zero(static_cast<Eigen::Index>(spec.out_ch) * d.oh * d.ow);
      Vec ty;
      if (tangent) ty = Vec::Zero(y.size());
      const auto& K = weight->data;
      // output-scatter form: every input pixel stamps the kernel onto y
      for (int ci = 0; ci < spec.in_ch; ++ci) {
        for (int iy = 0; iy < d.h; ++iy) {
          for (int ix = 0; ix < d.w; ++ix) {
            const double v = x[(static_cast<Eigen::Index>(ci) * d.h + iy) * d.w + ix];
            const double tv =
                tangent ? (*tangent)[(static_cast<Eigen::Index>(ci) * d.h + iy) * d.w + ix] : 0.0;
            for (int co = 0; co < spec.out_ch; ++co) {
              for (int ky = 0; ky < spec.kernel; ++ky) {
                const int oy = iy * spec.stride - spec.pad + ky;
                if (oy < 0 || oy >= d.oh) continue;
                for (int kx = 0; kx < spec.kernel; ++kx) {
                  const int ox = ix * spec.stride - spec.pad + kx;
                  if (ox < 0 || ox >= d.ow) continue;
                  const double kw =
                      K[((static_cast<Eigen::Index>(ci) * spec.out_ch + co) * spec.kernel + ky) *
                            spec.kernel +
                        kx];
                  const Eigen::Index oi =
                      (static_cast<Eigen::Index>(co) * d.oh + oy) * d.ow + ox;
                  y[oi] += v * kw;
                  if (tangent) ty[oi] += tv * kw;
                }
              }
            }
          }
        }
      }
      if (tangent) *tangent = std::move(ty);
      return y;
    }
    case LayerKind::reshape:
      return x;  // tangent unchanged
  }
  throw Error(ErrorKind::spec, "unknown layer kind");
}

Vec layer_vjp(const LayerSpec& spec, const Tensor* weight, const Vec& x, const Vec& cot) {
  switch (spec.kind) {
    case LayerKind::dense: {
      require_length(cot, spec.out_dim, "dense cotangent");
      const Eigen::Map<const RowMat> W(weight->data.data(), spec.out_dim, spec.in_dim);
      return W.transpose() * cot;
    }
    case LayerKind::bias:
      require_length(cot, spec.in_dim, "bias cotangent");
      return cot;
    case LayerKind::elementwise: {
      require_length(cot, x.size(), "elementwise cotangent");
      Vec g(x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double y = act_value(spec.act, spec.slope, x[i]);
        g[i] = cot[i] * act_deriv(spec.act, spec.slope, x[i], y);
      }
      return g;
    }
    case LayerKind::transposed_conv2d: {
      const ConvDims d = conv_dims(spec, x.size());
      require_length(cot, static_cast<Eigen::Index>(spec.out_ch) * d.oh * d.ow,
                     "transposed_conv2d cotangent");
      Vec g = Vec::Zero(x.size());
      const auto& K = weight->data;
      for (int ci = 0; ci < spec.in_ch; ++ci) {
        for (int iy = 0; iy < d.h; ++iy) {
          for (int ix = 0; ix < d.w; ++ix) {
            double acc = 0.0;
            for (int co = 0; co < spec.out_ch; ++co) {
              for (int ky = 0; ky < spec.kernel; ++ky) {
                const int oy = iy * spec.stride - spec.pad + ky;
                if (oy < 0 || oy >= d.oh) continue;
                for (int kx = 0; kx < spec.kernel; ++kx) {
                  const int ox = ix * spec.stride - spec.pad + kx;
                  if (ox < 0 || ox >= d.ow) continue;
                  acc += cot[(static_cast<Eigen::Index>(co) * d.oh + oy) * d.ow + ox] *
                         K[((static_cast<Eigen::Index>(ci) * spec.out_ch + co) * spec.kernel +
                            ky) *
                               spec.kernel +
                           kx];
                }
              }
            }
            g[(static_cast<Eigen::Index>(ci) * d.h + iy) * d.w + ix] = acc;
          }
        }
      }
      return g;
    }
    case LayerKind::reshape:
      return cot;
  }
  throw Error(ErrorKind::spec, "unknown layer kind");
}

void layer_weight_grad(const LayerSpec& spec, const Vec& x, const Vec& cot, Tensor& grad) {
  switch (spec.kind) {
    case LayerKind::dense: {
      Eigen::Map<RowMat> G(grad.data.data(), spec.out_dim, spec.in_dim);
      G.noalias() += cot * x.transpose();
      return;
    }
    case LayerKind::bias:
      grad.data += cot;
      return;
    case LayerKind::elementwise:
    case LayerKind::reshape:
      return;
    case LayerKind::transposed_conv2d: {
      const ConvDims d = conv_dims(spec, x.size());
      auto& G = grad.data;
      for (int ci = 0; ci < spec.in_ch; ++ci) {
        for (int iy = 0; iy < d.h; ++iy) {
          for (int ix = 0; ix < d.w; ++ix) {
            const double v = x[(static_cast<Eigen::Index>(ci) * d.h + iy) * d.w + ix];
            if (v == 0.0) continue;
            for (int co = 0; co < spec.out_ch; ++co) {
              for (int ky = 0; ky < spec.kernel; ++ky) {
                const int oy = iy * spec.stride - spec.pad + ky;
                if (oy < 0 || oy >= d.oh) continue;
                for (int kx = 0; kx < spec.kernel; ++kx) {
                  const int ox = ix * spec.stride - spec.pad + kx;
                  if (ox < 0 || ox >= d.ow) continue;
                  G[((static_cast<Eigen::Index>(ci) * spec.out_ch + co) * spec.kernel + ky) *
                        spec.kernel +
                    kx] += v * cot[(static_cast<Eigen::Index>(co) * d.oh + oy) * d.ow + ox];
                }
              }
            }
          }
        }
      }
      return;
    }
  }
}

double layer_kink_distance(const LayerSpec& spec, const Vec& x) {
  if (spec.kind != LayerKind::elementwise ||
      (spec.act != Activation::relu && spec.act != Activation::leaky_relu))
    return std::numeric_limits<double>::infinity();
  double m = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i) m = std::min(m, std::abs(x[i]));
  return m;
}

}  // namespace manifold

#pragma once

// Test-only reference implementations. Everything here recomputes results
// by a route independent of the library's differentiation paths: plain
// nested loops for the forward pass, central finite differences for
// derivatives, and direct rank statistics.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "manifold/diffmap.hpp"
#include "manifold/generators.hpp"
#include "manifold/metric.hpp"

namespace oracles {

using manifold::DiffMap;
using manifold::Mat;
using manifold::Vec;

// Straight-line re-evaluation of a layer stack from its weight tensors.
// Transposed convolution uses the gather form (the library scatters).
inline Vec naive_forward(const DiffMap& map, const Vec& z) {
  using namespace manifold;
  Vec x = z;
  std::vector<int> shape = map.input_shape();
  for (std::size_t li = 0; li < map.layers().size(); ++li) {
    const LayerSpec& s = map.layers()[li];
    const Tensor* w = map.weights()->find(static_cast<int>(li));
    Vec y;
    switch (s.kind) {
      case LayerKind::dense: {
        y = Vec::Zero(s.out_dim);
        for (int o = 0; o < s.out_dim; ++o) {
          double acc = 0.0;
          for (int i = 0; i < s.in_dim; ++i)
            acc += w->data[static_cast<Eigen::Index>(o) * s.in_dim + i] * x[i];
          y[o] = acc;
        }
        break;
      }
      case LayerKind::bias: {
        y = x;
        for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += w->data[i];
        break;
      }
      case LayerKind::elementwise: {
        y = x;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
          const double v = x[i];
          switch (s.act) {
            case Activation::relu: y[i] = v > 0 ? v : 0.0; break;
            case Activation::leaky_relu: y[i] = v > 0 ? v : s.slope * v; break;
            case Activation::tanh: y[i] = std::tanh(v); break;
            case Activation::identity: break;
          }
        }
        break;
      }
      case LayerKind::transposed_conv2d: {
        const int h = shape[1], wd = shape[2];
        const int oh = (h - 1) * s.stride - 2 * s.pad + s.kernel;
        const int ow = (wd - 1) * s.stride - 2 * s.pad + s.kernel;
        y = Vec::Zero(static_cast<Eigen::Index>(s.out_ch) * oh * ow);
        for (int co = 0; co < s.out_ch; ++co)
          for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
              double acc = 0.0;
              for (int ci = 0; ci < s.in_ch; ++ci)
                for (int ky = 0; ky < s.kernel; ++ky)
                  for (int kx = 0; kx < s.kernel; ++kx) {
                    const int ny = oy + s.pad - ky;
                    const int nx = ox + s.pad - kx;
                    if (ny < 0 || nx < 0 || ny % s.stride || nx % s.stride) continue;
                    const int iy = ny / s.stride, ix = nx / s.stride;
                    if (iy >= h || ix >= wd) continue;
                    acc += x[(static_cast<Eigen::Index>(ci) * h + iy) * wd + ix] *
                           w->data[((static_cast<Eigen::Index>(ci) * s.out_ch + co) * s.kernel +
                                    ky) *
                                       s.kernel +
                                   kx];
                  }
              y[(static_cast<Eigen::Index>(co) * oh + oy) * ow + ox] = acc;
            }
        break;
      }
      case LayerKind::reshape:
        y = x;
        break;
    }
    shape = s.output_shape(shape);
    x = std::move(y);
  }
  return x;
}

inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& z, double h) {
  const Vec f0 = f(z);
  Mat J(f0.size(), z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    Vec zp = z, zm = z;
    zp[i] += h;
    zm[i] -= h;
    J.col(i) = (f(zp) - f(zm)) / (2.0 * h);
  }
  return J;
}

inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& z, double h) {
  Vec g(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    Vec zp = z, zm = z;
    zp[i] += h;
    zm[i] -= h;
    g[i] = (f(zp) - f(zm)) / (2.0 * h);
  }
  return g;
}

// O(n^2) second differences of a scalar function.
inline Mat fd_hessian(const std::function<double(const Vec&)>& f, const Vec& z, double h) {
  const Eigen::Index n = z.size();
  Mat H(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      Vec zpp = z, zpm = z, zmp = z, zmm = z;
      zpp[i] += h; zpp[j] += h;
      zpm[i] += h; zpm[j] -= h;
      zmp[i] -= h; zmp[j] += h;
      zmm[i] -= h; zmm[j] -= h;
      H(i, j) = H(j, i) = (f(zpp) - f(zpm) - f(zmp) + f(zmm)) / (4.0 * h * h);
    }
  }
  return H;
}

inline std::vector<double> ranks_of(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t pos = 0; pos < idx.size(); ++pos) r[idx[pos]] = static_cast<double>(pos);
  return r;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks_of(a);
  const auto rb = ranks_of(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double num = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(va * vb);
}

// Mean cosine of principal angles between the column spans of A and B.
inline double mean_principal_cosine(const Mat& A, const Mat& B) {
  const Mat Qa = Eigen::HouseholderQR<Mat>(A).householderQ() * Mat::Identity(A.rows(), A.cols());
  const Mat Qb = Eigen::HouseholderQR<Mat>(B).householderQ() * Mat::Identity(B.rows(), B.cols());
  Eigen::JacobiSVD<Mat> svd(Qa.transpose() * Qb);
  return svd.singularValues().mean();
}

// Dense symmetric matrix -> MetricTensor with a descending eigenbasis.
inline manifold::MetricTensor tensor_from_dense(const Mat& M) {
  manifold::MetricTensor t;
  t.point = Vec::Zero(M.rows());
  t.k = static_cast<int>(M.rows());
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  const Eigen::Index n = M.rows();
  t.eigenvalues.resize(n);
  t.eigenvectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    t.eigenvalues[i] = es.eigenvalues()[n - 1 - i];
    t.eigenvectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  t.matrix = M;
  return t;
}

// Simple deterministic linear-composite builder for exactness tests.
inline manifold::DiffMap linear_map(const Mat& A) {
  using namespace manifold;
  const int out = static_cast<int>(A.rows());
  const int in = static_cast<int>(A.cols());
  auto store = std::make_shared<WeightStore>();
  Vec flat(static_cast<Eigen::Index>(out) * in);
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < in; ++c) flat[static_cast<Eigen::Index>(r) * in + c] = A(r, c);
  store->entries.push_back({0, "dense", Tensor({out, in}, flat)});
  return DiffMap({LayerSpec::Dense(in, out)}, store, {in});
}

inline manifold::DiffMap random_mlp(int in, int hidden, int out, std::uint64_t seed,
                                    manifold::Activation act = manifold::Activation::tanh) {
  using namespace manifold;
  GeneratorSpec s;
  s.architecture = {LayerSpec::Dense(in, hidden), LayerSpec::Bias(hidden),
                    LayerSpec::Elementwise(act, act == Activation::leaky_relu ? 0.2 : 0.0),
                    LayerSpec::Dense(hidden, out), LayerSpec::Bias(out)};
  s.latent_dim = in;
  s.output_shape = {out};
  s.init_seed = seed;
  return build_generator(s);
}

}  // namespace oracles

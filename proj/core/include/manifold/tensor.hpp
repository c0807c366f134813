#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "manifold/error.hpp"

namespace manifold {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Dense 64-bit tensor: a shape plus flat row-major data.
struct Tensor {
  std::vector<int> shape;
  Vec data;

  Tensor() = default;
  Tensor(std::vector<int> s, Vec d) : shape(std::move(s)), data(std::move(d)) {
    if (numel(shape) != data.size())
      throw Error(ErrorKind::dimension, "tensor shape does not match data length");
  }

  static Eigen::Index numel(const std::vector<int>& shape) {
    Eigen::Index n = 1;
    for (int d : shape) {
      if (d <= 0) throw Error(ErrorKind::spec, "tensor dimensions must be positive");
      n *= d;
    }
    return n;
  }

  Eigen::Index size() const { return data.size(); }
};

inline std::string shape_to_string(const std::vector<int>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  out += ")";
  return out;
}

inline void require_length(const Vec& v, Eigen::Index n, const char* what) {
  if (v.size() != n)
    throw Error(ErrorKind::dimension,
                std::string(what) + ": expected length " + std::to_string(n) +
                    ", got " + std::to_string(v.size()));
}

}  // namespace manifold

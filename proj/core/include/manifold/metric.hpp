#pragma once

#include <functional>
#include <optional>
#include <string>

#include "manifold/distance.hpp"

namespace manifold {

enum class HessianMethod { full_bp, backward_iter, forward_iter };

const char* hessian_method_name(HessianMethod m);
HessianMethod hessian_method_from_name(const std::string& s);

// Local metric tensor at a latent point: eigenpairs (descending), optionally
// the dense matrix, and how it was computed.
struct MetricTensor {
  Vec point;
  std::optional<Mat> matrix;  // absent for low-rank iterative results
  Vec eigenvalues;            // descending, length k
  Mat eigenvectors;           // n x k, orthonormal columns
  HessianMethod method = HessianMethod::full_bp;
  int k = 0;
  int iterations = 0;
  double tol = 0.0;
  std::uint64_t seed = 0;
  Vec residuals;  // per-pair ||H u - lambda u||, when computed

  int dim() const { return static_cast<int>(point.size()); }

  // v^T H v using the dense matrix when present, else the eigenpair
  // reconstruction (exact when k == n).
  double quadratic_form(const Vec& v) const;
};

// Matrix-free H(z0) action. Backward mode evaluates J^T(Jv) through the
// pullback (exact at the base point, where the gradient vanishes); forward
// mode takes a central difference of the distance gradient along v.
class HvpOperator {
 public:
  enum class Mode { backward, forward };

  // eps < 0 selects the default forward step 1e-4 * (1 + ||z0||_inf).
  HvpOperator(const DistanceMetric& distance, Vec z0, Mode mode = Mode::backward,
              double eps = -1.0);

  int dim() const { return static_cast<int>(z0_.size()); }
  const Vec& point() const { return z0_; }
  Mode mode() const { return mode_; }
  double eps() const { return eps_; }
  const DistanceMetric& distance() const { return *distance_; }

  Vec apply(const Vec& v) const;

 private:
  const DistanceMetric* distance_;
  Vec z0_;
  Mode mode_;
  double eps_;
};

Vec hvp(const HvpOperator& op, const Vec& v);

// Dense metric tensor: Jacobian of the pullback column by column, assembled
// as J^T J, with a full eigendecomposition attached.
MetricTensor hessian_full(const DistanceMetric& distance, const Vec& z0,
                          Eigen::Index entry_cap = Eigen::Index(1) << 24);

class ConvergenceError : public Error {
 public:
  ConvergenceError(MetricTensor best, const std::string& msg)
      : Error(ErrorKind::convergence, msg), best_(std::move(best)) {}
  const MetricTensor& best() const { return best_; }

 private:
  MetricTensor best_;
};

// Lanczos with full reorthogonalization on a seeded random start vector.
// Returns the k largest eigenpairs once every per-pair residual falls below
// tol * |lambda_1|; throws ConvergenceError (carrying the best pairs so far)
// if max_iter Krylov steps do not suffice.
MetricTensor lanczos_topk(const HvpOperator& op, int k, int max_iter, double tol,
                          std::uint64_t seed);

// Rayleigh quotient v^T H v / v^T v.
double alpha(const MetricTensor& metric, const Vec& v);
double alpha(const HvpOperator& op, const Vec& v);

// J(z0) * v on the raw generator: the output-space change direction.
Vec pushforward(const DiffMap& map, const Vec& z0, const Vec& v);

// Metric of the truncated map z -> activations after layer `layer_index`,
// under the same half-squared-L2 pullback.
MetricTensor layer_metric(const DiffMap& map, const Vec& z0, int layer_index);

// ---- serialization -------------------------------------------------------

// JSON document with base64-encoded f64 payloads for point / eigenvalues /
// eigenvectors (and the dense matrix if kept).
std::string metric_tensor_to_json(const MetricTensor& m, bool include_matrix = true);
MetricTensor metric_tensor_from_json(const std::string& text);

// CSV "rank,eigenvalue" rows.
std::string spectrum_to_csv(const Vec& eigenvalues);

}  // namespace manifold

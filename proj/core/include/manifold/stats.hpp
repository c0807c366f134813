#pragma once

#include <array>
#include <optional>
#include <vector>

#include "manifold/metric.hpp"

namespace manifold {

// Anisotropy summary of one spectrum: the minimal dimension counts covering
// fixed fractions of the trace, plus the spread in orders of magnitude.
struct SpectrumSummary {
  Vec eigenvalues;  // descending
  double trace = 0.0;
  static constexpr std::array<double, 4> kFractions{0.99, 0.999, 0.9999, 0.99999};
  std::array<int, 4> dims{};  // dims[i]: smallest m with top-m sum >= kFractions[i]*trace
  double log_range = 0.0;     // log10(lambda_1 / max(lambda_n, lambda_1 * 1e-12))

  int dim99() const { return dims[0]; }
};

SpectrumSummary summarize_spectrum(const Vec& eigenvalues);

// Pearson correlation with an explicit undefined state instead of NaN when
// either side is (numerically) constant.
struct Correlation {
  double value = 0.0;
  bool defined = false;
};

Correlation pearson(const Vec& a, const Vec& b);

// Action of H_j on the eigenframe of H_i, correlated against H_j's own
// spectrum on linear and log scales.
struct ConsistencyStat {
  Vec lambda_ij;        // u_{i,k}^T H_j u_{i,k}
  Correlation c_lin;
  Correlation c_log;
  double log_floor = 0.0;  // clamp floor = lambda_1(H_j) * 1e-12
  int clamped = 0;         // entries clamped before taking logs
};

ConsistencyStat consistency_pair(const MetricTensor& Hi, const MetricTensor& Hj);

struct ConsistencySummary {
  std::vector<ConsistencyStat> pairs;  // ordered pairs (i, j), i != j, row-major
  int n_points = 0;
  double mean_c_log = 0.0, std_c_log = 0.0;
  double mean_c_lin = 0.0, std_c_lin = 0.0;
  int undefined_log = 0, undefined_lin = 0;

  const ConsistencyStat& pair(int i, int j) const;
};

// All ordered pairs (i != j) of metric tensors computed at the given points.
ConsistencySummary consistency_matrix(const std::vector<Vec>& points,
                                      const DistanceMetric& distance);
ConsistencySummary consistency_matrix(const std::vector<MetricTensor>& tensors);

// Element-wise mean of dense metric tensors, re-eigendecomposed.
MetricTensor global_hessian(const std::vector<MetricTensor>& tensors);

// Rayleigh quotients of isotropic random directions against a fixed
// spectrum: closed-form mean/variance plus a seeded Monte-Carlo check.
struct MixingStat {
  int n = 0;
  Vec eigenvalues;
  double analytic_mean = 0.0;      // (1/n) sum(lambda)
  double analytic_var = 0.0;       // 2/(n(n+2)) sum(l^2) - 2/(n^2(n+2)) (sum l)^2
  double eigenvalue_var = 0.0;     // (1/n) sum(l^2) - (1/n^2)(sum l)^2
  double sample_mean = 0.0;
  double sample_var = 0.0;
  int n_samples = 0;
};

MixingStat mixing_stats(const Vec& eigenvalues, int n_samples, std::uint64_t seed);

// Per-point agreement between the metric tensors induced by two distances.
struct RobustnessRow {
  Correlation h_corr;       // element-wise Pearson over dense H entries
  Correlation eigval_corr;  // spectra correlation
  Correlation c_lin;
  Correlation c_log;
  double slope = 0.0;      // log10-spectrum regression of B on A
  double intercept = 0.0;
  bool regression_defined = false;
};

struct RobustnessReport {
  std::vector<RobustnessRow> rows;
  double mean_h_corr = 0.0, std_h_corr = 0.0;
  double mean_eigval_corr = 0.0, std_eigval_corr = 0.0;
  double mean_c_lin = 0.0, std_c_lin = 0.0;
  double mean_c_log = 0.0, std_c_log = 0.0;
  double mean_slope = 0.0, std_slope = 0.0;
  double mean_intercept = 0.0, std_intercept = 0.0;
};

RobustnessReport compare_distance_metrics(const std::vector<Vec>& points,
                                          const DistanceMetric& dist_a,
                                          const DistanceMetric& dist_b);

}  // namespace manifold

#include "manifold/stats.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "manifold/parallel.hpp"
#include "manifold/rng.hpp"

namespace manifold {

SpectrumSummary summarize_spectrum(const Vec& eigenvalues) {
  if (eigenvalues.size() == 0)
    throw Error(ErrorKind::argument, "empty spectrum");
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
    if (eigenvalues[i] < 0.0)
      throw Error(ErrorKind::argument, "spectrum summary expects nonnegative eigenvalues");

  SpectrumSummary s;
  s.eigenvalues = eigenvalues;
  std::sort(s.eigenvalues.data(), s.eigenvalues.data() + s.eigenvalues.size(),
            std::greater<double>());
  s.trace = s.eigenvalues.sum();
  if (s.trace <= 0.0) throw Error(ErrorKind::argument, "degenerate all-zero spectrum");

  for (std::size_t f = 0; f < SpectrumSummary::kFractions.size(); ++f) {
    const double target = SpectrumSummary::kFractions[f] * s.trace;
    double acc = 0.0;
    int m = static_cast<int>(s.eigenvalues.size());
    for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) {
      acc += s.eigenvalues[i];
      if (acc >= target) {
        m = static_cast<int>(i) + 1;
        break;
      }
    }
    s.dims[f] = m;
  }
  const double lam1 = s.eigenvalues[0];
  const double lam_min = s.eigenvalues[s.eigenvalues.size() - 1];
  const double eff_min = std::max(lam_min, lam1 * 1e-12);
  s.log_range = std::log10(lam1 / eff_min);
  return s;
}

Correlation pearson(const Vec& a, const Vec& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw Error(ErrorKind::argument, "pearson needs two equal-length vectors (n >= 2)");
  const double ma = a.mean();
  const double mb = b.mean();
  const Vec da = a.array() - ma;
  const Vec db = b.array() - mb;
  const double va = da.squaredNorm();
  const double vb = db.squaredNorm();
  // constant side => undefined, never NaN
  const double na = a.cwiseAbs().maxCoeff();
  const double nb = b.cwiseAbs().maxCoeff();
  const double floor_a = std::pow(1e-12 * (na > 0 ? na : 1.0), 2) * static_cast<double>(a.size());
  const double floor_b = std::pow(1e-12 * (nb > 0 ? nb : 1.0), 2) * static_cast<double>(b.size());
  Correlation c;
  if (va <= floor_a || vb <= floor_b) return c;
  c.value = da.dot(db) / std::sqrt(va * vb);
  c.defined = true;
  return c;
}

namespace {

// a spectrum whose relative spread is below this is treated as isotropic;
// correlating against it is meaningless and gets the undefined flag
bool nearly_constant_spectrum(const Vec& v) {
  const double hi = v.maxCoeff();
  const double lo = v.minCoeff();
  const double scale = std::max({std::abs(hi), std::abs(lo), 1e-300});
  return hi - lo <= 1e-9 * scale;
}

}  // namespace

ConsistencyStat consistency_pair(const MetricTensor& Hi, const MetricTensor& Hj) {
  if (Hi.dim() != Hj.dim())
    throw Error(ErrorKind::argument, "consistency pair dimension mismatch");
  if (Hi.eigenvectors.cols() == 0)
    throw Error(ErrorKind::argument, "left tensor carries no eigenvectors");
  const int k = std::min<int>(Hi.k, Hj.k);
  if (k < 2) throw Error(ErrorKind::argument, "consistency needs at least two eigenpairs");

  ConsistencyStat st;
  st.lambda_ij.resize(k);
  for (int i = 0; i < k; ++i)
    st.lambda_ij[i] = Hj.quadratic_form(Hi.eigenvectors.col(i));
  const Vec lambda_j = Hj.eigenvalues.head(k);

  if (nearly_constant_spectrum(st.lambda_ij) || nearly_constant_spectrum(lambda_j)) {
    st.log_floor = std::max(Hj.eigenvalues[0] * 1e-12, 1e-300);
    return st;  // both correlations stay flagged undefined
  }

  st.c_lin = pearson(st.lambda_ij, lambda_j);

  st.log_floor = Hj.eigenvalues[0] * 1e-12;
  if (st.log_floor <= 0.0) st.log_floor = 1e-300;
  Vec log_ij(k), log_j(k);
  for (int i = 0; i < k; ++i) {
    double a = st.lambda_ij[i];
    double b = lambda_j[i];
    if (a < st.log_floor) {
      a = st.log_floor;
      ++st.clamped;
    }
    if (b < st.log_floor) {
      b = st.log_floor;
      ++st.clamped;
    }
    log_ij[i] = std::log10(a);
    log_j[i] = std::log10(b);
  }
  st.c_log = pearson(log_ij, log_j);
  return st;
}

namespace {

void fill_summary_stats(ConsistencySummary& s) {
  double sum_log = 0.0, sum_lin = 0.0;
  int n_log = 0, n_lin = 0;
  for (const auto& p : s.pairs) {
    if (p.c_log.defined) {
      sum_log += p.c_log.value;
      ++n_log;
    } else {
      ++s.undefined_log;
    }
    if (p.c_lin.defined) {
      sum_lin += p.c_lin.value;
      ++n_lin;
    } else {
      ++s.undefined_lin;
    }
  }
  s.mean_c_log = n_log ? sum_log / n_log : 0.0;
  s.mean_c_lin = n_lin ? sum_lin / n_lin : 0.0;
  double var_log = 0.0, var_lin = 0.0;
  for (const auto& p : s.pairs) {
    if (p.c_log.defined) var_log += std::pow(p.c_log.value - s.mean_c_log, 2);
    if (p.c_lin.defined) var_lin += std::pow(p.c_lin.value - s.mean_c_lin, 2);
  }
  s.std_c_log = n_log ? std::sqrt(var_log / n_log) : 0.0;
  s.std_c_lin = n_lin ? std::sqrt(var_lin / n_lin) : 0.0;
}

}  // namespace

const ConsistencyStat& ConsistencySummary::pair(int i, int j) const {
  if (i == j || i < 0 || j < 0 || i >= n_points || j >= n_points)
    throw Error(ErrorKind::argument, "invalid consistency pair index");
  // row-major over ordered pairs with the diagonal removed
  const int col = j > i ? j - 1 : j;
  return pairs[static_cast<std::size_t>(i) * (n_points - 1) + col];
}

ConsistencySummary consistency_matrix(const std::vector<MetricTensor>& tensors) {
  const int n = static_cast<int>(tensors.size());
  if (n < 2) throw Error(ErrorKind::argument, "consistency matrix needs >= 2 points");
  ConsistencySummary s;
  s.n_points = n;
  s.pairs.resize(static_cast<std::size_t>(n) * (n - 1));
  parallel_for(n * n, [&](int idx) {
    const int i = idx / n;
    const int j = idx % n;
    if (i == j) return;
    const int col = j > i ? j - 1 : j;
    s.pairs[static_cast<std::size_t>(i) * (n - 1) + col] =
        consistency_pair(tensors[static_cast<std::size_t>(i)], tensors[static_cast<std::size_t>(j)]);
  });
  fill_summary_stats(s);
  return s;
}

ConsistencySummary consistency_matrix(const std::vector<Vec>& points,
                                      const DistanceMetric& distance) {
  if (points.size() < 2) throw Error(ErrorKind::argument, "consistency matrix needs >= 2 points");
  std::vector<MetricTensor> tensors(points.size());
  parallel_for(static_cast<int>(points.size()), [&](int i) {
    tensors[static_cast<std::size_t>(i)] = hessian_full(distance, points[static_cast<std::size_t>(i)]);
  });
  return consistency_matrix(tensors);
}

MetricTensor global_hessian(const std::vector<MetricTensor>& tensors) {
  if (tensors.empty()) throw Error(ErrorKind::argument, "global hessian of an empty set");
  const int n = tensors.front().dim();
  for (const auto& t : tensors) {
    if (!t.matrix) throw Error(ErrorKind::argument, "global hessian requires dense tensors");
    if (t.dim() != n) throw Error(ErrorKind::argument, "global hessian dimension mismatch");
  }
  Mat mean = Mat::Zero(n, n);
  for (const auto& t : tensors) mean += *t.matrix;
  mean /= static_cast<double>(tensors.size());
  mean = 0.5 * (mean + mean.transpose()).eval();

  MetricTensor out;
  out.point = Vec::Zero(n);
  out.method = tensors.front().method;
  out.k = n;
  Eigen::SelfAdjointEigenSolver<Mat> es(mean);
  if (es.info() != Eigen::Success)
    throw Error(ErrorKind::numerical, "eigendecomposition of the mean tensor failed");
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (int i = 0; i < n; ++i) {
    out.eigenvalues[i] = es.eigenvalues()[n - 1 - i];
    out.eigenvectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  for (Eigen::Index c = 0; c < out.eigenvectors.cols(); ++c) {
    Eigen::Index imax = 0;
    out.eigenvectors.col(c).cwiseAbs().maxCoeff(&imax);
    if (out.eigenvectors(imax, c) < 0.0) out.eigenvectors.col(c) *= -1.0;
  }
  out.matrix = std::move(mean);
  return out;
}

MixingStat mixing_stats(const Vec& eigenvalues, int n_samples, std::uint64_t seed) {
  if (n_samples < 1000) throw Error(ErrorKind::argument, "mixing stats need >= 1000 samples");
  if (eigenvalues.size() < 1) throw Error(ErrorKind::argument, "empty spectrum");
  MixingStat st;
  st.n = static_cast<int>(eigenvalues.size());
  st.eigenvalues = eigenvalues;
  st.n_samples = n_samples;

  const double n = static_cast<double>(st.n);
  const double sum = eigenvalues.sum();
  const double sum2 = eigenvalues.squaredNorm();
  st.analytic_mean = sum / n;
  st.analytic_var = 2.0 / (n * (n + 2.0)) * sum2 - 2.0 / (n * n * (n + 2.0)) * sum * sum;
  st.eigenvalue_var = sum2 / n - (sum / n) * (sum / n);

  // isotropic directions realized through chi-square weights: w_i^2 summing
  // to one is exactly the Dirichlet(1/2,...) weight vector
  Rng rng(mix_seed(seed, 0xd1c));
  double acc = 0.0, acc2 = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    double wsum = 0.0, weighted = 0.0;
    for (int i = 0; i < st.n; ++i) {
      const double w = rng.normal();
      const double w2 = w * w;
      wsum += w2;
      weighted += w2 * eigenvalues[i];
    }
    const double a = weighted / wsum;
    acc += a;
    acc2 += a * a;
  }
  st.sample_mean = acc / n_samples;
  st.sample_var = acc2 / n_samples - st.sample_mean * st.sample_mean;
  return st;
}

namespace {

Vec flatten(const Mat& m) {
  return Eigen::Map<const Vec>(m.data(), m.size());
}

void accumulate(double v, double& mean, double& m2, int& count) {
  ++count;
  const double d = v - mean;
  mean += d / count;
  m2 += d * (v - mean);
}

}  // namespace

RobustnessReport compare_distance_metrics(const std::vector<Vec>& points,
                                          const DistanceMetric& dist_a,
                                          const DistanceMetric& dist_b) {
  if (points.empty()) throw Error(ErrorKind::argument, "compare_distance_metrics needs >= 1 point");
  RobustnessReport rep;
  rep.rows.resize(points.size());
  parallel_for(static_cast<int>(points.size()), [&](int idx) {
    const Vec& z = points[static_cast<std::size_t>(idx)];
    const MetricTensor Ha = hessian_full(dist_a, z);
    const MetricTensor Hb = hessian_full(dist_b, z);
    RobustnessRow row;
    row.h_corr = pearson(flatten(*Ha.matrix), flatten(*Hb.matrix));
    row.eigval_corr = pearson(Ha.eigenvalues, Hb.eigenvalues);
    const ConsistencyStat cs = consistency_pair(Ha, Hb);
    row.c_lin = cs.c_lin;
    row.c_log = cs.c_log;

    // least squares of log10 spectrum B on log10 spectrum A
    const int n = Ha.dim();
    const double floor_a = std::max(Ha.eigenvalues[0] * 1e-12, 1e-300);
    const double floor_b = std::max(Hb.eigenvalues[0] * 1e-12, 1e-300);
    Vec la(n), lb(n);
    for (int i = 0; i < n; ++i) {
      la[i] = std::log10(std::max(Ha.eigenvalues[i], floor_a));
      lb[i] = std::log10(std::max(Hb.eigenvalues[i], floor_b));
    }
    const double ma = la.mean();
    const double mb = lb.mean();
    const double var_a = (la.array() - ma).matrix().squaredNorm();
    if (var_a > 0.0) {
      row.slope = (la.array() - ma).matrix().dot((lb.array() - mb).matrix()) / var_a;
      row.intercept = mb - row.slope * ma;
      row.regression_defined = true;
    }
    rep.rows[static_cast<std::size_t>(idx)] = std::move(row);
  });

  double m2;
  int c;
#define MP_SUMMARIZE(FIELD, MEAN, STD, DEFINED_EXPR)                 \
  m2 = 0.0;                                                          \
  c = 0;                                                             \
  rep.MEAN = 0.0;                                                    \
  for (const auto& r : rep.rows)                                     \
    if (DEFINED_EXPR) accumulate(r.FIELD, rep.MEAN, m2, c);          \
  rep.STD = c > 0 ? std::sqrt(m2 / c) : 0.0;

  MP_SUMMARIZE(h_corr.value, mean_h_corr, std_h_corr, r.h_corr.defined)
  MP_SUMMARIZE(eigval_corr.value, mean_eigval_corr, std_eigval_corr, r.eigval_corr.defined)
  MP_SUMMARIZE(c_lin.value, mean_c_lin, std_c_lin, r.c_lin.defined)
  MP_SUMMARIZE(c_log.value, mean_c_log, std_c_log, r.c_log.defined)
  MP_SUMMARIZE(slope, mean_slope, std_slope, r.regression_defined)
  MP_SUMMARIZE(intercept, mean_intercept, std_intercept, r.regression_defined)
#undef MP_SUMMARIZE
  return rep;
}

}  // namespace manifold

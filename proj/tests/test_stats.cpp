#include <doctest.h>

#include <Eigen/Dense>

#include "manifold/generators.hpp"
#include "manifold/stats.hpp"
#include "manifold/rng.hpp"
#include "support/oracles.hpp"

using namespace manifold;

using oracles::tensor_from_dense;

namespace {

Vec vec_of(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("summarize_spectrum: textbook cases") {
  const SpectrumSummary a = summarize_spectrum(vec_of({98, 1, 0.5, 0.5}));
  CHECK(a.dims[0] == 2);  // 98 + 1 = 0.99 * 100

  const int n = 40;
  const SpectrumSummary flat = summarize_spectrum(Vec::Constant(n, 3.7));
  CHECK(flat.dims[0] == static_cast<int>(std::ceil(0.99 * n)));

  const SpectrumSummary tiny = summarize_spectrum(vec_of({1.0, 1e-12}));
  CHECK(tiny.dims[0] == 1);
  CHECK(tiny.log_range == doctest::Approx(12.0).epsilon(1e-9));
}

TEST_CASE("summarize_spectrum: dim thresholds are monotone in the fraction") {
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    Vec lam(12);
    for (int i = 0; i < 12; ++i) lam[i] = std::exp(2.0 * rng.normal());
    const SpectrumSummary s = summarize_spectrum(lam);
    for (int f = 1; f < 4; ++f) CHECK(s.dims[f] >= s.dims[f - 1]);
    CHECK(s.dims[0] >= 1);
    CHECK(s.dims[3] <= 12);
  }
}

TEST_CASE("summarize_spectrum: order-invariant, rejects degenerate input") {
  const Vec a = vec_of({5, 1, 3});
  const Vec b = vec_of({1, 3, 5});
  CHECK(summarize_spectrum(a).dims == summarize_spectrum(b).dims);
  CHECK_THROWS_AS(summarize_spectrum(Vec::Zero(4)), Error);
  CHECK_THROWS_AS(summarize_spectrum(vec_of({1.0, -0.5})), Error);
}

TEST_CASE("consistency_pair: identical tensors correlate perfectly") {
  Mat M = Mat::Zero(5, 5);
  M.diagonal() << 10, 5, 1, 0.1, 0.01;
  const MetricTensor H = tensor_from_dense(M);
  const ConsistencyStat st = consistency_pair(H, H);
  REQUIRE(st.c_lin.defined);
  REQUIRE(st.c_log.defined);
  CHECK(st.c_lin.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(st.c_log.value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("consistency_pair: isotropic right-hand side is flagged, not NaN") {
  Mat M = Mat::Zero(4, 4);
  M.diagonal() << 4, 2, 1, 0.5;
  const MetricTensor Hi = tensor_from_dense(M);
  const MetricTensor Hj = tensor_from_dense(Mat::Identity(4, 4));
  const ConsistencyStat st = consistency_pair(Hi, Hj);
  CHECK_FALSE(st.c_lin.defined);
  CHECK_FALSE(st.c_log.defined);
  CHECK(std::isfinite(st.lambda_ij.sum()));
}

TEST_CASE("consistency_pair: linear generator metric is constant over latent space") {
  const DistanceMetric dist = DistanceMetric::pixel(builtin_generator("linear32"));
  Rng rng(4);
  const MetricTensor Ha = hessian_full(dist, rng.normal_vector(8));
  const MetricTensor Hb = hessian_full(dist, rng.normal_vector(8));
  const ConsistencyStat st = consistency_pair(Ha, Hb);
  REQUIRE(st.c_log.defined);
  CHECK(st.c_log.value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("consistency_matrix: linear generator, 10 points, mean 1 std 0") {
  const DistanceMetric dist = DistanceMetric::pixel(builtin_generator("linear32"));
  const auto pts = sample_latent(builtin_generator_spec("linear32"), 99, 10);
  const ConsistencySummary s = consistency_matrix(pts, dist);
  CHECK(s.pairs.size() == 90);
  CHECK(s.mean_c_log == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(s.std_c_log <= 1e-9);
  CHECK(s.undefined_log == 0);
}

TEST_CASE("consistency_matrix: blob decoder golden value is stable") {
  const DistanceMetric dist = DistanceMetric::pixel(builtin_generator("blob16"));
  const auto pts = sample_latent(builtin_generator_spec("blob16"), 4242, 20);
  const ConsistencySummary s = consistency_matrix(pts, dist);
  CHECK(s.mean_c_log == doctest::Approx(0.97645502786529292).epsilon(1e-9));
  const ConsistencySummary again = consistency_matrix(pts, dist);
  CHECK(s.mean_c_log == again.mean_c_log);
  CHECK(s.std_c_log == again.std_c_log);
}

TEST_CASE("consistency_matrix: shuffled control is no more homogeneous than trained") {
  const DiffMap& trained = builtin_generator("blob16");
  auto shuffled_store = std::make_shared<WeightStore>(shuffle_weights(*trained.weights(), 7));
  const DiffMap shuffled = trained.with_weights(shuffled_store);
  const auto pts = sample_latent(builtin_generator_spec("blob16"), 4242, 20);
  const ConsistencySummary a = consistency_matrix(pts, DistanceMetric::pixel(trained));
  const ConsistencySummary b = consistency_matrix(pts, DistanceMetric::pixel(shuffled));
  CHECK(b.mean_c_log <= a.mean_c_log);
}

TEST_CASE("global_hessian: mean of complementary diagonals is the identity") {
  Mat a = Mat::Zero(2, 2), b = Mat::Zero(2, 2);
  a(0, 0) = 2;
  b(1, 1) = 2;
  const MetricTensor g = global_hessian({tensor_from_dense(a), tensor_from_dense(b)});
  CHECK((*g.matrix - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("global_hessian: single input is returned unchanged") {
  Mat m(3, 3);
  m << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
  const MetricTensor g = global_hessian({tensor_from_dense(m)});
  CHECK((*g.matrix - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("global_hessian: commutes with uniform scaling") {
  Rng rng(5);
  std::vector<MetricTensor> ts, ts2;
  for (int i = 0; i < 4; ++i) {
    Mat B(6, 4);
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 4; ++c) B(r, c) = rng.normal();
    const Mat H = B.transpose() * B;
    ts.push_back(tensor_from_dense(H));
    ts2.push_back(tensor_from_dense(Mat(2.0 * H)));
  }
  const MetricTensor g = global_hessian(ts);
  const MetricTensor g2 = global_hessian(ts2);
  CHECK((*g2.matrix - 2.0 * *g.matrix).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("global_hessian: dimension mismatch raises an argument error") {
  CHECK_THROWS_AS(
      global_hessian({tensor_from_dense(Mat::Identity(2, 2)),
                      tensor_from_dense(Mat::Identity(3, 3))}),
      Error);
  MetricTensor no_matrix = tensor_from_dense(Mat::Identity(2, 2));
  no_matrix.matrix.reset();
  CHECK_THROWS_AS(global_hessian({no_matrix}), Error);
}

TEST_CASE("global_hessian: blob mean aligns with local top eigenspaces") {
  const DistanceMetric dist = DistanceMetric::pixel(builtin_generator("blob16"));
  const auto pts = sample_latent(builtin_generator_spec("blob16"), 64, 20);
  std::vector<MetricTensor> tensors;
  for (const Vec& z : pts) tensors.push_back(hessian_full(dist, z));
  const MetricTensor g = global_hessian(tensors);
  double acc = 0.0;
  for (const auto& t : tensors)
    acc += oracles::mean_principal_cosine(g.eigenvectors.leftCols(4), t.eigenvectors.leftCols(4));
  CHECK(acc / static_cast<double>(tensors.size()) > 0.8);
}

TEST_CASE("mixing stats: n=2, spectrum (2,0) hits the closed forms exactly") {
  const MixingStat st = mixing_stats(vec_of({2.0, 0.0}), 2000, 11);
  CHECK(st.analytic_mean == 1.0);
  CHECK(st.analytic_var == 0.5);
  CHECK(st.eigenvalue_var == 1.0);
  CHECK(st.eigenvalue_var == doctest::Approx((st.n + 2) / 2.0 * st.analytic_var).epsilon(1e-15));
}

TEST_CASE("mixing stats: flat spectrum has zero variance, analytic and sampled") {
  const MixingStat st = mixing_stats(Vec::Constant(8, 3.25), 2000, 12);
  CHECK(st.analytic_var == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(st.sample_var <= 1e-24);
  CHECK(st.sample_mean == doctest::Approx(3.25).epsilon(1e-12));
}

TEST_CASE("mixing stats: Monte Carlo variance within 5% of the closed form") {
  Rng rng(6);
  Vec lam(16);
  for (int i = 0; i < 16; ++i) lam[i] = std::exp(1.5 * rng.normal());
  const MixingStat st = mixing_stats(lam, 100000, 77);
  CHECK(std::abs(st.sample_var - st.analytic_var) <= 0.05 * st.analytic_var);
  CHECK(st.eigenvalue_var ==
        doctest::Approx((st.n + 2) / 2.0 * st.analytic_var).epsilon(1e-12));
}

TEST_CASE("mixing stats: sample mean within four standard errors") {
  Rng rng(7);
  Vec lam(24);
  for (int i = 0; i < 24; ++i) lam[i] = std::abs(rng.normal()) + 0.01;
  const MixingStat st = mixing_stats(lam, 100000, 41);
  const double se = std::sqrt(st.analytic_var / st.n_samples);
  CHECK(std::abs(st.sample_mean - st.analytic_mean) <= 4.0 * se);
}

TEST_CASE("mixing stats: sample budget below 1000 is rejected") {
  CHECK_THROWS_AS(mixing_stats(vec_of({1.0, 2.0}), 999, 1), Error);
}

TEST_CASE("compare_distance_metrics: identical metrics") {
  const DiffMap& map = builtin_generator("mlp16");
  const DistanceMetric d = DistanceMetric::pixel(map);
  const auto pts = sample_latent(builtin_generator_spec("mlp16"), 17, 3);
  const RobustnessReport r = compare_distance_metrics(pts, d, d);
  CHECK(r.mean_h_corr == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.mean_eigval_corr == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.mean_slope == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(r.mean_intercept) <= 1e-9);
}

TEST_CASE("compare_distance_metrics: scaled metric shows up only in the intercept") {
  const DiffMap& map = builtin_generator("mlp16");
  const DistanceMetric a = DistanceMetric::pixel(map, 1.0);
  const DistanceMetric b = DistanceMetric::pixel(map, 4.0);
  const auto pts = sample_latent(builtin_generator_spec("mlp16"), 18, 3);
  const RobustnessReport r = compare_distance_metrics(pts, a, b);
  CHECK(r.mean_h_corr == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.mean_slope == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.mean_intercept == doctest::Approx(std::log10(4.0)).epsilon(1e-9));
}

TEST_CASE("compare_distance_metrics: pixel vs feature golden on the blob decoder") {
  const DiffMap& map = builtin_generator("blob16");
  const DistanceMetric pix = DistanceMetric::pixel(map);
  const DistanceMetric feat =
      DistanceMetric::feature(map, FeatureEncoder::standard(map.output_dim(), 1234));
  const auto pts = sample_latent(builtin_generator_spec("blob16"), 808, 6);
  const RobustnessReport r = compare_distance_metrics(pts, pix, feat);
  CHECK(r.mean_h_corr == doctest::Approx(0.97904532760292251).epsilon(1e-9));
  CHECK(r.mean_eigval_corr == doctest::Approx(0.99406773817328709).epsilon(1e-9));
}

TEST_CASE("pearson: constant input is undefined, never NaN") {
  CHECK_FALSE(pearson(Vec::Constant(5, 2.0), vec_of({1, 2, 3, 4, 5})).defined);
  const Correlation c = pearson(vec_of({1, 2, 3}), vec_of({2, 4, 6}));
  REQUIRE(c.defined);
  CHECK(c.value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("consistency_pair: near-null frame actions are clamped before logs") {
  // right-hand tensor is rank-1, so most of the left frame lands on ~zero
  Rng rng(55);
  Vec b = rng.normal_vector(6);
  const Mat rank1 = b * b.transpose();
  Mat spread = Mat::Zero(6, 6);
  spread.diagonal() << 32, 16, 8, 4, 2, 1;
  const MetricTensor Hi = tensor_from_dense(spread);
  const MetricTensor Hj = tensor_from_dense(rank1);
  const ConsistencyStat st = consistency_pair(Hi, Hj);
  CHECK(st.clamped > 0);
  CHECK(st.log_floor == doctest::Approx(Hj.eigenvalues[0] * 1e-12));
  for (Eigen::Index i = 0; i < st.lambda_ij.size(); ++i)
    CHECK(std::isfinite(st.lambda_ij[i]));
}

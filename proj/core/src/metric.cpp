#include "manifold/metric.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <Eigen/Dense>
#include <json.hpp>

#include "manifold/parallel.hpp"
#include "manifold/rng.hpp"
#include "manifold/textio.hpp"

namespace manifold {

const char* hessian_method_name(HessianMethod m) {
  switch (m) {
    case HessianMethod::full_bp: return "full_bp";
    case HessianMethod::backward_iter: return "backward_iter";
    case HessianMethod::forward_iter: return "forward_iter";
  }
  return "?";
}

HessianMethod hessian_method_from_name(const std::string& s) {
  if (s == "full_bp") return HessianMethod::full_bp;
  if (s == "backward_iter") return HessianMethod::backward_iter;
  if (s == "forward_iter") return HessianMethod::forward_iter;
  throw Error(ErrorKind::config, "unknown hessian method: " + s);
}

double MetricTensor::quadratic_form(const Vec& v) const {
  if (matrix) return v.dot(*matrix * v);
  const Vec proj = eigenvectors.transpose() * v;
  return proj.dot(eigenvalues.cwiseProduct(proj));
}

namespace {

// deterministic sign: largest-|entry| component positive (first max wins ties)
void fix_sign(Mat& U) {
  for (Eigen::Index c = 0; c < U.cols(); ++c) {
    Eigen::Index imax = 0;
    double vmax = 0.0;
    for (Eigen::Index r = 0; r < U.rows(); ++r) {
      const double a = std::abs(U(r, c));
      if (a > vmax) {
        vmax = a;
        imax = r;
      }
    }
    if (U(imax, c) < 0.0) U.col(c) = -U.col(c);
  }
}

// eigendecomposition sorted descending with the sign convention applied
void eig_descending(const Mat& H, Vec& values, Mat& vectors) {
  Eigen::SelfAdjointEigenSolver<Mat> solver(H);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::numerical, "dense eigendecomposition failed");
  const Eigen::Index n = H.rows();
  values.resize(n);
  vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    values[i] = solver.eigenvalues()[n - 1 - i];
    vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  fix_sign(vectors);
}

}  // namespace

HvpOperator::HvpOperator(const DistanceMetric& distance, Vec z0, Mode mode, double eps)
    : distance_(&distance), z0_(std::move(z0)), mode_(mode), eps_(eps) {
  require_length(z0_, distance.latent_dim(), "hvp base point");
  if (eps_ <= 0.0) eps_ = 1e-4 * (1.0 + z0_.cwiseAbs().maxCoeff());
}

Vec HvpOperator::apply(const Vec& v) const {
  require_length(v, dim(), "hvp vector");
  const double norm = v.norm();
  if (norm == 0.0) throw Error(ErrorKind::argument, "hvp of the zero vector");
  const auto& pb = distance_->pullback();
  if (mode_ == Mode::backward) {
    return pb.vjp(z0_, pb.jvp(z0_, v));
  }
  // central difference of the distance gradient along the unit direction,
  // rescaled by ||v||
  const Vec u = v / norm;
  const Vec gp = distance_->grad_d2(z0_, z0_ + eps_ * u);
  const Vec gm = distance_->grad_d2(z0_, z0_ - eps_ * u);
  return (norm / (2.0 * eps_)) * (gp - gm);
}

Vec hvp(const HvpOperator& op, const Vec& v) { return op.apply(v); }

MetricTensor hessian_full(const DistanceMetric& distance, const Vec& z0,
                          Eigen::Index entry_cap) {
  const auto& pb = distance.pullback();
  const Eigen::Index n = pb.input_dim();
  const Eigen::Index m = pb.output_dim();
  require_length(z0, n, "hessian base point");
  if (n * m > entry_cap)
    throw Error(ErrorKind::capacity,
                "dense pullback Jacobian would hold " + std::to_string(n * m) +
                    " entries, cap is " + std::to_string(entry_cap));

  Mat J(m, n);
  parallel_for(static_cast<int>(n), [&](int i) {
    Vec e = Vec::Zero(n);
    e[i] = 1.0;
    J.col(i) = pb.jvp(z0, e);
  });

  Mat H = J.transpose() * J;
  H = 0.5 * (H + H.transpose());  // exact symmetry

  MetricTensor out;
  out.point = z0;
  out.method = HessianMethod::full_bp;
  out.k = static_cast<int>(n);
  eig_descending(H, out.eigenvalues, out.eigenvectors);
  out.matrix = std::move(H);
  return out;
}

MetricTensor lanczos_topk(const HvpOperator& op, int k, int max_iter, double tol,
                          std::uint64_t seed) {
  const int n = op.dim();
  if (k < 1 || k > n - 1)
    throw Error(ErrorKind::argument, "lanczos k must satisfy 1 <= k <= n-1");
  if (tol <= 0.0) throw Error(ErrorKind::argument, "lanczos tol must be positive");
  const int m_max = std::min(max_iter, n);

  Rng rng(mix_seed(seed, 0x1a2c));
  Mat V(n, m_max);        // Krylov basis
  Vec diag(m_max);        // tridiagonal alpha
  Vec off = Vec::Zero(m_max);  // beta_j couples v_j and v_{j+1}

  Vec v = rng.normal_vector(n);
  v /= v.norm();
  V.col(0) = v;

  auto reorthogonalize = [&](Vec& w, int upto) {
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j <= upto; ++j) w -= V.col(j).dot(w) * V.col(j);
  };

  int m = 0;              // number of basis vectors built
  double beta_prev = 0.0;
  Vec ritz_values;
  Mat ritz_small;
  bool converged = false;

  for (int j = 0; j < m_max; ++j) {
    m = j + 1;
    Vec w = op.apply(V.col(j));
    const double a = V.col(j).dot(w);
    diag[j] = a;
    w -= a * V.col(j);
    if (j > 0) w -= beta_prev * V.col(j - 1);
    reorthogonalize(w, j);
    double beta = w.norm();

    // convergence probe on the current tridiagonal block
    if (m >= k) {
      Mat T = Mat::Zero(m, m);
      for (int i = 0; i < m; ++i) T(i, i) = diag[i];
      for (int i = 0; i + 1 < m; ++i) T(i, i + 1) = T(i + 1, i) = off[i];
      Eigen::SelfAdjointEigenSolver<Mat> es(T);
      if (es.info() != Eigen::Success)
        throw Error(ErrorKind::numerical, "tridiagonal eigendecomposition failed");
      ritz_values.resize(m);
      ritz_small = es.eigenvectors();
      for (int i = 0; i < m; ++i) ritz_values[i] = es.eigenvalues()[m - 1 - i];
      double lam1 = std::abs(ritz_values[0]);
      if (lam1 == 0.0) lam1 = 1.0;
      double worst = 0.0;
      for (int i = 0; i < k; ++i)
        worst = std::max(worst, beta * std::abs(ritz_small(m - 1, m - 1 - i)));
      if (worst <= tol * lam1) {
        converged = true;
        break;
      }
    }

    if (beta < 1e-300 || j + 1 == m_max) {
      if (j + 1 == m_max) break;
      // invariant subspace found before k pairs converged: restart with a
      // fresh direction orthogonal to the basis so the factorization can grow
      Vec r = rng.normal_vector(n);
      reorthogonalize(r, j);
      const double rn = r.norm();
      if (rn < 1e-12) break;  // basis spans the whole space
      w = r / rn;
      beta = 0.0;
    } else {
      w /= beta;
    }
    off[j] = beta;
    beta_prev = beta;
    V.col(j + 1) = w;
  }

  if (ritz_values.size() != m) {
    Mat T = Mat::Zero(m, m);
    for (int i = 0; i < m; ++i) T(i, i) = diag[i];
    for (int i = 0; i + 1 < m; ++i) T(i, i + 1) = T(i + 1, i) = off[i];
    Eigen::SelfAdjointEigenSolver<Mat> es(T);
    if (es.info() != Eigen::Success)
      throw Error(ErrorKind::numerical, "tridiagonal eigendecomposition failed");
    ritz_values.resize(m);
    ritz_small = es.eigenvectors();
    for (int i = 0; i < m; ++i) ritz_values[i] = es.eigenvalues()[m - 1 - i];
  }

  // assemble Ritz pairs from the final block
  const int kk = std::min(k, m);
  MetricTensor out;
  out.point = op.point();
  out.method = op.mode() == HvpOperator::Mode::backward ? HessianMethod::backward_iter
                                                        : HessianMethod::forward_iter;
  out.k = kk;
  out.iterations = m;
  out.tol = tol;
  out.seed = seed;
  out.eigenvalues.resize(kk);
  out.eigenvectors.resize(n, kk);
  for (int i = 0; i < kk; ++i) {
    out.eigenvalues[i] = ritz_values[i];
    out.eigenvectors.col(i) = V.leftCols(m) * ritz_small.col(m - 1 - i);
    out.eigenvectors.col(i).normalize();
  }
  fix_sign(out.eigenvectors);

  // true residuals for the report
  out.residuals.resize(kk);
  for (int i = 0; i < kk; ++i)
    out.residuals[i] =
        (op.apply(out.eigenvectors.col(i)) - out.eigenvalues[i] * out.eigenvectors.col(i)).norm();

  if (!converged) {
    const std::string msg = "lanczos did not converge in " + std::to_string(m) +
                            " iterations (worst residual " +
                            format_double(out.residuals.maxCoeff()) + ")";
    throw ConvergenceError(std::move(out), msg);
  }
  return out;
}

double alpha(const MetricTensor& metric, const Vec& v) {
  require_length(v, metric.dim(), "alpha vector");
  const double nn = v.squaredNorm();
  if (nn == 0.0) throw Error(ErrorKind::argument, "alpha of the zero vector");
  return metric.quadratic_form(v) / nn;
}

double alpha(const HvpOperator& op, const Vec& v) {
  require_length(v, op.dim(), "alpha vector");
  const double nn = v.squaredNorm();
  if (nn == 0.0) throw Error(ErrorKind::argument, "alpha of the zero vector");
  return v.dot(op.apply(v)) / nn;
}

Vec pushforward(const DiffMap& map, const Vec& z0, const Vec& v) {
  return map.jvp(z0, v);
}

MetricTensor layer_metric(const DiffMap& map, const Vec& z0, int layer_index) {
  if (layer_index < 0 || layer_index >= static_cast<int>(map.layers().size()))
    throw Error(ErrorKind::argument, "layer index out of range");
  DiffMap truncated = map.prefix(layer_index + 1);
  return hessian_full(DistanceMetric::pixel(std::move(truncated)), z0);
}

// ---- serialization ---------------------------------------------------------

namespace {

std::string b64_encode(const double* data, Eigen::Index count) {
  static const char* alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  const unsigned char* bytes = reinterpret_cast<const unsigned char*>(data);
  const std::size_t len = static_cast<std::size_t>(count) * sizeof(double);
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (std::size_t i = 0; i < len; i += 3) {
    unsigned int v = bytes[i] << 16;
    if (i + 1 < len) v |= bytes[i + 1] << 8;
    if (i + 2 < len) v |= bytes[i + 2];
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(i + 1 < len ? alphabet[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < len ? alphabet[v & 63] : '=');
  }
  return out;
}

Vec b64_decode(const std::string& text, Eigen::Index count) {
  auto value_of = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::vector<unsigned char> bytes;
  bytes.reserve(text.size() / 4 * 3);
  unsigned int acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = value_of(c);
    if (v < 0) throw Error(ErrorKind::io, "invalid base64 payload");
    acc = (acc << 6) | static_cast<unsigned>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      bytes.push_back(static_cast<unsigned char>((acc >> bits) & 0xff));
    }
  }
  if (bytes.size() != static_cast<std::size_t>(count) * sizeof(double))
    throw Error(ErrorKind::io, "base64 payload length mismatch");
  Vec out(count);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

}  // namespace

std::string metric_tensor_to_json(const MetricTensor& m, bool include_matrix) {
  nlohmann::json j;
  j["n"] = m.dim();
  j["k"] = m.k;
  j["method"] = hessian_method_name(m.method);
  j["iterations"] = m.iterations;
  j["tol"] = m.tol;
  j["seed"] = m.seed;
  j["point_b64"] = b64_encode(m.point.data(), m.point.size());
  j["eigenvalues_b64"] = b64_encode(m.eigenvalues.data(), m.eigenvalues.size());
  j["eigenvectors_b64"] = b64_encode(m.eigenvectors.data(), m.eigenvectors.size());
  if (include_matrix && m.matrix)
    j["matrix_b64"] = b64_encode(m.matrix->data(), m.matrix->size());
  if (m.residuals.size() > 0)
    j["residuals_b64"] = b64_encode(m.residuals.data(), m.residuals.size());
  return j.dump(2);
}

MetricTensor metric_tensor_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::io, std::string("bad metric tensor json: ") + e.what());
  }
  MetricTensor m;
  const Eigen::Index n = j.at("n").get<Eigen::Index>();
  m.k = j.at("k").get<int>();
  m.method = hessian_method_from_name(j.at("method").get<std::string>());
  m.iterations = j.at("iterations").get<int>();
  m.tol = j.at("tol").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.point = b64_decode(j.at("point_b64").get<std::string>(), n);
  m.eigenvalues = b64_decode(j.at("eigenvalues_b64").get<std::string>(), m.k);
  const Vec flat = b64_decode(j.at("eigenvectors_b64").get<std::string>(),
                              n * static_cast<Eigen::Index>(m.k));
  m.eigenvectors = Eigen::Map<const Mat>(flat.data(), n, m.k);
  if (j.contains("matrix_b64")) {
    const Vec mf = b64_decode(j.at("matrix_b64").get<std::string>(), n * n);
    m.matrix = Eigen::Map<const Mat>(mf.data(), n, n);
  }
  if (j.contains("residuals_b64"))
    m.residuals = b64_decode(j.at("residuals_b64").get<std::string>(), m.k);
  return m;
}

std::string spectrum_to_csv(const Vec& eigenvalues) {
  std::string out = "rank,eigenvalue\n";
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
    out += std::to_string(i + 1) + "," + format_double(eigenvalues[i]) + "\n";
  return out;
}

}  // namespace manifold

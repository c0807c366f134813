#include "manifold/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <json.hpp>

#include "manifold/rng.hpp"
#include "manifold/textio.hpp"

namespace manifold {

Vec Preconditioner::Frame::to_latent(const Vec& y) const {
  if (p->use_scales) return base + p->basis * p->scales.cwiseProduct(y);
  return base + p->basis * y;
}

Vec Preconditioner::Frame::gradient_to_frame(const Vec& grad_z) const {
  Vec g = p->basis.transpose() * grad_z;
  if (p->use_scales) g = p->scales.cwiseProduct(g);
  return g;
}

Preconditioner::Frame Preconditioner::open(const Vec& z_init, Vec* y_init) const {
  require_length(z_init, latent_dim(), "preconditioner frame origin");
  Frame f;
  f.p = this;
  Vec proj = basis.transpose() * z_init;
  if (mode == Mode::rotate_full) {
    f.base = Vec::Zero(latent_dim());
  } else {
    f.base = z_init - basis * proj;
  }
  if (y_init) {
    if (use_scales) proj = proj.cwiseQuotient(scales);
    *y_init = proj;
  }
  return f;
}

Preconditioner make_preconditioner(const MetricTensor& global_H, int k, double eps_reg) {
  const int n = global_H.dim();
  if (k < 1 || k > n) throw Error(ErrorKind::argument, "preconditioner k out of range");
  if (k > global_H.k)
    throw Error(ErrorKind::argument, "preconditioner k exceeds available eigenpairs");
  Preconditioner p;
  p.basis = global_H.eigenvectors.leftCols(k);
  p.eps_reg = eps_reg < 0.0 ? 1e-6 * std::max(global_H.eigenvalues[0], 0.0) : eps_reg;
  p.scales.resize(k);
  for (int i = 0; i < k; ++i) {
    const double lam = global_H.eigenvalues[i] + p.eps_reg;
    if (lam <= 0.0)
      throw Error(ErrorKind::argument, "preconditioner scale undefined for eigenvalue " +
                                           std::to_string(global_H.eigenvalues[i]));
    p.scales[i] = 1.0 / std::sqrt(lam);
  }
  p.mode = k == n ? Preconditioner::Mode::rotate_full : Preconditioner::Mode::project_topk;
  return p;
}

OptTrace adam_minimize(const ObjectiveFn& objective, const GradientFn& gradient,
                       const Vec& z_init, const AdamConfig& cfg,
                       const Preconditioner* precond) {
  if (cfg.steps < 1) throw Error(ErrorKind::argument, "adam budget must be >= 1");
  OptTrace trace;
  trace.losses.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  trace.points.reserve(static_cast<std::size_t>(cfg.steps) + 1);

  Preconditioner::Frame frame;
  Vec y;
  if (precond) {
    frame = precond->open(z_init, &y);
  } else {
    y = z_init;
  }
  auto current_z = [&]() { return precond ? frame.to_latent(y) : y; };

  Vec m = Vec::Zero(y.size());
  Vec v = Vec::Zero(y.size());
  for (int t = 1; t <= cfg.steps; ++t) {
    const Vec z = current_z();
    const double loss = objective(z);
    ++trace.evals;
    trace.losses.push_back(loss);
    trace.points.push_back(z);
    if (!std::isfinite(loss)) {
      trace.final_loss = loss;
      trace.final_point = z;
      throw DivergenceError(std::move(trace), "non-finite loss at step " + std::to_string(t));
    }
    Vec g = gradient(z);
    if (precond) g = frame.gradient_to_frame(g);

    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    y -= (cfg.lr * (m / c1).array() / ((v / c2).array().sqrt() + cfg.eps)).matrix();
  }
  trace.final_point = current_z();
  trace.final_loss = objective(trace.final_point);
  ++trace.evals;
  trace.losses.push_back(trace.final_loss);
  trace.points.push_back(trace.final_point);
  if (!std::isfinite(trace.final_loss))
    throw DivergenceError(OptTrace(trace), "non-finite final loss");
  return trace;
}

InversionResult invert(const DistanceMetric& distance, const Vec& target_output,
                       const InvertConfig& cfg) {
  if (cfg.n_restarts < 1) throw Error(ErrorKind::argument, "invert needs >= 1 restart");
  const Vec encoded = distance.encode_target(target_output);
  const ObjectiveFn objective = [&](const Vec& z) {
    return distance.d2_to_encoded(z, encoded);
  };
  const GradientFn gradient = [&](const Vec& z) {
    return distance.grad_d2_to_encoded(z, encoded);
  };

  InversionResult result;
  result.best_loss = std::numeric_limits<double>::infinity();
  int diverged = 0;
  for (int r = 0; r < cfg.n_restarts; ++r) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(r)));
    const Vec z0 = cfg.init_sigma * rng.normal_vector(distance.latent_dim());
    try {
      OptTrace t = adam_minimize(objective, gradient, z0, cfg.adam, cfg.precond);
      if (t.final_loss < result.best_loss) {
        result.best_loss = t.final_loss;
        result.best_latent = t.final_point;
        result.best_restart = r;
      }
      result.restarts.push_back(std::move(t));
    } catch (const DivergenceError& e) {
      ++diverged;
      result.restarts.push_back(e.trace());
    }
  }
  if (diverged == cfg.n_restarts)
    throw Error(ErrorKind::divergence, "all inversion restarts diverged");
  return result;
}

// ---- CMA-ES ----------------------------------------------------------------

namespace {

struct CmaState {
  int dim = 0;
  int pop = 0;
  int mu = 0;
  Vec weights;
  double mu_eff = 0.0;
  double c_sigma = 0.0, d_sigma = 0.0, c_c = 0.0, c_1 = 0.0, c_mu = 0.0, chi_n = 0.0;

  Vec mean;
  double sigma = 0.0;
  Mat C;
  Vec p_sigma, p_c;
  Mat B;      // eigenvectors of C
  Vec D;      // sqrt eigenvalues of C
  long gen = 0;

  void refresh_eigen() {
    Eigen::SelfAdjointEigenSolver<Mat> es(C);
    if (es.info() != Eigen::Success)
      throw Error(ErrorKind::numerical, "covariance eigendecomposition failed");
    B = es.eigenvectors();
    D = es.eigenvalues();
    // repair: floor tiny / negative eigenvalues to keep C positive definite
    const double floor = std::max(D.maxCoeff(), 0.0) * 1e-14 + 1e-300;
    bool repaired = false;
    for (Eigen::Index i = 0; i < D.size(); ++i) {
      if (!std::isfinite(D[i])) throw Error(ErrorKind::numerical, "covariance went non-finite");
      if (D[i] < floor) {
        D[i] = floor;
        repaired = true;
      }
    }
    if (repaired) C = B * D.asDiagonal() * B.transpose();
    D = D.cwiseSqrt();
  }
};

CmaState make_cma_state(const Vec& x_init, double sigma_init, int population,
                        const Mat& initial_covariance) {
  CmaState st;
  st.dim = static_cast<int>(x_init.size());
  const double k = static_cast<double>(st.dim);
  st.pop = population > 0 ? population
                          : 4 + static_cast<int>(std::floor(3.0 * std::log(k)));
  if (st.pop < 2) st.pop = 2;
  st.mu = st.pop / 2;
  st.weights.resize(st.mu);
  for (int i = 0; i < st.mu; ++i)
    st.weights[i] = std::log(st.mu + 0.5) - std::log(static_cast<double>(i + 1));
  st.weights /= st.weights.sum();
  st.mu_eff = 1.0 / st.weights.squaredNorm();

  st.c_sigma = (st.mu_eff + 2.0) / (k + st.mu_eff + 5.0);
  st.d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((st.mu_eff - 1.0) / (k + 1.0)) - 1.0) + st.c_sigma;
  st.c_c = (4.0 + st.mu_eff / k) / (k + 4.0 + 2.0 * st.mu_eff / k);
  st.c_1 = 2.0 / ((k + 1.3) * (k + 1.3) + st.mu_eff);
  st.c_mu = std::min(1.0 - st.c_1,
                     2.0 * (st.mu_eff - 2.0 + 1.0 / st.mu_eff) / ((k + 2.0) * (k + 2.0) + st.mu_eff));
  st.chi_n = std::sqrt(k) * (1.0 - 1.0 / (4.0 * k) + 1.0 / (21.0 * k * k));

  st.mean = x_init;
  st.sigma = sigma_init;
  st.C = initial_covariance.size() > 0 ? initial_covariance : Mat::Identity(st.dim, st.dim);
  st.p_sigma = Vec::Zero(st.dim);
  st.p_c = Vec::Zero(st.dim);
  st.refresh_eigen();
  return st;
}

}  // namespace

CmaTrace cmaes_minimize(const ObjectiveFn& objective, const Vec& x_init, double sigma_init,
                        int budget, std::uint64_t seed, const CmaConfig& cfg) {
  if (sigma_init <= 0.0) throw Error(ErrorKind::argument, "sigma_init must be positive");
  CmaState st = make_cma_state(x_init, sigma_init, cfg.population, cfg.initial_covariance);
  if (budget < st.pop)
    throw Error(ErrorKind::argument, "budget smaller than one generation (" +
                                         std::to_string(st.pop) + " evaluations)");
  Rng rng(mix_seed(seed, 0xc0a));
  CmaTrace trace;
  trace.best_f = std::numeric_limits<double>::infinity();

  std::vector<Vec> xs(static_cast<std::size_t>(st.pop));
  std::vector<Vec> ys(static_cast<std::size_t>(st.pop));
  std::vector<double> fs(static_cast<std::size_t>(st.pop));
  std::vector<int> order(static_cast<std::size_t>(st.pop));

  while (trace.evals + st.pop <= budget) {
    for (int i = 0; i < st.pop; ++i) {
      const Vec zi = rng.normal_vector(st.dim);
      ys[static_cast<std::size_t>(i)] = st.B * st.D.cwiseProduct(zi);
      xs[static_cast<std::size_t>(i)] = st.mean + st.sigma * ys[static_cast<std::size_t>(i)];
      const double f = objective(xs[static_cast<std::size_t>(i)]);
      if (!std::isfinite(f)) throw Error(ErrorKind::numerical, "non-finite CMA-ES fitness");
      fs[static_cast<std::size_t>(i)] = f;
      trace.eval_fitness.push_back(f);
      ++trace.evals;
      if (f < trace.best_f) {
        trace.best_f = f;
        trace.best_point = xs[static_cast<std::size_t>(i)];
      }
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return fs[static_cast<std::size_t>(a)] < fs[static_cast<std::size_t>(b)];
    });

    // recombination
    Vec y_w = Vec::Zero(st.dim);
    for (int i = 0; i < st.mu; ++i)
      y_w += st.weights[i] * ys[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    st.mean += st.sigma * y_w;

    // step-size path (C^{-1/2} y_w)
    const Vec c_inv_y = st.B * (st.B.transpose() * y_w).cwiseQuotient(st.D);
    st.p_sigma = (1.0 - st.c_sigma) * st.p_sigma +
                 std::sqrt(st.c_sigma * (2.0 - st.c_sigma) * st.mu_eff) * c_inv_y;
    const double ps_norm = st.p_sigma.norm();
    const double denom =
        std::sqrt(1.0 - std::pow(1.0 - st.c_sigma, 2.0 * static_cast<double>(st.gen + 1)));
    const bool hsig =
        ps_norm / denom / st.chi_n < 1.4 + 2.0 / (static_cast<double>(st.dim) + 1.0);

    st.p_c = (1.0 - st.c_c) * st.p_c;
    if (hsig) st.p_c += std::sqrt(st.c_c * (2.0 - st.c_c) * st.mu_eff) * y_w;

    // covariance update: rank-1 plus rank-mu
    Mat rank_mu = Mat::Zero(st.dim, st.dim);
    for (int i = 0; i < st.mu; ++i) {
      const Vec& yi = ys[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
      rank_mu.noalias() += st.weights[i] * (yi * yi.transpose());
    }
    const double c1a = st.c_1 * (1.0 - (hsig ? 0.0 : 1.0) * st.c_c * (2.0 - st.c_c));
    st.C = (1.0 - c1a - st.c_mu) * st.C + st.c_1 * (st.p_c * st.p_c.transpose()) +
           st.c_mu * rank_mu;

    st.sigma *= std::exp((st.c_sigma / st.d_sigma) * (ps_norm / st.chi_n - 1.0));
    if (!std::isfinite(st.sigma) || st.sigma <= 0.0)
      throw Error(ErrorKind::numerical, "CMA-ES step size collapsed");

    st.refresh_eigen();
    ++st.gen;
    trace.best_by_generation.push_back(trace.best_f);
  }

  trace.generations = static_cast<int>(st.gen);
  trace.final_covariance = st.C;
  trace.final_sigma = st.sigma;
  return trace;
}

CmaTrace cmaes_hessian_minimize(const ObjectiveFn& objective_on_z, const MetricTensor& global_H,
                                int k, int budget, std::uint64_t seed, const Vec& z_init,
                                double sigma_init, double eps_reg, int population) {
  const int n = global_H.dim();
  if (k < 1 || k > global_H.k)
    throw Error(ErrorKind::argument, "cmaes_hessian k exceeds the available eigenpairs");
  Vec z0 = z_init.size() > 0 ? z_init : Vec::Zero(n);
  require_length(z0, n, "cmaes_hessian z_init");

  const Mat U = global_H.eigenvectors.leftCols(k);
  const double reg = eps_reg < 0.0 ? 1e-6 * std::max(global_H.eigenvalues[0], 0.0) : eps_reg;
  Vec c0(k);
  for (int i = 0; i < k; ++i) {
    const double lam = global_H.eigenvalues[i] + reg;
    if (lam <= 0.0)
      throw Error(ErrorKind::argument, "cmaes_hessian covariance undefined for eigenvalue " +
                                           std::to_string(global_H.eigenvalues[i]));
    c0[i] = 1.0 / lam;
  }
  c0 *= static_cast<double>(k) / c0.sum();  // trace(C0) = k

  const Vec y0 = U.transpose() * z0;
  const Vec base = z0 - U * y0;  // frozen complement

  CmaConfig cfg;
  cfg.population = population;
  cfg.initial_covariance = c0.asDiagonal();
  const ObjectiveFn on_y = [&](const Vec& y) { return objective_on_z(base + U * y); };
  CmaTrace trace = cmaes_minimize(on_y, y0, sigma_init, budget, seed, cfg);
  trace.best_point = base + U * trace.best_point;
  return trace;
}

InversionResult basin_interleave(const ObjectiveFn& objective, const GradientFn& gradient,
                                 const MetricTensor& global_H, const BasinConfig& cfg) {
  if (cfg.outer_generations < 1 || cfg.inner_adam_steps < 1)
    throw Error(ErrorKind::argument, "basin config needs outer generations and inner steps");
  const int n = global_H.dim();
  Vec z0 = cfg.z_init.size() > 0 ? cfg.z_init : Vec::Zero(n);

  Preconditioner default_precond;
  const Preconditioner* precond = cfg.precond;
  if (!precond) {
    default_precond = make_preconditioner(global_H, global_H.k);
    precond = &default_precond;
  }

  long evals = 0;
  const ObjectiveFn counted = [&](const Vec& z) {
    ++evals;
    return objective(z);
  };

  AdamConfig inner = cfg.adam;
  inner.steps = cfg.inner_adam_steps;
  const int inner_cost = cfg.inner_adam_steps + 1;

  CmaState st = make_cma_state(z0, cfg.sigma_init, cfg.population, Mat());
  Rng rng(mix_seed(cfg.seed, 0xba51));

  InversionResult result;
  result.best_loss = std::numeric_limits<double>::infinity();

  std::vector<Vec> ys(static_cast<std::size_t>(st.pop));
  std::vector<double> fs(static_cast<std::size_t>(st.pop));
  std::vector<int> order(static_cast<std::size_t>(st.pop));

  for (int g = 0; g < cfg.outer_generations; ++g) {
    if (evals + static_cast<long>(st.pop) * inner_cost > cfg.eval_budget) break;
    for (int i = 0; i < st.pop; ++i) {
      const Vec zi = rng.normal_vector(st.dim);
      ys[static_cast<std::size_t>(i)] = st.B * st.D.cwiseProduct(zi);
      const Vec seed_point = st.mean + st.sigma * ys[static_cast<std::size_t>(i)];
      OptTrace refined = adam_minimize(counted, gradient, seed_point, inner, precond);
      fs[static_cast<std::size_t>(i)] = refined.final_loss;
      if (refined.final_loss < result.best_loss) {
        result.best_loss = refined.final_loss;
        result.best_latent = refined.final_point;
        result.best_restart = g;
      }
      result.restarts.push_back(std::move(refined));
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return fs[static_cast<std::size_t>(a)] < fs[static_cast<std::size_t>(b)];
    });

    Vec y_w = Vec::Zero(st.dim);
    for (int i = 0; i < st.mu; ++i)
      y_w += st.weights[i] * ys[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    st.mean += st.sigma * y_w;

    const Vec c_inv_y = st.B * (st.B.transpose() * y_w).cwiseQuotient(st.D);
    st.p_sigma = (1.0 - st.c_sigma) * st.p_sigma +
                 std::sqrt(st.c_sigma * (2.0 - st.c_sigma) * st.mu_eff) * c_inv_y;
    const double ps_norm = st.p_sigma.norm();
    const double denom =
        std::sqrt(1.0 - std::pow(1.0 - st.c_sigma, 2.0 * static_cast<double>(st.gen + 1)));
    const bool hsig =
        ps_norm / denom / st.chi_n < 1.4 + 2.0 / (static_cast<double>(st.dim) + 1.0);
    st.p_c = (1.0 - st.c_c) * st.p_c;
    if (hsig) st.p_c += std::sqrt(st.c_c * (2.0 - st.c_c) * st.mu_eff) * y_w;

    Mat rank_mu = Mat::Zero(st.dim, st.dim);
    for (int i = 0; i < st.mu; ++i) {
      const Vec& yi = ys[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
      rank_mu.noalias() += st.weights[i] * (yi * yi.transpose());
    }
    const double c1a = st.c_1 * (1.0 - (hsig ? 0.0 : 1.0) * st.c_c * (2.0 - st.c_c));
    st.C = (1.0 - c1a - st.c_mu) * st.C + st.c_1 * (st.p_c * st.p_c.transpose()) +
           st.c_mu * rank_mu;
    st.sigma *= std::exp((st.c_sigma / st.d_sigma) * (ps_norm / st.chi_n - 1.0));
    st.refresh_eigen();
    ++st.gen;
  }

  if (result.restarts.empty())
    throw Error(ErrorKind::argument, "basin eval budget below one outer generation");
  return result;
}

std::string opt_trace_to_csv(const OptTrace& trace) {
  std::string out = "step,loss\n";
  for (std::size_t i = 0; i < trace.losses.size(); ++i)
    out += std::to_string(i) + "," + format_double(trace.losses[i]) + "\n";
  return out;
}

std::string inversion_result_to_json(const InversionResult& result,
                                     const std::string& config_echo_json, std::uint64_t seed) {
  nlohmann::json j;
  j["config"] = config_echo_json.empty() ? nlohmann::json()
                                         : nlohmann::json::parse(config_echo_json);
  j["seed"] = seed;
  j["best_loss"] = result.best_loss;
  j["best_restart"] = result.best_restart;
  j["best_latent"] = std::vector<double>(result.best_latent.data(),
                                         result.best_latent.data() + result.best_latent.size());
  nlohmann::json restarts = nlohmann::json::array();
  for (const auto& t : result.restarts)
    restarts.push_back({{"final_loss", t.final_loss}, {"evals", t.evals}, {"losses", t.losses}});
  j["restarts"] = restarts;
  return j.dump(2);
}

TraversalResult traverse_axis(const DiffMap& map, const Vec& z0, const Vec& axis, int steps,
                              double step_size, TraverseMode mode,
                              const DistanceMetric* distance) {
  require_length(z0, map.input_dim(), "traversal reference");
  require_length(axis, map.input_dim(), "traversal axis");
  if (steps < 0) throw Error(ErrorKind::argument, "steps must be >= 0");
  const double axis_norm = axis.norm();
  if (axis_norm == 0.0) throw Error(ErrorKind::argument, "traversal axis is zero");
  const Vec unit = axis / axis_norm;

  DistanceMetric pixel_default = DistanceMetric::pixel(map);
  const DistanceMetric& dist = distance ? *distance : pixel_default;

  TraversalResult res;
  const int total = 2 * steps + 1;
  res.mu.resize(static_cast<std::size_t>(total));
  res.latents.resize(static_cast<std::size_t>(total));
  res.outputs.resize(static_cast<std::size_t>(total));
  res.distances.resize(total);
  res.sq_distances.resize(total);

  Vec tangent_dir;
  double radius = 0.0;
  if (mode == TraverseMode::slerp) {
    radius = z0.norm();
    if (radius == 0.0)
      throw Error(ErrorKind::argument, "slerp requires a nonzero reference point");
    const Vec zhat = z0 / radius;
    Vec t = unit - unit.dot(zhat) * zhat;
    const double tn = t.norm();
    if (tn < 1e-12)
      throw Error(ErrorKind::argument, "slerp axis is parallel to the reference point");
    tangent_dir = t / tn;
  }

  for (int i = -steps; i <= steps; ++i) {
    const int idx = i + steps;
    const double mu = static_cast<double>(i) * step_size;
    res.mu[static_cast<std::size_t>(idx)] = mu;
    Vec z;
    if (mode == TraverseMode::linear) {
      z = z0 + mu * unit;
    } else {
      const double theta = mu / radius;  // arc-length parameterization
      z = std::cos(theta) * z0 + std::sin(theta) * radius * tangent_dir;
    }
    const double d2 = dist.d2(z0, z);
    res.sq_distances[idx] = d2;
    res.distances[idx] = std::sqrt(std::max(d2, 0.0));
    res.outputs[static_cast<std::size_t>(idx)] = map.forward(z);
    res.latents[static_cast<std::size_t>(idx)] = std::move(z);
  }
  return res;
}

}  // namespace manifold

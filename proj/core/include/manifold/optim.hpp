#pragma once

#include <functional>
#include <vector>

#include "manifold/stats.hpp"

namespace manifold {

using ObjectiveFn = std::function<double(const Vec&)>;
using GradientFn = std::function<Vec(const Vec&)>;

// Change of variables into a metric eigenframe: z = base + U (s .* y).
// `base` freezes the complement of the basis for project_topk mode and is
// fixed when a frame is opened at a starting point.
struct Preconditioner {
  enum class Mode { rotate_full, project_topk };

  Mat basis;     // n x k, orthonormal columns
  Vec scales;    // k entries, 1/sqrt(lambda + eps_reg)
  bool use_scales = false;
  double eps_reg = 0.0;
  Mode mode = Mode::rotate_full;

  int latent_dim() const { return static_cast<int>(basis.rows()); }
  int k() const { return static_cast<int>(basis.cols()); }

  struct Frame {
    const Preconditioner* p = nullptr;
    Vec base;

    Vec to_latent(const Vec& y) const;
    Vec gradient_to_frame(const Vec& grad_z) const;
  };

  Frame open(const Vec& z_init, Vec* y_init) const;
};

// Top-k eigenframe of a (global) metric tensor with 1/sqrt(lambda+eps_reg)
// axis scales. eps_reg < 0 selects the default 1e-6 * lambda_1.
Preconditioner make_preconditioner(const MetricTensor& global_H, int k, double eps_reg = -1.0);

struct AdamConfig {
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int steps = 500;
};

struct OptTrace {
  std::vector<double> losses;  // losses[t] = objective at the t-th visited point
  std::vector<Vec> points;     // visited iterates (z space), aligned with losses
  double final_loss = 0.0;
  Vec final_point;
  int evals = 0;
};

class DivergenceError : public Error {
 public:
  DivergenceError(OptTrace trace, const std::string& msg)
      : Error(ErrorKind::divergence, msg), trace_(std::move(trace)) {}
  const OptTrace& trace() const { return trace_; }

 private:
  OptTrace trace_;
};

// Plain Adam, optionally run in preconditioned coordinates. Deterministic
// given the initial point. Throws DivergenceError on a non-finite loss.
OptTrace adam_minimize(const ObjectiveFn& objective, const GradientFn& gradient,
                       const Vec& z_init, const AdamConfig& cfg,
                       const Preconditioner* precond = nullptr);

struct InvertConfig {
  AdamConfig adam;
  int n_restarts = 4;
  double init_sigma = 1.0;
  std::uint64_t seed = 0;
  const Preconditioner* precond = nullptr;
};

struct InversionResult {
  Vec best_latent;
  double best_loss = 0.0;
  int best_restart = -1;
  std::vector<OptTrace> restarts;
};

// Distance minimization to a fixed generator output from seeded restarts.
InversionResult invert(const DistanceMetric& distance, const Vec& target_output,
                       const InvertConfig& cfg);

// ---- CMA-ES ----------------------------------------------------------------

struct CmaConfig {
  int population = 0;  // 0 -> 4 + floor(3 ln k)
  Mat initial_covariance;  // empty -> identity
};

struct CmaTrace {
  std::vector<double> eval_fitness;  // objective value of every evaluation, in order
  std::vector<double> best_by_generation;
  Vec best_point;
  double best_f = 0.0;
  int evals = 0;
  int generations = 0;
  Mat final_covariance;
  double final_sigma = 0.0;
};

// (mu/mu_w, lambda) CMA-ES with rank-1 and rank-mu covariance updates.
// Deterministic given (seed, objective); candidates within a generation are
// ranked by (fitness, index) with a stable sort.
CmaTrace cmaes_minimize(const ObjectiveFn& objective, const Vec& x_init, double sigma_init,
                        int budget, std::uint64_t seed, const CmaConfig& cfg = {});

// CMA-ES restricted to the top-k eigenspace of a global metric tensor, with
// initial covariance diag(1/(lambda_i + eps_reg)) normalized to trace k.
// Complement coordinates stay frozen at z_init's projection.
CmaTrace cmaes_hessian_minimize(const ObjectiveFn& objective_on_z, const MetricTensor& global_H,
                                int k, int budget, std::uint64_t seed, const Vec& z_init,
                                double sigma_init = 0.5, double eps_reg = -1.0,
                                int population = 0);

// ---- basin interleaving ------------------------------------------------------

struct BasinConfig {
  int outer_generations = 8;
  int inner_adam_steps = 25;
  int population = 0;       // 0 -> CMA default
  double sigma_init = 1.0;
  std::uint64_t seed = 0;
  int eval_budget = 100000;  // cap on objective evaluations
  AdamConfig adam;           // lr etc. for the refinement runs
  const Preconditioner* precond = nullptr;
  Vec z_init;                // empty -> origin
};

// Outer CMA-ES proposes latent seeds; each is refined by a short
// (preconditioned) Adam run; seeds are ranked by post-refinement loss.
InversionResult basin_interleave(const ObjectiveFn& objective, const GradientFn& gradient,
                                 const MetricTensor& global_H, const BasinConfig& cfg);

// ---- result serialization -----------------------------------------------------

// "step,loss" rows for one optimization run.
std::string opt_trace_to_csv(const OptTrace& trace);

// Full inversion record: seeds/config echo, per-restart losses, best latent.
std::string inversion_result_to_json(const InversionResult& result,
                                     const std::string& config_echo_json,
                                     std::uint64_t seed);

// ---- axis traversal -----------------------------------------------------------

enum class TraverseMode { linear, slerp };

struct TraversalResult {
  std::vector<double> mu;    // symmetric grid, 2*steps+1 values including 0
  std::vector<Vec> latents;
  std::vector<Vec> outputs;  // generator outputs per grid point
  Vec distances;             // d(z0, z_i) = sqrt(d2)
  Vec sq_distances;          // d2(z0, z_i)
};

// Walks a normalized axis from z0 (straight line, or great circle on the
// ||z0|| sphere) and records output distances under `distance` (pixel metric
// on `map` when null).
TraversalResult traverse_axis(const DiffMap& map, const Vec& z0, const Vec& axis, int steps,
                              double step_size, TraverseMode mode,
                              const DistanceMetric* distance = nullptr);

}  // namespace manifold

#include "manifold/commands.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "manifold/imageio.hpp"
#include "manifold/parallel.hpp"
#include "manifold/spec_json.hpp"
#include "manifold/textio.hpp"

namespace manifold {

using nlohmann::json;

namespace {

const json kGeneratorDefaults = {
    {"builtin", "blob16"}, {"weights_file", ""}, {"spec", nullptr}, {"shuffle_seed", nullptr}};

const json kDistanceDefaults = {
    {"kind", "pixel_sq_l2"}, {"scale", 1.0}, {"encoder_seed", 1234}};

json adam_defaults() {
  return {{"lr", 0.05}, {"beta1", 0.9}, {"beta2", 0.999}, {"eps", 1e-8}, {"steps", 500}};
}

// self-target inversion needs the longer budget to pull the low-curvature
// coordinates all the way in
json invert_adam_defaults() {
  json j = adam_defaults();
  j["steps"] = 800;
  return j;
}

AdamConfig adam_from_json(const json& j) {
  AdamConfig c;
  c.lr = j.at("lr").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.eps = j.at("eps").get<double>();
  c.steps = j.at("steps").get<int>();
  return c;
}

std::string out_dir_from(const json& cfg, const std::string& override_dir) {
  if (!override_dir.empty()) return override_dir;
  const std::string d = cfg.at("out_dir").get<std::string>();
  if (d.empty()) throw Error(ErrorKind::config, "no output directory configured");
  return d;
}

double percentile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  if (values.size() == 1) return values[0];
  const double h = p * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
  if (values[lo] == values[hi]) return values[lo];
  const double w = h - static_cast<double>(lo);
  return values[lo] * (1.0 - w) + values[hi] * w;
}

double median(std::vector<double> values) { return percentile(std::move(values), 0.5); }

std::string corr_cell(const Correlation& c) {
  return c.defined ? format_double(c.value) : "undefined";
}

// grid images expect (1,H,W) or (H,W) outputs; flat vectors render as one row
std::pair<int, int> image_hw(const std::vector<int>& shape) {
  if (shape.size() == 3 && shape[0] == 1) return {shape[1], shape[2]};
  if (shape.size() == 2) return {shape[0], shape[1]};
  if (shape.size() == 1) return {1, shape[0]};
  throw Error(ErrorKind::argument, "cannot render shape " + shape_to_string(shape) +
                                       " as a grayscale image");
}

MetricTensor compute_metric(const DistanceMetric& dist, const Vec& z, const std::string& method,
                            int k, int max_iter, double tol, double fwd_eps, std::uint64_t seed) {
  const HessianMethod m = hessian_method_from_name(method);
  if (m == HessianMethod::full_bp) return hessian_full(dist, z);
  const auto mode = m == HessianMethod::backward_iter ? HvpOperator::Mode::backward
                                                      : HvpOperator::Mode::forward;
  HvpOperator op(dist, z, mode, fwd_eps);
  return lanczos_topk(op, k, max_iter, tol, seed);
}

MetricTensor global_hessian_at(const DistanceMetric& dist, const std::vector<Vec>& points) {
  std::vector<MetricTensor> tensors(points.size());
  parallel_for(static_cast<int>(points.size()), [&](int i) {
    tensors[static_cast<std::size_t>(i)] = hessian_full(dist, points[static_cast<std::size_t>(i)]);
  });
  return global_hessian(tensors);
}

}  // namespace

GeneratorHandle load_generator_config(const json& gen_cfg) {
  GeneratorHandle h;
  const std::string weights_file = gen_cfg.at("weights_file").get<std::string>();
  if (!weights_file.empty()) {
    GmwFile f = load_gmw(weights_file);
    h.spec = f.spec;
    h.map = DiffMap(f.spec.architecture, f.store, {f.spec.latent_dim});
  } else if (!gen_cfg.at("spec").is_null()) {
    h.spec = generator_spec_from_json(gen_cfg.at("spec"));
    h.map = build_generator(h.spec);
  } else {
    const std::string name = gen_cfg.at("builtin").get<std::string>();
    h.spec = builtin_generator_spec(name);
    h.map = builtin_generator(name);
  }
  if (!gen_cfg.at("shuffle_seed").is_null()) {
    const auto seed = gen_cfg.at("shuffle_seed").get<std::uint64_t>();
    auto shuffled = std::make_shared<WeightStore>(shuffle_weights(*h.map.weights(), seed));
    h.map = h.map.with_weights(std::move(shuffled));
  }
  return h;
}

DistanceMetric make_distance_config(const json& dist_cfg, const DiffMap& generator) {
  const std::string kind = dist_cfg.at("kind").get<std::string>();
  const double scale = dist_cfg.at("scale").get<double>();
  if (kind == "pixel_sq_l2") return DistanceMetric::pixel(generator, scale);
  if (kind == "feature_sq_l2") {
    const auto seed = dist_cfg.at("encoder_seed").get<std::uint64_t>();
    return DistanceMetric::feature(generator, FeatureEncoder::standard(generator.output_dim(), seed),
                                   scale);
  }
  throw Error(ErrorKind::config, "unknown distance kind: " + kind);
}

// ---- spectra ----------------------------------------------------------------

RunReport cmd_spectra(const json& user_config, const std::string& out_dir, bool force) {
  json defaults = {{"seed", 0},
                   {"generator", kGeneratorDefaults},
                   {"distance", kDistanceDefaults},
                   {"n_points", 20},
                   {"method", "full_bp"},
                   {"k", 0},  // 0 -> min(10, n-1) for iterative methods
                   {"lanczos_max_iter", 300},
                   {"lanczos_tol", 1e-9},
                   {"forward_eps", -1.0},
                   {"plot", true},
                   {"out_dir", "out/spectra"}};
  const json cfg = resolve_config(defaults, user_config);

  GeneratorHandle gen = load_generator_config(cfg.at("generator"));
  const DistanceMetric dist = make_distance_config(cfg.at("distance"), gen.map);
  const int n_points = cfg.at("n_points").get<int>();
  if (n_points < 1) throw Error(ErrorKind::config, "n_points must be >= 1");
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  const std::string method = cfg.at("method").get<std::string>();
  int k = cfg.at("k").get<int>();
  if (k <= 0) k = std::min(10, gen.map.input_dim() - 1);

  const std::vector<Vec> points = sample_latent(gen.spec, mix_seed(seed, 101), n_points);

  ReportBuilder rb("spectra", cfg, out_dir_from(cfg, out_dir), force);

  std::vector<MetricTensor> tensors(points.size());
  std::vector<std::string> failures(points.size());
  parallel_for(n_points, [&](int i) {
    try {
      tensors[static_cast<std::size_t>(i)] = compute_metric(
          dist, points[static_cast<std::size_t>(i)], method, k,
          cfg.at("lanczos_max_iter").get<int>(), cfg.at("lanczos_tol").get<double>(),
          cfg.at("forward_eps").get<double>(), mix_seed(seed, 200 + static_cast<std::uint64_t>(i)));
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(i)] = e.what();
    }
  });

  std::vector<int> ok_index;
  for (int i = 0; i < n_points; ++i)
    if (failures[static_cast<std::size_t>(i)].empty()) ok_index.push_back(i);
  if (ok_index.empty())
    throw Error(ErrorKind::numerical, "all spectrum computations failed: " + failures[0]);

  // per-point spectra
  CsvWriter spectra({"point", "rank", "eigenvalue"});
  for (int i : ok_index) {
    const auto& t = tensors[static_cast<std::size_t>(i)];
    for (int r = 0; r < t.k; ++r)
      spectra.add_row({std::to_string(i), std::to_string(r + 1), format_double(t.eigenvalues[r])});
  }
  rb.write_text("spectra.csv", spectra.str());

  // mean and percentile band per rank
  const int kk = tensors[static_cast<std::size_t>(ok_index[0])].k;
  CsvWriter band({"rank", "mean", "p05", "p95"});
  std::vector<double> mean_curve, p05_curve, p95_curve, rank_grid;
  for (int r = 0; r < kk; ++r) {
    std::vector<double> vals;
    for (int i : ok_index) vals.push_back(tensors[static_cast<std::size_t>(i)].eigenvalues[r]);
    const double m = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
    const double lo = percentile(vals, 0.05);
    const double hi = percentile(vals, 0.95);
    band.add_row({std::to_string(r + 1), format_double(m), format_double(lo), format_double(hi)});
    rank_grid.push_back(r + 1);
    mean_curve.push_back(m);
    p05_curve.push_back(lo);
    p95_curve.push_back(hi);
  }
  rb.write_text("band.csv", band.str());

  // anisotropy table
  CsvWriter summary({"point", "trace", "dim99", "dim999", "dim9999", "dim99999", "log_range"});
  json dim99_list = json::array();
  double lam1_mean = 0.0;
  for (int i : ok_index) {
    const auto& t = tensors[static_cast<std::size_t>(i)];
    const SpectrumSummary s = summarize_spectrum(t.eigenvalues.cwiseMax(0.0));
    summary.add_row({std::to_string(i), format_double(s.trace), std::to_string(s.dims[0]),
                     std::to_string(s.dims[1]), std::to_string(s.dims[2]),
                     std::to_string(s.dims[3]), format_double(s.log_range)});
    dim99_list.push_back(s.dims[0]);
    lam1_mean += t.eigenvalues[0];
  }
  lam1_mean /= static_cast<double>(ok_index.size());
  rb.write_text("summary.csv", summary.str());

  if (cfg.at("plot").get<bool>()) {
    rb.write_text("spectrum.svg",
                  render_line_svg(rank_grid,
                                  {{"mean", mean_curve}, {"p05", p05_curve}, {"p95", p95_curve}},
                                  "rank", "eigenvalue", true));
  }

  json payload;
  payload["n_ok"] = ok_index.size();
  payload["n_failed"] = n_points - static_cast<int>(ok_index.size());
  json fail_list = json::array();
  for (int i = 0; i < n_points; ++i)
    if (!failures[static_cast<std::size_t>(i)].empty())
      fail_list.push_back({{"point", i}, {"error", failures[static_cast<std::size_t>(i)]}});
  payload["failures"] = fail_list;
  payload["dim99"] = dim99_list;
  payload["mean_lambda1"] = lam1_mean;
  rb.set_payload(payload);
  return rb.finalize();
}

// ---- consistency --------------------------------------------------------------

RunReport cmd_consistency(const json& user_config, const std::string& out_dir, bool force) {
  json defaults = {{"seed", 0},
                   {"generator", kGeneratorDefaults},
                   {"distance", kDistanceDefaults},
                   {"n_points", 10},
                   {"out_dir", "out/consistency"}};
  const json cfg = resolve_config(defaults, user_config);
  const int n_points = cfg.at("n_points").get<int>();
  if (n_points < 2) throw Error(ErrorKind::config, "consistency needs n_points >= 2");

  GeneratorHandle gen = load_generator_config(cfg.at("generator"));
  const DistanceMetric dist = make_distance_config(cfg.at("distance"), gen.map);
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  const std::vector<Vec> points = sample_latent(gen.spec, mix_seed(seed, 101), n_points);

  ReportBuilder rb("consistency", cfg, out_dir_from(cfg, out_dir), force);
  rb.add_note("ordered pairs excluding i == j");

  const ConsistencySummary cs = consistency_matrix(points, dist);

  CsvWriter table({"i", "j", "c_lin", "c_log", "clamped"});
  for (int i = 0; i < n_points; ++i)
    for (int j = 0; j < n_points; ++j) {
      if (i == j) continue;
      const auto& p = cs.pair(i, j);
      table.add_row({std::to_string(i), std::to_string(j), corr_cell(p.c_lin),
                     corr_cell(p.c_log), std::to_string(p.clamped)});
    }
  rb.write_text("consistency.csv", table.str());

  // fixed [-1, 1] histogram of defined log-scale correlations, 40 bins
  constexpr int kBins = 40;
  std::vector<int> bins(kBins, 0);
  for (const auto& p : cs.pairs) {
    if (!p.c_log.defined) continue;
    int b = static_cast<int>(std::floor((p.c_log.value + 1.0) / 2.0 * kBins));
    b = std::clamp(b, 0, kBins - 1);
    ++bins[static_cast<std::size_t>(b)];
  }
  json hist;
  hist["bin_edges_from"] = -1.0;
  hist["bin_edges_to"] = 1.0;
  hist["bins"] = bins;
  rb.write_text("histogram.json", hist.dump(2) + "\n");

  json payload;
  payload["mean_c_log"] = cs.mean_c_log;
  payload["std_c_log"] = cs.std_c_log;
  payload["mean_c_lin"] = cs.mean_c_lin;
  payload["std_c_lin"] = cs.std_c_lin;
  payload["undefined_log_pairs"] = cs.undefined_log;
  payload["undefined_lin_pairs"] = cs.undefined_lin;
  payload["pairs"] = cs.pairs.size();
  rb.set_payload(payload);
  return rb.finalize();
}

// ---- axes ----------------------------------------------------------------------

RunReport cmd_axes(const json& user_config, const std::string& out_dir, bool force) {
  json defaults = {{"seed", 0},
                   {"generator", kGeneratorDefaults},
                   {"distance", kDistanceDefaults},
                   {"n_points", 12},
                   {"n_refs", 3},
                   {"top_k", 3},
                   {"bottom_k", 1},
                   {"steps", 4},
                   {"step_size", 0.75},
                   {"step_mode", "fixed"},  // or "eigen_scaled"
                   {"eigen_step_base", 1.0},
                   {"traverse", "linear"},  // or "slerp"
                   {"image_format", "pgm"},
                   {"out_dir", "out/axes"}};
  const json cfg = resolve_config(defaults, user_config);

  GeneratorHandle gen = load_generator_config(cfg.at("generator"));
  const DistanceMetric dist = make_distance_config(cfg.at("distance"), gen.map);
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  const int n = gen.map.input_dim();
  const int top_k = std::min(cfg.at("top_k").get<int>(), n);
  const int bottom_k = std::min(cfg.at("bottom_k").get<int>(), n - top_k);
  const int n_refs = cfg.at("n_refs").get<int>();
  const int steps = cfg.at("steps").get<int>();
  const std::string fmt = cfg.at("image_format").get<std::string>();
  if (fmt != "pgm" && fmt != "png") throw Error(ErrorKind::config, "image_format must be pgm or png");
  const TraverseMode mode = cfg.at("traverse").get<std::string>() == "slerp"
                                ? TraverseMode::slerp
                                : TraverseMode::linear;

  ReportBuilder rb("axes", cfg, out_dir_from(cfg, out_dir), force);

  const std::vector<Vec> hess_points =
      sample_latent(gen.spec, mix_seed(seed, 101), cfg.at("n_points").get<int>());
  const MetricTensor global = global_hessian_at(dist, hess_points);
  const std::vector<Vec> refs = sample_latent(gen.spec, mix_seed(seed, 202), n_refs);

  std::vector<int> axis_ranks;
  for (int i = 0; i < top_k; ++i) axis_ranks.push_back(i);
  for (int i = 0; i < bottom_k; ++i) axis_ranks.push_back(n - 1 - i);

  const auto [img_h, img_w] = image_hw(gen.map.output_shape());
  const double eps_reg = 1e-6 * std::max(global.eigenvalues[0], 0.0);

  json axis_payload = json::array();
  for (int rank : axis_ranks) {
    const Vec axis = global.eigenvectors.col(rank);
    double step = cfg.at("step_size").get<double>();
    if (cfg.at("step_mode").get<std::string>() == "eigen_scaled")
      step = cfg.at("eigen_step_base").get<double>() /
             std::sqrt(std::max(global.eigenvalues[rank], 0.0) + eps_reg);

    std::vector<GrayImage> cells;
    CsvWriter curve_csv({"mu", "ref", "distance", "sq_distance"});
    double total_area = 0.0;
    std::string failure;
    try {
      for (int r = 0; r < n_refs; ++r) {
        const TraversalResult tr =
            traverse_axis(gen.map, refs[static_cast<std::size_t>(r)], axis, steps, step, mode, &dist);
        for (std::size_t i = 0; i < tr.mu.size(); ++i) {
          curve_csv.add_row({format_double(tr.mu[i]), std::to_string(r),
                             format_double(tr.distances[static_cast<Eigen::Index>(i)]),
                             format_double(tr.sq_distances[static_cast<Eigen::Index>(i)])});
          cells.push_back(quantize_image(tr.outputs[i], img_w, img_h));
          total_area += tr.distances[static_cast<Eigen::Index>(i)] * step;
        }
      }
      const std::string tag = "axis_" + std::to_string(rank + 1);
      rb.write_text(tag + "_curve.csv", curve_csv.str());
      const GrayImage grid = assemble_grid(cells, n_refs, 2 * steps + 1);
      rb.write_binary(tag + "_grid." + fmt, fmt == "pgm" ? encode_pgm(grid) : encode_png(grid));
    } catch (const std::exception& e) {
      failure = e.what();
    }
    json a;
    a["rank"] = rank + 1;
    a["eigenvalue"] = global.eigenvalues[rank];
    a["step"] = step;
    a["distance_area"] = total_area;
    if (!failure.empty()) a["error"] = failure;
    axis_payload.push_back(a);
  }

  json payload;
  payload["axes"] = axis_payload;
  payload["global_spectrum_head"] =
      std::vector<double>(global.eigenvalues.data(),
                          global.eigenvalues.data() + std::min<Eigen::Index>(10, n));
  rb.set_payload(payload);
  return rb.finalize();
}

// ---- invert -----------------------------------------------------------------------

RunReport cmd_invert(const json& user_config, const std::string& out_dir, bool force) {
  json defaults = {{"seed", 0},
                   {"generator", kGeneratorDefaults},
                   {"distance", kDistanceDefaults},
                   {"targets", {{"source", "self"}, {"count", 8}, {"noise_std", 0.05}}},
                   {"adam", invert_adam_defaults()},
                   {"n_restarts", 4},
                   {"init_sigma", 1.0},
                   {"precond_points", 12},
                   {"precond_k", 0},  // 0 -> full rotation
                   {"emit_traces", true},
                   {"out_dir", "out/invert"}};
  const json cfg = resolve_config(defaults, user_config);

  GeneratorHandle gen = load_generator_config(cfg.at("generator"));
  const DistanceMetric dist = make_distance_config(cfg.at("distance"), gen.map);
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();

  const json& tcfg = cfg.at("targets");
  const int count = tcfg.at("count").get<int>();
  if (count < 1) throw Error(ErrorKind::argument, "empty target set");
  const std::string source = tcfg.at("source").get<std::string>();
  std::vector<Vec> targets;
  {
    const std::vector<Vec> zs = sample_latent(gen.spec, mix_seed(seed, 301), count);
    Rng noise(mix_seed(seed, 302));
    for (const Vec& z : zs) {
      Vec img = gen.map.forward(z);
      if (source == "noisy")
        img += tcfg.at("noise_std").get<double>() * noise.normal_vector(img.size());
      else if (source != "self")
        throw Error(ErrorKind::config, "targets.source must be self or noisy");
      targets.push_back(std::move(img));
    }
  }

  ReportBuilder rb("invert", cfg, out_dir_from(cfg, out_dir), force);

  const std::vector<Vec> hess_points =
      sample_latent(gen.spec, mix_seed(seed, 303), cfg.at("precond_points").get<int>());
  const MetricTensor global = global_hessian_at(dist, hess_points);
  int pk = cfg.at("precond_k").get<int>();
  if (pk <= 0) pk = gen.map.input_dim();
  const Preconditioner precond = make_preconditioner(global, pk);

  InvertConfig base;
  base.adam = adam_from_json(cfg.at("adam"));
  base.n_restarts = cfg.at("n_restarts").get<int>();
  base.init_sigma = cfg.at("init_sigma").get<double>();

  struct ArmResult {
    std::vector<double> best;
    std::vector<InversionResult> runs;
  };
  ArmResult plain, pre;
  plain.runs.resize(targets.size());
  pre.runs.resize(targets.size());
  std::vector<std::string> failures(targets.size());
  parallel_for(static_cast<int>(targets.size()), [&](int t) {
    InvertConfig c = base;
    c.seed = mix_seed(seed, 400 + static_cast<std::uint64_t>(t));
    try {
      plain.runs[static_cast<std::size_t>(t)] = invert(dist, targets[static_cast<std::size_t>(t)], c);
      c.precond = &precond;
      pre.runs[static_cast<std::size_t>(t)] = invert(dist, targets[static_cast<std::size_t>(t)], c);
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(t)] = e.what();
    }
  });

  CsvWriter per_target({"target", "arm", "best_loss", "best_restart"});
  CsvWriter traces({"target", "arm", "restart", "step", "loss"});
  const bool emit_traces = cfg.at("emit_traces").get<bool>();
  json diffs = json::array();
  int ok = 0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (!failures[t].empty()) continue;
    ++ok;
    const auto& a = plain.runs[t];
    const auto& b = pre.runs[t];
    plain.best.push_back(a.best_loss);
    pre.best.push_back(b.best_loss);
    per_target.add_row({std::to_string(t), "plain", format_double(a.best_loss),
                        std::to_string(a.best_restart)});
    per_target.add_row({std::to_string(t), "precond", format_double(b.best_loss),
                        std::to_string(b.best_restart)});
    diffs.push_back(b.best_loss - a.best_loss);
    if (emit_traces) {
      for (std::size_t r = 0; r < a.restarts.size(); ++r)
        for (std::size_t s = 0; s < a.restarts[r].losses.size(); ++s)
          traces.add_row({std::to_string(t), "plain", std::to_string(r), std::to_string(s),
                          format_double(a.restarts[r].losses[s])});
      for (std::size_t r = 0; r < b.restarts.size(); ++r)
        for (std::size_t s = 0; s < b.restarts[r].losses.size(); ++s)
          traces.add_row({std::to_string(t), "precond", std::to_string(r), std::to_string(s),
                          format_double(b.restarts[r].losses[s])});
    }
  }
  if (ok == 0) throw Error(ErrorKind::numerical, "all inversion targets failed: " + failures[0]);
  rb.write_text("per_target.csv", per_target.str());
  if (emit_traces) rb.write_text("traces.csv", traces.str());

  // one full inversion record per arm for the first target, as a worked example
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (!failures[t].empty()) continue;
    rb.write_text("inversion_plain.json",
                  inversion_result_to_json(plain.runs[t], cfg.dump(),
                                           mix_seed(seed, 400 + static_cast<std::uint64_t>(t))));
    rb.write_text("inversion_precond.json",
                  inversion_result_to_json(pre.runs[t], cfg.dump(),
                                           mix_seed(seed, 400 + static_cast<std::uint64_t>(t))));
    break;
  }

  json payload;
  payload["targets_ok"] = ok;
  json fail_list = json::array();
  for (std::size_t t = 0; t < failures.size(); ++t)
    if (!failures[t].empty()) fail_list.push_back({{"target", t}, {"error", failures[t]}});
  payload["failures"] = fail_list;
  payload["median_best_plain"] = median(plain.best);
  payload["median_best_precond"] = median(pre.best);
  payload["paired_diff_precond_minus_plain"] = diffs;
  int precond_wins = 0;
  for (const auto& d : diffs)
    if (d.get<double>() < 0.0) ++precond_wins;
  payload["precond_wins"] = precond_wins;
  rb.set_payload(payload);
  return rb.finalize();
}

// ---- maximize -----------------------------------------------------------------------

RunReport cmd_maximize(const json& user_config, const std::string& out_dir, bool force) {
  json defaults = {{"seed", 0},
                   {"generator", kGeneratorDefaults},
                   {"distance", kDistanceDefaults},
                   {"readout_seed", 7},
                   {"n_seeds", 10},
                   {"budget", 200},
                   {"sigma_init", 0.5},
                   {"k", 4},
                   {"precond_points", 12},
                   {"out_dir", "out/maximize"}};
  const json cfg = resolve_config(defaults, user_config);

  GeneratorHandle gen = load_generator_config(cfg.at("generator"));
  const DistanceMetric dist = make_distance_config(cfg.at("distance"), gen.map);
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  const int n = gen.map.input_dim();

  // fixed random linear readout over encoder features of the generator output
  FeatureEncoder enc = FeatureEncoder::standard(gen.map.output_dim(),
                                                cfg.at("readout_seed").get<std::uint64_t>());
  Rng readout_rng(mix_seed(cfg.at("readout_seed").get<std::uint64_t>(), 0x0f));
  Vec readout = readout_rng.normal_vector(enc.feature_dim);
  readout /= readout.norm();
  const ObjectiveFn neg_activation = [&](const Vec& z) {
    return -readout.dot(enc.value(gen.map.forward(z)));
  };

  ReportBuilder rb("maximize", cfg, out_dir_from(cfg, out_dir), force);

  const std::vector<Vec> hess_points =
      sample_latent(gen.spec, mix_seed(seed, 303), cfg.at("precond_points").get<int>());
  const MetricTensor global = global_hessian_at(dist, hess_points);

  const int n_seeds = cfg.at("n_seeds").get<int>();
  const int budget = cfg.at("budget").get<int>();
  const double sigma = cfg.at("sigma_init").get<double>();
  const int k = std::min(cfg.at("k").get<int>(), n);

  struct Row {
    double plain_f = 0.0, hess_f = 0.0;
    int plain_evals = 0, hess_evals = 0;
    std::string error;
  };
  std::vector<Row> rows(static_cast<std::size_t>(n_seeds));
  parallel_for(n_seeds, [&](int s) {
    Row& row = rows[static_cast<std::size_t>(s)];
    try {
      Rng init_rng(mix_seed(seed, 500 + static_cast<std::uint64_t>(s)));
      const Vec z0 = init_rng.normal_vector(n);
      const std::uint64_t run_seed = mix_seed(seed, 600 + static_cast<std::uint64_t>(s));
      const CmaTrace plain = cmaes_minimize(neg_activation, z0, sigma, budget, run_seed);
      const CmaTrace hess =
          cmaes_hessian_minimize(neg_activation, global, k, budget, run_seed, z0, sigma);
      row.plain_f = -plain.best_f;
      row.hess_f = -hess.best_f;
      row.plain_evals = plain.evals;
      row.hess_evals = hess.evals;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });

  CsvWriter table({"seed", "arm", "final_objective", "evals"});
  std::vector<double> plain_f, hess_f;
  int hess_wins = 0, ties = 0, ok = 0;
  json fail_list = json::array();
  for (int s = 0; s < n_seeds; ++s) {
    const Row& r = rows[static_cast<std::size_t>(s)];
    if (!r.error.empty()) {
      fail_list.push_back({{"seed", s}, {"error", r.error}});
      continue;
    }
    ++ok;
    table.add_row({std::to_string(s), "plain", format_double(r.plain_f),
                   std::to_string(r.plain_evals)});
    table.add_row({std::to_string(s), "hess", format_double(r.hess_f),
                   std::to_string(r.hess_evals)});
    plain_f.push_back(r.plain_f);
    hess_f.push_back(r.hess_f);
    if (r.hess_f > r.plain_f) ++hess_wins;
    if (r.hess_f == r.plain_f) ++ties;
  }
  if (ok == 0) throw Error(ErrorKind::numerical, "all maximize seeds failed");
  rb.write_text("results.csv", table.str());

  json payload;
  payload["seeds_ok"] = ok;
  payload["failures"] = fail_list;
  payload["median_plain"] = median(plain_f);
  payload["median_hess"] = median(hess_f);
  payload["hess_wins"] = hess_wins;
  payload["ties"] = ties;
  payload["k"] = k;
  payload["budget_per_arm"] = budget;
  rb.set_payload(payload);
  return rb.finalize();
}

// ---- compare-metrics ------------------------------------------------------------------

RunReport cmd_compare_metrics(const json& user_config, const std::string& out_dir, bool force) {
  json defaults = {{"seed", 0},
                   {"generator", kGeneratorDefaults},
                   {"distance_a", kDistanceDefaults},
                   {"distance_b",
                    {{"kind", "feature_sq_l2"}, {"scale", 1.0}, {"encoder_seed", 1234}}},
                   {"n_points", 8},
                   {"out_dir", "out/compare_metrics"}};
  const json cfg = resolve_config(defaults, user_config);

  GeneratorHandle gen = load_generator_config(cfg.at("generator"));
  const DistanceMetric da = make_distance_config(cfg.at("distance_a"), gen.map);
  const DistanceMetric db = make_distance_config(cfg.at("distance_b"), gen.map);
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  const int n_points = cfg.at("n_points").get<int>();
  if (n_points < 1) throw Error(ErrorKind::config, "compare-metrics needs n_points >= 1");

  const std::vector<Vec> points = sample_latent(gen.spec, mix_seed(seed, 101), n_points);

  ReportBuilder rb("compare-metrics", cfg, out_dir_from(cfg, out_dir), force);
  const RobustnessReport rep = compare_distance_metrics(points, da, db);

  CsvWriter table({"point", "h_corr", "eigval_corr", "c_lin", "c_log", "slope", "intercept"});
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& r = rep.rows[i];
    table.add_row({std::to_string(i), corr_cell(r.h_corr), corr_cell(r.eigval_corr),
                   corr_cell(r.c_lin), corr_cell(r.c_log),
                   r.regression_defined ? format_double(r.slope) : "undefined",
                   r.regression_defined ? format_double(r.intercept) : "undefined"});
  }
  rb.write_text("robustness.csv", table.str());

  json payload;
  payload["mean_h_corr"] = rep.mean_h_corr;
  payload["std_h_corr"] = rep.std_h_corr;
  payload["mean_eigval_corr"] = rep.mean_eigval_corr;
  payload["std_eigval_corr"] = rep.std_eigval_corr;
  payload["mean_c_lin"] = rep.mean_c_lin;
  payload["std_c_lin"] = rep.std_c_lin;
  payload["mean_c_log"] = rep.mean_c_log;
  payload["std_c_log"] = rep.std_c_log;
  payload["mean_slope"] = rep.mean_slope;
  payload["std_slope"] = rep.std_slope;
  payload["mean_intercept"] = rep.mean_intercept;
  payload["std_intercept"] = rep.std_intercept;
  rb.set_payload(payload);
  return rb.finalize();
}

// ---- build / shuffle ---------------------------------------------------------------------

RunReport cmd_build(const json& user_config, const std::string& out_dir, bool force) {
  json defaults = {{"seed", 0},
                   {"generator", kGeneratorDefaults},
                   {"file_name", "generator.gmw"},
                   {"out_dir", "out/build"}};
  const json cfg = resolve_config(defaults, user_config);

  GeneratorHandle gen = load_generator_config(cfg.at("generator"));
  ReportBuilder rb("build", cfg, out_dir_from(cfg, out_dir), force);

  const std::string name = cfg.at("file_name").get<std::string>();
  // serialize through a string so the manifest hash covers the exact bytes
  const std::filesystem::path path = rb.out_dir() / name;
  save_gmw(path.string(), gen.spec, *gen.map.weights());
  const std::string bytes = read_file(path.string());
  std::filesystem::remove(path);
  rb.write_binary(name, bytes);

  json payload;
  payload["parameter_count"] = gen.map.weights()->parameter_count();
  payload["latent_dim"] = gen.map.input_dim();
  payload["output_dim"] = gen.map.output_dim();
  payload["spec"] = generator_spec_to_json(gen.spec);
  rb.set_payload(payload);
  return rb.finalize();
}

RunReport cmd_shuffle(const json& user_config, const std::string& out_dir, bool force) {
  json defaults = {{"seed", 0},
                   {"generator", kGeneratorDefaults},
                   {"shuffle_seed", 42},
                   {"file_name", "shuffled.gmw"},
                   {"out_dir", "out/shuffle"}};
  const json cfg = resolve_config(defaults, user_config);

  json gen_cfg = cfg.at("generator");
  gen_cfg["shuffle_seed"] = nullptr;  // shuffle exactly once, below
  GeneratorHandle gen = load_generator_config(gen_cfg);
  const WeightStore shuffled =
      shuffle_weights(*gen.map.weights(), cfg.at("shuffle_seed").get<std::uint64_t>());

  ReportBuilder rb("shuffle", cfg, out_dir_from(cfg, out_dir), force);
  const std::string name = cfg.at("file_name").get<std::string>();
  const std::filesystem::path path = rb.out_dir() / name;
  save_gmw(path.string(), gen.spec, shuffled);
  const std::string bytes = read_file(path.string());
  std::filesystem::remove(path);
  rb.write_binary(name, bytes);

  json payload;
  payload["parameter_count"] = shuffled.parameter_count();
  payload["tensors"] = shuffled.entries.size();
  rb.set_payload(payload);
  return rb.finalize();
}

}  // namespace manifold

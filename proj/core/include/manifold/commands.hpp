#pragma once

#include "manifold/optim.hpp"
#include "manifold/report.hpp"

namespace manifold {

// One entry point per CLI subcommand. `user_config` is the parsed config
// document (may be null for all-defaults); `out_dir` overrides the config's
// output directory when non-empty. Each returns the finished report.

RunReport cmd_spectra(const nlohmann::json& user_config, const std::string& out_dir, bool force);
RunReport cmd_consistency(const nlohmann::json& user_config, const std::string& out_dir, bool force);
RunReport cmd_axes(const nlohmann::json& user_config, const std::string& out_dir, bool force);
RunReport cmd_invert(const nlohmann::json& user_config, const std::string& out_dir, bool force);
RunReport cmd_maximize(const nlohmann::json& user_config, const std::string& out_dir, bool force);
RunReport cmd_compare_metrics(const nlohmann::json& user_config, const std::string& out_dir,
                              bool force);
RunReport cmd_build(const nlohmann::json& user_config, const std::string& out_dir, bool force);
RunReport cmd_shuffle(const nlohmann::json& user_config, const std::string& out_dir, bool force);

// Shared config plumbing (exposed for tests).
struct GeneratorHandle {
  DiffMap map;
  GeneratorSpec spec;
};
GeneratorHandle load_generator_config(const nlohmann::json& gen_cfg);
DistanceMetric make_distance_config(const nlohmann::json& dist_cfg, const DiffMap& generator);

}  // namespace manifold

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "manifold/commands.hpp"
#include "manifold/textio.hpp"

namespace {

using CommandFn =
    std::function<manifold::RunReport(const nlohmann::json&, const std::string&, bool)>;

int exit_code_for(manifold::ErrorKind kind) {
  switch (kind) {
    case manifold::ErrorKind::argument:
    case manifold::ErrorKind::spec:
    case manifold::ErrorKind::config:
    case manifold::ErrorKind::capacity:
    case manifold::ErrorKind::dimension:
      return 2;
    case manifold::ErrorKind::io:
      return 4;
    default:
      return 3;
  }
}

nlohmann::json load_config(const std::string& path) {
  if (path.empty()) return nlohmann::json();
  std::ifstream f(path);
  if (!f) throw manifold::Error(manifold::ErrorKind::config, "cannot open config " + path);
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw manifold::Error(manifold::ErrorKind::config,
                          "config " + path + " is not valid JSON: " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemannian geometry toolkit for differentiable generators"};
  app.require_subcommand(1);

  const std::map<std::string, CommandFn> commands = {
      {"spectra", manifold::cmd_spectra},
      {"consistency", manifold::cmd_consistency},
      {"axes", manifold::cmd_axes},
      {"invert", manifold::cmd_invert},
      {"maximize", manifold::cmd_maximize},
      {"compare-metrics", manifold::cmd_compare_metrics},
      {"build", manifold::cmd_build},
      {"shuffle", manifold::cmd_shuffle},
  };
  const std::map<std::string, std::string> blurbs = {
      {"spectra", "sample latent points and export metric spectra"},
      {"consistency", "pairwise eigenframe consistency statistics"},
      {"axes", "eigen-axis traversal grids and distance curves"},
      {"invert", "latent inversion with and without eigenbasis preconditioning"},
      {"maximize", "gradient-free activation maximization, plain vs eigenspace CMA-ES"},
      {"compare-metrics", "metric tensors under two output distances"},
      {"build", "materialize a generator into a .gmw weight file"},
      {"shuffle", "write a weight-shuffled control of a generator"},
  };

  struct SubArgs {
    std::string config;
    std::string out;
    bool force = false;
  };
  std::map<std::string, SubArgs> args;
  for (const auto& [name, fn] : commands) {
    (void)fn;
    CLI::App* sub = app.add_subcommand(name, blurbs.at(name));
    SubArgs& a = args[name];
    sub->add_option("--config", a.config, "JSON config file (defaults apply when omitted)");
    sub->add_option("--out", a.out, "output directory (overrides config)");
    sub->add_flag("--force", a.force, "allow overwriting an existing report directory");
  }

  CLI11_PARSE(app, argc, argv);

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const SubArgs& a = args.at(name);
    const manifold::RunReport report = commands.at(name)(load_config(a.config), a.out, a.force);
    std::cout << name << ": report written to " << report.report_path.string() << "\n";
    return 0;
  } catch (const manifold::Error& e) {
    std::cerr << name << ": " << manifold::error_kind_name(e.kind()) << " error: " << e.what()
              << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << name << ": error: " << e.what() << "\n";
    return 3;
  }
}

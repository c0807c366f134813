#include "manifold/report.hpp"

#include <chrono>
#include <fstream>

#include "manifold/textio.hpp"

namespace manifold {

ReportBuilder::ReportBuilder(std::string command, nlohmann::json resolved_config,
                             std::filesystem::path out_dir, bool force)
    : command_(std::move(command)), config_(std::move(resolved_config)),
      out_dir_(std::move(out_dir)), started_(std::chrono::steady_clock::now()) {
  std::error_code ec;
  if (std::filesystem::exists(out_dir_ / "report.json") && !force)
    throw Error(ErrorKind::io, "output directory already holds a report: " +
                                   (out_dir_ / "report.json").string() +
                                   " (pass --force to overwrite)");
  std::filesystem::create_directories(out_dir_, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create " + out_dir_.string() + ": " + ec.message());
}

void ReportBuilder::write_text(const std::string& relative_path, const std::string& content) {
  const std::filesystem::path full = out_dir_ / relative_path;
  if (full.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(full.parent_path(), ec);
  }
  write_file(full.string(), content);
  manifest_.push_back({{"file", relative_path},
                       {"bytes", content.size()},
                       {"fnv1a64", fnv1a64_hex(content)}});
}

RunReport ReportBuilder::finalize() {
  nlohmann::json doc;
  doc["tool"] = kToolName;
  doc["version"] = kToolVersion;
  doc["command"] = command_;
  doc["config"] = config_;
  doc["payload"] = payload_;
  doc["notes"] = notes_;
  doc["manifest"] = manifest_;

  RunReport report;
  report.document = doc;
  report.out_dir = out_dir_;
  report.report_path = out_dir_ / "report.json";
  write_file(report.report_path.string(), doc.dump(2) + "\n");

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  nlohmann::json timing = {{"wall_clock_seconds", seconds}};
  write_file((out_dir_ / "timing.json").string(), timing.dump(2) + "\n");
  return report;
}

namespace {

void merge_into(nlohmann::json& base, const nlohmann::json& user, const std::string& path) {
  if (!user.is_object() || !base.is_object()) {
    base = user;
    return;
  }
  const bool open_subtree = base.contains("...");
  for (auto it = user.begin(); it != user.end(); ++it) {
    if (base.contains(it.key())) {
      merge_into(base[it.key()], it.value(), path + "/" + it.key());
    } else if (open_subtree) {
      base[it.key()] = it.value();
    } else {
      throw Error(ErrorKind::config, "unknown config key " + path + "/" + it.key());
    }
  }
}

void strip_wildcards(nlohmann::json& j) {
  if (!j.is_object()) return;
  j.erase("...");
  for (auto& [key, value] : j.items()) {
    (void)key;
    strip_wildcards(value);
  }
}

}  // namespace

nlohmann::json resolve_config(const nlohmann::json& defaults, const nlohmann::json& user) {
  nlohmann::json out = defaults;
  if (!user.is_null()) merge_into(out, user, "");
  strip_wildcards(out);
  return out;
}

}  // namespace manifold

#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "manifold/error.hpp"

namespace manifold {

inline constexpr const char* kToolName = "manifold-probe";
inline constexpr const char* kToolVersion = "0.1.0";

// Finished run record: the deterministic report document (config echo,
// payload, file manifest) plus where it was written. Wall-clock timing goes
// to a sidecar file so the report itself is byte-stable across re-runs.
struct RunReport {
  nlohmann::json document;
  std::filesystem::path report_path;
  std::filesystem::path out_dir;
};

// Collects artifacts for one command run. Every file must be written through
// the builder so the manifest stays complete; finalize() emits report.json
// and timing.json.
class ReportBuilder {
 public:
  ReportBuilder(std::string command, nlohmann::json resolved_config,
                std::filesystem::path out_dir, bool force);

  const std::filesystem::path& out_dir() const { return out_dir_; }

  void write_text(const std::string& relative_path, const std::string& content);
  void write_binary(const std::string& relative_path, const std::string& content) {
    write_text(relative_path, content);
  }

  void set_payload(nlohmann::json payload) { payload_ = std::move(payload); }
  void add_note(const std::string& note) { notes_.push_back(note); }

  RunReport finalize();

 private:
  std::string command_;
  nlohmann::json config_;
  std::filesystem::path out_dir_;
  nlohmann::json manifest_ = nlohmann::json::array();
  nlohmann::json payload_;
  std::vector<std::string> notes_;
  std::chrono::steady_clock::time_point started_;
};

// Recursive merge of `user` over `defaults`; throws ErrorKind::config on a
// key absent from the defaults (catches typos) unless the defaults carry the
// wildcard marker "..." for that subtree.
nlohmann::json resolve_config(const nlohmann::json& defaults, const nlohmann::json& user);

}  // namespace manifold

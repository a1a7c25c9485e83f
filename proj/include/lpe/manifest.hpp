#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "lpe/config.hpp"
#include "lpe/csv.hpp"
#include "lpe/version.hpp"

namespace lpe {

inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Records what a run produced: config echo, version, timestamps and a
/// checksum for every emitted file.
class RunManifest {
 public:
  RunManifest(std::string experiment, const Config& config)
      : experiment_(std::move(experiment)), started_(utc_timestamp()) {
    for (const auto& [key, value] : config.values()) {
      std::visit(
          [&, k = key](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::vector<double>>)
              config_echo_[k] = v;
            else
              config_echo_[k] = v;
          },
          value);
    }
  }

  /// Writes `contents` atomically under the run directory and records it.
  void emit(const std::filesystem::path& dir, const std::string& filename,
            const std::string& contents) {
    write_file_atomic(dir / filename, contents);
    files_.push_back({filename, contents.size(), hex64(fnv1a64(contents))});
  }

  void finalize(const std::filesystem::path& dir) {
    nlohmann::json j;
    j["experiment"] = experiment_;
    j["toolkit_version"] = kVersion;
    j["config"] = config_echo_;
    j["started_utc"] = started_;
    j["finished_utc"] = utc_timestamp();
    nlohmann::json files = nlohmann::json::array();
    for (const auto& f : files_)
      files.push_back({{"file", f.name}, {"bytes", f.bytes}, {"fnv1a64", f.checksum}});
    j["outputs"] = files;
    write_file_atomic(dir / "manifest.json", j.dump(2) + "\n");
  }

 private:
  struct FileRecord {
    std::string name;
    std::size_t bytes;
    std::string checksum;
  };

  std::string experiment_;
  std::string started_;
  nlohmann::json config_echo_ = nlohmann::json::object();
  std::vector<FileRecord> files_;
};

}  // namespace lpe

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sassopt/rl.hpp"

namespace sassopt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Default output root when --out is not given.
inline constexpr const char* kOutEnvVar = "SASSOPT_OUT";

/// Entry point of the `sassopt` tool. Never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct StoreKey {
  std::string device;
  std::string workload;
  std::string key;

  std::string str() const { return device + "/" + workload + "/" + key; }
  std::filesystem::path dir(const std::filesystem::path& root) const { return root / device / workload / key; }
  bool operator==(const StoreKey&) const = default;
};

/// Parses "device/workload/key".
std::optional<StoreKey> parse_store_key(const std::string& text);

/// Named files of one stored search result.
struct StoredArtifacts {
  std::string schedule;
  std::string checkpoint;
  std::string train_log;
  std::string trace;
  std::string meta;
};

inline constexpr const char* kScheduleFile = "schedule.sass";
inline constexpr const char* kCheckpointFile = "checkpoint.json";
inline constexpr const char* kTrainLogFile = "train_log.jsonl";
inline constexpr const char* kTraceFile = "trace.jsonl";
inline constexpr const char* kMetaFile = "meta.json";

/// Writes all files into a fresh sibling directory, then swaps it in.
std::filesystem::path store_artifacts(const std::filesystem::path& root, const StoreKey& key, const StoredArtifacts& a);
/// Every stored key under root, sorted.
std::vector<StoreKey> list_store(const std::filesystem::path& root);
std::size_t edit_distance(const std::string& a, const std::string& b);
/// Up to `n` stored keys closest to `wanted`.
std::vector<StoreKey> nearest_keys(const std::vector<StoreKey>& keys, const StoreKey& wanted, std::size_t n = 3);

/// Least-squares slope of the series against its index.
double trend_slope(const std::vector<double>& y);
/// Trailing moving average with the given window.
std::vector<double> smooth(const std::vector<double>& y, std::size_t window);
/// Standalone SVG line chart with a trend annotation.
std::string render_svg(const std::string& title, const std::vector<double>& x, const std::vector<double>& y);

}  // namespace sassopt

#include <unistd.h>

#include <algorithm>
#include <fstream>

#include "sassopt/cli.hpp"

namespace sassopt {

namespace fs = std::filesystem;

std::optional<StoreKey> parse_store_key(const std::string& text) {
  auto a = text.find('/');
  if (a == std::string::npos) return std::nullopt;
  auto b = text.find('/', a + 1);
  if (b == std::string::npos || text.find('/', b + 1) != std::string::npos) return std::nullopt;
  StoreKey k{text.substr(0, a), text.substr(a + 1, b - a - 1), text.substr(b + 1)};
  if (k.device.empty() || k.workload.empty() || k.key.empty()) return std::nullopt;
  return k;
}

namespace {

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

}  // namespace

fs::path store_artifacts(const fs::path& root, const StoreKey& key, const StoredArtifacts& a) {
  for (const auto* part : {&key.device, &key.workload, &key.key}) {
    if (part->empty() || part->find('/') != std::string::npos || *part == "." || *part == "..")
      throw std::invalid_argument("invalid key component '" + *part + "'");
  }
  const fs::path dir = key.dir(root);
  fs::create_directories(dir.parent_path());
  const std::string suffix = "." + std::to_string(::getpid());
  fs::path staging = dir;
  staging += ".tmp" + suffix;
  fs::remove_all(staging);
  fs::create_directory(staging);
  write_file(staging / kScheduleFile, a.schedule);
  write_file(staging / kCheckpointFile, a.checkpoint);
  write_file(staging / kTrainLogFile, a.train_log);
  write_file(staging / kTraceFile, a.trace);
  write_file(staging / kMetaFile, a.meta);

  fs::path old = dir;
  old += ".old" + suffix;
  const bool existed = fs::exists(dir);
  if (existed) fs::rename(dir, old);
  fs::rename(staging, dir);
  if (existed) fs::remove_all(old);
  return dir;
}

std::vector<StoreKey> list_store(const fs::path& root) {
  std::vector<StoreKey> keys;
  if (!fs::is_directory(root)) return keys;
  for (const auto& dev : fs::directory_iterator(root)) {
    if (!dev.is_directory()) continue;
    for (const auto& wl : fs::directory_iterator(dev.path())) {
      if (!wl.is_directory()) continue;
      for (const auto& k : fs::directory_iterator(wl.path())) {
        if (k.is_directory() && fs::exists(k.path() / kScheduleFile))
          keys.push_back({dev.path().filename().string(), wl.path().filename().string(), k.path().filename().string()});
      }
    }
  }
  std::sort(keys.begin(), keys.end(), [](const StoreKey& a, const StoreKey& b) { return a.str() < b.str(); });
  return keys;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<StoreKey> nearest_keys(const std::vector<StoreKey>& keys, const StoreKey& wanted, std::size_t n) {
  std::vector<std::pair<std::size_t, StoreKey>> scored;
  for (const auto& k : keys) scored.emplace_back(edit_distance(k.str(), wanted.str()), k);
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<StoreKey> out;
  for (std::size_t i = 0; i < scored.size() && i < n; ++i) out.push_back(scored[i].second);
  return out;
}

}  // namespace sassopt

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

#include <spdlog/spdlog.h>

#include "sassopt/evaluators.hpp"

namespace sassopt {
namespace {

std::mutex& executor_mutex() {
  static std::mutex m;
  return m;
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) s.replace(pos, from.size(), to);
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string tail(const std::string& s, std::size_t n = 400) { return s.size() <= n ? s : "..." + s.substr(s.size() - n); }

}  // namespace

double execute_external(const Kernel& k, const EvaluatorConfig& cfg) {
  cfg.validate();
  if (cfg.executor_command.empty()) throw EvaluatorError("no executor command configured");

  std::lock_guard lock(executor_mutex());
  static std::atomic<unsigned> counter{0};
  const auto dir = cfg.work_dir.empty() ? std::filesystem::temp_directory_path() : cfg.work_dir;
  std::filesystem::create_directories(dir);
  const std::string stem = "sassopt-" + std::to_string(::getpid()) + "-" + std::to_string(counter++);
  const auto sass_path = dir / (stem + ".sass");
  const auto err_path = dir / (stem + ".stderr");
  {
    std::ofstream out(sass_path);
    out << serialize_kernel(k);
    if (!out) throw EvaluatorError("cannot write " + sass_path.string());
  }

  std::string cmd = cfg.executor_command;
  replace_all(cmd, "{sass_path}", sass_path.string());
  replace_all(cmd, "{warmup}", std::to_string(cfg.warmup_iters));
  replace_all(cmd, "{iters}", std::to_string(cfg.measure_iters));
  cmd += " 2>'" + err_path.string() + "'";

  std::string output;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw EvaluatorError("cannot spawn executor command");
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) output.append(buf, n);
  const int status = ::pclose(pipe);
  const std::string diagnostics = read_file(err_path);
  std::error_code ec;
  std::filesystem::remove(sass_path, ec);
  std::filesystem::remove(err_path, ec);

  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const int code = (status != -1 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
    throw EvaluatorError("executor exited with status " + std::to_string(code) + ": " + tail(diagnostics + output));
  }

  std::istringstream lines(output);
  std::string line, last;
  while (std::getline(lines, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    last = line.substr(b, line.find_last_not_of(" \t\r") - b + 1);
  }
  char* end = nullptr;
  const double value = std::strtod(last.c_str(), &end);
  if (last.empty() || end != last.c_str() + last.size() || !std::isfinite(value) || value <= 0)
    throw EvaluatorError("unparsable executor output '" + tail(output) + "'");
  return value;
}

ExecutorEvaluator::ExecutorEvaluator(EvaluatorConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

double ExecutorEvaluator::measure(const Kernel& k) {
  const double t = execute_external(k, cfg_);
  auto key = serialize_kernel(k);
  auto [it, fresh] = last_.try_emplace(std::move(key), t);
  if (!fresh) {
    const double prev = it->second;
    if (std::abs(t - prev) > 0.01 * prev) {
      ++variance_warnings_;
      spdlog::warn("repeated measurement of the same schedule differs by {:.2f}% ({} vs {})",
                   100.0 * std::abs(t - prev) / prev, prev, t);
    }
    it->second = t;
  }
  return t;
}

}  // namespace sassopt

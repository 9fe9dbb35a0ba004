#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sassopt/environment.hpp"

namespace sassopt::testing {

std::filesystem::path corpus_dir();
std::filesystem::path data_dir();
std::string read_file(const std::filesystem::path& p);
std::vector<std::filesystem::path> corpus_files();
Kernel load_corpus(const std::string& name);

struct SynthOptions {
  int min_instructions = 8;
  int max_instructions = 30;
  int max_blocks = 3;
  double memory_fraction = 0.3;
  int min_latency = 1;
  int max_latency = 8;
  bool unknown_opcodes = false;
  bool ldgsts_runs = true;
};

/// A random but valid kernel: every fixed-latency producer is at least
/// `latency[mnemonic]` stall cycles ahead of each reader, and every read of
/// a variable-latency result waits on the barrier that load set.
struct SynthKernel {
  std::string text;
  std::map<std::string, int> latency;
};

SynthKernel random_kernel(std::uint64_t seed, const SynthOptions& opt = {});

/// Every schedule reachable through unmasked actions, identity first.
std::vector<Schedule> reachable_schedules(const GameContext& ctx, std::size_t limit = 200000);

/// Simulated time of the best reachable schedule.
struct Optimum {
  double time = 0;
  std::vector<Schedule> schedules;
  std::size_t explored = 0;
};
Optimum brute_force_optimum(const GameContext& ctx, Evaluator& evaluator, std::size_t limit = 200000);

}  // namespace sassopt::testing

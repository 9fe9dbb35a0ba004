#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sassopt/analysis.hpp"
#include "sassopt/sass.hpp"

namespace sassopt {

/// A measurement could not be taken. The environment rolls back on this.
class EvaluatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The simulated schedule is not executable (e.g. waits on a barrier that
/// nothing set).
class SimulationError : public EvaluatorError {
 public:
  using EvaluatorError::EvaluatorError;
};

enum class Backend { Simulator, Executor };

using LatencyMap = std::map<std::string, int, std::less<>>;

/// Variable latencies for the simulator. Looked up by full mnemonic first,
/// then by root opcode.
LatencyMap default_variable_latencies();

struct EvaluatorConfig {
  Backend backend = Backend::Simulator;
  int warmup_iters = 100;
  int measure_iters = 100;

  // Simulator only.
  LatencyMap variable_latency_map = default_variable_latencies();
  int default_variable_latency = 50;
  int read_barrier_latency = 8;
  /// Ground-truth latencies of fixed-latency mnemonics. Reads that come
  /// sooner than this are reported as hazards in the trace.
  LatencyMap fixed_latency_map;

  // Executor only. `{sass_path}`, `{warmup}` and `{iters}` are substituted.
  std::string executor_command;
  std::filesystem::path work_dir;

  /// Throws std::invalid_argument on non-positive iteration counts.
  void validate() const;
};

struct SimRecord {
  std::size_t index = 0;
  long issue = 0;
  long completion = 0;
  long barrier_stall = 0;
  std::vector<int> waited_barriers;
};

struct Hazard {
  std::size_t producer = 0;
  std::size_t consumer = 0;
  Reg reg;
  int separation = 0;
  int required = 0;
};

struct SimTrace {
  std::vector<SimRecord> records;
  std::vector<Hazard> hazards;
  long total_cycles = 0;
};

/// Deterministic single-warp in-order scoreboard model.
long simulate(const Kernel& k, const EvaluatorConfig& cfg, SimTrace* trace = nullptr);

/// One line per instruction: index, issue, completion, waited barriers.
std::string dump_trace(const SimTrace& trace);

/// Hands the serialized kernel to the configured command and parses the
/// mean time it prints. Calls are globally serialized.
double execute_external(const Kernel& k, const EvaluatorConfig& cfg);

class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual double measure(const Kernel& k) = 0;
  /// Whether independent episodes may share this evaluator concurrently.
  virtual bool concurrent() const { return false; }
};

class SimulatorEvaluator : public Evaluator {
 public:
  explicit SimulatorEvaluator(EvaluatorConfig cfg = {});
  double measure(const Kernel& k) override;
  bool concurrent() const override { return true; }

 private:
  EvaluatorConfig cfg_;
};

class ExecutorEvaluator : public Evaluator {
 public:
  explicit ExecutorEvaluator(EvaluatorConfig cfg);
  double measure(const Kernel& k) override;
  /// Number of repeated measurements that disagreed by more than 1%.
  std::size_t variance_warnings() const { return variance_warnings_; }

 private:
  EvaluatorConfig cfg_;
  std::unordered_map<std::string, double> last_;
  std::size_t variance_warnings_ = 0;
};

/// Thrown when the mutated kernel is not a permutation of the original.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Violation {
  None,
  RegisterOrder,
  BarrierOrder,
  StallSeparation,
  BlockMembership,
  LdgstsGroupOrder,
};

std::string_view to_string(Violation v);

struct DataflowVerdict {
  bool accepted = true;
  Violation violation = Violation::None;
  std::optional<Reg> reg;
  /// Source lines of the offending pair in the original kernel.
  std::size_t first_line = 0;
  std::size_t second_line = 0;
  std::string detail;

  explicit operator bool() const { return accepted; }
};

/// Independent correctness oracle for a reordered kernel. `table` supplies
/// the minimum stall separations for fixed-latency producers.
DataflowVerdict verify_dataflow(const Kernel& original, const Kernel& mutated, const StallCountTable& table);

/// Same check on an explicit permutation (position -> original ordinal).
DataflowVerdict verify_permutation(const Kernel& original, const std::vector<std::size_t>& order,
                                   const StallCountTable& table);

}  // namespace sassopt

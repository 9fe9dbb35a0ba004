#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sassopt/analysis.hpp"
#include "sassopt/evaluators.hpp"
#include "sassopt/sass.hpp"

namespace sassopt {

/// Applying a masked action, stepping a finished episode, and the like.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Row-major (instructions x row_width) state matrix.
struct StateEmbedding {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  bool operator==(const StateEmbedding&) const = default;
};

/// Columns before the operand slots: six wait bits, read barrier, write
/// barrier, yield, stall, opcode class.
inline constexpr std::size_t kFixedColumns = 11;
inline constexpr double kMemoryClass = 1.0;
inline constexpr double kNonMemoryClass = -1.0;

std::vector<double> embed_instruction(const Instruction& inst, const AnalysisReport& report);
StateEmbedding embed(const Kernel& k, const AnalysisReport& report);

enum class Direction : std::uint8_t { Up, Down };

struct Action {
  std::size_t slot = 0;
  Direction direction = Direction::Up;

  int id() const { return static_cast<int>(2 * slot + (direction == Direction::Up ? 0 : 1)); }
  static Action decode(int id);
  bool operator==(const Action&) const = default;
};

double reward(double t0, double t_prev, double t_cur);

/// Position -> original instruction ordinal.
class Schedule {
 public:
  Schedule() = default;
  explicit Schedule(std::size_t n);

  std::size_t size() const { return order_.size(); }
  std::size_t at(std::size_t position) const { return order_[position]; }
  std::size_t position_of(std::size_t ordinal) const { return position_[ordinal]; }
  const std::vector<std::size_t>& order() const { return order_; }
  /// Exchanges positions p and p+1.
  void swap(std::size_t p);

  bool operator==(const Schedule& o) const { return order_ == o.order_; }

 private:
  std::vector<std::size_t> order_;
  std::vector<std::size_t> position_;
};

/// Everything about the original kernel that the game needs repeatedly.
class GameContext {
 public:
  GameContext(Kernel original, AnalysisReport report);

  const Kernel& original() const { return original_; }
  const AnalysisReport& report() const { return report_; }
  std::size_t num_slots() const { return report_.memory_indices.size(); }
  std::size_t num_actions() const { return 2 * num_slots(); }
  std::size_t row_width() const { return kFixedColumns + report_.max_operands; }
  /// Original ordinal of the memory instruction bound to a slot.
  std::size_t slot_instruction(std::size_t slot) const { return report_.memory_indices[slot]; }
  /// Frozen consecutive-LDGSTS group id, or -1.
  int ldgsts_group(std::size_t ordinal) const { return groups_[ordinal]; }
  bool denylisted(std::size_t ordinal) const { return report_.denylist.contains(ordinal); }

  /// Whether exchanging positions p and p+1 preserves every dependency.
  bool swap_allowed(const Schedule& s, std::size_t p) const;
  bool action_allowed(const Schedule& s, Action a) const;
  std::vector<std::uint8_t> compute_mask(const Schedule& s) const;

  StateEmbedding embed(const Schedule& s) const;
  Kernel materialize(const Schedule& s) const { return original_.permuted(s.order()); }

 private:
  bool stall_safe_moving_up(const Schedule& s, std::size_t from, std::size_t to) const;
  bool stall_safe_moving_down(const Schedule& s, std::size_t from, std::size_t to) const;
  /// Minimum stall separation the producer->consumer pair must keep.
  int required_separation(std::size_t producer, std::size_t consumer) const;

  Kernel original_;
  AnalysisReport report_;
  std::vector<int> groups_;
  /// prefix_[i] = total stall of original ordinals before i.
  std::vector<long> prefix_;
  std::vector<std::vector<double>> rows_;
};

std::shared_ptr<const GameContext> make_context(const Kernel& k, const StallCountTable& builtin = StallCountTable::builtin());

struct EpisodeState {
  Schedule schedule;
  Kernel kernel;
  /// Current position of each slot's memory instruction.
  std::vector<std::size_t> memory_indices;
  std::vector<std::uint8_t> mask;
  double t0 = 0;
  double t_prev = 0;
  double t_cur = 0;
  int step_count = 0;
  int max_steps = 32;
  bool done = false;
};

/// Pure transition: swap, then refresh indices, mask, and step count.
EpisodeState apply_action(const GameContext& ctx, const EpisodeState& state, Action a);

struct TraceRecord {
  int step = 0;
  int action = 0;
  std::size_t slot = 0;
  Direction direction = Direction::Up;
  /// Source line of the moved instruction in the original kernel.
  std::size_t line = 0;
  double reward = 0;
  double t_cur = 0;
  bool lingering = false;
};

struct StepResult {
  double reward = 0;
  bool done = false;
};

/// One assembly-game environment bound to an evaluator.
class AssemblyGame {
 public:
  AssemblyGame(std::shared_ptr<const GameContext> ctx, Evaluator& evaluator, int max_steps = 32);

  const EpisodeState& reset();
  /// Applies the action and measures. On evaluator failure the schedule is
  /// rolled back, the episode is marked done, and the error is rethrown.
  StepResult step(int action);

  const EpisodeState& state() const { return state_; }
  const GameContext& context() const { return *ctx_; }
  StateEmbedding observation() const { return ctx_->embed(state_.schedule); }

  double best_time() const { return best_time_; }
  const Schedule& best_schedule() const { return best_; }
  /// Records of the current episode.
  const std::vector<TraceRecord>& trace() const { return trace_; }

 private:
  std::shared_ptr<const GameContext> ctx_;
  Evaluator& evaluator_;
  int max_steps_;
  std::optional<double> t0_;
  EpisodeState state_;
  Schedule best_;
  double best_time_ = 0;
  std::vector<TraceRecord> trace_;
};

/// Marks records that undo the previous move of the same instruction.
void annotate_lingering(std::vector<TraceRecord>& trace);
std::string trace_jsonl(const std::vector<TraceRecord>& trace);

}  // namespace sassopt

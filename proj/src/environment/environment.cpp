#include "sassopt/environment.hpp"

#include <algorithm>
#include <limits>

#include <nlohmann/json.hpp>

namespace sassopt {

std::vector<double> embed_instruction(const Instruction& inst, const AnalysisReport& report) {
  std::vector<double> row;
  row.reserve(kFixedColumns + report.max_operands);
  const ControlCode& cc = inst.control;
  for (bool w : cc.wait_mask) row.push_back(w ? 1.0 : 0.0);
  row.push_back(cc.read_barrier ? *cc.read_barrier : -1.0);
  row.push_back(cc.write_barrier ? *cc.write_barrier : -1.0);
  row.push_back(cc.yield_flag ? 1.0 : 0.0);
  row.push_back(cc.stall_count);
  row.push_back(is_memory(inst) ? kMemoryClass : kNonMemoryClass);

  const double num_regs = static_cast<double>(std::max<std::size_t>(report.register_table.size(), 1));
  const double num_mems = static_cast<double>(std::max<std::size_t>(report.memory_table.size(), 1));
  for (const Operand& op : inst.operands) {
    double v = -1.0;
    if (auto key = register_key(op)) {
      if (auto it = report.register_table.find(*key); it != report.register_table.end()) v = it->second / num_regs;
    } else if (auto mem = memory_key(op)) {
      if (auto it = report.memory_table.find(*mem); it != report.memory_table.end()) v = it->second / num_mems;
    }
    row.push_back(v);
  }
  row.resize(kFixedColumns + report.max_operands, -1.0);
  return row;
}

StateEmbedding embed(const Kernel& k, const AnalysisReport& report) {
  StateEmbedding e;
  e.rows = k.num_instructions();
  e.cols = kFixedColumns + report.max_operands;
  e.data.reserve(e.rows * e.cols);
  for (std::size_t i = 0; i < e.rows; ++i) {
    auto row = embed_instruction(k.instruction(i), report);
    e.data.insert(e.data.end(), row.begin(), row.end());
  }
  return e;
}

Action Action::decode(int id) {
  if (id < 0) throw std::out_of_range("negative action id");
  return Action{static_cast<std::size_t>(id / 2), id % 2 == 0 ? Direction::Up : Direction::Down};
}

double reward(double t0, double t_prev, double t_cur) {
  if (!(t0 > 0)) throw std::invalid_argument("initial time must be positive");
  return (t_prev - t_cur) / t0 * 100.0;
}

Schedule::Schedule(std::size_t n) : order_(n), position_(n) {
  for (std::size_t i = 0; i < n; ++i) order_[i] = position_[i] = i;
}

void Schedule::swap(std::size_t p) {
  std::swap(order_[p], order_[p + 1]);
  position_[order_[p]] = p;
  position_[order_[p + 1]] = p + 1;
}

GameContext::GameContext(Kernel original, AnalysisReport report)
    : original_(std::move(original)), report_(std::move(report)), groups_(original_.num_instructions(), -1) {
  // Runs of LDGSTS in a block whose destinations share registers and step
  // upward in offset are frozen relative to each other.
  int next_group = 0;
  for (const Block& blk : original_.blocks()) {
    std::vector<std::size_t> run;
    const Operand* prev = nullptr;
    auto close = [&] {
      if (run.size() >= 2) {
        for (auto i : run) groups_[i] = next_group;
        ++next_group;
      }
      run.clear();
    };
    for (std::size_t i = blk.begin; i < blk.end; ++i) {
      const Instruction& inst = original_.instruction(i);
      if (inst.opcode != "LDGSTS" || inst.operands.empty()) continue;
      const Operand& dst = inst.operands[0];
      if (!(prev && prev->registers == dst.registers && dst.offset > prev->offset)) close();
      run.push_back(i);
      prev = &dst;
    }
    close();
  }
  prefix_.assign(original_.num_instructions() + 1, 0);
  for (std::size_t i = 0; i < original_.num_instructions(); ++i)
    prefix_[i + 1] = prefix_[i] + original_.instruction(i).control.stall_count;
  rows_.reserve(original_.num_instructions());
  for (std::size_t i = 0; i < original_.num_instructions(); ++i)
    rows_.push_back(embed_instruction(original_.instruction(i), report_));
}

int GameContext::required_separation(std::size_t producer, std::size_t consumer) const {
  // The original schedule is taken as valid, so its own separation is
  // always enough; the table can only lower the bar.
  const int orig = static_cast<int>(prefix_[consumer] - prefix_[producer]);
  const Instruction& prod = original_.instruction(producer);
  if (!is_known_opcode(prod.opcode)) return orig;
  auto min_stall = report_.stall_table.lookup(prod.mnemonic());
  return min_stall ? std::min(*min_stall, orig) : orig;
}

bool GameContext::stall_safe_moving_up(const Schedule& s, std::size_t from, std::size_t to) const {
  // Walk upward from the new position, accumulating stall counts, until the
  // nearest producer of every source register has been checked.
  const std::size_t ord = s.at(from);
  const Instruction& mover = original_.instruction(ord);
  const Block& blk = original_.blocks()[original_.block_of(ord)];
  RegSet unresolved = mover.uses;
  int acc = 0;
  for (std::size_t q = to; q-- > blk.begin && !unresolved.empty();) {
    const std::size_t prod_ord = s.at(q);
    const Instruction& inst = original_.instruction(prod_ord);
    acc += inst.control.stall_count;
    if (!inst.defs.intersects(unresolved)) continue;
    RegSet rest;
    for (Reg r : unresolved) {
      if (!inst.defs.contains(r)) rest.insert(r);
    }
    unresolved = rest;
    if (inst.control.write_barrier) continue;
    if (acc < required_separation(prod_ord, ord)) return false;
  }
  if (unresolved.empty()) return true;
  // Producers outside the block must stay at least as far away as before.
  return acc >= prefix_[ord] - prefix_[blk.begin];
}

bool GameContext::stall_safe_moving_down(const Schedule& s, std::size_t from, std::size_t to) const {
  // Mirror image: a fixed-latency producer moving down gets closer to its
  // consumers below.
  const std::size_t ord = s.at(from);
  const Instruction& mover = original_.instruction(ord);
  if (mover.defs.empty() || mover.control.write_barrier) return true;
  const Block& blk = original_.blocks()[original_.block_of(ord)];
  RegSet live = mover.defs;
  int acc = mover.control.stall_count;
  for (std::size_t q = to + 1; q < blk.end && !live.empty(); ++q) {
    const std::size_t cons_ord = s.at(q);
    const Instruction& inst = original_.instruction(cons_ord);
    if (inst.uses.intersects(live) && acc < required_separation(ord, cons_ord)) return false;
    RegSet rest;
    for (Reg r : live) {
      if (!inst.defs.contains(r)) rest.insert(r);
    }
    live = rest;
    acc += inst.control.stall_count;
  }
  bool read_later = false;
  for (std::size_t q = blk.end; q < s.size() && !live.empty() && !read_later; ++q) {
    const Instruction& inst = original_.instruction(s.at(q));
    read_later = inst.uses.intersects(live);
    RegSet rest;
    for (Reg r : live) {
      if (!inst.defs.contains(r)) rest.insert(r);
    }
    live = rest;
  }
  if (!read_later) return true;
  // Readers past the block end keep at least their original distance.
  const long orig = prefix_[blk.end] - prefix_[ord];
  if (acc >= orig) return true;
  if (!is_known_opcode(mover.opcode)) return false;
  auto min_stall = report_.stall_table.lookup(mover.mnemonic());
  return min_stall && acc >= *min_stall;
}

bool GameContext::swap_allowed(const Schedule& s, std::size_t p) const {
  if (p + 1 >= s.size()) return false;
  const std::size_t upper = s.at(p);
  const std::size_t lower = s.at(p + 1);
  if (original_.block_of(upper) != original_.block_of(lower)) return false;
  const Instruction& u = original_.instruction(upper);
  const Instruction& l = original_.instruction(lower);
  if (is_sync(u) || is_sync(l)) return false;

  // Register dependencies, including write-after-write.
  if (u.defs.intersects(l.uses) || u.uses.intersects(l.defs) || u.defs.intersects(l.defs)) return false;

  // Scoreboard barriers.
  for (int b = 0; b < kNumBarriers; ++b) {
    const bool u_sets = u.control.sets(b);
    const bool l_sets = l.control.sets(b);
    if ((l.control.waits_on(b) && u_sets) || (u.control.waits_on(b) && l_sets) || (u_sets && l_sets)) return false;
  }

  if (groups_[upper] >= 0 && groups_[upper] == groups_[lower]) return false;

  return stall_safe_moving_up(s, p + 1, p) && stall_safe_moving_down(s, p, p + 1);
}

bool GameContext::action_allowed(const Schedule& s, Action a) const {
  if (a.slot >= num_slots()) return false;
  const std::size_t p = s.position_of(slot_instruction(a.slot));
  if (a.direction == Direction::Up) return p > 0 && swap_allowed(s, p - 1);
  return swap_allowed(s, p);
}

std::vector<std::uint8_t> GameContext::compute_mask(const Schedule& s) const {
  std::vector<std::uint8_t> mask(num_actions(), 0);
  for (std::size_t id = 0; id < mask.size(); ++id) mask[id] = action_allowed(s, Action::decode(static_cast<int>(id))) ? 1 : 0;
  return mask;
}

StateEmbedding GameContext::embed(const Schedule& s) const {
  StateEmbedding e;
  e.rows = s.size();
  e.cols = row_width();
  e.data.reserve(e.rows * e.cols);
  for (std::size_t p = 0; p < s.size(); ++p) {
    const auto& row = rows_[s.at(p)];
    e.data.insert(e.data.end(), row.begin(), row.end());
  }
  return e;
}

std::shared_ptr<const GameContext> make_context(const Kernel& k, const StallCountTable& builtin) {
  return std::make_shared<const GameContext>(k, analyze(k, builtin));
}

namespace {

void refresh(const GameContext& ctx, EpisodeState& st) {
  st.memory_indices.resize(ctx.num_slots());
  for (std::size_t slot = 0; slot < ctx.num_slots(); ++slot)
    st.memory_indices[slot] = st.schedule.position_of(ctx.slot_instruction(slot));
  st.mask = ctx.compute_mask(st.schedule);
  st.kernel = ctx.materialize(st.schedule);
  const bool any = std::any_of(st.mask.begin(), st.mask.end(), [](auto m) { return m != 0; });
  st.done = !any || st.step_count >= st.max_steps;
}

}  // namespace

EpisodeState apply_action(const GameContext& ctx, const EpisodeState& state, Action a) {
  if (a.slot >= ctx.num_slots() || !ctx.action_allowed(state.schedule, a))
    throw ContractViolation("action " + std::to_string(a.id()) + " is masked");
  EpisodeState next = state;
  const std::size_t p = next.schedule.position_of(ctx.slot_instruction(a.slot));
  next.schedule.swap(a.direction == Direction::Up ? p - 1 : p);
  ++next.step_count;
  refresh(ctx, next);
  return next;
}

AssemblyGame::AssemblyGame(std::shared_ptr<const GameContext> ctx, Evaluator& evaluator, int max_steps)
    : ctx_(std::move(ctx)), evaluator_(evaluator), max_steps_(max_steps) {
  if (max_steps_ <= 0) throw std::invalid_argument("episode length must be positive");
  best_ = Schedule(ctx_->original().num_instructions());
}

const EpisodeState& AssemblyGame::reset() {
  if (!t0_) {
    t0_ = evaluator_.measure(ctx_->original());
    best_time_ = *t0_;
  }
  state_ = EpisodeState{};
  state_.schedule = Schedule(ctx_->original().num_instructions());
  state_.max_steps = max_steps_;
  state_.t0 = state_.t_prev = state_.t_cur = *t0_;
  refresh(*ctx_, state_);
  trace_.clear();
  return state_;
}

StepResult AssemblyGame::step(int action) {
  if (state_.done) throw ContractViolation("step on a finished episode");
  if (action < 0 || static_cast<std::size_t>(action) >= state_.mask.size() || !state_.mask[static_cast<std::size_t>(action)])
    throw ContractViolation("action " + std::to_string(action) + " is masked");
  const Action a = Action::decode(action);
  EpisodeState next = apply_action(*ctx_, state_, a);
  double t = 0;
  try {
    t = evaluator_.measure(next.kernel);
  } catch (const EvaluatorError&) {
    state_.done = true;
    throw;
  }
  next.t_prev = state_.t_cur;
  next.t_cur = t;
  const double r = reward(next.t0, next.t_prev, next.t_cur);
  state_ = std::move(next);
  if (t < best_time_) {
    best_time_ = t;
    best_ = state_.schedule;
  }
  TraceRecord rec;
  rec.step = state_.step_count;
  rec.action = action;
  rec.slot = a.slot;
  rec.direction = a.direction;
  rec.line = ctx_->original().instruction(ctx_->slot_instruction(a.slot)).line_index + 1;
  rec.reward = r;
  rec.t_cur = t;
  trace_.push_back(rec);
  return StepResult{r, state_.done};
}

void annotate_lingering(std::vector<TraceRecord>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    const auto& prev = trace[i - 1];
    auto& cur = trace[i];
    cur.lingering = cur.slot == prev.slot && cur.direction != prev.direction;
    if (cur.lingering) trace[i - 1].lingering = true;
  }
}

std::string trace_jsonl(const std::vector<TraceRecord>& trace) {
  std::string out;
  for (const auto& r : trace) {
    nlohmann::json j = {{"step", r.step},
                        {"action", r.action},
                        {"slot", r.slot},
                        {"direction", r.direction == Direction::Up ? "up" : "down"},
                        {"line", r.line},
                        {"reward", r.reward},
                        {"t_cur", r.t_cur},
                        {"lingering", r.lingering}};
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace sassopt

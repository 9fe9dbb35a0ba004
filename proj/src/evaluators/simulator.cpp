#include <algorithm>
#include <array>
#include <map>
#include <sstream>

#include "sassopt/evaluators.hpp"

namespace sassopt {

LatencyMap default_variable_latencies() {
  return {{"LDG", 200}, {"LDGSTS", 250}, {"LDS", 30}, {"STG", 150}, {"STS", 20}};
}

void EvaluatorConfig::validate() const {
  if (warmup_iters <= 0 || measure_iters <= 0) throw std::invalid_argument("warmup_iters and measure_iters must be positive");
}

namespace {

int variable_latency(const Instruction& inst, const EvaluatorConfig& cfg) {
  if (auto it = cfg.variable_latency_map.find(inst.mnemonic()); it != cfg.variable_latency_map.end()) return it->second;
  if (auto it = cfg.variable_latency_map.find(inst.opcode); it != cfg.variable_latency_map.end()) return it->second;
  return cfg.default_variable_latency;
}

}  // namespace

long simulate(const Kernel& k, const EvaluatorConfig& cfg, SimTrace* trace) {
  std::array<long, kNumBarriers> ready{};
  std::array<bool, kNumBarriers> ever_set{};

  // Fixed-latency results in flight, measured on the stall-count clock.
  struct Pending {
    std::size_t producer;
    long ready_at;
    int latency;
    long issued_at;
  };
  std::map<Reg, Pending> pending;
  if (trace) *trace = SimTrace{};

  long t = 0;
  long stall_clock = 0;
  long total = 0;
  for (std::size_t i = 0; i < k.num_instructions(); ++i) {
    const Instruction& inst = k.instruction(i);
    const ControlCode& cc = inst.control;

    SimRecord rec;
    rec.index = i;
    long issue = t;
    for (int b = 0; b < kNumBarriers; ++b) {
      if (!cc.waits_on(b)) continue;
      if (!ever_set[static_cast<std::size_t>(b)])
        throw SimulationError("instruction " + std::to_string(i) + " (" + inst.mnemonic() + ") waits on barrier " +
                              std::to_string(b) + " which is never set");
      issue = std::max(issue, ready[static_cast<std::size_t>(b)]);
      rec.waited_barriers.push_back(b);
    }
    rec.issue = issue;
    rec.barrier_stall = issue - t;

    if (trace) {
      for (Reg r : inst.uses) {
        auto it = pending.find(r);
        if (it != pending.end() && stall_clock < it->second.ready_at) {
          trace->hazards.push_back(Hazard{it->second.producer, i, r, static_cast<int>(stall_clock - it->second.issued_at),
                                          it->second.latency});
        }
      }
    }
    for (Reg r : inst.defs) pending.erase(r);
    if (is_fixed_latency(inst)) {
      if (auto it = cfg.fixed_latency_map.find(inst.mnemonic()); it != cfg.fixed_latency_map.end()) {
        for (Reg r : inst.defs) pending[r] = Pending{i, stall_clock + it->second, it->second, stall_clock};
      }
    }

    const long dispatch = issue + cc.stall_count;
    long completion = issue + std::max(cc.stall_count, 1);
    if (cc.write_barrier) {
      const auto w = static_cast<std::size_t>(*cc.write_barrier);
      const long done = dispatch + variable_latency(inst, cfg);
      ready[w] = std::max(ready[w], done);
      ever_set[w] = true;
      completion = std::max(completion, done);
    }
    if (cc.read_barrier) {
      const auto r = static_cast<std::size_t>(*cc.read_barrier);
      ready[r] = std::max(ready[r], dispatch + cfg.read_barrier_latency);
      ever_set[r] = true;
    }
    rec.completion = completion;
    total = std::max(total, completion);
    t = issue + std::max(cc.stall_count, 1);
    stall_clock += cc.stall_count;
    if (trace) trace->records.push_back(std::move(rec));
  }
  if (trace) trace->total_cycles = total;
  return total;
}

std::string dump_trace(const SimTrace& trace) {
  std::ostringstream os;
  os << "# index issue completion waited\n";
  for (const auto& r : trace.records) {
    os << r.index << ' ' << r.issue << ' ' << r.completion << ' ';
    if (r.waited_barriers.empty()) os << '-';
    for (std::size_t i = 0; i < r.waited_barriers.size(); ++i) os << (i ? "," : "") << 'B' << r.waited_barriers[i];
    os << '\n';
  }
  for (const auto& h : trace.hazards)
    os << "# hazard " << to_string(h.reg) << " producer " << h.producer << " consumer " << h.consumer << " separation "
       << h.separation << " < " << h.required << '\n';
  os << "# total " << trace.total_cycles << '\n';
  return os.str();
}

SimulatorEvaluator::SimulatorEvaluator(EvaluatorConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

double SimulatorEvaluator::measure(const Kernel& k) { return static_cast<double>(simulate(k, cfg_)); }

}  // namespace sassopt

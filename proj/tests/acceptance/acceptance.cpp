// Prints one PASS/FAIL line per acceptance criterion; exits nonzero on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sassopt/cli.hpp"
#include "sassopt/environment.hpp"
#include "sassopt/microbench.hpp"
#include "sassopt/rl.hpp"
#include "support.hpp"

using namespace sassopt;
using namespace sassopt::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& fn) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s  %2d %-34s %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
              seconds_since(t0));
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

PPOConfig default_config(std::uint64_t seed = 7) {
  PPOConfig cfg;
  cfg.total_steps = 2000;
  cfg.seed = seed;
  return cfg;
}

Outcome roundtrip() {
  const auto t0 = Clock::now();
  std::size_t ok = 0, total = 0;
  bool has_ldgsts = false;
  std::string bad;
  for (const auto& p : corpus_files()) {
    ++total;
    const Kernel k = parse_kernel(read_file(p));
    const Kernel k2 = parse_kernel(serialize_kernel(k));
    if (k == k2) ++ok;
    else bad += " " + p.filename().string();
    for (std::size_t i = 0; i < k.num_instructions(); ++i)
      if (k.instruction(i).opcode == "LDGSTS" && k.instruction(i).has_modifier("128")) has_ldgsts = true;
  }
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << ok << "/" << total << " files, ldgsts runs " << (has_ldgsts ? "present" : "missing") << bad;
  return {ok == total && total >= 10 && has_ldgsts && secs < 1.0, os.str() + fmt(", %.3fs < 1s", secs)};
}

Outcome adjacency() {
  int paired = 0, involutions = 0, rz_rejected = 0;
  for (int n = 0; n <= 254; ++n) {
    const int a = adjacent_register(n);
    if (a != n && a / 2 == n / 2) ++paired;
    if (a == kZeroRegister) {
      try {
        adjacent_register(a);
      } catch (const std::invalid_argument&) {
        ++rz_rejected;
      }
    } else if (adjacent_register(a) == n) {
      ++involutions;
    }
  }
  std::ostringstream os;
  os << paired << "/255 paired 2k<->2k+1, " << involutions << "/254 involutive, pair of R254 is RZ and "
     << (rz_rejected == 1 ? "rejected" : "accepted");
  return {paired == 255 && involutions == 254 && rz_rejected == 1, os.str()};
}

Outcome table_fidelity() {
  const std::map<std::string, int> expected = {
      {"IADD3", 4}, {"IMAD.IADD", 4}, {"IADD3.X", 4}, {"MOV", 4},       {"IABS", 4},
      {"IMAD", 4},  {"FADD", 4},      {"HADD2", 4},   {"IMNMX", 4},     {"SEL", 4},
      {"LEA", 4},   {"IMAD.WIDE", 5}, {"IMAD.WIDE.U32", 5}};
  const auto t = StallCountTable::builtin();
  std::map<std::string, int> got;
  for (const auto& [m, e] : t.entries()) got[m] = e.cycles;
  return {got == expected, std::to_string(got.size()) + " entries, expected " + std::to_string(expected.size())};
}

Outcome inference_safety() {
  const auto t0 = Clock::now();
  std::size_t observations = 0, violations = 0;
  std::string first_bad;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const SynthKernel sk = random_kernel(seed);
    const Kernel k = parse_kernel(sk.text);
    const StallInference inf = infer_stall_counts(k, StallCountTable{});
    for (const auto& [m, v] : inf.observed) {
      auto it = sk.latency.find(m);
      if (it == sk.latency.end()) continue;
      ++observations;
      if (v < it->second) {
        ++violations;
        if (first_bad.empty()) first_bad = " first: seed " + std::to_string(seed) + " " + m;
      }
    }
  }
  const Kernel x = load_corpus("iadd3x_infer.sass");
  const StallInference inf = infer_stall_counts(x, StallCountTable::builtin());
  const auto it = inf.observed.find("IADD3.X");
  const int inferred = it == inf.observed.end() ? -1 : it->second;
  EvaluatorConfig cfg;
  cfg.fixed_latency_map = {{"IADD3", 4}, {"IADD3.X", 4}};
  SimTrace trace;
  simulate(x, cfg, &trace);
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << observations << " inferred values, " << violations << " below truth" << first_bad << "; IADD3.X inferred "
     << inferred << " (truth 4, builtin " << StallCountTable::builtin().lookup("IADD3.X").value_or(-1) << ")";
  return {violations == 0 && observations > 0 && inferred == 5 && trace.hazards.empty() && secs < 10.0,
          os.str() + fmt(", %.2fs < 10s", secs)};
}

Outcome masking_soundness() {
  const auto t0 = Clock::now();
  std::vector<std::pair<std::shared_ptr<const GameContext>, SynthKernel>> pool;
  for (std::uint64_t seed = 1; pool.size() < 200 && seed < 5000; ++seed) {
    SynthKernel sk = random_kernel(seed);
    auto ctx = make_context(parse_kernel(sk.text));
    if (ctx->num_actions() > 0) pool.emplace_back(ctx, std::move(sk));
  }
  std::mt19937_64 rng(2024);
  std::size_t visited = 0, rejected = 0, hazards = 0, rollouts = 0, moves = 0;
  std::string first_bad;
  for (; rollouts < 10000; ++rollouts) {
    const auto& [ctx, sk] = pool[rollouts % pool.size()];
    EvaluatorConfig cfg;
    for (const auto& [m, l] : sk.latency) cfg.fixed_latency_map[m] = l;
    Schedule s(ctx->original().num_instructions());
    for (int step = 0; step < 32; ++step) {
      const auto mask = ctx->compute_mask(s);
      std::vector<int> legal;
      for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) legal.push_back(static_cast<int>(i));
      if (legal.empty()) break;
      const Action a = Action::decode(legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)]);
      const std::size_t p = s.position_of(ctx->slot_instruction(a.slot));
      s.swap(a.direction == Direction::Up ? p - 1 : p);
      ++moves;
      const Kernel mutated = ctx->materialize(s);
      ++visited;
      const DataflowVerdict v = verify_dataflow(ctx->original(), mutated, ctx->report().stall_table);
      if (!v) {
        ++rejected;
        if (first_bad.empty()) first_bad = " first: " + std::string(to_string(v.violation)) + " " + v.detail;
      }
      SimTrace trace;
      simulate(mutated, cfg, &trace);
      hazards += trace.hazards.size();
    }
  }
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << rollouts << " rollouts on " << pool.size() << " kernels, " << visited << " schedules, " << rejected
     << " rejected, " << hazards << " ground-truth hazards" << first_bad;
  return {rejected == 0 && hazards == 0 && moves > 0 && secs < 120.0, os.str() + fmt(", %.1fs < 120s", secs)};
}

Outcome mask_conservativeness() {
  std::size_t kernels = 0, states = 0, allowed = 0, bad = 0, masked_but_valid = 0;
  std::string first_bad;
  for (const auto& p : corpus_files()) {
    const Kernel k = parse_kernel(read_file(p));
    if (k.num_instructions() > 12) continue;
    ++kernels;
    auto ctx = make_context(k);
    for (const Schedule& s : reachable_schedules(*ctx)) {
      ++states;
      for (std::size_t pos = 0; pos + 1 < s.size(); ++pos) {
        Schedule next = s;
        next.swap(pos);
        const bool oracle = static_cast<bool>(verify_permutation(k, next.order(), ctx->report().stall_table));
        if (!ctx->swap_allowed(s, pos)) {
          if (oracle) ++masked_but_valid;
          continue;
        }
        ++allowed;
        if (!oracle) {
          ++bad;
          if (first_bad.empty()) first_bad = " first: " + p.filename().string() + " pos " + std::to_string(pos);
        }
      }
    }
  }
  std::ostringstream os;
  os << kernels << " kernels, " << states << " schedules, " << allowed << " unmasked swaps, " << bad
     << " oracle-rejected, " << masked_but_valid << " masked-but-valid" << first_bad;
  return {bad == 0 && kernels > 0 && allowed > 0, os.str()};
}

Outcome reward_contract() {
  const double a = reward(100, 100, 90);
  const double b = reward(100, 90, 95);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(50, 150);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double t0 = d(rng);
    double prev = t0, sum = 0, cur = t0;
    for (int i = 0; i < 32; ++i) {
      cur = d(rng);
      sum += reward(t0, prev, cur);
      prev = cur;
    }
    const double expect = (t0 - cur) / t0 * 100.0;
    worst = std::max(worst, std::abs(sum - expect));
  }
  std::ostringstream os;
  os << "(100,100,90)=" << a << " (100,90,95)=" << b << " telescoping max err " << worst;
  return {a == 10.0 && b == -5.0 && worst < 1e-11, os.str()};
}

Outcome microbench_recovery() {
  std::size_t checks = 0, exact = 0;
  std::string first_bad;
  for (int truth = 1; truth <= 15; ++truth) {
    EvaluatorConfig cfg;
    for (const auto& op : probe_opcodes()) cfg.fixed_latency_map[op] = truth;
    const ProbeOracle oracle = simulator_oracle(cfg);
    for (const auto& op : probe_opcodes()) {
      ++checks;
      const int got = find_min_stall(op, oracle);
      if (got == truth) ++exact;
      else if (first_bad.empty()) first_bad = " first: " + op + " truth " + std::to_string(truth) + " got " + std::to_string(got);
    }
  }
  std::ostringstream os;
  os << exact << "/" << checks << " (opcode, latency 1..15) recovered exactly" << first_bad;
  return {exact == checks, os.str()};
}

struct SmallRun {
  double optimum = 0;
  std::size_t reachable = 0;
  TrainResult result;
  double secs = 0;
};

SmallRun& small_run() {
  static SmallRun run = [] {
    SmallRun r;
    auto ctx = make_context(load_corpus("one_ldg.sass"));
    SimulatorEvaluator ev;
    const Optimum opt = brute_force_optimum(*ctx, ev);
    r.optimum = opt.time;
    r.reachable = opt.explored;
    const auto t0 = Clock::now();
    r.result = train(ctx, ev, default_config(), "one_ldg");
    r.secs = seconds_since(t0);
    return r;
  }();
  return run;
}

Outcome end_to_end() {
  const SmallRun& r = small_run();
  auto ctx = make_context(load_corpus("medium.sass"));
  SimulatorEvaluator ev;
  const Optimum opt = brute_force_optimum(*ctx, ev);
  // The optimum sits 47 moves from the original schedule.
  PPOConfig cfg = default_config();
  cfg.episode_length = 96;
  cfg.total_steps = 10000;
  const auto t0 = Clock::now();
  const TrainResult medium = train(ctx, ev, cfg, "medium");
  const double msecs = seconds_since(t0);
  const double gap = (medium.best_time - opt.time) / opt.time;
  std::ostringstream os;
  os << "one_ldg best " << r.result.best_time << " vs optimum " << r.optimum << " (" << r.reachable << " schedules, "
     << r.result.steps << " steps, " << fmt("%.1fs", r.secs) << "); medium best " << medium.best_time << " vs optimum "
     << opt.time << " (" << opt.explored << " schedules, initial " << medium.initial_time << ", gap "
     << fmt("%.2f%%", 100 * gap) << ", " << cfg.total_steps << " steps of " << cfg.episode_length << ", " << fmt("%.1fs", msecs) << ")";
  return {r.result.best_time == r.optimum && r.result.steps <= 2000 && r.secs < 300 && gap <= 0.05 &&
              !r.result.aborted && !medium.aborted,
          os.str()};
}

Outcome robustness() {
  const SmallRun& base = small_run();
  auto ctx = make_context(load_corpus("one_ldg.sass"));
  struct Variant {
    const char* name;
    std::function<void(PPOConfig&)> apply;
  };
  const std::vector<Variant> variants = {
      {"lr x0.5", [](PPOConfig& c) { c.learning_rate *= 0.5; }},
      {"lr x2", [](PPOConfig& c) { c.learning_rate *= 2; }},
      {"batch x0.5", [](PPOConfig& c) { c.rollout_length /= 2; c.minibatch_size /= 2; }},
      {"batch x2", [](PPOConfig& c) { c.rollout_length *= 2; c.minibatch_size *= 2; }},
  };
  bool all = true;
  std::ostringstream os;
  for (const auto& v : variants) {
    PPOConfig cfg = default_config();
    v.apply(cfg);
    SimulatorEvaluator ev;
    const TrainResult r = train(ctx, ev, cfg, "one_ldg");
    const bool ok = r.best_time == base.optimum;
    all = all && ok;
    os << v.name << "=" << r.best_time << (ok ? " " : "(miss) ");
  }
  os << "optimum " << base.optimum;
  return {all, os.str()};
}

Outcome diagnostics_trend() {
  const auto& log = small_run().result.log;
  std::vector<double> kl, ent;
  for (const auto& r : log) {
    kl.push_back(r.approx_kl);
    ent.push_back(r.entropy);
  }
  if (log.size() < 10) return {false, "only " + std::to_string(log.size()) + " log records"};
  const std::size_t w = std::max<std::size_t>(1, log.size() / 10);
  auto mean = [](const std::vector<double>& v, std::size_t b, std::size_t e) {
    return std::accumulate(v.begin() + static_cast<long>(b), v.begin() + static_cast<long>(e), 0.0) /
           static_cast<double>(e - b);
  };
  auto head_tail = [&](const std::vector<double>& raw) {
    const auto y = sassopt::smooth(raw, 3);
    return std::pair{mean(y, 0, w), mean(y, y.size() - w, y.size())};
  };
  const auto [kl0, kl1] = head_tail(kl);
  const auto [e0, e1] = head_tail(ent);
  std::ostringstream os;
  os << log.size() << " updates, approx-KL " << kl0 << " -> " << kl1 << ", entropy " << e0 << " -> " << e1;
  return {kl1 < kl0 && e1 < e0, os.str()};
}

Outcome determinism() {
  auto ctx = make_context(load_corpus("one_ldg.sass"));
  std::vector<std::string> ck, sched, traces;
  for (int run = 0; run < 2; ++run) {
    SimulatorEvaluator ev;
    const TrainResult r = train(ctx, ev, default_config(), "one_ldg");
    ck.push_back(checkpoint_json(r.checkpoint));
    sched.push_back(serialize_kernel(r.best_kernel));
    SimulatorEvaluator ev2;
    traces.push_back(trace_jsonl(replay(ctx, ev2, r.checkpoint, 7).trace));
  }
  const PolicyCheckpoint reloaded = parse_checkpoint(ck[0]);
  SimulatorEvaluator ev3;
  const std::string trace_reloaded = trace_jsonl(replay(ctx, ev3, reloaded, 7).trace);
  const std::hash<std::string> h;
  const bool same_ck = h(ck[0]) == h(ck[1]) && ck[0] == ck[1];
  const bool same_sched = sched[0] == sched[1];
  const bool same_trace = traces[0] == traces[1] && traces[0] == trace_reloaded && !traces[0].empty();
  std::ostringstream os;
  os << "schedule " << (same_sched ? "identical" : "differs") << ", checkpoint hash "
     << (same_ck ? "identical" : "differs") << ", replay trace " << (same_trace ? "identical" : "differs");
  return {same_ck && same_sched && same_trace, os.str()};
}

}  // namespace

int main() {
  report(1, "parser round-trip", roundtrip);
  report(2, "register pairing 0..254", adjacency);
  report(3, "builtin stall table", table_fidelity);
  report(4, "inference safety", inference_safety);
  report(5, "masking soundness", masking_soundness);
  report(6, "mask conservativeness", mask_conservativeness);
  report(7, "reward contract", reward_contract);
  report(8, "microbench recovery", microbench_recovery);
  report(9, "optimization end-to-end", end_to_end);
  report(10, "robustness sweep", robustness);
  report(11, "training diagnostics trend", diagnostics_trend);
  report(12, "determinism and replay", determinism);
  std::printf("%s: %d failing\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}

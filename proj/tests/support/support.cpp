#include "support.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <limits>
#include <deque>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace sassopt::testing {

namespace fs = std::filesystem;

fs::path corpus_dir() { return SASSOPT_CORPUS_DIR; }
fs::path data_dir() { return SASSOPT_TEST_DATA_DIR; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<fs::path> corpus_files() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(corpus_dir()))
    if (e.path().extension() == ".sass") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

Kernel load_corpus(const std::string& name) { return parse_kernel(read_file(corpus_dir() / name)); }

namespace {

struct Line {
  bool label = false;
  std::string text;  // label text or instruction body
  ControlCode cc;
};

class Generator {
 public:
  Generator(std::uint64_t seed, const SynthOptions& opt) : rng_(seed), opt_(opt) {}

  SynthKernel run() {
    for (const char* m : {"IADD3", "IMAD", "MOV", "LEA", "LOP3.LUT", "SHF.L.U32", "FADD", "IMAD.WIDE", "ISETP.GE.AND",
                          "ULDC.64", "IMAD.SHL.U32"})
      out_.latency[m] = pick(opt_.min_latency, opt_.max_latency);
    // Clamp to builtin entries.
    const StallCountTable builtin = StallCountTable::builtin();
    for (const auto& [m, e] : builtin.entries()) {
      auto it = out_.latency.find(m);
      if (it != out_.latency.end()) it->second = std::min(it->second, e.cycles);
    }

    const int n = pick(opt_.min_instructions, opt_.max_instructions);
    const int blocks = pick(1, opt_.max_blocks);
    const int per_block = std::max(2, n / blocks);
    emit_alu("ULDC.64 UR4, c[0x0][0x118]", "ULDC.64", {}, {});
    emit_alu("MOV R60, 0x100", "MOV", {60}, {});
    for (int b = 0; b < blocks; ++b) {
      if (b > 0) start_block();
      in_block_.clear();
      for (int i = 0; i < per_block; ++i) step();
    }
    emit_plain("EXIT", {}, {});
    fix_stalls();
    std::string text;
    for (const auto& l : lines_) text += l.label ? l.text + "\n" : to_string(l.cc) + " " + l.text + " ;\n";
    out_.text = text;
    return out_;
  }

 private:
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool chance(double p) { return std::uniform_real_distribution<double>(0, 1)(rng_) < p; }
  std::string r(int n) { return "R" + std::to_string(n); }

  void start_block() {
    if (chance(0.5)) {
      lines_.push_back({true, ".L_x_" + std::to_string(label_++) + ":", {}});
    } else {
      emit_plain(chance(0.5) ? "BAR.SYNC 0x0" : "DEPBAR.LE SB0, 0x0", {}, {});
    }
  }

  // Waits on any barrier still guarding a register this instruction touches.
  void guard_barriers(ControlCode& cc, const std::vector<int>& regs) {
    for (int b = 0; b < kNumBarriers; ++b) {
      auto& pending = pending_[static_cast<std::size_t>(b)];
      bool hit = std::any_of(regs.begin(), regs.end(), [&](int x) { return pending.count(x) > 0; });
      if (hit) {
        cc.wait_mask[static_cast<std::size_t>(b)] = true;
        pending.clear();
      }
    }
  }

  int free_barrier(ControlCode& cc) {
    for (int b = 0; b < kNumBarriers; ++b)
      if (pending_[static_cast<std::size_t>(b)].empty() && !cc.wait_mask[static_cast<std::size_t>(b)]) return b;
    const int b = pick(0, kNumBarriers - 1);
    cc.wait_mask[static_cast<std::size_t>(b)] = true;
    pending_[static_cast<std::size_t>(b)].clear();
    return b;
  }

  void emit_plain(const std::string& body, const std::vector<int>& defs, const std::vector<int>& uses) {
    ControlCode cc;
    cc.stall_count = pick(1, 6);
    std::vector<int> all = defs;
    all.insert(all.end(), uses.begin(), uses.end());
    guard_barriers(cc, all);
    lines_.push_back({false, body, cc});
  }

  void emit_alu(const std::string& body, const std::string&, const std::vector<int>& defs, const std::vector<int>& uses) {
    emit_plain(body, defs, uses);
    for (int d : defs) in_block_.insert(d);
  }

  int any_reg() { return pick(2, 31); }
  int defined_reg() {
    if (in_block_.empty() || chance(0.2)) return 0;
    auto it = in_block_.begin();
    std::advance(it, pick(0, static_cast<int>(in_block_.size()) - 1));
    return *it;
  }

  // Even register whose pair was defined in this block; emits one if needed.
  int address_pair() {
    std::vector<int> pairs;
    for (int x : in_block_)
      if (x % 2 == 0 && in_block_.count(x + 1)) pairs.push_back(x);
    if (!pairs.empty() && chance(0.7)) return pairs[static_cast<std::size_t>(pick(0, static_cast<int>(pairs.size()) - 1))];
    const int d = 2 * pick(16, 27);
    const int src = defined_reg();
    emit_alu("IMAD.WIDE " + r(d) + ", " + r(src) + ", 0x4, " + r(40) , "IMAD.WIDE", {d, d + 1}, {src, 40, 41});
    return d;
  }

  std::string guard() {
    if (!chance(0.15)) return "";
    return chance(0.5) ? "@P0 " : "@!P1 ";
  }

  void step() {
    if (chance(opt_.memory_fraction)) {
      memory_op();
      return;
    }
    const int d = any_reg();
    const int a = defined_reg();
    const int b = defined_reg();
    switch (pick(0, opt_.unknown_opcodes ? 8 : 7)) {
      case 0: emit_alu(guard() + "IADD3 " + r(d) + ", " + r(a) + ", " + r(b) + ", RZ", "IADD3", {d}, {a, b}); break;
      case 1: emit_alu("IMAD " + r(d) + ", " + r(a) + ", " + r(b) + ", RZ", "IMAD", {d}, {a, b}); break;
      case 2: emit_alu("MOV " + r(d) + ", 0x" + std::to_string(pick(1, 9)), "MOV", {d}, {}); break;
      case 3: emit_alu("LEA " + r(d) + ", " + r(a) + ", " + r(b) + ", 0x2", "LEA", {d}, {a, b}); break;
      case 4: emit_alu("LOP3.LUT " + r(d) + ", " + r(a) + ", " + r(b) + ", RZ, 0xc0, !PT", "LOP3.LUT", {d}, {a, b}); break;
      case 5: emit_alu("SHF.L.U32 " + r(d) + ", " + r(a) + ", 0x2, RZ", "SHF.L.U32", {d}, {a}); break;
      case 6: emit_alu(guard() + "FADD " + r(d) + ", " + r(a) + ", " + r(b), "FADD", {d}, {a, b}); break;
      case 7: emit_alu("ISETP.GE.AND P0, PT, " + r(a) + ", " + r(b) + ", PT", "ISETP.GE.AND", {}, {a, b}); break;
      default: emit_alu("FROBNICATE " + r(d) + ", " + r(a), "", {d}, {a}); break;
    }
  }

  void memory_op() {
    const int kind = pick(0, opt_.ldgsts_runs ? 4 : 3);
    if (kind == 4) {
      const int len = pick(2, 3);
      for (int i = 0; i < len; ++i) {
        const int a = address_pair();
        char off[16];
        std::snprintf(off, sizeof off, "0x%x", 0x4000 + 0x800 * i);
        emit_plain("LDGSTS.E.BYPASS.128 [R60+" + std::string(off) + "], desc[UR4][" + r(a) + ".64]", {}, {60, a, a + 1});
      }
      return;
    }
    const int a = address_pair();
    ControlCode cc;
    cc.stall_count = pick(1, 4);
    std::string body;
    std::vector<int> defs, uses{a, a + 1};
    if (kind == 0 || kind == 2) {
      const int d = any_reg();
      defs = {d};
      body = (kind == 0 ? "LDG.E " + r(d) + ", [" + r(a) + ".64]" : "LDS " + r(d) + ", [" + r(a) + "+0x10]");
      if (kind == 2) uses = {a};
    } else {
      const int s = defined_reg();
      uses.push_back(s);
      body = kind == 1 ? "STG.E [" + r(a) + ".64], " + r(s) : "STS [" + r(a) + "], " + r(s);
      if (kind == 3) uses = {a, s};
    }
    std::vector<int> all = defs;
    all.insert(all.end(), uses.begin(), uses.end());
    guard_barriers(cc, all);
    if (!defs.empty()) {
      const int b = free_barrier(cc);
      cc.write_barrier = b;
      pending_[static_cast<std::size_t>(b)].insert(defs.begin(), defs.end());
      for (int d : defs) in_block_.erase(d);
    } else if (chance(0.4)) {
      const int b = free_barrier(cc);
      cc.read_barrier = b;
      pending_[static_cast<std::size_t>(b)].insert(uses.begin(), uses.end());
    }
    lines_.push_back({false, body, cc});
  }

  // Raises stall counts until every fixed-latency producer is far enough
  // from each of its readers.
  void fix_stalls() {
    std::string text;
    std::vector<std::size_t> inst_line;
    for (std::size_t i = 0; i < lines_.size(); ++i) {
      if (lines_[i].label) continue;
      inst_line.push_back(i);
      text += to_string(lines_[i].cc) + " " + lines_[i].text + " ;\n";
    }
    const Kernel k = parse_kernel(text);
    const std::size_t n = k.num_instructions();
    auto stall = [&](std::size_t i) -> int& { return lines_[inst_line[i]].cc.stall_count; };
    for (std::size_t c = 0; c < n; ++c) {
      for (Reg reg : k.instruction(c).uses) {
        for (std::size_t p = c; p-- > 0;) {
          const Instruction& prod = k.instruction(p);
          if (!prod.defs.contains(reg)) continue;
          if (prod.control.write_barrier) break;
          auto it = out_.latency.find(prod.mnemonic());
          const int need = it == out_.latency.end() ? 0 : it->second;
          int sep = 0;
          for (std::size_t q = p; q < c; ++q) sep += stall(q);
          for (std::size_t q = c; sep < need && q-- > p;) {
            const int add = std::min(need - sep, kMaxStall - stall(q));
            stall(q) += add;
            sep += add;
          }
          break;
        }
      }
    }
  }

  static constexpr int kMaxStall = 15;
  std::mt19937_64 rng_;
  SynthOptions opt_;
  SynthKernel out_;
  std::vector<Line> lines_;
  std::set<int> in_block_;
  std::array<std::set<int>, kNumBarriers> pending_{};
  int label_ = 0;
};

}  // namespace

SynthKernel random_kernel(std::uint64_t seed, const SynthOptions& opt) { return Generator(seed, opt).run(); }

std::vector<Schedule> reachable_schedules(const GameContext& ctx, std::size_t limit) {
  std::vector<Schedule> out;
  std::set<std::vector<std::size_t>> seen;
  std::deque<Schedule> queue;
  Schedule start(ctx.original().num_instructions());
  queue.push_back(start);
  seen.insert(start.order());
  while (!queue.empty() && out.size() < limit) {
    Schedule s = queue.front();
    queue.pop_front();
    out.push_back(s);
    const auto mask = ctx.compute_mask(s);
    for (std::size_t id = 0; id < mask.size(); ++id) {
      if (!mask[id]) continue;
      const Action a = Action::decode(static_cast<int>(id));
      const std::size_t p = s.position_of(ctx.slot_instruction(a.slot));
      Schedule next = s;
      next.swap(a.direction == Direction::Up ? p - 1 : p);
      if (seen.insert(next.order()).second) queue.push_back(std::move(next));
    }
  }
  return out;
}

Optimum brute_force_optimum(const GameContext& ctx, Evaluator& evaluator, std::size_t limit) {
  Optimum best;
  best.time = std::numeric_limits<double>::infinity();
  const auto all = reachable_schedules(ctx, limit);
  best.explored = all.size();
  for (const auto& s : all) {
    const double t = evaluator.measure(ctx.materialize(s));
    if (t < best.time) {
      best.time = t;
      best.schedules.clear();
    }
    if (t == best.time) best.schedules.push_back(s);
  }
  return best;
}

}  // namespace sassopt::testing

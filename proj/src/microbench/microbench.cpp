#include "sassopt/microbench.hpp"

#include <algorithm>
#include <map>

namespace sassopt {
namespace {

constexpr const char* kStore32 = "[B------:R-:W-:-:S04] STG.E desc[UR4][R4.64], R15 ;";
constexpr const char* kStore64 = "[B------:R-:W-:-:S04] STG.E.64 desc[UR4][R4.64], R14 ;";

const std::map<std::string, ProbeTemplate>& templates() {
  static const std::map<std::string, ProbeTemplate> t = {
      {"MOV", {"MOV R15, 0x1", kStore32}},
      {"IADD3", {"IADD3 R15, R2, 0x1, RZ", kStore32}},
      {"IADD3.X", {"IADD3.X R15, R2, 0x1, RZ, P0, !PT", kStore32}},
      {"IMAD.IADD", {"IMAD.IADD R15, R2, 0x1, R3", kStore32}},
      {"IABS", {"IABS R15, R2", kStore32}},
      {"IMAD", {"IMAD R15, R2, R3, RZ", kStore32}},
      {"FADD", {"FADD R15, R2, 1", kStore32}},
      {"HADD2", {"HADD2 R15, R2, R3", kStore32}},
      {"IMNMX", {"IMNMX R15, R2, R3, PT", kStore32}},
      {"SEL", {"SEL R15, R2, R3, P0", kStore32}},
      {"LEA", {"LEA R15, R2, R3, 0x2", kStore32}},
      {"LOP3.LUT", {"LOP3.LUT R15, R2, R3, RZ, 0xc0, !PT", kStore32}},
      {"SHF.L.U32", {"SHF.L.U32 R15, R2, 0x2, RZ", kStore32}},
      {"IMAD.WIDE", {"IMAD.WIDE R14, R2, 0x4, R6", kStore64}},
      {"IMAD.WIDE.U32", {"IMAD.WIDE.U32 R14, R2, 0x4, R6", kStore64}},
  };
  return t;
}

std::string control(int stall) {
  ControlCode cc;
  cc.stall_count = stall;
  return to_string(cc);
}

}  // namespace

std::vector<std::string> probe_opcodes() {
  std::vector<std::string> out;
  for (const auto& [name, _] : templates()) out.push_back(name);
  return out;
}

const ProbeTemplate& probe_template(const std::string& opcode) {
  auto it = templates().find(opcode);
  if (it == templates().end()) throw MicrobenchError("no probe template for opcode '" + opcode + "'");
  return it->second;
}

Kernel generate_probe(const ProbeSpec& spec) {
  const ProbeTemplate& t = probe_template(spec.opcode);
  if (spec.candidate_stall < 0) throw MicrobenchError("negative candidate stall");
  if (spec.max_target_stall < 0 || spec.max_target_stall > kMaxEncodableStall)
    throw MicrobenchError("max_target_stall must be in 0..15");
  const int own = std::min(spec.candidate_stall, spec.max_target_stall);
  std::string text = control(own) + " " + t.target + " ;\n";
  for (int rest = spec.candidate_stall - own; rest > 0;) {
    const int s = std::min(rest, kMaxEncodableStall);
    text += control(s) + " NOP ;\n";
    rest -= s;
  }
  text += (spec.consumer.empty() ? t.consumer : spec.consumer) + "\n";
  return parse_kernel(text);
}

ProbeOracle simulator_oracle(const EvaluatorConfig& cfg) {
  return [cfg](const Kernel& k) {
    SimTrace trace;
    simulate(k, cfg, &trace);
    return trace.hazards.empty();
  };
}

int find_min_stall(const std::string& opcode, const ProbeOracle& oracle, int ceiling) {
  if (ceiling < 0) throw MicrobenchError("negative search ceiling");
  std::vector<bool> pass(static_cast<std::size_t>(ceiling) + 1);
  for (int c = ceiling; c >= 0; --c) {
    ProbeSpec spec;
    spec.opcode = opcode;
    spec.candidate_stall = c;
    pass[static_cast<std::size_t>(c)] = oracle(generate_probe(spec));
  }
  if (!pass[static_cast<std::size_t>(ceiling)])
    throw MicrobenchError(opcode + " fails at stall " + std::to_string(ceiling) +
                          ": ceiling too low or opcode variable-latency");
  int c = ceiling;
  while (c > 0 && pass[static_cast<std::size_t>(c - 1)]) --c;
  for (int below = c - 2; below >= 0; --below) {
    if (pass[static_cast<std::size_t>(below)])
      throw MicrobenchError(opcode + " passes at stall " + std::to_string(below) + " but fails at " +
                            std::to_string(c - 1) + ": result is not monotonic, opcode is likely variable-latency");
  }
  return c;
}

StallCountTable microbench_table(const std::vector<std::string>& opcodes, const ProbeOracle& oracle, int ceiling) {
  StallCountTable table;
  for (const auto& op : opcodes) table.set(op, find_min_stall(op, oracle, ceiling), Provenance::Builtin);
  return table;
}

}  // namespace sassopt

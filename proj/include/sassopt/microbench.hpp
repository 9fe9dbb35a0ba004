#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sassopt/analysis.hpp"
#include "sassopt/evaluators.hpp"
#include "sassopt/sass.hpp"

namespace sassopt {

class MicrobenchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxEncodableStall = 15;

struct ProbeSpec {
  /// Full mnemonic of the instruction under test, e.g. "IMAD.WIDE".
  std::string opcode;
  int candidate_stall = kMaxEncodableStall;
  /// Stall carried by the target itself; the rest goes into NOPs.
  int max_target_stall = kMaxEncodableStall;
  /// Consumer store; empty picks the template's default.
  std::string consumer;
};

struct ProbeTemplate {
  std::string target;    // instruction body without control code
  std::string consumer;  // full line with control code
};

/// Opcodes with a registered operand template.
std::vector<std::string> probe_opcodes();
const ProbeTemplate& probe_template(const std::string& opcode);

/// Target with the candidate stall, optional NOP padding, then a store of
/// the produced register(s).
Kernel generate_probe(const ProbeSpec& spec);

using ProbeOracle = std::function<bool(const Kernel&)>;

/// A probe passes when the simulator, using `fixed_latency_map` as ground
/// truth, sees no read-before-ready hazard.
ProbeOracle simulator_oracle(const EvaluatorConfig& cfg);

/// Descending linear search from `ceiling` down to 0. Every candidate is
/// probed so a pass below a failure is reported as non-monotonic.
int find_min_stall(const std::string& opcode, const ProbeOracle& oracle, int ceiling = kMaxEncodableStall);

StallCountTable microbench_table(const std::vector<std::string>& opcodes, const ProbeOracle& oracle,
                                 int ceiling = kMaxEncodableStall);

}  // namespace sassopt

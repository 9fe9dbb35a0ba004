#include <algorithm>
#include <functional>
#include <map>
#include <numeric>

#include "sassopt/evaluators.hpp"

namespace sassopt {

namespace {
constexpr std::size_t kMaxDuplicateAssignments = 5040;
}  // namespace

std::string_view to_string(Violation v) {
  switch (v) {
    case Violation::None: return "none";
    case Violation::RegisterOrder: return "register-order";
    case Violation::BarrierOrder: return "barrier-order";
    case Violation::StallSeparation: return "stall-separation";
    case Violation::BlockMembership: return "block-membership";
    case Violation::LdgstsGroupOrder: return "ldgsts-group-order";
  }
  return "none";
}

namespace {

DataflowVerdict reject(Violation v, const Kernel& k, std::size_t a, std::size_t b, std::string detail,
                       std::optional<Reg> reg = std::nullopt) {
  DataflowVerdict out;
  out.accepted = false;
  out.violation = v;
  out.reg = reg;
  out.first_line = k.instruction(a).line_index + 1;
  out.second_line = k.instruction(b).line_index + 1;
  out.detail = std::move(detail);
  return out;
}

// Ordered LDGSTS runs per block that share destination registers and walk
// upward in offset. Only runs of two or more are returned.
std::vector<std::vector<std::size_t>> ldgsts_runs(const Kernel& k) {
  std::vector<std::vector<std::size_t>> runs;
  for (const Block& blk : k.blocks()) {
    std::vector<std::size_t> run;
    const Operand* prev = nullptr;
    auto flush = [&] {
      if (run.size() >= 2) runs.push_back(run);
      run.clear();
    };
    for (std::size_t i = blk.begin; i < blk.end; ++i) {
      const Instruction& inst = k.instruction(i);
      if (inst.opcode != "LDGSTS" || inst.operands.empty()) continue;
      const Operand& dst = inst.operands[0];
      bool extends = prev && prev->registers == dst.registers && dst.offset > prev->offset;
      if (!extends) flush();
      run.push_back(i);
      prev = &dst;
    }
    flush();
  }
  return runs;
}

}  // namespace

DataflowVerdict verify_permutation(const Kernel& original, const std::vector<std::size_t>& order,
                                   const StallCountTable& table) {
  const std::size_t n = original.num_instructions();
  if (order.size() != n) throw StructuralError("instruction count differs");
  std::vector<std::size_t> pos(n, n);
  for (std::size_t p = 0; p < n; ++p) {
    if (order[p] >= n || pos[order[p]] != n) throw StructuralError("order is not a permutation");
    pos[order[p]] = p;
  }

  // (d) every instruction stays in its block.
  for (std::size_t p = 0; p < n; ++p) {
    if (original.block_of(order[p]) != original.block_of(p))
      return reject(Violation::BlockMembership, original, order[p], order[p], "instruction left its basic block");
  }

  // (a) def/use order per register: any two accesses where at least one
  // writes keep their relative order.
  std::map<Reg, std::vector<std::pair<std::size_t, bool>>> accesses;
  for (std::size_t i = 0; i < n; ++i) {
    const Instruction& inst = original.instruction(i);
    for (Reg r : inst.uses) accesses[r].emplace_back(i, inst.defs.contains(r));
    for (Reg r : inst.defs) {
      if (!inst.uses.contains(r)) accesses[r].emplace_back(i, true);
    }
  }
  for (const auto& [reg, list] : accesses) {
    for (std::size_t x = 0; x < list.size(); ++x) {
      for (std::size_t y = x + 1; y < list.size(); ++y) {
        auto [a, a_def] = list[x];
        auto [b, b_def] = list[y];
        if (!a_def && !b_def) continue;
        if (pos[a] > pos[b])
          return reject(Violation::RegisterOrder, original, a, b, "reordered accesses to " + to_string(reg), reg);
      }
    }
  }

  // (b) every wait pairs with the same most recent setter.
  auto last_setter = [&](auto instruction_at, std::size_t p, int b) -> std::optional<std::size_t> {
    for (std::size_t q = p; q-- > 0;) {
      std::size_t ord = instruction_at(q);
      if (original.instruction(ord).control.sets(b)) return ord;
    }
    return std::nullopt;
  };
  auto orig_at = [](std::size_t q) { return q; };
  auto mut_at = [&](std::size_t q) { return order[q]; };
  for (std::size_t i = 0; i < n; ++i) {
    const ControlCode& cc = original.instruction(i).control;
    for (int b = 0; b < kNumBarriers; ++b) {
      if (!cc.waits_on(b)) continue;
      auto before = last_setter(orig_at, i, b);
      auto after = last_setter(mut_at, pos[i], b);
      if (before != after) {
        std::size_t other = after ? *after : (before ? *before : i);
        return reject(Violation::BarrierOrder, original, other, i, "wait on B" + std::to_string(b) + " pairs with a different setter");
      }
    }
  }

  // (c) stall separation between fixed-latency producers and consumers.
  std::vector<long> orig_prefix(n + 1, 0), mut_prefix(n + 1, 0);
  for (std::size_t p = 0; p < n; ++p) {
    orig_prefix[p + 1] = orig_prefix[p] + original.instruction(p).control.stall_count;
    mut_prefix[p + 1] = mut_prefix[p] + original.instruction(order[p]).control.stall_count;
  }
  for (std::size_t c = 0; c < n; ++c) {
    const Instruction& consumer = original.instruction(c);
    for (Reg r : consumer.uses) {
      std::optional<std::size_t> producer;
      for (std::size_t q = c; q-- > 0;) {
        if (original.instruction(q).defs.contains(r)) {
          producer = q;
          break;
        }
      }
      if (!producer) continue;
      const Instruction& prod = original.instruction(*producer);
      if (prod.control.write_barrier) continue;
      const long sep_orig = orig_prefix[c] - orig_prefix[*producer];
      const long sep_mut = mut_prefix[pos[c]] - mut_prefix[pos[*producer]];
      long bound = sep_orig;
      if (auto req = table.lookup(prod.mnemonic())) bound = std::min<long>(*req, sep_orig);
      if (sep_mut < bound)
        return reject(Violation::StallSeparation, original, *producer, c,
                      prod.mnemonic() + " -> " + consumer.mnemonic() + " separated by " + std::to_string(sep_mut) +
                          " < " + std::to_string(bound),
                      r);
    }
  }

  // (e) consecutive LDGSTS runs keep their order.
  for (const auto& run : ldgsts_runs(original)) {
    for (std::size_t x = 1; x < run.size(); ++x) {
      if (pos[run[x - 1]] > pos[run[x]])
        return reject(Violation::LdgstsGroupOrder, original, run[x - 1], run[x], "consecutive LDGSTS reordered");
    }
  }
  return {};
}

DataflowVerdict verify_dataflow(const Kernel& original, const Kernel& mutated, const StallCountTable& table) {
  const std::size_t n = original.num_instructions();
  if (mutated.num_instructions() != n) throw StructuralError("instruction count differs");

  // Match instructions by canonical text; the k-th copy of a text maps to
  // the k-th copy on the other side.
  std::map<std::string, std::vector<std::size_t>> by_text;
  for (std::size_t i = 0; i < n; ++i) by_text[serialize(original.instruction(i))].push_back(i);
  std::map<std::string, std::size_t> seen;
  std::map<std::string, std::vector<std::size_t>> slots;
  std::vector<std::size_t> order(n);
  for (std::size_t p = 0; p < n; ++p) {
    auto text = serialize(mutated.instruction(p));
    auto it = by_text.find(text);
    std::size_t& k = seen[text];
    if (it == by_text.end() || k >= it->second.size()) throw StructuralError("mutated kernel is not a permutation: '" + text + "'");
    order[p] = it->second[k++];
    slots[text].push_back(p);
  }

  // Block layout itself (labels, sync positions) must be unchanged.
  if (mutated.blocks() != original.blocks()) {
    return reject(Violation::BlockMembership, original, 0, 0, "basic block layout differs");
  }
  DataflowVerdict first = verify_permutation(original, order, table);
  if (first) return first;

  // Identical instructions are interchangeable; accept if any assignment of
  // the duplicates is valid.
  std::vector<std::pair<std::vector<std::size_t>*, std::vector<std::size_t>*>> classes;
  for (auto& [text, ords] : by_text)
    if (ords.size() > 1) classes.emplace_back(&ords, &slots[text]);
  std::size_t budget = kMaxDuplicateAssignments;
  std::function<bool(std::size_t)> search = [&](std::size_t c) -> bool {
    if (c == classes.size()) {
      if (budget == 0) return false;
      --budget;
      return static_cast<bool>(verify_permutation(original, order, table));
    }
    std::vector<std::size_t> perm = *classes[c].first;
    do {
      for (std::size_t j = 0; j < perm.size(); ++j) order[(*classes[c].second)[j]] = perm[j];
      if (search(c + 1)) return true;
    } while (budget > 0 && std::next_permutation(perm.begin(), perm.end()));
    return false;
  };
  if (!classes.empty() && search(0)) return {};
  return first;
}

}  // namespace sassopt

#include "sassopt/analysis.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sassopt {

StallCountTable StallCountTable::builtin() {
  StallCountTable t;
  for (const char* m : {"IADD3", "IMAD.IADD", "IADD3.X", "MOV", "IABS", "IMAD", "FADD", "HADD2", "IMNMX", "SEL", "LEA"})
    t.set(m, 4, Provenance::Builtin);
  for (const char* m : {"IMAD.WIDE", "IMAD.WIDE.U32"}) t.set(m, 5, Provenance::Builtin);
  return t;
}

std::optional<int> StallCountTable::lookup(std::string_view mnemonic) const {
  if (const Entry* e = find(mnemonic)) return e->cycles;
  return std::nullopt;
}

const StallCountTable::Entry* StallCountTable::find(std::string_view mnemonic) const {
  auto it = entries_.find(mnemonic);
  return it == entries_.end() ? nullptr : &it->second;
}

void StallCountTable::set(const std::string& mnemonic, int cycles, Provenance p) { entries_[mnemonic] = Entry{cycles, p}; }

void StallCountTable::merge_min(const std::string& mnemonic, int cycles, Provenance p) {
  auto it = entries_.find(mnemonic);
  if (it == entries_.end()) {
    entries_.emplace(mnemonic, Entry{cycles, p});
  } else if (cycles < it->second.cycles) {
    it->second = Entry{cycles, p};
  }
}

StallCountTable read_stall_table(std::istream& in) {
  StallCountTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string mnemonic;
    if (!(ls >> mnemonic)) continue;
    int cycles = 0;
    if (!(ls >> cycles) || cycles < 0) throw ParseError(line_no, "bad stall table entry for " + mnemonic);
    std::string prov = "builtin";
    ls >> prov;
    if (prov != "builtin" && prov != "inferred") throw ParseError(line_no, "unknown provenance '" + prov + "'");
    t.set(mnemonic, cycles, prov == "builtin" ? Provenance::Builtin : Provenance::Inferred);
  }
  return t;
}

StallCountTable load_stall_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stall table '" + path + "'");
  return read_stall_table(in);
}

void write_stall_table(std::ostream& out, const StallCountTable& table) {
  out << "# mnemonic cycles provenance\n";
  for (const auto& [m, e] : table.entries())
    out << m << ' ' << e.cycles << ' ' << (e.provenance == Provenance::Builtin ? "builtin" : "inferred") << '\n';
}

bool is_fixed_latency(const Instruction& inst) { return !inst.control.write_barrier.has_value(); }

StallInference infer_stall_counts(const Kernel& k, const StallCountTable& builtin) {
  StallInference out;
  out.table = builtin;
  for (std::size_t j = 0; j < k.num_instructions(); ++j) {
    const Instruction& consumer = k.instruction(j);
    if (!is_memory(consumer)) continue;

    RegSet unresolved = consumer.uses;
    bool deny = false;
    std::set<std::size_t> producers;
    const Block& block = k.blocks()[k.block_of(j)];
    int acc = 0;
    for (std::size_t i = j; i-- > block.begin && !unresolved.empty();) {
      const Instruction& inst = k.instruction(i);
      acc += inst.control.stall_count;
      RegSet hit;
      RegSet rest;
      for (Reg r : unresolved) (inst.defs.contains(r) ? hit : rest).insert(r);
      if (hit.empty()) continue;
      unresolved = rest;
      if (!is_known_opcode(inst.opcode)) {
        deny = true;
        continue;
      }
      if (!is_fixed_latency(inst) || !producers.insert(i).second) continue;
      std::string m = inst.mnemonic();
      auto [it, fresh] = out.observed.emplace(m, acc);
      if (!fresh) it->second = std::min(it->second, acc);
      out.table.merge_min(m, acc, Provenance::Inferred);
      if (builtin.find(m)) ++out.accounting.builtin;
      else ++out.accounting.inferred;
    }
    if (!unresolved.empty()) deny = true;
    if (deny) {
      out.denylist.insert(j);
      ++out.accounting.denylisted;
    }
  }
  return out;
}

std::optional<std::string> register_key(const Operand& op) {
  if (!op.base_register) return std::nullopt;
  switch (op.kind) {
    case OperandKind::Register: return to_string(Reg{RegFile::R, *op.base_register});
    case OperandKind::UniformRegister: return to_string(Reg{RegFile::UR, *op.base_register});
    case OperandKind::Predicate: {
      bool uniform = op.raw_text.find("UP") != std::string::npos;
      return to_string(Reg{uniform ? RegFile::UP : RegFile::P, *op.base_register});
    }
    default: return std::nullopt;
  }
}

std::optional<std::string> memory_key(const Operand& op) {
  if (op.kind == OperandKind::MemoryRef || op.kind == OperandKind::ConstantBank) return op.raw_text;
  return std::nullopt;
}

EmbeddingTables build_embedding_tables(const Kernel& k) {
  EmbeddingTables t;
  auto intern = [](std::map<std::string, int>& table, const std::string& key) {
    table.emplace(key, static_cast<int>(table.size()));
  };
  for (std::size_t i = 0; i < k.num_instructions(); ++i) {
    const Instruction& inst = k.instruction(i);
    t.max_operands = std::max(t.max_operands, inst.operands.size());
    for (const Operand& op : inst.operands) {
      if (auto key = register_key(op)) {
        intern(t.register_table, *key);
      } else if (auto mem = memory_key(op)) {
        intern(t.memory_table, *mem);
        for (Reg r : op.registers) {
          if (r.file == RegFile::R && op.paired_register && r.index == *op.paired_register) continue;
          intern(t.register_table, to_string(r));
        }
      }
    }
  }
  return t;
}

std::vector<std::size_t> enumerate_memory_instructions(const Kernel& k, const std::set<std::size_t>& denylist) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k.num_instructions(); ++i) {
    if (is_memory(k.instruction(i)) && !denylist.contains(i)) out.push_back(i);
  }
  return out;
}

AnalysisReport analyze(const Kernel& k, const StallCountTable& builtin) {
  AnalysisReport r;
  auto inference = infer_stall_counts(k, builtin);
  auto tables = build_embedding_tables(k);
  r.stall_table = std::move(inference.table);
  r.observed = std::move(inference.observed);
  r.denylist = std::move(inference.denylist);
  r.accounting = inference.accounting;
  r.memory_indices = enumerate_memory_instructions(k, r.denylist);
  r.register_table = std::move(tables.register_table);
  r.memory_table = std::move(tables.memory_table);
  r.max_operands = tables.max_operands;
  return r;
}

namespace {

template <typename Map>
std::vector<std::pair<std::string, int>> by_id(const Map& m) {
  std::vector<std::pair<std::string, int>> v(m.begin(), m.end());
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  return v;
}

}  // namespace

std::string format_report(const AnalysisReport& r) {
  std::ostringstream os;
  const auto& acc = r.accounting;
  os << std::fixed << std::setprecision(1);
  os << "stall-count dependencies: " << acc.total() << '\n';
  os << "  builtin    " << 100.0 * acc.fraction(acc.builtin) << "%\n";
  os << "  inferred   " << 100.0 * acc.fraction(acc.inferred) << "%\n";
  os << "  denylisted " << 100.0 * acc.fraction(acc.denylisted) << "%\n";
  os << "stall table:\n";
  for (const auto& [m, e] : r.stall_table.entries())
    os << "  " << m << ' ' << e.cycles << (e.provenance == Provenance::Builtin ? " builtin" : " inferred") << '\n';
  os << "denylist:";
  for (auto i : r.denylist) os << ' ' << i;
  os << "\nmemory instructions:";
  for (auto i : r.memory_indices) os << ' ' << i;
  os << "\nregister table:";
  for (const auto& [name, id] : by_id(r.register_table)) os << ' ' << name << '=' << id;
  os << "\nmemory table:";
  for (const auto& [name, id] : by_id(r.memory_table)) os << ' ' << name << '=' << id;
  os << "\nmax operands: " << r.max_operands << '\n';
  return os.str();
}

std::string report_json(const AnalysisReport& r) {
  using nlohmann::json;
  json j;
  const auto& acc = r.accounting;
  j["dependencies"] = {{"total", acc.total()},
                       {"builtin", acc.builtin},
                       {"inferred", acc.inferred},
                       {"denylisted", acc.denylisted},
                       {"builtin_pct", 100.0 * acc.fraction(acc.builtin)},
                       {"inferred_pct", 100.0 * acc.fraction(acc.inferred)},
                       {"denylisted_pct", 100.0 * acc.fraction(acc.denylisted)}};
  json table = json::object();
  for (const auto& [m, e] : r.stall_table.entries())
    table[m] = {{"cycles", e.cycles}, {"provenance", e.provenance == Provenance::Builtin ? "builtin" : "inferred"}};
  j["stall_table"] = table;
  j["observed"] = r.observed;
  j["denylist"] = r.denylist;
  j["memory_indices"] = r.memory_indices;
  j["register_table"] = r.register_table;
  j["memory_table"] = r.memory_table;
  j["max_operands"] = r.max_operands;
  return j.dump(2) + "\n";
}

}  // namespace sassopt

#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sassopt/sass.hpp"

namespace sassopt {

enum class Provenance { Builtin, Inferred };

/// Minimum stall cycles for fixed-latency instructions, keyed by the full
/// mnemonic (opcode plus modifiers), e.g. "IMAD.WIDE.U32".
class StallCountTable {
 public:
  struct Entry {
    int cycles = 0;
    Provenance provenance = Provenance::Builtin;
    bool operator==(const Entry&) const = default;
  };

  /// Microbenchmarked A100 values for common integer/float ops.
  static StallCountTable builtin();

  std::optional<int> lookup(std::string_view mnemonic) const;
  const Entry* find(std::string_view mnemonic) const;
  void set(const std::string& mnemonic, int cycles, Provenance p);
  /// Keeps the smaller of the existing and new value. Ties keep the
  /// existing provenance.
  void merge_min(const std::string& mnemonic, int cycles, Provenance p);

  const std::map<std::string, Entry, std::less<>>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  bool operator==(const StallCountTable&) const = default;

 private:
  std::map<std::string, Entry, std::less<>> entries_;
};

/// Text format: `MNEMONIC CYCLES [builtin|inferred]` per line, `#` comments.
StallCountTable read_stall_table(std::istream& in);
StallCountTable load_stall_table(const std::string& path);
void write_stall_table(std::ostream& out, const StallCountTable& table);

/// True when the instruction's result is tracked by stall counts rather
/// than a scoreboard barrier.
bool is_fixed_latency(const Instruction& inst);

/// How each fixed-latency producer / memory consumer dependency was settled.
struct DependencyAccounting {
  std::size_t builtin = 0;
  std::size_t inferred = 0;
  std::size_t denylisted = 0;

  std::size_t total() const { return builtin + inferred + denylisted; }
  double fraction(std::size_t n) const { return total() == 0 ? 0.0 : static_cast<double>(n) / total(); }
};

struct StallInference {
  /// builtin merged with every observation (minimum wins).
  StallCountTable table;
  /// Raw minimum accumulated stall observed per producer mnemonic,
  /// independent of the builtin table.
  std::map<std::string, int> observed;
  std::set<std::size_t> denylist;
  DependencyAccounting accounting;
};

StallInference infer_stall_counts(const Kernel& k, const StallCountTable& builtin);

struct EmbeddingTables {
  std::map<std::string, int> register_table;
  std::map<std::string, int> memory_table;
  std::size_t max_operands = 0;
};

EmbeddingTables build_embedding_tables(const Kernel& k);

std::vector<std::size_t> enumerate_memory_instructions(const Kernel& k, const std::set<std::size_t>& denylist);

/// Canonical embedding-table key for a register operand (RZ/PT excluded),
/// or nullopt when the operand is not a register.
std::optional<std::string> register_key(const Operand& op);
/// Memory-location key (memory refs and constant banks), else nullopt.
std::optional<std::string> memory_key(const Operand& op);

struct AnalysisReport {
  StallCountTable stall_table;
  std::map<std::string, int> observed;
  std::set<std::size_t> denylist;
  std::vector<std::size_t> memory_indices;
  std::map<std::string, int> register_table;
  std::map<std::string, int> memory_table;
  std::size_t max_operands = 0;
  DependencyAccounting accounting;
};

AnalysisReport analyze(const Kernel& k, const StallCountTable& builtin = StallCountTable::builtin());

/// Human-readable summary (percentages plus tables).
std::string format_report(const AnalysisReport& r);
/// Machine-readable JSON form of the same report.
std::string report_json(const AnalysisReport& r);

}  // namespace sassopt

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sassopt {

/// Thrown for malformed SASS text. Carries the 1-based source line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline constexpr int kNumBarriers = 6;
inline constexpr int kZeroRegister = 255;  // RZ
inline constexpr int kTruePredicate = 7;   // PT

/// Per-instruction scheduling metadata, `[B------:R-:W-:Y:S04]`.
struct ControlCode {
  std::array<bool, kNumBarriers> wait_mask{};
  std::optional<int> read_barrier;
  std::optional<int> write_barrier;
  bool yield_flag = false;
  int stall_count = 0;

  bool waits_on(int barrier) const { return wait_mask[static_cast<std::size_t>(barrier)]; }
  bool sets(int barrier) const { return read_barrier == barrier || write_barrier == barrier; }

  bool operator==(const ControlCode&) const = default;
};

/// Parses the text between the square brackets (or including them).
ControlCode parse_control_code(std::string_view text, std::size_t line = 0);
std::string to_string(const ControlCode& cc);

enum class RegFile : std::uint8_t { R, UR, P, UP };

/// A single architectural register. RZ/URZ/PT/UPT are never represented
/// as a Reg since they carry no dependency.
struct Reg {
  RegFile file = RegFile::R;
  int index = 0;

  auto operator<=>(const Reg&) const = default;
};

std::string to_string(Reg r);

/// Sorted, duplicate-free register set.
class RegSet {
 public:
  RegSet() = default;
  RegSet(std::initializer_list<Reg> regs);

  void insert(Reg r);
  void insert(const RegSet& other);
  bool contains(Reg r) const;
  bool intersects(const RegSet& other) const;
  bool empty() const { return regs_.empty(); }
  std::size_t size() const { return regs_.size(); }
  auto begin() const { return regs_.begin(); }
  auto end() const { return regs_.end(); }

  bool operator==(const RegSet&) const = default;

 private:
  std::vector<Reg> regs_;
};

/// Eq. pairing of 32-bit registers into 64-bit halves: 2k <-> 2k+1.
/// Throws std::invalid_argument for RZ (255) or anything outside 0..254.
int adjacent_register(int reg_no);

enum class OperandKind : std::uint8_t {
  Register,
  UniformRegister,
  Predicate,
  Immediate,
  MemoryRef,
  ConstantBank,
  Special,
};

std::string_view to_string(OperandKind k);

struct Operand {
  OperandKind kind = OperandKind::Special;
  /// Principal register number (R/UR/P/UP index); absent for RZ, PT and
  /// operands without registers.
  std::optional<int> base_register;
  /// Other half of a `.64` register pair.
  std::optional<int> paired_register;
  /// Every register the operand reads or writes, pairs expanded.
  RegSet registers;
  bool negated = false;
  /// Immediate offset of a memory reference, e.g. 0x4000 in `[R219+0x4000]`.
  std::int64_t offset = 0;
  std::string raw_text;

  bool operator==(const Operand& o) const { return raw_text == o.raw_text; }
};

Operand parse_operand(std::string_view token, std::size_t line = 0);

struct Guard {
  Reg predicate;  // PT is represented with index kTruePredicate
  bool negated = false;
  bool operator==(const Guard&) const = default;
};

struct Instruction {
  ControlCode control;
  std::optional<Guard> guard;
  std::string opcode;                  // root mnemonic, e.g. "LDGSTS"
  std::vector<std::string> modifiers;  // e.g. {"E", "BYPASS", "128"}
  std::vector<Operand> operands;
  RegSet defs;
  RegSet uses;
  /// Source line (0-based) the instruction was parsed from.
  std::size_t line_index = 0;
  /// Optional `/*0080*/` address column and text after the `;`, echoed back.
  std::string address;
  std::string trailer;

  /// Opcode with all modifiers, e.g. "IMAD.WIDE.U32".
  std::string mnemonic() const;
  /// Canonical single-line rendering without the control code.
  std::string body() const;

  bool has_modifier(std::string_view m) const;

  /// Structural equality; ignores line_index.
  bool operator==(const Instruction& o) const;
};

Instruction parse_instruction(std::string_view line, std::size_t line_index = 0);
std::string serialize(const Instruction& inst);

/// Opcode classification tables. The memory set defines the action space;
/// the sync set delimits basic blocks.
bool is_memory_opcode(std::string_view root);
bool is_memory(const Instruction& inst);
bool is_sync_opcode(std::string_view root);
bool is_sync(const Instruction& inst);
bool is_known_opcode(std::string_view root);
/// Opcodes whose operands are all sources (stores, async copies, control).
bool has_no_destination(std::string_view root);

struct Label {
  std::string text;
  bool operator==(const Label&) const = default;
};

/// Comments, blank lines, and assembler directives, echoed byte-for-byte.
struct Directive {
  std::string text;
  bool operator==(const Directive&) const = default;
};

using Item = std::variant<Instruction, Label, Directive>;

/// Half-open range of instruction ordinals.
struct Block {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool operator==(const Block&) const = default;
};

class Kernel {
 public:
  Kernel() = default;
  explicit Kernel(std::vector<Item> items);

  const std::vector<Item>& items() const { return items_; }
  std::size_t num_instructions() const { return inst_items_.size(); }
  const Instruction& instruction(std::size_t ordinal) const;
  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t block_of(std::size_t ordinal) const { return block_of_[ordinal]; }
  /// Item index of the instruction with the given ordinal.
  std::size_t item_index(std::size_t ordinal) const { return inst_items_[ordinal]; }

  /// Exchanges instructions at ordinals i and i+1. Items between them
  /// (comments, blank lines) stay in place. Requires both in one block.
  void swap_adjacent(std::size_t i);

  /// Returns a copy whose instructions are rearranged so that position p
  /// holds the instruction previously at ordinal order[p]. Non-instruction
  /// items keep their positions.
  Kernel permuted(const std::vector<std::size_t>& order) const;

  bool operator==(const Kernel& o) const { return items_ == o.items_; }

 private:
  void index();

  std::vector<Item> items_;
  std::vector<std::size_t> inst_items_;
  std::vector<Block> blocks_;
  std::vector<std::size_t> block_of_;
};

Kernel parse_kernel(std::string_view text);
std::string serialize_kernel(const Kernel& k);

/// One record per item, for the `parse` subcommand.
std::string dump_structure(const Kernel& k);

}  // namespace sassopt

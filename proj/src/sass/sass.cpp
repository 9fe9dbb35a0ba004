#include "sassopt/sass.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sassopt {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = false;
  for (char c : trim(s)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
      continue;
    }
    if (in_space) out.push_back(' ');
    in_space = false;
    out.push_back(c);
  }
  return out;
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(),
                                   [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

int to_int(std::string_view s) {
  int v = 0;
  std::from_chars(s.data(), s.data() + s.size(), v);
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

// Splits on commas that are not nested in brackets. Throws on imbalance.
std::vector<std::string_view> split_operands(std::string_view s, std::size_t line) {
  std::vector<std::string_view> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '[' || c == '(' || c == '{') ++depth;
    if (c == ']' || c == ')' || c == '}') {
      if (--depth < 0) throw ParseError(line, "unbalanced brackets in operand list");
    }
    if (c == ',' && depth == 0) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  if (depth != 0) throw ParseError(line, "unbalanced brackets in operand list");
  auto last = trim(s.substr(start));
  if (!last.empty() || !out.empty()) out.push_back(last);
  for (auto tok : out) {
    if (tok.empty()) throw ParseError(line, "empty operand");
  }
  return out;
}

struct RegToken {
  RegFile file;
  std::optional<int> index;  // nullopt for RZ/URZ
  bool wide = false;
};

// Recognizes R12, R2.64, R5.reuse, URZ, UR4. Returns nullopt otherwise.
std::optional<RegToken> match_register(std::string_view tok) {
  RegFile file = RegFile::R;
  if (tok.starts_with("UR")) {
    file = RegFile::UR;
    tok.remove_prefix(2);
  } else if (tok.starts_with("R")) {
    tok.remove_prefix(1);
  } else {
    return std::nullopt;
  }
  auto dot = tok.find('.');
  std::string_view num = tok.substr(0, dot);
  RegToken out{file, std::nullopt, false};
  if (num == "Z") {
    out.index = std::nullopt;
  } else if (all_digits(num)) {
    out.index = to_int(num);
    if (file == RegFile::R && *out.index == kZeroRegister) out.index = std::nullopt;
  } else {
    return std::nullopt;
  }
  if (dot != std::string_view::npos) {
    for (auto part : split(tok.substr(dot + 1), '.')) {
      if (part == "64") out.wide = true;
    }
  }
  return out;
}

struct PredToken {
  RegFile file;
  int index;
};

std::optional<PredToken> match_predicate(std::string_view tok) {
  RegFile file = RegFile::P;
  if (tok.starts_with("UP")) {
    file = RegFile::UP;
    tok.remove_prefix(2);
  } else if (tok.starts_with("P")) {
    tok.remove_prefix(1);
  } else {
    return std::nullopt;
  }
  if (tok == "T") return PredToken{file, kTruePredicate};
  if (tok.size() == 1 && std::isdigit(static_cast<unsigned char>(tok[0]))) return PredToken{file, tok[0] - '0'};
  return std::nullopt;
}

bool looks_immediate(std::string_view tok) {
  if (tok.starts_with('-') || tok.starts_with('+')) tok.remove_prefix(1);
  if (tok.empty()) return false;
  if (std::isdigit(static_cast<unsigned char>(tok[0]))) return true;
  return tok == "INF" || tok == "QNAN" || tok == "NAN";
}

std::int64_t parse_offset(std::string_view tok) {
  bool neg = false;
  if (tok.starts_with('-')) {
    neg = true;
    tok.remove_prefix(1);
  }
  std::int64_t v = 0;
  if (tok.starts_with("0x") || tok.starts_with("0X")) {
    std::from_chars(tok.data() + 2, tok.data() + tok.size(), v, 16);
  } else {
    std::from_chars(tok.data(), tok.data() + tok.size(), v);
  }
  return neg ? -v : v;
}

void add_register(Operand& op, const RegToken& r, bool principal) {
  if (!r.index) return;
  op.registers.insert(Reg{r.file, *r.index});
  if (r.wide) op.registers.insert(Reg{r.file, adjacent_register(*r.index)});
  if (principal && !op.base_register) {
    op.base_register = *r.index;
    if (r.wide) op.paired_register = adjacent_register(*r.index);
  }
}

// Parses the contents of bracket groups like `desc[UR16][R10.64+0x10]`.
void parse_bracket_groups(Operand& op, std::string_view tok, std::size_t line) {
  std::vector<std::string_view> groups;
  std::size_t pos = 0;
  while ((pos = tok.find('[', pos)) != std::string_view::npos) {
    auto close = tok.find(']', pos);
    if (close == std::string_view::npos) throw ParseError(line, "unbalanced brackets in '" + std::string(tok) + "'");
    groups.push_back(tok.substr(pos + 1, close - pos - 1));
    pos = close + 1;
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    bool address_group = g + 1 == groups.size();
    std::string_view body = groups[g];
    std::size_t start = 0;
    for (std::size_t i = 0; i <= body.size(); ++i) {
      if (i == body.size() || ((body[i] == '+' || body[i] == '-') && i > 0)) {
        auto term = trim(body.substr(start, i - start));
        bool negative = term.starts_with('-');
        if (term.starts_with('+') || term.starts_with('-')) term.remove_prefix(1);
        term = trim(term);
        if (auto r = match_register(term)) {
          if (!address_group && tok.starts_with("desc")) r->wide = true;
          add_register(op, *r, address_group);
        } else if (address_group && looks_immediate(term)) {
          op.offset += negative ? -parse_offset(term) : parse_offset(term);
        }
        start = i;
      }
    }
  }
}

void expand_width(RegSet& set, Reg r, int width) {
  if (width <= 1) return;
  if (width == 2) {
    set.insert(Reg{r.file, adjacent_register(r.index)});
    return;
  }
  int base = r.index & ~(width - 1);
  for (int i = 0; i < width; ++i) {
    if (base + i < kZeroRegister) set.insert(Reg{r.file, base + i});
  }
}

// Register count implied by a width modifier on loads/stores: `.64`
// pairs, `.128` quads, LDSM `.2`/`.4`.
int data_width(const Instruction& inst) {
  if (inst.opcode == "LDSM") {
    if (inst.has_modifier("4")) return 4;
    if (inst.has_modifier("2")) return 2;
    return 1;
  }
  if (!is_memory(inst) || inst.opcode == "LDGSTS") return 1;
  if (inst.has_modifier("128")) return 4;
  if (inst.has_modifier("64")) return 2;
  return 1;
}

// Registers covered by operand i. HMMA fragments: D and C are 4 regs with
// F32 accumulators (2 with F16), A is 4 (m16n8k16) or 2 (m16n8k8), B half of A.
int operand_width(const Instruction& inst, std::size_t i, bool is_def) {
  if (inst.opcode == "HMMA") {
    const bool k16 = inst.has_modifier("16816");
    const int acc = inst.has_modifier("F16") ? 2 : 4;
    switch (i) {
      case 0:
      case 3: return acc;
      case 1: return k16 ? 4 : 2;
      case 2: return k16 ? 2 : 1;
      default: return 1;
    }
  }
  if (inst.opcode == "IMAD" && inst.has_modifier("WIDE")) return i == 0 || i == 3 ? 2 : 1;
  if (is_def && i == 0) {
    if (inst.opcode == "CS2R" && !inst.has_modifier("32")) return 2;
    if (inst.opcode == "ULDC" && inst.has_modifier("64")) return 2;
    return data_width(inst);
  }
  if (has_no_destination(inst.opcode) && is_memory(inst)) return data_width(inst);
  return 1;
}

void compute_defs_uses(Instruction& inst) {
  inst.defs = {};
  inst.uses = {};
  if (inst.guard && inst.guard->predicate.index != kTruePredicate) inst.uses.insert(inst.guard->predicate);

  const auto& ops = inst.operands;
  std::size_t num_defs = 0;
  if (!has_no_destination(inst.opcode) && !ops.empty()) {
    auto k = ops[0].kind;
    bool reg_like = k == OperandKind::Register || k == OperandKind::UniformRegister || k == OperandKind::Predicate;
    if (reg_like && !ops[0].negated) {
      num_defs = 1;
      if (inst.opcode == "SHFL" && ops.size() > 1) {
        num_defs = 2;
      } else {
        while (num_defs < ops.size() && ops[num_defs].kind == OperandKind::Predicate && !ops[num_defs].negated)
          ++num_defs;
      }
    }
  }

  for (std::size_t i = 0; i < ops.size(); ++i) {
    const Operand& op = ops[i];
    const bool is_def = i < num_defs;
    RegSet& target = is_def ? inst.defs : inst.uses;
    target.insert(op.registers);
    if ((op.kind != OperandKind::Register && op.kind != OperandKind::UniformRegister) || !op.base_register) continue;
    const RegFile file = op.kind == OperandKind::Register ? RegFile::R : RegFile::UR;
    expand_width(target, Reg{file, *op.base_register}, operand_width(inst, i, is_def));
  }
}

}  // namespace

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

ControlCode parse_control_code(std::string_view text, std::size_t line) {
  text = trim(text);
  if (text.starts_with('[')) {
    if (!text.ends_with(']')) throw ParseError(line, "unbalanced brackets in control code");
    text = text.substr(1, text.size() - 2);
  }
  auto fields = split(text, ':');
  if (fields.size() != 5) throw ParseError(line, "control code must have 5 fields, got " + std::to_string(fields.size()));
  ControlCode cc;

  auto wait = fields[0];
  if (wait.size() != 1 + kNumBarriers || wait[0] != 'B') throw ParseError(line, "bad wait mask '" + std::string(wait) + "'");
  for (int b = 0; b < kNumBarriers; ++b) {
    char c = wait[static_cast<std::size_t>(b) + 1];
    if (c == '-') continue;
    if (c != static_cast<char>('0' + b)) throw ParseError(line, "bad wait mask '" + std::string(wait) + "'");
    cc.wait_mask[static_cast<std::size_t>(b)] = true;
  }

  auto barrier = [&](std::string_view f, char tag) -> std::optional<int> {
    if (f.size() != 2 || f[0] != tag) throw ParseError(line, "bad barrier field '" + std::string(f) + "'");
    if (f[1] == '-') return std::nullopt;
    if (f[1] < '0' || f[1] > '5') throw ParseError(line, "bad barrier field '" + std::string(f) + "'");
    return f[1] - '0';
  };
  cc.read_barrier = barrier(fields[1], 'R');
  cc.write_barrier = barrier(fields[2], 'W');

  if (fields[3] == "Y") cc.yield_flag = true;
  else if (fields[3] != "-") throw ParseError(line, "bad yield field '" + std::string(fields[3]) + "'");

  auto stall = fields[4];
  if (stall.size() != 3 || stall[0] != 'S' || !all_digits(stall.substr(1)))
    throw ParseError(line, "bad stall field '" + std::string(stall) + "'");
  cc.stall_count = to_int(stall.substr(1));
  if (cc.stall_count > 15) throw ParseError(line, "stall count out of range");
  return cc;
}

std::string to_string(const ControlCode& cc) {
  std::string out = "[B";
  for (int b = 0; b < kNumBarriers; ++b) out.push_back(cc.waits_on(b) ? static_cast<char>('0' + b) : '-');
  out += ":R";
  out.push_back(cc.read_barrier ? static_cast<char>('0' + *cc.read_barrier) : '-');
  out += ":W";
  out.push_back(cc.write_barrier ? static_cast<char>('0' + *cc.write_barrier) : '-');
  out += cc.yield_flag ? ":Y:S" : ":-:S";
  out.push_back(static_cast<char>('0' + cc.stall_count / 10));
  out.push_back(static_cast<char>('0' + cc.stall_count % 10));
  out.push_back(']');
  return out;
}

std::string to_string(Reg r) {
  switch (r.file) {
    case RegFile::R: return "R" + std::to_string(r.index);
    case RegFile::UR: return "UR" + std::to_string(r.index);
    case RegFile::P: return r.index == kTruePredicate ? "PT" : "P" + std::to_string(r.index);
    case RegFile::UP: return r.index == kTruePredicate ? "UPT" : "UP" + std::to_string(r.index);
  }
  return "?";
}

RegSet::RegSet(std::initializer_list<Reg> regs) {
  for (Reg r : regs) insert(r);
}

void RegSet::insert(Reg r) {
  auto it = std::lower_bound(regs_.begin(), regs_.end(), r);
  if (it == regs_.end() || *it != r) regs_.insert(it, r);
}

void RegSet::insert(const RegSet& other) {
  for (Reg r : other) insert(r);
}

bool RegSet::contains(Reg r) const { return std::binary_search(regs_.begin(), regs_.end(), r); }

bool RegSet::intersects(const RegSet& other) const {
  auto a = regs_.begin();
  auto b = other.regs_.begin();
  while (a != regs_.end() && b != other.regs_.end()) {
    if (*a == *b) return true;
    if (*a < *b) ++a;
    else ++b;
  }
  return false;
}

int adjacent_register(int reg_no) {
  if (reg_no < 0 || reg_no >= kZeroRegister) throw std::invalid_argument("register R" + std::to_string(reg_no) + " has no pair");
  int base = reg_no / 2;
  int mod = reg_no % 2;
  int flip = 1 - mod;
  return base * 2 + flip;
}

std::string_view to_string(OperandKind k) {
  switch (k) {
    case OperandKind::Register: return "register";
    case OperandKind::UniformRegister: return "uniform-register";
    case OperandKind::Predicate: return "predicate";
    case OperandKind::Immediate: return "immediate";
    case OperandKind::MemoryRef: return "memory-ref";
    case OperandKind::ConstantBank: return "constant-bank";
    case OperandKind::Special: return "special";
  }
  return "special";
}

Operand parse_operand(std::string_view token, std::size_t line) {
  Operand op;
  op.raw_text = collapse_spaces(token);
  std::string_view tok = op.raw_text;

  if (tok.find('[') != std::string_view::npos || tok.find(']') != std::string_view::npos) {
    bool constant = tok.starts_with("c[") || tok.starts_with("cx[") || tok.starts_with("-c[") ||
                    tok.starts_with("|c[") || tok.starts_with("-|c[");
    op.kind = constant ? OperandKind::ConstantBank : OperandKind::MemoryRef;
    parse_bracket_groups(op, tok, line);
    if (std::count(tok.begin(), tok.end(), '[') != std::count(tok.begin(), tok.end(), ']'))
      throw ParseError(line, "unbalanced brackets in '" + op.raw_text + "'");
    return op;
  }

  std::string_view core = tok;
  while (!core.empty() && (core.front() == '-' || core.front() == '!' || core.front() == '~' || core.front() == '|')) {
    if (core.front() != '|') op.negated = true;
    core.remove_prefix(1);
  }
  while (!core.empty() && core.back() == '|') core.remove_suffix(1);

  if (auto p = match_predicate(core)) {
    op.kind = OperandKind::Predicate;
    if (p->index != kTruePredicate) {
      op.base_register = p->index;
      op.registers.insert(Reg{p->file, p->index});
    }
    return op;
  }
  if (auto r = match_register(core)) {
    op.kind = r->file == RegFile::UR ? OperandKind::UniformRegister : OperandKind::Register;
    add_register(op, *r, true);
    return op;
  }
  if (looks_immediate(tok)) {
    op.kind = OperandKind::Immediate;
    op.negated = false;
    return op;
  }
  op.kind = OperandKind::Special;
  op.negated = false;
  return op;
}

std::string Instruction::mnemonic() const {
  std::string out = opcode;
  for (const auto& m : modifiers) out += "." + m;
  return out;
}

bool Instruction::has_modifier(std::string_view m) const {
  return std::find(modifiers.begin(), modifiers.end(), m) != modifiers.end();
}

std::string Instruction::body() const {
  std::string out;
  if (guard) {
    out += guard->negated ? "@!" : "@";
    out += to_string(guard->predicate);
    out += ' ';
  }
  out += mnemonic();
  for (std::size_t i = 0; i < operands.size(); ++i) {
    out += i == 0 ? " " : ", ";
    out += operands[i].raw_text;
  }
  return out;
}

bool Instruction::operator==(const Instruction& o) const {
  return control == o.control && guard == o.guard && opcode == o.opcode && modifiers == o.modifiers &&
         operands == o.operands && defs == o.defs && uses == o.uses && address == o.address && trailer == o.trailer;
}

Instruction parse_instruction(std::string_view text, std::size_t line_index) {
  const std::size_t line = line_index + 1;
  Instruction inst;
  inst.line_index = line_index;
  text = trim(text);
  if (!text.starts_with('[')) throw ParseError(line, "instruction without control code");
  auto close = text.find(']');
  if (close == std::string_view::npos) throw ParseError(line, "unbalanced brackets in control code");
  inst.control = parse_control_code(text.substr(0, close + 1), line);
  text = trim(text.substr(close + 1));

  if (text.starts_with("/*")) {
    auto end = text.find("*/");
    if (end == std::string_view::npos) throw ParseError(line, "unterminated address comment");
    inst.address = std::string(text.substr(0, end + 2));
    text = trim(text.substr(end + 2));
  }

  auto semi = text.find(';');
  if (semi == std::string_view::npos) throw ParseError(line, "missing ';'");
  inst.trailer = collapse_spaces(text.substr(semi + 1));
  text = trim(text.substr(0, semi));

  if (text.starts_with('@')) {
    auto sp = text.find_first_of(" \t");
    if (sp == std::string_view::npos) throw ParseError(line, "guard without opcode");
    std::string_view g = text.substr(1, sp - 1);
    Guard guard;
    if (g.starts_with('!')) {
      guard.negated = true;
      g.remove_prefix(1);
    }
    auto p = match_predicate(g);
    if (!p) throw ParseError(line, "bad guard predicate '" + std::string(g) + "'");
    guard.predicate = Reg{p->file, p->index};
    inst.guard = guard;
    text = trim(text.substr(sp));
  }

  auto sp = text.find_first_of(" \t");
  std::string_view mnemonic = text.substr(0, sp);
  if (mnemonic.empty()) throw ParseError(line, "missing opcode");
  auto parts = split(mnemonic, '.');
  inst.opcode = std::string(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) inst.modifiers.emplace_back(parts[i]);

  if (sp != std::string_view::npos) {
    for (auto tok : split_operands(text.substr(sp), line)) inst.operands.push_back(parse_operand(tok, line));
  }
  compute_defs_uses(inst);
  return inst;
}

std::string serialize(const Instruction& inst) {
  std::string out = to_string(inst.control);
  out += ' ';
  if (!inst.address.empty()) out += inst.address + ' ';
  out += inst.body();
  out += " ;";
  if (!inst.trailer.empty()) out += ' ' + inst.trailer;
  return out;
}

Kernel::Kernel(std::vector<Item> items) : items_(std::move(items)) { index(); }

void Kernel::index() {
  inst_items_.clear();
  blocks_.clear();
  block_of_.clear();
  bool open = false;
  auto close_block = [&] {
    if (open) blocks_.back().end = inst_items_.size();
    open = false;
  };
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (std::holds_alternative<Label>(items_[i])) {
      close_block();
      continue;
    }
    const auto* inst = std::get_if<Instruction>(&items_[i]);
    if (!inst) continue;
    bool sync = is_sync(*inst);
    if (sync) close_block();
    if (!open) {
      blocks_.push_back(Block{inst_items_.size(), inst_items_.size()});
      open = true;
    }
    block_of_.push_back(blocks_.size() - 1);
    inst_items_.push_back(i);
    if (sync) close_block();
  }
  close_block();
}

const Instruction& Kernel::instruction(std::size_t ordinal) const {
  return std::get<Instruction>(items_[inst_items_.at(ordinal)]);
}

void Kernel::swap_adjacent(std::size_t i) {
  if (i + 1 >= inst_items_.size()) throw std::out_of_range("swap_adjacent past end of kernel");
  if (block_of_[i] != block_of_[i + 1]) throw std::logic_error("swap_adjacent across a block boundary");
  std::swap(items_[inst_items_[i]], items_[inst_items_[i + 1]]);
}

Kernel Kernel::permuted(const std::vector<std::size_t>& order) const {
  if (order.size() != inst_items_.size()) throw std::invalid_argument("permutation size mismatch");
  std::vector<Item> items = items_;
  for (std::size_t p = 0; p < order.size(); ++p) items[inst_items_[p]] = items_[inst_items_[order[p]]];
  Kernel out;
  out.items_ = std::move(items);
  out.inst_items_ = inst_items_;
  out.blocks_ = blocks_;
  out.block_of_ = block_of_;
  return out;
}

Kernel parse_kernel(std::string_view text) {
  std::vector<Item> items;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    std::string_view raw = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() : nl + 1;
    if (raw.ends_with('\r')) raw.remove_suffix(1);
    auto t = trim(raw);
    if (t.empty() || t.starts_with("//") || (t.starts_with("/*") && t.ends_with("*/") && t.find('[') == std::string_view::npos)) {
      items.emplace_back(Directive{std::string(raw)});
    } else if (t.starts_with('[')) {
      items.emplace_back(parse_instruction(t, line_no));
    } else if (t.ends_with(':')) {
      items.emplace_back(Label{std::string(raw)});
    } else if (t.starts_with('.')) {
      items.emplace_back(Directive{std::string(raw)});
    } else {
      throw ParseError(line_no + 1, "instruction without control code");
    }
    ++line_no;
  }
  return Kernel(std::move(items));
}

std::string serialize_kernel(const Kernel& k) {
  std::string out;
  for (const auto& item : k.items()) {
    if (const auto* inst = std::get_if<Instruction>(&item)) out += serialize(*inst);
    else if (const auto* label = std::get_if<Label>(&item)) out += label->text;
    else out += std::get<Directive>(item).text;
    out += '\n';
  }
  return out;
}

std::string dump_structure(const Kernel& k) {
  using nlohmann::json;
  auto regs = [](const RegSet& s) {
    json a = json::array();
    for (Reg r : s) a.push_back(to_string(r));
    return a;
  };
  std::ostringstream os;
  std::size_t ordinal = 0;
  for (const auto& item : k.items()) {
    json rec;
    if (const auto* inst = std::get_if<Instruction>(&item)) {
      rec["type"] = "instruction";
      rec["ordinal"] = ordinal;
      rec["block"] = k.block_of(ordinal);
      ++ordinal;
      rec["line_index"] = inst->line_index;
      const auto& cc = inst->control;
      json wait = json::array();
      for (bool b : cc.wait_mask) wait.push_back(b);
      rec["control"] = {{"wait_mask", wait},
                        {"read_barrier", cc.read_barrier ? json(*cc.read_barrier) : json(nullptr)},
                        {"write_barrier", cc.write_barrier ? json(*cc.write_barrier) : json(nullptr)},
                        {"yield_flag", cc.yield_flag},
                        {"stall_count", cc.stall_count}};
      if (inst->guard) {
        rec["guard"] = {{"predicate", to_string(inst->guard->predicate)}, {"negated", inst->guard->negated}};
      } else {
        rec["guard"] = nullptr;
      }
      rec["opcode"] = inst->opcode;
      rec["modifiers"] = inst->modifiers;
      json ops = json::array();
      for (const auto& op : inst->operands) {
        ops.push_back({{"kind", std::string(to_string(op.kind))},
                       {"base_register", op.base_register ? json(*op.base_register) : json(nullptr)},
                       {"paired_register", op.paired_register ? json(*op.paired_register) : json(nullptr)},
                       {"raw_text", op.raw_text}});
      }
      rec["operands"] = ops;
      rec["defs"] = regs(inst->defs);
      rec["uses"] = regs(inst->uses);
      rec["is_memory"] = is_memory(*inst);
    } else if (const auto* label = std::get_if<Label>(&item)) {
      rec["type"] = "label";
      rec["text"] = label->text;
    } else {
      rec["type"] = "directive";
      rec["text"] = std::get<Directive>(item).text;
    }
    os << rec.dump() << '\n';
  }
  return os.str();
}

}  // namespace sassopt

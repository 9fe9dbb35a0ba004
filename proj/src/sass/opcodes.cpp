#include <algorithm>
#include <iterator>
#include <string_view>

#include "sassopt/sass.hpp"

namespace sassopt {
namespace {

// Global, shared, and generic load/store families.
constexpr std::string_view kMemoryOpcodes[] = {
    "LD", "LDG", "LDGSTS", "LDS", "LDSM", "ST", "STG", "STS",
};

// Barrier, synchronization, and control-transfer instructions. Reordering
// never crosses one of these.
constexpr std::string_view kSyncOpcodes[] = {
    "ARRIVES", "BAR",   "BMOV",      "BPT",   "BRA",      "BREAK", "BRX",
    "BRXU",    "BSSY",  "BSYNC",     "CALL",  "DEPBAR",   "ERRBAR", "EXIT",
    "JMP",     "JMX",   "JMXU",      "KILL",  "LDGDEPBAR", "MEMBAR", "NANOSLEEP",
    "RET",     "RPCMOV", "RTT",      "WARPSYNC", "YIELD", "CCTL",
};

constexpr std::string_view kNoDestination[] = {
    "ARRIVES", "BAR",  "BPT",   "BRA",   "BREAK", "BRX",      "BRXU",  "BSYNC",
    "CALL",    "CCTL", "DEPBAR", "ERRBAR", "EXIT", "JMP",      "JMX",   "JMXU",
    "KILL",    "LDGDEPBAR", "LDGSTS", "MEMBAR", "NANOSLEEP", "NOP", "RED", "RET",
    "ST",      "STG",  "STL",   "STS",   "SUST",  "WARPSYNC", "YIELD",
};

// Ampere instruction set as listed by the CUDA binary utilities docs.
constexpr std::string_view kKnownOpcodes[] = {
    "FADD",   "FADD32I", "FCHK",    "FFMA32I", "FFMA",    "FMNMX",   "FMUL",    "FMUL32I",
    "FSEL",   "FSET",    "FSETP",   "FSWZADD", "MUFU",    "HADD2",   "HADD2_32I", "HFMA2",
    "HFMA2_32I", "HMMA", "HMNMX2",  "HMUL2",   "HMUL2_32I", "HSET2", "HSETP2",  "DADD",
    "DFMA",   "DMMA",    "DMUL",    "DSETP",   "BMMA",    "BMSK",    "BREV",    "FLO",
    "IABS",   "IADD",    "IADD3",   "IADD32I", "IDP",     "IDP4A",   "IMAD",    "IMMA",
    "IMNMX",  "IMUL",    "IMUL32I", "ISCADD",  "ISCADD32I", "ISETP", "LEA",     "LOP",
    "LOP3",   "LOP32I",  "POPC",    "SHF",     "SHL",     "SHR",     "VABSDIFF", "VABSDIFF4",
    "F2F",    "F2I",     "I2F",     "I2I",     "I2IP",    "FRND",    "F2FP",    "MOV",
    "MOV32I", "MOVM",    "PRMT",    "SEL",     "SGXT",    "SHFL",    "PLOP3",   "PSETP",
    "P2R",    "R2P",     "LD",      "LDC",     "LDG",     "LDGDEPBAR", "LDGSTS", "LDL",
    "LDS",    "LDSM",    "ST",      "STG",     "STL",     "STS",     "MATCH",   "QSPC",
    "ATOM",   "ATOMS",   "ATOMG",   "RED",     "CCTL",    "CCTLL",   "ERRBAR",  "MEMBAR",
    "CCTLT",  "R2UR",    "REDUX",   "S2UR",    "UBMSK",   "UBREV",   "UCLEA",   "UF2FP",
    "UFLO",   "UIADD3",  "UIMAD",   "UISETP",  "ULDC",    "ULEA",    "ULOP",    "ULOP3",
    "ULOP32I", "UMOV",   "UP2UR",   "UPLOP3",  "UPOPC",   "UPRMT",   "UPSETP",  "UR2UP",
    "USEL",   "USGXT",   "USHF",    "USHL",    "USHR",    "VOTEU",   "TEX",     "TLD",
    "TLD4",   "TMML",    "TXD",     "TXQ",     "SUATOM",  "SULD",    "SURED",   "SUST",
    "BMOV",   "BPT",     "BRA",     "BREAK",   "BRX",     "BRXU",    "BSSY",    "BSYNC",
    "CALL",   "EXIT",    "JMP",     "JMX",     "JMXU",    "KILL",    "NANOSLEEP", "RET",
    "RPCMOV", "RTT",     "WARPSYNC", "YIELD",  "B2R",     "BAR",     "CS2R",    "DEPBAR",
    "GETLMEMBASE", "LEPC", "NOP",   "PMTRIG",  "R2B",     "S2R",     "SETCTAID", "SETLMEMBASE",
    "VOTE",   "ARRIVES",
};

template <std::size_t N>
bool contains(const std::string_view (&set)[N], std::string_view key) {
  return std::find(std::begin(set), std::end(set), key) != std::end(set);
}

}  // namespace

bool is_memory_opcode(std::string_view root) { return contains(kMemoryOpcodes, root); }
bool is_memory(const Instruction& inst) { return is_memory_opcode(inst.opcode); }
bool is_sync_opcode(std::string_view root) { return contains(kSyncOpcodes, root); }
bool is_sync(const Instruction& inst) { return is_sync_opcode(inst.opcode); }
bool is_known_opcode(std::string_view root) { return contains(kKnownOpcodes, root); }
bool has_no_destination(std::string_view root) { return contains(kNoDestination, root); }

}  // namespace sassopt

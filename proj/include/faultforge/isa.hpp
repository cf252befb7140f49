#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace faultforge {

using Word = std::uint32_t;
using Reg = std::uint8_t;

inline constexpr Reg kNoReg = 0xff;
inline constexpr Reg kPcReg = 15;
inline constexpr unsigned kNumRegs = 16;
inline constexpr unsigned kDumpedRegs = 14;

enum class Opcode : std::uint8_t {
    Nop,
    Movi,
    Mov,
    Add,
    Addi,
    Sub,
    Subi,
    And,
    Orr,
    Eor,
    Lsl,
    Lsr,
    Cmp,
    Cmpi,
    Ldr,
    Str,
    B,
    Beq,
    Bne,
    Blt,
    Bge,
    Halt,
};

std::string_view opcode_name(Opcode op);
std::optional<Opcode> opcode_from_name(std::string_view name);

bool is_branch(Opcode op);
bool is_cond_branch(Opcode op);
Opcode negate_branch(Opcode op);
bool is_compare(Opcode op);
bool is_logic(Opcode op);

// Operand slots an operand substitution can target.
enum class Slot : std::uint8_t { Src1, Src2, Imm, Dest };

std::string_view slot_name(Slot s);
Slot slot_from_name(std::string_view name);

struct Instruction {
    Opcode op = Opcode::Nop;
    Reg dest = kNoReg;
    Reg src1 = kNoReg;
    Reg src2 = kNoReg;
    std::optional<std::int32_t> imm;
    std::string label;
    std::uint32_t target = 0;

    bool operator==(const Instruction &) const = default;

    bool has(Slot s) const;
    std::vector<Slot> slots() const;
    // Registers read, in src1/src2 order (no duplicates removed).
    std::array<Reg, 2> reads() const { return {src1, src2}; }
    bool reads_reg(Reg r) const { return r != kNoReg && (src1 == r || src2 == r); }
    bool writes_reg(Reg r) const { return r != kNoReg && dest == r; }
};

std::string format_instruction(const Instruction &ins);

struct Region {
    std::string name;
    Word base = 0;
    Word length = 0;
    std::vector<Word> init;

    bool operator==(const Region &) const = default;
};

struct BasicBlock {
    std::uint32_t id = 0;
    std::uint32_t entry = 0;
    std::uint32_t exit = 0;  // inclusive
    std::vector<std::uint32_t> successors;

    bool operator==(const BasicBlock &) const = default;
};

struct Program {
    std::vector<Instruction> code;
    std::map<std::string, std::uint32_t> labels;
    std::vector<Region> regions;
    std::array<Word, kNumRegs> init_regs{};
    std::vector<BasicBlock> blocks;
    std::vector<std::uint32_t> block_of;

    bool operator==(const Program &o) const {
        return code == o.code && labels == o.labels && regions == o.regions &&
               init_regs == o.init_regs;
    }

    std::size_t size() const { return code.size(); }
    std::size_t memory_words() const;
    std::size_t output_words() const { return kDumpedRegs + memory_words(); }
    // Index into MachineState::mem for a word address, if mapped.
    std::optional<std::size_t> memory_slot(Word addr) const;
    std::uint32_t label_index(std::string_view name) const;
    const Region *find_region(std::string_view name) const;
    // Offset of a region's first word inside MachineState::mem.
    std::size_t region_offset(std::string_view name) const;
    bool is_block_entry(std::uint32_t idx) const;
    bool is_edge(std::uint32_t from_block, std::uint32_t to_block) const;
};

class AsmError : public std::runtime_error {
  public:
    AsmError(int line, const std::string &reason);
    int line() const { return line_; }
    const std::string &reason() const { return reason_; }

  private:
    int line_;
    std::string reason_;
};

class Trap : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Incremental construction used by the assembler and by code transforms.
class ProgramBuilder {
  public:
    void label(const std::string &name, int line = 0);
    void emit(Instruction ins, int line = 0);
    void region(Region r, int line = 0);
    void init(Reg r, Word value) { init_[r] = value; }
    std::size_t size() const { return code_.size(); }
    Program build() const;

  private:
    std::vector<Instruction> code_;
    std::vector<int> lines_;
    std::map<std::string, std::uint32_t> labels_;
    std::vector<Region> regions_;
    std::array<Word, kNumRegs> init_{};
};

Program assemble(std::string_view text);
std::string disassemble(const Program &p);

std::vector<BasicBlock> build_cfg(const Program &p);

nlohmann::json program_to_json(const Program &p);
Program program_from_json(const nlohmann::json &j);

struct Flags {
    bool n = false;
    bool z = false;
    bool c = false;
    bool v = false;

    bool operator==(const Flags &) const = default;
};

struct MachineState {
    std::array<Word, kNumRegs> regs{};
    Flags flags;
    std::vector<Word> mem;
    bool halted = false;

    bool operator==(const MachineState &) const = default;

    static MachineState initial(const Program &p);
    Word pc() const { return regs[kPcReg]; }
};

struct OutputBuffer {
    std::vector<Word> words;

    bool operator==(const OutputBuffer &) const = default;

    std::span<const Word> reg_words() const {
        return std::span<const Word>(words).first(kDumpedRegs);
    }
    std::span<const Word> mem_words() const {
        return std::span<const Word>(words).subspan(kDumpedRegs);
    }
    std::string hex() const;
    static OutputBuffer from_hex(std::string_view hex);
    static OutputBuffer capture(const MachineState &s);
};

struct TraceEntry {
    std::uint32_t dyn = 0;
    std::uint32_t static_index = 0;
    Reg dest = kNoReg;
    Word value = 0;
    bool mem_read = false;
    bool mem_write = false;
    Word addr = 0;
    Word mem_value = 0;
    bool taken = false;

    bool operator==(const TraceEntry &) const = default;
};

enum class Termination { Halted, Trapped, BudgetExceeded };

std::string_view termination_name(Termination t);

struct RunResult {
    OutputBuffer output;
    std::vector<TraceEntry> trace;
    Termination termination = Termination::Halted;
    std::uint64_t steps = 0;
};

MachineState step(const MachineState &state, const Program &program);
RunResult run(const Program &program, std::uint64_t budget, bool record_trace = true);

namespace detail {

enum class ExecStatus { Ok, Halted, Trapped };

// Per-instruction perturbation hook used by the fault executor.
struct Override {
    bool skip = false;
    struct Sub {
        Slot slot;
        bool is_reg;
        Reg reg;
        std::int32_t imm;
    };
    std::vector<Sub> subs;
    std::optional<Word> load_value;
    std::optional<std::uint32_t> redirect;  // jump target index after the instruction
};

// Executes code[idx] against s. When advance_pc is false the pc is left untouched
// (used for replays).
ExecStatus execute(const Program &p, std::uint32_t idx, MachineState &s, const Override *ov,
                   TraceEntry *effects, bool advance_pc = true);

}  // namespace detail

}  // namespace faultforge

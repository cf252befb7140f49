#include "faultforge/isa.hpp"

#include <cstdio>

namespace faultforge {

namespace {

struct OpInfo {
    Opcode op;
    std::string_view name;
};

constexpr OpInfo kOps[] = {
    {Opcode::Nop, "nop"},   {Opcode::Movi, "movi"}, {Opcode::Mov, "mov"},   {Opcode::Add, "add"},
    {Opcode::Addi, "addi"}, {Opcode::Sub, "sub"},   {Opcode::Subi, "subi"}, {Opcode::And, "and"},
    {Opcode::Orr, "orr"},   {Opcode::Eor, "eor"},   {Opcode::Lsl, "lsl"},   {Opcode::Lsr, "lsr"},
    {Opcode::Cmp, "cmp"},   {Opcode::Cmpi, "cmpi"}, {Opcode::Ldr, "ldr"},   {Opcode::Str, "str"},
    {Opcode::B, "b"},       {Opcode::Beq, "beq"},   {Opcode::Bne, "bne"},   {Opcode::Blt, "blt"},
    {Opcode::Bge, "bge"},   {Opcode::Halt, "halt"},
};

std::string reg_name(Reg r) { return "r" + std::to_string(r); }

std::string imm_text(std::int32_t v) {
    if (v >= -4096 && v <= 4096)
        return "#" + std::to_string(v);
    char buf[16];
    std::snprintf(buf, sizeof buf, "#0x%x", static_cast<unsigned>(v));
    return buf;
}

std::string mem_operand(Reg base, const std::optional<std::int32_t> &imm) {
    std::int32_t off = imm.value_or(0);
    if (base == kNoReg)
        return "[" + imm_text(off) + "]";
    if (off == 0)
        return "[" + reg_name(base) + "]";
    return "[" + reg_name(base) + ", " + imm_text(off) + "]";
}

}  // namespace

std::string_view opcode_name(Opcode op) {
    for (const auto &o : kOps)
        if (o.op == op)
            return o.name;
    return "?";
}

std::optional<Opcode> opcode_from_name(std::string_view name) {
    for (const auto &o : kOps)
        if (o.name == name)
            return o.op;
    return std::nullopt;
}

bool is_branch(Opcode op) {
    return op == Opcode::B || is_cond_branch(op);
}

bool is_cond_branch(Opcode op) {
    return op == Opcode::Beq || op == Opcode::Bne || op == Opcode::Blt || op == Opcode::Bge;
}

Opcode negate_branch(Opcode op) {
    switch (op) {
    case Opcode::Beq: return Opcode::Bne;
    case Opcode::Bne: return Opcode::Beq;
    case Opcode::Blt: return Opcode::Bge;
    case Opcode::Bge: return Opcode::Blt;
    default: throw std::invalid_argument("not a conditional branch");
    }
}

bool is_compare(Opcode op) { return op == Opcode::Cmp || op == Opcode::Cmpi; }

bool is_logic(Opcode op) {
    return op == Opcode::And || op == Opcode::Orr || op == Opcode::Eor || op == Opcode::Lsl ||
           op == Opcode::Lsr;
}

std::string_view slot_name(Slot s) {
    switch (s) {
    case Slot::Src1: return "src1";
    case Slot::Src2: return "src2";
    case Slot::Imm: return "imm";
    case Slot::Dest: return "dest";
    }
    return "?";
}

Slot slot_from_name(std::string_view name) {
    if (name == "src1") return Slot::Src1;
    if (name == "src2") return Slot::Src2;
    if (name == "imm") return Slot::Imm;
    if (name == "dest") return Slot::Dest;
    throw std::invalid_argument("unknown operand slot '" + std::string(name) + "'");
}

bool Instruction::has(Slot s) const {
    if (is_branch(op) || op == Opcode::Nop || op == Opcode::Halt)
        return false;
    switch (s) {
    case Slot::Src1: return src1 != kNoReg;
    case Slot::Src2: return src2 != kNoReg;
    case Slot::Imm: return imm.has_value();
    case Slot::Dest: return dest != kNoReg;
    }
    return false;
}

std::vector<Slot> Instruction::slots() const {
    std::vector<Slot> out;
    for (Slot s : {Slot::Src1, Slot::Src2, Slot::Imm, Slot::Dest})
        if (has(s))
            out.push_back(s);
    return out;
}

std::string format_instruction(const Instruction &in) {
    const std::string d = in.dest != kNoReg ? reg_name(in.dest) : "";
    const std::string a = in.src1 != kNoReg ? reg_name(in.src1) : "";
    switch (in.op) {
    case Opcode::Nop: return "nop";
    case Opcode::Halt: return "halt";
    case Opcode::Movi: return "mov " + d + ", " + imm_text(*in.imm);
    case Opcode::Mov: return "mov " + d + ", " + a;
    case Opcode::Add:
    case Opcode::Sub: return std::string(opcode_name(in.op)) + " " + d + ", " + a + ", " + reg_name(in.src2);
    case Opcode::Addi: return "add " + d + ", " + a + ", " + imm_text(*in.imm);
    case Opcode::Subi: return "sub " + d + ", " + a + ", " + imm_text(*in.imm);
    case Opcode::And:
    case Opcode::Orr:
    case Opcode::Eor:
    case Opcode::Lsl:
    case Opcode::Lsr:
        return std::string(opcode_name(in.op)) + " " + d + ", " + a + ", " +
               (in.src2 != kNoReg ? reg_name(in.src2) : imm_text(*in.imm));
    case Opcode::Cmp: return "cmp " + a + ", " + reg_name(in.src2);
    case Opcode::Cmpi: return "cmp " + a + ", " + imm_text(*in.imm);
    case Opcode::Ldr: return "ldr " + d + ", " + mem_operand(in.src1, in.imm);
    case Opcode::Str: return "str " + a + ", " + mem_operand(in.src2, in.imm);
    case Opcode::B:
    case Opcode::Beq:
    case Opcode::Bne:
    case Opcode::Blt:
    case Opcode::Bge: return std::string(opcode_name(in.op)) + " " + in.label;
    }
    return "?";
}

}  // namespace faultforge

#pragma once

#include <map>
#include <string>
#include <vector>

#include "faultforge/hardening.hpp"

namespace faultforge::hardening_detail {

inline Instruction make(Opcode op, Reg dest = kNoReg, Reg src1 = kNoReg, Reg src2 = kNoReg,
                        std::optional<std::int32_t> imm = std::nullopt) {
    Instruction in;
    in.op = op;
    in.dest = dest;
    in.src1 = src1;
    in.src2 = src2;
    in.imm = imm;
    return in;
}

inline std::int32_t as_imm(Word w) { return static_cast<std::int32_t>(w); }

inline Instruction movi(Reg d, Word v) { return make(Opcode::Movi, d, kNoReg, kNoReg, as_imm(v)); }
inline Instruction eori(Reg d, Reg a, Word v) { return make(Opcode::Eor, d, a, kNoReg, as_imm(v)); }
inline Instruction cmp(Reg a, Reg b) { return make(Opcode::Cmp, kNoReg, a, b); }
inline Instruction cmpi(Reg a, Word v) { return make(Opcode::Cmpi, kNoReg, a, kNoReg, as_imm(v)); }
inline Instruction ldr_abs(Reg d, Word addr) { return make(Opcode::Ldr, d, kNoReg, kNoReg, as_imm(addr)); }
inline Instruction ldr(Reg d, Reg base, std::optional<std::int32_t> off) { return make(Opcode::Ldr, d, base, kNoReg, off); }
inline Instruction str_abs(Reg v, Word addr) { return make(Opcode::Str, kNoReg, v, kNoReg, as_imm(addr)); }
inline Instruction halt() { return make(Opcode::Halt); }

inline Instruction branch(Opcode op, const std::string &label) {
    Instruction in = make(op);
    in.label = label;
    return in;
}

// Registers named by an instruction, r15 excluded.
inline void collect_regs(const Instruction &in, std::set<Reg> &out) {
    for (Reg r : {in.dest, in.src1, in.src2})
        if (r != kNoReg && r != kPcReg)
            out.insert(r);
}

inline Word next_free_address(const Program &p) {
    Word top = kRegionBase;
    for (const auto &r : p.regions)
        top = std::max<Word>(top, r.base + r.length);
    return top;
}

class Emitter {
  public:
    explicit Emitter(const Program &src) {
        for (const auto &r : src.regions)
            b_.region(r);
        for (Reg r = 0; r < kPcReg; ++r)
            b_.init(r, src.init_regs[r]);
    }

    std::uint32_t here() const { return static_cast<std::uint32_t>(b_.size()); }
    void label(const std::string &name) { b_.label(name); }
    std::uint32_t emit(Instruction in) {
        auto at = here();
        b_.emit(std::move(in));
        return at;
    }
    std::string fresh(const std::string &stem) { return "__" + stem + std::to_string(counter_++); }
    void region(Region r) { b_.region(std::move(r)); }
    void init(Reg r, Word v) { b_.init(r, v); }
    Program build() const { return b_.build(); }

  private:
    ProgramBuilder b_;
    int counter_ = 0;
};

inline std::multimap<std::uint32_t, std::string> labels_by_index(const Program &p) {
    std::multimap<std::uint32_t, std::string> out;
    for (const auto &[name, idx] : p.labels)
        out.emplace(idx, name);
    return out;
}

inline void emit_handler(Emitter &e, Word ctrl) {
    e.label(kDetectLabel);
    e.emit(movi(14, kDetectSentinel));
    e.emit(str_abs(14, ctrl));
    e.emit(halt());
}

}  // namespace faultforge::hardening_detail

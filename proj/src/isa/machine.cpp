#include <algorithm>
#include <cstdio>

#include "faultforge/isa.hpp"

namespace faultforge {

std::size_t Program::memory_words() const {
    std::size_t n = 0;
    for (const auto &r : regions)
        n += r.length;
    return n;
}

std::optional<std::size_t> Program::memory_slot(Word addr) const {
    std::size_t off = 0;
    for (const auto &r : regions) {
        if (addr - r.base < r.length)
            return off + (addr - r.base);
        off += r.length;
    }
    return std::nullopt;
}

std::uint32_t Program::label_index(std::string_view name) const {
    auto it = labels.find(std::string(name));
    if (it == labels.end())
        throw std::out_of_range("no label '" + std::string(name) + "'");
    return it->second;
}

const Region *Program::find_region(std::string_view name) const {
    for (const auto &r : regions)
        if (r.name == name)
            return &r;
    return nullptr;
}

std::size_t Program::region_offset(std::string_view name) const {
    std::size_t off = 0;
    for (const auto &r : regions) {
        if (r.name == name)
            return off;
        off += r.length;
    }
    throw std::out_of_range("no region '" + std::string(name) + "'");
}

bool Program::is_block_entry(std::uint32_t idx) const {
    return idx < block_of.size() && blocks[block_of[idx]].entry == idx;
}

bool Program::is_edge(std::uint32_t from, std::uint32_t to) const {
    const auto &s = blocks.at(from).successors;
    return std::find(s.begin(), s.end(), to) != s.end();
}

std::string_view termination_name(Termination t) {
    switch (t) {
    case Termination::Halted: return "halted";
    case Termination::Trapped: return "trapped";
    case Termination::BudgetExceeded: return "budget-exceeded";
    }
    return "?";
}

MachineState MachineState::initial(const Program &p) {
    MachineState s;
    s.regs = p.init_regs;
    s.regs[kPcReg] = 0;
    s.mem.reserve(p.memory_words());
    for (const auto &r : p.regions)
        s.mem.insert(s.mem.end(), r.init.begin(), r.init.end());
    return s;
}

std::string OutputBuffer::hex() const {
    std::string out;
    out.reserve(words.size() * 8);
    char buf[9];
    for (Word w : words) {
        std::snprintf(buf, sizeof buf, "%08x", w);
        out += buf;
    }
    return out;
}

OutputBuffer OutputBuffer::from_hex(std::string_view hex) {
    if (hex.size() % 8 != 0)
        throw std::invalid_argument("buffer hex length is not a multiple of 8");
    OutputBuffer b;
    for (std::size_t i = 0; i < hex.size(); i += 8) {
        Word w = 0;
        for (std::size_t k = 0; k < 8; ++k) {
            char c = hex[i + k];
            unsigned v;
            if (c >= '0' && c <= '9')
                v = c - '0';
            else if (c >= 'a' && c <= 'f')
                v = c - 'a' + 10;
            else if (c >= 'A' && c <= 'F')
                v = c - 'A' + 10;
            else
                throw std::invalid_argument("bad hex digit in buffer");
            w = (w << 4) | v;
        }
        b.words.push_back(w);
    }
    return b;
}

OutputBuffer OutputBuffer::capture(const MachineState &s) {
    OutputBuffer b;
    b.words.reserve(kDumpedRegs + s.mem.size());
    b.words.insert(b.words.end(), s.regs.begin(), s.regs.begin() + kDumpedRegs);
    b.words.insert(b.words.end(), s.mem.begin(), s.mem.end());
    return b;
}

namespace detail {

ExecStatus execute(const Program &p, std::uint32_t idx, MachineState &s, const Override *ov,
                   TraceEntry *fx, bool advance_pc) {
    const Instruction &in = p.code[idx];
    std::uint32_t next = idx + 1;
    if (fx) {
        *fx = TraceEntry{};
        fx->static_index = idx;
    }
    auto finish = [&](ExecStatus st) {
        if (ov && ov->redirect)
            next = *ov->redirect;
        if (advance_pc)
            s.regs[kPcReg] = next;
        return st;
    };
    if (ov && ov->skip)
        return finish(ExecStatus::Ok);

    auto rv = [&](Reg r) -> Word { return r == kPcReg ? idx : s.regs[r]; };
    Word v1 = in.src1 != kNoReg ? rv(in.src1) : 0;
    Word v2 = in.src2 != kNoReg ? rv(in.src2) : 0;
    Word vi = in.imm ? static_cast<Word>(*in.imm) : 0;
    Reg dest = in.dest;
    if (ov) {
        for (const auto &sub : ov->subs) {
            Word val = sub.is_reg ? rv(sub.reg) : static_cast<Word>(sub.imm);
            switch (sub.slot) {
            case Slot::Src1: v1 = val; break;
            case Slot::Src2: v2 = val; break;
            case Slot::Imm: vi = val; break;
            case Slot::Dest: dest = sub.reg; break;
            }
        }
    }
    const Word second = in.src2 != kNoReg ? v2 : vi;

    auto write = [&](Word value) -> bool {
        if (dest == kPcReg)
            return false;
        s.regs[dest] = value;
        if (fx) {
            fx->dest = dest;
            fx->value = value;
        }
        return true;
    };
    auto shift = [](Word v, Word by, bool left) -> Word {
        if (by >= 32)
            return 0;
        return left ? v << by : v >> by;
    };

    bool ok = true;
    switch (in.op) {
    case Opcode::Nop: break;
    case Opcode::Movi: ok = write(vi); break;
    case Opcode::Mov: ok = write(v1); break;
    case Opcode::Add:
    case Opcode::Addi: ok = write(v1 + second); break;
    case Opcode::Sub:
    case Opcode::Subi: ok = write(v1 - second); break;
    case Opcode::And: ok = write(v1 & second); break;
    case Opcode::Orr: ok = write(v1 | second); break;
    case Opcode::Eor: ok = write(v1 ^ second); break;
    case Opcode::Lsl: ok = write(shift(v1, second, true)); break;
    case Opcode::Lsr: ok = write(shift(v1, second, false)); break;
    case Opcode::Cmp:
    case Opcode::Cmpi: {
        Word r = v1 - second;
        s.flags.n = (r >> 31) != 0;
        s.flags.z = r == 0;
        s.flags.c = v1 >= second;
        s.flags.v = (((v1 ^ second) & (v1 ^ r)) >> 31) != 0;
        break;
    }
    case Opcode::Ldr: {
        Word addr = v1 + vi;
        auto slot = p.memory_slot(addr);
        if (!slot)
            return ExecStatus::Trapped;
        Word value = ov && ov->load_value ? *ov->load_value : s.mem[*slot];
        if (fx) {
            fx->mem_read = true;
            fx->addr = addr;
            fx->mem_value = s.mem[*slot];
        }
        ok = write(value);
        break;
    }
    case Opcode::Str: {
        Word addr = v2 + vi;
        auto slot = p.memory_slot(addr);
        if (!slot)
            return ExecStatus::Trapped;
        s.mem[*slot] = v1;
        if (fx) {
            fx->mem_write = true;
            fx->addr = addr;
            fx->mem_value = v1;
        }
        break;
    }
    case Opcode::B:
        next = in.target;
        if (fx)
            fx->taken = true;
        break;
    case Opcode::Beq:
    case Opcode::Bne:
    case Opcode::Blt:
    case Opcode::Bge: {
        bool take = false;
        switch (in.op) {
        case Opcode::Beq: take = s.flags.z; break;
        case Opcode::Bne: take = !s.flags.z; break;
        case Opcode::Blt: take = s.flags.n != s.flags.v; break;
        default: take = s.flags.n == s.flags.v; break;
        }
        if (take)
            next = in.target;
        if (fx)
            fx->taken = take;
        break;
    }
    case Opcode::Halt: s.halted = true; break;
    }
    if (!ok)
        return ExecStatus::Trapped;
    ExecStatus st = finish(ExecStatus::Ok);
    return s.halted ? ExecStatus::Halted : st;
}

}  // namespace detail

MachineState step(const MachineState &state, const Program &program) {
    if (state.halted)
        throw std::logic_error("step on a halted machine");
    if (state.pc() >= program.code.size())
        throw Trap("executing past the end of the program");
    MachineState s = state;
    auto st = detail::execute(program, s.pc(), s, nullptr, nullptr);
    if (st == detail::ExecStatus::Trapped)
        throw Trap("memory access outside declared regions at instruction " +
                   std::to_string(state.pc()));
    return s;
}

RunResult run(const Program &program, std::uint64_t budget, bool record_trace) {
    if (budget == 0)
        throw std::invalid_argument("run budget must be positive");
    RunResult res;
    MachineState s = MachineState::initial(program);
    TraceEntry fx;
    while (true) {
        if (res.steps >= budget) {
            res.termination = Termination::BudgetExceeded;
            break;
        }
        if (s.pc() >= program.code.size()) {
            res.termination = Termination::Trapped;
            break;
        }
        auto st = detail::execute(program, s.pc(), s, nullptr, record_trace ? &fx : nullptr);
        if (st == detail::ExecStatus::Trapped) {
            res.termination = Termination::Trapped;
            break;
        }
        if (record_trace) {
            fx.dyn = static_cast<std::uint32_t>(res.steps);
            res.trace.push_back(fx);
        }
        ++res.steps;
        if (st == detail::ExecStatus::Halted) {
            res.termination = Termination::Halted;
            break;
        }
    }
    res.output = OutputBuffer::capture(s);
    return res;
}

}  // namespace faultforge

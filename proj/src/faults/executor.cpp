#include <algorithm>

#include "faultforge/faults.hpp"

namespace faultforge {

namespace {

bool exec_phase(Family f) {
    return f == Family::Skip || f == Family::OperandSubstitution || f == Family::LoadCorruption ||
           f == Family::MagicEdge;
}

std::optional<Word> corrupted_value(const Program &p, const MachineState &s, const FaultSpec &f) {
    switch (f.origin) {
    case ValueOrigin::BitFlip: return s.regs[f.source] ^ f.mask;
    case ValueOrigin::Uncorrelated: return f.value;
    case ValueOrigin::OtherRegion: {
        auto slot = p.memory_slot(f.address);
        if (!slot)
            return std::nullopt;
        return s.mem[*slot];
    }
    }
    return std::nullopt;
}

// Runs from `s` (state before dynamic instruction `dyn`) with the sorted leaf
// effects attached by dynamic index.
RunResult execute_faulted(const Program &p, MachineState s, std::uint32_t dyn, const std::vector<FaultSpec> &leaves,
                          std::uint64_t budget, std::vector<TraceEntry> *trace) {
    RunResult res;
    res.steps = dyn;
    std::size_t next = 0;
    std::vector<const FaultSpec *> here;
    detail::Override ov;
    TraceEntry fx;
    auto stop = [&](Termination t) {
        res.termination = t;
        res.output = OutputBuffer::capture(s);
        if (trace)
            res.trace = std::move(*trace);
        return res;
    };
    while (true) {
        if (res.steps >= budget)
            return stop(Termination::BudgetExceeded);
        const std::uint32_t pc = s.pc();
        if (pc >= p.code.size())
            return stop(Termination::Trapped);

        here.clear();
        while (next < leaves.size() && leaves[next].target < dyn)
            ++next;
        for (std::size_t k = next; k < leaves.size() && leaves[k].target == dyn; ++k)
            if (leaves[k].target_static == pc)
                here.push_back(&leaves[k]);

        const detail::Override *use = nullptr;
        if (!here.empty()) {
            ov = detail::Override{};
            bool any = false;
            for (const FaultSpec *f : here) {
                if (!exec_phase(f->family))
                    continue;
                any = true;
                switch (f->family) {
                case Family::Skip: ov.skip = true; break;
                case Family::OperandSubstitution:
                    ov.subs.push_back({f->slot, f->operand.is_reg, f->operand.reg, f->operand.imm});
                    break;
                case Family::LoadCorruption: {
                    auto v = corrupted_value(p, s, *f);
                    if (!v)
                        return stop(Termination::Trapped);
                    ov.load_value = *v;
                    break;
                }
                case Family::MagicEdge: ov.redirect = p.blocks.at(f->block).entry; break;
                default: break;
                }
            }
            if (any)
                use = &ov;
        }

        auto st = detail::execute(p, pc, s, use, trace ? &fx : nullptr);
        if (st == detail::ExecStatus::Trapped)
            return stop(Termination::Trapped);
        if (trace) {
            fx.dyn = dyn;
            trace->push_back(fx);
        }
        ++res.steps;
        ++dyn;
        if (st == detail::ExecStatus::Halted)
            return stop(Termination::Halted);

        for (const FaultSpec *f : here) {
            switch (f->family) {
            case Family::RegisterCorruption: {
                auto v = corrupted_value(p, s, *f);
                if (!v)
                    return stop(Termination::Trapped);
                s.regs[f->reg] = *v;
                break;
            }
            case Family::MshwReset: s.regs[f->reg] &= 0x0000ffffu; break;
            case Family::Replay: {
                auto rst = detail::execute(p, f->replayed_static, s, nullptr, nullptr, false);
                if (rst == detail::ExecStatus::Trapped)
                    return stop(Termination::Trapped);
                break;
            }
            default: break;
            }
        }
    }
}

void check_reg(Reg r, const char *what) {
    if (r >= kPcReg)
        throw FaultError(std::string(what) + " register must be r0..r14");
}

void validate_leaf(const Program &p, const TimedTrace &tt, const FaultSpec &f) {
    if (f.cycle >= tt.total_cycles)
        throw FaultError("fault cycle " + std::to_string(f.cycle) + " outside the trace");
    if (f.target >= tt.size())
        throw FaultError("fault target " + std::to_string(f.target) + " outside the trace");
    if (tt.static_index[f.target] != f.target_static)
        throw FaultError("fault site mismatch: dynamic instruction " + std::to_string(f.target) + " is static " +
                         std::to_string(tt.static_index[f.target]) + ", spec says " +
                         std::to_string(f.target_static));
    const Instruction &in = p.code.at(f.target_static);
    switch (f.family) {
    case Family::Skip: break;
    case Family::Replay:
        if (f.replayed > f.target)
            throw FaultError("replay target not previously executed");
        if (tt.static_index[f.replayed] != f.replayed_static)
            throw FaultError("replay site mismatch");
        if (!replayable(p.code.at(f.replayed_static)))
            throw FaultError("branches and halt cannot be replayed");
        break;
    case Family::RegisterCorruption:
        check_reg(f.reg, "corrupted");
        if (f.origin == ValueOrigin::BitFlip)
            check_reg(f.source, "source");
        if (f.origin == ValueOrigin::OtherRegion && !p.memory_slot(f.address))
            throw FaultError("corruption source address is not mapped");
        break;
    case Family::MshwReset: check_reg(f.reg, "corrupted"); break;
    case Family::OperandSubstitution:
        if (!in.has(f.slot))
            throw FaultError("instruction " + format_instruction(in) + " has no " + std::string(slot_name(f.slot)) +
                             " operand");
        if (f.operand.is_reg)
            check_reg(f.operand.reg, "substituted");
        if (f.slot == Slot::Dest && !f.operand.is_reg)
            throw FaultError("destination can only be substituted by a register");
        break;
    case Family::LoadCorruption:
        if (in.op != Opcode::Ldr)
            throw FaultError("load corruption target is not a load");
        if (f.origin == ValueOrigin::BitFlip)
            check_reg(f.source, "source");
        if (f.origin == ValueOrigin::OtherRegion && !p.memory_slot(f.address))
            throw FaultError("corruption source address is not mapped");
        break;
    case Family::MagicEdge:
        if (f.block >= p.blocks.size())
            throw FaultError("magic edge target block out of range");
        if (p.blocks[p.block_of[f.target_static]].exit != f.target_static)
            throw FaultError("magic edge must fire at the end of a basic block");
        break;
    default: break;
    }
}

}  // namespace

bool skippable(const Instruction &in) { return in.op != Opcode::Halt; }

bool replayable(const Instruction &in) { return !is_branch(in.op) && in.op != Opcode::Halt; }

void validate_fault(const Program &program, const TimedTrace &tt, const FaultSpec &spec) {
    if (spec.cycle >= tt.total_cycles)
        throw FaultError("fault cycle " + std::to_string(spec.cycle) + " outside the trace");
    if (spec.is_single()) {
        validate_leaf(program, tt, spec);
        return;
    }
    for (const auto &s : spec.subs)
        validate_fault(program, tt, s);
}

RunResult apply_fault(const Program &program, const TimedTrace &tt, const FaultSpec &spec, std::uint64_t budget) {
    validate_fault(program, tt, spec);
    auto leaves = spec.leaves();
    std::vector<TraceEntry> trace;
    return execute_faulted(program, MachineState::initial(program), 0, leaves, budget, &trace);
}

Reference::Reference(const Program &program, std::uint64_t budget) : program_(&program), budget_(budget) {
    run_ = faultforge::run(program, budget, true);
    states_.reserve(run_.trace.size() + 1);
    MachineState s = MachineState::initial(program);
    for (std::size_t d = 0; d < run_.trace.size(); ++d) {
        states_.push_back(s);
        detail::execute(program, s.pc(), s, nullptr, nullptr);
    }
    states_.push_back(s);
}

RunResult replay_fault(const Reference &ref, const FaultSpec &spec, bool record_trace) {
    auto leaves = spec.leaves();
    std::uint32_t start = 0;
    if (!leaves.empty()) {
        start = leaves.front().target;
        if (start >= ref.size())
            throw FaultError("fault target outside the reference trace");
        if (ref.trace()[start].static_index != leaves.front().target_static)
            throw FaultError("fault site mismatch at dynamic instruction " + std::to_string(start));
    } else {
        RunResult r = ref.run();
        if (!record_trace)
            r.trace.clear();
        return r;
    }
    std::vector<TraceEntry> trace;
    if (record_trace)
        trace.assign(ref.trace().begin(), ref.trace().begin() + start);
    return execute_faulted(ref.program(), ref.state_before(start), start, leaves, ref.budget(),
                           record_trace ? &trace : nullptr);
}

FaultSpec prune_spec(const Reference &ref, const FaultSpec &spec) {
    if (spec.is_single() || spec.subs.size() < 2)
        return spec;
    const RunResult full = replay_fault(ref, spec);
    auto same = [&](const FaultSpec &s) {
        RunResult r = replay_fault(ref, s);
        return r.termination == full.termination && r.output == full.output;
    };
    FaultSpec cur = spec;
    for (std::size_t k = cur.subs.size(); k-- > 0 && cur.subs.size() > 1;) {
        FaultSpec trial = cur;
        trial.subs.erase(trial.subs.begin() + static_cast<std::ptrdiff_t>(k));
        if (trial.subs.size() == 1 ? same(trial.subs.front()) : same(trial))
            cur = std::move(trial);
    }
    if (cur.subs.size() == 1)
        return cur.subs.front();
    if (cur.subs.size() != spec.subs.size())
        cur = cur.family == Family::Mixed ? FaultSpec::mixed(cur.cycle, cur.subs)
                                          : FaultSpec::composite(cur.kind, cur.cycle, cur.subs, cur.base);
    return cur;
}

std::optional<std::uint32_t> block_instance_end(const Program &program, const TimedTrace &tt, std::uint32_t d) {
    const auto blk = program.block_of.at(tt.static_index.at(d));
    const auto exit = program.blocks[blk].exit;
    for (std::uint32_t e = d; e < tt.size(); ++e) {
        const auto s = tt.static_index[e];
        if (s == exit)
            return e;
        if (program.block_of[s] != blk)
            return std::nullopt;
    }
    return std::nullopt;
}

std::vector<std::uint32_t> illegal_targets(const Program &program, std::uint32_t from_block) {
    std::vector<std::uint32_t> out;
    for (const auto &b : program.blocks)
        if (!program.is_edge(from_block, b.id))
            out.push_back(b.id);
    return out;
}

}  // namespace faultforge

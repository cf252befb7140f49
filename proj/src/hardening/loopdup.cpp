#include <algorithm>

#include "emit.hpp"

namespace faultforge {

using namespace hardening_detail;

namespace {

Instruction shadowed(Instruction in, const std::map<Reg, Reg> &sh) {
    auto map = [&](Reg &r) {
        if (auto it = sh.find(r); it != sh.end())
            r = it->second;
    };
    map(in.dest);
    map(in.src1);
    map(in.src2);
    return in;
}

}  // namespace

HardenedProgram harden_loop(const Workload &w) {
    if (!w.loop)
        throw HardenError("workload '" + w.id + "' has no loop meta");
    const Program &p = w.program;
    const LoopMeta &m = *w.loop;
    const std::set<std::uint32_t> slice(m.slice.begin(), m.slice.end());
    const std::set<std::uint32_t> exits(m.exit_branches.begin(), m.exit_branches.end());
    const std::set<std::string> exit_labels(m.exit_labels.begin(), m.exit_labels.end());

    for (auto e : exits) {
        if (e == 0 || e >= p.size() || !is_cond_branch(p.code[e].op) || !is_compare(p.code[e - 1].op))
            throw HardenError("exit branch " + std::to_string(e) + " is not a compare followed by a conditional branch");
    }

    std::set<Reg> used;
    for (const auto &in : p.code)
        collect_regs(in, used);

    std::map<Reg, Reg> sh;
    Reg next = 0;
    for (auto i : slice) {
        const auto &in = p.code.at(i);
        if (in.dest == kNoReg || sh.count(in.dest))
            continue;
        while (next < kPcReg && used.count(next))
            ++next;
        if (next >= kPcReg)
            throw HardenError("no free register to shadow r" + std::to_string(in.dest));
        sh[in.dest] = next++;
    }

    HardenedProgram hp;
    hp.scheme = Scheme::LoopDup;
    hp.shadow_map = sh;
    hp.baseline_id = w.id;
    hp.baseline_size = p.size();

    Emitter e(p);
    const Word ctrl = next_free_address(p);
    e.region(Region{"ctrl", ctrl, 1, {0}});
    for (auto [o, s] : sh)
        e.init(s, p.init_regs[o]);

    auto full_check = [&](std::vector<Instruction> &out) {
        for (auto [o, s] : sh) {
            out.push_back(cmp(o, s));
            out.push_back(branch(Opcode::Bne, kDetectLabel));
        }
    };

    struct Trampoline {
        std::string label;
        std::vector<Instruction> body;
    };
    std::vector<Trampoline> tramps;
    std::vector<std::uint32_t> slice_out;

    const auto labels = labels_by_index(p);
    for (std::uint32_t i = 0; i < p.size(); ++i) {
        auto [lo, hi] = labels.equal_range(i);
        for (auto it = lo; it != hi; ++it)
            e.label(it->second);
        const Instruction &in = p.code[i];
        const bool in_slice = slice.count(i) > 0;
        auto put = [&](Instruction x) {
            auto at = e.emit(std::move(x));
            if (in_slice || exits.count(i))
                slice_out.push_back(at);
        };

        if (exits.count(i)) {
            const Instruction shadow_cmp = shadowed(p.code[i - 1], sh);
            const bool taken_leaves = exit_labels.count(in.label) > 0;
            Trampoline t;
            t.label = e.fresh("chk");
            Instruction br = in;
            br.label = t.label;
            put(br);
            // fall-through path
            put(shadow_cmp);
            put(branch(in.op, kDetectLabel));
            if (!taken_leaves) {
                std::vector<Instruction> chk;
                full_check(chk);
                for (auto &x : chk)
                    put(x);
            }
            // taken path
            t.body.push_back(shadow_cmp);
            t.body.push_back(branch(negate_branch(in.op), kDetectLabel));
            if (taken_leaves)
                full_check(t.body);
            t.body.push_back(branch(Opcode::B, in.label));
            tramps.push_back(std::move(t));
            continue;
        }
        if (in_slice && is_compare(in.op) && exits.count(i + 1)) {
            put(in);
            continue;
        }
        put(in);
        if (in_slice && in.dest != kNoReg)
            put(shadowed(in, sh));
    }

    for (std::size_t k = 0; k < tramps.size(); ++k) {
        e.label(tramps[k].label);
        for (auto &x : tramps[k].body)
            slice_out.push_back(e.emit(x));
        // a skipped jump back must not slip into the next trampoline
        if (k + 1 < tramps.size())
            slice_out.push_back(e.emit(branch(Opcode::B, kDetectLabel)));
    }
    emit_handler(e, ctrl);

    hp.program = e.build();
    hp.detect_handler = hp.program.block_of.at(hp.program.label_index(kDetectLabel));
    hp.slice = std::move(slice_out);
    std::sort(hp.slice.begin(), hp.slice.end());
    hp.computation_regs = used;
    for (auto [o, s] : sh)
        hp.computation_regs.insert(s);
    return hp;
}

}  // namespace faultforge

#include <algorithm>

#include "emit.hpp"
#include "faultforge/microarch.hpp"

namespace faultforge {

std::string_view detection_status_name(DetectionStatus s) {
    switch (s) {
    case DetectionStatus::Detected: return "detected";
    case DetectionStatus::Undetected: return "undetected";
    case DetectionStatus::Masked: return "masked";
    case DetectionStatus::Mute: return "mute";
    }
    return "?";
}

DetectionStatus detection_status(const Workload &hardened, const RunResult &r) {
    if (r.termination != Termination::Halted)
        return DetectionStatus::Mute;
    if (hardened.detect_word && r.output.words.at(*hardened.detect_word) == kDetectSentinel)
        return DetectionStatus::Detected;
    if (r.output == hardened.reference)
        return DetectionStatus::Masked;
    return DetectionStatus::Undetected;
}

namespace {

// Per dynamic index: registers whose value right after it later reaches a
// store or a compare operand before being overwritten.
std::vector<std::uint16_t> reaching_sinks(const Program &p, const std::vector<TraceEntry> &trace) {
    std::vector<std::uint16_t> after(trace.size(), 0);
    std::uint16_t need = 0;
    auto bit = [](Reg r) { return static_cast<std::uint16_t>(r < kPcReg ? 1u << r : 0u); };
    for (std::size_t k = trace.size(); k-- > 0;) {
        after[k] = need;
        const Instruction &in = p.code[trace[k].static_index];
        std::uint16_t srcs = 0;
        for (Reg r : in.reads())
            if (r != kNoReg)
                srcs |= bit(r);
        if (in.op == Opcode::Str || is_compare(in.op)) {
            need |= srcs;
        } else if (in.dest != kNoReg) {
            const bool live = need & bit(in.dest);
            need &= static_cast<std::uint16_t>(~bit(in.dest));
            if (live)
                need |= srcs;
        }
    }
    return after;
}

}  // namespace

DetectionReport verify_detection(const HardenedProgram &hp, const Workload &hardened, const std::set<Family> &families,
                                 std::size_t max_witnesses) {
    const Program &p = hardened.program;
    Reference ref(p, hardened.budget());
    if (ref.run().termination != Termination::Halted)
        throw HardenError("hardened program does not halt cleanly");
    const TimedTrace tt = schedule(p, ref.trace(), TimingConfig{}, 0);
    const auto &trace = ref.trace();

    DetectionReport rep;
    auto tally = [&](Family f, const FaultSpec &spec) {
        auto r = replay_fault(ref, spec, false);
        auto &fd = rep.families[f];
        ++fd.total;
        switch (detection_status(hardened, r)) {
        case DetectionStatus::Detected: ++fd.detected; break;
        case DetectionStatus::Masked: ++fd.masked; break;
        case DetectionStatus::Mute: ++fd.mute; break;
        case DetectionStatus::Undetected: {
            ++fd.undetected;
            auto full = replay_fault(ref, spec, true);
            if (judge(hardened, full).harmful())
                ++fd.harmful_undetected;
            if (fd.witnesses.size() < max_witnesses)
                fd.witnesses.push_back(spec);
            break;
        }
        }
    };
    auto in_handler = [&](std::uint32_t s) { return p.block_of[s] == hp.detect_handler; };

    for (Family f : families) {
        rep.families[f];
        switch (f) {
        case Family::Skip: {
            std::set<std::uint32_t> sites(hp.slice.begin(), hp.slice.end());
            for (std::uint32_t d = 0; d < trace.size(); ++d) {
                const auto s = trace[d].static_index;
                if (in_handler(s) || !skippable(p.code[s]) || (!sites.empty() && !sites.count(s)))
                    continue;
                tally(f, FaultSpec::skip(tt.issue[d], d, s));
            }
            break;
        }
        case Family::RegisterCorruption: {
            const auto live = reaching_sinks(p, trace);
            for (std::uint32_t d = 0; d < trace.size(); ++d) {
                const auto s = trace[d].static_index;
                if (in_handler(s) || p.code[s].op == Opcode::Halt)
                    continue;
                for (Reg r : hp.computation_regs) {
                    if (!(live[d] & (1u << r)))
                        continue;
                    for (int b = 0; b < 32; ++b)
                        tally(f, FaultSpec::register_flip(tt.issue[d], d, s, r, Word(1) << b));
                }
            }
            break;
        }
        case Family::MagicEdge: {
            std::vector<std::uint32_t> candidates;
            if (!hp.signatures.empty())
                for (const auto &kv : hp.signatures)
                    candidates.push_back(kv.first);
            else
                for (const auto &b : p.blocks)
                    candidates.push_back(b.id);
            for (std::uint32_t d = 0; d < trace.size(); ++d) {
                const auto s = trace[d].static_index;
                const auto blk = p.block_of[s];
                if (in_handler(s) || p.blocks[blk].exit != s || p.code[s].op == Opcode::Halt)
                    continue;
                for (auto to : candidates)
                    if (!p.is_edge(blk, to))
                        tally(f, FaultSpec::magic_edge(tt.issue[d], d, s, to));
            }
            break;
        }
        default:
            throw FaultError("detection sweep does not cover family " + std::string(family_name(f)));
        }
    }
    return rep;
}

}  // namespace faultforge

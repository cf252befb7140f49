#include "emit.hpp"

namespace faultforge {

std::string_view scheme_name(Scheme s) {
    switch (s) {
    case Scheme::LoopDup: return "loopdup";
    case Scheme::Swift: return "swift";
    case Scheme::Stacked: return "stacked";
    }
    return "?";
}

Scheme scheme_from_name(std::string_view name) {
    for (Scheme s : {Scheme::LoopDup, Scheme::Swift, Scheme::Stacked})
        if (scheme_name(s) == name)
            return s;
    throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

std::size_t HardenedProgram::detect_word() const { return kDumpedRegs + program.region_offset("ctrl"); }

HardenedProgram harden(const Workload &w, Scheme s) {
    switch (s) {
    case Scheme::LoopDup: return harden_loop(w);
    case Scheme::Swift: return harden_swift(w);
    case Scheme::Stacked: return harden_stacked(w);
    }
    throw std::invalid_argument("bad scheme");
}

namespace {

const char *suffix(Scheme s) {
    switch (s) {
    case Scheme::LoopDup: return "-sec";
    case Scheme::Swift: return "-swift";
    case Scheme::Stacked: return "-swift+sec";
    }
    return "";
}

}  // namespace

Workload hardened_workload(const HardenedProgram &hp, const Workload &baseline) {
    Workload w = finish_workload(baseline.id + suffix(hp.scheme), hp.program);
    w.n = baseline.n;
    w.payload_regs = baseline.payload_regs;
    w.constants = baseline.constants;
    w.detect_word = hp.detect_word();
    if (baseline.loop) {
        LoopMeta m = *baseline.loop;
        m.slice = hp.slice;
        m.exit_branches.clear();
        w.loop = m;
    }
    return w;
}

bool preserves_semantics(const Workload &baseline, const Workload &hardened) {
    const Program &bp = baseline.program, &hp = hardened.program;
    std::set<Reg> used;
    for (const auto &in : bp.code)
        hardening_detail::collect_regs(in, used);
    const auto &a = baseline.reference.words, &b = hardened.reference.words;
    for (Reg r : used)
        if (r < kDumpedRegs && a[r] != b[r])
            return false;
    for (const auto &reg : bp.regions) {
        if (!hp.find_region(reg.name))
            return false;
        const auto oa = kDumpedRegs + bp.region_offset(reg.name), ob = kDumpedRegs + hp.region_offset(reg.name);
        for (std::size_t k = 0; k < reg.length; ++k)
            if (a[oa + k] != b[ob + k])
                return false;
    }
    if (hardened.detect_word && b.at(*hardened.detect_word) != 0)
        return false;
    return true;
}

std::vector<WorkloadInfo> list_workloads() {
    return {
        {"nop", "NOP sequence followed by HALT"},
        {"single", "one register incremented n times"},
        {"multi", "ten registers incremented by distinct primes, spaced by NOPs"},
        {"loop1", "accumulate src into dst over n words"},
        {"loop2", "constant-time compare of two n-word buffers"},
        {"loop1-sec", "loop1 with duplicated exit condition"},
        {"loop2-sec", "loop2 with duplicated exit condition"},
        {"loop1-swift", "loop1 with instruction duplication and signature checks"},
        {"loop2-swift", "loop2 with instruction duplication and signature checks"},
        {"loop1-swift+sec", "loop1-sec hardened again with instruction duplication"},
        {"loop2-swift+sec", "loop2-sec hardened again with instruction duplication"},
    };
}

Workload make_workload(const std::string &id, const WorkloadParams &params) {
    for (Scheme s : {Scheme::Stacked, Scheme::Swift, Scheme::LoopDup}) {
        const std::string suf = suffix(s);
        if (id.size() > suf.size() && id.compare(id.size() - suf.size(), suf.size(), suf) == 0) {
            Workload base = make_baseline(id.substr(0, id.size() - suf.size()), params);
            return hardened_workload(harden(base, s), base);
        }
    }
    return make_baseline(id, params);
}

}  // namespace faultforge

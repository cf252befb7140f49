// Prints one PASS/FAIL line per acceptance criterion; exits non-zero when any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "faultforge/parallel.hpp"
#include "faultforge/report.hpp"

using namespace faultforge;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void verdict(int id, const std::string &name, bool ok, const std::string &detail) {
    std::printf("%s %d %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += !ok;
}

std::string fmt(const char *f, double v) {
    char b[64];
    std::snprintf(b, sizeof b, f, v);
    return b;
}

// 1. NOP immunity.
void nop_immunity() {
    const auto t0 = Clock::now();
    Workload w = gen_nop_seq(200);
    CampaignConfig c;
    c.profile = paper_em_default();
    c.seed = 1;
    c.cycle_lo = 0;
    c.cycle_hi = 99;
    c.runs_per_cycle = 30;
    auto cr = run_campaign(w, c);
    const double n = static_cast<double>(cr.records.size()), p = cr.config.profile.mute_probability;
    const double mean = n * p, sigma = std::sqrt(n * p * (1 - p));
    const double dt = seconds_since(t0);
    const bool ok = cr.records.size() == 3000 && cr.summary.successful == 0 &&
                    std::abs(static_cast<double>(cr.summary.mute) - mean) <= 3 * sigma && dt < 10;
    std::ostringstream os;
    os << cr.records.size() << " runs, " << cr.summary.successful << " successful, mute " << cr.summary.mute
       << " (expected " << fmt("%.1f", mean) << " +/- " << fmt("%.1f", 3 * sigma) << "), " << fmt("%.2f", dt) << " s";
    verdict(1, "nop-immunity", ok, os.str());
}

// 2. Single-counter doubling against the closed form.
void single_counter_doubling() {
    const std::uint32_t n = 20;
    Workload w = gen_single_counter(0, n);
    auto tt = schedule(w.program, Reference(w.program, w.budget()).trace(), TimingConfig{}, 0);
    const Word init = initial_register(0);
    std::size_t sites = 0, exact = 0;
    for (std::uint32_t k = 0; k < n; ++k) {
        const auto &in = w.program.code[k];
        if (in.op != Opcode::Addi || *in.imm != 1)
            continue;
        ++sites;
        auto spec = FaultSpec::substitute(tt.issue[k], k, k, Slot::Imm, Operand::make_reg(0));
        validate_fault(w.program, tt, spec);
        OutputBuffer expect = w.reference;
        expect.words[0] = 2 * (init + k) + (n - 1 - k);
        exact += apply_fault(w.program, tt, spec, w.budget()).output == expect;
    }
    verdict(2, "single-counter-doubling", sites == n && exact == sites,
            std::to_string(exact) + "/" + std::to_string(sites) + " sites match 2*(init+k)+(19-k)");
}

// 3. Skip i + Replay j on the multi-counter workload.
void skip_replay_signature() {
    Workload w = make_workload("multi");
    Reference ref(w.program, w.budget());
    auto tt = schedule(w.program, ref.trace(), TimingConfig{}, 0);
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    std::size_t pairs = 0, exact = 0;
    for (std::uint32_t c = 0; c < tt.total_cycles; ++c) {
        std::vector<std::uint32_t> payload;
        for (auto d : inflight_at(tt, c))
            if (w.program.code[tt.static_index[d]].op == Opcode::Addi)
                payload.push_back(d);
        for (auto i : payload)
            for (auto j : payload) {
                if (i == j || !seen.insert({i, j}).second)
                    continue;
                const auto after = std::max(i, j);
                auto spec = FaultSpec::composite(CompositeKind::SkipReplay, c,
                                                 {FaultSpec::skip(c, i, tt.static_index[i]),
                                                  FaultSpec::replay(c, after, tt.static_index[after], j,
                                                                    tt.static_index[j])});
                const auto &ii = w.program.code[tt.static_index[i]], &ij = w.program.code[tt.static_index[j]];
                OutputBuffer expect = w.reference;
                expect.words[ii.dest] -= static_cast<Word>(*ii.imm);
                expect.words[ij.dest] += static_cast<Word>(*ij.imm);
                ++pairs;
                exact += apply_fault(w.program, tt, spec, w.budget()).output == expect;
            }
    }
    verdict(3, "skip-replay-signature", pairs > 0 && exact == pairs,
            std::to_string(exact) + "/" + std::to_string(pairs) + " in-flight pairs give -C_i/+C_j exactly");
}

// Every single-fault spec of a finitely enumerable family with a site inside the search window.
std::vector<FaultSpec> finite_singles(const Program &p, const TimedTrace &tt, std::uint32_t cycle) {
    const std::uint32_t w = tt.window_depth;
    const std::uint32_t lo = cycle > w ? cycle - w : 0, hi = std::min(tt.total_cycles - 1, cycle + w);
    std::set<std::uint32_t> window;
    std::vector<FaultSpec> out;
    std::set<std::string> subs;
    for (std::uint32_t c = lo; c <= hi; ++c) {
        auto in = inflight_at(tt, c);
        window.insert(in.begin(), in.end());
        auto pool = operand_pool(p, tt, in);
        for (auto d : in) {
            const auto &ins = p.code[tt.static_index[d]];
            for (Slot s : ins.slots())
                for (const auto &op : pool.all()) {
                    auto spec = FaultSpec::substitute(c, d, tt.static_index[d], s, op);
                    if (subs.insert(spec.describe()).second)
                        out.push_back(spec);
                }
        }
    }
    for (auto d : window) {
        const auto st = tt.static_index[d];
        const auto &ins = p.code[st];
        const auto c = tt.issue[d];
        if (skippable(ins))
            out.push_back(FaultSpec::skip(c, d, st));
        for (Reg r = 0; r < kPcReg; ++r)
            out.push_back(FaultSpec::mshw(c, d, st, r));
        if (auto e = block_instance_end(p, tt, d); e && p.code[tt.static_index[*e]].op != Opcode::Halt)
            for (auto to : illegal_targets(p, p.block_of[tt.static_index[*e]]))
                out.push_back(FaultSpec::magic_edge(c, *e, tt.static_index[*e], to));
        for (auto j : window)
            if (j <= d && replayable(p.code[tt.static_index[j]]))
                out.push_back(FaultSpec::replay(c, d, st, j, tt.static_index[j]));
    }
    return out;
}

bool single_family(Family f) { return f != Family::Composite && f != Family::Mixed; }

// 4. Classifier soundness and ground-truth recovery.
void classifier_soundness() {
    const auto t0 = Clock::now();
    std::size_t injections = 0, explained = 0, sound = 0, singles = 0, unique = 0, witnessed = 0, recovered = 0,
                lost = 0;
    std::map<Family, std::size_t> families;
    for (const auto &info : list_workloads()) {
        Workload w = make_workload(info.id);
        Reference ref(w.program, w.budget());
        CampaignConfig c;
        c.profile = EffectProfile::named("uniform");
        c.seed = 4242;
        const auto cycles = schedule(w.program, ref.trace(), c.timing, c.seed).total_cycles;
        c.step = std::max<std::uint32_t>(1, cycles / 80);
        c.runs_per_cycle = 1;
        auto cr = run_campaign(w, c);
        Classifier cl(w, c.timing, c.seed);
        const auto &tt = cl.timed();
        for (const auto &r : cr.records) {
            if (r.sample != SampleKind::Fault)
                continue;
            ++injections;
            ++families[r.spec->family];
            if (r.outcome != Outcome::Successful && r.outcome != Outcome::Detected)
                continue;
            auto e = cl.explain(r);
            if (e.explained) {
                ++explained;
                sound += replay_fault(ref, *e.spec).output == *r.buffer;
            }
            const FaultSpec &truth = r.effective_spec();
            if (!single_family(truth.family))
                continue;
            ++singles;
            std::set<Family> reproducers;
            for (const auto &s : finite_singles(w.program, tt, r.cycle)) {
                RunResult rr;
                try {
                    rr = replay_fault(ref, s);
                } catch (const FaultError &) {
                    continue;
                }
                if (rr.termination == Termination::Halted && rr.output == *r.buffer)
                    reproducers.insert(s.family);
            }
            reproducers.erase(truth.family);
            if (!reproducers.empty())
                continue;
            if (!e.explained) {
                ++unique, ++lost;
                std::fprintf(stderr, "  unexplained %s: %s\n", info.id.c_str(), truth.describe().c_str());
                continue;
            }
            const Family got = e.multiplicity == Multiplicity::Single ? e.family : Family::Composite;
            if (got == truth.family) {
                ++unique, ++recovered;
            } else if (e.multiplicity == Multiplicity::Single && replay_fault(ref, *e.spec).output == *r.buffer) {
                ++witnessed;  // another single reproducer exists, so the injected one is not unique
            } else {
                ++unique;
                std::fprintf(stderr, "  mislabeled %s: %s as %s\n", info.id.c_str(), truth.describe().c_str(),
                             e.label().c_str());
            }
        }
    }
    const double dt = seconds_since(t0);
    const bool all_families = std::all_of(std::begin(kAllFamilies), std::end(kAllFamilies),
                                          [&](Family f) { return families[f] > 0; });
    const bool ok = injections >= 500 && all_families && sound == explained && recovered == unique && dt < 300;
    std::ostringstream os;
    os << injections << " injections over " << list_workloads().size() << " workloads, " << sound << "/" << explained
       << " explanations replay exactly; unique singles recovered " << recovered << "/" << unique << " (" << witnessed
       << " non-unique by classifier witness, " << lost << " unexplained, " << singles << " singles), " << fmt("%.1f", dt) << " s";
    verdict(4, "classifier-soundness", ok, os.str());
}

struct Hardened {
    Workload base;
    HardenedProgram hp;
    Workload w;
    Hardened(const std::string &id, Scheme s) : base(make_baseline(id)), hp(harden(base, s)) {
        w = hardened_workload(hp, base);
    }
};

// 5. Countermeasure guarantees.
void countermeasures() {
    const auto t0 = Clock::now();
    std::ostringstream os;
    bool ok = true;
    for (const char *id : {"loop1", "loop2"}) {
        Hardened h(id, Scheme::LoopDup);
        const auto &f = verify_detection(h.hp, h.w, {Family::Skip}).at(Family::Skip);
        ok &= f.total > 0 && f.undetected == 0;
        os << id << "-sec skip " << f.detected << " detected/" << f.masked << " masked/" << f.mute << " mute/"
           << f.undetected << " undetected of " << f.total << "; ";
    }
    Hardened h("loop2", Scheme::Swift);
    const auto &f = verify_detection(h.hp, h.w, {Family::RegisterCorruption}).at(Family::RegisterCorruption);
    ok &= f.total > 0 && f.undetected == 0;
    const double dt = seconds_since(t0);
    ok &= dt < 120;
    os << "loop2-swift live bit flips " << f.detected << " detected/" << f.masked << " masked/" << f.mute << " mute/"
       << f.undetected << " undetected of " << f.total << "; " << fmt("%.1f", dt) << " s";
    verdict(5, "countermeasure-guarantees", ok, os.str());
}

// 6. Magic-edge bypass on loop2-sec; SWIFT coverage of illegal block entries.
void magic_edge() {
    std::ostringstream os;
    bool ok = true;
    {
        Hardened h("loop2", Scheme::LoopDup);
        const auto &p = h.w.program;
        Reference ref(p, h.w.budget());
        auto tt = schedule(p, ref.trace(), TimingConfig{}, 0);
        std::optional<FaultSpec> witness;
        for (std::uint32_t d = 0; d < tt.size() && !witness; ++d) {
            const auto st = tt.static_index[d];
            const auto blk = p.block_of[st];
            if (p.blocks[blk].exit != st || blk == h.hp.detect_handler)
                continue;
            for (auto to : illegal_targets(p, blk)) {
                auto spec = FaultSpec::magic_edge(tt.issue[d], d, st, to);
                auto r = replay_fault(ref, spec, true);
                if (detection_status(h.w, r) == DetectionStatus::Undetected && judge(h.w, r).harmful()) {
                    witness = spec;
                    break;
                }
            }
        }
        ok &= witness.has_value();
        if (witness) {
            // Replay the JSON form of the witness, as a user would.
            auto back = fault_spec_from_json(nlohmann::json::parse(to_json(*witness).dump()));
            auto r = apply_fault(p, tt, back, h.w.budget());
            ok &= detection_status(h.w, r) == DetectionStatus::Undetected && judge(h.w, r).harmful();
            os << "loop2-sec witness " << witness->describe() << "; ";
        }
        const auto &f = verify_detection(h.hp, h.w, {Family::MagicEdge}).at(Family::MagicEdge);
        ok &= f.harmful_undetected > 0;
        os << f.harmful_undetected << " harmful undetected of " << f.total << "; ";
    }
    for (const char *id : {"loop1", "loop2"}) {
        Hardened h(id, Scheme::Swift);
        const auto &p = h.w.program;
        Reference ref(p, h.w.budget());
        auto tt = schedule(p, ref.trace(), TimingConfig{}, 0);
        std::size_t n = 0, undetected = 0, frag = 0, frag_undetected = 0;
        for (std::uint32_t d = 0; d < tt.size(); ++d) {
            const auto st = tt.static_index[d];
            const auto blk = p.block_of[st];
            if (p.blocks[blk].exit != st || blk == h.hp.detect_handler || p.code[st].op == Opcode::Halt)
                continue;
            for (const auto &b : p.blocks) {
                if (p.is_edge(blk, b.id))
                    continue;
                const bool entry = h.hp.signatures.count(b.id) > 0;
                const bool miss = detection_status(h.w, replay_fault(ref, FaultSpec::magic_edge(tt.issue[d], d, st, b.id))) ==
                                  DetectionStatus::Undetected;
                (entry ? n : frag) += 1;
                (entry ? undetected : frag_undetected) += miss;
            }
        }
        const auto &f = verify_detection(h.hp, h.w, {Family::MagicEdge}).at(Family::MagicEdge);
        ok &= n > 0 && undetected == 0 && f.total == n && f.undetected == 0;
        os << id << "-swift " << n - undetected << "/" << n << " illegal block-entry jumps detected (mid-block check "
           << "fragments: " << frag - frag_undetected << "/" << frag << "); ";
    }
    verdict(6, "magic-edge-bypass", ok, os.str());
}

// 7. NOP-spacing monotonicity of corrupted-register counts.
void spacing_monotonicity() {
    IsolationConfig cfg;
    cfg.seed = 7;
    cfg.min_successful = 1000;
    auto rows = isolate({0, 2, 50}, cfg);
    const double m0 = rows[0].histogram.mean, m2 = rows[1].histogram.mean, m50 = rows[2].histogram.mean;
    bool ok = m0 > m2 && m2 > m50 && m0 >= 2.5 && m0 <= 5.0 && m50 >= 1.0 && m50 <= 1.3;
    for (const auto &r : rows)
        ok &= r.histogram.total >= 1000;
    std::ostringstream os;
    os << "mean(0)=" << fmt("%.3f", m0) << " mean(2)=" << fmt("%.3f", m2) << " mean(50)=" << fmt("%.3f", m50)
       << " over " << rows[0].histogram.total << "/" << rows[1].histogram.total << "/" << rows[2].histogram.total
       << " successful (calibration targets 3.8 and 1.1)";
    verdict(7, "nop-spacing-monotonicity", ok, os.str());
}

// 8. Classified label shares against injected shares.
void distribution_round_trip() {
    Workload w = make_workload("loop1");
    CampaignConfig c;
    c.profile = paper_em_default();
    c.seed = 2026;
    // 2000 records spread evenly over the longest prefix of cycles that divides them.
    std::uint32_t cycles = schedule(w.program, run(w.program, w.budget()).trace, c.timing, c.seed).total_cycles;
    while (2000 % cycles)
        --cycles;
    c.cycle_lo = 0;
    c.cycle_hi = cycles - 1;
    c.runs_per_cycle = 2000 / cycles;
    auto cr = run_campaign(w, c);
    auto ex = classify(w, cr);
    std::vector<Explanation> got;
    std::vector<FaultSpec> truth;
    for (std::size_t i = 0; i < ex.size(); ++i)
        if (ex[i].searched) {
            got.push_back(ex[i]);
            truth.push_back(cr.records[i].effective_spec());
        }
    auto dg = distribution(got), dt = distribution(truth);
    double worst = dg.unexplained_pct;
    std::string worst_row = "unexplained";
    std::ostringstream rows;
    for (const auto &r : dt.rows) {
        const double diff = std::abs(dg.at(r.key).pct - r.pct);
        if (r.count || dg.at(r.key).count)
            rows << r.name << " " << fmt("%.1f", r.pct) << "->" << fmt("%.1f", dg.at(r.key).pct) << ", ";
        if (diff > worst) {
            worst = diff;
            worst_row = r.name;
        }
    }
    std::ostringstream os;
    os << cr.records.size() << " records, " << got.size() << " classified; worst " << worst_row << " "
       << fmt("%.1f", worst) << "pp (limit 5); injected->classified: " << rows.str() << "unexplained "
       << fmt("%.1f", dg.unexplained_pct);
    verdict(8, "distribution-round-trip", cr.records.size() == 2000 && worst <= 5.0, os.str());
}

// 9. Static code-size ratios.
void size_ratios() {
    auto ratio = [](Scheme s) { return harden(make_baseline("loop2"), s).size_ratio(); };
    const double sec = ratio(Scheme::LoopDup), swift = ratio(Scheme::Swift), both = ratio(Scheme::Stacked);
    const bool ok = sec >= 2 && sec <= 5 && swift >= 2 && swift <= 5 && both >= 7 && both <= 16;
    verdict(9, "code-size-ratios", ok,
            "loop2-sec x" + fmt("%.2f", sec) + ", loop2-swift x" + fmt("%.2f", swift) + ", loop2-swift+sec x" +
                fmt("%.2f", both));
}

// 10. Byte-identical results across reruns and thread counts.
void determinism() {
    const unsigned max_threads = std::max(8u, thread_count(0));
    bool ok = true;
    std::ostringstream os;
    for (const char *id : {"loop2-swift+sec", "multi"}) {
        Workload w = make_workload(id);
        CampaignConfig c;
        c.seed = 31337;
        c.runs_per_cycle = 2;
        c.threads = 1;
        const auto a = to_json(run_campaign(w, c)).dump();
        const auto b = to_json(run_campaign(w, c)).dump();
        c.threads = max_threads;
        const auto cr = run_campaign(w, c);
        const auto d = to_json(cr).dump();
        const auto e1 = classification_to_json(cr, classify(w, cr, {}, 1)).dump();
        const auto e2 = classification_to_json(cr, classify(w, cr, {}, max_threads)).dump();
        ok &= a == b && a == d && e1 == e2;
        os << id << " " << cr.records.size() << " records " << (a == b && a == d ? "identical" : "DIFFER")
           << ", classification " << (e1 == e2 ? "identical" : "DIFFER") << "; ";
    }
    os << "threads 1 vs " << max_threads;
    verdict(10, "determinism", ok, os.str());
}

}  // namespace

int main() {
    nop_immunity();
    single_counter_doubling();
    skip_replay_signature();
    classifier_soundness();
    countermeasures();
    magic_edge();
    spacing_monotonicity();
    distribution_round_trip();
    size_ratios();
    determinism();
    std::printf("%d of 10 criteria failed\n", failures);
    return failures ? 1 : 0;
}

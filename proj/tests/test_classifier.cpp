#include <gtest/gtest.h>

#include "faultforge/classifier.hpp"

using namespace faultforge;

namespace {

CampaignResult campaign(const Workload &w, EffectProfile p, std::uint64_t seed, std::uint32_t runs) {
    CampaignConfig c;
    c.profile = std::move(p);
    c.seed = seed;
    c.runs_per_cycle = runs;
    return run_campaign(w, c);
}

Explanation explained(Family f, Multiplicity m = Multiplicity::Single) {
    Explanation e;
    e.searched = e.explained = true;
    e.family = f;
    e.multiplicity = m;
    if (m == Multiplicity::Mixed)
        e.spec = FaultSpec::mixed(0, {FaultSpec::skip(0, 1, 1), FaultSpec::mshw(0, 2, 2, 1)});
    else if (m == Multiplicity::Composite)
        e.spec = FaultSpec::composite(CompositeKind::SkipReplay, 0,
                                      {FaultSpec::skip(0, 2, 2), FaultSpec::replay(0, 3, 3, 3, 3)});
    else if (f == Family::MagicEdge)
        e.spec = FaultSpec::magic_edge(0, 1, 1, 0);
    else
        e.spec = FaultSpec::skip(0, 1, 1);
    return e;
}

InjectionRecord successful(bool harmful) {
    InjectionRecord r;
    r.sample = SampleKind::Fault;
    r.outcome = Outcome::Successful;
    r.harmful = harmful;
    r.buffer = OutputBuffer{};
    return r;
}

}  // namespace

TEST(Explain, InjectedSkipsComeBackAsSkips) {
    std::size_t checked = 0;
    for (const char *id : {"single", "multi", "loop1", "loop2"}) {
        Workload w = make_workload(id);
        auto cr = campaign(w, EffectProfile::only(Family::Skip), 13, 4);
        Classifier cl(w, cr.config.timing, cr.config.seed);
        for (const auto &r : cr.records) {
            if (r.outcome != Outcome::Successful)
                continue;
            auto e = cl.explain(r);
            ASSERT_TRUE(e.explained) << id << " " << r.spec->describe();
            EXPECT_EQ(e.label(), "skip") << id << " " << r.spec->describe();
            EXPECT_EQ(replay_fault(cl.reference(), *e.spec).output, *r.buffer);
            ++checked;
        }
    }
    EXPECT_GE(checked, 500u);
}

TEST(Explain, SkipReplayPairIsComposite) {
    Workload w = gen_multi_counter(10, 0);
    Classifier cl(w, TimingConfig{}, 0);
    auto spec = FaultSpec::composite(CompositeKind::SkipReplay, 0,
                                     {FaultSpec::skip(0, 2, 2), FaultSpec::replay(0, 3, 3, 3, 3)});
    auto observed = replay_fault(cl.reference(), spec).output;
    ASSERT_EQ(observed.words[2] - w.reference.words[2], Word(-5));
    ASSERT_EQ(observed.words[3] - w.reference.words[3], Word(7));
    auto e = cl.explain(0, observed);
    ASSERT_TRUE(e.explained);
    EXPECT_EQ(e.multiplicity, Multiplicity::Composite);
    EXPECT_EQ(e.kind, CompositeKind::SkipReplay);
    EXPECT_EQ(replay_fault(cl.reference(), *e.spec).output, observed);
}

TEST(Explain, PrologueToExitJumpIsMagicEdge) {
    Workload w = gen_loop2(8);
    Classifier cl(w, TimingConfig{}, 0);
    // Static 3 closes the prologue; jumping to "exit" bypasses the whole loop.
    ASSERT_EQ(w.program.blocks[0].exit, 3u);
    const auto exit_b = w.program.block_of[w.program.label_index("exit")];
    ASSERT_FALSE(w.program.is_edge(0, exit_b));
    auto observed = replay_fault(cl.reference(), FaultSpec::magic_edge(cl.timed().issue[3], 3, 3, exit_b)).output;
    ASSERT_NE(observed, w.reference);
    auto e = cl.explain(cl.timed().issue[3], observed);
    ASSERT_TRUE(e.explained);
    EXPECT_EQ(e.label(), "magic-edge");
    EXPECT_EQ(replay_fault(cl.reference(), *e.spec).output, observed);
}

TEST(Explain, LegalBranchTargetPrefersSkip) {
    Workload w = gen_loop2(8);
    Classifier cl(w, TimingConfig{}, 0);
    // Leaving through "early" on the first pass also follows from skipping the compare.
    const auto early = w.program.block_of[w.program.label_index("early")];
    std::uint32_t d = 0;
    while (cl.reference().trace()[d].static_index != 13)
        ++d;
    auto observed = replay_fault(cl.reference(), FaultSpec::magic_edge(cl.timed().issue[d], d, 13, early)).output;
    EXPECT_EQ(observed, replay_fault(cl.reference(), FaultSpec::skip(0, d - 1, 12)).output);
    EXPECT_EQ(cl.explain(cl.timed().issue[d], observed).label(), "skip");
}

TEST(Explain, SkipWinsOverRegisterCorruption) {
    Workload w = gen_single_counter(0, 20);
    Classifier cl(w, TimingConfig{}, 0);
    // Skipping the last increment equals writing r0 - 1 after it.
    const auto skip = replay_fault(cl.reference(), FaultSpec::skip(0, 19, 19)).output;
    const auto set = replay_fault(cl.reference(), FaultSpec::register_set(0, 19, 19, 0, w.reference.words[0] - 1)).output;
    ASSERT_EQ(skip, set);
    auto e = cl.explain(cl.timed().issue[19], set);
    EXPECT_EQ(e.label(), "skip");
}

TEST(Explain, FaultFreeAndMuteRecordsAreNotSearched) {
    Workload w = gen_loop1(8);
    Classifier cl(w, TimingConfig{}, 0);
    InjectionRecord r;
    r.outcome = Outcome::Mute;
    EXPECT_FALSE(cl.explain(r).searched);
    r.outcome = Outcome::NoFault;
    r.buffer = w.reference;
    EXPECT_FALSE(cl.explain(r).searched);
}

TEST(Explain, NonUnexplainedAlwaysReplay) {
    std::size_t n = 0;
    for (const char *id : {"loop1", "loop2", "multi", "loop1-sec"}) {
        Workload w = make_workload(id);
        auto cr = campaign(w, paper_em_default(), 5, 1);
        auto ex = classify(w, cr);
        Classifier cl(w, cr.config.timing, cr.config.seed);
        for (std::size_t i = 0; i < ex.size(); ++i)
            if (ex[i].explained) {
                EXPECT_EQ(replay_fault(cl.reference(), *ex[i].spec).output, *cr.records[i].buffer) << id;
                ++n;
            }
    }
    EXPECT_GT(n, 50u);
}

TEST(Explain, ThreadCountDoesNotChangeResults) {
    Workload w = make_workload("loop2");
    auto cr = campaign(w, paper_em_default(), 3, 1);
    auto a = classify(w, cr, {}, 1), b = classify(w, cr, {}, 4);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        EXPECT_EQ(to_json(a[i]).dump(), to_json(b[i]).dump());
}

TEST(Explain, JsonRoundTrip) {
    Workload w = make_workload("loop1");
    auto cr = campaign(w, paper_em_default(), 9, 1);
    for (const auto &e : classify(w, cr))
        EXPECT_EQ(to_json(explanation_from_json(to_json(e))).dump(), to_json(e).dump());
}

TEST(Distribution, AllSkipIsHundredPercentSingleSkip) {
    std::vector<Explanation> ex(25, explained(Family::Skip));
    auto d = distribution(ex);
    EXPECT_EQ(d.total, 25u);
    EXPECT_DOUBLE_EQ(d.at({Family::Skip, Multiplicity::Single}).pct, 100.0);
    for (const auto &r : d.rows)
        if (!(r.key == RowKey{Family::Skip, Multiplicity::Single})) {
            EXPECT_EQ(r.count, 0u) << r.name;
        }
    EXPECT_EQ(d.unexplained, 0u);
}

TEST(Distribution, RowOrderFollowsLegend) {
    const auto &rows = row_order();
    ASSERT_GE(rows.size(), 6u);
    const Family legend[] = {Family::Skip,      Family::RegisterCorruption, Family::OperandSubstitution,
                             Family::MshwReset, Family::LoadCorruption,     Family::MagicEdge};
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(rows[i].family, legend[i]);
        EXPECT_EQ(rows[i].multiplicity, Multiplicity::Single);
    }
    EXPECT_EQ(rows.back().multiplicity, Multiplicity::Mixed);
    auto d = distribution(std::vector<Explanation>{});
    ASSERT_EQ(d.rows.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        EXPECT_EQ(d.rows[i].key, rows[i]);
}

TEST(Distribution, UnexplainedCountedSeparately) {
    std::vector<Explanation> ex{explained(Family::Skip), explained(Family::MagicEdge), Explanation{}};
    ex[2].searched = true;
    ex.push_back(Explanation{});  // not searched: excluded
    auto d = distribution(ex);
    EXPECT_EQ(d.total, 3u);
    EXPECT_EQ(d.unexplained, 1u);
    EXPECT_DOUBLE_EQ(d.unexplained_pct, 33.3);
    EXPECT_DOUBLE_EQ(d.at({Family::MagicEdge, Multiplicity::Single}).pct, 33.3);
}

TEST(Distribution, GroundTruthRows) {
    std::vector<FaultSpec> specs{FaultSpec::skip(0, 1, 1),
                                 FaultSpec::composite(CompositeKind::SkipReplay, 0,
                                                      {FaultSpec::skip(0, 2, 2), FaultSpec::replay(0, 3, 3, 3, 3)}),
                                 FaultSpec::mixed(0, {FaultSpec::skip(0, 1, 1), FaultSpec::mshw(0, 2, 2, 1)})};
    auto d = distribution(specs);
    EXPECT_EQ(d.at({Family::Skip, Multiplicity::Single}).count, 1u);
    EXPECT_EQ(d.at({Family::Skip, Multiplicity::Composite}).count, 1u);
    EXPECT_EQ(d.at({Family::Mixed, Multiplicity::Mixed}).count, 1u);
}

TEST(HarmfulBreakdown, OnlyMagicEdgesHarmful) {
    std::vector<Explanation> ex{explained(Family::MagicEdge), explained(Family::Skip), explained(Family::MagicEdge)};
    std::vector<InjectionRecord> rec{successful(true), successful(false), successful(true)};
    auto h = harmful_breakdown(ex, rec);
    EXPECT_EQ(h.total, 2u);
    EXPECT_EQ(h.magic_edge, 2u);
    EXPECT_DOUBLE_EQ(h.rows()[0].pct, 100.0);
}

TEST(HarmfulBreakdown, DetectedExcluded) {
    std::vector<Explanation> ex{explained(Family::MagicEdge), explained(Family::Skip),
                                explained(Family::Mixed, Multiplicity::Mixed),
                                explained(Family::Skip, Multiplicity::Composite)};
    std::vector<InjectionRecord> rec{successful(true), successful(true), successful(true), successful(true)};
    rec[0].outcome = Outcome::Detected;
    auto h = harmful_breakdown(ex, rec);
    EXPECT_EQ(h.total, 3u);
    EXPECT_EQ(h.magic_edge, 0u);
    EXPECT_EQ(h.other_single, 1u);
    EXPECT_EQ(h.mixed, 1u);
    EXPECT_EQ(h.other_composite, 1u);
    EXPECT_THROW(harmful_breakdown(ex, {}), std::invalid_argument);
}

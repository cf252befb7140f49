#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "faultforge/faults.hpp"
#include "faultforge/workloads.hpp"

using namespace faultforge;

namespace {

std::size_t region_word(const Workload &w, const std::string &region, std::size_t k) {
    return kDumpedRegs + w.program.region_offset(region) + k;
}

std::uint32_t head_visits(const Workload &w, const RunResult &r) {
    const auto head = w.program.label_index("loop");
    return static_cast<std::uint32_t>(
        std::count_if(r.trace.begin(), r.trace.end(), [&](const TraceEntry &t) { return t.static_index == head; }));
}

RunResult fault(const Workload &w, const FaultSpec &s) {
    Reference ref(w.program, w.budget());
    return replay_fault(ref, s, true);
}

std::uint32_t nth_dyn(const Workload &w, std::uint32_t static_index, int nth) {
    auto r = run(w.program, w.budget());
    int seen = 0;
    for (const auto &t : r.trace)
        if (t.static_index == static_index && ++seen == nth)
            return t.dyn;
    throw std::runtime_error("instance not found");
}

}  // namespace

TEST(Init, RegistersAndRegionsFollowConvention) {
    for (Reg r = 0; r < 15; ++r)
        EXPECT_EQ(initial_register(r), Word(1) << r);
    EXPECT_EQ(initial_word(2, 5), 0xA0020005u);
    Workload w = gen_loop2(8);
    const auto &regs = w.program.init_regs;
    for (Reg r = 0; r < 15; ++r)
        EXPECT_EQ(regs[r], Word(1) << r);
    // src1 and src2 match so fault-free runs compare equal; dst keeps its pattern until written.
    EXPECT_EQ(w.program.regions[0].init[3], initial_word(0, 3));
    EXPECT_EQ(w.program.regions[1].init, w.program.regions[0].init);
    EXPECT_EQ(w.program.regions[3].init[7], initial_word(3, 7));
}

TEST(NopSeq, TwoHundredNopsKeepInitialValues) {
    Workload w = gen_nop_seq(200);
    ASSERT_EQ(w.program.size(), 201u);
    for (std::size_t i = 0; i < 200; ++i)
        EXPECT_EQ(w.program.code[i].op, Opcode::Nop);
    EXPECT_EQ(w.program.code[200].op, Opcode::Halt);
    for (Reg r = 0; r < kDumpedRegs; ++r)
        EXPECT_EQ(w.reference.words[r], initial_register(r));
    EXPECT_THROW(gen_nop_seq(0), std::invalid_argument);
}

TEST(NopSeq, SingleNop) {
    Workload w = gen_nop_seq(1);
    EXPECT_EQ(w.program.code[0].op, Opcode::Nop);
    EXPECT_EQ(w.program.size(), 2u);
}

TEST(SingleCounter, FaultFreeAddsN) {
    Workload w = gen_single_counter(0, 20);
    EXPECT_EQ(w.reference.words[0], initial_register(0) + 20);
    Workload w5 = gen_single_counter(5, 7);
    EXPECT_EQ(w5.reference.words[5], initial_register(5) + 7);
    EXPECT_THROW(gen_single_counter(10, 3), std::invalid_argument);
}

TEST(SingleCounter, SubstitutionAtInstanceTen) {
    Workload w = gen_single_counter(0, 20);
    auto r = fault(w, FaultSpec::substitute(0, 10, 10, Slot::Imm, Operand::make_reg(0)));
    // Hand simulation: ten increments, one doubling, nine more increments.
    Word v = initial_register(0);
    for (int k = 0; k < 10; ++k)
        v += 1;
    v += v;
    for (int k = 11; k < 20; ++k)
        v += 1;
    EXPECT_EQ(r.output.words[0], v);
    EXPECT_EQ(v, 2 * (initial_register(0) + 10) + 9);
}

TEST(MultiCounter, SameRegisterWritesTenApart) {
    Workload w = gen_multi_counter(10, 0);
    std::map<Reg, std::vector<std::uint32_t>> writes;
    for (std::uint32_t i = 0; i < w.program.size(); ++i)
        if (w.program.code[i].op == Opcode::Addi)
            writes[w.program.code[i].dest].push_back(i);
    ASSERT_EQ(writes.size(), 10u);
    for (const auto &[r, idx] : writes)
        for (std::size_t k = 1; k < idx.size(); ++k)
            EXPECT_EQ(idx[k] - idx[k - 1], 10u);
}

TEST(MultiCounter, PrimeConstantsAndReference) {
    Workload w = gen_multi_counter(10, 3, 4);
    std::set<std::int32_t> cs(w.constants.begin(), w.constants.end());
    EXPECT_EQ(cs.size(), 10u);
    for (auto c : cs) {
        EXPECT_GT(c, 1);
        for (std::int32_t d = 2; d * d <= c; ++d)
            EXPECT_NE(c % d, 0);
    }
    for (Reg r = 0; r < 10; ++r)
        EXPECT_EQ(w.reference.words[r], initial_register(r) + 4 * Word(kPrimes[r]));
    EXPECT_THROW(gen_multi_counter(11, 0), std::invalid_argument);
}

TEST(MultiCounter, SingleSubstitutionsDoNotCollide) {
    Workload w = gen_multi_counter(10, 0);
    Reference ref(w.program, w.budget());
    // Every immediate substitution of one increment by another constant.
    std::map<std::string, std::pair<std::uint32_t, std::int32_t>> seen;
    for (std::uint32_t d = 0; d < 10; ++d)
        for (auto c : w.constants) {
            if (c == *w.program.code[d].imm)
                continue;
            auto r = replay_fault(ref, FaultSpec::substitute(0, d, d, Slot::Imm, Operand::make_imm(c)));
            auto [it, fresh] = seen.emplace(r.output.hex(), std::make_pair(d, c));
            EXPECT_TRUE(fresh) << "collision at dyn " << d << " constant " << c;
        }
    EXPECT_EQ(seen.size(), 90u);
}

TEST(Loop1, AddsSourceIntoZeroDestination) {
    std::vector<Word> src{1, 2, 3, 4, 5, 6, 7, 8};
    Workload w = gen_loop1(8, src, std::vector<Word>(8, 0));
    for (std::size_t k = 0; k < 8; ++k)
        EXPECT_EQ(w.reference.words[region_word(w, "dst", k)], k + 1);
    auto r = run(w.program, w.budget());
    EXPECT_EQ(head_visits(w, r), 8u);
    EXPECT_EQ(w.loop->expected_iterations, 8u);
}

TEST(Loop2, EqualBuffersRunToNormalExit) {
    Workload w = gen_loop2(8);
    auto r = run(w.program, w.budget());
    EXPECT_EQ(head_visits(w, r), 8u);
    EXPECT_EQ(w.loop->expected_exit, "exit");
    for (std::size_t k = 0; k < 8; ++k)
        EXPECT_EQ(w.reference.words[region_word(w, "dst", k)], 0u);
}

TEST(Loop2, FirstMismatchAtThreeExitsEarly) {
    std::vector<Word> a{10, 11, 12, 13, 14, 15, 16, 17}, b = a;
    b[3] = 99;
    b[5] = 98;
    Workload w = gen_loop2(8, a, b);
    auto r = run(w.program, w.budget());
    EXPECT_EQ(head_visits(w, r), 4u);
    EXPECT_EQ(w.loop->expected_iterations, 4u);
    EXPECT_EQ(w.loop->expected_exit, "early");
    EXPECT_EQ(w.reference.words[region_word(w, "dst", 3)], 1u);
    for (std::size_t k = 0; k < 3; ++k)
        EXPECT_EQ(w.reference.words[region_word(w, "dst", k)], 0u);
    EXPECT_EQ(w.reference.words[region_word(w, "dst", 4)], initial_word(2, 4));
}

TEST(Judge, FaultFreeRunIsReferenceEqual) {
    for (const char *id : {"loop1", "loop2"}) {
        Workload w = make_baseline(id);
        auto j = judge(w, run(w.program, w.budget()));
        EXPECT_TRUE(j.reference_equal);
        EXPECT_TRUE(j.iterations_ok);
        EXPECT_TRUE(j.exit_ok);
        EXPECT_EQ(j.iterations, w.loop->expected_iterations);
        EXPECT_EQ(j.exit_label, w.loop->expected_exit);
        EXPECT_FALSE(j.harmful());
    }
    auto j = judge(gen_nop_seq(3), run(gen_nop_seq(3).program, 100));
    EXPECT_TRUE(j.reference_equal);
    EXPECT_FALSE(j.iterations.has_value());
}

TEST(Judge, SkippedStoreIsHarmless) {
    Workload w = gen_loop1(8);
    const std::uint32_t str = 4;
    ASSERT_EQ(w.program.code[str].op, Opcode::Str);
    const auto d = nth_dyn(w, str, 3);
    auto r = fault(w, FaultSpec::skip(0, d, str));
    EXPECT_NE(r.output, w.reference);
    EXPECT_EQ(head_visits(w, r), 8u);
    auto j = judge(w, r);
    EXPECT_FALSE(j.reference_equal);
    EXPECT_TRUE(j.iterations_ok);
    EXPECT_FALSE(j.harmful());
}

TEST(Judge, MagicEdgeToExitIsHarmful) {
    Workload w = gen_loop1(8);
    const auto blt = w.program.label_index("exit") - 1;
    const auto d = nth_dyn(w, blt, 2);
    auto r = fault(w, FaultSpec::magic_edge(0, d, blt, w.program.block_of[w.program.label_index("exit")]));
    EXPECT_LT(head_visits(w, r), 8u);
    auto j = judge(w, r);
    EXPECT_FALSE(j.iterations_ok);
    EXPECT_TRUE(j.harmful());
}

TEST(Judge, WrongExitIsHarmful) {
    Workload w = gen_loop2(8);
    // Jump from the end of the first loop block straight into "early".
    const auto bne_static = 13u;
    ASSERT_EQ(w.program.code[bne_static].op, Opcode::Bne);
    const auto d = nth_dyn(w, bne_static, 1);
    auto r = fault(w, FaultSpec::magic_edge(0, d, bne_static, w.program.block_of[w.program.label_index("early")]));
    auto j = judge(w, r);
    EXPECT_EQ(j.exit_label, "early");
    EXPECT_FALSE(j.exit_ok);
    EXPECT_TRUE(j.harmful());
}

TEST(Workloads, ReferencesReproducible) {
    for (const char *id : {"nop", "single", "multi", "loop1", "loop2"}) {
        Workload a = make_baseline(id), b = make_baseline(id);
        EXPECT_EQ(a.reference, b.reference);
        EXPECT_EQ(a.reference.hex(), b.reference.hex());
        EXPECT_EQ(run(a.program, a.budget()).output, a.reference);
    }
    EXPECT_THROW(make_baseline("loop3"), std::invalid_argument);
}

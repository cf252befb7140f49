#include <sstream>

#include "faultforge/workloads.hpp"

namespace faultforge {

Word initial_register(Reg r) { return Word(1) << r; }

Word initial_word(std::size_t region, std::size_t k) {
    return 0xA0000000u | (static_cast<Word>(region) << 16) | static_cast<Word>(k);
}

namespace {

// Assembly prologue: conventional register values, then regions laid out
// back to back from kRegionBase.
class Source {
  public:
    Source() {
        for (Reg r = 0; r < kPcReg; ++r)
            os_ << ".init r" << int(r) << " " << initial_register(r) << "\n";
    }

    Word region(const std::string &name, std::uint32_t len, const std::vector<Word> &init) {
        Word base = next_;
        os_ << ".region " << name << " " << base << " " << len;
        for (Word w : init)
            os_ << " " << w;
        os_ << "\n";
        next_ += len;
        ++regions_;
        return base;
    }

    std::vector<Word> pattern(std::uint32_t len) {
        std::vector<Word> v;
        for (std::uint32_t k = 0; k < len; ++k)
            v.push_back(initial_word(regions_, k));
        return v;
    }

    Word region(const std::string &name, std::uint32_t len,
                const std::optional<std::vector<Word>> &init = std::nullopt) {
        auto words = pattern(len);
        if (init) {
            if (init->size() != len)
                throw std::invalid_argument("region '" + name + "' expects " + std::to_string(len) + " words");
            words = *init;
        }
        return region(name, len, words);
    }

    Source &operator<<(const std::string &line) {
        os_ << line << "\n";
        return *this;
    }

    std::string str() const { return os_.str(); }

  private:
    std::ostringstream os_;
    Word next_ = kRegionBase;
    std::size_t regions_ = 0;
};

std::string imm(std::int64_t v) { return "#" + std::to_string(v); }

}  // namespace

Workload finish_workload(std::string id, Program program) {
    Workload w;
    w.id = std::move(id);
    w.program = std::move(program);
    auto res = run(w.program, 10'000'000, false);
    if (res.termination != Termination::Halted)
        throw std::runtime_error("workload '" + w.id + "' does not halt cleanly");
    w.reference = res.output;
    w.reference_steps = res.steps;
    return w;
}

Workload gen_nop_seq(std::uint32_t n) {
    if (n < 1)
        throw std::invalid_argument("nop sequence needs n >= 1");
    Source s;
    for (std::uint32_t i = 0; i < n; ++i)
        s << "    nop";
    s << "    halt";
    auto w = finish_workload("nop", assemble(s.str()));
    w.n = n;
    return w;
}

Workload gen_single_counter(Reg reg, std::uint32_t n) {
    if (reg > 9)
        throw std::invalid_argument("single counter register must be r0..r9");
    Source s;
    const std::string r = "r" + std::to_string(reg);
    for (std::uint32_t i = 0; i < n; ++i)
        s << "    add " + r + ", " + r + ", #1";
    s << "    halt";
    auto w = finish_workload("single", assemble(s.str()));
    w.n = n;
    w.payload_regs = {reg};
    w.constants = {1};
    return w;
}

Workload gen_multi_counter(std::uint32_t k_regs, std::uint32_t spacing, std::uint32_t rounds) {
    if (k_regs < 1 || k_regs > 10)
        throw std::invalid_argument("multi counter needs 1..10 registers");
    Source s;
    bool first = true;
    for (std::uint32_t round = 0; round < rounds; ++round) {
        for (std::uint32_t i = 0; i < k_regs; ++i) {
            if (!first)
                for (std::uint32_t k = 0; k < spacing; ++k)
                    s << "    nop";
            first = false;
            const std::string r = "r" + std::to_string(i);
            s << "    add " + r + ", " + r + ", " + imm(kPrimes[i]);
        }
    }
    s << "    halt";
    auto w = finish_workload("multi", assemble(s.str()));
    w.n = rounds;
    for (std::uint32_t i = 0; i < k_regs; ++i) {
        w.payload_regs.push_back(static_cast<Reg>(i));
        w.constants.push_back(kPrimes[i]);
    }
    return w;
}

Workload gen_loop1(std::uint32_t n, std::optional<std::vector<Word>> src, std::optional<std::vector<Word>> dst) {
    if (n < 1)
        throw std::invalid_argument("loop needs n >= 1");
    Source s;
    Word src_base = s.region("src", n, src);
    Word dst_base = s.region("dst", n, dst);
    s.region("pad", n);
    s << "    mov r0, #0"
      << "loop:"
      << "    ldr r1, [r0, " + imm(src_base) + "]"
      << "    ldr r2, [r0, " + imm(dst_base) + "]"
      << "    add r3, r1, r2"
      << "    str r3, [r0, " + imm(dst_base) + "]"
      << "    add r0, r0, #1"
      << "    cmp r0, " + imm(n)
      << "    blt loop"
      << "exit:"
      << "    halt";
    auto w = finish_workload("loop1", assemble(s.str()));
    w.n = n;
    LoopMeta m;
    m.exit_labels = {"exit"};
    m.expected_iterations = n;
    m.slice = {0, 5, 6, 7};
    m.exit_branches = {7};
    w.loop = m;
    w.payload_regs = {0, 1, 2, 3};
    return w;
}

Workload gen_loop2(std::uint32_t n, std::optional<std::vector<Word>> src1, std::optional<std::vector<Word>> src2) {
    if (n < 1)
        throw std::invalid_argument("loop needs n >= 1");
    Source s;
    std::vector<Word> a = src1 ? *src1 : s.pattern(n);
    if (!src1)
        src1 = a;
    Word s1 = s.region("src1", n, a);
    Word s2 = s.region("src2", n, src2 ? *src2 : *src1);
    Word d = s.region("dst", n);
    s.region("pad", n);
    s << "    mov r0, #0"
      << "    mov r1, " + imm(s1)
      << "    mov r2, " + imm(s2)
      << "    mov r3, " + imm(d)
      << "loop:"
      << "    ldr r4, [r1]"
      << "    ldr r5, [r2]"
      << "    eor r4, r4, r5"
      << "    eor r5, r4, #-1"
      << "    add r5, r5, #1"
      << "    orr r4, r4, r5"
      << "    lsr r4, r4, #31"
      << "    str r4, [r3]"
      << "    cmp r4, #0"
      << "    bne early"
      << "    add r1, r1, #1"
      << "    add r2, r2, #1"
      << "    add r3, r3, #1"
      << "    add r0, r0, #1"
      << "    cmp r0, " + imm(n)
      << "    blt loop"
      << "exit:"
      << "    halt"
      << "early:"
      << "    halt";
    auto w = finish_workload("loop2", assemble(s.str()));
    w.n = n;
    LoopMeta m;
    m.exit_labels = {"exit", "early"};
    m.expected_iterations = 0;
    // Expected control flow comes from the fault-free run.
    auto ref = run(w.program, w.budget(), true);
    const auto head = w.program.label_index("loop");
    const auto early = w.program.label_index("early");
    m.expected_exit = "exit";
    for (const auto &te : ref.trace) {
        if (te.static_index == head)
            ++m.expected_iterations;
        if (te.static_index == early)
            m.expected_exit = "early";
    }
    m.slice = {0, 1, 2, 4, 5, 6, 7, 8, 9, 10, 12, 13, 14, 15, 17, 18, 19};
    m.exit_branches = {13, 19};
    w.loop = m;
    w.payload_regs = {0, 1, 2, 3, 4, 5};
    return w;
}

Judgement judge(const Workload &w, const RunResult &result) {
    Judgement j;
    j.reference_equal = result.termination == Termination::Halted && result.output == w.reference;
    if (!w.loop)
        return j;
    const auto &m = *w.loop;
    const auto head = w.program.label_index(m.head_label);
    std::vector<std::pair<std::uint32_t, std::string>> exits;
    for (const auto &l : m.exit_labels)
        exits.emplace_back(w.program.label_index(l), l);
    std::uint32_t iterations = 0;
    for (const auto &te : result.trace) {
        if (te.static_index == head)
            ++iterations;
        if (!j.exit_label)
            for (const auto &[idx, name] : exits)
                if (te.static_index == idx)
                    j.exit_label = name;
    }
    j.iterations = iterations;
    j.iterations_ok = iterations == m.expected_iterations;
    j.exit_ok = j.exit_label && *j.exit_label == m.expected_exit;
    return j;
}

Workload make_baseline(const std::string &id, const WorkloadParams &p) {
    if (id == "nop")
        return gen_nop_seq(p.n ? p.n : 200);
    if (id == "single")
        return gen_single_counter(p.reg, p.n ? p.n : 20);
    if (id == "multi")
        return gen_multi_counter(p.k_regs, p.spacing, p.n ? p.n : 4);
    if (id == "loop1")
        return gen_loop1(p.n ? p.n : 8);
    if (id == "loop2")
        return gen_loop2(p.n ? p.n : 8);
    throw std::invalid_argument("unknown workload '" + id + "'");
}

}  // namespace faultforge

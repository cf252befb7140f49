#include "faultforge/classifier.hpp"

#include <algorithm>
#include <bit>
#include <functional>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "faultforge/parallel.hpp"

namespace faultforge {

using nlohmann::json;

std::string_view multiplicity_name(Multiplicity m) {
    switch (m) {
    case Multiplicity::None: return "none";
    case Multiplicity::Single: return "single";
    case Multiplicity::Composite: return "composite";
    case Multiplicity::Mixed: return "mixed";
    }
    return "?";
}

Multiplicity multiplicity_from_name(std::string_view name) {
    for (auto m : {Multiplicity::None, Multiplicity::Single, Multiplicity::Composite, Multiplicity::Mixed})
        if (multiplicity_name(m) == name)
            return m;
    throw std::invalid_argument("unknown multiplicity '" + std::string(name) + "'");
}

std::string Explanation::label() const {
    if (!explained)
        return "unexplained";
    switch (multiplicity) {
    case Multiplicity::Single: return std::string(family_name(family));
    case Multiplicity::Composite: {
        std::string s = "composite/" + std::string(composite_kind_name(kind));
        if (kind == CompositeKind::Repeated)
            s += "/" + std::string(family_name(base));
        return s;
    }
    case Multiplicity::Mixed: return "mixed";
    case Multiplicity::None: break;
    }
    return "unexplained";
}

namespace {

constexpr Reg kSearchRegs = kPcReg;  // r0..r14

struct Score {
    std::size_t equal = 0;
    std::int64_t distance = 0;  // negated bit distance

    auto operator<=>(const Score &) const = default;
};

Explanation make_explanation(const FaultSpec &s, std::size_t tried) {
    Explanation e;
    e.searched = true;
    e.explained = true;
    e.spec = s;
    e.candidates = tried;
    e.family = s.family;
    if (s.family == Family::Composite) {
        e.multiplicity = Multiplicity::Composite;
        e.kind = s.kind;
        e.base = s.base;
    } else if (s.family == Family::Mixed) {
        e.multiplicity = Multiplicity::Mixed;
    } else {
        e.multiplicity = Multiplicity::Single;
    }
    return e;
}

}  // namespace

struct Classifier::Impl {
    Workload w;
    SearchConfig cfg;
    Reference ref;
    TimedTrace tt;
    std::vector<Word> refout;
    // next_access[r][d]: first dynamic index >= d reading or writing r (trace size if none).
    std::vector<std::vector<std::uint32_t>> next_access;
    // prev_access[r][d]: last dynamic index <= d touching r, -1 if none.
    std::vector<std::vector<std::int64_t>> prev_access;

    Impl(const Workload &wl, const TimingConfig &timing, std::uint64_t seed, SearchConfig c)
        : w(wl), cfg(c), ref(w.program, w.budget()) {
        if (ref.run().termination != Termination::Halted)
            throw std::runtime_error("workload '" + w.id + "' does not halt within its budget");
        tt = schedule(w.program, ref.trace(), timing, seed);
        refout = ref.output().words;
        const auto n = static_cast<std::uint32_t>(ref.size());
        next_access.assign(kSearchRegs, std::vector<std::uint32_t>(n + 1, n));
        prev_access.assign(kSearchRegs, std::vector<std::int64_t>(n + 1, -1));
        for (Reg r = 0; r < kSearchRegs; ++r) {
            for (std::uint32_t d = n; d-- > 0;)
                next_access[r][d] = touches(d, r) ? d : next_access[r][d + 1];
            std::int64_t last = -1;
            for (std::uint32_t d = 0; d < n; ++d) {
                if (touches(d, r))
                    last = d;
                prev_access[r][d] = last;
            }
        }
    }

    const Instruction &ins(std::uint32_t d) const { return w.program.code[tt.static_index[d]]; }
    std::uint32_t st(std::uint32_t d) const { return tt.static_index[d]; }
    bool touches(std::uint32_t d, Reg r) const {
        const auto &in = ins(d);
        return in.reads_reg(r) || in.writes_reg(r);
    }
};

namespace {

class Search {
  public:
    Search(const Classifier::Impl &m, std::uint32_t cycle, const OutputBuffer &obs)
        : m_(m), cycle_(cycle), obs_(obs.words) {
        const std::int64_t w = m.cfg.window ? m.cfg.window : m.tt.window_depth;
        if (m.cfg.blind) {
            for (std::uint32_t d = 0; d < m.ref.size(); ++d)
                window_.push_back(d);
        } else {
            window_ = inflight_between(m.tt, static_cast<std::int64_t>(cycle) - w, static_cast<std::int64_t>(cycle) + w);
        }
        for (auto d : window_)
            if (m.ins(d).op != Opcode::Halt)
                live_.push_back(d);
        in_window_.assign(m.ref.size(), false);
        for (auto d : window_)
            in_window_[d] = true;
        for (std::size_t j = 0; j < obs_.size(); ++j)
            if (j >= m.refout.size() || obs_[j] != m.refout[j])
                diff_.push_back(j);
        pool_ = operand_pool(m.w.program, m.tt, window_);
        build_classes();
    }

    Explanation run() {
        if (obs_.size() != m_.refout.size() || diff_.empty())
            return unexplained();
        using Step = std::optional<FaultSpec> (Search::*)();
        for (Step step : {&Search::skips, &Search::substitutions, &Search::mshw_resets, &Search::load_values,
                          &Search::register_values, &Search::magic_edges, &Search::replays, &Search::skip_replays, &Search::correlated,
                          &Search::repeated, &Search::mixed})
            if (auto s = (this->*step)())
                return make_explanation(*s, tried_);
        return unexplained();
    }

  private:
    struct Outcome {
        bool halted = false;
        std::vector<Word> out;
    };
    struct Cached {
        FaultSpec spec;
        std::vector<Word> out;
        std::vector<std::size_t> changed;  // words differing from the reference
        Score score;
    };
    struct RegClass {
        Reg r;
        std::uint32_t d;       // representative: effect lands right after d
        std::int64_t prev;     // last access of r at or before d
        bool post_load;        // r was just loaded by a windowed LDR and not yet read
    };

    const Classifier::Impl &m_;
    std::uint32_t cycle_;
    const std::vector<Word> &obs_;
    std::vector<std::uint32_t> window_, live_;
    std::vector<bool> in_window_;
    std::vector<std::size_t> diff_;
    OperandPool pool_;
    std::vector<RegClass> classes_;
    std::vector<Cached> finite_;
    std::size_t tried_ = 0;

    Explanation unexplained() const {
        Explanation e;
        e.searched = true;
        e.candidates = tried_;
        return e;
    }

    Outcome execute(const FaultSpec &s) {
        ++tried_;
        Outcome o;
        try {
            RunResult r = replay_fault(m_.ref, s, false);
            o.halted = r.termination == Termination::Halted;
            o.out = std::move(r.output.words);
        } catch (const FaultError &) {
        }
        return o;
    }

    bool exact(const Outcome &o) const { return o.halted && o.out == obs_; }

    Score score(const std::vector<Word> &out) const {
        Score s;
        for (std::size_t j = 0; j < obs_.size(); ++j) {
            if (out[j] == obs_[j])
                ++s.equal;
            s.distance -= std::popcount(out[j] ^ obs_[j]);
        }
        return s;
    }

    // Tries a finite candidate and keeps it for pair searches.
    bool attempt(const FaultSpec &s) {
        auto o = execute(s);
        if (exact(o))
            return true;
        if (o.halted && o.out != m_.refout) {
            Cached c{s, o.out, {}, score(o.out)};
            for (std::size_t j = 0; j < o.out.size(); ++j)
                if (o.out[j] != m_.refout[j])
                    c.changed.push_back(j);
            finite_.push_back(std::move(c));
        }
        return false;
    }

    void build_classes() {
        for (Reg r = 0; r < kSearchRegs; ++r) {
            std::unordered_set<std::uint32_t> seen;
            for (auto d : live_) {
                const auto next = m_.next_access[r][d + 1];
                if (!seen.insert(next).second)
                    continue;
                if (next == m_.ref.size()) {
                    if (r >= kDumpedRegs)
                        continue;
                } else if (!m_.ins(next).reads_reg(r)) {
                    continue;
                }
                const auto prev = m_.prev_access[r][d];
                bool post_load = prev >= 0 && in_window_[prev] && m_.ins(prev).op == Opcode::Ldr &&
                                 m_.ins(prev).dest == r;
                classes_.push_back({r, d, prev, post_load});
            }
        }
        std::stable_sort(classes_.begin(), classes_.end(), [](const RegClass &a, const RegClass &b) {
            return a.d != b.d ? a.d < b.d : a.r < b.r;
        });
    }

    const MachineState &after(std::uint32_t d) const { return m_.ref.state_before(d + 1); }

    std::vector<FaultSpec> substitution_specs() const {
        std::vector<FaultSpec> out;
        for (auto d : live_) {
            const Instruction &x = m_.ins(d);
            for (Slot slot : x.slots())
                for (const auto &o : pool_.all()) {
                    if (slot == Slot::Dest && (!o.is_reg || o.reg == x.dest))
                        continue;
                    if (slot == Slot::Src1 && o.is_reg && o.reg == x.src1)
                        continue;
                    if (slot == Slot::Src2 && o.is_reg && o.reg == x.src2)
                        continue;
                    if (slot == Slot::Imm && !o.is_reg && x.imm && o.imm == *x.imm)
                        continue;
                    out.push_back(FaultSpec::substitute(cycle_, d, m_.st(d), slot, o));
                }
        }
        return out;
    }

    std::optional<FaultSpec> skips() {
        for (auto d : live_)
            if (m_.ins(d).op != Opcode::Nop)
                if (auto s = FaultSpec::skip(cycle_, d, m_.st(d)); attempt(s))
                    return s;
        return std::nullopt;
    }

    std::optional<FaultSpec> substitutions() {
        for (const auto &s : substitution_specs())
            if (attempt(s))
                return s;
        return std::nullopt;
    }

    std::vector<FaultSpec> mshw_specs(std::optional<std::uint32_t> at = std::nullopt) const {
        std::vector<FaultSpec> out;
        for (const auto &c : classes_) {
            if (at && c.d != *at)
                continue;
            const Word v = after(c.d).regs[c.r];
            if ((v & 0xffffu) != v)
                out.push_back(FaultSpec::mshw(cycle_, c.d, m_.st(c.d), c.r));
        }
        return out;
    }

    std::optional<FaultSpec> mshw_resets() {
        for (const auto &s : mshw_specs())
            if (attempt(s))
                return s;
        return std::nullopt;
    }

    // Register value v right after d, as a flip of an alive register when one is close.
    FaultSpec register_value(std::uint32_t d, Reg r, Word v, bool plain = false) const {
        if (!plain) {
            const auto &regs = after(d).regs;
            int best = 5;
            Reg src = kNoReg;
            for (Reg a = 0; a < kSearchRegs; ++a) {
                int hw = std::popcount(v ^ regs[a]);
                if (a == r && hw == 0)
                    continue;
                if (hw < best || (hw == best && a == r)) {
                    best = hw;
                    src = a;
                }
            }
            if (src != kNoReg) {
                FaultSpec s = FaultSpec::register_flip(cycle_, d, m_.st(d), r, v ^ regs[src]);
                s.source = src;
                return s;
            }
        }
        return FaultSpec::register_set(cycle_, d, m_.st(d), r, v);
    }

    FaultSpec load_value(std::uint32_t p, Word v, bool plain = false) const {
        if (!plain) {
            const Word loaded = m_.tt.mem_addr[p];
            const auto &st = m_.ref.state_before(p);
            for (const auto &reg : m_.w.program.regions) {
                if (loaded - reg.base < reg.length)
                    continue;
                for (Word k = 0; k < reg.length; ++k)
                    if (auto slot = m_.w.program.memory_slot(reg.base + k); slot && st.mem[*slot] == v)
                        return FaultSpec::load_other(cycle_, p, m_.st(p), reg.base + k);
            }
            int best = 5;
            Reg src = kNoReg;
            for (Reg a = 0; a < kSearchRegs; ++a)
                if (int hw = std::popcount(v ^ st.regs[a]); hw < best) {
                    best = hw;
                    src = a;
                }
            if (src != kNoReg)
                return FaultSpec::load_flip(cycle_, p, m_.st(p), src, v ^ st.regs[src]);
        }
        return FaultSpec::load_value(cycle_, p, m_.st(p), v);
    }

    using Maker = std::function<FaultSpec(Word)>;

    struct Solve {
        Word reference;                   // value the corrupted location holds without the fault
        Reg reg = kNoReg;                 // register receiving the value, if dumped
        const std::vector<Word> *base;    // output of the other effects alone
        std::vector<Word> extra;          // further values worth trying
        std::size_t tsolve_budget = 160;
        bool deep = false;                // add the Hamming-weight <= 2 neighbourhood of the reference
    };

    std::optional<FaultSpec> solve(const Maker &make, const Solve &q) {
        std::unordered_set<Word> seen{q.reference};
        std::vector<Word> cands;
        auto add = [&](Word v) {
            if (seen.insert(v).second)
                cands.push_back(v);
        };
        const auto &base = *q.base;
        if (q.reg < kDumpedRegs) {
            add(obs_[q.reg]);
            add(q.reference + (obs_[q.reg] - base[q.reg]));
        }
        for (std::size_t j = 0; j < obs_.size(); ++j) {
            if (obs_[j] == base[j])
                continue;
            const Word delta = obs_[j] - base[j];
            add(q.reference + delta);
            add(q.reference - delta);
            add(q.reference ^ (obs_[j] ^ base[j]));
            add(obs_[j]);
        }
        for (Word v : q.extra)
            add(v);
        for (int k = 0; k < 32; ++k)
            add(q.reference ^ (1u << k));
        for (Word v : cands)
            if (auto s = make(v); exact(execute(s)))
                return s;
        if (auto s = tsolve(make, q.reference, q.tsolve_budget))
            return s;
        if (q.reg < kDumpedRegs && obs_[q.reg] != q.reference)
            if (auto s = tsolve(make, obs_[q.reg], q.tsolve_budget / 2))
                return s;
        if (q.deep)
            for (int a = 0; a < 32; ++a)
                for (int b = a + 1; b < 32; ++b)
                    if (Word v = q.reference ^ (1u << a) ^ (1u << b); !seen.count(v))
                        if (auto s = make(v); exact(execute(s)))
                            return s;
        return std::nullopt;
    }

    // Fixes the value bit by bit from the LSB, keeping candidates whose outputs agree with the
    // observation on all bits up to the current one; upper bits come from `filler`.
    std::optional<FaultSpec> tsolve(const Maker &make, Word filler, std::size_t budget) {
        std::unordered_map<Word, Outcome> cache;
        std::size_t used = 0;
        std::function<std::optional<FaultSpec>(int, Word)> rec = [&](int k, Word prefix) -> std::optional<FaultSpec> {
            const Word low = k == 31 ? ~0u : (2u << k) - 1;
            const Word pref = (filler >> k) & 1u;
            for (Word b : {pref, pref ^ 1u}) {
                const Word v = prefix | (b << k) | (filler & ~low);
                auto it = cache.find(v);
                if (it == cache.end()) {
                    if (used++ >= budget)
                        return std::nullopt;
                    it = cache.emplace(v, execute(make(v))).first;
                }
                const Outcome &o = it->second;
                if (!o.halted)
                    continue;
                bool ok = true;
                for (std::size_t j = 0; j < obs_.size() && ok; ++j)
                    ok = ((o.out[j] ^ obs_[j]) & low) == 0;
                if (!ok)
                    continue;
                if (k == 31)
                    return make(v);
                if (auto s = rec(k + 1, prefix | (b << k)))
                    return s;
            }
            return std::nullopt;
        };
        return rec(0, 0);
    }

    std::vector<Word> memory_words(std::uint32_t d) const {
        const auto &mem = m_.ref.state_before(d).mem;
        return {mem.begin(), mem.end()};
    }

    // Values making a later LDR/STR that uses r as its base hit a mapped word.
    std::vector<Word> address_values(const RegClass &c) const {
        std::vector<Word> out;
        const auto next = m_.next_access[c.r][c.d + 1];
        if (next >= m_.ref.size())
            return out;
        const Instruction &x = m_.ins(next);
        const bool base = (x.op == Opcode::Ldr && x.src1 == c.r) || (x.op == Opcode::Str && x.src2 == c.r);
        if (!base)
            return out;
        const Word off = static_cast<Word>(x.imm.value_or(0));
        for (const auto &reg : m_.w.program.regions)
            for (Word k = 0; k < reg.length; ++k)
                out.push_back(reg.base + k - off);
        return out;
    }

    std::optional<FaultSpec> register_values() {
        for (const auto &c : classes_) {
            if (c.post_load)
                continue;
            const Word refv = after(c.d).regs[c.r];
            Solve q{refv, c.r, &m_.refout, address_values(c)};
            q.deep = true;
            if (auto s = solve([&](Word v) { return register_value(c.d, c.r, v); }, q))
                return s;
        }
        return std::nullopt;
    }

    std::optional<FaultSpec> load_values() {
        for (const auto &c : classes_) {
            if (!c.post_load)
                continue;
            const auto p = static_cast<std::uint32_t>(c.prev);
            Solve q{after(p).regs[c.r], c.r, &m_.refout, memory_words(p)};
            auto more = address_values(c);
            q.extra.insert(q.extra.end(), more.begin(), more.end());
            q.deep = true;
            if (auto s = solve([&](Word v) { return load_value(p, v); }, q))
                return s;
        }
        return std::nullopt;
    }

    // The jump leaves at the end of the block instance holding a windowed instruction.
    std::optional<FaultSpec> magic_edges() {
        const auto &prog = m_.w.program;
        std::set<std::uint32_t> ends;
        for (auto d : live_)
            if (auto e = block_instance_end(prog, m_.tt, d); e && m_.ins(*e).op != Opcode::Halt)
                ends.insert(*e);
        for (auto e : ends) {
            const auto s = m_.st(e);
            for (auto b : illegal_targets(prog, prog.block_of[s]))
                if (auto spec = FaultSpec::magic_edge(cycle_, e, s, b); attempt(spec))
                    return spec;
        }
        return std::nullopt;
    }

    std::optional<FaultSpec> replays() {
        for (auto at : live_)
            for (auto j : live_) {
                if (j > at || m_.ins(j).op == Opcode::Nop || !replayable(m_.ins(j)))
                    continue;
                if (auto s = FaultSpec::replay(cycle_, at, m_.st(at), j, m_.st(j)); attempt(s))
                    return s;
            }
        return std::nullopt;
    }

    std::optional<FaultSpec> skip_replays() {
        for (auto i : live_) {
            if (m_.ins(i).op == Opcode::Nop)
                continue;
            for (auto j : live_) {
                if (j == i || m_.ins(j).op == Opcode::Nop || !replayable(m_.ins(j)))
                    continue;
                const auto at = std::max(i, j);
                auto s = FaultSpec::composite(CompositeKind::SkipReplay, cycle_,
                                              {FaultSpec::skip(cycle_, i, m_.st(i)),
                                               FaultSpec::replay(cycle_, at, m_.st(at), j, m_.st(j))});
                if (exact(execute(s)))
                    return s;
            }
        }
        return std::nullopt;
    }

    // Grows a set of at least two effects, adding whichever candidate brings the output closest.
    std::optional<FaultSpec> greedy(const std::vector<FaultSpec> &cands, CompositeKind kind, Family base,
                                    bool distinct_targets) {
        if (cands.size() < 2)
            return std::nullopt;
        std::vector<FaultSpec> chosen;
        std::vector<bool> used(cands.size(), false);
        Score current = score(m_.refout);
        for (std::size_t step = 0; step < m_.cfg.greedy_steps; ++step) {
            std::optional<std::size_t> best;
            Score best_score;
            for (std::size_t k = 0; k < cands.size(); ++k) {
                if (used[k])
                    continue;
                if (distinct_targets && std::any_of(chosen.begin(), chosen.end(), [&](const FaultSpec &c) {
                        return c.target == cands[k].target;
                    }))
                    continue;
                auto trial = chosen;
                trial.push_back(cands[k]);
                auto spec = FaultSpec::composite(kind, cycle_, trial, base);
                auto o = execute(spec);
                if (!o.halted)
                    continue;
                if (trial.size() >= 2 && o.out == obs_)
                    return spec;
                auto sc = score(o.out);
                if (!best || sc > best_score) {
                    best = k;
                    best_score = sc;
                }
            }
            if (!best || best_score <= current)
                return std::nullopt;
            used[*best] = true;
            chosen.push_back(cands[*best]);
            current = best_score;
        }
        return std::nullopt;
    }

    std::optional<FaultSpec> correlated() {
        std::vector<Word> masks;
        for (auto j : diff_) {
            const Word x = obs_[j] ^ m_.refout[j];
            if (std::popcount(x) <= 4 && std::find(masks.begin(), masks.end(), x) == masks.end())
                masks.push_back(x);
        }
        for (auto d : live_)
            for (Word mask : masks) {
                std::vector<FaultSpec> cands;
                for (const auto &c : classes_)
                    if (c.d == d || (m_.next_access[c.r][d + 1] == m_.next_access[c.r][c.d + 1] && c.d <= d))
                        cands.push_back(FaultSpec::register_flip(cycle_, d, m_.st(d), c.r, mask));
                if (auto s = greedy(cands, CompositeKind::CorrelatedCorruption, Family::Skip, false))
                    return s;
            }
        return std::nullopt;
    }

    std::vector<const RegClass *> classes_at(std::uint32_t d) const {
        std::vector<const RegClass *> out;
        for (const auto &c : classes_)
            if (c.d <= d && m_.next_access[c.r][d + 1] == m_.next_access[c.r][c.d + 1] &&
                m_.prev_access[c.r][d] == c.prev)
                out.push_back(&c);
        return out;
    }

    std::optional<FaultSpec> repeated() {
        {
            std::vector<FaultSpec> cands;
            for (auto d : live_)
                if (m_.ins(d).op != Opcode::Nop)
                    cands.push_back(FaultSpec::skip(cycle_, d, m_.st(d)));
            if (auto s = greedy(cands, CompositeKind::Repeated, Family::Skip, true))
                return s;
        }
        {
            std::vector<FaultSpec> cands;
            for (const auto &c : finite_)
                if (c.spec.family == Family::OperandSubstitution)
                    cands.push_back(c.spec);
            if (auto s = greedy(cands, CompositeKind::Repeated, Family::OperandSubstitution, true))
                return s;
        }
        for (auto d : live_) {
            std::vector<FaultSpec> mshw, regs;
            for (const RegClass *c : classes_at(d)) {
                const Word v = after(d).regs[c->r];
                if ((v & 0xffffu) != v)
                    mshw.push_back(FaultSpec::mshw(cycle_, d, m_.st(d), c->r));
                if (c->r < kDumpedRegs && obs_[c->r] != m_.refout[c->r]) {
                    regs.push_back(register_value(d, c->r, obs_[c->r]));
                    regs.push_back(register_value(d, c->r, v + (obs_[c->r] - m_.refout[c->r])));
                }
            }
            if (auto s = greedy(mshw, CompositeKind::Repeated, Family::MshwReset, false))
                return s;
            if (auto s = greedy(regs, CompositeKind::Repeated, Family::RegisterCorruption, false))
                return s;
        }
        return std::nullopt;
    }

    static bool value_family(Family f) { return f == Family::RegisterCorruption || f == Family::LoadCorruption; }

    std::optional<FaultSpec> mixed() {
        std::vector<const Cached *> useful;
        for (const auto &c : finite_) {
            bool helps = std::any_of(c.changed.begin(), c.changed.end(),
                                     [&](std::size_t j) { return c.out[j] == obs_[j]; });
            if (helps)
                useful.push_back(&c);
        }
        std::stable_sort(useful.begin(), useful.end(),
                         [](const Cached *a, const Cached *b) { return a->score > b->score; });

        std::vector<bool> cover(obs_.size());
        for (std::size_t a = 0; a < useful.size(); ++a)
            for (std::size_t b = a + 1; b < useful.size(); ++b) {
                const Cached &x = *useful[a], &y = *useful[b];
                if (x.spec.family == y.spec.family || x.spec.target == y.spec.target)
                    continue;
                std::fill(cover.begin(), cover.end(), false);
                for (auto j : x.changed)
                    cover[j] = true;
                for (auto j : y.changed)
                    cover[j] = true;
                if (!std::all_of(diff_.begin(), diff_.end(), [&](std::size_t j) { return cover[j]; }))
                    continue;
                auto s = FaultSpec::mixed(cycle_, {x.spec, y.spec});
                if (exact(execute(s)))
                    return s;
            }

        const std::size_t seeds = std::min(useful.size(), m_.cfg.mixed_value_seeds);
        for (std::size_t k = 0; k < seeds; ++k) {
            const Cached &x = *useful[k];
            for (const auto &c : classes_) {
                if (c.post_load) {
                    const auto p = static_cast<std::uint32_t>(c.prev);
                    if (p == x.spec.target)
                        continue;
                    Solve q{after(p).regs[c.r], c.r, &x.out, memory_words(p)};
                    q.tsolve_budget = 96;
                    auto make = [&](Word v) { return FaultSpec::mixed(cycle_, {x.spec, load_value(p, v)}); };
                    if (auto s = solve(make, q))
                        return s;
                } else {
                    Solve q{after(c.d).regs[c.r], c.r, &x.out, address_values(c)};
                    q.tsolve_budget = 96;
                    auto make = [&](Word v) { return FaultSpec::mixed(cycle_, {x.spec, register_value(c.d, c.r, v)}); };
                    if (auto s = solve(make, q))
                        return s;
                }
            }
        }
        return std::nullopt;
    }
};

}  // namespace

Classifier::Classifier(const Workload &w, const TimingConfig &timing, std::uint64_t seed, SearchConfig cfg)
    : impl_(std::make_unique<Impl>(w, timing, seed, cfg)) {}

Classifier::~Classifier() = default;

const TimedTrace &Classifier::timed() const { return impl_->tt; }
const Reference &Classifier::reference() const { return impl_->ref; }

Explanation Classifier::explain(std::uint32_t cycle, const OutputBuffer &observed) const {
    return Search(*impl_, cycle, observed).run();
}

Explanation Classifier::explain(const InjectionRecord &r) const {
    if ((r.outcome != Outcome::Successful && r.outcome != Outcome::Detected) || !r.buffer)
        return {};
    return explain(r.cycle, *r.buffer);
}

std::vector<Explanation> classify(const Workload &w, const CampaignResult &cr, const SearchConfig &cfg,
                                  unsigned threads) {
    Classifier c(w, cr.config.timing, cr.config.seed, cfg);
    std::vector<Explanation> out(cr.records.size());
    parallel_for(out.size(), thread_count(threads), [&](std::size_t i) { out[i] = c.explain(cr.records[i]); });
    return out;
}

RowKey row_key(const FaultSpec &s) {
    switch (s.family) {
    case Family::Composite:
        switch (s.kind) {
        case CompositeKind::SkipReplay: return {Family::Skip, Multiplicity::Composite};
        case CompositeKind::CorrelatedCorruption: return {Family::RegisterCorruption, Multiplicity::Composite};
        default: return {s.base, Multiplicity::Composite};
        }
    case Family::Mixed: return {Family::Mixed, Multiplicity::Mixed};
    default: return {s.family, Multiplicity::Single};
    }
}

std::string row_name(const RowKey &k) {
    if (k.multiplicity == Multiplicity::Mixed)
        return "mixed";
    return std::string(family_name(k.family)) + (k.multiplicity == Multiplicity::Composite ? " (composite)" : "");
}

const std::vector<RowKey> &row_order() {
    static const std::vector<RowKey> rows = [] {
        std::vector<RowKey> r;
        const Family legend[] = {Family::Skip,      Family::RegisterCorruption, Family::OperandSubstitution,
                                 Family::MshwReset, Family::LoadCorruption,     Family::MagicEdge};
        for (Family f : legend)
            r.push_back({f, Multiplicity::Single});
        r.push_back({Family::Replay, Multiplicity::Single});
        for (Family f : legend)
            if (f != Family::MagicEdge)
                r.push_back({f, Multiplicity::Composite});
        r.push_back({Family::Mixed, Multiplicity::Mixed});
        return r;
    }();
    return rows;
}

const DistributionRow &Distribution::at(const RowKey &k) const {
    for (const auto &r : rows)
        if (r.key == k)
            return r;
    throw std::out_of_range("no distribution row " + row_name(k));
}

namespace {

Distribution make_distribution(const std::vector<std::optional<RowKey>> &keys) {
    Distribution d;
    for (const auto &k : row_order())
        d.rows.push_back({k, row_name(k), 0, 0});
    for (const auto &k : keys) {
        ++d.total;
        if (!k) {
            ++d.unexplained;
            continue;
        }
        auto it = std::find_if(d.rows.begin(), d.rows.end(), [&](const DistributionRow &r) { return r.key == *k; });
        if (it == d.rows.end())
            it = d.rows.insert(d.rows.end(), {*k, row_name(*k), 0, 0});
        ++it->count;
    }
    for (auto &r : d.rows)
        r.pct = percent(r.count, d.total);
    d.unexplained_pct = percent(d.unexplained, d.total);
    return d;
}

}  // namespace

Distribution distribution(const std::vector<Explanation> &ex) {
    std::vector<std::optional<RowKey>> keys;
    for (const auto &e : ex) {
        if (!e.searched)
            continue;
        keys.push_back(e.explained ? std::optional(row_key(*e.spec)) : std::nullopt);
    }
    return make_distribution(keys);
}

Distribution distribution(const std::vector<FaultSpec> &specs) {
    std::vector<std::optional<RowKey>> keys;
    for (const auto &s : specs)
        keys.push_back(row_key(s));
    return make_distribution(keys);
}

std::vector<OutcomeRow> HarmfulBreakdown::rows() const {
    return {{"magic edge", magic_edge, percent(magic_edge, total)},
            {"other single", other_single, percent(other_single, total)},
            {"mixed", mixed, percent(mixed, total)},
            {"other composite", other_composite, percent(other_composite, total)},
            {"unexplained", unexplained, percent(unexplained, total)}};
}

HarmfulBreakdown harmful_breakdown(const std::vector<Explanation> &ex, const std::vector<InjectionRecord> &records) {
    if (ex.size() != records.size())
        throw std::invalid_argument("explanations and records differ in length");
    HarmfulBreakdown h;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].outcome != Outcome::Successful || !records[i].harmful)
            continue;
        ++h.total;
        const auto &e = ex[i];
        if (!e.explained)
            ++h.unexplained;
        else if (e.multiplicity == Multiplicity::Mixed)
            ++h.mixed;
        else if (e.multiplicity == Multiplicity::Composite)
            ++h.other_composite;
        else if (e.family == Family::MagicEdge)
            ++h.magic_edge;
        else
            ++h.other_single;
    }
    return h;
}

json to_json(const Explanation &e) {
    json j{{"searched", e.searched}, {"explained", e.explained}, {"label", e.label()}, {"multiplicity", multiplicity_name(e.multiplicity)},
           {"candidates", e.candidates}};
    if (e.explained) {
        j["family"] = family_name(e.family);
        if (e.multiplicity == Multiplicity::Composite) {
            j["kind"] = composite_kind_name(e.kind);
            j["base"] = family_name(e.base);
        }
        j["spec"] = to_json(*e.spec);
    }
    return j;
}

Explanation explanation_from_json(const json &j) {
    Explanation e;
    e.searched = j.value("searched", true);
    e.explained = j.at("explained").get<bool>();
    e.multiplicity = multiplicity_from_name(j.at("multiplicity").get<std::string>());
    e.candidates = j.value("candidates", std::size_t{0});
    if (e.explained) {
        e.family = family_from_name(j.at("family").get<std::string>());
        if (j.contains("kind"))
            e.kind = composite_kind_from_name(j.at("kind").get<std::string>());
        if (j.contains("base"))
            e.base = family_from_name(j.at("base").get<std::string>());
        e.spec = fault_spec_from_json(j.at("spec"));
    }
    return e;
}

json to_json(const Distribution &d) {
    json rows = json::array();
    for (const auto &r : d.rows)
        rows.push_back({{"row", r.name},
                        {"family", family_name(r.key.family)},
                        {"multiplicity", multiplicity_name(r.key.multiplicity)},
                        {"count", r.count},
                        {"pct", r.pct}});
    return json{{"total", d.total}, {"rows", rows}, {"unexplained", {{"count", d.unexplained}, {"pct", d.unexplained_pct}}}};
}

json to_json(const HarmfulBreakdown &h) {
    json rows = json::array();
    for (const auto &r : h.rows())
        rows.push_back({{"effect", r.name}, {"count", r.count}, {"pct", r.pct}});
    return json{{"total", h.total}, {"rows", rows}};
}

}  // namespace faultforge

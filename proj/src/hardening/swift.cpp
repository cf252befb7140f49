#include <algorithm>

#include "emit.hpp"
#include "faultforge/rng.hpp"

namespace faultforge {

using namespace hardening_detail;

namespace {

struct Span {
    std::uint32_t entry = 0;
    std::uint32_t exit = 0;  // inclusive
    bool is_handler = false;
    bool cond_target = false;  // entered from a conditional branch, taken or not
};

struct SwiftOutput {
    HardenedProgram hp;
    // Per source instruction: emitted range and index of the copied original.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> range;
    std::vector<std::uint32_t> primary;
};

class SwiftPass {
  public:
    explicit SwiftPass(const Program &p) : p_(p), e_(p) {}

    SwiftOutput run();

  private:
    bool check_branch(std::uint32_t i) const {
        return is_branch(p_.code[i].op) && p_.code[i].label == kDetectLabel;
    }
    bool in_handler(std::uint32_t i) const { return handler_ && i >= handler_->first && i <= handler_->second; }

    void partition();
    void allocate();
    void sign();

    bool has_shadow(Reg x) const { return sh_.count(x) || spill_.count(x); }
    Reg shadow_src(Reg x, Reg temp);
    void emit_shadow(const Instruction &in);
    void check_reg(Reg x);
    void emit_store(const Instruction &in);
    std::uint32_t emit_terminator_branch(std::size_t b, std::uint32_t t);
    // Signature updates toward span `to` (S1 from the intermediate value).
    void update_towards(std::size_t b, std::size_t to);
    std::optional<std::size_t> fall_through(std::size_t b) const {
        if (b + 1 < spans_.size())
            return b + 1;
        return std::nullopt;
    }

    const Program &p_;
    Emitter e_;
    std::optional<std::pair<std::uint32_t, std::uint32_t>> handler_;
    std::vector<Span> spans_;
    std::vector<std::size_t> span_of_;
    std::set<Reg> comp_;
    std::map<Reg, Reg> sh_;
    std::map<Reg, Word> spill_;
    Reg s1_ = kNoReg, s2_ = kNoReg, t1_ = kNoReg, t2_ = kNoReg;
    std::vector<Word> sig_, mid_;
    Word ctrl_ = 0;
    struct Trampoline {
        std::string label;
        std::size_t from = 0, to = 0;
        std::string target;
    };
    std::vector<Trampoline> tramps_;
};

void SwiftPass::partition() {
    if (auto it = p_.labels.find(kDetectLabel); it != p_.labels.end()) {
        std::uint32_t h = it->second, end = h;
        while (end < p_.size() && p_.code[end].op != Opcode::Halt)
            ++end;
        if (end >= p_.size())
            throw HardenError("detection handler does not halt");
        handler_ = {h, end};
    }
    std::set<std::uint32_t> leaders{0};
    if (handler_) {
        leaders.insert(handler_->first);
        leaders.insert(handler_->second + 1);
    }
    for (std::uint32_t i = 0; i < p_.size(); ++i) {
        const auto &in = p_.code[i];
        if (in.op == Opcode::Halt || (in.op == Opcode::B && check_branch(i)))
            leaders.insert(i + 1);
        else if (is_branch(in.op) && !check_branch(i)) {
            leaders.insert(in.target);
            leaders.insert(i + 1);
        }
    }
    std::vector<std::uint32_t> ls(leaders.begin(), leaders.end());
    while (!ls.empty() && ls.back() >= p_.size())
        ls.pop_back();
    span_of_.assign(p_.size(), 0);
    for (std::size_t k = 0; k < ls.size(); ++k) {
        Span s;
        s.entry = ls[k];
        s.exit = (k + 1 < ls.size() ? ls[k + 1] : static_cast<std::uint32_t>(p_.size())) - 1;
        s.is_handler = in_handler(s.entry);
        for (auto i = s.entry; i <= s.exit; ++i)
            span_of_[i] = spans_.size();
        spans_.push_back(s);
    }
    for (std::size_t b = 0; b < spans_.size(); ++b) {
        const auto x = spans_[b].exit;
        if (is_cond_branch(p_.code[x].op) && !check_branch(x)) {
            spans_[span_of_[p_.code[x].target]].cond_target = true;
            if (b + 1 < spans_.size())
                spans_[b + 1].cond_target = true;
        }
    }
}

void SwiftPass::allocate() {
    std::map<Reg, int> uses;
    for (std::uint32_t i = 0; i < p_.size(); ++i) {
        if (in_handler(i))
            continue;
        std::set<Reg> rs;
        collect_regs(p_.code[i], rs);
        for (Reg r : rs) {
            comp_.insert(r);
            ++uses[r];
        }
    }
    std::vector<Reg> free;
    for (Reg r = 0; r < kPcReg; ++r)
        if (!comp_.count(r))
            free.push_back(r);
    auto take_top = [&] {
        Reg r = free.back();
        free.pop_back();
        return r;
    };
    if (free.size() >= comp_.size() + 3) {
        s1_ = take_top();
        s2_ = take_top();
        t1_ = take_top();
        std::size_t k = 0;
        for (Reg r : comp_)
            sh_[r] = free[k++];
        return;
    }
    if (free.size() < 4)
        throw HardenError("not enough free registers for signature and scratch registers");
    s1_ = take_top();
    s2_ = take_top();
    t1_ = take_top();
    t2_ = take_top();
    std::vector<Reg> order(comp_.begin(), comp_.end());
    std::stable_sort(order.begin(), order.end(), [&](Reg a, Reg b) { return uses[a] > uses[b]; });
    std::size_t k = 0;
    for (Reg r : order) {
        if (k < free.size())
            sh_[r] = free[k++];
        else
            spill_[r] = 0;
    }
}

void SwiftPass::sign() {
    std::set<Word> seen;
    std::uint64_t state = 0x5157494654ull;
    auto draw = [&] {
        while (true) {
            state = splitmix64(state);
            Word w = static_cast<Word>(state >> 32) | 1u;
            if (seen.insert(w).second)
                return w;
        }
    };
    for (std::size_t b = 0; b < spans_.size(); ++b) {
        sig_.push_back(draw());
        mid_.push_back(draw());
    }
}

Reg SwiftPass::shadow_src(Reg x, Reg temp) {
    if (auto it = sh_.find(x); it != sh_.end())
        return it->second;
    if (auto it = spill_.find(x); it != spill_.end()) {
        e_.emit(ldr_abs(temp, it->second));
        return temp;
    }
    return x;
}

void SwiftPass::emit_shadow(const Instruction &in) {
    Instruction s = in;
    if (s.src1 != kNoReg)
        s.src1 = shadow_src(s.src1, t1_);
    if (s.src2 != kNoReg)
        s.src2 = shadow_src(s.src2, t2_);
    if (s.dest == kNoReg) {
        e_.emit(s);
        return;
    }
    if (auto it = sh_.find(in.dest); it != sh_.end()) {
        s.dest = it->second;
        e_.emit(s);
        return;
    }
    s.dest = t1_;
    e_.emit(s);
    e_.emit(str_abs(t1_, spill_.at(in.dest)));
}

void SwiftPass::check_reg(Reg x) {
    if (!has_shadow(x))
        return;
    e_.emit(cmp(x, shadow_src(x, t1_)));
    e_.emit(branch(Opcode::Bne, kDetectLabel));
}

void SwiftPass::emit_store(const Instruction &in) {
    const Reg v = in.src1, base = in.src2;
    check_reg(v);
    if (base != kNoReg && base != v)
        check_reg(base);
    e_.emit(in);
    // read back through the shadow address and compare with the shadow value
    Reg b = base == kNoReg ? kNoReg : shadow_src(base, t1_);
    e_.emit(ldr(t1_, b, in.imm));
    Reg sv = shadow_src(v, t2_);
    e_.emit(cmp(t1_, sv));
    e_.emit(branch(Opcode::Bne, kDetectLabel));
}

void SwiftPass::update_towards(std::size_t b, std::size_t to) {
    e_.emit(eori(s1_, s1_, mid_[b] ^ sig_[to]));
    e_.emit(eori(s2_, s2_, sig_[b] ^ sig_[to]));
}

std::uint32_t SwiftPass::emit_terminator_branch(std::size_t b, std::uint32_t t) {
    const Instruction &br = p_.code[t];
    const std::size_t T = span_of_.at(br.target);
    const auto F = fall_through(b);
    const Instruction *c = nullptr;
    if (t > spans_[b].entry && is_compare(p_.code[t - 1].op))
        c = &p_.code[t - 1];

    if (c) {
        std::set<Reg> rs;
        for (Reg r : {c->src1, c->src2})
            if (r != kNoReg)
                rs.insert(r);
        for (Reg r : rs)
            check_reg(r);
    }
    // second signature variable follows the duplicated predicate
    const std::string ld = e_.fresh("sw"), le = e_.fresh("sw");
    if (c)
        emit_shadow(*c);
    e_.emit(branch(br.op, ld));
    if (F && !spans_[*F].is_handler)
        e_.emit(eori(s2_, s2_, sig_[b] ^ sig_[*F]));
    e_.emit(branch(Opcode::B, le));
    e_.label(ld);
    e_.emit(eori(s2_, s2_, sig_[b] ^ sig_[T]));
    e_.label(le);
    if (c)
        e_.emit(*c);
    Trampoline tr{e_.fresh("sw"), b, T, br.label};
    Instruction copy = br;
    copy.label = tr.label;
    const auto at = e_.emit(copy);
    tramps_.push_back(tr);
    if (F && !spans_[*F].is_handler)
        e_.emit(eori(s1_, s1_, mid_[b] ^ sig_[*F]));
    else if (F)
        e_.emit(branch(Opcode::B, kDetectLabel));
    return at;
}

SwiftOutput SwiftPass::run() {
    partition();
    allocate();
    sign();

    SwiftOutput out;
    out.range.assign(p_.size(), {0, 0});
    out.primary.assign(p_.size(), 0);

    if (const Region *r = p_.find_region("ctrl"))
        ctrl_ = r->base;
    else {
        ctrl_ = next_free_address(p_);
        e_.region(Region{"ctrl", ctrl_, 1, {0}});
    }
    if (!spill_.empty()) {
        Word base = std::max(next_free_address(p_), ctrl_ + 1);
        Region sr{"shadow", base, static_cast<std::uint32_t>(spill_.size()), {}};
        Word a = base;
        for (auto &[r, addr] : spill_) {
            addr = a++;
            sr.init.push_back(p_.init_regs[r]);
        }
        e_.region(std::move(sr));
    }
    e_.init(s1_, sig_[0]);
    e_.init(s2_, sig_[0]);
    for (auto [o, s] : sh_)
        e_.init(s, p_.init_regs[o]);

    const auto labels = labels_by_index(p_);
    auto put_labels = [&](std::uint32_t i) {
        auto [lo, hi] = labels.equal_range(i);
        for (auto it = lo; it != hi; ++it)
            e_.label(it->second);
    };

    std::vector<std::uint32_t> entry_at(spans_.size(), 0);
    bool fin_emitted = false;
    for (std::size_t b = 0; b < spans_.size(); ++b) {
        const Span &sp = spans_[b];
        if (sp.is_handler)
            continue;
        put_labels(sp.entry);
        entry_at[b] = e_.here();
        e_.emit(cmpi(s1_, sig_[b]));
        e_.emit(branch(Opcode::Bne, kDetectLabel));
        // S2 can only drift from S1 across a conditional branch
        if (sp.cond_target) {
            e_.emit(cmpi(s2_, sig_[b]));
            e_.emit(branch(Opcode::Bne, kDetectLabel));
        }
        e_.emit(eori(s1_, s1_, sig_[b] ^ mid_[b]));

        for (std::uint32_t i = sp.entry; i <= sp.exit; ++i) {
            if (i != sp.entry)
                put_labels(i);
            const Instruction &in = p_.code[i];
            const std::uint32_t start = e_.here();
            const bool last = i == sp.exit;
            const bool real_branch = is_branch(in.op) && !check_branch(i);
            const bool deferred_cmp = is_compare(in.op) && i + 1 == sp.exit && is_cond_branch(p_.code[i + 1].op) &&
                                      !check_branch(i + 1);
            std::uint32_t primary = start;
            if (deferred_cmp) {
                // emitted with the branch
            } else if (real_branch && is_cond_branch(in.op)) {
                primary = emit_terminator_branch(b, i);
            } else if (real_branch) {
                const std::size_t T = span_of_.at(in.target);
                update_towards(b, T);
                primary = e_.emit(in);
            } else if (in.op == Opcode::Halt) {
                // registers are dumped at halt, so every halt goes through one output check
                if (!fin_emitted) {
                    e_.label("__fin");
                    for (Reg r : comp_)
                        check_reg(r);
                    primary = e_.emit(in);
                    fin_emitted = true;
                } else {
                    primary = e_.emit(branch(Opcode::B, "__fin"));
                }
            } else if (in.op == Opcode::Nop || check_branch(i) || is_compare(in.op)) {
                e_.emit(in);
            } else if (in.op == Opcode::Str) {
                emit_store(in);
            } else if (in.op == Opcode::Ldr) {
                if (in.src1 != kNoReg)
                    check_reg(in.src1);
                primary = e_.emit(in);
                emit_shadow(in);
            } else {
                primary = e_.emit(in);
                emit_shadow(in);
            }
            if (last && !is_branch(in.op) && in.op != Opcode::Halt) {
                if (auto F = fall_through(b)) {
                    if (spans_[*F].is_handler)
                        e_.emit(branch(Opcode::B, kDetectLabel));
                    else
                        update_towards(b, *F);
                }
            } else if (last && check_branch(i) && in.op != Opcode::B) {
                if (auto F = fall_through(b); F && !spans_[*F].is_handler)
                    update_towards(b, *F);
            }
            out.range[i] = {start, e_.here()};
            out.primary[i] = primary;
        }
    }

    for (const auto &tr : tramps_) {
        e_.label(tr.label);
        e_.emit(eori(s1_, s1_, mid_[tr.from] ^ sig_[tr.to]));
        e_.emit(branch(Opcode::B, tr.target));
    }
    if (handler_) {
        for (auto i = handler_->first; i <= handler_->second; ++i) {
            put_labels(i);
            out.range[i] = {e_.here(), e_.here() + 1};
            out.primary[i] = e_.emit(p_.code[i]);
        }
    } else {
        emit_handler(e_, ctrl_);
    }

    HardenedProgram &hp = out.hp;
    hp.scheme = Scheme::Swift;
    hp.program = e_.build();
    hp.detect_handler = hp.program.block_of.at(hp.program.label_index(kDetectLabel));
    hp.shadow_map = sh_;
    hp.spilled = spill_;
    for (std::size_t b = 0; b < spans_.size(); ++b)
        if (!spans_[b].is_handler)
            hp.signatures[hp.program.block_of.at(entry_at[b])] = sig_[b];
    hp.computation_regs = comp_;
    for (auto [o, s] : sh_)
        hp.computation_regs.insert(s);
    return out;
}

}  // namespace

HardenedProgram harden_swift(const Workload &w) {
    auto out = SwiftPass(w.program).run();
    out.hp.baseline_id = w.id;
    out.hp.baseline_size = w.program.size();
    return std::move(out.hp);
}

HardenedProgram harden_stacked(const Workload &w) {
    HardenedProgram loop = harden_loop(w);
    auto out = SwiftPass(loop.program).run();
    HardenedProgram &hp = out.hp;
    hp.scheme = Scheme::Stacked;
    hp.baseline_id = w.id;
    hp.baseline_size = w.program.size();
    for (auto i : loop.slice)
        for (auto k = out.range[i].first; k < out.range[i].second; ++k)
            hp.slice.push_back(k);
    return std::move(hp);
}

}  // namespace faultforge

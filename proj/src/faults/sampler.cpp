#include <algorithm>
#include <cmath>
#include <numeric>

#include "faultforge/faults.hpp"

namespace faultforge {

using nlohmann::json;

double EffectProfile::weight(Family f) const {
    auto it = weights.find(f);
    return it == weights.end() ? 0.0 : it->second;
}

void EffectProfile::validate() const {
    double total = 0;
    for (const auto &[f, w] : weights) {
        if (!(w >= 0))
            throw std::invalid_argument("profile weights must be non-negative");
        total += w;
    }
    if (total <= 0)
        throw std::invalid_argument("profile has no positive family weight");
    auto prob = [](double p, const char *what) {
        if (!(p >= 0 && p <= 1))
            throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
    };
    prob(bitflip_share, "bitflip_share");
    prob(coupling, "coupling");
    prob(mute_probability, "mute_probability");
    if (skip_replay < 0 || correlated < 0)
        throw std::invalid_argument("composite weights must be non-negative");
    for (const auto &[f, w] : repeated) {
        if (w < 0)
            throw std::invalid_argument("composite weights must be non-negative");
        if (f != Family::Skip && f != Family::OperandSubstitution && f != Family::MshwReset &&
            f != Family::RegisterCorruption)
            throw std::invalid_argument("repeated effects only exist for skip, operand substitution, mshw reset "
                                        "and register corruption");
    }
}

void EffectProfile::normalize() {
    validate();
    double total = 0;
    for (const auto &[f, w] : weights)
        total += w;
    if (std::abs(total - 1.0) > 1e-12)
        for (auto &[f, w] : weights)
            w /= total;
    double ctotal = skip_replay + correlated;
    for (const auto &[f, w] : repeated)
        ctotal += w;
    if (ctotal > 0 && std::abs(ctotal - 1.0) > 1e-12) {
        skip_replay /= ctotal;
        correlated /= ctotal;
        for (auto &[f, w] : repeated)
            w /= ctotal;
    }
}

json EffectProfile::to_json() const {
    json w = json::object();
    for (Family f : kAllFamilies)
        w[std::string(family_name(f))] = weight(f);
    json rep = json::object();
    for (const auto &[f, v] : repeated)
        rep[std::string(family_name(f))] = v;
    return {{"name", name},
            {"weights", w},
            {"bitflip_share", bitflip_share},
            {"coupling", coupling},
            {"mute_probability", mute_probability},
            {"composite", {{"skip-replay", skip_replay}, {"correlated", correlated}, {"repeated", rep}}}};
}

EffectProfile EffectProfile::from_json(const json &j) {
    EffectProfile p;
    p.name = j.value("name", std::string("custom"));
    for (const auto &[k, v] : j.at("weights").items())
        p.weights[family_from_name(k)] = v.get<double>();
    p.bitflip_share = j.value("bitflip_share", p.bitflip_share);
    p.coupling = j.value("coupling", p.coupling);
    p.mute_probability = j.value("mute_probability", p.mute_probability);
    if (j.contains("composite")) {
        const auto &c = j.at("composite");
        p.skip_replay = c.value("skip-replay", p.skip_replay);
        p.correlated = c.value("correlated", p.correlated);
        if (c.contains("repeated"))
            for (const auto &[k, v] : c.at("repeated").items())
                p.repeated[family_from_name(k)] = v.get<double>();
    }
    p.normalize();
    return p;
}

EffectProfile EffectProfile::only(Family f) {
    EffectProfile p;
    p.name = std::string(family_name(f)) + "-only";
    p.weights[f] = 1.0;
    p.normalize();
    return p;
}

EffectProfile paper_em_default() {
    // Family weights follow the measured loop1 distribution; composite kinds
    // are split by the base effect observed in each composite column.
    EffectProfile p;
    p.name = "paper-em-default";
    p.weights = {
        {Family::Skip, 26.5},
        {Family::RegisterCorruption, 0.9},
        {Family::OperandSubstitution, 10.2},
        {Family::MshwReset, 0.0},
        {Family::LoadCorruption, 18.0},
        {Family::MagicEdge, 0.0},
        {Family::Composite, 6.5 + 0.2 + 17.4 + 3.4},
        {Family::Mixed, 20.0},
        {Family::Replay, 0.0},
    };
    p.skip_replay = 6.5;
    p.correlated = 0.2;
    p.repeated = {{Family::OperandSubstitution, 17.4}, {Family::MshwReset, 3.4}};
    p.bitflip_share = 0.5;
    p.coupling = 0.75;
    p.mute_probability = 0.029;
    p.normalize();
    return p;
}

EffectProfile EffectProfile::named(std::string_view name) {
    if (name == "paper-em-default")
        return paper_em_default();
    for (Family f : kAllFamilies)
        if (name == std::string(family_name(f)) + "-only")
            return only(f);
    if (name == "uniform") {
        EffectProfile p;
        p.name = "uniform";
        for (Family f : kAllFamilies)
            p.weights[f] = 1.0;
        p.skip_replay = 1.0;
        p.correlated = 1.0;
        p.repeated = {{Family::Skip, 1.0},
                      {Family::OperandSubstitution, 1.0},
                      {Family::MshwReset, 1.0},
                      {Family::RegisterCorruption, 1.0}};
        p.normalize();
        return p;
    }
    throw std::invalid_argument("unknown profile '" + std::string(name) + "'");
}

namespace {

template <class T>
const T &pick(Rng &rng, const std::vector<T> &v) {
    return v[rng.below(v.size())];
}

Word random_mask(Rng &rng, unsigned max_weight) {
    unsigned hw = 1 + static_cast<unsigned>(rng.below(max_weight));
    Word m = 0;
    while (static_cast<unsigned>(__builtin_popcount(m)) < hw)
        m |= Word(1) << rng.below(32);
    return m;
}

template <class K>
std::optional<K> weighted(Rng &rng, const std::vector<std::pair<K, double>> &items) {
    double total = 0;
    for (const auto &[k, w] : items)
        total += w;
    if (total <= 0)
        return std::nullopt;
    double x = rng.uniform() * total;
    for (const auto &[k, w] : items) {
        if (w <= 0)
            continue;
        if (x < w)
            return k;
        x -= w;
    }
    for (auto it = items.rbegin(); it != items.rend(); ++it)
        if (it->second > 0)
            return it->first;
    return std::nullopt;
}

class Sampler {
  public:
    Sampler(const EffectProfile &prof, const Program &p, const TimedTrace &tt, Rng &rng)
        : prof_(prof), p_(p), tt_(tt), rng_(rng) {}

    std::vector<std::uint32_t> targets(std::uint32_t cycle) const {
        auto in = inflight_at(tt_, cycle);
        std::erase_if(in, [&](std::uint32_t d) { return ins(d).op == Opcode::Nop || !skippable(ins(d)); });
        return in;
    }

    const Instruction &ins(std::uint32_t d) const { return p_.code[tt_.static_index[d]]; }
    std::uint32_t st(std::uint32_t d) const { return tt_.static_index[d]; }

    std::optional<FaultSpec> single(Family f, std::uint32_t cycle, const std::vector<std::uint32_t> &in) {
        if (in.empty())
            return std::nullopt;
        switch (f) {
        case Family::Skip: {
            auto d = pick(rng_, in);
            return FaultSpec::skip(cycle, d, st(d));
        }
        case Family::Replay: {
            auto p = pick(rng_, in);
            std::vector<std::uint32_t> js;
            for (auto j : in)
                if (j <= p && replayable(ins(j)))
                    js.push_back(j);
            if (js.empty())
                return std::nullopt;
            auto j = pick(rng_, js);
            return FaultSpec::replay(cycle, p, st(p), j, st(j));
        }
        case Family::RegisterCorruption: {
            auto pool = operand_pool(p_, tt_, in);
            if (pool.regs.empty())
                return std::nullopt;
            Reg r = pick(rng_, pool.regs);
            auto d = pick(rng_, in);
            return reg_corruption(cycle, d, r);
        }
        case Family::MshwReset: {
            auto pool = operand_pool(p_, tt_, in);
            if (pool.regs.empty())
                return std::nullopt;
            Reg r = pick(rng_, pool.regs);
            auto d = pick(rng_, in);
            return FaultSpec::mshw(cycle, d, st(d), r);
        }
        case Family::OperandSubstitution: {
            std::vector<std::uint32_t> cands;
            for (auto d : in)
                if (!ins(d).slots().empty())
                    cands.push_back(d);
            if (cands.empty())
                return std::nullopt;
            auto pool = operand_pool(p_, tt_, in);
            return substitution(cycle, pick(rng_, cands), pool);
        }
        case Family::LoadCorruption: {
            std::vector<std::uint32_t> loads;
            for (auto d : in)
                if (ins(d).op == Opcode::Ldr)
                    loads.push_back(d);
            if (loads.empty())
                return std::nullopt;
            auto d = pick(rng_, loads);
            return load_corruption(cycle, d, operand_pool(p_, tt_, in));
        }
        case Family::MagicEdge: {
            auto d = pick(rng_, in);
            auto e = block_instance_end(p_, tt_, d);
            if (!e || ins(*e).op == Opcode::Halt)
                return std::nullopt;
            auto illegal = illegal_targets(p_, p_.block_of[st(*e)]);
            if (illegal.empty())
                return std::nullopt;
            return FaultSpec::magic_edge(cycle, *e, st(*e), pick(rng_, illegal));
        }
        case Family::Composite: return composite(cycle, in);
        case Family::Mixed: return mixed(cycle, in);
        }
        return std::nullopt;
    }

    FaultSpec reg_corruption(std::uint32_t cycle, std::uint32_t d, Reg r) {
        if (rng_.chance(prof_.bitflip_share))
            return FaultSpec::register_flip(cycle, d, st(d), r, random_mask(rng_, 4));
        return FaultSpec::register_set(cycle, d, st(d), r, rng_.word());
    }

    std::optional<FaultSpec> substitution(std::uint32_t cycle, std::uint32_t d, const OperandPool &pool) {
        const Instruction &x = ins(d);
        Slot slot = pick(rng_, x.slots());
        std::vector<Operand> options;
        for (const auto &o : pool.all()) {
            if (slot == Slot::Dest && (!o.is_reg || o.reg == x.dest))
                continue;
            if (slot == Slot::Src1 && o.is_reg && o.reg == x.src1)
                continue;
            if (slot == Slot::Src2 && o.is_reg && o.reg == x.src2)
                continue;
            if (slot == Slot::Imm && !o.is_reg && x.imm && o.imm == *x.imm)
                continue;
            options.push_back(o);
        }
        if (options.empty())
            return std::nullopt;
        return FaultSpec::substitute(cycle, d, st(d), slot, pick(rng_, options));
    }

    FaultSpec load_corruption(std::uint32_t cycle, std::uint32_t d, const OperandPool &pool) {
        std::vector<const Region *> others;
        if (p_.regions.size() > 1) {
            for (const auto &r : p_.regions)
                if (tt_.mem_addr[d] - r.base >= r.length)
                    others.push_back(&r);
        }
        if (!others.empty() && rng_.chance(0.5)) {
            const Region *r = others[rng_.below(others.size())];
            return FaultSpec::load_other(cycle, d, st(d), r->base + static_cast<Word>(rng_.below(r->length)));
        }
        Reg src = pool.regs.empty() ? ins(d).dest : pick(rng_, pool.regs);
        return FaultSpec::load_flip(cycle, d, st(d), src, random_mask(rng_, 4));
    }

    // Each candidate joins with the coupling probability; at least two are kept.
    template <class T>
    std::vector<T> couple(const std::vector<T> &cands) {
        std::vector<T> chosen, rest;
        for (const auto &c : cands)
            (rng_.chance(prof_.coupling) ? chosen : rest).push_back(c);
        while (chosen.size() < 2 && !rest.empty()) {
            auto k = rng_.below(rest.size());
            chosen.push_back(rest[k]);
            rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(k));
        }
        std::sort(chosen.begin(), chosen.end());
        return chosen;
    }

    std::optional<FaultSpec> composite(std::uint32_t cycle, const std::vector<std::uint32_t> &in) {
        std::vector<std::pair<std::pair<CompositeKind, Family>, double>> kinds;
        kinds.push_back({{CompositeKind::SkipReplay, Family::Skip}, prof_.skip_replay});
        kinds.push_back({{CompositeKind::CorrelatedCorruption, Family::RegisterCorruption}, prof_.correlated});
        for (const auto &[f, w] : prof_.repeated)
            kinds.push_back({{CompositeKind::Repeated, f}, w});
        auto choice = weighted(rng_, kinds);
        if (!choice)
            return std::nullopt;
        auto [kind, base] = *choice;

        if (kind == CompositeKind::SkipReplay) {
            std::vector<std::uint32_t> is;
            for (auto d : in)
                if (ins(d).op != Opcode::Nop)
                    is.push_back(d);
            if (is.empty())
                return std::nullopt;
            auto i = pick(rng_, is);
            std::vector<std::uint32_t> js;
            for (auto j : in)
                if (j != i && replayable(ins(j)) && ins(j).op != Opcode::Nop)
                    js.push_back(j);
            if (js.empty())
                return FaultSpec::skip(cycle, i, st(i));
            auto j = pick(rng_, js);
            auto after = std::max(i, j);
            return FaultSpec::composite(kind, cycle,
                                        {FaultSpec::skip(cycle, i, st(i)),
                                         FaultSpec::replay(cycle, after, st(after), j, st(j))});
        }

        auto pool = operand_pool(p_, tt_, in);
        if (kind == CompositeKind::CorrelatedCorruption) {
            if (pool.regs.empty())
                return std::nullopt;
            auto d = pick(rng_, in);
            auto regs = couple(pool.regs);
            Word mask = random_mask(rng_, 4);
            if (regs.size() < 2)
                return FaultSpec::register_flip(cycle, d, st(d), regs[0], mask);
            std::vector<FaultSpec> subs;
            for (Reg r : regs)
                subs.push_back(FaultSpec::register_flip(cycle, d, st(d), r, mask));
            return FaultSpec::composite(kind, cycle, std::move(subs));
        }

        std::vector<FaultSpec> subs;
        switch (base) {
        case Family::Skip: {
            std::vector<std::uint32_t> eligible;
            for (auto d : in)
                if (ins(d).op != Opcode::Nop)
                    eligible.push_back(d);
            for (auto d : couple(eligible))
                subs.push_back(FaultSpec::skip(cycle, d, st(d)));
            break;
        }
        case Family::OperandSubstitution: {
            std::vector<std::uint32_t> eligible;
            for (auto d : in)
                if (!ins(d).slots().empty())
                    eligible.push_back(d);
            for (auto d : couple(eligible))
                if (auto s = substitution(cycle, d, pool))
                    subs.push_back(*s);
            break;
        }
        case Family::MshwReset:
        case Family::RegisterCorruption: {
            if (pool.regs.empty())
                break;
            auto d = pick(rng_, in);
            for (Reg r : couple(pool.regs))
                subs.push_back(base == Family::MshwReset ? FaultSpec::mshw(cycle, d, st(d), r)
                                                         : reg_corruption(cycle, d, r));
            break;
        }
        default: break;
        }
        if (subs.empty())
            return std::nullopt;
        if (subs.size() == 1)
            return subs.front();
        return FaultSpec::composite(CompositeKind::Repeated, cycle, std::move(subs), base);
    }

    // Draws a family per weights, dropping families with no eligible target until one applies.
    std::optional<FaultSpec> draw(std::vector<std::pair<Family, double>> fams, std::uint32_t cycle,
                                  const std::vector<std::uint32_t> &in, Family *chosen = nullptr) {
        while (auto f = weighted(rng_, fams)) {
            if (auto spec = single(*f, cycle, in)) {
                if (chosen)
                    *chosen = *f;
                return spec;
            }
            for (auto &[g, w] : fams)
                if (g == *f)
                    w = 0;
        }
        return std::nullopt;
    }

    std::optional<FaultSpec> mixed(std::uint32_t cycle, const std::vector<std::uint32_t> &in) {
        std::vector<std::pair<Family, double>> fams;
        double total = 0;
        for (Family f : kSingleFamilies) {
            fams.push_back({f, prof_.weight(f)});
            total += prof_.weight(f);
        }
        // A mixed-only profile pairs single effects uniformly.
        if (total <= 0)
            for (auto &[f, w] : fams)
                w = 1.0;
        Family f1{};
        auto s1 = draw(fams, cycle, in, &f1);
        if (!s1)
            return std::nullopt;
        for (auto &[f, w] : fams)
            if (f == f1)
                w = 0;
        const std::int64_t half = tt_.window_depth / 2;
        std::int64_t c2 = static_cast<std::int64_t>(cycle) + static_cast<std::int64_t>(rng_.below(2 * half + 1)) - half;
        c2 = std::clamp<std::int64_t>(c2, 0, tt_.total_cycles - 1);
        auto in2 = targets(static_cast<std::uint32_t>(c2));
        auto s2 = in2.empty() ? std::nullopt : draw(fams, static_cast<std::uint32_t>(c2), in2);
        if (!s2 || s2->target == s1->target)
            return s1;
        return FaultSpec::mixed(cycle, {*s1, *s2});
    }

  private:
    const EffectProfile &prof_;
    const Program &p_;
    const TimedTrace &tt_;
    Rng &rng_;
};

}  // namespace

Sample sample_fault(const EffectProfile &profile, const Program &program, const TimedTrace &tt,
                    std::uint32_t cycle, Rng &rng) {
    if (cycle >= tt.total_cycles)
        throw FaultError("cycle " + std::to_string(cycle) + " outside the trace");
    if (rng.chance(profile.mute_probability))
        return Mute{};
    Sampler s(profile, program, tt, rng);
    auto in = s.targets(cycle);
    if (in.empty())
        return NoEffect{};
    std::vector<std::pair<Family, double>> fams;
    for (Family f : kAllFamilies)
        fams.push_back({f, profile.weight(f)});
    auto spec = s.draw(std::move(fams), cycle, in);
    if (!spec)
        return NoEffect{};
    return *spec;
}

}  // namespace faultforge

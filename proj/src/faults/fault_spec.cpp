#include <algorithm>
#include <sstream>

#include "faultforge/faults.hpp"

namespace faultforge {

using nlohmann::json;

namespace {

struct FamilyName {
    Family f;
    std::string_view name;
};

constexpr FamilyName kFamilyNames[] = {
    {Family::Skip, "skip"},
    {Family::Replay, "replay"},
    {Family::RegisterCorruption, "register-corruption"},
    {Family::MshwReset, "mshw-reset"},
    {Family::OperandSubstitution, "operand-substitution"},
    {Family::LoadCorruption, "load-corruption"},
    {Family::MagicEdge, "magic-edge"},
    {Family::Composite, "composite"},
    {Family::Mixed, "mixed"},
};

json operand_json(const Operand &o) {
    if (o.is_reg)
        return {{"reg", o.reg}};
    return {{"imm", o.imm}};
}

Operand operand_from(const json &j) {
    if (j.contains("reg"))
        return Operand::make_reg(j.at("reg").get<Reg>());
    return Operand::make_imm(j.at("imm").get<std::int32_t>());
}

}  // namespace

std::string_view family_name(Family f) {
    for (const auto &n : kFamilyNames)
        if (n.f == f)
            return n.name;
    return "?";
}

Family family_from_name(std::string_view name) {
    for (const auto &n : kFamilyNames)
        if (n.name == name)
            return n.f;
    throw std::invalid_argument("unknown fault family '" + std::string(name) + "'");
}

std::string_view composite_kind_name(CompositeKind k) {
    switch (k) {
    case CompositeKind::None: return "none";
    case CompositeKind::SkipReplay: return "skip-replay";
    case CompositeKind::CorrelatedCorruption: return "correlated-corruption";
    case CompositeKind::Repeated: return "repeated";
    }
    return "?";
}

CompositeKind composite_kind_from_name(std::string_view name) {
    for (auto k : {CompositeKind::None, CompositeKind::SkipReplay, CompositeKind::CorrelatedCorruption,
                   CompositeKind::Repeated})
        if (composite_kind_name(k) == name)
            return k;
    throw std::invalid_argument("unknown composite kind '" + std::string(name) + "'");
}

std::string_view origin_name(ValueOrigin o) {
    switch (o) {
    case ValueOrigin::BitFlip: return "bit-flip";
    case ValueOrigin::Uncorrelated: return "uncorrelated";
    case ValueOrigin::OtherRegion: return "other-region";
    }
    return "?";
}

ValueOrigin origin_from_name(std::string_view name) {
    for (auto o : {ValueOrigin::BitFlip, ValueOrigin::Uncorrelated, ValueOrigin::OtherRegion})
        if (origin_name(o) == name)
            return o;
    throw std::invalid_argument("unknown value origin '" + std::string(name) + "'");
}

std::vector<FaultSpec> FaultSpec::leaves() const {
    std::vector<FaultSpec> out;
    if (is_single()) {
        out.push_back(*this);
        return out;
    }
    for (const auto &s : subs) {
        auto sub = s.leaves();
        out.insert(out.end(), sub.begin(), sub.end());
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const FaultSpec &a, const FaultSpec &b) { return a.target < b.target; });
    return out;
}

std::string FaultSpec::describe() const {
    std::ostringstream os;
    os << family_name(family);
    switch (family) {
    case Family::Skip: os << " @" << target; break;
    case Family::Replay: os << " s" << replayed_static << " after @" << target; break;
    case Family::RegisterCorruption:
        os << " r" << int(reg) << " after @" << target << " " << origin_name(origin);
        if (origin == ValueOrigin::BitFlip)
            os << " mask 0x" << std::hex << mask << std::dec;
        else
            os << " value 0x" << std::hex << value << std::dec;
        break;
    case Family::MshwReset: os << " r" << int(reg) << " after @" << target; break;
    case Family::OperandSubstitution:
        os << " @" << target << " " << slot_name(slot) << "<-";
        if (operand.is_reg)
            os << "r" << int(operand.reg);
        else
            os << "#" << operand.imm;
        break;
    case Family::LoadCorruption: os << " @" << target << " " << origin_name(origin); break;
    case Family::MagicEdge: os << " @" << target << " -> block " << block; break;
    case Family::Composite:
    case Family::Mixed:
        if (family == Family::Composite) {
            os << "(" << composite_kind_name(kind);
            if (kind == CompositeKind::Repeated)
                os << " " << family_name(base);
            os << ")";
        }
        os << " {";
        for (std::size_t i = 0; i < subs.size(); ++i)
            os << (i ? "; " : "") << subs[i].describe();
        os << "}";
        break;
    }
    return os.str();
}

FaultSpec FaultSpec::skip(std::uint32_t cycle, std::uint32_t target, std::uint32_t st) {
    FaultSpec s;
    s.family = Family::Skip;
    s.cycle = cycle;
    s.target = target;
    s.target_static = st;
    return s;
}

FaultSpec FaultSpec::replay(std::uint32_t cycle, std::uint32_t after, std::uint32_t after_static,
                            std::uint32_t replayed, std::uint32_t replayed_static) {
    FaultSpec s = skip(cycle, after, after_static);
    s.family = Family::Replay;
    s.replayed = replayed;
    s.replayed_static = replayed_static;
    return s;
}

FaultSpec FaultSpec::register_flip(std::uint32_t cycle, std::uint32_t after, std::uint32_t after_static, Reg r,
                                   Word mask) {
    FaultSpec s = skip(cycle, after, after_static);
    s.family = Family::RegisterCorruption;
    s.reg = r;
    s.origin = ValueOrigin::BitFlip;
    s.source = r;
    s.mask = mask;
    return s;
}

FaultSpec FaultSpec::register_set(std::uint32_t cycle, std::uint32_t after, std::uint32_t after_static, Reg r,
                                  Word value) {
    FaultSpec s = skip(cycle, after, after_static);
    s.family = Family::RegisterCorruption;
    s.reg = r;
    s.origin = ValueOrigin::Uncorrelated;
    s.value = value;
    return s;
}

FaultSpec FaultSpec::mshw(std::uint32_t cycle, std::uint32_t after, std::uint32_t after_static, Reg r) {
    FaultSpec s = skip(cycle, after, after_static);
    s.family = Family::MshwReset;
    s.reg = r;
    return s;
}

FaultSpec FaultSpec::substitute(std::uint32_t cycle, std::uint32_t target, std::uint32_t st, Slot slot,
                                Operand op) {
    FaultSpec s = skip(cycle, target, st);
    s.family = Family::OperandSubstitution;
    s.slot = slot;
    s.operand = op;
    return s;
}

FaultSpec FaultSpec::load_value(std::uint32_t cycle, std::uint32_t target, std::uint32_t st, Word value) {
    FaultSpec s = skip(cycle, target, st);
    s.family = Family::LoadCorruption;
    s.origin = ValueOrigin::Uncorrelated;
    s.value = value;
    return s;
}

FaultSpec FaultSpec::load_flip(std::uint32_t cycle, std::uint32_t target, std::uint32_t st, Reg source,
                               Word mask) {
    FaultSpec s = skip(cycle, target, st);
    s.family = Family::LoadCorruption;
    s.origin = ValueOrigin::BitFlip;
    s.source = source;
    s.mask = mask;
    return s;
}

FaultSpec FaultSpec::load_other(std::uint32_t cycle, std::uint32_t target, std::uint32_t st, Word address) {
    FaultSpec s = skip(cycle, target, st);
    s.family = Family::LoadCorruption;
    s.origin = ValueOrigin::OtherRegion;
    s.address = address;
    return s;
}

FaultSpec FaultSpec::magic_edge(std::uint32_t cycle, std::uint32_t end, std::uint32_t end_static,
                                std::uint32_t block) {
    FaultSpec s = skip(cycle, end, end_static);
    s.family = Family::MagicEdge;
    s.block = block;
    return s;
}

FaultSpec FaultSpec::composite(CompositeKind kind, std::uint32_t cycle, std::vector<FaultSpec> subs, Family base) {
    FaultSpec s;
    s.family = Family::Composite;
    s.kind = kind;
    s.cycle = cycle;
    s.base = kind == CompositeKind::Repeated ? base : Family::Skip;
    s.subs = std::move(subs);
    if (!s.subs.empty()) {
        auto first = std::min_element(s.subs.begin(), s.subs.end(),
                                      [](const FaultSpec &a, const FaultSpec &b) { return a.target < b.target; });
        s.target = first->target;
        s.target_static = first->target_static;
    }
    return s;
}

FaultSpec FaultSpec::mixed(std::uint32_t cycle, std::vector<FaultSpec> subs) {
    FaultSpec s = composite(CompositeKind::None, cycle, std::move(subs));
    s.family = Family::Mixed;
    return s;
}

json to_json(const FaultSpec &s) {
    json j;
    j["family"] = family_name(s.family);
    j["cycle"] = s.cycle;
    if (s.family == Family::Composite || s.family == Family::Mixed) {
        if (s.family == Family::Composite) {
            j["kind"] = composite_kind_name(s.kind);
            if (s.kind == CompositeKind::Repeated)
                j["base"] = family_name(s.base);
        }
        json subs = json::array();
        for (const auto &sub : s.subs)
            subs.push_back(to_json(sub));
        j["subs"] = std::move(subs);
        return j;
    }
    j["target"] = s.target;
    j["target_static"] = s.target_static;
    auto value_fields = [&] {
        j["origin"] = origin_name(s.origin);
        switch (s.origin) {
        case ValueOrigin::BitFlip:
            j["source"] = s.source;
            j["mask"] = s.mask;
            break;
        case ValueOrigin::Uncorrelated: j["value"] = s.value; break;
        case ValueOrigin::OtherRegion: j["address"] = s.address; break;
        }
    };
    switch (s.family) {
    case Family::Replay:
        j["replayed"] = s.replayed;
        j["replayed_static"] = s.replayed_static;
        break;
    case Family::RegisterCorruption:
        j["reg"] = s.reg;
        value_fields();
        break;
    case Family::MshwReset: j["reg"] = s.reg; break;
    case Family::OperandSubstitution:
        j["slot"] = slot_name(s.slot);
        j["operand"] = operand_json(s.operand);
        break;
    case Family::LoadCorruption: value_fields(); break;
    case Family::MagicEdge: j["block"] = s.block; break;
    default: break;
    }
    return j;
}

FaultSpec fault_spec_from_json(const json &j) {
    FaultSpec s;
    s.family = family_from_name(j.at("family").get<std::string>());
    s.cycle = j.at("cycle").get<std::uint32_t>();
    if (s.family == Family::Composite || s.family == Family::Mixed) {
        std::vector<FaultSpec> subs;
        for (const auto &sub : j.at("subs"))
            subs.push_back(fault_spec_from_json(sub));
        if (s.family == Family::Mixed)
            return FaultSpec::mixed(s.cycle, std::move(subs));
        auto kind = composite_kind_from_name(j.at("kind").get<std::string>());
        Family base = j.contains("base") ? family_from_name(j.at("base").get<std::string>()) : Family::Skip;
        return FaultSpec::composite(kind, s.cycle, std::move(subs), base);
    }
    s.target = j.at("target").get<std::uint32_t>();
    s.target_static = j.at("target_static").get<std::uint32_t>();
    auto value_fields = [&] {
        s.origin = origin_from_name(j.at("origin").get<std::string>());
        switch (s.origin) {
        case ValueOrigin::BitFlip:
            s.source = j.at("source").get<Reg>();
            s.mask = j.at("mask").get<Word>();
            break;
        case ValueOrigin::Uncorrelated: s.value = j.at("value").get<Word>(); break;
        case ValueOrigin::OtherRegion: s.address = j.at("address").get<Word>(); break;
        }
    };
    switch (s.family) {
    case Family::Replay:
        s.replayed = j.at("replayed").get<std::uint32_t>();
        s.replayed_static = j.at("replayed_static").get<std::uint32_t>();
        break;
    case Family::RegisterCorruption:
        s.reg = j.at("reg").get<Reg>();
        value_fields();
        break;
    case Family::MshwReset: s.reg = j.at("reg").get<Reg>(); break;
    case Family::OperandSubstitution:
        s.slot = slot_from_name(j.at("slot").get<std::string>());
        s.operand = operand_from(j.at("operand"));
        break;
    case Family::LoadCorruption: value_fields(); break;
    case Family::MagicEdge: s.block = j.at("block").get<std::uint32_t>(); break;
    default: break;
    }
    return s;
}

}  // namespace faultforge

#include "faultforge/isa.hpp"

namespace faultforge {

using nlohmann::json;

json program_to_json(const Program &p) {
    json code = json::array();
    for (const auto &in : p.code) {
        json j;
        j["op"] = opcode_name(in.op);
        if (in.dest != kNoReg)
            j["dest"] = in.dest;
        if (in.src1 != kNoReg)
            j["src1"] = in.src1;
        if (in.src2 != kNoReg)
            j["src2"] = in.src2;
        if (in.imm)
            j["imm"] = *in.imm;
        if (!in.label.empty())
            j["label"] = in.label;
        code.push_back(std::move(j));
    }
    json regions = json::array();
    for (const auto &r : p.regions)
        regions.push_back({{"name", r.name}, {"base", r.base}, {"length", r.length}, {"init", r.init}});
    json init = json::array();
    for (unsigned r = 0; r < kPcReg; ++r)
        init.push_back(p.init_regs[r]);
    return {{"schema", 1}, {"init_regs", init}, {"regions", regions}, {"labels", p.labels}, {"code", code}};
}

Program program_from_json(const json &j) {
    if (j.value("schema", 0) != 1)
        throw std::invalid_argument("unsupported program schema");
    ProgramBuilder b;
    const auto &init = j.at("init_regs");
    for (unsigned r = 0; r < init.size() && r < kPcReg; ++r)
        b.init(static_cast<Reg>(r), init[r].get<Word>());
    for (const auto &r : j.at("regions"))
        b.region(Region{r.at("name").get<std::string>(), r.at("base").get<Word>(), r.at("length").get<Word>(),
                        r.at("init").get<std::vector<Word>>()});
    std::multimap<std::uint32_t, std::string> labels;
    for (const auto &[name, idx] : j.at("labels").items())
        labels.emplace(idx.get<std::uint32_t>(), name);
    const auto &code = j.at("code");
    auto place_labels = [&](std::uint32_t idx) {
        auto [lo, hi] = labels.equal_range(idx);
        for (auto it = lo; it != hi; ++it)
            b.label(it->second);
    };
    for (std::uint32_t i = 0; i < code.size(); ++i) {
        place_labels(i);
        const auto &c = code[i];
        Instruction in;
        auto op = opcode_from_name(c.at("op").get<std::string>());
        if (!op)
            throw std::invalid_argument("unknown opcode '" + c.at("op").get<std::string>() + "'");
        in.op = *op;
        auto reg = [&](const char *key) -> Reg {
            if (!c.contains(key))
                return kNoReg;
            auto v = c.at(key).get<unsigned>();
            if (v >= kNumRegs)
                throw std::invalid_argument("register out of range");
            return static_cast<Reg>(v);
        };
        in.dest = reg("dest");
        in.src1 = reg("src1");
        in.src2 = reg("src2");
        if (c.contains("imm"))
            in.imm = c.at("imm").get<std::int32_t>();
        in.label = c.value("label", std::string());
        b.emit(std::move(in));
    }
    place_labels(static_cast<std::uint32_t>(code.size()));
    return b.build();
}

}  // namespace faultforge

#include <algorithm>
#include <set>
#include <unordered_map>

#include "faultforge/microarch.hpp"
#include "faultforge/rng.hpp"

namespace faultforge {

void TimingConfig::validate() const {
    if (issue_width < 1)
        throw std::invalid_argument("issue_width must be >= 1");
    if (window_depth < 1)
        throw std::invalid_argument("window_depth must be >= 1");
    if (reorder_slack < 1)
        throw std::invalid_argument("reorder_slack must be >= 1");
}

nlohmann::json TimingConfig::to_json() const {
    return {{"issue_width", issue_width},
            {"window_depth", window_depth},
            {"reorder_slack", reorder_slack},
            {"ldr_jitter", ldr_jitter}};
}

TimingConfig TimingConfig::from_json(const nlohmann::json &j) {
    TimingConfig c;
    c.issue_width = j.value("issue_width", c.issue_width);
    c.window_depth = j.value("window_depth", c.window_depth);
    c.reorder_slack = j.value("reorder_slack", 2 * c.window_depth);
    c.ldr_jitter = j.value("ldr_jitter", c.ldr_jitter);
    c.validate();
    return c;
}

TimedTrace schedule(const Program &program, const std::vector<TraceEntry> &trace, const TimingConfig &cfg,
                    std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    TimedTrace tt;
    tt.window_depth = cfg.window_depth;
    const std::size_t n = trace.size();
    tt.issue.resize(n);
    tt.static_index.resize(n);
    tt.mem_addr.resize(n);

    std::vector<unsigned> used;  // instructions issued per cycle
    std::array<std::uint32_t, kNumRegs> reg_ready{};
    std::uint32_t flags_ready = 0;
    std::unordered_map<Word, std::uint32_t> mem_ready;
    std::uint32_t barrier = 0;  // first cycle after the latest branch
    std::uint32_t floor = 0;    // max issue of instructions at least `slack` older

    for (std::size_t i = 0; i < n; ++i) {
        const auto &te = trace[i];
        const Instruction &in = program.code.at(te.static_index);
        tt.static_index[i] = te.static_index;
        tt.mem_addr[i] = te.mem_read || te.mem_write ? te.addr : 0;
        if (i >= cfg.reorder_slack)
            floor = std::max(floor, tt.issue[i - cfg.reorder_slack]);

        std::uint32_t c = std::max(barrier, floor);
        for (Reg r : in.reads())
            if (r != kNoReg && r != kPcReg)
                c = std::max(c, reg_ready[r]);
        if (is_cond_branch(in.op))
            c = std::max(c, flags_ready);
        if (te.mem_read) {
            auto it = mem_ready.find(te.addr);
            if (it != mem_ready.end())
                c = std::max(c, it->second);
        }
        if (cfg.ldr_jitter && in.op == Opcode::Ldr)
            c += static_cast<std::uint32_t>(rng.next() & 1);
        while (c < used.size() && used[c] >= cfg.issue_width)
            ++c;
        if (c >= used.size())
            used.resize(c + 1, 0);
        ++used[c];
        tt.issue[i] = c;

        if (te.dest != kNoReg)
            reg_ready[te.dest] = c + 1;
        if (is_compare(in.op))
            flags_ready = c + 1;
        if (te.mem_write)
            mem_ready[te.addr] = c + 1;
        if (is_branch(in.op) || in.op == Opcode::Halt)
            barrier = c + 1;
    }

    std::uint32_t last = 0;
    for (auto c : tt.issue)
        last = std::max(last, c);
    tt.total_cycles = n == 0 ? 0 : last + cfg.window_depth;
    tt.by_issue.assign(n == 0 ? 0 : last + 1, {});
    for (std::size_t i = 0; i < n; ++i)
        tt.by_issue[tt.issue[i]].push_back(static_cast<std::uint32_t>(i));
    return tt;
}

std::vector<std::uint32_t> inflight_at(const TimedTrace &tt, std::uint32_t cycle) {
    if (cycle >= tt.total_cycles)
        throw std::out_of_range("cycle " + std::to_string(cycle) + " outside trace of " +
                                std::to_string(tt.total_cycles) + " cycles");
    return inflight_between(tt, cycle, cycle);
}

std::vector<std::uint32_t> inflight_between(const TimedTrace &tt, std::int64_t lo, std::int64_t hi) {
    std::vector<std::uint32_t> out;
    if (tt.by_issue.empty())
        return out;
    std::int64_t first = std::max<std::int64_t>(0, lo - static_cast<std::int64_t>(tt.window_depth) + 1);
    std::int64_t last = std::min<std::int64_t>(hi, static_cast<std::int64_t>(tt.by_issue.size()) - 1);
    for (std::int64_t c = first; c <= last; ++c)
        out.insert(out.end(), tt.by_issue[c].begin(), tt.by_issue[c].end());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Operand> OperandPool::all() const {
    std::vector<Operand> out;
    for (Reg r : regs)
        out.push_back(Operand::make_reg(r));
    for (auto v : imms)
        out.push_back(Operand::make_imm(v));
    return out;
}

OperandPool operand_pool(std::span<const Instruction> instructions) {
    std::set<Reg> regs;
    std::set<std::int32_t> imms;
    for (const auto &in : instructions) {
        if (is_branch(in.op))
            continue;
        for (Reg r : {in.src1, in.src2, in.dest})
            if (r != kNoReg && r != kPcReg)
                regs.insert(r);
        if (in.imm)
            imms.insert(*in.imm);
    }
    return {{regs.begin(), regs.end()}, {imms.begin(), imms.end()}};
}

OperandPool operand_pool(const Program &program, const TimedTrace &tt, std::span<const std::uint32_t> inflight) {
    std::vector<Instruction> ins;
    ins.reserve(inflight.size());
    for (auto d : inflight)
        ins.push_back(program.code.at(tt.static_index.at(d)));
    return operand_pool(ins);
}

}  // namespace faultforge

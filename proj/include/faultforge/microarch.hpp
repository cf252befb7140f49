#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "faultforge/isa.hpp"

namespace faultforge {

struct TimingConfig {
    unsigned issue_width = 2;
    unsigned window_depth = 8;
    unsigned reorder_slack = 16;
    bool ldr_jitter = false;

    bool operator==(const TimingConfig &) const = default;

    void validate() const;
    nlohmann::json to_json() const;
    static TimingConfig from_json(const nlohmann::json &j);
};

struct TimedTrace {
    std::vector<std::uint32_t> issue;
    std::vector<std::uint32_t> static_index;
    std::vector<Word> mem_addr;  // address touched by LDR/STR, 0 otherwise
    unsigned window_depth = 8;
    std::uint32_t total_cycles = 0;
    // Dynamic indices grouped by issue cycle.
    std::vector<std::vector<std::uint32_t>> by_issue;

    std::size_t size() const { return issue.size(); }
    std::uint32_t retire(std::size_t i) const { return issue[i] + window_depth - 1; }
};

TimedTrace schedule(const Program &program, const std::vector<TraceEntry> &trace, const TimingConfig &cfg,
                    std::uint64_t seed);

// Sorted dynamic indices with issue <= cycle <= retire.
std::vector<std::uint32_t> inflight_at(const TimedTrace &tt, std::uint32_t cycle);

// Union of in-flight sets over [lo, hi], clamped to the trace.
std::vector<std::uint32_t> inflight_between(const TimedTrace &tt, std::int64_t lo, std::int64_t hi);

struct Operand {
    bool is_reg = true;
    Reg reg = kNoReg;
    std::int32_t imm = 0;

    bool operator==(const Operand &) const = default;
    auto operator<=>(const Operand &) const = default;

    static Operand make_reg(Reg r) { return {true, r, 0}; }
    static Operand make_imm(std::int32_t v) { return {false, kNoReg, v}; }
};

struct OperandPool {
    std::vector<Reg> regs;
    std::vector<std::int32_t> imms;

    bool empty() const { return regs.empty() && imms.empty(); }
    std::vector<Operand> all() const;
};

OperandPool operand_pool(const Program &program, const TimedTrace &tt, std::span<const std::uint32_t> inflight);
OperandPool operand_pool(std::span<const Instruction> instructions);

}  // namespace faultforge

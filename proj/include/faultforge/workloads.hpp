#pragma once

#include <optional>
#include <string>
#include <vector>

#include "faultforge/isa.hpp"

namespace faultforge {

struct LoopMeta {
    std::string head_label = "loop";
    std::string expected_exit = "exit";
    std::vector<std::string> exit_labels;  // every label that terminates the loop
    std::uint32_t expected_iterations = 0;
    // Static indices computing the exit conditions, and the exit branches.
    std::vector<std::uint32_t> slice;
    std::vector<std::uint32_t> exit_branches;
};

struct Workload {
    std::string id;
    Program program;
    OutputBuffer reference;
    std::uint64_t reference_steps = 0;
    std::optional<LoopMeta> loop;
    std::uint32_t n = 0;
    std::vector<Reg> payload_regs;
    std::vector<std::int32_t> constants;
    // Output-buffer word holding the detection flag, for hardened code.
    std::optional<std::size_t> detect_word;

    std::uint64_t budget() const { return 4 * reference_steps + 1000; }
};

inline constexpr Word kDetectSentinel = 0xDEAD0001u;
inline constexpr Word kRegionBase = 0x1000;

Word initial_register(Reg r);
Word initial_word(std::size_t region, std::size_t k);

// Applies the register/memory initialization convention, runs the program and fills the reference.
Workload finish_workload(std::string id, Program program);

Workload gen_nop_seq(std::uint32_t n);
Workload gen_single_counter(Reg reg, std::uint32_t n);
Workload gen_multi_counter(std::uint32_t k_regs, std::uint32_t spacing, std::uint32_t rounds = 4);
Workload gen_loop1(std::uint32_t n, std::optional<std::vector<Word>> src = std::nullopt,
                   std::optional<std::vector<Word>> dst = std::nullopt);
Workload gen_loop2(std::uint32_t n, std::optional<std::vector<Word>> src1 = std::nullopt,
                   std::optional<std::vector<Word>> src2 = std::nullopt);

inline constexpr std::int32_t kPrimes[10] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};

struct Judgement {
    bool reference_equal = false;
    std::optional<std::uint32_t> iterations;
    std::optional<std::string> exit_label;
    bool iterations_ok = true;
    bool exit_ok = true;

    bool harmful() const { return !reference_equal && !(iterations_ok && exit_ok); }
};

Judgement judge(const Workload &w, const RunResult &result);

struct WorkloadParams {
    std::uint32_t n = 0;  // 0 selects the per-workload default
    std::uint32_t spacing = 0;
    std::uint32_t k_regs = 10;
    Reg reg = 0;
};

// Baseline generators by id: nop, single, multi, loop1, loop2.
Workload make_baseline(const std::string &id, const WorkloadParams &params = {});

}  // namespace faultforge

#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "faultforge/faults.hpp"
#include "faultforge/workloads.hpp"

namespace faultforge {

enum class Scheme { LoopDup, Swift, Stacked };

std::string_view scheme_name(Scheme s);
Scheme scheme_from_name(std::string_view name);

inline constexpr const char *kDetectLabel = "__detect";

class HardenError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct HardenedProgram {
    Program program;
    Scheme scheme = Scheme::LoopDup;
    std::uint32_t detect_handler = 0;  // block id
    std::map<Reg, Reg> shadow_map;
    std::map<Reg, Word> spilled;  // shadows kept in the "shadow" region, by address
    std::map<std::uint32_t, Word> signatures;  // block id -> static signature
    std::set<Reg> computation_regs;
    // Static indices of exit-slice instructions (originals, shadows and checks).
    std::vector<std::uint32_t> slice;
    std::string baseline_id;
    std::size_t baseline_size = 0;

    double size_ratio() const { return static_cast<double>(program.size()) / static_cast<double>(baseline_size); }
    // Output-buffer index of the detection word.
    std::size_t detect_word() const;
};

HardenedProgram harden_loop(const Workload &w);
HardenedProgram harden_swift(const Workload &w);
HardenedProgram harden_stacked(const Workload &w);
HardenedProgram harden(const Workload &w, Scheme s);

// Campaign-ready view of a hardened program, judged with the baseline's loop meta.
Workload hardened_workload(const HardenedProgram &hp, const Workload &baseline);

// Fault-free hardened output restricted to what the baseline produces.
bool preserves_semantics(const Workload &baseline, const Workload &hardened);

enum class DetectionStatus { Detected, Undetected, Masked, Mute };

std::string_view detection_status_name(DetectionStatus s);

struct FamilyDetection {
    std::size_t total = 0;
    std::size_t detected = 0;
    std::size_t undetected = 0;
    std::size_t masked = 0;
    std::size_t mute = 0;
    std::size_t harmful_undetected = 0;
    std::vector<FaultSpec> witnesses;  // undetected, capped
};

struct DetectionReport {
    std::map<Family, FamilyDetection> families;
    const FamilyDetection &at(Family f) const { return families.at(f); }
};

// Exhaustive single-fault sweep. Skip covers the exit slice (every instruction
// when no slice is recorded); RegisterCorruption flips every bit of every live
// computation register after every dynamic instruction; MagicEdge jumps from
// every block end to every illegal block entry (signed blocks only for SWIFT).
DetectionReport verify_detection(const HardenedProgram &hp, const Workload &hardened, const std::set<Family> &families,
                                 std::size_t max_witnesses = 16);

DetectionStatus detection_status(const Workload &hardened, const RunResult &r);

struct WorkloadInfo {
    std::string id;
    std::string description;
};

std::vector<WorkloadInfo> list_workloads();

// Baseline ids plus hardened ids: <base>-sec, <base>-swift, <base>-swift+sec.
Workload make_workload(const std::string &id, const WorkloadParams &params = {});

}  // namespace faultforge

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "faultforge/isa.hpp"
#include "faultforge/microarch.hpp"
#include "faultforge/rng.hpp"

namespace faultforge {

enum class Family : std::uint8_t {
    Skip,
    Replay,
    RegisterCorruption,
    MshwReset,
    OperandSubstitution,
    LoadCorruption,
    MagicEdge,
    Composite,
    Mixed,
};

inline constexpr Family kAllFamilies[] = {
    Family::Skip,           Family::Replay,    Family::RegisterCorruption,
    Family::MshwReset,      Family::OperandSubstitution, Family::LoadCorruption,
    Family::MagicEdge,      Family::Composite, Family::Mixed,
};

inline constexpr Family kSingleFamilies[] = {
    Family::Skip,      Family::Replay,         Family::RegisterCorruption, Family::MshwReset,
    Family::OperandSubstitution, Family::LoadCorruption, Family::MagicEdge,
};

std::string_view family_name(Family f);
Family family_from_name(std::string_view name);

enum class CompositeKind : std::uint8_t { None, SkipReplay, CorrelatedCorruption, Repeated };

std::string_view composite_kind_name(CompositeKind k);
CompositeKind composite_kind_from_name(std::string_view name);

// Where a corrupted value comes from.
enum class ValueOrigin : std::uint8_t {
    BitFlip,       // regs[source] ^ mask, read when the fault fires
    Uncorrelated,  // the recorded absolute value
    OtherRegion,   // the memory word at `address`, read when the fault fires
};

std::string_view origin_name(ValueOrigin o);
ValueOrigin origin_from_name(std::string_view name);

struct FaultSpec {
    Family family = Family::Skip;
    std::uint32_t cycle = 0;
    // Dynamic index the effect is attached to and its expected static index.
    std::uint32_t target = 0;
    std::uint32_t target_static = 0;

    // Replay: static instruction re-executed right after `target`.
    std::uint32_t replayed = 0;
    std::uint32_t replayed_static = 0;

    // RegisterCorruption / MshwReset: register modified right after `target`.
    Reg reg = kNoReg;
    // RegisterCorruption / LoadCorruption value.
    ValueOrigin origin = ValueOrigin::BitFlip;
    Reg source = kNoReg;
    Word mask = 0;
    Word value = 0;
    Word address = 0;

    // OperandSubstitution.
    Slot slot = Slot::Src1;
    Operand operand{};

    // MagicEdge: block whose entry receives control after `target`.
    std::uint32_t block = 0;

    // Composite / Mixed.
    CompositeKind kind = CompositeKind::None;
    Family base = Family::Skip;
    std::vector<FaultSpec> subs;

    bool operator==(const FaultSpec &) const = default;

    bool is_single() const { return family != Family::Composite && family != Family::Mixed; }
    // Leaf effects in site order.
    std::vector<FaultSpec> leaves() const;
    std::string describe() const;

    static FaultSpec skip(std::uint32_t cycle, std::uint32_t target, std::uint32_t target_static);
    static FaultSpec replay(std::uint32_t cycle, std::uint32_t after, std::uint32_t after_static,
                            std::uint32_t replayed, std::uint32_t replayed_static);
    static FaultSpec register_flip(std::uint32_t cycle, std::uint32_t after, std::uint32_t after_static, Reg r,
                                   Word mask);
    static FaultSpec register_set(std::uint32_t cycle, std::uint32_t after, std::uint32_t after_static, Reg r,
                                  Word value);
    static FaultSpec mshw(std::uint32_t cycle, std::uint32_t after, std::uint32_t after_static, Reg r);
    static FaultSpec substitute(std::uint32_t cycle, std::uint32_t target, std::uint32_t target_static, Slot s,
                                Operand op);
    static FaultSpec load_value(std::uint32_t cycle, std::uint32_t target, std::uint32_t target_static,
                                Word value);
    static FaultSpec load_flip(std::uint32_t cycle, std::uint32_t target, std::uint32_t target_static,
                               Reg source, Word mask);
    static FaultSpec load_other(std::uint32_t cycle, std::uint32_t target, std::uint32_t target_static,
                                Word address);
    static FaultSpec magic_edge(std::uint32_t cycle, std::uint32_t end, std::uint32_t end_static,
                                std::uint32_t block);
    static FaultSpec composite(CompositeKind kind, std::uint32_t cycle, std::vector<FaultSpec> subs,
                               Family base = Family::Skip);
    static FaultSpec mixed(std::uint32_t cycle, std::vector<FaultSpec> subs);
};

nlohmann::json to_json(const FaultSpec &s);
FaultSpec fault_spec_from_json(const nlohmann::json &j);

class FaultError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Fault-free reference execution with per-step snapshots, used to replay many
// faults cheaply from the first affected dynamic instruction.
class Reference {
  public:
    Reference(const Program &program, std::uint64_t budget);

    const Program &program() const { return *program_; }
    const RunResult &run() const { return run_; }
    const std::vector<TraceEntry> &trace() const { return run_.trace; }
    const OutputBuffer &output() const { return run_.output; }
    std::uint64_t budget() const { return budget_; }
    // State before dynamic instruction d executes.
    const MachineState &state_before(std::uint32_t d) const { return states_.at(d); }
    std::size_t size() const { return run_.trace.size(); }

  private:
    const Program *program_;
    std::uint64_t budget_;
    RunResult run_;
    std::vector<MachineState> states_;
};

// Checks a FaultSpec against the fault-free schedule; throws FaultError.
void validate_fault(const Program &program, const TimedTrace &tt, const FaultSpec &spec);

RunResult apply_fault(const Program &program, const TimedTrace &tt, const FaultSpec &spec, std::uint64_t budget);

// Runs the fault starting from the reference snapshot. Traces are only
// collected when asked; the output is identical to apply_fault.
RunResult replay_fault(const Reference &ref, const FaultSpec &spec, bool record_trace = false);

// Drops sub-effects of a Composite/Mixed spec whose removal leaves the run unchanged; a single
// survivor is returned on its own.
FaultSpec prune_spec(const Reference &ref, const FaultSpec &spec);

struct EffectProfile {
    std::string name = "custom";
    std::map<Family, double> weights;
    double bitflip_share = 0.5;  // RegisterCorruption: bit flip vs uncorrelated value
    double coupling = 0.75;      // inclusion probability of each target in a repeated effect
    double mute_probability = 0.0;
    // Composite sub-kinds; Repeated weights are keyed by base family.
    double skip_replay = 1.0;
    double correlated = 0.0;
    std::map<Family, double> repeated;

    double weight(Family f) const;
    void normalize();
    void validate() const;

    nlohmann::json to_json() const;
    static EffectProfile from_json(const nlohmann::json &j);
    static EffectProfile named(std::string_view name);
    static EffectProfile only(Family f);
};

EffectProfile paper_em_default();

struct Mute {};
struct NoEffect {};
using Sample = std::variant<FaultSpec, Mute, NoEffect>;

Sample sample_fault(const EffectProfile &profile, const Program &program, const TimedTrace &tt,
                    std::uint32_t cycle, Rng &rng);

// Candidate sets used by both the sampler and the classifier.
bool skippable(const Instruction &in);
bool replayable(const Instruction &in);
// Last dynamic index of the block instance containing d, if it ends inside the trace.
std::optional<std::uint32_t> block_instance_end(const Program &program, const TimedTrace &tt, std::uint32_t d);
std::vector<std::uint32_t> illegal_targets(const Program &program, std::uint32_t from_block);

}  // namespace faultforge

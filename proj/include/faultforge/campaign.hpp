#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "faultforge/faults.hpp"
#include "faultforge/hardening.hpp"
#include "faultforge/microarch.hpp"
#include "faultforge/workloads.hpp"

namespace faultforge {

enum class Outcome { NoFault, Mute, Detected, Successful };

std::string_view outcome_name(Outcome o);
Outcome outcome_from_name(std::string_view name);

enum class SampleKind { Fault, Mute, NoEffect };

std::string_view sample_kind_name(SampleKind k);
SampleKind sample_kind_from_name(std::string_view name);

struct InjectionRecord {
    std::uint32_t cycle = 0;
    std::uint32_t run = 0;
    std::uint64_t seed = 0;
    SampleKind sample = SampleKind::NoEffect;
    std::optional<FaultSpec> spec;
    // `spec` without the sub-effects that leave the run unchanged, when that differs.
    std::optional<FaultSpec> effective;
    Outcome outcome = Outcome::NoFault;
    bool harmful = false;  // meaningful for Successful only
    Termination termination = Termination::Halted;
    std::optional<OutputBuffer> buffer;  // absent for Mute

    bool operator==(const InjectionRecord &) const = default;

    const FaultSpec &effective_spec() const { return effective ? *effective : spec.value(); }
};

struct CampaignConfig {
    EffectProfile profile = paper_em_default();
    std::optional<std::uint32_t> cycle_lo, cycle_hi;  // inclusive; defaults to the whole trace
    std::uint32_t step = 1;
    std::uint32_t runs_per_cycle = 1;
    std::uint64_t seed = 1;
    TimingConfig timing{};
    unsigned threads = 0;
};

struct OutcomeSummary {
    std::size_t total = 0;
    std::size_t no_fault = 0;
    std::size_t mute = 0;
    std::size_t detected = 0;
    std::size_t successful = 0;
    std::size_t harmful = 0;
    std::size_t harmless = 0;

    bool operator==(const OutcomeSummary &) const = default;
};

struct CampaignResult {
    std::string workload_id;
    WorkloadParams params;
    CampaignConfig config;
    std::uint32_t cycle_lo = 0, cycle_hi = 0;
    std::vector<InjectionRecord> records;
    OutcomeSummary summary;
};

// Outcome of one faulted run against the workload reference.
Outcome classify_outcome(const Workload &w, const RunResult &r, bool *harmful = nullptr);

CampaignResult run_campaign(const Workload &w, const CampaignConfig &cfg, const WorkloadParams &params = {});

OutcomeSummary tally(const std::vector<InjectionRecord> &records);

// Percentages rounded to 0.1.
double percent(std::size_t part, std::size_t whole);

struct OutcomeRow {
    std::string name;
    std::size_t count = 0;
    double pct = 0;
};

struct OutcomeTable {
    std::vector<OutcomeRow> outcomes;    // no-fault, mute, successful, detected (share of all records)
    std::vector<OutcomeRow> successful;  // harmful, harmless (share of successful)
};

OutcomeTable group_outcomes(const OutcomeSummary &s);
OutcomeTable group_outcomes(const CampaignResult &cr);

nlohmann::json to_json(const WorkloadParams &p);
WorkloadParams workload_params_from_json(const nlohmann::json &j);
nlohmann::json to_json(const InjectionRecord &r);
InjectionRecord record_from_json(const nlohmann::json &j);
nlohmann::json to_json(const CampaignResult &cr);
CampaignResult campaign_from_json(const nlohmann::json &j);

}  // namespace faultforge

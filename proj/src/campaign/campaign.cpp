#include "faultforge/campaign.hpp"

#include <cmath>

#include "faultforge/parallel.hpp"
#include "faultforge/rng.hpp"

namespace faultforge {

using nlohmann::json;

std::string_view outcome_name(Outcome o) {
    switch (o) {
    case Outcome::NoFault: return "no-fault";
    case Outcome::Mute: return "mute";
    case Outcome::Detected: return "detected";
    case Outcome::Successful: return "successful";
    }
    return "?";
}

Outcome outcome_from_name(std::string_view name) {
    for (Outcome o : {Outcome::NoFault, Outcome::Mute, Outcome::Detected, Outcome::Successful})
        if (outcome_name(o) == name)
            return o;
    throw std::invalid_argument("unknown outcome '" + std::string(name) + "'");
}

std::string_view sample_kind_name(SampleKind k) {
    switch (k) {
    case SampleKind::Fault: return "fault";
    case SampleKind::Mute: return "mute";
    case SampleKind::NoEffect: return "no-effect";
    }
    return "?";
}

SampleKind sample_kind_from_name(std::string_view name) {
    for (SampleKind k : {SampleKind::Fault, SampleKind::Mute, SampleKind::NoEffect})
        if (sample_kind_name(k) == name)
            return k;
    throw std::invalid_argument("unknown sample kind '" + std::string(name) + "'");
}

namespace {

Termination termination_from_name(std::string_view name) {
    for (Termination t : {Termination::Halted, Termination::Trapped, Termination::BudgetExceeded})
        if (termination_name(t) == name)
            return t;
    throw std::invalid_argument("unknown termination '" + std::string(name) + "'");
}

}  // namespace

Outcome classify_outcome(const Workload &w, const RunResult &r, bool *harmful) {
    if (harmful)
        *harmful = false;
    if (r.termination != Termination::Halted)
        return Outcome::Mute;
    if (r.output == w.reference)
        return Outcome::NoFault;
    if (w.detect_word && r.output.words.at(*w.detect_word) == kDetectSentinel)
        return Outcome::Detected;
    if (harmful)
        *harmful = judge(w, r).harmful();
    return Outcome::Successful;
}

CampaignResult run_campaign(const Workload &w, const CampaignConfig &cfg, const WorkloadParams &params) {
    EffectProfile profile = cfg.profile;
    profile.normalize();
    profile.validate();
    if (cfg.step == 0)
        throw std::invalid_argument("campaign step must be positive");
    if (cfg.runs_per_cycle == 0)
        throw std::invalid_argument("campaign needs at least one run per cycle");

    Reference ref(w.program, w.budget());
    if (ref.run().termination != Termination::Halted)
        throw std::runtime_error("workload '" + w.id + "' does not halt within its budget");
    const TimedTrace tt = schedule(w.program, ref.trace(), cfg.timing, cfg.seed);

    CampaignResult cr;
    cr.workload_id = w.id;
    cr.params = params;
    cr.config = cfg;
    cr.config.profile = profile;
    cr.cycle_lo = cfg.cycle_lo.value_or(0);
    cr.cycle_hi = cfg.cycle_hi.value_or(tt.total_cycles - 1);
    if (cr.cycle_lo > cr.cycle_hi)
        throw std::invalid_argument("empty cycle range");
    if (cr.cycle_hi >= tt.total_cycles)
        throw std::invalid_argument("cycle range exceeds the trace (" + std::to_string(tt.total_cycles) + " cycles)");

    for (std::uint64_t c = cr.cycle_lo; c <= cr.cycle_hi; c += cfg.step)
        for (std::uint32_t k = 0; k < cfg.runs_per_cycle; ++k) {
            InjectionRecord r;
            r.cycle = static_cast<std::uint32_t>(c);
            r.run = k;
            r.seed = derive_seed(cfg.seed, c, k);
            cr.records.push_back(r);
        }

    parallel_for(cr.records.size(), thread_count(cfg.threads), [&](std::size_t i) {
        InjectionRecord &rec = cr.records[i];
        Rng rng(rec.seed);
        Sample s = sample_fault(profile, w.program, tt, rec.cycle, rng);
        if (std::holds_alternative<Mute>(s)) {
            rec.sample = SampleKind::Mute;
            rec.outcome = Outcome::Mute;
            return;
        }
        if (std::holds_alternative<NoEffect>(s)) {
            rec.sample = SampleKind::NoEffect;
            rec.outcome = Outcome::NoFault;
            rec.buffer = w.reference;
            return;
        }
        rec.sample = SampleKind::Fault;
        rec.spec = std::get<FaultSpec>(s);
        RunResult run = replay_fault(ref, *rec.spec, false);
        rec.termination = run.termination;
        rec.outcome = classify_outcome(w, run);
        if (rec.outcome == Outcome::Successful && w.loop) {
            run = replay_fault(ref, *rec.spec, true);
            classify_outcome(w, run, &rec.harmful);
        }
        if (rec.outcome != Outcome::Mute)
            rec.buffer = std::move(run.output);
        if (FaultSpec e = prune_spec(ref, *rec.spec); e != *rec.spec)
            rec.effective = std::move(e);
    });
    cr.summary = tally(cr.records);
    return cr;
}

OutcomeSummary tally(const std::vector<InjectionRecord> &records) {
    OutcomeSummary s;
    for (const auto &r : records) {
        ++s.total;
        switch (r.outcome) {
        case Outcome::NoFault: ++s.no_fault; break;
        case Outcome::Mute: ++s.mute; break;
        case Outcome::Detected: ++s.detected; break;
        case Outcome::Successful:
            ++s.successful;
            ++(r.harmful ? s.harmful : s.harmless);
            break;
        }
    }
    return s;
}

double percent(std::size_t part, std::size_t whole) {
    if (whole == 0)
        return 0.0;
    return std::round(1000.0 * static_cast<double>(part) / static_cast<double>(whole)) / 10.0;
}

OutcomeTable group_outcomes(const OutcomeSummary &s) {
    OutcomeTable t;
    auto row = [](std::string name, std::size_t n, std::size_t whole) { return OutcomeRow{std::move(name), n, percent(n, whole)}; };
    t.outcomes = {row("no-fault", s.no_fault, s.total), row("mute", s.mute, s.total),
                  row("successful", s.successful, s.total), row("detected", s.detected, s.total)};
    t.successful = {row("harmful", s.harmful, s.successful), row("harmless", s.harmless, s.successful)};
    return t;
}

OutcomeTable group_outcomes(const CampaignResult &cr) { return group_outcomes(cr.summary); }

json to_json(const WorkloadParams &p) {
    return json{{"n", p.n}, {"spacing", p.spacing}, {"k_regs", p.k_regs}, {"reg", p.reg}};
}

WorkloadParams workload_params_from_json(const json &j) {
    WorkloadParams p;
    p.n = j.value("n", p.n);
    p.spacing = j.value("spacing", p.spacing);
    p.k_regs = j.value("k_regs", p.k_regs);
    p.reg = j.value("reg", p.reg);
    return p;
}

json to_json(const InjectionRecord &r) {
    json j{{"cycle", r.cycle},
           {"run", r.run},
           {"seed", r.seed},
           {"sample", sample_kind_name(r.sample)},
           {"outcome", outcome_name(r.outcome)}};
    if (r.spec) {
        j["spec"] = to_json(*r.spec);
        if (r.effective)
            j["effective"] = to_json(*r.effective);
        j["termination"] = termination_name(r.termination);
    }
    if (r.outcome == Outcome::Successful)
        j["harmful"] = r.harmful;
    if (r.buffer)
        j["buffer"] = r.buffer->hex();
    return j;
}

InjectionRecord record_from_json(const json &j) {
    InjectionRecord r;
    r.cycle = j.at("cycle").get<std::uint32_t>();
    r.run = j.at("run").get<std::uint32_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.sample = sample_kind_from_name(j.at("sample").get<std::string>());
    r.outcome = outcome_from_name(j.at("outcome").get<std::string>());
    if (j.contains("spec"))
        r.spec = fault_spec_from_json(j.at("spec"));
    if (j.contains("effective"))
        r.effective = fault_spec_from_json(j.at("effective"));
    if (j.contains("termination"))
        r.termination = termination_from_name(j.at("termination").get<std::string>());
    r.harmful = j.value("harmful", false);
    if (j.contains("buffer"))
        r.buffer = OutputBuffer::from_hex(j.at("buffer").get<std::string>());
    return r;
}

namespace {

json summary_json(const OutcomeSummary &s) {
    return json{{"total", s.total},         {"no_fault", s.no_fault}, {"mute", s.mute},
                {"detected", s.detected},   {"successful", s.successful}, {"harmful", s.harmful},
                {"harmless", s.harmless}};
}

}  // namespace

json to_json(const CampaignResult &cr) {
    json records = json::array();
    for (const auto &r : cr.records)
        records.push_back(to_json(r));
    return json{{"schema", 1},
                {"kind", "campaign"},
                {"workload", {{"id", cr.workload_id}, {"params", to_json(cr.params)}}},
                {"profile", cr.config.profile.to_json()},
                {"config",
                 {{"range", {cr.cycle_lo, cr.cycle_hi}},
                  {"step", cr.config.step},
                  {"runs_per_cycle", cr.config.runs_per_cycle},
                  {"seed", cr.config.seed},
                  {"timing", cr.config.timing.to_json()}}},
                {"summary", summary_json(cr.summary)},
                {"records", std::move(records)}};
}

CampaignResult campaign_from_json(const json &j) {
    if (j.value("schema", 0) != 1)
        throw std::invalid_argument("unsupported results schema");
    CampaignResult cr;
    cr.workload_id = j.at("workload").at("id").get<std::string>();
    cr.params = workload_params_from_json(j.at("workload").value("params", json::object()));
    cr.config.profile = EffectProfile::from_json(j.at("profile"));
    const auto &c = j.at("config");
    cr.cycle_lo = c.at("range").at(0).get<std::uint32_t>();
    cr.cycle_hi = c.at("range").at(1).get<std::uint32_t>();
    cr.config.cycle_lo = cr.cycle_lo;
    cr.config.cycle_hi = cr.cycle_hi;
    cr.config.step = c.at("step").get<std::uint32_t>();
    cr.config.runs_per_cycle = c.at("runs_per_cycle").get<std::uint32_t>();
    cr.config.seed = c.at("seed").get<std::uint64_t>();
    cr.config.timing = TimingConfig::from_json(c.at("timing"));
    for (const auto &r : j.at("records"))
        cr.records.push_back(record_from_json(r));
    cr.summary = tally(cr.records);
    return cr;
}

}  // namespace faultforge

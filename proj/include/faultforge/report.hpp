#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "faultforge/classifier.hpp"

namespace faultforge {

struct RegisterHistogram {
    std::map<std::size_t, std::size_t> counts;  // corrupted-register count -> records
    std::size_t total = 0;
    double mean = 0;
};

// Successful records only; a register counts when its dumped word differs from the reference.
RegisterHistogram corrupted_register_histogram(const std::vector<InjectionRecord> &records, const Workload &w);

struct IsolationConfig {
    EffectProfile profile = paper_em_default();
    TimingConfig timing{};
    std::uint64_t seed = 1;
    std::size_t min_successful = 1000;
    std::uint32_t k_regs = 10;
    std::uint32_t rounds = 4;
    unsigned threads = 0;
};

struct IsolationRow {
    std::uint32_t spacing = 0;
    std::uint32_t runs_per_cycle = 0;
    std::size_t records = 0;
    RegisterHistogram histogram;
};

// Multi-counter campaigns per NOP spacing; runs per cycle double until enough successful faults.
std::vector<IsolationRow> isolate(const std::vector<std::uint32_t> &spacings, const IsolationConfig &cfg);
std::string isolation_csv(const std::vector<IsolationRow> &rows);

// One campaign, optionally with its explanations (same order as its records).
struct ReportInput {
    CampaignResult campaign;
    std::optional<std::vector<Explanation>> explanations;
};

nlohmann::json classification_to_json(const CampaignResult &cr, const std::vector<Explanation> &ex);
// Accepts campaign or classification JSON.
ReportInput report_input_from_json(const nlohmann::json &j);

struct SizeRow {
    std::string workload;
    std::string baseline;
    std::size_t baseline_size = 0;
    std::size_t size = 0;
    double ratio = 0;
};

struct ReportBundle {
    struct Table {
        std::string workload;
        std::vector<OutcomeRow> rows;
    };
    std::vector<Table> table1;  // outcome classes over all records
    std::vector<Table> table2;  // harmful / harmless among successful
    std::vector<Table> fig4;    // harmless / detected / harmful on hardened code
    std::vector<std::pair<std::uint32_t, RegisterHistogram>> fig5;  // by NOP spacing
    std::vector<std::pair<std::string, Distribution>> fig6;
    std::vector<std::pair<std::string, HarmfulBreakdown>> fig7;
    std::vector<SizeRow> sizes;
};

ReportBundle build_report(const std::vector<ReportInput> &inputs);

nlohmann::json to_json(const ReportBundle &b);
std::string to_markdown(const ReportBundle &b);
std::string to_csv(const ReportBundle &b);

// Writes through a temporary file in the same directory and renames it into place.
void write_file_atomic(const std::string &path, const std::string &content);

}  // namespace faultforge

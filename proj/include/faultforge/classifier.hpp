#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "faultforge/campaign.hpp"

namespace faultforge {

enum class Multiplicity { None, Single, Composite, Mixed };

std::string_view multiplicity_name(Multiplicity m);
Multiplicity multiplicity_from_name(std::string_view name);

struct Explanation {
    bool searched = false;  // false for records without a faulty buffer
    bool explained = false;
    // For Composite: the fault's kind and base family; Mixed and unexplained leave the defaults.
    Family family = Family::Skip;
    CompositeKind kind = CompositeKind::None;
    Family base = Family::Skip;
    Multiplicity multiplicity = Multiplicity::None;
    std::optional<FaultSpec> spec;
    std::size_t candidates = 0;

    // "skip", "composite/skip-replay", "composite/repeated/operand-substitution", "mixed", "unexplained".
    std::string label() const;
};

struct SearchConfig {
    // Cycles searched around the recorded injection cycle; 0 means the pipeline depth.
    std::uint32_t window = 0;
    // Search every cycle of the trace.
    bool blind = false;
    // Seeds kept for Mixed pairs whose second effect needs a value search.
    std::size_t mixed_value_seeds = 12;
    std::size_t greedy_steps = 16;
};

// Shared per-workload state; explain() is safe to call concurrently.
class Classifier {
  public:
    Classifier(const Workload &w, const TimingConfig &timing, std::uint64_t schedule_seed, SearchConfig cfg = {});
    ~Classifier();
    Classifier(const Classifier &) = delete;
    Classifier &operator=(const Classifier &) = delete;

    // Explains a faulted buffer observed for an injection at `cycle`.
    Explanation explain(std::uint32_t cycle, const OutputBuffer &observed) const;
    // Mute and no-fault records come back unexplained with no search.
    Explanation explain(const InjectionRecord &r) const;

    const TimedTrace &timed() const;
    const Reference &reference() const;

    struct Impl;

  private:
    std::unique_ptr<Impl> impl_;
};

std::vector<Explanation> classify(const Workload &w, const CampaignResult &cr, const SearchConfig &cfg = {},
                                  unsigned threads = 0);

// Distribution row of a fault shape: family for singles, base family for composites.
struct RowKey {
    Family family = Family::Skip;
    Multiplicity multiplicity = Multiplicity::None;
    auto operator<=>(const RowKey &) const = default;
};

RowKey row_key(const FaultSpec &s);
std::string row_name(const RowKey &k);
// Singles in legend order, then composites by base family, then mixed.
const std::vector<RowKey> &row_order();

struct DistributionRow {
    RowKey key;
    std::string name;
    std::size_t count = 0;
    double pct = 0;
};

struct Distribution {
    std::size_t total = 0;  // explained + unexplained
    std::vector<DistributionRow> rows;
    std::size_t unexplained = 0;
    double unexplained_pct = 0;

    const DistributionRow &at(const RowKey &k) const;
};

Distribution distribution(const std::vector<Explanation> &ex);
// Same rows over ground-truth specs.
Distribution distribution(const std::vector<FaultSpec> &specs);

struct HarmfulBreakdown {
    std::size_t total = 0;
    std::size_t magic_edge = 0;
    std::size_t other_single = 0;
    std::size_t mixed = 0;
    std::size_t other_composite = 0;
    std::size_t unexplained = 0;

    std::vector<OutcomeRow> rows() const;
};

// Successful harmful records only; detected ones are excluded.
HarmfulBreakdown harmful_breakdown(const std::vector<Explanation> &ex, const std::vector<InjectionRecord> &records);

nlohmann::json to_json(const Explanation &e);
Explanation explanation_from_json(const nlohmann::json &j);
nlohmann::json to_json(const Distribution &d);
nlohmann::json to_json(const HarmfulBreakdown &h);

}  // namespace faultforge

#include "faultforge/report.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace faultforge {

using nlohmann::json;

RegisterHistogram corrupted_register_histogram(const std::vector<InjectionRecord> &records, const Workload &w) {
    RegisterHistogram h;
    std::size_t sum = 0;
    for (const auto &r : records) {
        if (r.outcome != Outcome::Successful || !r.buffer)
            continue;
        std::size_t k = 0;
        for (std::size_t i = 0; i < kDumpedRegs; ++i)
            if (r.buffer->words.at(i) != w.reference.words[i])
                ++k;
        ++h.counts[k];
        ++h.total;
        sum += k;
    }
    h.mean = h.total ? static_cast<double>(sum) / static_cast<double>(h.total) : 0.0;
    return h;
}

std::vector<IsolationRow> isolate(const std::vector<std::uint32_t> &spacings, const IsolationConfig &cfg) {
    std::vector<IsolationRow> out;
    for (auto spacing : spacings) {
        WorkloadParams p;
        p.spacing = spacing;
        p.k_regs = cfg.k_regs;
        p.n = cfg.rounds;
        Workload w = make_workload("multi", p);
        CampaignConfig cc;
        cc.profile = cfg.profile;
        cc.timing = cfg.timing;
        cc.seed = cfg.seed;
        cc.threads = cfg.threads;
        IsolationRow row;
        row.spacing = spacing;
        for (std::uint32_t runs = 1;; runs *= 2) {
            cc.runs_per_cycle = runs;
            CampaignResult cr = run_campaign(w, cc, p);
            row.runs_per_cycle = runs;
            row.records = cr.records.size();
            row.histogram = corrupted_register_histogram(cr.records, w);
            if (row.histogram.total >= cfg.min_successful || runs >= (1u << 16))
                break;
        }
        out.push_back(std::move(row));
    }
    return out;
}

namespace {

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

}  // namespace

std::string isolation_csv(const std::vector<IsolationRow> &rows) {
    std::size_t max_k = 0;
    for (const auto &r : rows)
        if (!r.histogram.counts.empty())
            max_k = std::max(max_k, r.histogram.counts.rbegin()->first);
    std::ostringstream os;
    os << "spacing,runs_per_cycle,records,successful,mean";
    for (std::size_t k = 0; k <= max_k; ++k)
        os << ",regs_" << k;
    os << "\n";
    for (const auto &r : rows) {
        os << r.spacing << "," << r.runs_per_cycle << "," << r.records << "," << r.histogram.total << ","
           << fixed(r.histogram.mean, 3);
        for (std::size_t k = 0; k <= max_k; ++k) {
            auto it = r.histogram.counts.find(k);
            os << "," << (it == r.histogram.counts.end() ? 0 : it->second);
        }
        os << "\n";
    }
    return os.str();
}

json classification_to_json(const CampaignResult &cr, const std::vector<Explanation> &ex) {
    if (ex.size() != cr.records.size())
        throw std::invalid_argument("explanations and records differ in length");
    json list = json::array();
    for (const auto &e : ex)
        list.push_back(to_json(e));
    return json{{"schema", 1},
                {"kind", "classification"},
                {"campaign", to_json(cr)},
                {"explanations", std::move(list)},
                {"distribution", to_json(distribution(ex))},
                {"harmful", to_json(harmful_breakdown(ex, cr.records))}};
}

ReportInput report_input_from_json(const json &j) {
    if (j.value("schema", 0) != 1)
        throw std::invalid_argument("unsupported results schema");
    const std::string kind = j.value("kind", std::string());
    ReportInput in;
    if (kind == "campaign") {
        in.campaign = campaign_from_json(j);
    } else if (kind == "classification") {
        in.campaign = campaign_from_json(j.at("campaign"));
        std::vector<Explanation> ex;
        for (const auto &e : j.at("explanations"))
            ex.push_back(explanation_from_json(e));
        if (ex.size() != in.campaign.records.size())
            throw std::invalid_argument("explanations and records differ in length");
        in.explanations = std::move(ex);
    } else {
        throw std::invalid_argument("unknown results kind '" + kind + "'");
    }
    return in;
}

namespace {

bool hardened_id(const std::string &id) { return id.find('-') != std::string::npos; }

std::string label_for(const CampaignResult &cr) {
    if (cr.workload_id == "multi")
        return cr.workload_id + " (spacing " + std::to_string(cr.params.spacing) + ")";
    return cr.workload_id;
}

}  // namespace

ReportBundle build_report(const std::vector<ReportInput> &inputs) {
    ReportBundle b;
    std::set<std::string> sized;
    for (const auto &in : inputs) {
        const auto &cr = in.campaign;
        const auto &s = cr.summary;
        const std::string name = label_for(cr);
        const bool hardened = hardened_id(cr.workload_id);

        ReportBundle::Table t1{name, {{"no-fault", s.no_fault, percent(s.no_fault, s.total)},
                                      {"mute", s.mute, percent(s.mute, s.total)},
                                      {"successful", s.successful, percent(s.successful, s.total)}}};
        if (hardened || s.detected)
            t1.rows.push_back({"detected", s.detected, percent(s.detected, s.total)});
        b.table1.push_back(std::move(t1));
        b.table2.push_back({name, group_outcomes(s).successful});
        if (hardened) {
            const auto faulted = s.successful + s.detected;
            b.fig4.push_back({name, {{"harmless", s.harmless, percent(s.harmless, faulted)},
                                     {"detected", s.detected, percent(s.detected, faulted)},
                                     {"harmful", s.harmful, percent(s.harmful, faulted)}}});
        }
        if (cr.workload_id == "multi") {
            Workload w = make_workload(cr.workload_id, cr.params);
            b.fig5.push_back({cr.params.spacing, corrupted_register_histogram(cr.records, w)});
        }
        if (in.explanations) {
            b.fig6.push_back({name, distribution(*in.explanations)});
            b.fig7.push_back({name, harmful_breakdown(*in.explanations, cr.records)});
        }
        if (hardened && sized.insert(cr.workload_id).second) {
            Workload hw = make_workload(cr.workload_id, cr.params);
            const std::string base = cr.workload_id.substr(0, cr.workload_id.find('-'));
            Workload bw = make_workload(base, cr.params);
            SizeRow row{cr.workload_id, base, bw.program.size(), hw.program.size(), 0};
            row.ratio = static_cast<double>(row.size) / static_cast<double>(row.baseline_size);
            b.sizes.push_back(row);
        }
    }
    std::stable_sort(b.fig5.begin(), b.fig5.end(), [](const auto &x, const auto &y) { return x.first < y.first; });
    return b;
}

namespace {

json rows_json(const std::vector<OutcomeRow> &rows) {
    json out = json::array();
    for (const auto &r : rows)
        out.push_back({{"row", r.name}, {"count", r.count}, {"pct", r.pct}});
    return out;
}

json tables_json(const std::vector<ReportBundle::Table> &ts) {
    json out = json::array();
    for (const auto &t : ts)
        out.push_back({{"workload", t.workload}, {"rows", rows_json(t.rows)}});
    return out;
}

json histogram_json(const RegisterHistogram &h) {
    json counts = json::object();
    for (const auto &[k, n] : h.counts)
        counts[std::to_string(k)] = n;
    return {{"total", h.total}, {"mean", h.mean}, {"counts", counts}};
}

}  // namespace

json to_json(const ReportBundle &b) {
    json fig5 = json::array();
    for (const auto &[spacing, h] : b.fig5)
        fig5.push_back({{"spacing", spacing}, {"histogram", histogram_json(h)}});
    json fig6 = json::array();
    for (const auto &[name, d] : b.fig6)
        fig6.push_back({{"workload", name}, {"distribution", to_json(d)}});
    json fig7 = json::array();
    for (const auto &[name, h] : b.fig7)
        fig7.push_back({{"workload", name}, {"harmful", to_json(h)}});
    json sizes = json::array();
    for (const auto &s : b.sizes)
        sizes.push_back({{"workload", s.workload},
                         {"baseline", s.baseline},
                         {"baseline_size", s.baseline_size},
                         {"size", s.size},
                         {"ratio", std::round(s.ratio * 100.0) / 100.0}});
    return {{"schema", 1},
            {"kind", "report"},
            {"table1", tables_json(b.table1)},
            {"table2", tables_json(b.table2)},
            {"fig4", tables_json(b.fig4)},
            {"fig5", fig5},
            {"fig6", fig6},
            {"fig7", fig7},
            {"sizes", sizes}};
}

namespace {

std::string cell(const OutcomeRow &r) { return std::to_string(r.count) + " (" + fixed(r.pct, 1) + "%)"; }

void md_tables(std::ostringstream &os, const std::string &title, const std::vector<ReportBundle::Table> &ts) {
    if (ts.empty())
        return;
    os << "## " << title << "\n\n";
    std::vector<std::string> cols;
    for (const auto &t : ts)
        for (const auto &r : t.rows)
            if (std::find(cols.begin(), cols.end(), r.name) == cols.end())
                cols.push_back(r.name);
    os << "| workload |";
    for (const auto &c : cols)
        os << " " << c << " |";
    os << "\n|---|";
    for (std::size_t k = 0; k < cols.size(); ++k)
        os << "---|";
    os << "\n";
    for (const auto &t : ts) {
        os << "| " << t.workload << " |";
        for (const auto &c : cols) {
            auto it = std::find_if(t.rows.begin(), t.rows.end(), [&](const OutcomeRow &r) { return r.name == c; });
            os << " " << (it == t.rows.end() ? std::string("-") : cell(*it)) << " |";
        }
        os << "\n";
    }
    os << "\n";
}

}  // namespace

std::string to_markdown(const ReportBundle &b) {
    std::ostringstream os;
    md_tables(os, "Outcome classes", b.table1);
    md_tables(os, "Successful faults", b.table2);
    md_tables(os, "Hardened code", b.fig4);
    if (!b.fig5.empty()) {
        std::size_t max_k = 0;
        for (const auto &[s, h] : b.fig5)
            if (!h.counts.empty())
                max_k = std::max(max_k, h.counts.rbegin()->first);
        os << "## Corrupted registers per successful fault\n\n| spacing | successful | mean |";
        for (std::size_t k = 1; k <= max_k; ++k)
            os << " " << k << " |";
        os << "\n|---|---|---|";
        for (std::size_t k = 1; k <= max_k; ++k)
            os << "---|";
        os << "\n";
        for (const auto &[s, h] : b.fig5) {
            os << "| " << s << " | " << h.total << " | " << fixed(h.mean, 2) << " |";
            for (std::size_t k = 1; k <= max_k; ++k) {
                auto it = h.counts.find(k);
                os << " " << (it == h.counts.end() ? 0 : it->second) << " |";
            }
            os << "\n";
        }
        os << "\n";
    }
    if (!b.fig6.empty()) {
        os << "## Fault models\n\n| workload | faulted |";
        const auto &order = row_order();
        for (const auto &k : order)
            os << " " << row_name(k) << " |";
        os << " unexplained |\n|---|---|";
        for (std::size_t k = 0; k <= order.size(); ++k)
            os << "---|";
        os << "\n";
        for (const auto &[name, d] : b.fig6) {
            os << "| " << name << " | " << d.total << " |";
            for (const auto &k : order)
                os << " " << fixed(d.at(k).pct, 1) << " |";
            os << " " << fixed(d.unexplained_pct, 1) << " |\n";
        }
        os << "\n";
    }
    if (!b.fig7.empty()) {
        std::vector<ReportBundle::Table> ts;
        for (const auto &[name, h] : b.fig7)
            ts.push_back({name + " (" + std::to_string(h.total) + " harmful)", h.rows()});
        md_tables(os, "Effects behind harmful faults", ts);
    }
    if (!b.sizes.empty()) {
        os << "## Code size\n\n| workload | baseline | instructions | ratio |\n|---|---|---|---|\n";
        for (const auto &s : b.sizes)
            os << "| " << s.workload << " | " << s.baseline << " (" << s.baseline_size << ") | " << s.size << " | x"
               << fixed(s.ratio, 2) << " |\n";
        os << "\n";
    }
    return os.str();
}

std::string to_csv(const ReportBundle &b) {
    std::ostringstream os;
    os << "section,workload,row,count,pct\n";
    auto tables = [&](const char *section, const std::vector<ReportBundle::Table> &ts) {
        for (const auto &t : ts)
            for (const auto &r : t.rows)
                os << section << "," << t.workload << "," << r.name << "," << r.count << "," << fixed(r.pct, 1) << "\n";
    };
    tables("table1", b.table1);
    tables("table2", b.table2);
    tables("fig4", b.fig4);
    for (const auto &[s, h] : b.fig5) {
        for (const auto &[k, n] : h.counts)
            os << "fig5,multi (spacing " << s << ")," << k << "," << n << "," << fixed(percent(n, h.total), 1) << "\n";
        os << "fig5,multi (spacing " << s << "),mean,," << fixed(h.mean, 3) << "\n";
    }
    for (const auto &[name, d] : b.fig6) {
        for (const auto &r : d.rows)
            os << "fig6," << name << "," << r.name << "," << r.count << "," << fixed(r.pct, 1) << "\n";
        os << "fig6," << name << ",unexplained," << d.unexplained << "," << fixed(d.unexplained_pct, 1) << "\n";
    }
    for (const auto &[name, h] : b.fig7)
        for (const auto &r : h.rows())
            os << "fig7," << name << "," << r.name << "," << r.count << "," << fixed(r.pct, 1) << "\n";
    for (const auto &s : b.sizes)
        os << "sizes," << s.workload << "," << s.baseline << "," << s.size << "," << fixed(s.ratio, 2) << "\n";
    return os.str();
}

void write_file_atomic(const std::string &path, const std::string &content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out)
            throw std::runtime_error("cannot write " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw std::runtime_error("cannot replace " + path + ": " + ec.message());
    }
}

}  // namespace faultforge

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "faultforge/report.hpp"

using namespace faultforge;
using nlohmann::json;

namespace {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json read_json(const std::string &path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error &e) {
        throw DataError(path + ": " + e.what());
    }
}

void emit(const std::string &out, const std::string &content) {
    if (out.empty() || out == "-")
        std::cout << content;
    else
        write_file_atomic(out, content);
}

std::string with_newline(std::string s) {
    if (s.empty() || s.back() != '\n')
        s += '\n';
    return s;
}

Program load_program(const std::string &path) {
    const std::string text = read_file(path);
    if (path.size() > 5 && path.ends_with(".json"))
        return program_from_json(json::parse(text));
    return assemble(text);
}

// "a..b"
std::pair<std::uint32_t, std::uint32_t> parse_range(const std::string &s) {
    auto dots = s.find("..");
    if (dots == std::string::npos)
        throw CLI::ValidationError("--range", "expected a..b");
    auto num = [&](std::string_view v) {
        std::uint32_t x = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        if (ec != std::errc() || p != v.data() + v.size())
            throw CLI::ValidationError("--range", "bad bound '" + std::string(v) + "'");
        return x;
    };
    std::string_view sv(s);
    return {num(sv.substr(0, dots)), num(sv.substr(dots + 2))};
}

EffectProfile load_profile(const std::string &name) {
    if (name.ends_with(".json"))
        return EffectProfile::from_json(read_json(name));
    return EffectProfile::named(name);
}

struct WorkloadOpts {
    std::string id;
    WorkloadParams params;

    void add(CLI::App *app, bool required) {
        auto *o = app->add_option("--workload", id, "Workload id (see --list-workloads)");
        if (required)
            o->required();
        app->add_option("--n", params.n, "Workload size (0 = default)");
        app->add_option("--spacing", params.spacing, "NOPs between multi-counter increments");
        app->add_option("--k-regs", params.k_regs, "Counters in the multi-counter workload");
        app->add_option_function<unsigned>(
               "--reg", [this](unsigned r) { params.reg = static_cast<Reg>(r); },
               "Counter register of the single-counter workload")
            ->check(CLI::Range(0u, 13u));
    }
};

struct TimingOpts {
    std::string file;
    std::optional<std::uint32_t> issue_width, window_depth;

    void add(CLI::App *app) {
        app->add_option("--timing", file, "TimingConfig JSON file");
        app->add_option("--issue-width", issue_width);
        app->add_option("--window-depth", window_depth);
    }
    TimingConfig get(TimingConfig t = {}) const {
        if (!file.empty())
            t = TimingConfig::from_json(read_json(file));
        if (issue_width)
            t.issue_width = *issue_width;
        if (window_depth)
            t.window_depth = *window_depth;
        return t;
    }
};

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"faultforge: deterministic ISA-level fault-injection lab"};
    app.require_subcommand(0, 1);
    bool list = false;
    app.add_flag("--list-workloads", list, "List workload ids and exit");

    // assemble
    auto *asm_cmd = app.add_subcommand("assemble", "Assemble a source file to program JSON");
    std::string asm_in, asm_out;
    bool asm_round = false;
    asm_cmd->add_option("file", asm_in, "Assembly source")->required();
    asm_cmd->add_option("--out", asm_out, "Output path (default stdout)");
    asm_cmd->add_flag("--disasm", asm_round, "Emit canonical assembly instead of JSON");

    // run
    auto *run_cmd = app.add_subcommand("run", "Run a workload or program and print its output buffer");
    WorkloadOpts run_w;
    run_w.add(run_cmd, false);
    std::string run_prog;
    std::uint64_t run_budget = 1'000'000;
    bool run_asm = false;
    run_cmd->add_option("--program", run_prog, "Program file (.s or .json)");
    run_cmd->add_option("--budget", run_budget, "Step budget for --program");
    run_cmd->add_flag("--asm", run_asm, "Print the workload's assembly instead of running it");

    // harden
    auto *hard_cmd = app.add_subcommand("harden", "Emit a hardened variant as assembly");
    WorkloadOpts hard_w;
    hard_w.add(hard_cmd, true);
    std::string hard_scheme, hard_out;
    hard_cmd->add_option("--scheme", hard_scheme, "loopdup, swift or stacked")
        ->required()
        ->check(CLI::IsMember({"loopdup", "swift", "stacked"}));
    hard_cmd->add_option("--out", hard_out);

    // campaign
    auto *camp_cmd = app.add_subcommand("campaign", "Run a seeded injection campaign");
    WorkloadOpts camp_w;
    camp_w.add(camp_cmd, true);
    TimingOpts camp_t;
    camp_t.add(camp_cmd);
    std::string camp_profile = "paper-em-default", camp_range, camp_out;
    CampaignConfig camp_cfg;
    camp_cmd->add_option("--profile", camp_profile, "Profile name or JSON file");
    camp_cmd->add_option("--range", camp_range, "Inclusive cycle range a..b");
    camp_cmd->add_option("--step", camp_cfg.step);
    camp_cmd->add_option("--runs", camp_cfg.runs_per_cycle, "Runs per cycle");
    camp_cmd->add_option("--seed", camp_cfg.seed)->required();
    camp_cmd->add_option("--threads", camp_cfg.threads);
    camp_cmd->add_option("--out", camp_out);

    // classify
    auto *cls_cmd = app.add_subcommand("classify", "Explain the faulty buffers of a campaign");
    std::string cls_in, cls_workload, cls_out;
    SearchConfig cls_cfg;
    unsigned cls_threads = 0;
    cls_cmd->add_option("results", cls_in, "Campaign results JSON")->required();
    cls_cmd->add_option("--workload", cls_workload, "Expected workload id");
    cls_cmd->add_option("--window", cls_cfg.window, "Cycles searched around the injection (0 = depth)");
    cls_cmd->add_flag("--blind", cls_cfg.blind, "Search every cycle");
    cls_cmd->add_option("--threads", cls_threads);
    cls_cmd->add_option("--out", cls_out);

    // report
    auto *rep_cmd = app.add_subcommand("report", "Build tables and figure data");
    std::vector<std::string> rep_in;
    std::string rep_format = "md", rep_out;
    rep_cmd->add_option("--in", rep_in, "Campaign or classification JSON")->required();
    rep_cmd->add_option("--format", rep_format)->check(CLI::IsMember({"md", "csv", "json"}));
    rep_cmd->add_option("--out", rep_out);

    // isolate
    auto *iso_cmd = app.add_subcommand("isolate", "Corrupted-register means per NOP spacing");
    std::vector<std::uint32_t> iso_spacings;
    IsolationConfig iso_cfg;
    TimingOpts iso_t;
    iso_t.add(iso_cmd);
    std::string iso_profile = "paper-em-default", iso_out;
    iso_cmd->add_option("--spacings", iso_spacings)->required()->delimiter(',');
    iso_cmd->add_option("--seed", iso_cfg.seed)->required();
    iso_cmd->add_option("--profile", iso_profile);
    iso_cmd->add_option("--min-successful", iso_cfg.min_successful);
    iso_cmd->add_option("--k-regs", iso_cfg.k_regs);
    iso_cmd->add_option("--rounds", iso_cfg.rounds);
    iso_cmd->add_option("--threads", iso_cfg.threads);
    iso_cmd->add_option("--out", iso_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (list) {
            for (const auto &w : list_workloads())
                std::cout << w.id << "\t" << w.description << "\n";
            return 0;
        }
        if (*asm_cmd) {
            Program p = assemble(read_file(asm_in));
            emit(asm_out, asm_round ? disassemble(p) : program_to_json(p).dump(2) + "\n");
        } else if (*run_cmd) {
            if (run_prog.empty() == run_w.id.empty())
                throw CLI::ValidationError("run", "give exactly one of --workload or --program");
            if (!run_prog.empty()) {
                Program p = load_program(run_prog);
                if (run_asm) {
                    std::cout << disassemble(p);
                    return 0;
                }
                RunResult r = run(p, run_budget, false);
                std::cout << r.output.hex() << "\n";
                if (r.termination != Termination::Halted)
                    std::cerr << "terminated: " << termination_name(r.termination) << "\n";
            } else {
                Workload w = make_workload(run_w.id, run_w.params);
                std::cout << (run_asm ? disassemble(w.program) : w.reference.hex() + "\n");
            }
        } else if (*hard_cmd) {
            Workload base = make_workload(hard_w.id, hard_w.params);
            HardenedProgram hp = harden(base, scheme_from_name(hard_scheme));
            emit(hard_out, with_newline(disassemble(hp.program)));
        } else if (*camp_cmd) {
            camp_cfg.profile = load_profile(camp_profile);
            camp_cfg.timing = camp_t.get();
            if (!camp_range.empty()) {
                auto [lo, hi] = parse_range(camp_range);
                camp_cfg.cycle_lo = lo;
                camp_cfg.cycle_hi = hi;
            }
            Workload w = make_workload(camp_w.id, camp_w.params);
            CampaignResult cr = run_campaign(w, camp_cfg, camp_w.params);
            emit(camp_out, to_json(cr).dump(1) + "\n");
            const auto &s = cr.summary;
            std::cerr << w.id << ": " << s.total << " records, " << s.successful << " successful, " << s.detected
                      << " detected, " << s.mute << " mute\n";
        } else if (*cls_cmd) {
            CampaignResult cr = campaign_from_json(read_json(cls_in));
            if (!cls_workload.empty() && cls_workload != cr.workload_id)
                throw DataError("results are for workload '" + cr.workload_id + "', not '" + cls_workload + "'");
            Workload w = make_workload(cr.workload_id, cr.params);
            auto ex = classify(w, cr, cls_cfg, cls_threads);
            emit(cls_out, classification_to_json(cr, ex).dump(1) + "\n");
            Distribution d = distribution(ex);
            std::cerr << w.id << ": " << d.total << " faulty buffers, " << d.unexplained << " unexplained\n";
        } else if (*rep_cmd) {
            std::vector<ReportInput> inputs;
            for (const auto &path : rep_in)
                inputs.push_back(report_input_from_json(read_json(path)));
            ReportBundle b = build_report(inputs);
            if (rep_format == "md")
                emit(rep_out, to_markdown(b));
            else if (rep_format == "csv")
                emit(rep_out, to_csv(b));
            else
                emit(rep_out, to_json(b).dump(1) + "\n");
        } else if (*iso_cmd) {
            iso_cfg.profile = load_profile(iso_profile);
            iso_cfg.timing = iso_t.get();
            emit(iso_out, isolation_csv(isolate(iso_spacings, iso_cfg)));
        } else {
            std::cerr << app.help();
            return 1;
        }
    } catch (const CLI::ParseError &e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const AsmError &e) {
        std::cerr << "assembly error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dvts/ann.hpp"
#include "dvts/htm.hpp"
#include "dvts/simenv.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dvts;

namespace {

simenv::RunSpec parse_policy(const std::string& policy) {
    simenv::RunSpec spec;
    if (policy == "dvts") {
        spec.kind = autoscaler::PolicyKind::Dvts;
    } else if (policy.rfind("static:", 0) == 0) {
        spec.kind = autoscaler::PolicyKind::Static;
        spec.static_type = policy.substr(7);
        if (spec.static_type.empty()) throw Error("static policy needs a type, e.g. static:m1.small");
    } else {
        throw Error("unknown policy '" + policy + "' (use dvts or static:<type>)");
    }
    return spec;
}

std::string sanitize(const std::string& label) {
    std::string out = label;
    for (char& c : out)
        if (c == ':' || c == '/' || c == '.') c = '_';
    return out;
}

int cmd_run(const std::string& scenario_path, const std::vector<std::string>& policies,
            bool all_policies, const std::string& out_dir, std::int64_t seed,
            double time_compression) {
    if (!fs::exists(scenario_path)) {
        std::cerr << "error: scenario file not found: " << scenario_path << '\n';
        return 1;
    }
    simenv::Scenario scenario = simenv::Scenario::load(scenario_path);
    if (time_compression > 0.0) scenario.time_compression = time_compression;

    std::vector<std::string> selected = policies;
    if (all_policies) {
        selected = {"dvts"};
        for (const auto& t : scenario.catalog) selected.push_back("static:" + t.name);
    }
    if (selected.empty()) selected = {"dvts"};

    fs::create_directories(out_dir);
    std::ofstream summary(out_dir + "/summary.csv", std::ios::trunc);
    summary << "policy,seed,total_cost,vm_count,scale_events,provisions_before_change,"
               "provisions_after_change\n";

    std::cout << "scenario: " << scenario.name << " (seed " << scenario.seed
              << ", compression " << scenario.time_compression << "x)\n";
    int failures = 0;
    for (const auto& policy : selected) {
        simenv::RunSpec spec = parse_policy(policy);
        if (seed >= 0) spec.seed_override = static_cast<std::uint64_t>(seed);
        spec.out_dir = out_dir + "/" + sanitize(policy);
        simenv::ExperimentResult r = simenv::run_experiment(scenario, spec);
        summary << r.policy_label << ',' << r.seed << ',' << r.ledger.total_cost << ','
                << r.ledger.vms.size() << ',' << r.scale_events.size() << ','
                << r.provisions_before_change << ',' << r.provisions_after_change << '\n';
        std::cout << "  " << r.policy_label << ": total cost $" << r.ledger.total_cost << " ("
                  << r.ledger.vms.size() << " VMs, " << r.scale_events.size() << " scale-ups";
        if (!r.abort_reason.empty()) {
            std::cout << ", ABORTED: " << r.abort_reason;
            ++failures;
        }
        std::cout << ")\n";
    }
    std::cout << "outputs in " << out_dir << '\n';
    return failures == 0 ? 0 : 1;
}

struct RunOutputs {
    std::string policy;
    double total_cost = 0.0;
    json ledger;
};

int cmd_compare(const std::vector<std::string>& run_dirs, const std::string& out_path) {
    if (run_dirs.size() < 2) {
        std::cerr << "error: compare needs at least two run directories\n";
        return 1;
    }
    std::vector<RunOutputs> runs;
    for (const auto& dir : run_dirs) {
        const std::string ledger_path = dir + "/ledger.json";
        std::ifstream in(ledger_path);
        if (!in) {
            std::cerr << "error: missing " << ledger_path << '\n';
            return 1;
        }
        RunOutputs r;
        r.policy = fs::path(dir).filename().string();
        in >> r.ledger;
        r.total_cost = r.ledger.at("total_cost").get<double>();
        runs.push_back(std::move(r));
    }

    std::ofstream out(out_path, std::ios::trunc);
    if (!out) {
        std::cerr << "error: cannot write " << out_path << '\n';
        return 1;
    }
    out << "policy,total_cost,vm_count\n";
    double dvts_cost = -1.0;
    double best_other = -1.0;
    for (const auto& r : runs) {
        out << r.policy << ',' << r.total_cost << ',' << r.ledger.at("vms").size() << '\n';
        if (r.policy == "dvts")
            dvts_cost = r.total_cost;
        else if (best_other < 0.0 || r.total_cost < best_other)
            best_other = r.total_cost;
    }

    const std::string timeline_path =
        (fs::path(out_path).parent_path() / "timelines.csv").string();
    std::ofstream timelines(timeline_path, std::ios::trunc);
    timelines << "policy,vm_id,vm_type,start,end,blocks,cost\n";
    for (const auto& r : runs)
        for (const auto& vm : r.ledger.at("vms"))
            timelines << r.policy << ',' << vm.at("vm_id").get<std::string>() << ','
                      << vm.at("vm_type").get<std::string>() << ',' << vm.at("start").get<double>()
                      << ',' << vm.at("end").get<double>() << ',' << vm.at("blocks").get<int>()
                      << ',' << vm.at("cost").get<double>() << '\n';

    if (dvts_cost >= 0.0 && best_other > 0.0) {
        const double saving = 100.0 * (best_other - dvts_cost) / best_other;
        out << "dvts_saving_vs_best_baseline_pct," << saving << ",\n";
        std::cout << "dvts saving vs best baseline: " << saving << "%\n";
    }
    std::cout << "wrote " << out_path << " and " << timeline_path << '\n';
    return 0;
}

int cmd_inspect(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "error: cannot open " << path << '\n';
        return 1;
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        json j = json::parse(text);
        if (j.contains("model") && j.contains("state")) {
            ann::Trainer trainer = ann::Trainer::from_json(text);
            const auto& st = trainer.state();
            std::cout << "ANN snapshot: 1-" << trainer.model().config().hidden_neurons << "-2\n";
            std::cout << "  trained samples (k): " << st.k << '\n';
            std::cout << "  user range: [" << st.min_users << ", " << st.max_users << "]"
                      << (st.has_user_range ? "" : " (none)") << '\n';
            std::cout << "  rmse buffer:";
            for (double r : st.last10_rmse) std::cout << ' ' << r;
            std::cout << "\n  anomaly buffer:";
            for (double a : st.last10_anomaly) std::cout << ' ' << a;
            std::cout << '\n';
            return 0;
        }
        if (j.contains("columns")) {
            htm::HtmRegion region = htm::HtmRegion::from_json(text);
            std::cout << "HTM snapshot: " << region.config().column_count << " columns x "
                      << region.config().cells_per_column << " cells\n";
            std::cout << "  input width: " << region.input_width() << " bits\n";
            std::cout << "  samples seen: " << region.samples_seen() << '\n';
            std::cout << "  active cells: " << region.active_cells().size()
                      << ", predicted cells: " << region.predicted_cells().size() << '\n';
            return 0;
        }
        if (j.contains("vms") && j.contains("total_cost")) {
            std::cout << "cost ledger: " << j.at("vms").size() << " VMs, total $"
                      << j.at("total_cost").get<double>() << '\n';
            return 0;
        }
        std::cerr << "error: unrecognized snapshot format in " << path << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: corrupt snapshot " << path << ": " << e.what() << '\n';
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic VM type selection simulator"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::vector<std::string> policies;
    bool all_policies = false;
    std::string out_dir = "out";
    std::int64_t seed = -1;
    double time_compression = -1.0;

    CLI::App* run = app.add_subcommand("run", "Run one or more autoscaling experiments");
    run->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    run->add_option("--policy", policies, "Policy: dvts or static:<type> (repeatable)");
    run->add_flag("--all-policies", all_policies, "Run DVTS plus a static baseline per type");
    run->add_option("--out", out_dir, "Output directory");
    run->add_option("--seed", seed, "Seed override");
    run->add_option("--time-compression", time_compression, "Time compression override");

    std::vector<std::string> run_dirs;
    std::string compare_out = "comparison.csv";
    CLI::App* compare = app.add_subcommand("compare", "Compare completed runs");
    compare->add_option("runs", run_dirs, "Run output directories")->required();
    compare->add_option("--out", compare_out, "Comparison CSV path");

    std::string snapshot_path;
    CLI::App* inspect = app.add_subcommand("inspect", "Inspect a model/HTM/ledger snapshot");
    inspect->add_option("snapshot", snapshot_path, "Snapshot file")->required();

    CLI11_PARSE(app, argc, argv);

    if (const char* level = std::getenv("DVTS_LOG_LEVEL"); level && std::string(level) == "debug")
        std::cerr << "dvts: debug logging enabled\n";

    try {
        if (run->parsed()) return cmd_run(scenario_path, policies, all_policies, out_dir, seed,
                                          time_compression);
        if (compare->parsed()) return cmd_compare(run_dirs, compare_out);
        if (inspect->parsed()) return cmd_inspect(snapshot_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

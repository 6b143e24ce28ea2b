#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dvts/autoscaler.hpp"
#include "dvts/common.hpp"

namespace dvts::simenv {

// Ground-truth users -> resources relationship of the simulated application,
// plus the workload-change injection applied to reported values.
struct AppModel {
    double base_cpu_per_user = 0.0022;    // normalized CPU demand per user
    double base_cpu_fixed = 0.0;          // normalized CPU demand floor per VM
    double base_ram_fixed_bytes = 150.0 * kMiB;
    double base_ram_per_user_bytes = 3.4 * kMiB;

    struct Change {
        double at_seconds = 3.5 * 3600.0;
        double cpu_util_delta = 0.10;               // fraction of the VM's capacity
        double ram_fixed_delta_bytes = 1.0 * kGiB;
        double ram_per_user_delta_bytes = 2.0 * kMiB;
    };
    std::optional<Change> change = Change{};

    // RAM demand at or beyond this fraction of physical memory saturates the
    // CPU (swap pressure eats the idle time)
    double thrash_fraction = 0.98;
    bool thrash_enabled = true;
};

// Simulated hardware behind one VM type: the cores the hypervisor exposes
// and the steal distribution its instances experience.
struct VmSimProfile {
    std::vector<double> core_freqs_ghz;
    double steal_mean_lo = 0.10; // per-instance mean, drawn once at provision
    double steal_mean_hi = 0.20;
    double steal_jitter = 0.05;  // per-tick uniform jitter amplitude
    double disk_util_pct = 2.0;
    double net_util_pct = 3.0;
};

struct WorkloadProfile {
    std::int64_t initial_users = 30;
    std::int64_t step_users = 10;
    double step_interval_seconds = 360.0;
    std::int64_t max_users = 400;
};

struct BillingEntry {
    std::string vm_id;
    std::string vm_type;
    double start = 0.0;
    double end = 0.0;
    int blocks = 0;
    double cost = 0.0;
};

struct CostLedger {
    double block_seconds = 3600.0; // one billable block (an hour, compressed)
    std::vector<BillingEntry> vms;
    double total_cost = 0.0;

    std::string to_json() const;
};

struct Scenario {
    std::string name = "default";
    metrics::FleetConstants fleet_constants;
    capacity::Catalog catalog;
    std::map<std::string, VmSimProfile> profiles;
    AppModel app;
    WorkloadProfile workload;
    autoscaler::PolicyConfig policy; // kind/static_type overridden per run
    metrics::FilterConfig filter;
    ann::AnnConfig ann;
    htm::HtmConfig htm;
    capacity::CapacityRepository::Options repository;
    int selector_delta = 5;
    std::int64_t selector_probe_limit = 100000;

    double duration_seconds = 5.5 * 3600.0;
    double tick_seconds = 5.0;
    double provisioning_delay_seconds = 90.0;
    double time_compression = 60.0;
    double epoch_seconds = 1454284800.0; // timestamp of t = 0
    std::uint64_t seed = 1;
    std::string initial_vm_type = "m1.small";

    // All durations (and the billing block) divided by time_compression.
    Scenario compressed() const;

    std::string to_json() const;
    static Scenario from_json(const std::string& text);
    static Scenario load(const std::string& path);
    void save(const std::string& path) const;
};

Scenario default_scenario();

std::int64_t generate_workload(const WorkloadProfile& profile, double t);

// Largest-remainder apportionment of `total` users over the weights.
std::vector<std::int64_t> assign_users(std::int64_t total, const std::vector<double>& weights);

// State of one simulated VM instance.
struct SimVm {
    std::string id;
    std::string vm_type;
    double requested_at = 0.0;
    double joined_at = 0.0;
    double steal_mean = 0.0;
    Rng rng{1};
};

metrics::MonitoringSample emit_sample(SimVm& vm, const VmSimProfile& profile, const AppModel& app,
                                      double physical_ram_bytes,
                                      const metrics::FleetConstants& fleet, std::int64_t assigned_users,
                                      double t, double epoch, double change_at_compressed);

struct RunSpec {
    autoscaler::PolicyKind kind = autoscaler::PolicyKind::Dvts;
    std::string static_type;
    std::optional<std::uint64_t> seed_override;
    std::string out_dir; // empty: keep everything in memory

    std::string policy_label() const {
        return kind == autoscaler::PolicyKind::Dvts ? "dvts" : "static:" + static_type;
    }
};

struct ExperimentResult {
    std::string policy_label;
    std::uint64_t seed = 0;
    CostLedger ledger;
    std::vector<autoscaler::ScalingEvent> scale_events;
    int provisions_before_change = 0;
    int provisions_after_change = 0;
    std::int64_t trained_samples = 0;
    std::int64_t total_samples = 0;
    std::string abort_reason; // empty on clean completion
};

ExperimentResult run_experiment(const Scenario& scenario, const RunSpec& spec);

} // namespace dvts::simenv

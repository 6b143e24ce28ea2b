#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dvts/ann.hpp"
#include "dvts/capacity.hpp"
#include "dvts/common.hpp"
#include "dvts/htm.hpp"
#include "dvts/metrics.hpp"
#include "dvts/selector.hpp"

namespace dvts::autoscaler {

enum class TriggerMetric { MaxCpuRam, CpuOnly };
enum class PolicyKind { Dvts, Static };

struct PolicyConfig {
    double trigger_threshold = 0.70;
    double sustain_seconds = 10.0;
    double cooldown_seconds = 600.0;
    double tick_seconds = 5.0; // monitoring cadence behind "continuously"
    TriggerMetric metric = TriggerMetric::MaxCpuRam;
    PolicyKind kind = PolicyKind::Dvts;
    std::string static_type; // used when kind == Static

    void validate() const;
};

struct ActiveVm {
    std::string id;
    std::string vm_type;
    capacity::CapacityEstimate capacity; // estimate at join time
    std::shared_ptr<htm::HtmRegion> region;
    double weight = 0.0;
    double joined_at = 0.0;
};

struct FleetState {
    std::vector<ActiveVm> vms;
    double last_scale_time = -1e18;

    const ActiveVm* find(const std::string& vm_id) const;
};

struct ScalingEvent {
    double time = 0.0;
    std::string chosen_type;
    std::string reason = "threshold_breach";
    PolicyKind policy = PolicyKind::Dvts;
    std::optional<selector::SelectionResult> selection; // present for DVTS

    std::string to_json() const;
};

// Per-VM relative utilisation: CPU load against the sample's own measured
// capacity, RAM load against the type's normalized RAM size.
double vm_relative_utilisation(const metrics::NormalizedSample& s, double ram_capacity,
                               TriggerMetric metric);

// Fleet-average relative utilisation must have exceeded the threshold for
// every tick of the sustain window, and the cooldown must have expired.
bool evaluate_trigger(const PolicyConfig& policy, const FleetState& fleet,
                      std::span<const metrics::NormalizedSample> window, double now,
                      const capacity::Catalog& catalog, const metrics::FleetConstants& fleet_constants);

std::vector<double> recompute_weights(FleetState& fleet, const capacity::Catalog& catalog);

std::string choose_type(const PolicyConfig& policy, const selector::SelectionInput& sel_input,
                        ScalingEvent& event_out);

// Selects (or statically picks) a type, adds the VM with a deep copy of the
// first VM's HTM region, updates weights and the cooldown clock.
ScalingEvent scale_up(FleetState& fleet, const PolicyConfig& policy,
                      const selector::SelectionInput& sel_input, const capacity::Catalog& catalog,
                      const metrics::FleetConstants& fleet_constants, double now,
                      const std::string& new_vm_id);

// Everything the autoscaling component owns: normalization constants, the
// capacity repository, the shared ANN trainer, one HTM region per AS VM and
// the fleet state. Driven tick by tick by the simulation (or any harness).
class Engine {
public:
    struct Config {
        metrics::FleetConstants fleet_constants;
        capacity::Catalog catalog;
        PolicyConfig policy;
        metrics::FilterConfig filter;
        ann::AnnConfig ann;
        htm::HtmConfig htm;
        capacity::CapacityRepository::Options repository;
        int selector_delta = 5;
        std::int64_t selector_probe_limit = 100000;
    };

    explicit Engine(Config cfg);

    // Adds a VM to the fleet; the HTM is cloned from the first VM when one
    // exists, otherwise freshly initialized.
    void add_vm(const std::string& vm_id, const std::string& vm_type, double now);

    struct SampleReport {
        std::string vm_id;
        double anomaly = 0.0;
        bool htm_warmed_up = false;
        metrics::FilterDecision filter;
        double rmse_pre = 0.0;
        bool trained = false;
        ann::TrainOutcome outcome;
    };

    struct TickReport {
        double time = 0.0;
        double fleet_utilisation = 0.0;
        std::vector<SampleReport> samples;
    };

    TickReport ingest_tick(const std::vector<metrics::MonitoringSample>& samples, double now);

    // Returns a scaling decision when the trigger fires; the caller is
    // responsible for provisioning and the eventual add_vm.
    std::optional<ScalingEvent> maybe_scale(double now);

    const FleetState& fleet() const { return fleet_; }
    FleetState& fleet() { return fleet_; }
    const capacity::CapacityRepository& repository() const { return repo_; }
    capacity::CapacityRepository& repository() { return repo_; }
    const ann::Trainer& trainer() const { return trainer_; }
    ann::Trainer& trainer() { return trainer_; }
    const Config& config() const { return cfg_; }
    const htm::HtmRegion* region_of(const std::string& vm_id) const;

    selector::SelectionInput build_selection_input() const;

private:
    Config cfg_;
    FleetState fleet_;
    capacity::CapacityRepository repo_;
    ann::Trainer trainer_;
    std::map<std::string, std::vector<std::int64_t>> recent_users_;
    std::vector<metrics::NormalizedSample> window_;
    int vm_counter_ = 0;

    void trim_window(double now);
};

} // namespace dvts::autoscaler

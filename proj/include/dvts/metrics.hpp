#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dvts/common.hpp"

namespace dvts::metrics {

// Fleet-wide normalization constants: the largest core count, core frequency
// and RAM size among all VM types under consideration.
struct FleetConstants {
    double fr_max_ghz = 3.5;
    int n_max_cores = 1;
    double ram_max_bytes = 3.75 * kGiB;

    void validate() const;
};

// One 5-second utilisation report from one application-server VM.
struct MonitoringSample {
    double timestamp = 0.0; // seconds since epoch
    std::string vm_id;
    std::string vm_type;
    std::int64_t users = 0;
    double pct_idle = 0.0;        // [0,100]
    double pct_steal = 0.0;       // [0,100]
    std::vector<double> core_freqs_ghz;
    double active_memory_bytes = 0.0;
    double disk_util_pct = 0.0;
    double net_util_pct = 0.0;

    void validate() const;
    double total_freq_ghz() const;
};

// Fleet-scale-normalized view of a MonitoringSample. disk/net ride along as
// raw-percentage ratios because the sample filters check all four resources.
struct NormalizedSample {
    double timestamp = 0.0;
    std::string vm_id;
    std::int64_t users = 0;
    double cpu_capacity = 0.0; // (0,1]
    double cpu_load = 0.0;     // [0,1], <= cpu_capacity
    double ram_load = 0.0;     // (0,1]
    double disk_util = 0.0;    // [0,1]
    double net_util = 0.0;     // [0,1]
};

enum class FilterReason {
    Overload,
    NegligibleLoad,
    UserCountJump,
    AlreadyWellPredicted,
    Accepted,
};

const char* to_string(FilterReason reason);

struct FilterDecision {
    bool accepted = false;
    FilterReason reason = FilterReason::Accepted;
};

// Per-resource capacity ratios of the reporting VM, on the fleet scale.
struct ResourceCapacities {
    double cpu_capacity = 1.0;
    double ram_capacity = 1.0;
};

struct FilterConfig {
    double overload_threshold = 0.70;
    std::int64_t min_users = 25;
    double min_cpu_utilisation = 0.10; // relative to the VM's capacity
    double user_jump_low = 0.50;
    double user_jump_high = 1.50;
    double well_predicted_rmse = 0.01;
    // When set, the RAM overload check uses the fleet-normalized ram_load
    // directly instead of dividing by the VM's RAM capacity.
    bool ram_overload_fleet_norm = false;
};

double normalize_cpu_capacity(const MonitoringSample& s, const FleetConstants& c);
double normalize_cpu_load(const MonitoringSample& s, const FleetConstants& c);
double normalize_ram_load(double active_memory_bytes, const FleetConstants& c);
NormalizedSample normalize_sample(const MonitoringSample& s, const FleetConstants& c);

// Applies the training-sample filters in fixed precedence: Overload,
// NegligibleLoad, UserCountJump, AlreadyWellPredicted. recent_users holds the
// last user counts observed for the same VM (the jump filter is skipped with
// fewer than 3). rmse_pre is the model error for this sample before training.
FilterDecision filter_training_sample(const NormalizedSample& s,
                                      const ResourceCapacities& capacity_est,
                                      std::span<const std::int64_t> recent_users,
                                      double rmse_pre,
                                      const FilterConfig& cfg = {});

} // namespace dvts::metrics

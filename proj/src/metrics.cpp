#include "dvts/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace dvts::metrics {

void FleetConstants::validate() const {
    if (fr_max_ghz <= 0.0) throw Error("fr_max must be > 0");
    if (n_max_cores < 1) throw Error("n_max_cores must be >= 1");
    if (ram_max_bytes <= 0.0) throw Error("ram_max must be > 0");
}

double MonitoringSample::total_freq_ghz() const {
    return std::accumulate(core_freqs_ghz.begin(), core_freqs_ghz.end(), 0.0);
}

void MonitoringSample::validate() const {
    if (pct_idle < 0.0 || pct_steal < 0.0 || pct_idle + pct_steal > 100.0 + 1e-9)
        throw Error("idle+steal must lie in [0,100] for vm " + vm_id);
    if (core_freqs_ghz.empty()) throw Error("core_freqs must be non-empty");
    for (double f : core_freqs_ghz)
        if (f <= 0.0) throw Error("core frequencies must be > 0");
    if (users < 0) throw Error("users must be >= 0");
}

double normalize_cpu_capacity(const MonitoringSample& s, const FleetConstants& c) {
    s.validate();
    c.validate();
    const double denom = 100.0 * c.n_max_cores * c.fr_max_ghz;
    const double total = s.total_freq_ghz();
    if (total > c.n_max_cores * c.fr_max_ghz * (1.0 + 1e-9))
        throw Error("sample core frequencies exceed fleet maximum; fleet constants misconfigured");
    return (100.0 - s.pct_steal) * total / denom;
}

double normalize_cpu_load(const MonitoringSample& s, const FleetConstants& c) {
    s.validate();
    c.validate();
    const double denom = 100.0 * c.n_max_cores * c.fr_max_ghz;
    return (100.0 - s.pct_idle - s.pct_steal) * s.total_freq_ghz() / denom;
}

double normalize_ram_load(double active_memory_bytes, const FleetConstants& c) {
    c.validate();
    if (active_memory_bytes <= 0.0) throw Error("active_memory must be > 0");
    if (active_memory_bytes > c.ram_max_bytes * (1.0 + 1e-9))
        throw Error("active_memory exceeds ram_max; fleet constants misconfigured");
    return active_memory_bytes / c.ram_max_bytes;
}

NormalizedSample normalize_sample(const MonitoringSample& s, const FleetConstants& c) {
    NormalizedSample n;
    n.timestamp = s.timestamp;
    n.vm_id = s.vm_id;
    n.users = s.users;
    n.cpu_capacity = normalize_cpu_capacity(s, c);
    n.cpu_load = normalize_cpu_load(s, c);
    n.ram_load = normalize_ram_load(s.active_memory_bytes, c);
    n.disk_util = s.disk_util_pct / 100.0;
    n.net_util = s.net_util_pct / 100.0;
    return n;
}

const char* to_string(FilterReason reason) {
    switch (reason) {
        case FilterReason::Overload: return "overload";
        case FilterReason::NegligibleLoad: return "negligible_load";
        case FilterReason::UserCountJump: return "user_count_jump";
        case FilterReason::AlreadyWellPredicted: return "already_well_predicted";
        case FilterReason::Accepted: return "accepted";
    }
    return "unknown";
}

FilterDecision filter_training_sample(const NormalizedSample& s,
                                      const ResourceCapacities& capacity_est,
                                      std::span<const std::int64_t> recent_users,
                                      double rmse_pre,
                                      const FilterConfig& cfg) {
    const double cpu_rel = capacity_est.cpu_capacity > 0.0 ? s.cpu_load / capacity_est.cpu_capacity : 1.0;
    const double ram_rel = cfg.ram_overload_fleet_norm
                               ? s.ram_load
                               : (capacity_est.ram_capacity > 0.0 ? s.ram_load / capacity_est.ram_capacity : 1.0);
    if (cpu_rel > cfg.overload_threshold || ram_rel > cfg.overload_threshold ||
        s.disk_util > cfg.overload_threshold || s.net_util > cfg.overload_threshold)
        return {false, FilterReason::Overload};

    if (s.users < cfg.min_users || cpu_rel < cfg.min_cpu_utilisation)
        return {false, FilterReason::NegligibleLoad};

    if (recent_users.size() >= 3) {
        double mean = 0.0;
        for (std::int64_t u : recent_users) mean += static_cast<double>(u);
        mean /= static_cast<double>(recent_users.size());
        const double u = static_cast<double>(s.users);
        if (u < cfg.user_jump_low * mean || u > cfg.user_jump_high * mean)
            return {false, FilterReason::UserCountJump};
    }

    if (rmse_pre < cfg.well_predicted_rmse)
        return {false, FilterReason::AlreadyWellPredicted};

    return {true, FilterReason::Accepted};
}

} // namespace dvts::metrics

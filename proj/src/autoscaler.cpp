#include "dvts/autoscaler.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace dvts::autoscaler {

using nlohmann::json;

void PolicyConfig::validate() const {
    if (trigger_threshold <= 0.0 || trigger_threshold >= 1.0)
        throw Error("trigger threshold must lie in (0,1)");
    if (sustain_seconds <= 0.0 || cooldown_seconds <= 0.0 || tick_seconds <= 0.0)
        throw Error("policy durations must be > 0");
    if (kind == PolicyKind::Static && static_type.empty())
        throw Error("static policy needs a vm type");
}

const ActiveVm* FleetState::find(const std::string& vm_id) const {
    for (const auto& vm : vms)
        if (vm.id == vm_id) return &vm;
    return nullptr;
}

std::string ScalingEvent::to_json() const {
    json j{{"time", time},
           {"chosen_type", chosen_type},
           {"reason", reason},
           {"policy", policy == PolicyKind::Dvts ? "dvts" : "static"}};
    if (selection) j["selection"] = json::parse(selection->to_json());
    return j.dump();
}

double vm_relative_utilisation(const metrics::NormalizedSample& s, double ram_capacity,
                               TriggerMetric metric) {
    const double cpu_rel = s.cpu_capacity > 0.0 ? s.cpu_load / s.cpu_capacity : 1.0;
    if (metric == TriggerMetric::CpuOnly) return cpu_rel;
    const double ram_rel = ram_capacity > 0.0 ? s.ram_load / ram_capacity : 1.0;
    return std::max(cpu_rel, ram_rel);
}

bool evaluate_trigger(const PolicyConfig& policy, const FleetState& fleet,
                      std::span<const metrics::NormalizedSample> window, double now,
                      const capacity::Catalog& catalog,
                      const metrics::FleetConstants& fleet_constants) {
    policy.validate();
    if (now - fleet.last_scale_time < policy.cooldown_seconds) return false;

    // per-tick fleet averages over the sustain window
    std::map<double, std::pair<double, int>> ticks; // time -> (sum, count)
    for (const auto& s : window) {
        if (s.timestamp < now - policy.sustain_seconds - 1e-9 || s.timestamp > now + 1e-9) continue;
        double ram_cap = 1.0;
        if (const ActiveVm* vm = fleet.find(s.vm_id))
            ram_cap = capacity::estimate_ram_capacity(capacity::find_type(catalog, vm->vm_type),
                                                      fleet_constants);
        auto& [sum, count] = ticks[s.timestamp];
        sum += vm_relative_utilisation(s, ram_cap, policy.metric);
        ++count;
    }
    const int needed = std::max(1, static_cast<int>(std::lround(policy.sustain_seconds /
                                                                policy.tick_seconds)));
    if (static_cast<int>(ticks.size()) < needed) return false;
    for (const auto& [ts, agg] : ticks)
        if (agg.first / agg.second <= policy.trigger_threshold) return false;
    return true;
}

std::vector<double> recompute_weights(FleetState& fleet, const capacity::Catalog& catalog) {
    std::vector<double> weights(fleet.vms.size(), 0.0);
    double total_ecu = 0.0;
    for (const auto& vm : fleet.vms) total_ecu += capacity::find_type(catalog, vm.vm_type).cpu_spec;
    if (total_ecu <= 0.0) return weights;
    for (std::size_t i = 0; i < fleet.vms.size(); ++i) {
        weights[i] = capacity::find_type(catalog, fleet.vms[i].vm_type).cpu_spec / total_ecu;
        fleet.vms[i].weight = weights[i];
    }
    return weights;
}

std::string choose_type(const PolicyConfig& policy, const selector::SelectionInput& sel_input,
                        ScalingEvent& event_out) {
    event_out.policy = policy.kind;
    if (policy.kind == PolicyKind::Static) {
        event_out.chosen_type = policy.static_type;
        return policy.static_type;
    }
    selector::SelectionResult result = selector::select_vm_type(sel_input);
    event_out.chosen_type = result.chosen_type;
    event_out.selection = std::move(result);
    return event_out.chosen_type;
}

ScalingEvent scale_up(FleetState& fleet, const PolicyConfig& policy,
                      const selector::SelectionInput& sel_input, const capacity::Catalog& catalog,
                      const metrics::FleetConstants& fleet_constants, double now,
                      const std::string& new_vm_id) {
    ScalingEvent event;
    event.time = now;
    const std::string type = choose_type(policy, sel_input, event);

    ActiveVm vm;
    vm.id = new_vm_id;
    vm.vm_type = type;
    vm.joined_at = now;
    auto cap_it = sel_input.capacities.find(type);
    if (cap_it != sel_input.capacities.end()) {
        vm.capacity = cap_it->second;
    } else {
        vm.capacity.ram_capacity =
            capacity::estimate_ram_capacity(capacity::find_type(catalog, type), fleet_constants);
        vm.capacity.cpu_capacity = 1.0;
    }
    if (!fleet.vms.empty() && fleet.vms.front().region)
        vm.region = std::make_shared<htm::HtmRegion>(fleet.vms.front().region->clone());
    fleet.vms.push_back(std::move(vm));
    fleet.last_scale_time = now;
    recompute_weights(fleet, catalog);
    return event;
}

Engine::Engine(Config cfg)
    : cfg_(std::move(cfg)), repo_(cfg_.repository), trainer_(cfg_.ann) {
    cfg_.policy.validate();
    cfg_.fleet_constants.validate();
    for (const auto& t : cfg_.catalog) t.validate();
}

void Engine::add_vm(const std::string& vm_id, const std::string& vm_type, double now) {
    ActiveVm vm;
    vm.id = vm_id;
    vm.vm_type = vm_type;
    vm.joined_at = now;
    vm.capacity.ram_capacity = capacity::estimate_ram_capacity(
        capacity::find_type(cfg_.catalog, vm_type), cfg_.fleet_constants);
    try {
        capacity::EstimateSource src;
        vm.capacity.cpu_capacity = repo_.estimate_cpu_capacity_value(vm_type, cfg_.catalog, &src);
        vm.capacity.source = src;
    } catch (const NoCapacityData&) {
        vm.capacity.cpu_capacity = 1.0;
        vm.capacity.source = capacity::EstimateSource::Extrapolated;
    }
    if (!fleet_.vms.empty() && fleet_.vms.front().region)
        vm.region = std::make_shared<htm::HtmRegion>(fleet_.vms.front().region->clone());
    else
        vm.region = std::make_shared<htm::HtmRegion>(cfg_.htm);
    fleet_.vms.push_back(std::move(vm));
    recompute_weights(fleet_, cfg_.catalog);
    ++vm_counter_;
}

const htm::HtmRegion* Engine::region_of(const std::string& vm_id) const {
    const ActiveVm* vm = fleet_.find(vm_id);
    return vm ? vm->region.get() : nullptr;
}

void Engine::trim_window(double now) {
    const double horizon = now - cfg_.policy.sustain_seconds - 2.0 * cfg_.policy.tick_seconds;
    std::size_t keep_from = 0;
    while (keep_from < window_.size() && window_[keep_from].timestamp < horizon) ++keep_from;
    if (keep_from > 0) window_.erase(window_.begin(), window_.begin() + keep_from);
}

Engine::TickReport Engine::ingest_tick(const std::vector<metrics::MonitoringSample>& samples,
                                       double now) {
    TickReport report;
    report.time = now;
    double util_sum = 0.0;
    int util_count = 0;

    for (const auto& raw : samples) {
        metrics::NormalizedSample ns = metrics::normalize_sample(raw, cfg_.fleet_constants);
        SampleReport sr;
        sr.vm_id = raw.vm_id;

        ActiveVm* vm = nullptr;
        for (auto& candidate : fleet_.vms)
            if (candidate.id == raw.vm_id) vm = &candidate;
        if (!vm) throw Error("sample from unknown vm " + raw.vm_id);

        htm::AnomalyResult anomaly{0.0, false};
        if (vm->region)
            anomaly = vm->region->process_sample(ns.timestamp, static_cast<double>(ns.users),
                                                 ns.cpu_load, ns.ram_load);
        sr.anomaly = anomaly.score;
        sr.htm_warmed_up = anomaly.warmed_up;

        repo_.record({ns.timestamp, raw.vm_type, raw.vm_id, ns.cpu_capacity});

        const double ram_cap = capacity::estimate_ram_capacity(
            capacity::find_type(cfg_.catalog, raw.vm_type), cfg_.fleet_constants);
        metrics::ResourceCapacities caps{ns.cpu_capacity, ram_cap};

        sr.rmse_pre = trainer_.rmse_pre(ns);
        auto& recent = recent_users_[raw.vm_id];
        sr.filter = metrics::filter_training_sample(ns, caps, recent, sr.rmse_pre, cfg_.filter);
        if (sr.filter.accepted) {
            // the first 110 anomaly scores of a region are ignored
            const double effective_anomaly = anomaly.warmed_up ? anomaly.score : 0.0;
            sr.outcome = trainer_.train(ns, effective_anomaly);
            sr.trained = !sr.outcome.filtered;
        }
        recent.push_back(ns.users);
        while (recent.size() > 3) recent.erase(recent.begin());

        util_sum += vm_relative_utilisation(ns, ram_cap, cfg_.policy.metric);
        ++util_count;
        window_.push_back(std::move(ns));
        report.samples.push_back(std::move(sr));
    }

    report.fleet_utilisation = util_count > 0 ? util_sum / util_count : 0.0;
    trim_window(now);
    return report;
}

selector::SelectionInput Engine::build_selection_input() const {
    if (!trainer_.state().has_user_range)
        throw Error("selection requires at least one accepted training sample");
    selector::SelectionInput input;
    input.candidate_types = cfg_.catalog;
    ann::AnnModel snapshot = trainer_.model();
    input.predict = [model = std::move(snapshot)](double users) { return model.predict(users); };
    input.delta = cfg_.selector_delta;
    input.probe_limit = cfg_.selector_probe_limit;
    input.min_users = trainer_.state().min_users;
    input.max_users = trainer_.state().max_users;
    for (const auto& spec : cfg_.catalog)
        input.capacities[spec.name] = repo_.estimate(spec.name, cfg_.catalog, cfg_.fleet_constants);
    return input;
}

std::optional<ScalingEvent> Engine::maybe_scale(double now) {
    if (fleet_.vms.empty()) return std::nullopt;
    if (!evaluate_trigger(cfg_.policy, fleet_, window_, now, cfg_.catalog, cfg_.fleet_constants))
        return std::nullopt;

    ScalingEvent event;
    event.time = now;
    if (cfg_.policy.kind == PolicyKind::Static) {
        event.policy = PolicyKind::Static;
        event.chosen_type = cfg_.policy.static_type;
    } else {
        choose_type(cfg_.policy, build_selection_input(), event);
    }
    fleet_.last_scale_time = now;
    return event;
}

} // namespace dvts::autoscaler

#include "dvts/simenv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace dvts::simenv {

using nlohmann::json;

namespace {

json sample_to_json(const metrics::MonitoringSample& s) {
    return json{{"timestamp", s.timestamp},
                {"vm_id", s.vm_id},
                {"vm_type", s.vm_type},
                {"users", s.users},
                {"pct_idle", s.pct_idle},
                {"pct_steal", s.pct_steal},
                {"core_freqs_ghz", s.core_freqs_ghz},
                {"active_memory_bytes", s.active_memory_bytes},
                {"disk_util_pct", s.disk_util_pct},
                {"net_util_pct", s.net_util_pct}};
}

} // namespace

std::string CostLedger::to_json() const {
    json entries = json::array();
    for (const auto& e : vms)
        entries.push_back(json{{"vm_id", e.vm_id},
                               {"vm_type", e.vm_type},
                               {"start", e.start},
                               {"end", e.end},
                               {"blocks", e.blocks},
                               {"cost", e.cost}});
    return json{{"block_seconds", block_seconds}, {"vms", entries}, {"total_cost", total_cost}}
        .dump(2);
}

Scenario Scenario::compressed() const {
    Scenario s = *this;
    const double c = time_compression;
    if (c <= 0.0) throw Error("time_compression must be > 0");
    if (c == 1.0) return s;
    s.duration_seconds /= c;
    s.tick_seconds /= c;
    s.provisioning_delay_seconds /= c;
    s.workload.step_interval_seconds /= c;
    s.policy.sustain_seconds /= c;
    s.policy.cooldown_seconds /= c;
    s.policy.tick_seconds /= c;
    if (s.app.change) s.app.change->at_seconds /= c;
    s.time_compression = 1.0; // already applied
    return s;
}

std::int64_t generate_workload(const WorkloadProfile& profile, double t) {
    if (t < 0.0) throw Error("workload time must be >= 0");
    const auto steps = static_cast<std::int64_t>(std::floor(t / profile.step_interval_seconds));
    return std::min(profile.max_users, profile.initial_users + profile.step_users * steps);
}

std::vector<std::int64_t> assign_users(std::int64_t total, const std::vector<double>& weights) {
    std::vector<std::int64_t> out(weights.size(), 0);
    if (weights.empty() || total <= 0) return out;
    std::vector<double> fracs(weights.size());
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double quota = static_cast<double>(total) * weights[i];
        out[i] = static_cast<std::int64_t>(std::floor(quota));
        fracs[i] = quota - static_cast<double>(out[i]);
        assigned += out[i];
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&fracs](std::size_t a, std::size_t b) {
        if (fracs[a] != fracs[b]) return fracs[a] > fracs[b];
        return a < b;
    });
    for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++out[order[i % order.size()]];
    return out;
}

metrics::MonitoringSample emit_sample(SimVm& vm, const VmSimProfile& profile, const AppModel& app,
                                      double physical_ram_bytes,
                                      const metrics::FleetConstants& fleet,
                                      std::int64_t assigned_users, double t, double epoch,
                                      double change_at_compressed) {
    metrics::MonitoringSample s;
    s.timestamp = epoch + t;
    s.vm_id = vm.id;
    s.vm_type = vm.vm_type;
    s.users = assigned_users;
    s.core_freqs_ghz = profile.core_freqs_ghz;
    s.disk_util_pct = profile.disk_util_pct;
    s.net_util_pct = profile.net_util_pct;

    const double steal_frac = std::clamp(
        vm.steal_mean + profile.steal_jitter * (2.0 * vm.rng.next_unit() - 1.0), 0.0, 0.95);
    s.pct_steal = steal_frac * 100.0;

    const bool changed = app.change && t >= change_at_compressed;
    const double users = static_cast<double>(assigned_users);

    double ram_demand = app.base_ram_fixed_bytes + app.base_ram_per_user_bytes * users;
    if (changed)
        ram_demand +=
            app.change->ram_fixed_delta_bytes + app.change->ram_per_user_delta_bytes * users;
    s.active_memory_bytes = std::min(physical_ram_bytes, ram_demand);

    const double total_freq = std::accumulate(profile.core_freqs_ghz.begin(),
                                              profile.core_freqs_ghz.end(), 0.0);
    const double denom = fleet.n_max_cores * fleet.fr_max_ghz;
    // normalized capacity available at this instant
    const double cap = (1.0 - steal_frac) * total_freq / denom;

    double demand = app.base_cpu_fixed + app.base_cpu_per_user * users;
    if (changed) demand += app.change->cpu_util_delta * cap;
    if (app.thrash_enabled && ram_demand >= app.thrash_fraction * physical_ram_bytes)
        demand = cap; // swap pressure: the idle time disappears
    const double load = std::min(demand, cap);

    // invert the load normalization to get the reported idle percentage
    const double idle_pct = 100.0 - s.pct_steal - load * 100.0 * denom / total_freq;
    s.pct_idle = std::max(0.0, idle_pct);
    return s;
}

// ---------------------------------------------------------------------------
// scenario serialization

namespace {

json app_to_json(const AppModel& a) {
    json j{{"base_cpu_per_user", a.base_cpu_per_user},
           {"base_cpu_fixed", a.base_cpu_fixed},
           {"base_ram_fixed_bytes", a.base_ram_fixed_bytes},
           {"base_ram_per_user_bytes", a.base_ram_per_user_bytes},
           {"thrash_fraction", a.thrash_fraction},
           {"thrash_enabled", a.thrash_enabled}};
    if (a.change)
        j["change"] = json{{"at_seconds", a.change->at_seconds},
                           {"cpu_util_delta", a.change->cpu_util_delta},
                           {"ram_fixed_delta_bytes", a.change->ram_fixed_delta_bytes},
                           {"ram_per_user_delta_bytes", a.change->ram_per_user_delta_bytes}};
    return j;
}

AppModel app_from_json(const json& j) {
    AppModel a;
    a.base_cpu_per_user = j.at("base_cpu_per_user").get<double>();
    a.base_cpu_fixed = j.value("base_cpu_fixed", 0.0);
    a.base_ram_fixed_bytes = j.at("base_ram_fixed_bytes").get<double>();
    a.base_ram_per_user_bytes = j.at("base_ram_per_user_bytes").get<double>();
    a.thrash_fraction = j.value("thrash_fraction", 0.98);
    a.thrash_enabled = j.value("thrash_enabled", true);
    if (j.contains("change") && !j.at("change").is_null()) {
        AppModel::Change c;
        const json& jc = j.at("change");
        c.at_seconds = jc.at("at_seconds").get<double>();
        c.cpu_util_delta = jc.at("cpu_util_delta").get<double>();
        c.ram_fixed_delta_bytes = jc.at("ram_fixed_delta_bytes").get<double>();
        c.ram_per_user_delta_bytes = jc.at("ram_per_user_delta_bytes").get<double>();
        a.change = c;
    } else {
        a.change.reset();
    }
    return a;
}

} // namespace

std::string Scenario::to_json() const {
    json types = json::array();
    for (const auto& t : catalog)
        types.push_back(json{{"name", t.name},
                             {"cpu_spec", t.cpu_spec},
                             {"ram_bytes", t.ram_bytes},
                             {"cost_per_hour", t.cost_per_hour}});
    json profiles_j;
    for (const auto& [name, p] : profiles)
        profiles_j[name] = json{{"core_freqs_ghz", p.core_freqs_ghz},
                                {"steal_mean_lo", p.steal_mean_lo},
                                {"steal_mean_hi", p.steal_mean_hi},
                                {"steal_jitter", p.steal_jitter},
                                {"disk_util_pct", p.disk_util_pct},
                                {"net_util_pct", p.net_util_pct}};
    json j{{"name", name},
           {"fleet_constants",
            json{{"fr_max_ghz", fleet_constants.fr_max_ghz},
                 {"n_max_cores", fleet_constants.n_max_cores},
                 {"ram_max_bytes", fleet_constants.ram_max_bytes}}},
           {"catalog", types},
           {"profiles", profiles_j},
           {"app", app_to_json(app)},
           {"workload",
            json{{"initial_users", workload.initial_users},
                 {"step_users", workload.step_users},
                 {"step_interval_seconds", workload.step_interval_seconds},
                 {"max_users", workload.max_users}}},
           {"policy",
            json{{"trigger_threshold", policy.trigger_threshold},
                 {"sustain_seconds", policy.sustain_seconds},
                 {"cooldown_seconds", policy.cooldown_seconds},
                 {"tick_seconds", policy.tick_seconds},
                 {"trigger_metric",
                  policy.metric == autoscaler::TriggerMetric::CpuOnly ? "cpu" : "max_cpu_ram"}}},
           {"filter",
            json{{"overload_threshold", filter.overload_threshold},
                 {"min_users", filter.min_users},
                 {"min_cpu_utilisation", filter.min_cpu_utilisation},
                 {"user_jump_low", filter.user_jump_low},
                 {"user_jump_high", filter.user_jump_high},
                 {"well_predicted_rmse", filter.well_predicted_rmse},
                 {"ram_overload_fleet_norm", filter.ram_overload_fleet_norm}}},
           {"ann",
            json{{"hidden_neurons", ann.hidden_neurons},
                 {"user_scale", ann.user_scale},
                 {"seed", ann.seed},
                 {"ideal_lr", ann.ideal_lr},
                 {"ideal_momentum", ann.ideal_momentum}}},
           {"htm",
            json{{"column_count", htm.column_count},
                 {"cells_per_column", htm.cells_per_column},
                 {"rng_seed", htm.rng_seed},
                 {"warmup_samples", htm.warmup_samples}}},
           {"repository",
            json{{"window", repository.window}, {"eq4_literal", repository.eq4_literal}}},
           {"selector", json{{"delta", selector_delta}, {"probe_limit", selector_probe_limit}}},
           {"duration_seconds", duration_seconds},
           {"tick_seconds", tick_seconds},
           {"provisioning_delay_seconds", provisioning_delay_seconds},
           {"time_compression", time_compression},
           {"epoch_seconds", epoch_seconds},
           {"seed", seed},
           {"initial_vm_type", initial_vm_type}};
    return j.dump(2);
}

Scenario Scenario::from_json(const std::string& text) {
    json j = json::parse(text);
    Scenario s;
    s.name = j.value("name", "scenario");
    const json& fc = j.at("fleet_constants");
    s.fleet_constants.fr_max_ghz = fc.at("fr_max_ghz").get<double>();
    s.fleet_constants.n_max_cores = fc.at("n_max_cores").get<int>();
    s.fleet_constants.ram_max_bytes = fc.at("ram_max_bytes").get<double>();
    for (const auto& t : j.at("catalog")) {
        capacity::VmTypeSpec spec;
        spec.name = t.at("name").get<std::string>();
        spec.cpu_spec = t.at("cpu_spec").get<double>();
        spec.ram_bytes = t.at("ram_bytes").get<double>();
        spec.cost_per_hour = t.at("cost_per_hour").get<double>();
        spec.validate();
        s.catalog.push_back(std::move(spec));
    }
    for (const auto& [name, p] : j.at("profiles").items()) {
        VmSimProfile prof;
        prof.core_freqs_ghz = p.at("core_freqs_ghz").get<std::vector<double>>();
        prof.steal_mean_lo = p.at("steal_mean_lo").get<double>();
        prof.steal_mean_hi = p.at("steal_mean_hi").get<double>();
        prof.steal_jitter = p.at("steal_jitter").get<double>();
        prof.disk_util_pct = p.value("disk_util_pct", 2.0);
        prof.net_util_pct = p.value("net_util_pct", 3.0);
        s.profiles[name] = std::move(prof);
    }
    s.app = app_from_json(j.at("app"));
    const json& w = j.at("workload");
    s.workload.initial_users = w.at("initial_users").get<std::int64_t>();
    s.workload.step_users = w.at("step_users").get<std::int64_t>();
    s.workload.step_interval_seconds = w.at("step_interval_seconds").get<double>();
    s.workload.max_users = w.at("max_users").get<std::int64_t>();
    const json& p = j.at("policy");
    s.policy.trigger_threshold = p.at("trigger_threshold").get<double>();
    s.policy.sustain_seconds = p.at("sustain_seconds").get<double>();
    s.policy.cooldown_seconds = p.at("cooldown_seconds").get<double>();
    s.policy.tick_seconds = p.at("tick_seconds").get<double>();
    s.policy.metric = p.value("trigger_metric", std::string("max_cpu_ram")) == "cpu"
                          ? autoscaler::TriggerMetric::CpuOnly
                          : autoscaler::TriggerMetric::MaxCpuRam;
    if (j.contains("filter")) {
        const json& f = j.at("filter");
        s.filter.overload_threshold = f.value("overload_threshold", 0.70);
        s.filter.min_users = f.value("min_users", std::int64_t(25));
        s.filter.min_cpu_utilisation = f.value("min_cpu_utilisation", 0.10);
        s.filter.user_jump_low = f.value("user_jump_low", 0.50);
        s.filter.user_jump_high = f.value("user_jump_high", 1.50);
        s.filter.well_predicted_rmse = f.value("well_predicted_rmse", 0.01);
        s.filter.ram_overload_fleet_norm = f.value("ram_overload_fleet_norm", false);
    }
    if (j.contains("ann")) {
        const json& a = j.at("ann");
        s.ann.hidden_neurons = a.value("hidden_neurons", 250);
        s.ann.user_scale = a.value("user_scale", 10.0);
        s.ann.seed = a.value("seed", std::uint64_t(1));
        s.ann.ideal_lr = a.value("ideal_lr", 0.001);
        s.ann.ideal_momentum = a.value("ideal_momentum", 0.9);
    }
    if (j.contains("htm")) {
        const json& h = j.at("htm");
        s.htm.column_count = h.value("column_count", 2048);
        s.htm.cells_per_column = h.value("cells_per_column", 32);
        s.htm.rng_seed = h.value("rng_seed", std::uint64_t(42));
        s.htm.warmup_samples = h.value("warmup_samples", 110);
    }
    if (j.contains("repository")) {
        s.repository.window = j.at("repository").value("window", 10);
        s.repository.eq4_literal = j.at("repository").value("eq4_literal", false);
    }
    if (j.contains("selector")) {
        s.selector_delta = j.at("selector").value("delta", 5);
        s.selector_probe_limit = j.at("selector").value("probe_limit", std::int64_t(100000));
    }
    s.duration_seconds = j.at("duration_seconds").get<double>();
    s.tick_seconds = j.at("tick_seconds").get<double>();
    s.provisioning_delay_seconds = j.at("provisioning_delay_seconds").get<double>();
    s.time_compression = j.at("time_compression").get<double>();
    s.epoch_seconds = j.value("epoch_seconds", 1454284800.0);
    s.seed = j.at("seed").get<std::uint64_t>();
    s.initial_vm_type = j.at("initial_vm_type").get<std::string>();

    if (s.profiles.size() != s.catalog.size())
        for (const auto& t : s.catalog)
            if (!s.profiles.count(t.name)) throw Error("no sim profile for type " + t.name);
    return s;
}

Scenario Scenario::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scenario file " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

void Scenario::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << to_json() << '\n';
}

Scenario default_scenario() {
    Scenario s;
    s.name = "default";
    s.fleet_constants = {3.5, 1, 3.75 * kGiB};
    s.catalog = {{"m1.small", 1.0, 1.7 * kGiB, 0.058},
                 {"m1.medium", 2.0, 3.75 * kGiB, 0.117},
                 {"m3.medium", 3.0, 3.75 * kGiB, 0.098}};
    s.profiles["m1.small"] = VmSimProfile{{1.20}, 0.10, 0.20, 0.04, 2.0, 3.0};
    s.profiles["m1.medium"] = VmSimProfile{{1.62}, 0.10, 0.20, 0.04, 2.0, 3.0};
    s.profiles["m3.medium"] = VmSimProfile{{1.62}, 0.10, 0.20, 0.04, 2.0, 3.0};
    // ~120 users put an average m1.small instance at its 70% trigger line
    s.app.base_cpu_per_user = 0.70 * 0.2914 / 120.0;
    s.app.base_cpu_fixed = 0.0;
    s.app.base_ram_fixed_bytes = 150.0 * kMiB;
    s.app.base_ram_per_user_bytes = 3.4 * kMiB;
    s.app.change = AppModel::Change{3.5 * 3600.0, 0.10, 1.0 * kGiB, 2.0 * kMiB};
    s.app.thrash_fraction = 0.98;
    s.app.thrash_enabled = true;
    s.workload = {30, 10, 360.0, 400};
    s.policy.trigger_threshold = 0.70;
    s.policy.sustain_seconds = 10.0;
    s.policy.cooldown_seconds = 600.0;
    s.policy.tick_seconds = 5.0;
    s.policy.metric = autoscaler::TriggerMetric::CpuOnly;
    s.duration_seconds = 5.5 * 3600.0;
    s.tick_seconds = 5.0;
    s.provisioning_delay_seconds = 90.0;
    s.time_compression = 60.0;
    s.seed = 1;
    s.initial_vm_type = "m1.small";
    return s;
}

// ---------------------------------------------------------------------------
// experiment driver

namespace {

struct PendingVm {
    double join_at = 0.0;
    std::string vm_id;
    std::string vm_type;
    double requested_at = 0.0;
};

std::string vm_name(int ordinal) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "vm-%03d", ordinal);
    return buf;
}

} // namespace

ExperimentResult run_experiment(const Scenario& scenario_in, const RunSpec& spec) {
    Scenario sc = scenario_in;
    if (spec.seed_override) sc.seed = *spec.seed_override;
    const double change_at_uncompressed =
        sc.app.change ? sc.app.change->at_seconds : std::numeric_limits<double>::infinity();
    sc = sc.compressed();
    const double change_at =
        sc.app.change ? sc.app.change->at_seconds : std::numeric_limits<double>::infinity();
    (void)change_at_uncompressed;

    autoscaler::Engine::Config ecfg;
    ecfg.fleet_constants = sc.fleet_constants;
    ecfg.catalog = sc.catalog;
    ecfg.policy = sc.policy;
    ecfg.policy.kind = spec.kind;
    ecfg.policy.static_type = spec.static_type;
    ecfg.filter = sc.filter;
    ecfg.ann = sc.ann;
    ecfg.ann.seed = derive_seed(sc.seed, 1000);
    ecfg.htm = sc.htm;
    ecfg.htm.rng_seed = derive_seed(sc.seed, 2000);
    ecfg.repository = sc.repository;
    ecfg.selector_delta = sc.selector_delta;
    ecfg.selector_probe_limit = sc.selector_probe_limit;
    autoscaler::Engine engine(std::move(ecfg));

    ExperimentResult result;
    result.policy_label = spec.policy_label();
    result.seed = sc.seed;
    result.ledger.block_seconds = 3600.0 / scenario_in.time_compression;

    const bool write = !spec.out_dir.empty();
    std::ofstream samples_out, events_out;
    if (write) {
        std::filesystem::create_directories(spec.out_dir);
        samples_out.open(spec.out_dir + "/samples.jsonl", std::ios::trunc);
        events_out.open(spec.out_dir + "/events.jsonl", std::ios::trunc);
        if (!samples_out || !events_out) throw Error("cannot open output files in " + spec.out_dir);
    }

    Rng provision_rng(derive_seed(sc.seed, 1));
    std::vector<SimVm> vms;
    std::vector<PendingVm> pending;
    std::vector<BillingEntry> billing;
    int ordinal = 0;

    auto request_vm = [&](const std::string& type, double t_request, double t_join) {
        PendingVm p;
        p.vm_id = vm_name(ordinal++);
        p.vm_type = type;
        p.requested_at = t_request;
        p.join_at = t_join;
        pending.push_back(p);
    };

    auto join_vm = [&](const PendingVm& p, double now) {
        const VmSimProfile& profile = sc.profiles.at(p.vm_type);
        SimVm vm;
        vm.id = p.vm_id;
        vm.vm_type = p.vm_type;
        vm.requested_at = p.requested_at;
        vm.joined_at = now;
        vm.steal_mean = provision_rng.next_range(profile.steal_mean_lo, profile.steal_mean_hi);
        vm.rng = Rng(derive_seed(sc.seed, 100 + static_cast<std::uint64_t>(vms.size())));
        vms.push_back(std::move(vm));
        engine.add_vm(p.vm_id, p.vm_type, now);
        if (write) {
            json j{{"kind", "vm_join"},
                   {"time", now},
                   {"vm_id", p.vm_id},
                   {"vm_type", p.vm_type},
                   {"requested_at", p.requested_at}};
            events_out << j.dump() << '\n';
        }
    };

    // the initial AS VM is up before the workload starts
    request_vm(sc.initial_vm_type, 0.0, 0.0);

    const double dt = sc.tick_seconds;
    for (double t = 0.0; t < sc.duration_seconds; t += dt) {
        for (std::size_t i = 0; i < pending.size();) {
            if (pending[i].join_at <= t + 1e-9) {
                join_vm(pending[i], t);
                pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(i));
            } else {
                ++i;
            }
        }
        if (vms.empty()) continue;

        const std::int64_t total = generate_workload(sc.workload, t);
        std::vector<double> weights(vms.size());
        for (std::size_t i = 0; i < vms.size(); ++i)
            weights[i] = engine.fleet().vms[i].weight;
        const std::vector<std::int64_t> assigned = assign_users(total, weights);

        std::vector<metrics::MonitoringSample> samples;
        samples.reserve(vms.size());
        for (std::size_t i = 0; i < vms.size(); ++i) {
            const VmSimProfile& profile = sc.profiles.at(vms[i].vm_type);
            const double physical_ram =
                capacity::find_type(sc.catalog, vms[i].vm_type).ram_bytes;
            samples.push_back(emit_sample(vms[i], profile, sc.app, physical_ram,
                                          sc.fleet_constants, assigned[i], t, sc.epoch_seconds,
                                          change_at));
            if (write) samples_out << sample_to_json(samples.back()).dump() << '\n';
        }

        try {
            const auto report = engine.ingest_tick(samples, t);
            result.total_samples += static_cast<std::int64_t>(report.samples.size());
            for (const auto& sr : report.samples)
                if (sr.trained) ++result.trained_samples;

            if (auto event = engine.maybe_scale(t)) {
                result.scale_events.push_back(*event);
                if (t < change_at)
                    ++result.provisions_before_change;
                else
                    ++result.provisions_after_change;
                request_vm(event->chosen_type, t, t + sc.provisioning_delay_seconds);
                if (write) {
                    json j = json::parse(event->to_json());
                    j["kind"] = "scale_up";
                    j["vm_id"] = pending.back().vm_id;
                    events_out << j.dump() << '\n';
                }
            }
        } catch (const Error& e) {
            result.abort_reason = e.what();
            if (write) {
                json j{{"kind", "engine_error"}, {"time", t}, {"message", e.what()}};
                events_out << j.dump() << '\n';
            }
            break;
        }
    }

    // hourly-block billing from request time to experiment end
    for (const auto& vm : vms) {
        BillingEntry e;
        e.vm_id = vm.id;
        e.vm_type = vm.vm_type;
        e.start = vm.requested_at;
        e.end = sc.duration_seconds;
        const double runtime = std::max(0.0, e.end - e.start);
        e.blocks = static_cast<int>(std::ceil(runtime / result.ledger.block_seconds));
        if (e.blocks == 0) e.blocks = 1;
        e.cost = e.blocks * capacity::find_type(sc.catalog, vm.vm_type).cost_per_hour;
        result.ledger.total_cost += e.cost;
        billing.push_back(std::move(e));
    }
    // instances still provisioning at the end are billed too
    for (const auto& p : pending) {
        BillingEntry e;
        e.vm_id = p.vm_id;
        e.vm_type = p.vm_type;
        e.start = p.requested_at;
        e.end = sc.duration_seconds;
        e.blocks = std::max(1, static_cast<int>(std::ceil((e.end - e.start) /
                                                          result.ledger.block_seconds)));
        e.cost = e.blocks * capacity::find_type(sc.catalog, p.vm_type).cost_per_hour;
        result.ledger.total_cost += e.cost;
        billing.push_back(std::move(e));
    }
    std::sort(billing.begin(), billing.end(),
              [](const BillingEntry& a, const BillingEntry& b) { return a.vm_id < b.vm_id; });
    result.ledger.vms = std::move(billing);

    if (write) {
        std::ofstream ledger_out(spec.out_dir + "/ledger.json", std::ios::trunc);
        ledger_out << result.ledger.to_json() << '\n';

        std::ofstream summary(spec.out_dir + "/summary.csv", std::ios::trunc);
        summary << "policy,seed,total_cost,vm_count,scale_events,provisions_before_change,"
                   "provisions_after_change,trained_samples,total_samples,aborted\n";
        summary << result.policy_label << ',' << result.seed << ',' << result.ledger.total_cost
                << ',' << result.ledger.vms.size() << ',' << result.scale_events.size() << ','
                << result.provisions_before_change << ',' << result.provisions_after_change << ','
                << result.trained_samples << ',' << result.total_samples << ','
                << (result.abort_reason.empty() ? 0 : 1) << '\n';

        std::ofstream model_out(spec.out_dir + "/model.json", std::ios::trunc);
        model_out << engine.trainer().to_json() << '\n';
        engine.repository().save_jsonl(spec.out_dir + "/repository.jsonl");
        if (!engine.fleet().vms.empty() && engine.fleet().vms.front().region)
            engine.fleet().vms.front().region->save(spec.out_dir + "/htm_first.json");
    }
    return result;
}

} // namespace dvts::simenv

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>

#include "dvts/common.hpp"
#include "dvts/simenv.hpp"

using namespace dvts;
using namespace dvts::simenv;

namespace {

// small, fast scenario for driver mechanics (not the acceptance scenario)
Scenario smoke_scenario() {
    Scenario s = default_scenario();
    s.name = "smoke";
    s.duration_seconds = 1.25 * 3600.0;
    s.htm.column_count = 256;
    s.htm.cells_per_column = 4;
    s.htm.warmup_samples = 50;
    s.ann.hidden_neurons = 64;
    s.time_compression = 60.0;
    if (s.app.change) s.app.change->at_seconds = 0.75 * 3600.0;
    return s;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("workload ramp follows the thirty-plus-ten schedule") {
    WorkloadProfile p{30, 10, 360.0, 400};
    CHECK(generate_workload(p, 0.0) == 30);
    CHECK(generate_workload(p, 359.9) == 30);
    CHECK(generate_workload(p, 360.0) == 40);
    CHECK(generate_workload(p, 6 * 360.0) == 90);
    CHECK(generate_workload(p, 222 * 60.0) == 400);
    CHECK(generate_workload(p, 400 * 60.0) == 400);
}

TEST_CASE("largest remainder apportionment") {
    CHECK(assign_users(100, {1.0}) == std::vector<std::int64_t>{100});
    CHECK(assign_users(100, {0.25, 0.75}) == std::vector<std::int64_t>{25, 75});
    CHECK(assign_users(10, {1.0 / 3.0, 2.0 / 3.0}) == std::vector<std::int64_t>{3, 7});

    SUBCASE("conservation over random weights") {
        Rng rng(5);
        for (int iter = 0; iter < 500; ++iter) {
            const int n = 1 + static_cast<int>(rng.next_below(6));
            std::vector<double> w(n);
            double sum = 0.0;
            for (double& x : w) {
                x = rng.next_range(0.1, 1.0);
                sum += x;
            }
            for (double& x : w) x /= sum;
            const auto total = static_cast<std::int64_t>(rng.next_below(500));
            const auto parts = assign_users(total, w);
            CHECK(std::accumulate(parts.begin(), parts.end(), std::int64_t(0)) == total);
        }
    }
}

TEST_CASE("emitted samples follow the application model") {
    Scenario sc = default_scenario();
    const VmSimProfile& profile = sc.profiles.at("m1.small");
    const double physical = 1.7 * kGiB;
    SimVm vm;
    vm.id = "vm-000";
    vm.vm_type = "m1.small";
    vm.steal_mean = 0.15;
    vm.rng = Rng(3);

    SUBCASE("zero users before the change") {
        const auto s = emit_sample(vm, profile, sc.app, physical, sc.fleet_constants, 0, 100.0,
                                   sc.epoch_seconds, 12600.0);
        CHECK(s.active_memory_bytes == doctest::Approx(sc.app.base_ram_fixed_bytes));
        const double load = metrics::normalize_cpu_load(s, sc.fleet_constants);
        CHECK(load == doctest::Approx(0.0).epsilon(1e-6));
        CHECK(s.users == 0);
    }
    SUBCASE("post-change memory is exactly base plus deltas") {
        const std::int64_t u = 50;
        const auto s = emit_sample(vm, profile, sc.app, 3.75 * kGiB, sc.fleet_constants, u,
                                   13000.0, sc.epoch_seconds, 12600.0);
        const double expected = (sc.app.base_ram_fixed_bytes + 1.0 * kGiB) +
                                (sc.app.base_ram_per_user_bytes + 2.0 * kMiB) * 50.0;
        CHECK(s.active_memory_bytes == doctest::Approx(expected));
    }
    SUBCASE("demand beyond capacity saturates idle at zero") {
        const auto s = emit_sample(vm, profile, sc.app, physical, sc.fleet_constants, 5000, 100.0,
                                   sc.epoch_seconds, 1e18);
        CHECK(s.pct_idle == doctest::Approx(0.0));
        const double load = metrics::normalize_cpu_load(s, sc.fleet_constants);
        const double cap = metrics::normalize_cpu_capacity(s, sc.fleet_constants);
        CHECK(load == doctest::Approx(cap));
    }
    SUBCASE("ram saturation thrashes the cpu") {
        // demand 150MB + 3.4MB*470 = 1.75GB > 0.98 * 1.7GB
        const auto s = emit_sample(vm, profile, sc.app, physical, sc.fleet_constants, 470, 100.0,
                                   sc.epoch_seconds, 1e18);
        CHECK(s.pct_idle == doctest::Approx(0.0));
        CHECK(s.active_memory_bytes == doctest::Approx(physical));
    }
}

TEST_CASE("compression scales every duration together") {
    Scenario sc = default_scenario();
    sc.time_compression = 60.0;
    const Scenario c = sc.compressed();
    CHECK(c.tick_seconds == doctest::Approx(5.0 / 60.0));
    CHECK(c.duration_seconds == doctest::Approx(sc.duration_seconds / 60.0));
    CHECK(c.policy.cooldown_seconds == doctest::Approx(10.0));
    CHECK(c.policy.sustain_seconds == doctest::Approx(10.0 / 60.0));
    CHECK(c.workload.step_interval_seconds == doctest::Approx(6.0));
    CHECK(c.app.change->at_seconds == doctest::Approx(3.5 * 60.0));
    CHECK(c.provisioning_delay_seconds == doctest::Approx(1.5));
    // tick counts are preserved exactly
    CHECK(c.duration_seconds / c.tick_seconds ==
          doctest::Approx(sc.duration_seconds / sc.tick_seconds));
}

TEST_CASE("scenario json round trip") {
    Scenario sc = default_scenario();
    const Scenario back = Scenario::from_json(sc.to_json());
    CHECK(back.catalog.size() == 3);
    CHECK(back.app.base_cpu_per_user == doctest::Approx(sc.app.base_cpu_per_user));
    CHECK(back.workload.max_users == 400);
    CHECK(back.policy.metric == sc.policy.metric);
    CHECK(back.profiles.at("m1.small").core_freqs_ghz == sc.profiles.at("m1.small").core_freqs_ghz);
    CHECK(back.seed == sc.seed);
}

TEST_CASE("experiment driver: conservation, billing and determinism") {
    Scenario sc = smoke_scenario();

    RunSpec spec;
    spec.kind = autoscaler::PolicyKind::Static;
    spec.static_type = "m1.small";

    const ExperimentResult a = run_experiment(sc, spec);
    CHECK(a.abort_reason.empty());
    CHECK(a.total_samples > 0);
    REQUIRE_FALSE(a.ledger.vms.empty());

    SUBCASE("billing recount matches the ledger") {
        double recount = 0.0;
        for (const auto& e : a.ledger.vms) {
            const double runtime = e.end - e.start;
            const int blocks = std::max(1, static_cast<int>(std::ceil(runtime / a.ledger.block_seconds)));
            CHECK(blocks == e.blocks);
            double price = 0.0;
            for (const auto& t : sc.catalog)
                if (t.name == e.vm_type) price = t.cost_per_hour;
            CHECK(e.cost == doctest::Approx(blocks * price));
            recount += e.cost;
        }
        CHECK(recount == doctest::Approx(a.ledger.total_cost));
    }

    SUBCASE("same seed twice is identical; different seed differs somewhere") {
        const ExperimentResult b = run_experiment(sc, spec);
        CHECK(a.ledger.total_cost == b.ledger.total_cost);
        CHECK(a.ledger.vms.size() == b.ledger.vms.size());
        CHECK(a.scale_events.size() == b.scale_events.size());
        for (std::size_t i = 0; i < a.scale_events.size(); ++i)
            CHECK(a.scale_events[i].time == b.scale_events[i].time);
    }

    SUBCASE("scale events are time ordered and respect the cooldown") {
        const double cooldown = sc.policy.cooldown_seconds / sc.time_compression;
        for (std::size_t i = 1; i < a.scale_events.size(); ++i)
            CHECK(a.scale_events[i].time - a.scale_events[i - 1].time >= cooldown - 1e-9);
    }
}

TEST_CASE("experiment outputs are byte-identical across replays") {
    Scenario sc = smoke_scenario();
    const auto tmp = std::filesystem::temp_directory_path() / "dvts_replay_test";
    std::filesystem::remove_all(tmp);

    RunSpec spec;
    spec.kind = autoscaler::PolicyKind::Static;
    spec.static_type = "m3.medium";

    spec.out_dir = (tmp / "run1").string();
    run_experiment(sc, spec);
    spec.out_dir = (tmp / "run2").string();
    run_experiment(sc, spec);

    for (const char* f : {"samples.jsonl", "events.jsonl", "ledger.json", "summary.csv"})
        CHECK(slurp((tmp / "run1" / f).string()) == slurp((tmp / "run2" / f).string()));
    std::filesystem::remove_all(tmp);
}

TEST_CASE("dvts smoke run completes and trains") {
    Scenario sc = smoke_scenario();
    RunSpec spec;
    spec.kind = autoscaler::PolicyKind::Dvts;
    const ExperimentResult r = run_experiment(sc, spec);
    CHECK(r.abort_reason.empty());
    CHECK(r.trained_samples > 50);
    CHECK(r.ledger.vms.front().vm_type == "m1.small"); // the initial AS VM
}

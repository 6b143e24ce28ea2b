#include <doctest.h>

#include <vector>

#include "dvts/common.hpp"
#include "dvts/metrics.hpp"

using namespace dvts;
using namespace dvts::metrics;

namespace {

MonitoringSample sample(double idle, double steal, std::vector<double> freqs) {
    MonitoringSample s;
    s.vm_id = "vm-000";
    s.vm_type = "m1.small";
    s.users = 100;
    s.pct_idle = idle;
    s.pct_steal = steal;
    s.core_freqs_ghz = std::move(freqs);
    s.active_memory_bytes = 1.0 * kGiB;
    return s;
}

NormalizedSample norm(std::int64_t users, double cpu_cap, double cpu_load, double ram_load) {
    NormalizedSample n;
    n.vm_id = "vm-000";
    n.users = users;
    n.cpu_capacity = cpu_cap;
    n.cpu_load = cpu_load;
    n.ram_load = ram_load;
    return n;
}

} // namespace

TEST_CASE("cpu capacity normalization") {
    FleetConstants one_core{3.5, 1, 3.75 * kGiB};
    CHECK(normalize_cpu_capacity(sample(0, 0, {3.5}), one_core) == doctest::Approx(1.0));
    CHECK(normalize_cpu_capacity(sample(0, 100, {3.5}), one_core) == doctest::Approx(0.0));

    FleetConstants two_cores{3.5, 2, 3.75 * kGiB};
    CHECK(normalize_cpu_capacity(sample(0, 50, {2.8}), two_cores) == doctest::Approx(0.2));
}

TEST_CASE("cpu capacity rejects misconfigured fleet constants") {
    FleetConstants c{3.5, 1, 3.75 * kGiB};
    CHECK_THROWS_AS(normalize_cpu_capacity(sample(0, 0, {3.5, 3.5}), c), Error);
}

TEST_CASE("cpu load normalization") {
    FleetConstants one_core{3.5, 1, 3.75 * kGiB};
    CHECK(normalize_cpu_load(sample(100, 0, {3.5}), one_core) == doctest::Approx(0.0));
    CHECK(normalize_cpu_load(sample(0, 0, {3.5}), one_core) == doctest::Approx(1.0));

    FleetConstants two_cores{3.5, 2, 3.75 * kGiB};
    CHECK(normalize_cpu_load(sample(30, 20, {2.8}), two_cores) == doctest::Approx(0.2));
}

TEST_CASE("ram load normalization") {
    FleetConstants c{3.5, 1, 3.75 * kGiB};
    CHECK(normalize_ram_load(3.75 * kGiB, c) == doctest::Approx(1.0));
    CHECK(normalize_ram_load(1.875 * kGiB, c) == doctest::Approx(0.5));
    CHECK(normalize_ram_load(0.85 * kGiB, c) == doctest::Approx(0.85 / 3.75));
    CHECK_THROWS_AS(normalize_ram_load(4.0 * kGiB, c), Error);
    CHECK_THROWS_AS(normalize_ram_load(0.0, c), Error);
}

TEST_CASE("normalized outputs stay in range over random valid samples") {
    FleetConstants c{3.5, 2, 3.75 * kGiB};
    Rng rng(7);
    for (int i = 0; i < 20000; ++i) {
        const double steal = rng.next_range(0.0, 100.0);
        const double idle = rng.next_range(0.0, 100.0 - steal);
        MonitoringSample s = sample(idle, steal, {rng.next_range(0.1, 3.5), rng.next_range(0.1, 3.5)});
        s.active_memory_bytes = rng.next_range(1.0, 3.75 * kGiB);
        const double cap = normalize_cpu_capacity(s, c);
        const double load = normalize_cpu_load(s, c);
        const double ram = normalize_ram_load(s.active_memory_bytes, c);
        REQUIRE(cap >= 0.0);
        REQUIRE(cap <= 1.0);
        REQUIRE(load >= 0.0);
        REQUIRE(load <= cap + 1e-12);
        REQUIRE(ram >= 0.0);
        REQUIRE(ram <= 1.0);
    }
}

TEST_CASE("normalization is monotone in steal and idle") {
    FleetConstants c{3.5, 1, 3.75 * kGiB};
    double prev_cap = 2.0, prev_load = 2.0;
    for (double steal = 0.0; steal <= 60.0; steal += 10.0) {
        const double cap = normalize_cpu_capacity(sample(20, steal, {3.0}), c);
        const double load = normalize_cpu_load(sample(20, steal, {3.0}), c);
        CHECK(cap < prev_cap);
        CHECK(load < prev_load);
        prev_cap = cap;
        prev_load = load;
    }
    prev_load = 2.0;
    for (double idle = 0.0; idle <= 60.0; idle += 10.0) {
        const double load = normalize_cpu_load(sample(idle, 10, {3.0}), c);
        CHECK(load < prev_load);
        prev_load = load;
    }
}

TEST_CASE("training sample filters") {
    ResourceCapacities caps{0.5, 0.5};
    const std::vector<std::int64_t> recent{100, 100, 100};

    SUBCASE("negligible load below 25 users") {
        auto d = filter_training_sample(norm(24, 0.5, 0.2, 0.1), caps, recent, 0.05);
        CHECK_FALSE(d.accepted);
        CHECK(d.reason == FilterReason::NegligibleLoad);
    }
    SUBCASE("negligible load below 10% cpu") {
        auto d = filter_training_sample(norm(100, 0.5, 0.04, 0.1), caps, recent, 0.05);
        CHECK(d.reason == FilterReason::NegligibleLoad);
    }
    SUBCASE("user count jump beyond 150% of recent mean") {
        auto d = filter_training_sample(norm(300, 0.5, 0.2, 0.1), caps, recent, 0.05);
        CHECK(d.reason == FilterReason::UserCountJump);
    }
    SUBCASE("user count drop below 50% of recent mean") {
        auto d = filter_training_sample(norm(49, 0.5, 0.2, 0.1), caps, recent, 0.05);
        CHECK(d.reason == FilterReason::UserCountJump);
    }
    SUBCASE("jump filter skipped with short history") {
        const std::vector<std::int64_t> two{100, 100};
        auto d = filter_training_sample(norm(300, 0.5, 0.2, 0.1), caps, two, 0.05);
        CHECK(d.accepted);
    }
    SUBCASE("overload on any resource") {
        auto d = filter_training_sample(norm(100, 0.5, 0.4, 0.1), caps, recent, 0.05);
        CHECK(d.reason == FilterReason::Overload); // cpu 0.4/0.5 = 80%
        d = filter_training_sample(norm(100, 0.5, 0.2, 0.4), caps, recent, 0.05);
        CHECK(d.reason == FilterReason::Overload); // ram 0.4/0.5 = 80%
        NormalizedSample disky = norm(100, 0.5, 0.2, 0.1);
        disky.disk_util = 0.8;
        CHECK(filter_training_sample(disky, caps, recent, 0.05).reason == FilterReason::Overload);
        NormalizedSample netty = norm(100, 0.5, 0.2, 0.1);
        netty.net_util = 0.8;
        CHECK(filter_training_sample(netty, caps, recent, 0.05).reason == FilterReason::Overload);
    }
    SUBCASE("overload precedence beats negligible load") {
        auto d = filter_training_sample(norm(10, 0.5, 0.4, 0.1), caps, recent, 0.05);
        CHECK(d.reason == FilterReason::Overload);
    }
    SUBCASE("already well predicted") {
        auto d = filter_training_sample(norm(100, 0.5, 0.2, 0.1), caps, recent, 0.009);
        CHECK(d.reason == FilterReason::AlreadyWellPredicted);
    }
    SUBCASE("accepted when every threshold is satisfied") {
        auto d = filter_training_sample(norm(100, 0.5, 0.2, 0.1), caps, recent, 0.05);
        CHECK(d.accepted);
        CHECK(d.reason == FilterReason::Accepted);
    }
    SUBCASE("pure function of its arguments") {
        auto a = filter_training_sample(norm(100, 0.5, 0.2, 0.1), caps, recent, 0.05);
        auto b = filter_training_sample(norm(100, 0.5, 0.2, 0.1), caps, recent, 0.05);
        CHECK(a.accepted == b.accepted);
        CHECK(a.reason == b.reason);
    }
    SUBCASE("fleet-norm ram mode uses ram_load directly") {
        FilterConfig cfg;
        cfg.ram_overload_fleet_norm = true;
        auto d = filter_training_sample(norm(100, 0.5, 0.2, 0.4), caps, recent, 0.05, cfg);
        CHECK(d.accepted); // 0.4 fleet-norm is below 0.7 even though 0.4/0.5 = 80%
    }
}

TEST_CASE("normalize_sample carries disk and net through as ratios") {
    FleetConstants c{3.5, 1, 3.75 * kGiB};
    MonitoringSample s = sample(50, 10, {3.0});
    s.disk_util_pct = 12.0;
    s.net_util_pct = 34.0;
    NormalizedSample n = normalize_sample(s, c);
    CHECK(n.disk_util == doctest::Approx(0.12));
    CHECK(n.net_util == doctest::Approx(0.34));
    CHECK(n.users == 100);
    CHECK(n.cpu_load <= n.cpu_capacity);
}

#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "dvts/capacity.hpp"
#include "dvts/common.hpp"

using namespace dvts;
using namespace dvts::capacity;

namespace {

Catalog table1() {
    return {{"m1.small", 1.0, 1.7 * kGiB, 0.058},
            {"m1.medium", 2.0, 3.75 * kGiB, 0.117},
            {"m3.medium", 3.0, 3.75 * kGiB, 0.098}};
}

CapacityRecord rec(double t, const std::string& type, double cap) {
    return {t, type, "vm-" + type, cap};
}

} // namespace

TEST_CASE("measured estimate is the mean of the most recent ten records") {
    CapacityRepository repo;
    Catalog cat = table1();

    SUBCASE("single record") {
        repo.record(rec(0, "m1.small", 0.3));
        EstimateSource src;
        CHECK(repo.estimate_cpu_capacity_value("m1.small", cat, &src) == doctest::Approx(0.3));
        CHECK(src == EstimateSource::Measured);
    }
    SUBCASE("ten identical records") {
        for (int i = 0; i < 10; ++i) repo.record(rec(i, "m1.small", 0.3));
        CHECK(repo.estimate_cpu_capacity_value("m1.small", cat) == doctest::Approx(0.3));
    }
    SUBCASE("mean of mixed last ten") {
        for (int i = 0; i < 5; ++i) repo.record(rec(i, "m1.small", 0.2));
        for (int i = 5; i < 10; ++i) repo.record(rec(i, "m1.small", 0.4));
        CHECK(repo.estimate_cpu_capacity_value("m1.small", cat) == doctest::Approx(0.3));
    }
    SUBCASE("fewer than ten uses all available") {
        repo.record(rec(0, "m1.small", 0.2));
        repo.record(rec(1, "m1.small", 0.3));
        repo.record(rec(2, "m1.small", 0.4));
        CHECK(repo.estimate_cpu_capacity_value("m1.small", cat) == doctest::Approx(0.3));
    }
    SUBCASE("older records beyond the window do not matter") {
        for (int i = 0; i < 50; ++i) repo.record(rec(i, "m1.small", 0.9));
        for (int i = 50; i < 60; ++i) repo.record(rec(i, "m1.small", 0.25));
        CHECK(repo.estimate_cpu_capacity_value("m1.small", cat) == doctest::Approx(0.25));
    }
}

TEST_CASE("extrapolation scales the per-unit average by the target spec") {
    CapacityRepository repo;
    Catalog cat = table1();
    repo.record(rec(0, "m1.small", 0.10));

    EstimateSource src;
    const double est = repo.estimate_cpu_capacity_value("m3.medium", cat, &src);
    CHECK(est == doctest::Approx(0.30));
    CHECK(src == EstimateSource::Extrapolated);
}

TEST_CASE("literal published formula divides by the target spec instead") {
    CapacityRepository repo({10, true});
    Catalog cat = table1();
    repo.record(rec(0, "m1.small", 0.10));
    // 0.10 * 1 / 3 under the literal form: bigger types come out smaller
    CHECK(repo.estimate_cpu_capacity_value("m3.medium", cat) == doctest::Approx(0.10 / 3.0));
}

TEST_CASE("empty repository raises NoCapacityData") {
    CapacityRepository repo;
    CHECK_THROWS_AS(repo.estimate_cpu_capacity_value("m1.small", table1()), NoCapacityData);
}

TEST_CASE("extrapolation consistency under proportional capacities") {
    // capacities exactly c * spec for every measured type -> extrapolation
    // returns c * spec(target) for any unseen type
    Rng rng(11);
    for (int iter = 0; iter < 200; ++iter) {
        const double c = rng.next_range(0.01, 0.3);
        Catalog cat = table1();
        CapacityRepository repo;
        repo.record(rec(0, "m1.small", c * 1.0));
        repo.record(rec(1, "m1.medium", c * 2.0));
        const double est = repo.estimate_cpu_capacity_value("m3.medium", cat);
        REQUIRE(est == doctest::Approx(c * 3.0).epsilon(1e-9));
    }
}

TEST_CASE("ram capacity comes straight from the provider spec") {
    metrics::FleetConstants fleet{3.5, 1, 3.75 * kGiB};
    Catalog cat = table1();
    CHECK(estimate_ram_capacity(find_type(cat, "m1.small"), fleet) == doctest::Approx(1.7 / 3.75));
    CHECK(estimate_ram_capacity(find_type(cat, "m3.medium"), fleet) == doctest::Approx(1.0));
    CHECK(estimate_ram_capacity(find_type(cat, "m1.medium"), fleet) == doctest::Approx(1.0));
}

TEST_CASE("estimate() bundles cpu and ram with the source tag") {
    CapacityRepository repo;
    Catalog cat = table1();
    metrics::FleetConstants fleet{3.5, 1, 3.75 * kGiB};
    repo.record(rec(0, "m1.small", 0.25));
    CapacityEstimate m = repo.estimate("m1.small", cat, fleet);
    CHECK(m.source == EstimateSource::Measured);
    CHECK(m.cpu_capacity == doctest::Approx(0.25));
    CHECK(m.ram_capacity == doctest::Approx(1.7 / 3.75));
    CapacityEstimate x = repo.estimate("m1.medium", cat, fleet);
    CHECK(x.source == EstimateSource::Extrapolated);
    CHECK(x.cpu_capacity == doctest::Approx(0.50));
}

TEST_CASE("jsonl round trip preserves records and estimates") {
    const std::string path = (std::filesystem::temp_directory_path() / "dvts_repo_test.jsonl").string();
    {
        CapacityRepository repo;
        for (int i = 0; i < 12; ++i) repo.record(rec(i, "m1.small", 0.2 + 0.01 * i));
        repo.record(rec(100, "m3.medium", 0.4));
        repo.save_jsonl(path);
    }
    CapacityRepository loaded = CapacityRepository::load_jsonl(path);
    CHECK(loaded.size() == 13);
    CHECK(loaded.estimate_cpu_capacity_value("m3.medium", table1()) == doctest::Approx(0.4));
    // mean of records 2..11: 0.22 + ... + 0.31
    CHECK(loaded.estimate_cpu_capacity_value("m1.small", table1()) == doctest::Approx(0.265));
    std::remove(path.c_str());
}

TEST_CASE("invalid records are rejected") {
    CapacityRepository repo;
    CHECK_THROWS_AS(repo.record({0, "m1.small", "vm", 0.0}), Error);
    CHECK_THROWS_AS(repo.record({0, "m1.small", "vm", 1.5}), Error);
    CHECK_THROWS_AS(repo.record({0, "", "vm", 0.5}), Error);
}

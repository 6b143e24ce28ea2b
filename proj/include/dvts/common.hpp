#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dvts {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Empty capacity repository and no measured type to extrapolate from.
struct NoCapacityData : Error {
    NoCapacityData() : Error("capacity repository is empty") {}
};

// Every candidate VM type fails its first probe in the selection loop.
struct SelectionInfeasible : Error {
    SelectionInfeasible() : Error("no candidate VM type can serve the minimum user count") {}
};

// xorshift-based generator with a portable uniform mapping. std::mt19937 plus
// std::uniform_real_distribution is implementation-defined, which would break
// byte-identical replays across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

    std::uint64_t next_u64() {
        std::uint64_t x = state_;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        state_ = x;
        return x * 0x2545f4914f6cdd1dULL;
    }

    // uniform in [0,1)
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo,hi)
    double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // uniform integer in [0,n)
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    std::uint64_t state() const { return state_; }
    void restore(std::uint64_t s) { state_ = s ? s : 0x9e3779b97f4a7c15ULL; }

private:
    std::uint64_t state_;
};

// Stable derivation of per-component seeds from an experiment seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t x = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x ? x : 1;
}

constexpr double kGiB = 1024.0 * 1024.0 * 1024.0;
constexpr double kMiB = 1024.0 * 1024.0;

} // namespace dvts

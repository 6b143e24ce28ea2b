#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dvts/common.hpp"
#include "dvts/metrics.hpp"

namespace dvts::capacity {

// One measured normalized CPU capacity of a concrete VM instance.
struct CapacityRecord {
    double time = 0.0;
    std::string vm_type;
    std::string vm_id;
    double cpu_capacity_norm = 0.0; // (0,1]

    void validate() const;
};

// Provider-declared definition of a VM type (Table-1 style).
struct VmTypeSpec {
    std::string name;
    double cpu_spec = 1.0; // ECU-like compute units
    double ram_bytes = 0.0;
    double cost_per_hour = 0.0;

    void validate() const;
};

using Catalog = std::vector<VmTypeSpec>;

const VmTypeSpec& find_type(const Catalog& catalog, const std::string& name);

enum class EstimateSource { Measured, Extrapolated };

struct CapacityEstimate {
    double cpu_capacity = 0.0; // (0,1]
    double ram_capacity = 0.0; // (0,1]
    EstimateSource source = EstimateSource::Measured;
};

// Append-only store of capacity measurements with per-type retrieval. The
// mean of the most recent `window` records of a type is its measured
// capacity; unseen types are extrapolated from compute-unit specs (the
// corrected form scales a per-unit average by the target's spec; the literal
// published form is kept behind `eq4_literal` for fidelity experiments).
class CapacityRepository {
public:
    struct Options {
        int window = 10;
        bool eq4_literal = false;
    };

    CapacityRepository() : opts_{10, false} {}
    explicit CapacityRepository(Options opts) : opts_(opts) {}

    void record(const CapacityRecord& r);

    std::size_t size() const { return total_; }
    bool empty() const { return total_ == 0; }
    bool has_type(const std::string& vm_type) const;
    const std::vector<CapacityRecord>& records_for(const std::string& vm_type) const;

    // Mean of the most recent min(window, count) records for the type, or
    // nullopt when the type has never been measured.
    std::optional<double> measured_cpu_capacity(const std::string& vm_type) const;

    double estimate_cpu_capacity_value(const std::string& vm_type, const Catalog& catalog,
                                       EstimateSource* source = nullptr) const;

    CapacityEstimate estimate(const std::string& vm_type, const Catalog& catalog,
                              const metrics::FleetConstants& fleet) const;

    // JSON-lines persistence, one CapacityRecord per line.
    void save_jsonl(const std::string& path) const;
    static CapacityRepository load_jsonl(const std::string& path, Options opts = Options{10, false});

    const Options& options() const { return opts_; }
    void set_options(Options opts) { opts_ = opts; }

private:
    Options opts_;
    std::map<std::string, std::vector<CapacityRecord>> by_type_;
    std::size_t total_ = 0;
};

double estimate_ram_capacity(const VmTypeSpec& spec, const metrics::FleetConstants& fleet);

} // namespace dvts::capacity

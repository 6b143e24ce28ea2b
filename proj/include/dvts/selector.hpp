#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dvts/ann.hpp"
#include "dvts/capacity.hpp"
#include "dvts/common.hpp"

namespace dvts::selector {

using PredictFn = std::function<ann::Prediction(double users)>;

struct SelectionInput {
    capacity::Catalog candidate_types;
    PredictFn predict; // trained ANN forward pass
    int delta = 5;
    std::int64_t min_users = 0;
    std::int64_t max_users = 0;
    std::map<std::string, capacity::CapacityEstimate> capacities; // per type name
    std::int64_t probe_limit = 100000;
};

struct TypeAssessment {
    std::string vm_type;
    std::int64_t user_capacity = 0; // 0 when the first probe already fails
    double cost_per_user = 0.0;     // +inf when user_capacity == 0
    double cpu_capacity = 0.0;
    double ram_capacity = 0.0;
    capacity::EstimateSource capacity_source = capacity::EstimateSource::Measured;
};

struct SelectionResult {
    std::string chosen_type;
    std::vector<TypeAssessment> table;

    std::string to_json() const;
};

// Resource utilisation estimate for n users: the ANN inside the trained
// range, linear extrapolation from the [minU, maxU] endpoints beyond it.
// Outputs are clamped to [0,1].
ann::Prediction predict_utilisation(const PredictFn& predict, std::int64_t n,
                                    std::int64_t min_users, std::int64_t max_users);

SelectionResult select_vm_type(const SelectionInput& input);

// Test oracle: exhaustive step-1 scan with no early exit; returns the largest
// passing n in [minU, probe_limit].
SelectionResult select_vm_type_bruteforce(const SelectionInput& input);

} // namespace dvts::selector

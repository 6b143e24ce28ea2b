#include "dvts/selector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace dvts::selector {

using nlohmann::json;

ann::Prediction predict_utilisation(const PredictFn& predict, std::int64_t n,
                                    std::int64_t min_users, std::int64_t max_users) {
    auto clamp01 = [](ann::Prediction p) {
        p.cpu = std::clamp(p.cpu, 0.0, 1.0);
        p.ram = std::clamp(p.ram, 0.0, 1.0);
        return p;
    };

    if (n < max_users) return clamp01(predict(static_cast<double>(n)));
    if (max_users == min_users) return clamp01(predict(static_cast<double>(max_users)));

    const ann::Prediction at_min = predict(static_cast<double>(min_users));
    const ann::Prediction at_max = predict(static_cast<double>(max_users));
    const double span = static_cast<double>(max_users - min_users);
    const double cpu_per_user = (at_max.cpu - at_min.cpu) / span;
    const double ram_per_user = (at_max.ram - at_min.ram) / span;
    const double beyond = static_cast<double>(n - max_users);
    return clamp01({at_max.cpu + cpu_per_user * beyond, at_max.ram + ram_per_user * beyond});
}

namespace {

TypeAssessment assess_type(const capacity::VmTypeSpec& spec, const SelectionInput& input,
                           bool step_one_no_early_exit) {
    TypeAssessment a;
    a.vm_type = spec.name;
    const auto cap_it = input.capacities.find(spec.name);
    if (cap_it == input.capacities.end())
        throw Error("no capacity estimate for candidate type " + spec.name);
    a.cpu_capacity = cap_it->second.cpu_capacity;
    a.ram_capacity = cap_it->second.ram_capacity;
    a.capacity_source = cap_it->second.source;

    const std::int64_t step = step_one_no_early_exit ? 1 : std::max(1, input.delta);
    std::int64_t user_capacity = 0;
    for (std::int64_t n = input.min_users; n <= input.probe_limit; n += step) {
        const ann::Prediction p =
            predict_utilisation(input.predict, n, input.min_users, input.max_users);
        const bool fits = p.cpu < a.cpu_capacity && p.ram < a.ram_capacity;
        if (fits)
            user_capacity = n;
        else if (!step_one_no_early_exit)
            break;
    }
    a.user_capacity = user_capacity;
    a.cost_per_user = user_capacity > 0 ? spec.cost_per_hour / static_cast<double>(user_capacity)
                                        : std::numeric_limits<double>::infinity();
    return a;
}

SelectionResult run_selection(const SelectionInput& input, bool brute) {
    if (input.candidate_types.empty()) throw Error("no candidate VM types");
    if (input.min_users > input.max_users) throw Error("min_users must be <= max_users");
    if (!input.predict) throw Error("selection needs a prediction function");

    SelectionResult result;
    const capacity::VmTypeSpec* best = nullptr;
    double best_cost = std::numeric_limits<double>::infinity();
    for (const auto& spec : input.candidate_types) {
        spec.validate();
        TypeAssessment a = assess_type(spec, input, brute);
        if (a.user_capacity > 0) {
            const bool wins =
                !best || a.cost_per_user < best_cost ||
                (a.cost_per_user == best_cost &&
                 (spec.cost_per_hour < best->cost_per_hour ||
                  (spec.cost_per_hour == best->cost_per_hour && spec.name < best->name)));
            if (wins) {
                best = &spec;
                best_cost = a.cost_per_user;
            }
        }
        result.table.push_back(std::move(a));
    }
    if (!best) throw SelectionInfeasible();
    result.chosen_type = best->name;
    return result;
}

} // namespace

SelectionResult select_vm_type(const SelectionInput& input) { return run_selection(input, false); }

SelectionResult select_vm_type_bruteforce(const SelectionInput& input) {
    return run_selection(input, true);
}

std::string SelectionResult::to_json() const {
    json rows = json::array();
    for (const auto& a : table) {
        json row{{"vm_type", a.vm_type},
                 {"user_capacity", a.user_capacity},
                 {"cpu_capacity", a.cpu_capacity},
                 {"ram_capacity", a.ram_capacity},
                 {"capacity_source",
                  a.capacity_source == capacity::EstimateSource::Measured ? "measured"
                                                                          : "extrapolated"}};
        if (std::isfinite(a.cost_per_user))
            row["cost_per_user"] = a.cost_per_user;
        else
            row["cost_per_user"] = nullptr;
        rows.push_back(std::move(row));
    }
    return json{{"chosen_type", chosen_type}, {"table", rows}}.dump();
}

} // namespace dvts::selector

#include "dvts/capacity.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

namespace dvts::capacity {

using nlohmann::json;

void CapacityRecord::validate() const {
    if (cpu_capacity_norm <= 0.0 || cpu_capacity_norm > 1.0 + 1e-9)
        throw Error("cpu_capacity_norm must lie in (0,1]");
    if (vm_type.empty() || vm_id.empty()) throw Error("capacity record needs vm_type and vm_id");
}

void VmTypeSpec::validate() const {
    if (name.empty()) throw Error("vm type needs a name");
    if (cpu_spec <= 0.0) throw Error("cpu_spec must be > 0 for " + name);
    if (ram_bytes <= 0.0) throw Error("ram must be > 0 for " + name);
    if (cost_per_hour <= 0.0) throw Error("cost_per_hour must be > 0 for " + name);
}

const VmTypeSpec& find_type(const Catalog& catalog, const std::string& name) {
    for (const auto& t : catalog)
        if (t.name == name) return t;
    throw Error("vm type not in catalog: " + name);
}

void CapacityRepository::record(const CapacityRecord& r) {
    r.validate();
    by_type_[r.vm_type].push_back(r);
    ++total_;
}

bool CapacityRepository::has_type(const std::string& vm_type) const {
    auto it = by_type_.find(vm_type);
    return it != by_type_.end() && !it->second.empty();
}

const std::vector<CapacityRecord>& CapacityRepository::records_for(const std::string& vm_type) const {
    static const std::vector<CapacityRecord> kEmpty;
    auto it = by_type_.find(vm_type);
    return it == by_type_.end() ? kEmpty : it->second;
}

std::optional<double> CapacityRepository::measured_cpu_capacity(const std::string& vm_type) const {
    auto it = by_type_.find(vm_type);
    if (it == by_type_.end() || it->second.empty()) return std::nullopt;
    const auto& recs = it->second;
    const std::size_t n = std::min<std::size_t>(recs.size(), static_cast<std::size_t>(opts_.window));
    double sum = 0.0;
    for (std::size_t i = recs.size() - n; i < recs.size(); ++i) sum += recs[i].cpu_capacity_norm;
    return sum / static_cast<double>(n);
}

double CapacityRepository::estimate_cpu_capacity_value(const std::string& vm_type,
                                                       const Catalog& catalog,
                                                       EstimateSource* source) const {
    const VmTypeSpec& target = find_type(catalog, vm_type);
    if (auto measured = measured_cpu_capacity(vm_type)) {
        if (source) *source = EstimateSource::Measured;
        return *measured;
    }
    if (empty()) throw NoCapacityData();

    // Average over the set of measured types V.
    double acc = 0.0;
    std::size_t n_types = 0;
    for (const auto& [type_name, recs] : by_type_) {
        if (recs.empty()) continue;
        const VmTypeSpec& spec = find_type(catalog, type_name);
        const double cap = *measured_cpu_capacity(type_name);
        if (opts_.eq4_literal)
            acc += cap * spec.cpu_spec / target.cpu_spec;
        else
            acc += cap / spec.cpu_spec * target.cpu_spec;
        ++n_types;
    }
    if (n_types == 0) throw NoCapacityData();
    if (source) *source = EstimateSource::Extrapolated;
    return acc / static_cast<double>(n_types);
}

CapacityEstimate CapacityRepository::estimate(const std::string& vm_type, const Catalog& catalog,
                                              const metrics::FleetConstants& fleet) const {
    CapacityEstimate est;
    est.cpu_capacity = estimate_cpu_capacity_value(vm_type, catalog, &est.source);
    est.ram_capacity = estimate_ram_capacity(find_type(catalog, vm_type), fleet);
    return est;
}

void CapacityRepository::save_jsonl(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open " + path + " for writing");
    // flatten in time order across types
    std::vector<const CapacityRecord*> all;
    all.reserve(total_);
    for (const auto& [_, recs] : by_type_)
        for (const auto& r : recs) all.push_back(&r);
    std::sort(all.begin(), all.end(), [](const CapacityRecord* a, const CapacityRecord* b) {
        if (a->time != b->time) return a->time < b->time;
        if (a->vm_id != b->vm_id) return a->vm_id < b->vm_id;
        return a->vm_type < b->vm_type;
    });
    for (const CapacityRecord* r : all) {
        json j{{"time", r->time},
               {"vm_type", r->vm_type},
               {"vm_id", r->vm_id},
               {"cpu_capacity_norm", r->cpu_capacity_norm}};
        out << j.dump() << '\n';
    }
}

CapacityRepository CapacityRepository::load_jsonl(const std::string& path, Options opts) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    CapacityRepository repo(opts);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        CapacityRecord r;
        r.time = j.at("time").get<double>();
        r.vm_type = j.at("vm_type").get<std::string>();
        r.vm_id = j.at("vm_id").get<std::string>();
        r.cpu_capacity_norm = j.at("cpu_capacity_norm").get<double>();
        repo.record(r);
    }
    return repo;
}

double estimate_ram_capacity(const VmTypeSpec& spec, const metrics::FleetConstants& fleet) {
    spec.validate();
    fleet.validate();
    return spec.ram_bytes / fleet.ram_max_bytes;
}

} // namespace dvts::capacity

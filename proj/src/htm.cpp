#include "dvts/htm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace dvts::htm {

using nlohmann::json;

void ScalarEncoderConfig::validate() const {
    if (active_bits <= 0 || active_bits >= total_bits)
        throw Error("encoder needs 0 < active_bits < total_bits");
    if (min_value >= max_value) throw Error("encoder needs min < max");
}

void HtmConfig::validate() const {
    if (column_count < 100) throw Error("column_count must be >= 100");
    if (cells_per_column < 1) throw Error("cells_per_column must be >= 1");
    auto frac = [](double f) { return f > 0.0 && f < 1.0; };
    if (!frac(potential_pool_fraction) || !frac(active_column_fraction) ||
        !frac(permanence_threshold))
        throw Error("HTM fractions must lie in (0,1)");
    encoders.users.validate();
    encoders.cpu.validate();
    encoders.ram.validate();
}

BitVector encode_scalar(double value, const ScalarEncoderConfig& cfg) {
    cfg.validate();
    double v = value;
    if (v < cfg.min_value || v > cfg.max_value) {
        if (!cfg.clip_out_of_range) throw Error("value out of encoder range");
        v = std::clamp(v, cfg.min_value, cfg.max_value);
    }
    const double pos = (v - cfg.min_value) / (cfg.max_value - cfg.min_value);
    BitVector bits(cfg.total_bits, 0);
    if (cfg.periodic) {
        const int start = static_cast<int>(std::lround(pos * cfg.total_bits)) % cfg.total_bits;
        for (int i = 0; i < cfg.active_bits; ++i) bits[(start + i) % cfg.total_bits] = 1;
    } else {
        const int start = static_cast<int>(std::lround(pos * (cfg.total_bits - cfg.active_bits)));
        for (int i = 0; i < cfg.active_bits; ++i) bits[start + i] = 1;
    }
    return bits;
}

BitVector encode_sample(double timestamp, double users, double cpu, double ram,
                        const SampleEncoderConfig& cfg) {
    BitVector out;
    out.reserve(cfg.width());
    auto append = [&out](const BitVector& part) { out.insert(out.end(), part.begin(), part.end()); };

    if (cfg.date.time_of_day) {
        ScalarEncoderConfig tod{0.0, 86400.0, cfg.date.tod_active_bits, cfg.date.tod_total_bits,
                                true, true};
        append(encode_scalar(std::fmod(std::fmod(timestamp, 86400.0) + 86400.0, 86400.0), tod));
    }
    if (cfg.date.day_of_week) {
        ScalarEncoderConfig dow{0.0, 7.0, cfg.date.dow_active_bits, cfg.date.dow_total_bits, true,
                                true};
        const double day = std::fmod(std::floor(timestamp / 86400.0), 7.0);
        append(encode_scalar(day < 0.0 ? day + 7.0 : day, dow));
    }
    append(encode_scalar(users, cfg.users));
    append(encode_scalar(cpu, cfg.cpu));
    append(encode_scalar(ram, cfg.ram));
    return out;
}

HtmRegion::HtmRegion(const HtmConfig& cfg) : cfg_(cfg), rng_(cfg.rng_seed) {
    cfg_.validate();
    input_width_ = cfg_.encoders.width();
    const int pool_size = std::max(1, static_cast<int>(cfg_.potential_pool_fraction * input_width_));

    pools_.resize(cfg_.column_count);
    perms_.resize(cfg_.column_count);
    std::vector<int> indices(input_width_);
    for (int c = 0; c < cfg_.column_count; ++c) {
        for (int i = 0; i < input_width_; ++i) indices[i] = i;
        // partial Fisher-Yates: first pool_size entries become the pool
        for (int i = 0; i < pool_size; ++i) {
            const int j = i + static_cast<int>(rng_.next_below(input_width_ - i));
            std::swap(indices[i], indices[j]);
        }
        pools_[c].assign(indices.begin(), indices.begin() + pool_size);
        std::sort(pools_[c].begin(), pools_[c].end());
        perms_[c].resize(pool_size);
        for (int i = 0; i < pool_size; ++i) {
            const double p = cfg_.permanence_threshold + rng_.next_range(-0.1, 0.1);
            perms_[c][i] = std::clamp(p, 0.0, 1.0);
        }
    }
    rebuild_connected();
}

void HtmRegion::rebuild_connected() {
    connected_.assign(input_width_, {});
    for (int c = 0; c < cfg_.column_count; ++c)
        for (std::size_t i = 0; i < pools_[c].size(); ++i)
            if (perms_[c][i] > cfg_.permanence_threshold) connected_[pools_[c][i]].push_back(c);
}

void HtmRegion::set_permanence(int column, std::size_t pool_idx, double value) {
    const double old_value = perms_[column][pool_idx];
    const bool was_connected = old_value > cfg_.permanence_threshold;
    const bool now_connected = value > cfg_.permanence_threshold;
    perms_[column][pool_idx] = value;
    if (was_connected == now_connected) return;
    auto& cols = connected_[pools_[column][pool_idx]];
    if (now_connected) {
        cols.push_back(column);
    } else {
        auto it = std::find(cols.begin(), cols.end(), column);
        if (it != cols.end()) {
            *it = cols.back();
            cols.pop_back();
        }
    }
}

int HtmRegion::active_column_target() const {
    return std::max(1, static_cast<int>(std::lround(cfg_.active_column_fraction * cfg_.column_count)));
}

std::vector<int> HtmRegion::spatial_pool(const BitVector& input, bool learn) {
    if (static_cast<int>(input.size()) != input_width_)
        throw Error("input width mismatch: expected " + std::to_string(input_width_));

    std::vector<int> overlap(cfg_.column_count, 0);
    for (int bit = 0; bit < input_width_; ++bit)
        if (input[bit])
            for (int c : connected_[bit]) ++overlap[c];

    std::vector<int> order(cfg_.column_count);
    for (int c = 0; c < cfg_.column_count; ++c) order[c] = c;
    const auto better = [&overlap](int a, int b) {
        if (overlap[a] != overlap[b]) return overlap[a] > overlap[b];
        return a < b; // deterministic tie-break by lowest column index
    };
    const int target = active_column_target();

    std::vector<int> active;
    active.reserve(target);
    if (cfg_.inhibition_radius == 0) {
        std::partial_sort(order.begin(), order.begin() + target, order.end(), better);
        active.assign(order.begin(), order.begin() + target);
    } else {
        std::sort(order.begin(), order.end(), better);
        for (int c : order) {
            bool blocked = false;
            for (int a : active)
                if (std::abs(a - c) <= cfg_.inhibition_radius) {
                    blocked = true;
                    break;
                }
            if (!blocked) {
                active.push_back(c);
                if (static_cast<int>(active.size()) == target) break;
            }
        }
    }
    std::sort(active.begin(), active.end());

    if (learn) {
        for (int c : active) {
            const auto& pool = pools_[c];
            for (std::size_t i = 0; i < pool.size(); ++i) {
                const double delta =
                    input[pool[i]] ? cfg_.permanence_increment : -cfg_.permanence_decrement;
                set_permanence(c, i, std::clamp(perms_[c][i] + delta, 0.0, 1.0));
            }
        }
    }
    return active;
}

bool HtmRegion::cell_predicted(CellId cell) const {
    return std::binary_search(predicted_cells_.begin(), predicted_cells_.end(), cell);
}

double HtmRegion::anomaly_score(const std::vector<int>& active_columns) const {
    if (active_columns.empty()) return 0.0;
    int unpredicted = 0;
    for (int col : active_columns) {
        const CellId first = static_cast<CellId>(col) * cfg_.cells_per_column;
        bool any = false;
        for (int i = 0; i < cfg_.cells_per_column; ++i)
            if (cell_predicted(first + i)) {
                any = true;
                break;
            }
        if (!any) ++unpredicted;
    }
    return static_cast<double>(unpredicted) / static_cast<double>(active_columns.size());
}

void HtmRegion::temporal_step(const std::vector<int>& active_columns, bool learn) {
    prev_active_cells_ = std::move(active_cells_);
    prev_winner_cells_ = std::move(winner_cells_);
    const std::vector<CellId> prev_predicted = std::move(predicted_cells_);

    // summed connection weight of each cell toward the previously active set;
    // used to pick the best-matching cell in bursting columns
    std::map<CellId, double> match;
    for (CellId y : prev_active_cells_) {
        auto it = successors_.find(y);
        if (it == successors_.end()) continue;
        for (const auto& [z, w] : it->second) match[z] += w;
    }

    active_cells_.clear();
    winner_cells_.clear();
    for (int col : active_columns) {
        const CellId first = static_cast<CellId>(col) * cfg_.cells_per_column;
        const CellId last = first + cfg_.cells_per_column;
        auto lo = std::lower_bound(prev_predicted.begin(), prev_predicted.end(), first);
        auto hi = std::lower_bound(lo, prev_predicted.end(), last);
        if (lo != hi) {
            for (auto it = lo; it != hi; ++it) {
                active_cells_.push_back(*it);
                winner_cells_.push_back(*it);
            }
        } else {
            // burst: all cells activate, the best-matching one learns
            CellId winner = first;
            double best = -1.0;
            for (CellId cell = first; cell < last; ++cell) {
                active_cells_.push_back(cell);
                auto mi = match.find(cell);
                const double m = mi == match.end() ? 0.0 : mi->second;
                if (m > best) {
                    best = m;
                    winner = cell;
                }
            }
            winner_cells_.push_back(winner);
        }
    }

    if (learn) {
        // reinforce realized transitions, decay the rest
        std::vector<CellId> sorted_active = active_cells_; // already sorted by construction
        for (CellId y : prev_active_cells_) {
            auto it = successors_.find(y);
            if (it == successors_.end()) continue;
            auto& succ = it->second;
            for (auto sit = succ.begin(); sit != succ.end();) {
                if (std::binary_search(sorted_active.begin(), sorted_active.end(), sit->first)) {
                    sit->second = std::min(1.0, sit->second + cfg_.segment_weight_increment);
                    ++sit;
                } else {
                    sit->second -= cfg_.segment_weight_decay;
                    if (sit->second <= 0.0)
                        sit = succ.erase(sit);
                    else
                        ++sit;
                }
            }
            if (succ.empty()) successors_.erase(it);
        }
        // winners establish connections to the previous winners
        for (CellId y : prev_winner_cells_) {
            auto& succ = successors_[y];
            for (CellId z : winner_cells_)
                succ.try_emplace(z, cfg_.initial_segment_weight);
            if (succ.empty()) successors_.erase(y);
        }
    }

    // next prediction: cells whose summed weight toward the now-active set
    // clears the activation threshold. A currently active cell may also be
    // predicted; columns shared between successive patterns would otherwise
    // burst forever and pin the anomaly score above zero.
    std::map<CellId, double> vote;
    for (CellId y : active_cells_) {
        auto it = successors_.find(y);
        if (it == successors_.end()) continue;
        for (const auto& [z, w] : it->second) vote[z] += w;
    }
    predicted_cells_.clear();
    for (const auto& [z, sum] : vote)
        if (sum >= cfg_.segment_activation_threshold) predicted_cells_.push_back(z);
    // map iteration is ordered, so predicted_cells_ is sorted
}

AnomalyResult HtmRegion::process_sample(double timestamp, double users, double cpu, double ram) {
    const BitVector input = encode_sample(timestamp, users, cpu, ram, cfg_.encoders);
    const std::vector<int> active = spatial_pool(input, true);
    const double score = anomaly_score(active);
    temporal_step(active, true);
    ++samples_seen_;
    return {score, samples_seen_ > cfg_.warmup_samples};
}

const std::vector<double>& HtmRegion::permanences_of(int column) const { return perms_[column]; }
const std::vector<int>& HtmRegion::pool_of(int column) const { return pools_[column]; }

bool HtmRegion::state_equals(const HtmRegion& other) const {
    return pools_ == other.pools_ && perms_ == other.perms_ && successors_ == other.successors_ &&
           active_cells_ == other.active_cells_ && predicted_cells_ == other.predicted_cells_ &&
           winner_cells_ == other.winner_cells_ && prev_active_cells_ == other.prev_active_cells_ &&
           prev_winner_cells_ == other.prev_winner_cells_ && samples_seen_ == other.samples_seen_ &&
           rng_.state() == other.rng_.state();
}

namespace {

json encoder_to_json(const ScalarEncoderConfig& e) {
    return json{{"min", e.min_value},     {"max", e.max_value},
                {"active_bits", e.active_bits}, {"total_bits", e.total_bits},
                {"clip", e.clip_out_of_range},  {"periodic", e.periodic}};
}

ScalarEncoderConfig encoder_from_json(const json& j) {
    return ScalarEncoderConfig{j.at("min").get<double>(),       j.at("max").get<double>(),
                               j.at("active_bits").get<int>(),  j.at("total_bits").get<int>(),
                               j.at("clip").get<bool>(),        j.at("periodic").get<bool>()};
}

} // namespace

std::string HtmRegion::to_json() const {
    json cols = json::array();
    for (int c = 0; c < cfg_.column_count; ++c)
        cols.push_back(json{{"pool", pools_[c]}, {"perms", perms_[c]}});

    json succ = json::array();
    for (const auto& [y, zs] : successors_) {
        json entries = json::array();
        for (const auto& [z, w] : zs) entries.push_back(json::array({z, w}));
        succ.push_back(json{{"cell", y}, {"out", entries}});
    }

    json j{{"version", 1},
           {"config",
            json{{"column_count", cfg_.column_count},
                 {"cells_per_column", cfg_.cells_per_column},
                 {"potential_pool_fraction", cfg_.potential_pool_fraction},
                 {"active_column_fraction", cfg_.active_column_fraction},
                 {"permanence_threshold", cfg_.permanence_threshold},
                 {"permanence_increment", cfg_.permanence_increment},
                 {"permanence_decrement", cfg_.permanence_decrement},
                 {"segment_activation_threshold", cfg_.segment_activation_threshold},
                 {"initial_segment_weight", cfg_.initial_segment_weight},
                 {"segment_weight_increment", cfg_.segment_weight_increment},
                 {"segment_weight_decay", cfg_.segment_weight_decay},
                 {"inhibition_radius", cfg_.inhibition_radius},
                 {"warmup_samples", cfg_.warmup_samples},
                 {"rng_seed", cfg_.rng_seed},
                 {"encoders",
                  json{{"date",
                        json{{"time_of_day", cfg_.encoders.date.time_of_day},
                             {"tod_total_bits", cfg_.encoders.date.tod_total_bits},
                             {"tod_active_bits", cfg_.encoders.date.tod_active_bits},
                             {"day_of_week", cfg_.encoders.date.day_of_week},
                             {"dow_total_bits", cfg_.encoders.date.dow_total_bits},
                             {"dow_active_bits", cfg_.encoders.date.dow_active_bits}}},
                       {"users", encoder_to_json(cfg_.encoders.users)},
                       {"cpu", encoder_to_json(cfg_.encoders.cpu)},
                       {"ram", encoder_to_json(cfg_.encoders.ram)}}}}},
           {"columns", std::move(cols)},
           {"successors", std::move(succ)},
           {"active_cells", active_cells_},
           {"predicted_cells", predicted_cells_},
           {"winner_cells", winner_cells_},
           {"prev_active_cells", prev_active_cells_},
           {"prev_winner_cells", prev_winner_cells_},
           {"samples_seen", samples_seen_},
           {"rng_state", rng_.state()}};
    return j.dump();
}

HtmRegion HtmRegion::from_json(const std::string& text) {
    json j = json::parse(text);
    const json& jc = j.at("config");
    HtmConfig cfg;
    cfg.column_count = jc.at("column_count").get<int>();
    cfg.cells_per_column = jc.at("cells_per_column").get<int>();
    cfg.potential_pool_fraction = jc.at("potential_pool_fraction").get<double>();
    cfg.active_column_fraction = jc.at("active_column_fraction").get<double>();
    cfg.permanence_threshold = jc.at("permanence_threshold").get<double>();
    cfg.permanence_increment = jc.at("permanence_increment").get<double>();
    cfg.permanence_decrement = jc.at("permanence_decrement").get<double>();
    cfg.segment_activation_threshold = jc.at("segment_activation_threshold").get<double>();
    cfg.initial_segment_weight = jc.at("initial_segment_weight").get<double>();
    cfg.segment_weight_increment = jc.at("segment_weight_increment").get<double>();
    cfg.segment_weight_decay = jc.at("segment_weight_decay").get<double>();
    cfg.inhibition_radius = jc.at("inhibition_radius").get<int>();
    cfg.warmup_samples = jc.at("warmup_samples").get<int>();
    cfg.rng_seed = jc.at("rng_seed").get<std::uint64_t>();
    const json& je = jc.at("encoders");
    const json& jd = je.at("date");
    cfg.encoders.date.time_of_day = jd.at("time_of_day").get<bool>();
    cfg.encoders.date.tod_total_bits = jd.at("tod_total_bits").get<int>();
    cfg.encoders.date.tod_active_bits = jd.at("tod_active_bits").get<int>();
    cfg.encoders.date.day_of_week = jd.at("day_of_week").get<bool>();
    cfg.encoders.date.dow_total_bits = jd.at("dow_total_bits").get<int>();
    cfg.encoders.date.dow_active_bits = jd.at("dow_active_bits").get<int>();
    cfg.encoders.users = encoder_from_json(je.at("users"));
    cfg.encoders.cpu = encoder_from_json(je.at("cpu"));
    cfg.encoders.ram = encoder_from_json(je.at("ram"));

    HtmRegion region(cfg);
    const json& cols = j.at("columns");
    for (int c = 0; c < cfg.column_count; ++c) {
        region.pools_[c] = cols.at(c).at("pool").get<std::vector<int>>();
        region.perms_[c] = cols.at(c).at("perms").get<std::vector<double>>();
    }
    region.rebuild_connected();
    region.successors_.clear();
    for (const auto& entry : j.at("successors")) {
        auto y = entry.at("cell").get<CellId>();
        auto& succ = region.successors_[y];
        for (const auto& zw : entry.at("out")) succ[zw.at(0).get<CellId>()] = zw.at(1).get<double>();
    }
    region.active_cells_ = j.at("active_cells").get<std::vector<CellId>>();
    region.predicted_cells_ = j.at("predicted_cells").get<std::vector<CellId>>();
    region.winner_cells_ = j.at("winner_cells").get<std::vector<CellId>>();
    region.prev_active_cells_ = j.at("prev_active_cells").get<std::vector<CellId>>();
    region.prev_winner_cells_ = j.at("prev_winner_cells").get<std::vector<CellId>>();
    region.samples_seen_ = j.at("samples_seen").get<std::int64_t>();
    region.rng_.restore(j.at("rng_state").get<std::uint64_t>());
    return region;
}

void HtmRegion::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << to_json();
}

HtmRegion HtmRegion::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

} // namespace dvts::htm

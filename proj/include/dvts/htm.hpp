#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dvts/common.hpp"

namespace dvts::htm {

using BitVector = std::vector<std::uint8_t>; // 0/1 per input position

struct ScalarEncoderConfig {
    double min_value = 0.0;
    double max_value = 1.0;
    int active_bits = 21;  // w
    int total_bits = 512;  // n
    bool clip_out_of_range = true;
    bool periodic = false; // wrap the active run (used for time-of-day)

    void validate() const;
};

// Calendar fields of the timestamp, each as its own scalar sub-encoder.
struct DateEncoderConfig {
    bool time_of_day = true;
    int tod_total_bits = 54;
    int tod_active_bits = 13;
    bool day_of_week = false;
    int dow_total_bits = 21;
    int dow_active_bits = 3;

    int width() const {
        return (time_of_day ? tod_total_bits : 0) + (day_of_week ? dow_total_bits : 0);
    }
};

struct SampleEncoderConfig {
    DateEncoderConfig date;
    ScalarEncoderConfig users{0.0, 1000.0, 21, 512, true, false};
    ScalarEncoderConfig cpu{0.0, 1.0, 21, 512, true, false};
    ScalarEncoderConfig ram{0.0, 1.0, 21, 512, true, false};

    int width() const { return date.width() + users.total_bits + cpu.total_bits + ram.total_bits; }
};

BitVector encode_scalar(double value, const ScalarEncoderConfig& cfg);
BitVector encode_sample(double timestamp, double users, double cpu, double ram,
                        const SampleEncoderConfig& cfg);

struct HtmConfig {
    int column_count = 2048;
    int cells_per_column = 32;
    double potential_pool_fraction = 0.5;
    double active_column_fraction = 0.02;
    double permanence_threshold = 0.5;
    double permanence_increment = 0.05;
    double permanence_decrement = 0.008;
    double segment_activation_threshold = 10.0; // summed connection weight
    double initial_segment_weight = 0.21;
    double segment_weight_increment = 0.10;
    double segment_weight_decay = 0.05;
    int inhibition_radius = 0;
    int warmup_samples = 110;
    std::uint64_t rng_seed = 42;
    SampleEncoderConfig encoders;

    void validate() const;
};

struct AnomalyResult {
    double score = 0.0;
    bool warmed_up = false;
};

using CellId = std::uint32_t;

// Single-region HTM: spatial pooling over a column/permanence pool followed
// by cell-level temporal pooling with lateral segment weights. Value type;
// copying yields a fully independent deep copy.
class HtmRegion {
public:
    HtmRegion() = default;
    explicit HtmRegion(const HtmConfig& cfg);

    // Overlap-and-inhibit column selection. With learn, permanences of the
    // winning columns move toward the input bits.
    std::vector<int> spatial_pool(const BitVector& input, bool learn);

    // Activates predicted cells in the given columns (bursting the rest),
    // learns lateral connections, and computes the next predicted set.
    void temporal_step(const std::vector<int>& active_columns, bool learn);

    // Fraction of active columns without any previously predicted cell.
    double anomaly_score(const std::vector<int>& active_columns) const;

    AnomalyResult process_sample(double timestamp, double users, double cpu, double ram);

    HtmRegion clone() const { return *this; }

    const HtmConfig& config() const { return cfg_; }
    std::int64_t samples_seen() const { return samples_seen_; }
    int input_width() const { return input_width_; }
    int active_column_target() const;
    const std::vector<CellId>& active_cells() const { return active_cells_; }
    const std::vector<CellId>& predicted_cells() const { return predicted_cells_; }
    const std::vector<double>& permanences_of(int column) const;
    const std::vector<int>& pool_of(int column) const;

    bool state_equals(const HtmRegion& other) const;

    std::string to_json() const;
    static HtmRegion from_json(const std::string& text);
    void save(const std::string& path) const;
    static HtmRegion load(const std::string& path);

private:
    HtmConfig cfg_;
    int input_width_ = 0;

    // spatial pooler
    std::vector<std::vector<int>> pools_;        // per column: input bit indices
    std::vector<std::vector<double>> perms_;     // per column: permanence per pool entry
    std::vector<std::vector<int>> connected_;    // per input bit: columns with a connected synapse

    // temporal memory; successors_[y] lists cells that fired right after y
    std::map<CellId, std::map<CellId, double>> successors_;
    std::vector<CellId> active_cells_;
    std::vector<CellId> predicted_cells_;
    std::vector<CellId> winner_cells_;
    std::vector<CellId> prev_active_cells_;
    std::vector<CellId> prev_winner_cells_;

    std::int64_t samples_seen_ = 0;
    Rng rng_{1};

    void rebuild_connected();
    void set_permanence(int column, std::size_t pool_idx, double value);
    bool cell_predicted(CellId cell) const;
};

} // namespace dvts::htm

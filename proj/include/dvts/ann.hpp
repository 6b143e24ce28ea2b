#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "dvts/common.hpp"
#include "dvts/metrics.hpp"

namespace dvts::ann {

struct AnnConfig {
    int hidden_neurons = 250;
    // Raw user count divided by this before the input neuron. With the
    // +-0.1 uniform weight init the hidden pre-activations then spread the
    // sigmoid transitions across the observed user range, which is what lets
    // the output layer fit the curve within tens of samples.
    double user_scale = 10.0;
    double init_weight_range = 0.1;
    std::uint64_t seed = 1;
    double ideal_lr = 0.001;
    double ideal_momentum = 0.9;
    double well_predicted_rmse = 0.01;
};

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Prediction {
    double cpu = 0.0;
    double ram = 0.0;
};

// 1 - H - 2 regression network: sigmoid hidden layer, linear outputs.
// Previous-update matrices live in the model so momentum carries across
// training calls.
class AnnModel {
public:
    AnnModel() = default;
    explicit AnnModel(const AnnConfig& cfg);

    Prediction predict(double users) const;

    // One backpropagation iteration on a single sample; each weight update is
    // delta = -lr * grad + momentum * previous_delta.
    void backprop_step(double users, double target_cpu, double target_ram, double lr,
                       double momentum);

    double rmse_for(double users, double target_cpu, double target_ram) const;

    bool finite() const;
    const AnnConfig& config() const { return cfg_; }

    bool operator==(const AnnModel& other) const;

    // exposed for the finite-difference gradient check
    struct Gradients {
        std::vector<double> w1, b1, w2, b2;
    };
    Gradients gradients(double users, double target_cpu, double target_ram) const;
    // half squared error, the quantity backprop descends on
    double loss(double users, double target_cpu, double target_ram) const;
    std::vector<double>& raw_w1() { return w1_; }
    std::vector<double>& raw_b1() { return b1_; }
    std::vector<double>& raw_w2() { return w2_; }
    std::vector<double>& raw_b2() { return b2_; }
    const std::vector<double>& weights_w1() const { return w1_; }
    const std::vector<double>& weights_b1() const { return b1_; }
    const std::vector<double>& weights_w2() const { return w2_; }
    const std::vector<double>& weights_b2() const { return b2_; }
    const std::vector<double>& momentum_w1() const { return dw1_; }
    const std::vector<double>& momentum_b1() const { return db1_; }
    const std::vector<double>& momentum_w2() const { return dw2_; }
    const std::vector<double>& momentum_b2() const { return db2_; }
    std::vector<double>& raw_dw1() { return dw1_; }
    std::vector<double>& raw_db1() { return db1_; }
    std::vector<double>& raw_dw2() { return dw2_; }
    std::vector<double>& raw_db2() { return db2_; }

    std::string to_json() const;
    static AnnModel from_json(const std::string& text);

private:
    friend class Trainer;
    AnnConfig cfg_;
    int hidden_ = 0;
    std::vector<double> w1_, b1_;          // hidden x 1, hidden
    std::vector<double> w2_, b2_;          // 2 x hidden, 2
    std::vector<double> dw1_, db1_, dw2_, db2_; // previous updates (momentum)

    void forward(double users, std::vector<double>& hidden, double out[2]) const;
};

// Ring buffers and counters behind the adaptive learning-rate schedule.
struct TrainerState {
    std::int64_t k = 0; // accepted (trained) samples so far
    double ideal_lr = 0.001;
    double ideal_momentum = 0.9;
    std::deque<double> last10_anomaly;
    std::deque<double> last10_rmse;
    std::int64_t min_users = 0;
    std::int64_t max_users = 0;
    bool has_user_range = false;

    void push_anomaly(double a);
    void push_rmse(double r);
};

struct TrainOutcome {
    bool filtered = false;
    double rmse_pre = 0.0;
    double rmse_post = 0.0;
    double lr_used = 0.0;
    double momentum_used = 0.0;
    int epochs_used = 0;
};

struct LearningRates {
    double lr1 = 0.0;
    double lr2 = 0.0;
};

// Eq.-style schedule pieces, exposed separately so each is testable.
LearningRates lr_schedule(const TrainerState& state, double anomaly, double rmse_pre);
double momentum_for(const TrainerState& state, double lr2);
int epochs_for(const TrainerState& state, double lr2);

// Runs one trial iteration with lr2 on a scratch copy and keeps lr2 only if
// it reduced the sample error; the model is untouched either way.
double trial_and_select_lr(const AnnModel& model, double users, double target_cpu,
                           double target_ram, double lr2, double momentum,
                           double rmse_pre, double* rmse_post_out = nullptr);

class Trainer {
public:
    Trainer() = default;
    Trainer(AnnModel model, TrainerState state) : model_(std::move(model)), state_(std::move(state)) {}
    explicit Trainer(const AnnConfig& cfg) : model_(cfg) {
        state_.ideal_lr = cfg.ideal_lr;
        state_.ideal_momentum = cfg.ideal_momentum;
    }

    double rmse_pre(const metrics::NormalizedSample& s) const {
        return model_.rmse_for(static_cast<double>(s.users), s.cpu_load, s.ram_load);
    }

    TrainOutcome train(const metrics::NormalizedSample& s, double anomaly);

    const AnnModel& model() const { return model_; }
    AnnModel& model() { return model_; }
    const TrainerState& state() const { return state_; }
    TrainerState& state() { return state_; }

    std::string to_json() const;
    static Trainer from_json(const std::string& text);

private:
    AnnModel model_;
    TrainerState state_;
};

} // namespace dvts::ann

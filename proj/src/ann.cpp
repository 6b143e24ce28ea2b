#include "dvts/ann.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace dvts::ann {

using nlohmann::json;

AnnModel::AnnModel(const AnnConfig& cfg) : cfg_(cfg), hidden_(cfg.hidden_neurons) {
    if (hidden_ < 1) throw Error("hidden layer needs at least one neuron");
    Rng rng(cfg.seed);
    auto init = [&](std::vector<double>& v, std::size_t n) {
        v.resize(n);
        for (auto& w : v) w = rng.next_range(-cfg.init_weight_range, cfg.init_weight_range);
    };
    init(w1_, hidden_);
    init(b1_, hidden_);
    init(w2_, 2 * hidden_);
    init(b2_, 2);
    dw1_.assign(hidden_, 0.0);
    db1_.assign(hidden_, 0.0);
    dw2_.assign(2 * hidden_, 0.0);
    db2_.assign(2, 0.0);
}

void AnnModel::forward(double users, std::vector<double>& hidden, double out[2]) const {
    const double x = users / cfg_.user_scale;
    hidden.resize(hidden_);
    for (int i = 0; i < hidden_; ++i) hidden[i] = logistic(w1_[i] * x + b1_[i]);
    for (int j = 0; j < 2; ++j) {
        double acc = b2_[j];
        const double* row = &w2_[j * hidden_];
        for (int i = 0; i < hidden_; ++i) acc += row[i] * hidden[i];
        out[j] = acc;
    }
}

Prediction AnnModel::predict(double users) const {
    std::vector<double> hidden;
    double out[2];
    forward(users, hidden, out);
    return {out[0], out[1]};
}

double AnnModel::rmse_for(double users, double target_cpu, double target_ram) const {
    const Prediction p = predict(users);
    const double dc = p.cpu - target_cpu;
    const double dr = p.ram - target_ram;
    return std::sqrt(dc * dc + dr * dr);
}

double AnnModel::loss(double users, double target_cpu, double target_ram) const {
    const Prediction p = predict(users);
    const double dc = p.cpu - target_cpu;
    const double dr = p.ram - target_ram;
    return 0.5 * (dc * dc + dr * dr);
}

AnnModel::Gradients AnnModel::gradients(double users, double target_cpu,
                                        double target_ram) const {
    std::vector<double> hidden;
    double out[2];
    forward(users, hidden, out);
    const double x = users / cfg_.user_scale;
    const double delta_out[2] = {out[0] - target_cpu, out[1] - target_ram};

    Gradients g;
    g.w2.resize(2 * hidden_);
    g.b2.resize(2);
    g.w1.resize(hidden_);
    g.b1.resize(hidden_);
    for (int j = 0; j < 2; ++j) {
        g.b2[j] = delta_out[j];
        for (int i = 0; i < hidden_; ++i) g.w2[j * hidden_ + i] = delta_out[j] * hidden[i];
    }
    for (int i = 0; i < hidden_; ++i) {
        const double back = delta_out[0] * w2_[i] + delta_out[1] * w2_[hidden_ + i];
        const double dh = back * hidden[i] * (1.0 - hidden[i]);
        g.w1[i] = dh * x;
        g.b1[i] = dh;
    }
    return g;
}

void AnnModel::backprop_step(double users, double target_cpu, double target_ram, double lr,
                             double momentum) {
    const Gradients g = gradients(users, target_cpu, target_ram);
    auto apply = [&](std::vector<double>& w, std::vector<double>& dw, const std::vector<double>& grad) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            dw[i] = -lr * grad[i] + momentum * dw[i];
            w[i] += dw[i];
        }
    };
    apply(w1_, dw1_, g.w1);
    apply(b1_, db1_, g.b1);
    apply(w2_, dw2_, g.w2);
    apply(b2_, db2_, g.b2);
}

bool AnnModel::finite() const {
    auto ok = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return ok(w1_) && ok(b1_) && ok(w2_) && ok(b2_) && ok(dw1_) && ok(db1_) && ok(dw2_) && ok(db2_);
}

bool AnnModel::operator==(const AnnModel& other) const {
    return w1_ == other.w1_ && b1_ == other.b1_ && w2_ == other.w2_ && b2_ == other.b2_ &&
           dw1_ == other.dw1_ && db1_ == other.db1_ && dw2_ == other.dw2_ && db2_ == other.db2_;
}

void TrainerState::push_anomaly(double a) {
    last10_anomaly.push_back(a);
    while (last10_anomaly.size() > 10) last10_anomaly.pop_front();
}

void TrainerState::push_rmse(double r) {
    last10_rmse.push_back(r);
    while (last10_rmse.size() > 10) last10_rmse.pop_front();
}

LearningRates lr_schedule(const TrainerState& state, double anomaly, double rmse_pre) {
    const std::int64_t k = state.k + 1;
    LearningRates out;
    out.lr1 = std::max(state.ideal_lr, logistic(-std::sqrt(static_cast<double>(k))));

    double rmse_bar = 0.0;
    for (double r : state.last10_rmse) rmse_bar += r;
    if (!state.last10_rmse.empty()) rmse_bar /= static_cast<double>(state.last10_rmse.size());
    const double error_term = rmse_bar > 0.0 ? std::max(1.0, rmse_pre / rmse_bar) : 1.0;

    // product over the current anomaly and the previous nine; absent history
    // contributes 2*s(0) = 1
    double product = 2.0 * logistic(anomaly);
    const std::size_t have = state.last10_anomaly.size();
    const std::size_t take = std::min<std::size_t>(have, 9);
    for (std::size_t i = have - take; i < have; ++i)
        product *= 2.0 * logistic(state.last10_anomaly[i]);

    out.lr2 = out.lr1 * error_term * product;
    return out;
}

double momentum_for(const TrainerState& state, double lr2) {
    if (lr2 <= 0.0) return state.ideal_momentum;
    return std::min(state.ideal_momentum, state.ideal_lr / lr2);
}

int epochs_for(const TrainerState& state, double lr2) {
    if (lr2 < state.ideal_lr) return 1;
    return static_cast<int>(std::floor(1.0 + std::log(lr2 / state.ideal_lr)));
}

double trial_and_select_lr(const AnnModel& model, double users, double target_cpu,
                           double target_ram, double lr2, double momentum,
                           double rmse_pre, double* rmse_post_out) {
    AnnModel scratch = model;
    scratch.backprop_step(users, target_cpu, target_ram, lr2, momentum);
    const double rmse_post = scratch.rmse_for(users, target_cpu, target_ram);
    if (rmse_post_out) *rmse_post_out = rmse_post;
    return rmse_pre > rmse_post ? lr2 : model.config().ideal_lr;
}

TrainOutcome Trainer::train(const metrics::NormalizedSample& s, double anomaly) {
    TrainOutcome out;
    const double users = static_cast<double>(s.users);
    out.rmse_pre = model_.rmse_for(users, s.cpu_load, s.ram_load);
    if (out.rmse_pre < model_.config().well_predicted_rmse) {
        out.filtered = true;
        return out;
    }

    const LearningRates rates = lr_schedule(state_, anomaly, out.rmse_pre);
    out.momentum_used = momentum_for(state_, rates.lr2);
    out.epochs_used = epochs_for(state_, rates.lr2);
    out.lr_used = trial_and_select_lr(model_, users, s.cpu_load, s.ram_load, rates.lr2,
                                      out.momentum_used, out.rmse_pre, &out.rmse_post);

    for (int e = 0; e < out.epochs_used; ++e)
        model_.backprop_step(users, s.cpu_load, s.ram_load, out.lr_used, out.momentum_used);
    if (!model_.finite()) throw Error("ANN weights became non-finite during training");

    state_.push_anomaly(anomaly);
    state_.push_rmse(out.rmse_pre);
    ++state_.k;
    if (!state_.has_user_range) {
        state_.min_users = state_.max_users = s.users;
        state_.has_user_range = true;
    } else {
        state_.min_users = std::min(state_.min_users, s.users);
        state_.max_users = std::max(state_.max_users, s.users);
    }
    return out;
}

namespace {

json model_to_json(const AnnModel& m) {
    return json{{"hidden", m.config().hidden_neurons},
                {"user_scale", m.config().user_scale},
                {"ideal_lr", m.config().ideal_lr},
                {"ideal_momentum", m.config().ideal_momentum},
                {"well_predicted_rmse", m.config().well_predicted_rmse},
                {"seed", m.config().seed},
                {"init_weight_range", m.config().init_weight_range},
                {"w1", m.weights_w1()},
                {"b1", m.weights_b1()},
                {"w2", m.weights_w2()},
                {"b2", m.weights_b2()},
                {"dw1", m.momentum_w1()},
                {"db1", m.momentum_b1()},
                {"dw2", m.momentum_w2()},
                {"db2", m.momentum_b2()}};
}

AnnModel model_from_json(const json& j) {
    AnnConfig cfg;
    cfg.hidden_neurons = j.at("hidden").get<int>();
    cfg.user_scale = j.at("user_scale").get<double>();
    cfg.ideal_lr = j.at("ideal_lr").get<double>();
    cfg.ideal_momentum = j.at("ideal_momentum").get<double>();
    cfg.well_predicted_rmse = j.at("well_predicted_rmse").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.init_weight_range = j.at("init_weight_range").get<double>();
    AnnModel m(cfg);
    m.raw_w1() = j.at("w1").get<std::vector<double>>();
    m.raw_b1() = j.at("b1").get<std::vector<double>>();
    m.raw_w2() = j.at("w2").get<std::vector<double>>();
    m.raw_b2() = j.at("b2").get<std::vector<double>>();
    m.raw_dw1() = j.at("dw1").get<std::vector<double>>();
    m.raw_db1() = j.at("db1").get<std::vector<double>>();
    m.raw_dw2() = j.at("dw2").get<std::vector<double>>();
    m.raw_db2() = j.at("db2").get<std::vector<double>>();
    if (m.raw_w1().size() != static_cast<std::size_t>(cfg.hidden_neurons) ||
        m.raw_w2().size() != static_cast<std::size_t>(2 * cfg.hidden_neurons) ||
        m.raw_dw1().size() != m.raw_w1().size() || m.raw_dw2().size() != m.raw_w2().size())
        throw Error("ANN snapshot dimensions do not match its config");
    return m;
}

} // namespace

std::string AnnModel::to_json() const {
    json j = model_to_json(*this);
    j["version"] = 1;
    return j.dump();
}

AnnModel AnnModel::from_json(const std::string& text) {
    return model_from_json(json::parse(text));
}

std::string Trainer::to_json() const {
    json j{{"version", 1},
           {"model", model_to_json(model_)},
           {"state",
            json{{"k", state_.k},
                 {"ideal_lr", state_.ideal_lr},
                 {"ideal_momentum", state_.ideal_momentum},
                 {"last10_anomaly", std::vector<double>(state_.last10_anomaly.begin(), state_.last10_anomaly.end())},
                 {"last10_rmse", std::vector<double>(state_.last10_rmse.begin(), state_.last10_rmse.end())},
                 {"min_users", state_.min_users},
                 {"max_users", state_.max_users},
                 {"has_user_range", state_.has_user_range}}}};
    return j.dump();
}

Trainer Trainer::from_json(const std::string& text) {
    json j = json::parse(text);
    AnnModel model = model_from_json(j.at("model"));
    TrainerState st;
    const json& s = j.at("state");
    st.k = s.at("k").get<std::int64_t>();
    st.ideal_lr = s.at("ideal_lr").get<double>();
    st.ideal_momentum = s.at("ideal_momentum").get<double>();
    for (double a : s.at("last10_anomaly").get<std::vector<double>>()) st.last10_anomaly.push_back(a);
    for (double r : s.at("last10_rmse").get<std::vector<double>>()) st.last10_rmse.push_back(r);
    st.min_users = s.at("min_users").get<std::int64_t>();
    st.max_users = s.at("max_users").get<std::int64_t>();
    st.has_user_range = s.at("has_user_range").get<bool>();
    return Trainer(std::move(model), std::move(st));
}

} // namespace dvts::ann

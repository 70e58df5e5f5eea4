#include "qanno/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "qanno/errors.hpp"

namespace qanno {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

constexpr double kProbEps = 1e-12;

}  // namespace

struct PolicyNet::Workspace {
    std::vector<double> z1, d1, z2, d2;
    std::vector<double> mask1, mask2;  // dropout keep-scales (0 or 1/(1-z))
};

PolicyNet::PolicyNet(int input_dim, int hidden_units, double dropout)
    : input_dim_(input_dim), hidden_(hidden_units), dropout_(dropout) {
    if (input_dim < 1 || hidden_units < 2 || hidden_units % 2 != 0) {
        throw ConfigError("policy network needs input_dim >= 1 and an even hidden_units >= 2");
    }
    if (dropout < 0.0 || dropout >= 1.0) {
        throw ConfigError("dropout probability must lie in [0, 1)");
    }
    const int h2 = hidden_ / 2;
    params_.assign(static_cast<std::size_t>(hidden_ * input_dim_ + hidden_ + h2 * hidden_ + h2 + h2 + 1), 0.0);
}

PolicyNet::PolicyNet(int input_dim, int hidden_units, double dropout, Rng& init_rng)
    : PolicyNet(input_dim, hidden_units, dropout) {
    const int h2 = hidden_ / 2;
    std::size_t p = 0;
    auto fill = [&](int count, int fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (int i = 0; i < count; ++i) params_[p++] = init_rng.uniform(-bound, bound);
    };
    fill(hidden_ * input_dim_, input_dim_);
    p += static_cast<std::size_t>(hidden_);  // biases start at zero
    fill(h2 * hidden_, hidden_);
    p += static_cast<std::size_t>(h2);
    fill(h2, h2);
    p += 1;
}

double PolicyNet::run_forward(std::span<const double> x, Rng* dropout_rng, Workspace* ws) const {
    if (static_cast<int>(x.size()) != input_dim_) {
        throw ConfigError("feature vector has dimension " + std::to_string(x.size()) +
                          ", network expects " + std::to_string(input_dim_));
    }
    const int h = hidden_;
    const int h2 = hidden_ / 2;
    const double* w1 = params_.data();
    const double* b1 = w1 + h * input_dim_;
    const double* w2 = b1 + h;
    const double* b2 = w2 + h2 * h;
    const double* w3 = b2 + h2;
    const double* b3 = w3 + h2;

    ws->z1.assign(static_cast<std::size_t>(h), 0.0);
    ws->d1.assign(static_cast<std::size_t>(h), 0.0);
    ws->mask1.assign(static_cast<std::size_t>(h), 1.0);
    const double keep_scale = dropout_ > 0.0 ? 1.0 / (1.0 - dropout_) : 1.0;
    for (int j = 0; j < h; ++j) {
        double z = b1[j];
        const double* row = w1 + j * input_dim_;
        for (int i = 0; i < input_dim_; ++i) z += row[i] * x[i];
        ws->z1[j] = z;
        double a = z > 0.0 ? z : 0.0;
        if (dropout_rng != nullptr && dropout_ > 0.0) {
            ws->mask1[j] = dropout_rng->bernoulli(dropout_) ? 0.0 : keep_scale;
        }
        ws->d1[j] = a * ws->mask1[j];
    }

    ws->z2.assign(static_cast<std::size_t>(h2), 0.0);
    ws->d2.assign(static_cast<std::size_t>(h2), 0.0);
    ws->mask2.assign(static_cast<std::size_t>(h2), 1.0);
    for (int j = 0; j < h2; ++j) {
        double z = b2[j];
        const double* row = w2 + j * h;
        for (int i = 0; i < h; ++i) z += row[i] * ws->d1[i];
        ws->z2[j] = z;
        double a = z > 0.0 ? z : 0.0;
        if (dropout_rng != nullptr && dropout_ > 0.0) {
            ws->mask2[j] = dropout_rng->bernoulli(dropout_) ? 0.0 : keep_scale;
        }
        ws->d2[j] = a * ws->mask2[j];
    }

    double z3 = b3[0];
    for (int j = 0; j < h2; ++j) z3 += w3[j] * ws->d2[j];
    return sigmoid(z3);
}

double PolicyNet::forward(std::span<const double> x, Rng* dropout_rng) const {
    thread_local Workspace ws;
    return run_forward(x, dropout_rng, &ws);
}

double PolicyNet::loss_and_grad(std::span<const double> x, int label, std::vector<double>& grad,
                                Rng* dropout_rng) const {
    thread_local Workspace ws;
    const double p_raw = run_forward(x, dropout_rng, &ws);
    const double p = std::clamp(p_raw, kProbEps, 1.0 - kProbEps);
    const double y = static_cast<double>(label);
    const double loss = -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));

    const int h = hidden_;
    const int h2 = hidden_ / 2;
    const double* w2 = params_.data() + h * input_dim_ + h;
    const double* w3 = w2 + h2 * h + h2;

    grad.assign(params_.size(), 0.0);
    double* g_w1 = grad.data();
    double* g_b1 = g_w1 + h * input_dim_;
    double* g_w2 = g_b1 + h;
    double* g_b2 = g_w2 + h2 * h;
    double* g_w3 = g_b2 + h2;
    double* g_b3 = g_w3 + h2;

    const double dz3 = p_raw - y;  // d(BCE)/d(z3) through the sigmoid
    g_b3[0] = dz3;
    std::vector<double> dz2(static_cast<std::size_t>(h2));
    for (int j = 0; j < h2; ++j) {
        g_w3[j] = dz3 * ws.d2[j];
        const double dd2 = dz3 * w3[j];
        const double da2 = dd2 * ws.mask2[j];
        dz2[j] = ws.z2[j] > 0.0 ? da2 : 0.0;
    }
    std::vector<double> dd1(static_cast<std::size_t>(h), 0.0);
    for (int j = 0; j < h2; ++j) {
        const double d = dz2[j];
        if (d == 0.0) continue;
        double* row = g_w2 + j * h;
        const double* w_row = w2 + j * h;
        for (int i = 0; i < h; ++i) {
            row[i] = d * ws.d1[i];
            dd1[i] += d * w_row[i];
        }
        g_b2[j] = d;
    }
    for (int j = 0; j < h; ++j) {
        const double da1 = dd1[j] * ws.mask1[j];
        const double dz1 = ws.z1[j] > 0.0 ? da1 : 0.0;
        if (dz1 == 0.0) continue;
        double* row = g_w1 + j * input_dim_;
        for (int i = 0; i < input_dim_; ++i) row[i] = dz1 * x[i];
        g_b1[j] = dz1;
    }
    return loss;
}

void PolicyNet::sgd_step(std::span<const double> grad, double learning_rate) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        params_[i] -= learning_rate * grad[i];
    }
}

void PolicyNet::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write policy file: " + path.string());
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", dropout_);
    out << "qanno-policy-v1 " << input_dim_ << ' ' << hidden_ << ' ' << buf << '\n';
    for (double v : params_) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf << '\n';
    }
    if (!out) throw IoError("failed writing policy file: " + path.string());
}

PolicyNet PolicyNet::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open policy file: " + path.string());
    std::string magic;
    int input_dim = 0, hidden = 0;
    double dropout = 0.0;
    in >> magic >> input_dim >> hidden >> dropout;
    if (!in || magic != "qanno-policy-v1") {
        throw ConfigError("unrecognized policy file header in " + path.string());
    }
    PolicyNet net(input_dim, hidden, dropout);
    for (auto& v : net.params_) {
        if (!(in >> v)) throw ConfigError("truncated policy file: " + path.string());
    }
    return net;
}

int label_optimal_action(Action chosen, std::optional<bool> sem_succeeded,
                         std::optional<bool> gold_in_topn) {
    if (chosen == Action::Sem) {
        if (!sem_succeeded.has_value()) {
            throw ConfigError("Sem-chosen sample needs the observed success flag");
        }
        return *sem_succeeded ? 1 : 0;
    }
    if (!gold_in_topn.has_value()) {
        throw ConfigError("Man-chosen sample needs the post-hoc top-n containment flag");
    }
    return *gold_in_topn ? 1 : 0;
}

double calibrate(double p_sampled, double alpha) {
    // denominator (alpha-1)p + 1 rewritten so the endpoints stay exact
    return alpha * p_sampled / (alpha * p_sampled + (1.0 - p_sampled));
}

double calibrate_positive_downsampled(double p_sampled, double alpha) {
    return p_sampled / (p_sampled + alpha * (1.0 - p_sampled));
}

PolicyState::PolicyState(int input_dim, int hidden_units, double dropout, int minibatch, Rng init_rng)
    : net_(input_dim, hidden_units, dropout, init_rng), minibatch_(std::max(1, minibatch)) {}

void PolicyState::add_example(std::vector<double> features, int label) {
    pool_.push_back({std::move(features), label});
}

void PolicyState::train(int epochs, double learning_rate, Rng& rng) {
    std::vector<std::size_t> positives, negatives;
    for (std::size_t i = 0; i < pool_.size(); ++i) {
        (pool_[i].label == 1 ? positives : negatives).push_back(i);
    }
    if (!pool_.empty()) {
        untrained_frequency_ = static_cast<double>(positives.size()) / pool_.size();
    }
    if (positives.empty() || negatives.empty()) {
        return;  // degenerate pool: the refreshed raw frequency stands in
    }

    auto& majority = positives.size() > negatives.size() ? positives : negatives;
    auto& minority = positives.size() > negatives.size() ? negatives : positives;
    alpha_ = static_cast<double>(minority.size()) / static_cast<double>(majority.size());
    downsampled_class_ = positives.size() > negatives.size() ? 1 : 0;

    rng.shuffle(majority);
    std::vector<std::size_t> training(minority);
    training.insert(training.end(), majority.begin(), majority.begin() + minority.size());

    std::vector<double> grad;
    std::vector<double> batch_grad(net_.parameter_count());
    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(training);
        for (std::size_t start = 0; start < training.size(); start += minibatch_) {
            const std::size_t end = std::min(training.size(), start + minibatch_);
            std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
            for (std::size_t i = start; i < end; ++i) {
                const auto& ex = pool_[training[i]];
                net_.loss_and_grad(ex.features, ex.label, grad, &rng);
                for (std::size_t k = 0; k < batch_grad.size(); ++k) batch_grad[k] += grad[k];
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            for (auto& g : batch_grad) g *= scale;
            net_.sgd_step(batch_grad, learning_rate);
        }
    }
    trained_ = true;
}

double PolicyState::predict_calibrated(std::span<const double> x) const {
    if (!trained_) {
        return untrained_frequency_;
    }
    const double p = net_.forward(x);
    return downsampled_class_ == 0 ? calibrate(p, alpha_) : calibrate_positive_downsampled(p, alpha_);
}

Action PolicyState::decide(std::span<const double> x, double beta) const {
    return predict_calibrated(x) >= beta ? Action::Sem : Action::Man;
}

}  // namespace qanno

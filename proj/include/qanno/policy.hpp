#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qanno/cost_model.hpp"
#include "qanno/rng.hpp"

namespace qanno {

// Three dense layers: input -> k (relu, dropout z) -> k/2 (relu, dropout z) -> 1
// (sigmoid). Parameters live in one flat array so gradient checking and SGD are a
// single loop. Dropout is inverted (activations scaled by 1/(1-z) while training),
// so evaluation needs no rescaling.
class PolicyNet {
  public:
    PolicyNet(int input_dim, int hidden_units, double dropout, Rng& init_rng);

    // Deterministic when rng is null (dropout off); pass an rng for training-mode
    // forward passes.
    double forward(std::span<const double> x, Rng* dropout_rng = nullptr) const;

    // Binary cross-entropy loss and its gradient w.r.t. all parameters. The same
    // dropout mask is used for the forward and backward pass.
    double loss_and_grad(std::span<const double> x, int label, std::vector<double>& grad,
                         Rng* dropout_rng = nullptr) const;

    void sgd_step(std::span<const double> grad, double learning_rate);

    int input_dim() const { return input_dim_; }
    int hidden_units() const { return hidden_; }
    double dropout() const { return dropout_; }
    std::size_t parameter_count() const { return params_.size(); }
    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }

    // Text serialization with a version header; round-trips exactly.
    void save(const std::filesystem::path& path) const;
    static PolicyNet load(const std::filesystem::path& path);

  private:
    PolicyNet(int input_dim, int hidden_units, double dropout);
    struct Workspace;
    double run_forward(std::span<const double> x, Rng* dropout_rng, Workspace* ws) const;

    int input_dim_;
    int hidden_;       // k; second layer has k/2 units
    double dropout_;   // z
    std::vector<double> params_;  // [W1 | b1 | W2 | b2 | W3 | b3]
};

// Whether candidate feedback would have been the cheaper scheme for a sample.
// Sem chosen: success decides immediately. Man chosen: decided post hoc by whether
// the received gold annotation was contained in the predicted top-n list.
// 1 = Sem-optimal, 0 = Man-optimal. Throws ConfigError when the required
// observation for the chosen action is missing.
int label_optimal_action(Action chosen, std::optional<bool> sem_succeeded,
                         std::optional<bool> gold_in_topn);

// Undoes class-balancing bias: maps the probability learned on data whose
// majority-negative class was kept with ratio alpha back to the original
// posterior. Fixes 0 and 1, strictly increasing.
double calibrate(double p_sampled, double alpha);

// Mirror image for the rarer case where the positive class was down-sampled.
double calibrate_positive_downsampled(double p_sampled, double alpha);

struct PoolExample {
    std::vector<double> features;
    int label = 0;  // 1 = Sem-optimal
};

// One per annotation level. Holds the network, the accumulated training pool, the
// balancing ratio alpha from the last update, and trains with plain SGD on
// binary cross-entropy.
class PolicyState {
  public:
    PolicyState(int input_dim, int hidden_units, double dropout, int minibatch, Rng init_rng);

    void add_example(std::vector<double> features, int label);
    void clear_pool() { pool_.clear(); }
    std::size_t pool_size() const { return pool_.size(); }
    const std::vector<PoolExample>& pool() const { return pool_; }

    // Balances the pool by down-sampling the majority class (alpha =
    // minority/majority), then trains. Skipped when the pool lacks one of the two
    // classes; the cold-start default applies until both are seen. Always
    // refreshes the raw Sem-optimal frequency used by untrained states.
    void train(int epochs, double learning_rate, Rng& rng);

    // Calibrated success probability for a feature vector. Untrained states fall
    // back to the pool's raw Sem-optimal frequency as of the last update point
    // (0 before any update), so decisions never move inside a batch.
    double predict_calibrated(std::span<const double> x) const;

    // Sem iff the calibrated probability reaches the threshold.
    Action decide(std::span<const double> x, double beta) const;

    bool trained() const { return trained_; }
    double alpha() const { return alpha_; }
    PolicyNet& net() { return net_; }
    const PolicyNet& net() const { return net_; }

  private:
    PolicyNet net_;
    std::vector<PoolExample> pool_;
    double alpha_ = 1.0;
    int downsampled_class_ = 0;
    bool trained_ = false;
    double untrained_frequency_ = 0.0;
    int minibatch_ = 32;
};

}  // namespace qanno

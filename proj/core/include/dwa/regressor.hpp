#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dwa/corpus.hpp"
#include "dwa/segmentation.hpp"

namespace dwa {

/// Single-layer gated recurrent cell (update, reset and candidate gates)
/// followed by an affine head producing one value per timestamp:
///
///   z = sigmoid(W_z x + U_z h + b_z)
///   r = sigmoid(W_r x + U_r h + b_r)
///   c = tanh(W_c x + U_c (r * h) + b_c)
///   h' = (1 - z) * c + z * h
///   y = w . h' + b
struct RegressorParams {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    std::uint64_t seed = 0;

    Eigen::MatrixXd w_update, w_reset, w_cand; // hidden x input
    Eigen::MatrixXd u_update, u_reset, u_cand; // hidden x hidden
    Eigen::VectorXd b_update, b_reset, b_cand; // hidden
    Eigen::VectorXd head_w;                    // hidden
    double head_b = 0.0;

    static RegressorParams zeros(std::size_t input_dim, std::size_t hidden_dim);

    /// 3(h*d + h*h + h) + h + 1.
    [[nodiscard]] std::size_t parameter_count() const noexcept;

    /// Fixed order: W_z, W_r, W_c, U_z, U_r, U_c (column-major), b_z, b_r,
    /// b_c, head weights, head bias.
    [[nodiscard]] Eigen::VectorXd flatten() const;
    void assign(const Eigen::VectorXd& flat);

    [[nodiscard]] bool all_finite() const;

    bool operator==(const RegressorParams& other) const;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
RegressorParams init_params(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed);

/// One prediction per row of `frames`, hidden state starting at zero.
Eigen::VectorXd forward(const RegressorParams& params, const Eigen::MatrixXd& frames);

/// Predictions for each segment, in order.
std::vector<Eigen::VectorXd> predict(const RegressorParams& params, std::span<const Segment> segments);

struct LossGradient {
    double loss = 0.0;
    RegressorParams grad;
    /// Every label in the batch was identical; the gradient is zero.
    bool degenerate_labels = false;
};

/// 1 - CCC over the concatenated predictions and labels of the batch, with
/// its exact gradient by reverse accumulation through time.
LossGradient loss_and_gradient(const RegressorParams& params, std::span<const Segment> batch, Target target);

/// Loss only; same value as loss_and_gradient(...).loss.
double batch_loss(const RegressorParams& params, std::span<const Segment> batch, Target target);

/// CCC of the concatenated per-segment predictions against labels.
double concatenated_ccc(const RegressorParams& params, std::span<const Segment> segments, Target target);

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    std::size_t batch = 16;
    std::uint64_t seed = 0;
    Target target = Target::Valence;

    bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& config);

struct TrainTrace {
    /// Mean minibatch loss of epochs 1..E.
    std::vector<double> train_loss;
    /// Development CCC of epochs 0..E; entry 0 is the starting model.
    std::vector<double> dev_ccc;
    std::size_t best_epoch = 0;
    bool stopped_early = false;

    [[nodiscard]] double best_dev_ccc() const { return dev_ccc.at(best_epoch); }

    bool operator==(const TrainTrace&) const = default;
};

/// Patience-based stopping on a score that should increase.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

    /// Records the score of `epoch`; returns true when training should stop.
    bool observe(std::size_t epoch, double score);

    [[nodiscard]] std::size_t best_epoch() const noexcept { return best_epoch_; }
    [[nodiscard]] double best_score() const noexcept { return best_score_; }
    [[nodiscard]] bool improved_last() const noexcept { return improved_last_; }

private:
    std::size_t patience_;
    std::size_t best_epoch_ = 0;
    double best_score_ = -std::numeric_limits<double>::infinity();
    std::size_t since_best_ = 0;
    bool improved_last_ = false;
};

/// Adam on the CCC loss with early stopping on development CCC. Returns the
/// parameters of the best development epoch (possibly the starting point).
std::pair<RegressorParams, TrainTrace> train(const RegressorParams& initial, std::span<const Segment> train_set,
                                             std::span<const Segment> dev_set, const TrainConfig& config);

void save_params(const RegressorParams& params, const std::filesystem::path& path);
RegressorParams load_params(const std::filesystem::path& path);

} // namespace dwa

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "synergy/dataset.hpp"
#include "synergy/lstm.hpp"
#include "synergy/rng.hpp"

namespace synergy {

struct TrainConfig {
    int window = 30;     // L, days per training sequence
    int batch = 100;     // B
    int epochs = 100;    // E
    int hidden = 32;     // H
    double rho = 0.95;   // AdaDelta decay
    double epsilon = 1e-6;
    double clip = 5.0;   // global-norm threshold; <= 0 disables clipping
    double dropout = 0.0;
    int warmup = 0;      // leading steps of each window excluded from the loss
    int max_redraws = 20;
    std::uint64_t seed = 0;

    /// Throws ConfigError.
    void validate() const;
};

/// Running averages E[g^2] and E[dx^2], shaped like the model.
struct AdaDeltaState {
    ModelParams sq_grad;
    ModelParams sq_update;

    static AdaDeltaState zeros(NetworkDims dims);
};

/// In-place AdaDelta update. Throws NumericError on a non-finite gradient
/// before touching params or state.
void adadelta_step(ModelParams& params, const ModelParams& grads, AdaDeltaState& state, double rho, double epsilon);

struct WindowRef {
    std::size_t site = 0;
    std::size_t start = 0;
};

struct Minibatch {
    std::vector<WindowRef> windows;
    std::size_t accepted_empty = 0;  // windows still all-missing after the redraw budget
};

/// B windows: sites uniform with replacement, starts uniform on [0, T - L].
Minibatch sample_minibatch(const Dataset& ds, int window, int batch, Rng& rng, int max_redraws = 20);

struct LossResult {
    double loss = 0.0;
    Eigen::MatrixXd grad;  // same shape as the prediction, zero at missing positions
    std::size_t observed = 0;
};

/// RMSE over non-missing targets and its gradient. Throws ContractError when
/// every target is missing.
LossResult masked_rmse_loss(const Eigen::MatrixXd& yhat, const Eigen::MatrixXd& target);

/// x_t = [forcing_t, static attributes] for each listed window, as L inputs of D x B.
SequenceBatch gather_inputs(const Dataset& ds, const std::vector<WindowRef>& windows, std::size_t length);
/// L x B targets with NaN where missing.
Eigen::MatrixXd gather_targets(const Dataset& ds, const std::vector<WindowRef>& windows, std::size_t length);

struct EpochLog {
    int epoch = 0;
    double mean_loss = 0.0;
    std::size_t clip_events = 0;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochLog> log;
    std::size_t iterations = 0;
    std::size_t skipped_batches = 0;  // batches with no observed target
    std::size_t accepted_empty_windows = 0;
};

std::size_t iterations_per_epoch(std::size_t sites, std::size_t steps, int batch, int window);

/// Full training run on an already-normalized dataset. Deterministic in cfg.seed.
TrainResult train(const Dataset& ds, NetworkDims dims, const TrainConfig& cfg);

std::string format_train_log(const std::vector<EpochLog>& log);

}  // namespace synergy

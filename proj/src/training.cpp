#include "synergy/training.hpp"

#include <cmath>
#include <random>

#include "synergy/csv.hpp"
#include "synergy/error.hpp"

namespace synergy {

void TrainConfig::validate() const {
    if (window < 1) throw ConfigError("train.window must be >= 1");
    if (batch < 1) throw ConfigError("train.batch must be >= 1");
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (hidden < 1) throw ConfigError("train.hidden must be >= 1");
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("train.rho must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("train.epsilon must be > 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("train.dropout must lie in [0, 1)");
    if (warmup < 0 || warmup >= window) throw ConfigError("train.warmup must lie in [0, window)");
    if (max_redraws < 0) throw ConfigError("train.max_redraws must be >= 0");
}

AdaDeltaState AdaDeltaState::zeros(NetworkDims dims) {
    return {ModelParams::zeros(dims), ModelParams::zeros(dims)};
}

void adadelta_step(ModelParams& params, const ModelParams& grads, AdaDeltaState& state, double rho, double epsilon) {
    if (!(grads.dims == params.dims) || !(state.sq_grad.dims == params.dims) || !(state.sq_update.dims == params.dims))
        throw ContractError("adadelta_step: shape mismatch");
    if (!grads.all_finite()) throw NumericError("adadelta_step: non-finite gradient");
    auto p = params.flatten();
    const auto g = grads.flatten();
    auto eg = state.sq_grad.flatten();
    auto ex = state.sq_update.flatten();
    for (std::size_t i = 0; i < p.size(); ++i) {
        eg[i] = rho * eg[i] + (1.0 - rho) * g[i] * g[i];
        const double delta = -(std::sqrt(ex[i] + epsilon) / std::sqrt(eg[i] + epsilon)) * g[i];
        ex[i] = rho * ex[i] + (1.0 - rho) * delta * delta;
        p[i] += delta;
    }
    params.assign(p);
    state.sq_grad.assign(eg);
    state.sq_update.assign(ex);
}

Minibatch sample_minibatch(const Dataset& ds, int window, int batch, Rng& rng, int max_redraws) {
    if (ds.empty()) throw ContractError("sample_minibatch: empty dataset");
    if (window < 1 || batch < 1) throw ContractError("sample_minibatch: window and batch must be >= 1");
    const auto T = ds.num_steps();
    const auto L = static_cast<std::size_t>(window);
    if (T < L) throw ContractError("sample_minibatch: series length " + std::to_string(T) + " shorter than window " + std::to_string(L));
    std::uniform_int_distribution<std::size_t> site_dist(0, ds.sites.size() - 1);
    std::uniform_int_distribution<std::size_t> start_dist(0, T - L);
    Minibatch mb;
    mb.windows.reserve(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        WindowRef w;
        bool found = false;
        for (int attempt = 0; attempt <= max_redraws; ++attempt) {
            w = {site_dist(rng), start_dist(rng)};
            const auto& tgt = ds.sites[w.site].target;
            for (std::size_t t = w.start; t < w.start + L && !found; ++t) found = !is_missing(tgt[t]);
            if (found) break;
        }
        if (!found) ++mb.accepted_empty;
        mb.windows.push_back(w);
    }
    return mb;
}

LossResult masked_rmse_loss(const Eigen::MatrixXd& yhat, const Eigen::MatrixXd& target) {
    if (yhat.rows() != target.rows() || yhat.cols() != target.cols())
        throw ContractError("masked_rmse_loss: shape mismatch");
    LossResult r;
    r.grad = Eigen::MatrixXd::Zero(yhat.rows(), yhat.cols());
    double sse = 0.0;
    for (Eigen::Index i = 0; i < yhat.size(); ++i) {
        const double y = target.data()[i];
        if (is_missing(y)) continue;
        const double d = yhat.data()[i] - y;
        sse += d * d;
        ++r.observed;
    }
    if (r.observed == 0) throw ContractError("masked_rmse_loss: every target in the batch is missing");
    const double n = static_cast<double>(r.observed);
    r.loss = std::sqrt(sse / n);
    if (r.loss > 0.0) {
        for (Eigen::Index i = 0; i < yhat.size(); ++i) {
            const double y = target.data()[i];
            if (!is_missing(y)) r.grad.data()[i] = (yhat.data()[i] - y) / (n * r.loss);
        }
    }
    return r;
}

SequenceBatch gather_inputs(const Dataset& ds, const std::vector<WindowRef>& windows, std::size_t length) {
    const auto F = static_cast<Eigen::Index>(ds.num_features());
    const auto A = static_cast<Eigen::Index>(ds.num_attrs());
    const auto B = static_cast<Eigen::Index>(windows.size());
    SequenceBatch batch(length, Eigen::MatrixXd(F + A, B));
    for (Eigen::Index b = 0; b < B; ++b) {
        const auto& w = windows[static_cast<std::size_t>(b)];
        const auto& s = ds.sites[w.site];
        for (std::size_t t = 0; t < length; ++t) {
            auto col = batch[t].col(b);
            col.head(F) = s.forcing.row(static_cast<Eigen::Index>(w.start + t)).transpose();
            for (Eigen::Index a = 0; a < A; ++a) col(F + a) = s.static_attrs[static_cast<std::size_t>(a)];
        }
    }
    return batch;
}

Eigen::MatrixXd gather_targets(const Dataset& ds, const std::vector<WindowRef>& windows, std::size_t length) {
    Eigen::MatrixXd y(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(windows.size()));
    for (std::size_t b = 0; b < windows.size(); ++b) {
        const auto& w = windows[b];
        for (std::size_t t = 0; t < length; ++t)
            y(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(b)) = ds.sites[w.site].target[w.start + t];
    }
    return y;
}

std::size_t iterations_per_epoch(std::size_t sites, std::size_t steps, int batch, int window) {
    const auto per_iter = static_cast<std::size_t>(batch) * static_cast<std::size_t>(window);
    return std::max<std::size_t>(1, (sites * steps + per_iter - 1) / per_iter);
}

TrainResult train(const Dataset& ds, NetworkDims dims, const TrainConfig& cfg) {
    cfg.validate();
    dims.validate();
    if (ds.empty()) throw ContractError("train: empty dataset");
    if (static_cast<std::size_t>(dims.input) != ds.num_features() + ds.num_attrs())
        throw ContractError("train: input size does not match forcing + attribute count");

    Rng init_rng = make_rng(cfg.seed, "init");
    Rng sample_rng = make_rng(cfg.seed, "sample");
    Rng dropout_rng = make_rng(cfg.seed, "dropout");

    TrainResult res;
    res.params = init_params(dims, init_rng);
    auto state = AdaDeltaState::zeros(dims);
    const auto L = static_cast<std::size_t>(cfg.window);
    const auto per_epoch = iterations_per_epoch(ds.sites.size(), ds.num_steps(), cfg.batch, cfg.window);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        EpochLog entry;
        entry.epoch = epoch;
        double loss_sum = 0.0;
        std::size_t counted = 0;
        for (std::size_t it = 0; it < per_epoch; ++it, ++res.iterations) {
            auto mb = sample_minibatch(ds, cfg.window, cfg.batch, sample_rng, cfg.max_redraws);
            res.accepted_empty_windows += mb.accepted_empty;
            auto target = gather_targets(ds, mb.windows, L);
            if (cfg.warmup > 0) target.topRows(cfg.warmup).setConstant(kMissing);
            if (!(target.array() == target.array()).any()) {
                ++res.skipped_batches;
                continue;
            }
            try {
                auto fw = forward(res.params, gather_inputs(ds, mb.windows, L), Dropout{cfg.dropout, &dropout_rng});
                auto loss = masked_rmse_loss(fw.yhat, target);
                auto grad = backward(res.params, fw.cache, loss.grad);
                if (cfg.clip > 0.0) {
                    double sq = 0.0;
                    grad.for_each_array([&](std::span<const double> s) {
                        for (double v : s) sq += v * v;
                    });
                    const double norm = std::sqrt(sq);
                    if (norm > cfg.clip) {
                        const double scale = cfg.clip / norm;
                        grad.for_each_array([&](std::span<double> s) {
                            for (double& v : s) v *= scale;
                        });
                        ++entry.clip_events;
                    }
                }
                adadelta_step(res.params, grad, state, cfg.rho, cfg.epsilon);
                loss_sum += loss.loss;
                ++counted;
            } catch (const NumericError& e) {
                throw NumericError("iteration " + std::to_string(res.iterations) + ": " + e.what());
            }
        }
        entry.mean_loss = counted ? loss_sum / static_cast<double>(counted) : 0.0;
        res.log.push_back(entry);
    }
    return res;
}

std::string format_train_log(const std::vector<EpochLog>& log) {
    std::string out = "epoch,mean_loss,clip_events\n";
    for (const auto& e : log)
        out += std::to_string(e.epoch) + "," + format_double(e.mean_loss) + "," + std::to_string(e.clip_events) + "\n";
    return out;
}

}  // namespace synergy

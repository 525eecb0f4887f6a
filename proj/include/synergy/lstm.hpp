#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "synergy/dataset.hpp"
#include "synergy/rng.hpp"

namespace synergy {

/// Input width D (forcing plus broadcast static attributes) and hidden width H.
/// The output is always one value per time step.
struct NetworkDims {
    int input = 1;
    int hidden = 1;

    void validate() const;
    bool operator==(const NetworkDims&) const = default;
};

enum Gate : int { kInputGate = 0, kForgetGate = 1, kOutputGate = 2, kCandidate = 3 };

/**
 * Weights of the linear(ReLU) -> LSTM -> linear network.
 *
 * Gate weights are stacked in the order input, forget, output, candidate, so
 * rows [g*H, (g+1)*H) of `gate_recurrent`, `gate_input` and `gate_bias`
 * belong to gate g. With row-major storage each gate block is contiguous.
 */
struct ModelParams {
    NetworkDims dims;
    RowMatrix in_weight;       // H x D
    Eigen::VectorXd in_bias;   // H
    RowMatrix gate_recurrent;  // 4H x H, multiplies h_{t-1}
    RowMatrix gate_input;      // 4H x H, multiplies the input-layer activation
    Eigen::VectorXd gate_bias; // 4H
    RowMatrix out_weight;      // 1 x H
    Eigen::VectorXd out_bias;  // 1

    static ModelParams zeros(NetworkDims dims);

    /// Visit every parameter array in checkpoint order: input layer weight and
    /// bias, then per gate (recurrent, input, bias), then output weight and bias.
    template <class F>
    void for_each_array(F&& f) {
        visit_impl(*this, f);
    }
    template <class F>
    void for_each_array(F&& f) const {
        visit_impl(*this, f);
    }

    std::size_t size() const;
    std::vector<double> flatten() const;
    void assign(std::span<const double> flat);
    bool all_finite() const;

private:
    template <class Self, class F>
    static void visit_impl(Self& p, F& f) {
        using Ptr = std::conditional_t<std::is_const_v<Self>, const double*, double*>;
        using Span = std::span<std::remove_pointer_t<Ptr>>;
        const auto H = static_cast<std::size_t>(p.dims.hidden);
        f(Span(static_cast<Ptr>(p.in_weight.data()), static_cast<std::size_t>(p.in_weight.size())));
        f(Span(static_cast<Ptr>(p.in_bias.data()), static_cast<std::size_t>(p.in_bias.size())));
        for (std::size_t g = 0; g < 4; ++g) {
            f(Span(static_cast<Ptr>(p.gate_recurrent.data()) + g * H * H, H * H));
            f(Span(static_cast<Ptr>(p.gate_input.data()) + g * H * H, H * H));
            f(Span(static_cast<Ptr>(p.gate_bias.data()) + g * H, H));
        }
        f(Span(static_cast<Ptr>(p.out_weight.data()), static_cast<std::size_t>(p.out_weight.size())));
        f(Span(static_cast<Ptr>(p.out_bias.data()), static_cast<std::size_t>(p.out_bias.size())));
    }
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, forget bias 1.
ModelParams init_params(NetworkDims dims, Rng& rng);

/// Inputs for B windows of length L: one D x B matrix per time step.
using SequenceBatch = std::vector<Eigen::MatrixXd>;

/// Activations kept for the backward pass.
struct ForwardCache {
    NetworkDims dims;
    Eigen::Index batch = 0;
    std::vector<Eigen::MatrixXd> inputs;      // D x B
    std::vector<Eigen::MatrixXd> in_pre;      // H x B, before the rectifier
    std::vector<Eigen::MatrixXd> dropout;     // H x B scale factors, empty when disabled
    std::vector<Eigen::MatrixXd> activation;  // H x B, after rectifier and dropout
    std::vector<Eigen::MatrixXd> gates;       // 4H x B, after logistic / tanh
    std::vector<Eigen::MatrixXd> cell;        // H x B
    std::vector<Eigen::MatrixXd> cell_tanh;   // H x B
    std::vector<Eigen::MatrixXd> hidden;      // H x B

    std::size_t length() const { return hidden.size(); }
};

struct Dropout {
    double rate = 0.0;
    Rng* rng = nullptr;
};

struct ForwardResult {
    Eigen::MatrixXd yhat;  // L x B
    ForwardCache cache;
};

/// Run the network over a batch from zero initial states.
/// Throws ContractError on shape mismatch, NumericError on non-finite output.
ForwardResult forward(const ModelParams& params, SequenceBatch inputs, Dropout dropout = {});

/// Single window of shape L x D.
ForwardResult forward(const ModelParams& params, const RowMatrix& window);

/// Predictions only; skips the cache for long evaluation sequences.
Eigen::MatrixXd predict(const ModelParams& params, const SequenceBatch& inputs);

/// Exact gradients of a scalar loss given dL/dyhat (L x B) by backpropagation through time.
ModelParams backward(const ModelParams& params, const ForwardCache& cache, const Eigen::MatrixXd& dloss_dy);

/// Little-endian checkpoint: "SYNB1", uint64 D, H, output size, then float64 arrays.
std::string encode_checkpoint(const ModelParams& params);
ModelParams decode_checkpoint(const std::string& bytes);
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace synergy

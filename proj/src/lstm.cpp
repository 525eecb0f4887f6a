#include "synergy/lstm.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <random>

#include "synergy/csv.hpp"
#include "synergy/error.hpp"

namespace synergy {

namespace {

constexpr char kMagic[5] = {'S', 'Y', 'N', 'B', '1'};

Eigen::MatrixXd logistic(const Eigen::MatrixXd& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

void require(bool ok, const std::string& what) {
    if (!ok) throw ContractError(what);
}

}  // namespace

void NetworkDims::validate() const {
    if (input < 1 || hidden < 1) throw ContractError("network dims must satisfy D >= 1, H >= 1");
}

ModelParams ModelParams::zeros(NetworkDims dims) {
    dims.validate();
    const auto D = dims.input;
    const auto H = dims.hidden;
    ModelParams p;
    p.dims = dims;
    p.in_weight = RowMatrix::Zero(H, D);
    p.in_bias = Eigen::VectorXd::Zero(H);
    p.gate_recurrent = RowMatrix::Zero(4 * H, H);
    p.gate_input = RowMatrix::Zero(4 * H, H);
    p.gate_bias = Eigen::VectorXd::Zero(4 * H);
    p.out_weight = RowMatrix::Zero(1, H);
    p.out_bias = Eigen::VectorXd::Zero(1);
    return p;
}

std::size_t ModelParams::size() const {
    std::size_t n = 0;
    for_each_array([&](std::span<const double> s) { n += s.size(); });
    return n;
}

std::vector<double> ModelParams::flatten() const {
    std::vector<double> out;
    out.reserve(size());
    for_each_array([&](std::span<const double> s) { out.insert(out.end(), s.begin(), s.end()); });
    return out;
}

void ModelParams::assign(std::span<const double> flat) {
    if (flat.size() != size()) throw ContractError("parameter vector has wrong length");
    std::size_t pos = 0;
    for_each_array([&](std::span<double> s) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), s.size(), s.begin());
        pos += s.size();
    });
}

bool ModelParams::all_finite() const {
    bool ok = true;
    for_each_array([&](std::span<const double> s) {
        for (double v : s) ok = ok && std::isfinite(v);
    });
    return ok;
}

ModelParams init_params(NetworkDims dims, Rng& rng) {
    auto p = ModelParams::zeros(dims);
    auto fill = [&](RowMatrix& m, int fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    };
    fill(p.in_weight, dims.input);
    fill(p.gate_recurrent, dims.hidden);
    fill(p.gate_input, dims.hidden);
    fill(p.out_weight, dims.hidden);
    p.gate_bias.segment(kForgetGate * dims.hidden, dims.hidden).setOnes();
    return p;
}

ForwardResult forward(const ModelParams& params, SequenceBatch inputs, Dropout dropout) {
    const auto D = params.dims.input;
    const auto H = params.dims.hidden;
    require(!inputs.empty(), "forward: empty sequence");
    const auto B = inputs.front().cols();
    for (const auto& x : inputs) require(x.rows() == D && x.cols() == B, "forward: input shape mismatch");
    if (dropout.rate < 0.0 || dropout.rate >= 1.0) throw ContractError("forward: dropout rate must lie in [0, 1)");
    const bool use_dropout = dropout.rate > 0.0 && dropout.rng != nullptr;

    const auto L = inputs.size();
    ForwardResult res;
    auto& c = res.cache;
    c.dims = params.dims;
    c.batch = B;
    c.in_pre.resize(L);
    c.activation.resize(L);
    c.gates.resize(L);
    c.cell.resize(L);
    c.cell_tanh.resize(L);
    c.hidden.resize(L);
    if (use_dropout) c.dropout.resize(L);
    res.yhat.resize(static_cast<Eigen::Index>(L), B);

    Eigen::MatrixXd h_prev = Eigen::MatrixXd::Zero(H, B);
    Eigen::MatrixXd c_prev = Eigen::MatrixXd::Zero(H, B);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t t = 0; t < L; ++t) {
        auto& pre = c.in_pre[t];
        pre.noalias() = params.in_weight * inputs[t];
        pre.colwise() += params.in_bias;
        auto& a = c.activation[t];
        a = pre.cwiseMax(0.0);
        if (use_dropout) {
            auto& mask = c.dropout[t];
            mask.resize(H, B);
            const double keep = 1.0 / (1.0 - dropout.rate);
            for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = unif(*dropout.rng) < dropout.rate ? 0.0 : keep;
            a.array() *= mask.array();
        }

        Eigen::MatrixXd z(4 * H, B);
        z.noalias() = params.gate_input * a;
        z.noalias() += params.gate_recurrent * h_prev;
        z.colwise() += params.gate_bias;
        auto& g = c.gates[t];
        g.resize(4 * H, B);
        g.topRows(3 * H) = logistic(z.topRows(3 * H));
        g.bottomRows(H) = z.bottomRows(H).array().tanh().matrix();

        const auto ig = g.middleRows(kInputGate * H, H).array();
        const auto fg = g.middleRows(kForgetGate * H, H).array();
        const auto og = g.middleRows(kOutputGate * H, H).array();
        const auto cand = g.middleRows(kCandidate * H, H).array();
        c.cell[t] = (fg * c_prev.array() + ig * cand).matrix();
        c.cell_tanh[t] = c.cell[t].array().tanh().matrix();
        c.hidden[t] = (og * c.cell_tanh[t].array()).matrix();

        auto row = res.yhat.row(static_cast<Eigen::Index>(t));
        row.noalias() = params.out_weight * c.hidden[t];
        row.array() += params.out_bias(0);
        if (!row.allFinite()) throw NumericError("forward: non-finite output at timestep " + std::to_string(t));
        h_prev = c.hidden[t];
        c_prev = c.cell[t];
    }
    c.inputs = std::move(inputs);
    return res;
}

ForwardResult forward(const ModelParams& params, const RowMatrix& window) {
    require(window.cols() == params.dims.input, "forward: window width does not match input size");
    SequenceBatch batch(static_cast<std::size_t>(window.rows()));
    for (Eigen::Index t = 0; t < window.rows(); ++t) batch[static_cast<std::size_t>(t)] = window.row(t).transpose();
    return forward(params, std::move(batch));
}

Eigen::MatrixXd predict(const ModelParams& params, const SequenceBatch& inputs) {
    const auto D = params.dims.input;
    const auto H = params.dims.hidden;
    require(!inputs.empty(), "predict: empty sequence");
    const auto B = inputs.front().cols();
    Eigen::MatrixXd yhat(static_cast<Eigen::Index>(inputs.size()), B);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(H, B);
    Eigen::MatrixXd cell = Eigen::MatrixXd::Zero(H, B);
    Eigen::MatrixXd a(H, B), z(4 * H, B), g(4 * H, B);
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        require(inputs[t].rows() == D && inputs[t].cols() == B, "predict: input shape mismatch");
        a.noalias() = params.in_weight * inputs[t];
        a.colwise() += params.in_bias;
        a = a.cwiseMax(0.0);
        z.noalias() = params.gate_input * a;
        z.noalias() += params.gate_recurrent * h;
        z.colwise() += params.gate_bias;
        g.topRows(3 * H) = logistic(z.topRows(3 * H));
        g.bottomRows(H) = z.bottomRows(H).array().tanh().matrix();
        cell = (g.middleRows(kForgetGate * H, H).array() * cell.array() +
                g.middleRows(kInputGate * H, H).array() * g.middleRows(kCandidate * H, H).array())
                   .matrix();
        h = (g.middleRows(kOutputGate * H, H).array() * cell.array().tanh()).matrix();
        auto row = yhat.row(static_cast<Eigen::Index>(t));
        row.noalias() = params.out_weight * h;
        row.array() += params.out_bias(0);
        if (!row.allFinite()) throw NumericError("predict: non-finite output at timestep " + std::to_string(t));
    }
    return yhat;
}

ModelParams backward(const ModelParams& params, const ForwardCache& cache, const Eigen::MatrixXd& dloss_dy) {
    const auto H = params.dims.hidden;
    const auto L = cache.length();
    if (!(cache.dims == params.dims)) throw ContractError("backward: cache was produced by a different network shape");
    if (dloss_dy.rows() != static_cast<Eigen::Index>(L) || dloss_dy.cols() != cache.batch)
        throw ContractError("backward: gradient shape does not match cached window");
    const auto B = cache.batch;
    const bool use_dropout = !cache.dropout.empty();

    auto grad = ModelParams::zeros(params.dims);
    Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(H, B);
    Eigen::MatrixXd dc_next = Eigen::MatrixXd::Zero(H, B);
    Eigen::MatrixXd dz(4 * H, B);
    Eigen::MatrixXd dh(H, B), dc(H, B), da(H, B);
    const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(H, B);

    for (std::size_t step = L; step-- > 0;) {
        const auto dy = dloss_dy.row(static_cast<Eigen::Index>(step));
        const auto& h = cache.hidden[step];
        const auto& g = cache.gates[step];
        const auto& tc = cache.cell_tanh[step];
        const auto& h_prev = step > 0 ? cache.hidden[step - 1] : zeros;
        const auto& c_prev = step > 0 ? cache.cell[step - 1] : zeros;

        grad.out_weight.noalias() += dy * h.transpose();
        grad.out_bias(0) += dy.sum();

        dh.noalias() = params.out_weight.transpose() * dy;
        dh += dh_next;

        const auto ig = g.middleRows(kInputGate * H, H).array();
        const auto fg = g.middleRows(kForgetGate * H, H).array();
        const auto og = g.middleRows(kOutputGate * H, H).array();
        const auto cand = g.middleRows(kCandidate * H, H).array();

        dc = (dh.array() * og * (1.0 - tc.array().square()) + dc_next.array()).matrix();

        dz.middleRows(kInputGate * H, H) = (dc.array() * cand * ig * (1.0 - ig)).matrix();
        dz.middleRows(kForgetGate * H, H) = (dc.array() * c_prev.array() * fg * (1.0 - fg)).matrix();
        dz.middleRows(kOutputGate * H, H) = (dh.array() * tc.array() * og * (1.0 - og)).matrix();
        dz.middleRows(kCandidate * H, H) = (dc.array() * ig * (1.0 - cand.square())).matrix();

        grad.gate_input.noalias() += dz * cache.activation[step].transpose();
        grad.gate_recurrent.noalias() += dz * h_prev.transpose();
        grad.gate_bias += dz.rowwise().sum();

        da.noalias() = params.gate_input.transpose() * dz;
        dh_next.noalias() = params.gate_recurrent.transpose() * dz;
        dc_next = (dc.array() * fg).matrix();

        // Through dropout and the rectifier back to the input layer.
        if (use_dropout) da.array() *= cache.dropout[step].array();
        da.array() *= (cache.in_pre[step].array() > 0.0).cast<double>();
        grad.in_weight.noalias() += da * cache.inputs[step].transpose();
        grad.in_bias += da.rowwise().sum();
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    return v;
}

}  // namespace

std::string encode_checkpoint(const ModelParams& params) {
    std::string out(kMagic, sizeof(kMagic));
    put_u64(out, static_cast<std::uint64_t>(params.dims.input));
    put_u64(out, static_cast<std::uint64_t>(params.dims.hidden));
    put_u64(out, 1);
    params.for_each_array([&](std::span<const double> s) {
        for (double v : s) put_u64(out, std::bit_cast<std::uint64_t>(v));
    });
    return out;
}

ModelParams decode_checkpoint(const std::string& bytes) {
    constexpr std::size_t header = sizeof(kMagic) + 3 * 8;
    if (bytes.size() < header || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw DataError("checkpoint: bad magic bytes");
    const auto D = get_u64(bytes, 5);
    const auto H = get_u64(bytes, 13);
    const auto out = get_u64(bytes, 21);
    if (out != 1 || D < 1 || H < 1 || D > (1u << 20) || H > (1u << 16)) throw DataError("checkpoint: invalid dimensions");
    auto params = ModelParams::zeros({static_cast<int>(D), static_cast<int>(H)});
    if (bytes.size() != header + 8 * params.size())
        throw DataError("checkpoint: expected " + std::to_string(header + 8 * params.size()) + " bytes for D=" +
                        std::to_string(D) + ", H=" + std::to_string(H) + ", found " + std::to_string(bytes.size()));
    std::size_t pos = header;
    params.for_each_array([&](std::span<double> s) {
        for (double& v : s) {
            v = std::bit_cast<double>(get_u64(bytes, pos));
            pos += 8;
        }
    });
    if (!params.all_finite()) throw DataError("checkpoint: non-finite parameter");
    return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    write_text_file(path, encode_checkpoint(params));
}

ModelParams load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_text_file(path)); }

}  // namespace synergy

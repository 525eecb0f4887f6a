#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "synergy/error.hpp"
#include "synergy/synth.hpp"
#include "synergy/training.hpp"

using namespace synergy;

namespace {

Dataset tiny_dataset(std::size_t sites, std::size_t T, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Dataset ds;
    ds.feature_names = {"a", "b"};
    ds.attr_names = {"c"};
    for (std::size_t t = 0; t < T; ++t) ds.time_axis.push_back(parse_date("2020-01-01") + std::chrono::days(t));
    for (std::size_t s = 0; s < sites; ++s) {
        Site site;
        site.id = "s" + std::to_string(s);
        site.region = parse_region_code("1.1." + std::to_string(s + 1));
        site.static_attrs = {n(rng)};
        site.forcing = RowMatrix(T, 2);
        site.target.resize(T);
        for (std::size_t t = 0; t < T; ++t) {
            site.forcing(t, 0) = n(rng);
            site.forcing(t, 1) = n(rng);
            site.target[t] = t % 2 ? kMissing : n(rng);
        }
        ds.sites.push_back(std::move(site));
    }
    return ds;
}

}  // namespace

TEST_CASE("AdaDelta first step from a fresh state") {
    const NetworkDims dims{1, 1};
    auto params = ModelParams::zeros(dims);
    auto grads = ModelParams::zeros(dims);
    grads.out_bias(0) = 1.0;
    auto state = AdaDeltaState::zeros(dims);
    adadelta_step(params, grads, state, 0.95, 1e-6);
    CHECK(std::abs(params.out_bias(0) - (-4.4721e-3)) < 1e-7);
    CHECK(params.out_bias(0) == doctest::Approx(-std::sqrt(1e-6) / std::sqrt(0.05 + 1e-6)).epsilon(1e-14));
    CHECK(state.sq_grad.out_bias(0) == doctest::Approx(0.05));
    CHECK(state.sq_update.out_bias(0) == doctest::Approx(0.05 * params.out_bias(0) * params.out_bias(0)));
    // entries with zero gradient stay put
    for (double v : params.in_weight.reshaped()) CHECK(v == 0.0);
}

TEST_CASE("AdaDelta zero gradient only decays the accumulators") {
    const NetworkDims dims{2, 3};
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto params = ModelParams::zeros(dims);
    std::vector<double> flat(params.size());
    for (auto& v : flat) v = u(rng);
    params.assign(flat);
    auto state = AdaDeltaState::zeros(dims);
    std::vector<double> acc(params.size());
    for (auto& v : acc) v = std::abs(u(rng));
    state.sq_grad.assign(acc);
    state.sq_update.assign(acc);
    adadelta_step(params, ModelParams::zeros(dims), state, 0.9, 1e-6);
    CHECK(params.flatten() == flat);
    const auto g = state.sq_grad.flatten();
    for (std::size_t i = 0; i < acc.size(); ++i) CHECK(g[i] == doctest::Approx(0.9 * acc[i]));
}

TEST_CASE("AdaDelta step opposes the gradient sign and rejects non-finite input") {
    const NetworkDims dims{3, 2};
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 1.0);
    auto params = ModelParams::zeros(dims);
    auto grads = ModelParams::zeros(dims);
    std::vector<double> g(grads.size());
    for (auto& v : g) v = n(rng);
    grads.assign(g);
    auto state = AdaDeltaState::zeros(dims);
    adadelta_step(params, grads, state, 0.95, 1e-6);
    const auto p = params.flatten();
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::signbit(p[i]) != std::signbit(g[i]));

    g[3] = std::numeric_limits<double>::quiet_NaN();
    grads.assign(g);
    const auto before = params.flatten();
    CHECK_THROWS_AS(adadelta_step(params, grads, state, 0.95, 1e-6), NumericError);
    CHECK(params.flatten() == before);
}

TEST_CASE("AdaDelta minimises a 1-D quadratic") {
    const NetworkDims dims{1, 1};
    auto x = ModelParams::zeros(dims);
    x.out_bias(0) = 1.0;
    auto state = AdaDeltaState::zeros(dims);
    int steps = 0;
    while (std::abs(x.out_bias(0)) >= 0.1 && steps < 10000) {
        auto g = ModelParams::zeros(dims);
        g.out_bias(0) = x.out_bias(0);  // d/dx of x^2 / 2
        adadelta_step(x, g, state, 0.95, 1e-6);
        ++steps;
    }
    INFO("steps " << steps);
    CHECK(std::abs(x.out_bias(0)) < 0.1);
}

TEST_CASE("masked RMSE loss examples") {
    const double nan = kMissing;
    Eigen::MatrixXd y(2, 2), yhat(2, 2);
    y << 1.0, nan, 2.0, nan;
    yhat << 2.0, 7.0, 1.0, -3.0;
    auto r = masked_rmse_loss(yhat, y);
    CHECK(r.loss == doctest::Approx(1.0));
    CHECK(r.observed == 2);
    CHECK(r.grad(0, 0) == doctest::Approx(0.5));
    CHECK(r.grad(1, 0) == doctest::Approx(-0.5));
    CHECK(r.grad(0, 1) == 0.0);
    CHECK(r.grad(1, 1) == 0.0);

    yhat(0, 1) = 1e6;  // missing positions do not matter
    CHECK(masked_rmse_loss(yhat, y).loss == r.loss);

    Eigen::MatrixXd same = y;
    same(0, 1) = same(1, 1) = 0.0;
    auto z = masked_rmse_loss(same, y);
    CHECK(z.loss == 0.0);
    CHECK(z.grad.cwiseAbs().maxCoeff() == 0.0);

    Eigen::MatrixXd empty = Eigen::MatrixXd::Constant(2, 2, nan);
    CHECK_THROWS_AS(masked_rmse_loss(yhat, empty), ContractError);
}

TEST_CASE("masked RMSE gradient matches finite differences") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd y(6, 4), yhat(6, 4);
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            y.data()[i] = (i % 3 == 0) ? kMissing : n(rng);
            yhat.data()[i] = n(rng);
        }
        const auto r = masked_rmse_loss(yhat, y);
        // independent loss evaluation in extended precision keeps the difference quotient clean
        auto loss = [&](Eigen::Index k, long double shift) {
            long double sum = 0;
            int count = 0;
            for (Eigen::Index i = 0; i < y.size(); ++i) {
                if (oracle::missing(y.data()[i])) continue;
                const long double d = static_cast<long double>(yhat.data()[i]) + (i == k ? shift : 0.0L) - y.data()[i];
                sum += d * d;
                ++count;
            }
            return std::sqrt(sum / count);
        };
        std::vector<double> fd(static_cast<std::size_t>(y.size()));
        const long double h = 1e-6L;
        for (Eigen::Index k = 0; k < y.size(); ++k) fd[k] = static_cast<double>((loss(k, h) - loss(k, -h)) / (2 * h));
        for (std::size_t i = 0; i < fd.size(); ++i) CHECK(oracle::relative_error(r.grad.data()[i], fd[i]) < 1e-6);
    }
}

TEST_CASE("sample_minibatch windows") {
    const auto one = tiny_dataset(1, 30, 1);
    Rng rng = make_rng(4);
    for (int i = 0; i < 20; ++i) {
        const auto mb = sample_minibatch(one, 30, 1, rng);
        REQUIRE(mb.windows.size() == 1);
        CHECK(mb.windows[0].start == 0);
        CHECK(mb.windows[0].site == 0);
    }
    const auto many = tiny_dataset(5, 400, 2);
    const auto mb = sample_minibatch(many, 30, 100, rng);
    CHECK(mb.windows.size() == 100);
    for (const auto& w : mb.windows) CHECK(w.start + 30 <= 400);
    const auto inputs = gather_inputs(many, mb.windows, 30);
    CHECK(inputs.size() == 30);
    CHECK(inputs[0].rows() == 3);
    CHECK(inputs[0].cols() == 100);
    CHECK(inputs[4](0, 7) == many.sites[mb.windows[7].site].forcing(mb.windows[7].start + 4, 0));
    CHECK(inputs[4](2, 7) == many.sites[mb.windows[7].site].static_attrs[0]);
    const auto targets = gather_targets(many, mb.windows, 30);
    CHECK(targets.rows() == 30);
    CHECK(targets.cols() == 100);
    CHECK_THROWS_AS(sample_minibatch(many, 401, 1, rng), ContractError);
}

TEST_CASE("site selection is uniform within binomial bounds") {
    const auto ds = tiny_dataset(5, 40, 3);
    Rng rng = make_rng(6);
    std::vector<int> site_counts(5, 0), start_counts(11, 0);
    const int draws = 100000;
    for (int i = 0; i < draws / 1000; ++i)
        for (const auto& w : sample_minibatch(ds, 30, 1000, rng).windows) {
            ++site_counts[w.site];
            ++start_counts[w.start];
        }
    const double p = 0.2, sd = std::sqrt(draws * p * (1 - p));
    for (int c : site_counts) CHECK(std::abs(c - draws * p) <= 3 * sd);
    const double q = 1.0 / 11.0, sdq = std::sqrt(draws * q * (1 - q));
    for (int c : start_counts) CHECK(std::abs(c - draws * q) <= 3 * sdq);
}

TEST_CASE("all-missing windows are redrawn, then counted") {
    auto ds = tiny_dataset(2, 40, 5);
    for (auto& v : ds.sites[1].target) v = kMissing;
    Rng rng = make_rng(7);
    const auto mb = sample_minibatch(ds, 10, 500, rng);
    for (const auto& w : mb.windows) CHECK(w.site == 0);
    CHECK(mb.accepted_empty == 0);

    for (auto& v : ds.sites[0].target) v = kMissing;
    const auto hopeless = sample_minibatch(ds, 10, 5, rng, 3);
    CHECK(hopeless.accepted_empty == 5);
}

TEST_CASE("epoch length and config validation") {
    CHECK(iterations_per_epoch(432, 365, 100, 30) == 53);
    CHECK(iterations_per_epoch(4, 60, 4, 60) == 1);
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.rho = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.epsilon = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.window = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("training is deterministic and logs every epoch") {
    const auto ds = tiny_dataset(3, 80, 9);
    TrainConfig cfg;
    cfg.window = 20;
    cfg.batch = 8;
    cfg.epochs = 3;
    cfg.hidden = 4;
    cfg.seed = 11;
    const NetworkDims dims{3, 4};
    const auto a = train(ds, dims, cfg);
    const auto b = train(ds, dims, cfg);
    CHECK(encode_checkpoint(a.params) == encode_checkpoint(b.params));
    CHECK(a.log.size() == 3);
    CHECK(a.iterations == 3 * iterations_per_epoch(3, 80, 8, 20));
    for (const auto& e : a.log) CHECK(std::isfinite(e.mean_loss));
    CHECK(format_train_log(a.log).rfind("epoch,mean_loss,clip_events\n1,", 0) == 0);
    cfg.seed = 12;
    CHECK(encode_checkpoint(train(ds, dims, cfg).params) != encode_checkpoint(a.params));
}

TEST_CASE("a small network memorises four short sequences") {
    WorldConfig w;
    w.n_level1 = w.n_level2 = w.n_level3 = 1;
    w.sites_per_region = 4;
    w.days = 60;
    w.revisit_min = w.revisit_max = 1;
    w.obs_noise = 0.0;
    w.seed = 3;
    const auto world = gen_world(w);
    const auto ds = apply_normalization(world.data, fit_normalization(world.data));
    TrainConfig cfg;
    cfg.window = 60;
    cfg.batch = 4;
    cfg.epochs = 6000;
    cfg.hidden = 16;
    cfg.seed = 1;
    const NetworkDims dims{5, 16};
    const auto res = train(ds, dims, cfg);
    for (const auto& e : res.log) REQUIRE(std::isfinite(e.mean_loss));

    std::vector<WindowRef> all;
    for (std::size_t s = 0; s < 4; ++s) all.push_back({s, 0});
    const auto yhat = predict(res.params, gather_inputs(ds, all, 60));
    const auto loss = masked_rmse_loss(yhat, gather_targets(ds, all, 60));
    INFO("training RMSE " << loss.loss);
    CHECK(loss.loss < 0.05);
}

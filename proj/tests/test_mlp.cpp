#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bacoun/mlp.hpp"

using namespace bacoun;

namespace {

MlpConfig small_config(std::size_t in, std::vector<std::size_t> hidden,
                       std::size_t out, double l2 = 0.0, double dropout = 0.0) {
    MlpConfig cfg;
    cfg.input_dim = in;
    cfg.hidden_dims = std::move(hidden);
    cfg.output_dim = out;
    cfg.l2_penalty = l2;
    cfg.dropout_rate = dropout;
    return cfg;
}

// Central finite differences of the eval-mode loss, the independent oracle
// for every analytic gradient in the library.
double fd_loss(Mlp& mlp, DenseMatrix& param, std::size_t i, double eps,
               const DenseMatrix& x, const std::vector<int>& y, double l2) {
    const double keep = param.data[i];
    param.data[i] = keep + eps;
    const double up = loss_and_grad(mlp, x, y, l2, ForwardMode::eval).loss;
    param.data[i] = keep - eps;
    const double down = loss_and_grad(mlp, x, y, l2, ForwardMode::eval).loss;
    param.data[i] = keep;
    return (up - down) / (2.0 * eps);
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Central differences are only trustworthy away from the activation kinks;
// require every pre-activation to clear a margin much larger than the
// finite-difference step.
bool kink_safe(const Mlp& mlp, const DenseMatrix& x, double margin) {
    MlpForwardCache cache;
    mlp_forward_cached(mlp, x, ForwardMode::eval, nullptr, cache);
    for (const auto& pre : cache.pre)
        for (double v : pre.data)
            if (std::abs(v) < margin) return false;
    return true;
}

} // namespace

TEST_CASE("zero-weight binary network loses ln 2") {
    Rng rng(0);
    Mlp mlp(small_config(2, {4}, 2), rng);
    for (auto& layer : mlp.layers) {
        std::fill(layer.weights.data.begin(), layer.weights.data.end(), 0.0);
        std::fill(layer.bias.data.begin(), layer.bias.data.end(), 0.0);
    }
    DenseMatrix x(5, 2);
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = double(i) - 2.0;
    const std::vector<int> y{0, 1, 0, 1, 1};
    const auto lg = loss_and_grad(mlp, x, y, 1.0, ForwardMode::eval);
    CHECK(lg.loss == Catch::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("all-zero weights produce uniform softmax and zero logits") {
    Rng rng(1);
    Mlp mlp(small_config(3, {5, 4}, 3), rng);
    for (auto& layer : mlp.layers) {
        std::fill(layer.weights.data.begin(), layer.weights.data.end(), 0.0);
        std::fill(layer.bias.data.begin(), layer.bias.data.end(), 0.0);
    }
    DenseMatrix x(2, 3, 1.5);
    const auto out = mlp_forward(mlp, x);
    for (double v : out.logits.data) CHECK(v == 0.0);
}

TEST_CASE("features carry a trailing all-ones bias column") {
    Rng rng(2);
    Mlp mlp(small_config(2, {6, 3}, 2), rng);
    DenseMatrix x(4, 2);
    for (double& v : x.data) v = rng.normal();
    const auto out = mlp_forward(mlp, x);
    REQUIRE(out.features.rows == 4);
    REQUIRE(out.features.cols == 4); // last hidden 3 + bias
    for (std::size_t i = 0; i < out.features.rows; ++i)
        CHECK(out.features(i, 3) == 1.0);
}

TEST_CASE("eval-mode forward is bitwise deterministic") {
    Rng rng(3);
    Mlp mlp(small_config(3, {8, 8}, 4, 0.0, 0.5), rng);
    DenseMatrix x(7, 3);
    for (double& v : x.data) v = rng.normal();
    const auto a = mlp_forward(mlp, x, ForwardMode::eval);
    const auto b = mlp_forward(mlp, x, ForwardMode::eval);
    CHECK(a.logits.data == b.logits.data);
    CHECK(a.features.data == b.features.data);
}

TEST_CASE("forward rejects mismatched input width") {
    Rng rng(4);
    Mlp mlp(small_config(3, {4}, 2), rng);
    DenseMatrix x(2, 5);
    CHECK_THROWS_AS(mlp_forward(mlp, x), ShapeError);
}

TEST_CASE("labels out of range are rejected") {
    Rng rng(5);
    Mlp mlp(small_config(2, {4}, 2), rng);
    DenseMatrix x(2, 2, 0.5);
    CHECK_THROWS_AS(loss_and_grad(mlp, x, {0, 2}, 0.0, ForwardMode::eval),
                    std::invalid_argument);
    CHECK_THROWS_AS(loss_and_grad(mlp, x, {0, -1}, 0.0, ForwardMode::eval),
                    std::invalid_argument);
}

TEST_CASE("duplicating every batch row leaves the loss unchanged") {
    Rng rng(6);
    Mlp mlp(small_config(2, {5}, 3), rng);
    DenseMatrix x(4, 2);
    for (double& v : x.data) v = rng.normal();
    const std::vector<int> y{0, 1, 2, 1};
    DenseMatrix xx = vstack(x, x);
    std::vector<int> yy = y;
    yy.insert(yy.end(), y.begin(), y.end());
    const double a = loss_and_grad(mlp, x, y, 0.3, ForwardMode::eval).loss;
    const double b = loss_and_grad(mlp, xx, yy, 0.3, ForwardMode::eval).loss;
    CHECK(a == Catch::Approx(b).epsilon(1e-13));
}

TEST_CASE("every parameter gradient matches central finite differences") {
    Rng rng(7);
    constexpr double kEps = 1e-5;
    constexpr double kTol = 1e-4;
    for (int instance = 0; instance < 100; ++instance) {
        const std::size_t in = 1 + rng.uniform_index(4);
        const std::size_t out = 2 + rng.uniform_index(3);
        std::vector<std::size_t> hidden;
        const std::size_t depth = 1 + rng.uniform_index(3);
        for (std::size_t l = 0; l < depth; ++l)
            hidden.push_back(1 + rng.uniform_index(16));
        const double l2 = rng.uniform() < 0.5 ? 0.0 : 0.05;
        Mlp mlp(small_config(in, hidden, out, l2), rng);

        DenseMatrix x(3, in);
        do {
            for (double& v : x.data) v = rng.normal();
        } while (!kink_safe(mlp, x, 1e-3));
        std::vector<int> y(3);
        for (int& v : y) v = int(rng.uniform_index(out));

        const auto lg = loss_and_grad(mlp, x, y, l2, ForwardMode::eval);
        for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
            auto check_block = [&](DenseMatrix& param, const DenseMatrix& grad) {
                for (std::size_t i = 0; i < param.data.size(); ++i) {
                    const double fd = fd_loss(mlp, param, i, kEps, x, y, l2);
                    REQUIRE(rel_err(grad.data[i], fd) < kTol);
                }
            };
            check_block(mlp.layers[l].weights, lg.grads[l].weights);
            check_block(mlp.layers[l].bias, lg.grads[l].bias);
        }
    }
}

TEST_CASE("input gradients from backward match finite differences") {
    Rng rng(8);
    Mlp mlp(small_config(3, {6, 5}, 2), rng);
    DenseMatrix x(2, 3);
    for (double& v : x.data) v = rng.normal();
    DenseMatrix d_logits(2, 2);
    for (double& v : d_logits.data) v = rng.normal();

    MlpForwardCache cache;
    mlp_forward_cached(mlp, x, ForwardMode::eval, nullptr, cache);
    MlpGradients grads = zero_gradients(mlp);
    const DenseMatrix dx = mlp_backward(mlp, cache, d_logits, grads);

    auto objective = [&](const DenseMatrix& input) {
        MlpForwardCache c;
        mlp_forward_cached(mlp, input, ForwardMode::eval, nullptr, c);
        double s = 0.0;
        for (std::size_t i = 0; i < c.logits.data.size(); ++i)
            s += c.logits.data[i] * d_logits.data[i];
        return s;
    };
    const double eps = 1e-6;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        DenseMatrix xp = x, xm = x;
        xp.data[i] += eps;
        xm.data[i] -= eps;
        const double fd = (objective(xp) - objective(xm)) / (2.0 * eps);
        CHECK(rel_err(dx.data[i], fd) < 1e-5);
    }
}

TEST_CASE("training separates well-separated blobs perfectly") {
    Rng data_rng(100);
    const std::size_t n_per = 100;
    DenseMatrix x(2 * n_per, 2);
    std::vector<int> y(2 * n_per);
    for (std::size_t i = 0; i < n_per; ++i) {
        x(i, 0) = 5.0 + 0.5 * data_rng.normal();
        x(i, 1) = 5.0 + 0.5 * data_rng.normal();
        y[i] = 0;
        x(n_per + i, 0) = -5.0 + 0.5 * data_rng.normal();
        x(n_per + i, 1) = -5.0 + 0.5 * data_rng.normal();
        y[n_per + i] = 1;
    }
    Rng init_rng(101);
    Mlp mlp(small_config(2, {16, 16}, 2, 0.0, 0.0), init_rng);
    MlpTrainOptions opts;
    opts.epochs = 200;
    opts.batch_size = 64;
    opts.seed = 102;
    const auto history = train_mlp(mlp, x, y, opts);
    REQUIRE(history.size() == 200);
    const auto out = mlp_forward(mlp, x);
    CHECK(classification_accuracy(out.logits, y) == 1.0);
    CHECK(history.back() < history.front());
}

TEST_CASE("same training seed reproduces identical weights") {
    Rng data_rng(200);
    DenseMatrix x(40, 2);
    std::vector<int> y(40);
    for (std::size_t i = 0; i < 40; ++i) {
        x(i, 0) = data_rng.normal();
        x(i, 1) = data_rng.normal();
        y[i] = int(i % 2);
    }
    auto run = [&] {
        Rng init(201);
        Mlp mlp(small_config(2, {8}, 2, 0.01, 0.2), init);
        MlpTrainOptions opts;
        opts.epochs = 20;
        opts.batch_size = 16;
        opts.seed = 202;
        train_mlp(mlp, x, y, opts);
        return mlp;
    };
    const Mlp a = run();
    const Mlp b = run();
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        CHECK(a.layers[l].weights.data == b.layers[l].weights.data);
        CHECK(a.layers[l].bias.data == b.layers[l].bias.data);
    }
}

TEST_CASE("zero epochs leave the network untouched") {
    Rng rng(300);
    Mlp mlp(small_config(2, {4}, 2), rng);
    const auto before = mlp.layers;
    DenseMatrix x(4, 2, 1.0);
    MlpTrainOptions opts;
    opts.epochs = 0;
    const auto history = train_mlp(mlp, x, {0, 1, 0, 1}, opts);
    CHECK(history.empty());
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        CHECK(mlp.layers[l].weights.data == before[l].weights.data);
        CHECK(mlp.layers[l].bias.data == before[l].bias.data);
    }
}

TEST_CASE("training an empty dataset is rejected") {
    Rng rng(301);
    Mlp mlp(small_config(2, {4}, 2), rng);
    DenseMatrix x(0, 2);
    MlpTrainOptions opts;
    CHECK_THROWS_AS(train_mlp(mlp, x, {}, opts), std::invalid_argument);
}

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "bacoun/errors.hpp"
#include "bacoun/matrix.hpp"
#include "bacoun/prob.hpp"
#include "bacoun/rng.hpp"

namespace bacoun {

// Feed-forward classifier configuration. The only activation is LeakyReLU;
// the slope is configurable, dropout is inverted (scaled at train time).
struct MlpConfig {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims;
    std::size_t output_dim = 0;
    double leaky_slope = 0.01;
    double dropout_rate = 0.0;
    double l2_penalty = 0.0;

    void validate() const {
        if (input_dim == 0 || output_dim == 0)
            throw std::invalid_argument("MlpConfig: zero input or output dimension");
        if (hidden_dims.empty())
            throw std::invalid_argument("MlpConfig: hidden_dims must be nonempty");
        for (std::size_t h : hidden_dims)
            if (h == 0) throw std::invalid_argument("MlpConfig: zero hidden dimension");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            throw std::invalid_argument("MlpConfig: dropout_rate must be in [0,1)");
        if (l2_penalty < 0.0)
            throw std::invalid_argument("MlpConfig: l2_penalty must be >= 0");
    }

    std::vector<std::size_t> layer_dims() const {
        std::vector<std::size_t> dims;
        dims.push_back(input_dim);
        dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
        dims.push_back(output_dim);
        return dims;
    }
};

struct MlpLayer {
    DenseMatrix weights; // (in x out)
    DenseMatrix bias;    // (1 x out)
};

struct Mlp {
    MlpConfig config;
    std::vector<MlpLayer> layers;

    Mlp() = default;

    // He-normal weights, zero biases.
    Mlp(MlpConfig cfg, Rng& rng) : config(std::move(cfg)) {
        config.validate();
        const auto dims = config.layer_dims();
        layers.resize(dims.size() - 1);
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            layers[l].weights = DenseMatrix(dims[l], dims[l + 1]);
            layers[l].bias = DenseMatrix(1, dims[l + 1]);
            const double std = std::sqrt(2.0 / static_cast<double>(dims[l]));
            for (double& w : layers[l].weights.data) w = rng.normal(0.0, std);
        }
    }

    std::size_t last_hidden_dim() const { return config.hidden_dims.back(); }
    // Bias-augmented feature width seen by the last-layer classifier.
    std::size_t feature_dim() const { return last_hidden_dim() + 1; }

    void validate_shapes() const {
        config.validate();
        const auto dims = config.layer_dims();
        if (layers.size() != dims.size() - 1)
            throw ShapeError("Mlp: layer count does not match config");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            require_shape(layers[l].weights, dims[l], dims[l + 1], "Mlp weights");
            require_shape(layers[l].bias, 1, dims[l + 1], "Mlp bias");
        }
    }
};

enum class ForwardMode { train, eval };

// Per-layer tensors retained for backpropagation.
struct MlpForwardCache {
    std::vector<DenseMatrix> inputs;       // input to each layer
    std::vector<DenseMatrix> pre;          // pre-activation of hidden layers
    std::vector<DenseMatrix> drop_scales;  // inverted-dropout multipliers (train only)
    DenseMatrix logits;
};

namespace detail {

inline void add_bias_rows(DenseMatrix& m, const DenseMatrix& bias) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* row = m.row_ptr(i);
        for (std::size_t j = 0; j < m.cols; ++j) row[j] += bias.data[j];
    }
}

} // namespace detail

// Forward pass retaining intermediates. In train mode dropout masks are drawn
// from `rng`; eval mode is deterministic (inverted dropout needs no rescale).
inline void mlp_forward_cached(const Mlp& mlp, const DenseMatrix& x,
                               ForwardMode mode, Rng* rng, MlpForwardCache& cache) {
    if (x.cols != mlp.config.input_dim) {
        throw ShapeError("mlp_forward: input has " + std::to_string(x.cols) +
                         " columns, model expects " +
                         std::to_string(mlp.config.input_dim));
    }
    const bool dropping =
        mode == ForwardMode::train && mlp.config.dropout_rate > 0.0;
    if (dropping && rng == nullptr)
        throw std::invalid_argument("mlp_forward: train mode with dropout needs an rng");

    const std::size_t n_hidden = mlp.config.hidden_dims.size();
    cache.inputs.assign(mlp.layers.size(), {});
    cache.pre.assign(n_hidden, {});
    cache.drop_scales.assign(n_hidden, {});

    DenseMatrix a = x;
    const double slope = mlp.config.leaky_slope;
    const double keep = 1.0 - mlp.config.dropout_rate;
    for (std::size_t l = 0; l < n_hidden; ++l) {
        cache.inputs[l] = a;
        DenseMatrix z = matmul(a, mlp.layers[l].weights);
        detail::add_bias_rows(z, mlp.layers[l].bias);
        cache.pre[l] = z;
        for (double& v : z.data) {
            if (v < 0.0) v *= slope;
        }
        if (dropping) {
            DenseMatrix scales(z.rows, z.cols);
            for (std::size_t i = 0; i < z.data.size(); ++i) {
                scales.data[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
                z.data[i] *= scales.data[i];
            }
            cache.drop_scales[l] = std::move(scales);
        }
        a = std::move(z);
    }
    cache.inputs.back() = a;
    DenseMatrix logits = matmul(a, mlp.layers.back().weights);
    detail::add_bias_rows(logits, mlp.layers.back().bias);
    cache.logits = std::move(logits);
}

struct MlpOutputs {
    DenseMatrix logits;   // (N x output_dim)
    DenseMatrix features; // (N x last_hidden_dim+1), final column all ones
};

inline MlpOutputs mlp_forward(const Mlp& mlp, const DenseMatrix& x,
                              ForwardMode mode = ForwardMode::eval,
                              Rng* rng = nullptr) {
    MlpForwardCache cache;
    mlp_forward_cached(mlp, x, mode, rng, cache);
    const DenseMatrix& h = cache.inputs.back();
    DenseMatrix features(h.rows, h.cols + 1);
    for (std::size_t i = 0; i < h.rows; ++i) {
        const double* src = h.row_ptr(i);
        double* dst = features.row_ptr(i);
        for (std::size_t j = 0; j < h.cols; ++j) dst[j] = src[j];
        dst[h.cols] = 1.0;
    }
    return {std::move(cache.logits), std::move(features)};
}

using MlpGradients = std::vector<MlpLayer>;

inline MlpGradients zero_gradients(const Mlp& mlp) {
    MlpGradients g(mlp.layers.size());
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        g[l].weights = DenseMatrix(mlp.layers[l].weights.rows, mlp.layers[l].weights.cols);
        g[l].bias = DenseMatrix(1, mlp.layers[l].bias.cols);
    }
    return g;
}

// Backpropagate an arbitrary gradient w.r.t. the logits. Returns dL/dx and
// fills parameter gradients (no regularization term; callers add their own).
inline DenseMatrix mlp_backward(const Mlp& mlp, const MlpForwardCache& cache,
                                const DenseMatrix& d_logits, MlpGradients& grads) {
    const std::size_t n_hidden = mlp.config.hidden_dims.size();
    const double slope = mlp.config.leaky_slope;

    grads.back().weights = matmul_at(cache.inputs.back(), d_logits);
    grads.back().bias = column_sums(d_logits);
    DenseMatrix da = matmul_bt(d_logits, mlp.layers.back().weights);

    for (std::size_t l = n_hidden; l-- > 0;) {
        if (!cache.drop_scales[l].empty()) {
            for (std::size_t i = 0; i < da.data.size(); ++i)
                da.data[i] *= cache.drop_scales[l].data[i];
        }
        const DenseMatrix& z = cache.pre[l];
        for (std::size_t i = 0; i < da.data.size(); ++i) {
            if (z.data[i] < 0.0) da.data[i] *= slope;
        }
        grads[l].weights = matmul_at(cache.inputs[l], da);
        grads[l].bias = column_sums(da);
        da = matmul_bt(da, mlp.layers[l].weights);
    }
    return da;
}

struct LossAndGrad {
    double loss = 0.0;
    MlpGradients grads;
};

// Mean cross-entropy over the batch plus l2 * sum of squared weights (biases
// excluded). Gradients are exact; checked against central differences.
inline LossAndGrad loss_and_grad(const Mlp& mlp, const DenseMatrix& x,
                                 const std::vector<int>& y, double l2,
                                 ForwardMode mode = ForwardMode::train,
                                 Rng* rng = nullptr) {
    if (x.rows == 0) throw std::invalid_argument("loss_and_grad: empty batch");
    if (y.size() != x.rows)
        throw ShapeError("loss_and_grad: label count does not match rows");
    const std::size_t k = mlp.config.output_dim;
    for (int label : y) {
        if (label < 0 || static_cast<std::size_t>(label) >= k)
            throw std::invalid_argument("loss_and_grad: label " +
                                        std::to_string(label) + " out of range");
    }

    MlpForwardCache cache;
    mlp_forward_cached(mlp, x, mode, rng, cache);

    const std::size_t n = x.rows;
    DenseMatrix probs = cache.logits;
    softmax_rows(probs);

    double ce = 0.0;
    DenseMatrix d_logits = probs;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t yi = static_cast<std::size_t>(y[i]);
        ce -= std::log(std::max(probs(i, yi), 1e-300));
        d_logits(i, yi) -= 1.0;
    }
    ce *= inv_n;
    scale_inplace(d_logits, inv_n);

    LossAndGrad out;
    out.grads = zero_gradients(mlp);
    mlp_backward(mlp, cache, d_logits, out.grads);

    double penalty = 0.0;
    if (l2 > 0.0) {
        for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
            penalty += sum_squares(mlp.layers[l].weights);
            add_inplace(out.grads[l].weights, mlp.layers[l].weights, 2.0 * l2);
        }
    }
    out.loss = ce + l2 * penalty;
    return out;
}

// Adam with bias correction over an arbitrary flat parameter list; moment
// buffers are allocated lazily against the first gradients seen.
struct AdamState {
    std::size_t step = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<DenseMatrix> m;
    std::vector<DenseMatrix> v;

    void validate() const {
        if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0))
            throw std::invalid_argument("AdamState: betas must be in (0,1)");
        if (learning_rate <= 0.0)
            throw std::invalid_argument("AdamState: learning_rate must be > 0");
    }
};

inline void adam_step(const std::vector<DenseMatrix*>& params,
                      const std::vector<const DenseMatrix*>& grads,
                      AdamState& state) {
    if (params.size() != grads.size())
        throw ShapeError("adam_step: parameter/gradient count mismatch");
    if (state.m.empty()) {
        state.validate();
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i] = DenseMatrix(params[i]->rows, params[i]->cols);
            state.v[i] = DenseMatrix(params[i]->rows, params[i]->cols);
        }
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        DenseMatrix& w = *params[p];
        const DenseMatrix& g = *grads[p];
        DenseMatrix& m = state.m[p];
        DenseMatrix& v = state.v[p];
        for (std::size_t i = 0; i < w.data.size(); ++i) {
            m.data[i] = state.beta1 * m.data[i] + (1.0 - state.beta1) * g.data[i];
            v.data[i] = state.beta2 * v.data[i] +
                        (1.0 - state.beta2) * g.data[i] * g.data[i];
            const double mhat = m.data[i] / c1;
            const double vhat = v.data[i] / c2;
            w.data[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

inline std::vector<DenseMatrix*> parameter_list(Mlp& mlp) {
    std::vector<DenseMatrix*> out;
    for (auto& layer : mlp.layers) {
        out.push_back(&layer.weights);
        out.push_back(&layer.bias);
    }
    return out;
}

inline std::vector<const DenseMatrix*> gradient_list(const MlpGradients& grads) {
    std::vector<const DenseMatrix*> out;
    for (const auto& layer : grads) {
        out.push_back(&layer.weights);
        out.push_back(&layer.bias);
    }
    return out;
}

struct MlpTrainOptions {
    std::size_t epochs = 500;
    std::size_t batch_size = 256;
    AdamState adam;
    std::uint64_t seed = 0;
};

// Shuffled mini-batch training, last partial batch kept. Returns per-epoch
// mean training loss. Deterministic given the seed.
inline std::vector<double> train_mlp(Mlp& mlp, const DenseMatrix& x,
                                     const std::vector<int>& y,
                                     const MlpTrainOptions& opts) {
    if (x.rows == 0) throw std::invalid_argument("train_mlp: empty dataset");
    if (y.size() != x.rows)
        throw ShapeError("train_mlp: label count does not match rows");
    std::vector<double> history;
    if (opts.epochs == 0) return history;

    Rng rng(opts.seed);
    AdamState adam = opts.adam;
    const auto params = parameter_list(mlp);
    const std::size_t bs = std::max<std::size_t>(1, opts.batch_size);
    std::vector<std::size_t> order(x.rows);
    std::iota(order.begin(), order.end(), 0);

    history.reserve(opts.epochs);
    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::size_t end = std::min(start + bs, order.size());
            std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
            DenseMatrix bx = take_rows(x, idx);
            std::vector<int> by(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) by[i] = y[idx[i]];
            auto lg = loss_and_grad(mlp, bx, by, mlp.config.l2_penalty,
                                    ForwardMode::train, &rng);
            adam_step(params, gradient_list(lg.grads), adam);
            epoch_loss += lg.loss;
            ++n_batches;
        }
        history.push_back(epoch_loss / static_cast<double>(n_batches));
    }
    return history;
}

// Argmax with ties broken toward the lower class index.
inline std::size_t argmax_tie_low(const double* row, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j) {
        if (row[j] > row[best]) best = j;
    }
    return best;
}

inline double classification_accuracy(const DenseMatrix& scores,
                                      const std::vector<int>& y) {
    if (scores.rows != y.size())
        throw ShapeError("classification_accuracy: row/label mismatch");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < scores.rows; ++i) {
        if (argmax_tie_low(scores.row_ptr(i), scores.cols) ==
            static_cast<std::size_t>(y[i]))
            ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(scores.rows);
}

} // namespace bacoun

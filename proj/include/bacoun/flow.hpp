#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <vector>

#include "bacoun/errors.hpp"
#include "bacoun/matrix.hpp"
#include "bacoun/mlp.hpp"
#include "bacoun/rng.hpp"

namespace bacoun {

// Latent-space shell {z : alpha < |z| < beta} whose preimage under a trained
// flow approximates the boundary of the training data.
struct ShellSpec {
    double inner_radius = 3.0;
    double outer_radius = 3.1;

    void validate() const {
        if (!(inner_radius > 0.0 && inner_radius < outer_radius))
            throw std::invalid_argument(
                "ShellSpec: need 0 < inner_radius < outer_radius");
    }
};

// Frozen per-feature affine transform, fitted once from the training data in
// place of batch normalization so that inversion stays exact.
struct AffineNormalizer {
    std::vector<double> shift;
    std::vector<double> scale;
    bool fitted = false;

    void apply(DenseMatrix& x) const {
        if (!fitted) return;
        for (std::size_t i = 0; i < x.rows; ++i) {
            double* row = x.row_ptr(i);
            for (std::size_t j = 0; j < x.cols; ++j)
                row[j] = (row[j] - shift[j]) / scale[j];
        }
    }

    void invert(DenseMatrix& x) const {
        if (!fitted) return;
        for (std::size_t i = 0; i < x.rows; ++i) {
            double* row = x.row_ptr(i);
            for (std::size_t j = 0; j < x.cols; ++j)
                row[j] = row[j] * scale[j] + shift[j];
        }
    }

    double log_det() const {
        if (!fitted) return 0.0;
        double s = 0.0;
        for (double v : scale) s -= std::log(v);
        return s;
    }
};

// One affine coupling transform: masked coordinates pass through and
// condition the scale/translation applied to the rest. The raw scale output
// is squashed to (-scale_bound, scale_bound) so the log-determinant stays
// finite for any input.
struct CouplingLayer {
    std::vector<std::uint8_t> mask; // 1 = pass-through coordinate
    Mlp scale_net;
    Mlp translate_net;
    AffineNormalizer normalizer;
    double scale_bound = 5.0;
};

struct RealNvpFlow {
    std::size_t dim = 0;       // data dimension as seen by callers
    double base_sigma = 1.0;   // std of the latent Gaussian
    std::vector<CouplingLayer> layers;

    // 1-D data is augmented with an auxiliary coordinate because a coupling
    // stack needs at least two coordinates to act on; the auxiliary
    // coordinate is dropped on inversion.
    bool augmented() const { return dim == 1; }
    std::size_t work_dim() const { return augmented() ? 2 : dim; }

    void validate() const {
        if (dim == 0 || layers.empty())
            throw StateError("RealNvpFlow: uninitialized flow");
        if (!(base_sigma > 0.0)) throw StateError("RealNvpFlow: base_sigma <= 0");
        for (const auto& layer : layers) {
            if (layer.mask.size() != work_dim())
                throw StateError("RealNvpFlow: mask length mismatch");
            layer.scale_net.validate_shapes();
            layer.translate_net.validate_shapes();
            for (const auto& l : layer.scale_net.layers)
                if (!l.weights.all_finite() || !l.bias.all_finite())
                    throw StateError("RealNvpFlow: non-finite parameters");
            for (const auto& l : layer.translate_net.layers)
                if (!l.weights.all_finite() || !l.bias.all_finite())
                    throw StateError("RealNvpFlow: non-finite parameters");
        }
    }
};

namespace detail {

// Coupling networks start as the identity map: random hidden layers, final
// layer zeroed.
inline Mlp make_coupling_net(std::size_t dim, std::size_t hidden, Rng& rng) {
    MlpConfig cfg;
    cfg.input_dim = dim;
    cfg.hidden_dims = {hidden};
    cfg.output_dim = dim;
    cfg.leaky_slope = 0.01;
    Mlp net(cfg, rng);
    std::fill(net.layers.back().weights.data.begin(),
              net.layers.back().weights.data.end(), 0.0);
    std::fill(net.layers.back().bias.data.begin(),
              net.layers.back().bias.data.end(), 0.0);
    return net;
}

} // namespace detail

inline RealNvpFlow make_flow(std::size_t dim, std::size_t n_blocks,
                             std::size_t hidden, double base_sigma, Rng& rng) {
    if (dim == 0) throw std::invalid_argument("make_flow: dim must be > 0");
    if (n_blocks == 0) throw std::invalid_argument("make_flow: need >= 1 block");
    RealNvpFlow flow;
    flow.dim = dim;
    flow.base_sigma = base_sigma;
    const std::size_t wd = flow.work_dim();
    flow.layers.resize(n_blocks);
    for (std::size_t l = 0; l < n_blocks; ++l) {
        auto& layer = flow.layers[l];
        layer.mask.resize(wd);
        for (std::size_t j = 0; j < wd; ++j)
            layer.mask[j] = static_cast<std::uint8_t>((j + l) % 2 == 0 ? 1 : 0);
        layer.scale_net = detail::make_coupling_net(wd, hidden, rng);
        layer.translate_net = detail::make_coupling_net(wd, hidden, rng);
    }
    return flow;
}

namespace detail {

// Intermediates for one coupling layer, retained during training.
struct CouplingCache {
    DenseMatrix normed;        // layer input after the affine normalizer
    DenseMatrix masked_input;  // mask applied (conditioner input)
    MlpForwardCache scale_cache;
    MlpForwardCache translate_cache;
    DenseMatrix log_scale;     // squashed, zeroed at masked coordinates
    DenseMatrix raw_scale;     // pre-squash scale-net output
    DenseMatrix translation;   // zeroed at masked coordinates
};

inline void couple_apply(const CouplingLayer& layer, const DenseMatrix& a,
                         DenseMatrix& out, std::vector<double>& log_det,
                         CouplingCache* cache) {
    const std::size_t n = a.rows, d = a.cols;
    DenseMatrix masked = a;
    for (std::size_t i = 0; i < n; ++i) {
        double* row = masked.row_ptr(i);
        for (std::size_t j = 0; j < d; ++j)
            if (!layer.mask[j]) row[j] = 0.0;
    }

    MlpForwardCache scale_cache, translate_cache;
    mlp_forward_cached(layer.scale_net, masked, ForwardMode::eval, nullptr,
                       scale_cache);
    mlp_forward_cached(layer.translate_net, masked, ForwardMode::eval, nullptr,
                       translate_cache);
    DenseMatrix raw = scale_cache.logits;
    DenseMatrix log_scale(n, d);
    DenseMatrix translation = translate_cache.logits;
    const double bound = layer.scale_bound;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            if (layer.mask[j]) {
                log_scale(i, j) = 0.0;
                translation(i, j) = 0.0;
            } else {
                log_scale(i, j) = bound * std::tanh(raw(i, j) / bound);
            }
        }
    }

    out = a;
    for (std::size_t i = 0; i < n; ++i) {
        double* row = out.row_ptr(i);
        double ld = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            if (!layer.mask[j]) {
                const double s = log_scale(i, j);
                row[j] = row[j] * std::exp(s) + translation(i, j);
                ld += s;
            }
        }
        log_det[i] += ld;
    }

    if (cache) {
        cache->masked_input = std::move(masked);
        cache->scale_cache = std::move(scale_cache);
        cache->translate_cache = std::move(translate_cache);
        cache->log_scale = std::move(log_scale);
        cache->raw_scale = std::move(raw);
        cache->translation = std::move(translation);
    }
}

inline void couple_invert(const CouplingLayer& layer, const DenseMatrix& v,
                          DenseMatrix& out, std::vector<double>& log_det) {
    const std::size_t n = v.rows, d = v.cols;
    DenseMatrix masked = v;
    for (std::size_t i = 0; i < n; ++i) {
        double* row = masked.row_ptr(i);
        for (std::size_t j = 0; j < d; ++j)
            if (!layer.mask[j]) row[j] = 0.0;
    }
    const DenseMatrix raw = mlp_forward(layer.scale_net, masked).logits;
    const DenseMatrix trans = mlp_forward(layer.translate_net, masked).logits;
    const double bound = layer.scale_bound;
    out = v;
    for (std::size_t i = 0; i < n; ++i) {
        double* row = out.row_ptr(i);
        double ld = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            if (!layer.mask[j]) {
                const double s = bound * std::tanh(raw(i, j) / bound);
                row[j] = (row[j] - trans(i, j)) * std::exp(-s);
                ld -= s;
            }
        }
        log_det[i] += ld;
    }
}

// Forward in working coordinates; per-layer caches optional.
inline DenseMatrix flow_forward_work(const RealNvpFlow& flow, const DenseMatrix& xw,
                                     std::vector<double>& log_det,
                                     std::vector<CouplingCache>* caches) {
    log_det.assign(xw.rows, 0.0);
    DenseMatrix h = xw;
    if (caches) caches->resize(flow.layers.size());
    for (std::size_t l = 0; l < flow.layers.size(); ++l) {
        const auto& layer = flow.layers[l];
        layer.normalizer.apply(h);
        const double norm_ld = layer.normalizer.log_det();
        for (double& ld : log_det) ld += norm_ld;
        if (caches) (*caches)[l].normed = h;
        DenseMatrix next;
        couple_apply(layer, h, next, log_det, caches ? &(*caches)[l] : nullptr);
        h = std::move(next);
    }
    return h;
}

inline DenseMatrix lift_aux(const DenseMatrix& x, double aux_value) {
    DenseMatrix out(x.rows, 2);
    for (std::size_t i = 0; i < x.rows; ++i) {
        out(i, 0) = x(i, 0);
        out(i, 1) = aux_value;
    }
    return out;
}

} // namespace detail

struct FlowForwardResult {
    DenseMatrix z;               // latent points (work_dim columns)
    std::vector<double> log_det; // per-row log |det df/dx|
};

// Map data to latent space. For 1-D flows the input is lifted with a zero
// auxiliary coordinate and the latent has two columns.
inline FlowForwardResult flow_forward(const RealNvpFlow& flow, const DenseMatrix& x) {
    flow.validate();
    if (x.cols != flow.dim)
        throw ShapeError("flow_forward: input " + shape_str(x) + " vs dim " +
                         std::to_string(flow.dim));
    if (!x.all_finite())
        throw std::invalid_argument("flow_forward: non-finite input");
    FlowForwardResult out;
    const DenseMatrix xw = flow.augmented() ? detail::lift_aux(x, 0.0) : x;
    out.z = detail::flow_forward_work(flow, xw, out.log_det, nullptr);
    return out;
}

struct FlowInverseResult {
    DenseMatrix x;               // data points (dim columns, auxiliary dropped)
    std::vector<double> log_det; // per-row log |det df^{-1}/dz|
};

inline FlowInverseResult flow_inverse(const RealNvpFlow& flow, const DenseMatrix& z) {
    flow.validate();
    if (z.cols != flow.work_dim())
        throw ShapeError("flow_inverse: latent " + shape_str(z) + " vs dim " +
                         std::to_string(flow.work_dim()));
    if (!z.all_finite())
        throw std::invalid_argument("flow_inverse: non-finite input");
    FlowInverseResult out;
    out.log_det.assign(z.rows, 0.0);
    DenseMatrix h = z;
    for (std::size_t l = flow.layers.size(); l-- > 0;) {
        const auto& layer = flow.layers[l];
        DenseMatrix prev;
        detail::couple_invert(layer, h, prev, out.log_det);
        layer.normalizer.invert(prev);
        const double norm_ld = -layer.normalizer.log_det();
        for (double& ld : out.log_det) ld += norm_ld;
        h = std::move(prev);
    }
    if (flow.augmented()) {
        DenseMatrix x1(h.rows, 1);
        for (std::size_t i = 0; i < h.rows; ++i) x1(i, 0) = h(i, 0);
        out.x = std::move(x1);
    } else {
        out.x = std::move(h);
    }
    return out;
}

namespace detail {

inline double base_log_density(const RealNvpFlow& flow, const double* z,
                               std::size_t d) {
    const double s2 = flow.base_sigma * flow.base_sigma;
    double q = 0.0;
    for (std::size_t j = 0; j < d; ++j) q += z[j] * z[j];
    return -0.5 * static_cast<double>(d) *
               std::log(2.0 * std::numbers::pi * s2) -
           q / (2.0 * s2);
}

inline std::vector<double> log_prob_work(const RealNvpFlow& flow,
                                         const DenseMatrix& xw) {
    std::vector<double> log_det;
    const DenseMatrix z = flow_forward_work(flow, xw, log_det, nullptr);
    std::vector<double> lp(xw.rows);
    for (std::size_t i = 0; i < xw.rows; ++i)
        lp[i] = base_log_density(flow, z.row_ptr(i), z.cols) + log_det[i];
    return lp;
}

} // namespace detail

// Exact log-density via the change of variables. For 1-D flows the auxiliary
// coordinate is integrated out by trapezoidal quadrature over [-8, 8].
inline std::vector<double> flow_log_prob(const RealNvpFlow& flow,
                                         const DenseMatrix& x) {
    flow.validate();
    if (x.cols != flow.dim)
        throw ShapeError("flow_log_prob: input " + shape_str(x) + " vs dim " +
                         std::to_string(flow.dim));
    if (!x.all_finite())
        throw std::invalid_argument("flow_log_prob: non-finite input");

    if (!flow.augmented()) {
        return detail::log_prob_work(flow, x);
    }

    constexpr std::size_t kNodes = 81;
    constexpr double kLo = -8.0, kHi = 8.0;
    const double h = (kHi - kLo) / static_cast<double>(kNodes - 1);
    std::vector<std::vector<double>> joint(kNodes);
    for (std::size_t k = 0; k < kNodes; ++k) {
        const double a = kLo + h * static_cast<double>(k);
        joint[k] = detail::log_prob_work(flow, detail::lift_aux(x, a));
    }
    std::vector<double> lp(x.rows);
    std::vector<double> terms(kNodes);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t k = 0; k < kNodes; ++k) {
            const double w = (k == 0 || k == kNodes - 1) ? 0.5 * h : h;
            terms[k] = joint[k][i] + std::log(w);
        }
        lp[i] = log_sum_exp(terms);
    }
    return lp;
}

// Uniform directions on the sphere, radii uniform in (alpha, beta); every
// returned row has norm strictly inside the shell.
inline DenseMatrix sample_shell(const ShellSpec& spec, std::size_t dim,
                                std::size_t n, Rng& rng) {
    spec.validate();
    if (dim == 0 || n == 0)
        throw std::invalid_argument("sample_shell: dim and n must be > 0");
    DenseMatrix out(n, dim);
    std::vector<double> u(dim);
    for (std::size_t i = 0; i < n; ++i) {
        double norm = 0.0;
        do {
            norm = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                u[j] = rng.normal();
                norm += u[j] * u[j];
            }
            norm = std::sqrt(norm);
        } while (norm < 1e-12);
        const double r = rng.uniform(spec.inner_radius, spec.outer_radius);
        double* row = out.row_ptr(i);
        for (std::size_t j = 0; j < dim; ++j) row[j] = r * u[j] / norm;
    }
    return out;
}

// Boundary points: latent shell samples mapped back through the inverse flow.
inline DenseMatrix generate_boundary(const RealNvpFlow& flow, const ShellSpec& spec,
                                     std::size_t n, Rng& rng) {
    flow.validate();
    const DenseMatrix z = sample_shell(spec, flow.work_dim(), n, rng);
    return flow_inverse(flow, z).x;
}

struct FlowTrainOptions {
    std::size_t epochs = 200;
    std::size_t batch_size = 256;
    double learning_rate = 1e-3;
    double l2 = 0.0;
    std::uint64_t seed = 0;
};

namespace detail {

inline void collect_flow_params(RealNvpFlow& flow, std::vector<DenseMatrix*>& params,
                                std::vector<DenseMatrix*>& weight_only) {
    for (auto& layer : flow.layers) {
        for (Mlp* net : {&layer.scale_net, &layer.translate_net}) {
            for (auto& l : net->layers) {
                params.push_back(&l.weights);
                params.push_back(&l.bias);
                weight_only.push_back(&l.weights);
            }
        }
    }
}

// Sequential data-dependent initialization of the per-layer normalizers:
// each layer standardizes what the stack below it produces, then statistics
// are frozen.
inline void fit_normalizers(RealNvpFlow& flow, const DenseMatrix& xw) {
    DenseMatrix h = xw;
    for (auto& layer : flow.layers) {
        const std::size_t n = h.rows, d = h.cols;
        auto& nz = layer.normalizer;
        nz.shift.assign(d, 0.0);
        nz.scale.assign(d, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = h.row_ptr(i);
            for (std::size_t j = 0; j < d; ++j) nz.shift[j] += row[j];
        }
        for (std::size_t j = 0; j < d; ++j) nz.shift[j] /= static_cast<double>(n);
        std::vector<double> var(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = h.row_ptr(i);
            for (std::size_t j = 0; j < d; ++j) {
                const double c = row[j] - nz.shift[j];
                var[j] += c * c;
            }
        }
        for (std::size_t j = 0; j < d; ++j) {
            var[j] /= static_cast<double>(n);
            nz.scale[j] = var[j] > 1e-24 ? std::sqrt(var[j]) : 1.0;
        }
        nz.fitted = true;

        nz.apply(h);
        DenseMatrix next;
        std::vector<double> ld(n, 0.0);
        couple_apply(layer, h, next, ld, nullptr);
        h = std::move(next);
    }
}

// Mean negative log-likelihood of a batch plus its gradient w.r.t. all
// coupling-network parameters (appended to `grads` in collect order).
inline double flow_nll_and_grad(const RealNvpFlow& flow, const DenseMatrix& xw,
                                std::vector<DenseMatrix>& grads) {
    const std::size_t n = xw.rows;
    const double inv_n = 1.0 / static_cast<double>(n);

    std::vector<CouplingCache> caches;
    std::vector<double> log_det;
    const DenseMatrix z = flow_forward_work(flow, xw, log_det, &caches);

    double nll = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        nll -= base_log_density(flow, z.row_ptr(i), z.cols) + log_det[i];
    nll *= inv_n;

    // dL/dz for L = -(1/n) sum log N(z; 0, sigma^2 I).
    const double s2 = flow.base_sigma * flow.base_sigma;
    DenseMatrix g = z;
    scale_inplace(g, inv_n / s2);
    const double g_log_det = -inv_n; // dL/d(log_det), identical for every row

    grads.clear();
    std::vector<DenseMatrix> layer_grads;
    for (std::size_t l = flow.layers.size(); l-- > 0;) {
        const auto& layer = flow.layers[l];
        auto& cache = caches[l];
        const std::size_t d = g.cols;

        // Through the coupling transform.
        DenseMatrix d_scale_out(g.rows, d);
        DenseMatrix d_trans_out(g.rows, d);
        DenseMatrix da(g.rows, d);
        const double bound = layer.scale_bound;
        for (std::size_t i = 0; i < g.rows; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                if (layer.mask[j]) {
                    da(i, j) = g(i, j);
                } else {
                    const double s = cache.log_scale(i, j);
                    const double es = std::exp(s);
                    const double ds = g(i, j) * cache.normed(i, j) * es + g_log_det;
                    const double th = std::tanh(cache.raw_scale(i, j) / bound);
                    d_scale_out(i, j) = ds * (1.0 - th * th);
                    d_trans_out(i, j) = g(i, j);
                    da(i, j) = g(i, j) * es;
                }
            }
        }

        MlpGradients sgrads = zero_gradients(layer.scale_net);
        MlpGradients tgrads = zero_gradients(layer.translate_net);
        DenseMatrix d_masked_s =
            mlp_backward(layer.scale_net, cache.scale_cache, d_scale_out, sgrads);
        DenseMatrix d_masked_t = mlp_backward(layer.translate_net,
                                              cache.translate_cache, d_trans_out,
                                              tgrads);
        for (std::size_t i = 0; i < da.rows; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                if (layer.mask[j])
                    da(i, j) += d_masked_s(i, j) + d_masked_t(i, j);
            }
        }

        // Through the frozen normalizer.
        if (layer.normalizer.fitted) {
            for (std::size_t i = 0; i < da.rows; ++i) {
                double* row = da.row_ptr(i);
                for (std::size_t j = 0; j < d; ++j)
                    row[j] /= layer.normalizer.scale[j];
            }
        }
        g = std::move(da);

        // Prepend this layer's gradients (collect order is front-to-back).
        std::vector<DenseMatrix> here;
        for (auto& lg : sgrads) {
            here.push_back(std::move(lg.weights));
            here.push_back(std::move(lg.bias));
        }
        for (auto& lg : tgrads) {
            here.push_back(std::move(lg.weights));
            here.push_back(std::move(lg.bias));
        }
        layer_grads.insert(layer_grads.begin(),
                           std::make_move_iterator(here.begin()),
                           std::make_move_iterator(here.end()));
    }
    grads = std::move(layer_grads);
    return nll;
}

} // namespace detail

// Maximum-likelihood training by Adam; returns the mean training NLL at
// initialization followed by one entry per epoch. epochs = 0 leaves the flow
// untouched.
inline std::vector<double> train_flow(RealNvpFlow& flow, const DenseMatrix& x,
                                      const FlowTrainOptions& opts) {
    if (x.rows == 0) throw std::invalid_argument("train_flow: empty data");
    std::vector<double> history;
    if (opts.epochs == 0) return history;
    flow.validate();
    if (x.cols != flow.dim)
        throw ShapeError("train_flow: data " + shape_str(x) + " vs dim " +
                         std::to_string(flow.dim));

    Rng rng(opts.seed);
    auto lift = [&](const DenseMatrix& src) {
        if (!flow.augmented()) return src;
        DenseMatrix out(src.rows, 2);
        for (std::size_t i = 0; i < src.rows; ++i) {
            out(i, 0) = src(i, 0);
            out(i, 1) = rng.normal();
        }
        return out;
    };

    DenseMatrix xw = lift(x);
    if (!flow.layers.front().normalizer.fitted) detail::fit_normalizers(flow, xw);

    std::vector<DenseMatrix*> params, weights;
    detail::collect_flow_params(flow, params, weights);
    AdamState adam;
    adam.learning_rate = opts.learning_rate;

    auto full_nll = [&](const DenseMatrix& m) {
        const auto lp = detail::log_prob_work(flow, m);
        double s = 0.0;
        for (double v : lp) s -= v;
        return s / static_cast<double>(m.rows);
    };
    history.push_back(full_nll(xw));

    const std::size_t bs = std::max<std::size_t>(1, opts.batch_size);
    std::vector<std::size_t> order(x.rows);
    std::iota(order.begin(), order.end(), 0);
    std::vector<DenseMatrix> grads;
    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        if (flow.augmented() && epoch > 0) xw = lift(x);
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::size_t end = std::min(start + bs, order.size());
            std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
            DenseMatrix batch = take_rows(xw, idx);
            const double nll = detail::flow_nll_and_grad(flow, batch, grads);
            if (!std::isfinite(nll))
                throw NumericalError("train_flow: non-finite loss at epoch " +
                                     std::to_string(epoch));
            if (opts.l2 > 0.0) {
                std::size_t w = 0;
                for (std::size_t p = 0; p < params.size(); ++p) {
                    if (w < weights.size() && params[p] == weights[w]) {
                        add_inplace(grads[p], *weights[w], 2.0 * opts.l2);
                        ++w;
                    }
                }
            }
            std::vector<const DenseMatrix*> gptrs;
            gptrs.reserve(grads.size());
            for (const auto& gm : grads) gptrs.push_back(&gm);
            adam_step(params, gptrs, adam);
        }
        history.push_back(full_nll(xw));
    }
    return history;
}

struct OutlierFilterResult {
    std::vector<std::size_t> kept;
    std::vector<std::size_t> removed;
    std::vector<double> log_probs;
};

// Remove the k rows with the lowest flow log-density; ties broken by removing
// the lower row index first. Purely rank-based.
inline OutlierFilterResult outlier_filter(const RealNvpFlow& flow,
                                          const DenseMatrix& x, std::size_t k) {
    if (k > x.rows)
        throw std::invalid_argument("outlier_filter: k exceeds row count");
    OutlierFilterResult out;
    out.log_probs = flow_log_prob(flow, x);
    std::vector<std::size_t> order(x.rows);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (out.log_probs[a] != out.log_probs[b])
            return out.log_probs[a] < out.log_probs[b];
        return a < b;
    });
    out.removed.assign(order.begin(), order.begin() + k);
    out.kept.assign(order.begin() + k, order.end());
    std::sort(out.removed.begin(), out.removed.end());
    std::sort(out.kept.begin(), out.kept.end());
    return out;
}

} // namespace bacoun

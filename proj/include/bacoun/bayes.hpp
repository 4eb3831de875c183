#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bacoun/errors.hpp"
#include "bacoun/matrix.hpp"
#include "bacoun/mlp.hpp"
#include "bacoun/prob.hpp"
#include "bacoun/rng.hpp"

namespace bacoun {

// Multiclass logistic regression over fixed bias-augmented features with an
// independent Gaussian prior on every weight entry (bias row included).
struct LastLayerModel {
    DenseMatrix features; // N x (L+1)
    std::vector<int> labels;
    std::size_t class_count = 0;
    double prior_std = 1.0;

    void validate() const {
        if (class_count < 2)
            throw std::invalid_argument("LastLayerModel: need >= 2 classes");
        if (!(prior_std > 0.0))
            throw std::invalid_argument("LastLayerModel: prior_std must be > 0");
        if (labels.size() != features.rows)
            throw ShapeError("LastLayerModel: label count does not match rows");
        if (!features.all_finite())
            throw std::invalid_argument("LastLayerModel: non-finite features");
        for (int y : labels)
            if (y < 0 || static_cast<std::size_t>(y) >= class_count)
                throw std::invalid_argument("LastLayerModel: label out of range");
    }

    std::size_t weight_rows() const { return features.cols; }
};

struct LogDensityResult {
    double value = 0.0;
    DenseMatrix grad;
};

// Data log-likelihood sum_n log softmax(Phi_n W)_{y_n} and its gradient.
inline LogDensityResult log_likelihood_and_grad(const LastLayerModel& model,
                                                const DenseMatrix& w) {
    if (w.rows != model.weight_rows() || w.cols != model.class_count)
        throw ShapeError("log_likelihood: weights " + shape_str(w) +
                         ", expected (" + std::to_string(model.weight_rows()) +
                         "x" + std::to_string(model.class_count) + ")");
    LogDensityResult out;
    if (model.features.rows == 0) {
        out.grad = DenseMatrix(w.rows, w.cols);
        return out;
    }
    DenseMatrix probs = matmul(model.features, w);
    softmax_rows(probs);
    double ll = 0.0;
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const std::size_t yi = static_cast<std::size_t>(model.labels[i]);
        ll += std::log(std::max(probs(i, yi), 1e-300));
        probs(i, yi) -= 1.0;
    }
    scale_inplace(probs, -1.0); // now Y - P
    out.value = ll;
    out.grad = matmul_at(model.features, probs);
    return out;
}

// Unnormalized log-posterior: likelihood plus the Gaussian prior term
// -|W|^2 / (2 prior_std^2), constants dropped.
inline LogDensityResult log_posterior_and_grad(const LastLayerModel& model,
                                               const DenseMatrix& w) {
    LogDensityResult out = log_likelihood_and_grad(model, w);
    const double inv_var = 1.0 / (model.prior_std * model.prior_std);
    out.value -= 0.5 * inv_var * sum_squares(w);
    add_inplace(out.grad, w, -inv_var);
    return out;
}

struct HmcConfig {
    std::size_t total_iterations = 1000;
    std::size_t burn_in = 100;
    std::size_t leapfrog_steps = 30;
    double step_size = 0.01;
    std::uint64_t seed = 0;

    void validate() const {
        if (burn_in >= total_iterations)
            throw std::invalid_argument("HmcConfig: burn_in must be < total_iterations");
        if (leapfrog_steps < 1)
            throw std::invalid_argument("HmcConfig: leapfrog_steps must be >= 1");
        if (!(step_size > 0.0))
            throw std::invalid_argument("HmcConfig: step_size must be > 0");
    }
};

enum class InferenceMethod { hmc, vi, mc_dropout };

inline const char* method_name(InferenceMethod m) {
    switch (m) {
        case InferenceMethod::hmc: return "hmc";
        case InferenceMethod::vi: return "vi";
        case InferenceMethod::mc_dropout: return "mc_dropout";
    }
    return "unknown";
}

struct PosteriorSamples {
    std::vector<DenseMatrix> samples; // each (L+1) x K
    double acceptance_rate = 0.0;
    InferenceMethod method = InferenceMethod::hmc;
};

// Fixed-path Hamiltonian Monte Carlo with a unit mass matrix. The step size
// is adapted only during burn-in (halved when the trailing window acceptance
// drops below 0.4, grown by 1.2 above 0.9) and frozen afterwards.
inline PosteriorSamples hmc_sample(const LastLayerModel& model,
                                   const HmcConfig& config) {
    config.validate();
    model.validate();
    Rng rng(config.seed);

    DenseMatrix w(model.weight_rows(), model.class_count);
    LogDensityResult cur = log_posterior_and_grad(model, w);
    if (!std::isfinite(cur.value))
        throw NumericalError("hmc_sample: non-finite log-posterior at initialization");

    double step = config.step_size;
    constexpr std::size_t kWindow = 10;
    std::size_t window_accepts = 0, window_count = 0;
    std::size_t kept_accepts = 0;

    PosteriorSamples out;
    out.method = InferenceMethod::hmc;
    out.samples.reserve(config.total_iterations - config.burn_in);

    DenseMatrix momentum(w.rows, w.cols);
    for (std::size_t iter = 0; iter < config.total_iterations; ++iter) {
        for (double& p : momentum.data) p = rng.normal();
        const double h0 = -cur.value + 0.5 * sum_squares(momentum);

        DenseMatrix w_prop = w;
        DenseMatrix p_prop = momentum;
        LogDensityResult lp = cur;
        for (std::size_t s = 0; s < config.leapfrog_steps; ++s) {
            add_inplace(p_prop, lp.grad, 0.5 * step);
            add_inplace(w_prop, p_prop, step);
            lp = log_posterior_and_grad(model, w_prop);
            add_inplace(p_prop, lp.grad, 0.5 * step);
        }
        const double h1 = -lp.value + 0.5 * sum_squares(p_prop);

        bool accept = false;
        if (std::isfinite(h1)) {
            const double log_ratio = h0 - h1;
            accept = log_ratio >= 0.0 || std::log(rng.uniform()) < log_ratio;
        }
        if (accept) {
            w = std::move(w_prop);
            cur = std::move(lp);
        }

        if (iter < config.burn_in) {
            window_accepts += accept ? 1 : 0;
            if (++window_count == kWindow) {
                const double rate = static_cast<double>(window_accepts) /
                                    static_cast<double>(kWindow);
                if (rate < 0.4) step *= 0.5;
                else if (rate > 0.9) step *= 1.2;
                window_accepts = 0;
                window_count = 0;
            }
        } else {
            kept_accepts += accept ? 1 : 0;
            out.samples.push_back(w);
        }
    }
    out.acceptance_rate = static_cast<double>(kept_accepts) /
                          static_cast<double>(out.samples.size());
    return out;
}

// Deterministic even thinning down to at most `target` samples.
inline PosteriorSamples thin_samples(const PosteriorSamples& in, std::size_t target) {
    if (target == 0) throw std::invalid_argument("thin_samples: target must be > 0");
    if (in.samples.size() <= target) return in;
    PosteriorSamples out;
    out.acceptance_rate = in.acceptance_rate;
    out.method = in.method;
    out.samples.reserve(target);
    for (std::size_t i = 0; i < target; ++i) {
        out.samples.push_back(in.samples[i * in.samples.size() / target]);
    }
    return out;
}

struct MeanFieldParams {
    DenseMatrix mu;        // (L+1) x K
    DenseMatrix log_sigma; // (L+1) x K
};

struct BbviOptions {
    std::size_t iterations = 3000;
    double learning_rate = 0.01;
    std::size_t mc_samples = 8;
    std::uint64_t seed = 0;

    void validate() const {
        if (iterations == 0 || mc_samples == 0)
            throw std::invalid_argument("BbviOptions: iterations and mc_samples must be > 0");
        if (!(learning_rate > 0.0))
            throw std::invalid_argument("BbviOptions: learning_rate must be > 0");
    }
};

struct BbviResult {
    MeanFieldParams params;
    std::vector<double> elbo_history;
};

// Mean-field Gaussian variational inference with reparameterization
// gradients for the likelihood term and the Gaussian-vs-Gaussian KL in
// closed form.
inline BbviResult bbvi_fit(const LastLayerModel& model, const BbviOptions& opts) {
    opts.validate();
    model.validate();
    Rng rng(opts.seed);

    const std::size_t rows = model.weight_rows(), cols = model.class_count;
    BbviResult out;
    out.params.mu = DenseMatrix(rows, cols);
    out.params.log_sigma =
        DenseMatrix(rows, cols, std::log(0.1 * model.prior_std));

    std::vector<DenseMatrix*> params{&out.params.mu, &out.params.log_sigma};
    AdamState adam;
    adam.learning_rate = opts.learning_rate;

    const double prior_var = model.prior_std * model.prior_std;
    DenseMatrix eps(rows, cols), w(rows, cols);
    DenseMatrix g_mu(rows, cols), g_ls(rows, cols);
    out.elbo_history.reserve(opts.iterations);
    for (std::size_t it = 0; it < opts.iterations; ++it) {
        g_mu = DenseMatrix(rows, cols);
        g_ls = DenseMatrix(rows, cols);
        double mean_ll = 0.0;
        for (std::size_t s = 0; s < opts.mc_samples; ++s) {
            for (std::size_t i = 0; i < eps.data.size(); ++i) {
                eps.data[i] = rng.normal();
                w.data[i] = out.params.mu.data[i] +
                            std::exp(out.params.log_sigma.data[i]) * eps.data[i];
            }
            const LogDensityResult ll = log_likelihood_and_grad(model, w);
            mean_ll += ll.value;
            for (std::size_t i = 0; i < eps.data.size(); ++i) {
                g_mu.data[i] += ll.grad.data[i];
                g_ls.data[i] += ll.grad.data[i] * eps.data[i] *
                                std::exp(out.params.log_sigma.data[i]);
            }
        }
        const double inv_s = 1.0 / static_cast<double>(opts.mc_samples);
        mean_ll *= inv_s;

        double kl = 0.0;
        for (std::size_t i = 0; i < g_mu.data.size(); ++i) {
            const double sigma = std::exp(out.params.log_sigma.data[i]);
            const double mu = out.params.mu.data[i];
            kl += std::log(model.prior_std / sigma) +
                  (sigma * sigma + mu * mu) / (2.0 * prior_var) - 0.5;
            // Gradient of -ELBO: likelihood term averaged, KL term exact.
            g_mu.data[i] = -(g_mu.data[i] * inv_s) + mu / prior_var;
            g_ls.data[i] = -(g_ls.data[i] * inv_s) +
                           (sigma * sigma / prior_var - 1.0);
        }
        const double elbo = mean_ll - kl;
        if (!std::isfinite(elbo))
            throw NumericalError("bbvi_fit: non-finite ELBO at iteration " +
                                 std::to_string(it));
        out.elbo_history.push_back(elbo);
        std::vector<const DenseMatrix*> grads{&g_mu, &g_ls};
        adam_step(params, grads, adam);
    }
    return out;
}

inline PosteriorSamples draw_from_meanfield(const MeanFieldParams& params,
                                            std::size_t count, Rng& rng) {
    if (count == 0) throw std::invalid_argument("draw_from_meanfield: count must be > 0");
    PosteriorSamples out;
    out.method = InferenceMethod::vi;
    out.acceptance_rate = 1.0;
    out.samples.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        DenseMatrix w(params.mu.rows, params.mu.cols);
        for (std::size_t i = 0; i < w.data.size(); ++i)
            w.data[i] = params.mu.data[i] +
                        std::exp(params.log_sigma.data[i]) * rng.normal();
        out.samples.push_back(std::move(w));
    }
    return out;
}

// Member predictive distributions softmax(W_s^T phi) for one query point,
// one row per posterior sample.
inline DenseMatrix member_probabilities(const PosteriorSamples& samples,
                                        std::span<const double> phi) {
    if (samples.samples.empty())
        throw StateError("posterior samples are empty");
    const DenseMatrix& first = samples.samples.front();
    if (phi.size() != first.rows)
        throw ShapeError("feature vector length " + std::to_string(phi.size()) +
                         " does not match weight rows " + std::to_string(first.rows));
    DenseMatrix members(samples.samples.size(), first.cols);
    std::vector<double> logits(first.cols);
    for (std::size_t s = 0; s < samples.samples.size(); ++s) {
        const DenseMatrix& w = samples.samples[s];
        for (std::size_t k = 0; k < w.cols; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < w.rows; ++j) acc += phi[j] * w(j, k);
            logits[k] = acc;
        }
        const auto p = softmax(logits);
        for (std::size_t k = 0; k < p.size(); ++k) members(s, k) = p[k];
    }
    return members;
}

// Posterior predictive: the sample average of member softmax outputs.
inline std::vector<double> posterior_predictive(const PosteriorSamples& samples,
                                                std::span<const double> phi) {
    const DenseMatrix members = member_probabilities(samples, phi);
    std::vector<double> mean(members.cols, 0.0);
    for (std::size_t s = 0; s < members.rows; ++s) {
        const double* row = members.row_ptr(s);
        for (std::size_t k = 0; k < members.cols; ++k) mean[k] += row[k];
    }
    for (double& v : mean) v /= static_cast<double>(members.rows);
    return mean;
}

// Entropy split of an ensemble of categorical predictions: total entropy of
// the mean, expected member entropy, and their difference (the mutual
// information between label and weights). total = aleatoric + epistemic by
// construction; epistemic >= 0 up to rounding by Jensen's inequality.
struct UncertaintyReport {
    double total = 0.0;
    double aleatoric = 0.0;
    double epistemic = 0.0;
};

inline UncertaintyReport decompose_members(const DenseMatrix& member_probs) {
    if (member_probs.rows == 0)
        throw StateError("decompose_members: empty ensemble");
    std::vector<double> mean(member_probs.cols, 0.0);
    double expected_entropy = 0.0;
    for (std::size_t s = 0; s < member_probs.rows; ++s) {
        const double* row = member_probs.row_ptr(s);
        expected_entropy +=
            categorical_entropy(std::span<const double>(row, member_probs.cols));
        for (std::size_t k = 0; k < member_probs.cols; ++k) mean[k] += row[k];
    }
    for (double& v : mean) v /= static_cast<double>(member_probs.rows);
    expected_entropy /= static_cast<double>(member_probs.rows);

    UncertaintyReport rep;
    rep.total = categorical_entropy(mean);
    rep.aleatoric = expected_entropy;
    rep.epistemic = rep.total - rep.aleatoric;
    return rep;
}

inline UncertaintyReport decompose_uncertainty(const PosteriorSamples& samples,
                                               std::span<const double> phi) {
    return decompose_members(member_probabilities(samples, phi));
}

// Batched decomposition over many query points: one pass of logits per
// posterior sample, accumulating the mean prediction and mean entropy.
inline std::vector<UncertaintyReport> decompose_batch(const PosteriorSamples& samples,
                                                      const DenseMatrix& features) {
    if (samples.samples.empty())
        throw StateError("posterior samples are empty");
    if (features.cols != samples.samples.front().rows)
        throw ShapeError("decompose_batch: feature width mismatch");
    const std::size_t n = features.rows;
    const std::size_t k = samples.samples.front().cols;
    DenseMatrix mean_p(n, k);
    std::vector<double> mean_h(n, 0.0);
    for (const DenseMatrix& w : samples.samples) {
        DenseMatrix probs = matmul(features, w);
        softmax_rows(probs);
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = probs.row_ptr(i);
            mean_h[i] += categorical_entropy(std::span<const double>(row, k));
            double* acc = mean_p.row_ptr(i);
            for (std::size_t j = 0; j < k; ++j) acc[j] += row[j];
        }
    }
    const double inv_s = 1.0 / static_cast<double>(samples.samples.size());
    std::vector<UncertaintyReport> reports(n);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = mean_p.row_ptr(i);
        for (std::size_t j = 0; j < k; ++j) row[j] *= inv_s;
        reports[i].total =
            categorical_entropy(std::span<const double>(row, k));
        reports[i].aleatoric = mean_h[i] * inv_s;
        reports[i].epistemic = reports[i].total - reports[i].aleatoric;
    }
    return reports;
}

// Stochastic-forward ensemble for MC-Dropout: each pass is one member; the
// member matrices feed the same decomposition as posterior samples.
struct McDropoutEnsemble {
    std::vector<DenseMatrix> pass_probs; // per pass, (N x K) probabilities

    DenseMatrix members_for_point(std::size_t i) const {
        DenseMatrix m(pass_probs.size(), pass_probs.front().cols);
        for (std::size_t s = 0; s < pass_probs.size(); ++s) {
            const double* row = pass_probs[s].row_ptr(i);
            for (std::size_t k = 0; k < m.cols; ++k) m(s, k) = row[k];
        }
        return m;
    }
};

inline McDropoutEnsemble mc_dropout_predict(const Mlp& mlp, const DenseMatrix& x,
                                            std::size_t forward_passes, Rng& rng) {
    if (mlp.config.dropout_rate <= 0.0)
        throw std::invalid_argument(
            "mc_dropout_predict: model has no dropout, ensemble would be deterministic");
    if (forward_passes == 0)
        throw std::invalid_argument("mc_dropout_predict: need >= 1 forward pass");
    McDropoutEnsemble out;
    out.pass_probs.reserve(forward_passes);
    for (std::size_t s = 0; s < forward_passes; ++s) {
        DenseMatrix probs = mlp_forward(mlp, x, ForwardMode::train, &rng).logits;
        softmax_rows(probs);
        out.pass_probs.push_back(std::move(probs));
    }
    return out;
}

} // namespace bacoun

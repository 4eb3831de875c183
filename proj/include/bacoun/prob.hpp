#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "bacoun/errors.hpp"
#include "bacoun/matrix.hpp"

namespace bacoun {

// Numerically stable softmax (max-subtraction). Output is a valid
// probability vector for any finite input.
inline std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty input");
    double mx = logits[0];
    for (double v : logits) {
        if (!std::isfinite(v)) throw std::invalid_argument("softmax: non-finite logit");
        mx = std::max(mx, v);
    }
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        p[k] = std::exp(logits[k] - mx);
        z += p[k];
    }
    for (double& v : p) v /= z;
    return p;
}

// In-place row-wise softmax of a logits matrix.
inline void softmax_rows(DenseMatrix& logits) {
    for (std::size_t i = 0; i < logits.rows; ++i) {
        double* row = logits.row_ptr(i);
        double mx = row[0];
        for (std::size_t j = 0; j < logits.cols; ++j) {
            if (!std::isfinite(row[j]))
                throw std::invalid_argument("softmax: non-finite logit");
            mx = std::max(mx, row[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            z += row[j];
        }
        for (std::size_t j = 0; j < logits.cols; ++j) row[j] /= z;
    }
}

inline double log_sum_exp(std::span<const double> v) {
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

// Shannon entropy in nats with the 0*log(0) := 0 convention. Input must be a
// probability vector (nonnegative, sums to 1 within 1e-9).
inline double categorical_entropy(std::span<const double> p) {
    double sum = 0.0;
    for (double v : p) {
        if (v < 0.0) throw std::invalid_argument("categorical_entropy: negative entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("categorical_entropy: probabilities sum to " +
                                    std::to_string(sum));
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) h -= v * std::log(v);
    }
    return h;
}

} // namespace bacoun

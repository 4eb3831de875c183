#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "bacoun/errors.hpp"

namespace bacoun {

// Row-major dense matrix of doubles. The single numeric container of the
// library; vectors are 1xN or Nx1 as context requires.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row_ptr(std::size_t i) { return data.data() + i * cols; }
    const double* row_ptr(std::size_t i) const { return data.data() + i * cols; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool same_shape(const DenseMatrix& o) const {
        return rows == o.rows && cols == o.cols;
    }
};

inline std::string shape_str(const DenseMatrix& m) {
    return "(" + std::to_string(m.rows) + "x" + std::to_string(m.cols) + ")";
}

inline void require_shape(const DenseMatrix& m, std::size_t r, std::size_t c,
                          const char* what) {
    if (m.rows != r || m.cols != c) {
        throw ShapeError(std::string(what) + ": expected (" + std::to_string(r) +
                         "x" + std::to_string(c) + "), got " + shape_str(m));
    }
}

// C = A * B. Two kernels: an accumulator loop for narrow outputs (logits,
// K-class score matrices) and an axpy loop over rows otherwise. Both are
// fixed-order and bit-reproducible.
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols != b.rows) {
        throw ShapeError("matmul: inner dimensions " + shape_str(a) + " vs " +
                         shape_str(b));
    }
    const std::size_t m = a.rows, k = a.cols, n = b.cols;
    DenseMatrix c(m, n);
    if (n <= 8) {
        for (std::size_t i = 0; i < m; ++i) {
            double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
            const double* arow = a.row_ptr(i);
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double aik = arow[kk];
                const double* brow = b.row_ptr(kk);
                for (std::size_t j = 0; j < n; ++j) acc[j] += aik * brow[j];
            }
            double* crow = c.row_ptr(i);
            for (std::size_t j = 0; j < n; ++j) crow[j] = acc[j];
        }
    } else {
        for (std::size_t i = 0; i < m; ++i) {
            double* crow = c.row_ptr(i);
            const double* arow = a.row_ptr(i);
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double aik = arow[kk];
                const double* brow = b.row_ptr(kk);
                for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
            }
        }
    }
    return c;
}

// C = A^T * B without materializing A^T; A supplies the shared leading
// dimension (backprop weight gradients: activations^T * deltas).
inline DenseMatrix matmul_at(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows != b.rows) {
        throw ShapeError("matmul_at: leading dimensions " + shape_str(a) +
                         " vs " + shape_str(b));
    }
    const std::size_t m = a.cols, k = a.rows, n = b.cols;
    DenseMatrix c(m, n);
    for (std::size_t i = 0; i < k; ++i) {
        const double* arow = a.row_ptr(i);
        const double* brow = b.row_ptr(i);
        for (std::size_t kk = 0; kk < m; ++kk) {
            const double aik = arow[kk];
            double* crow = c.row_ptr(kk);
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

// C = A * B^T. B is typically a weight matrix, small next to A, so an
// explicit transpose costs little and keeps the fast kernel shape.
inline DenseMatrix matmul_bt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols != b.cols) {
        throw ShapeError("matmul_bt: inner dimensions " + shape_str(a) +
                         " vs " + shape_str(b) + "^T");
    }
    return matmul(a, transpose(b));
}

inline void add_inplace(DenseMatrix& a, const DenseMatrix& b, double scale = 1.0) {
    if (!a.same_shape(b)) {
        throw ShapeError("add_inplace: " + shape_str(a) + " vs " + shape_str(b));
    }
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += scale * b.data[i];
}

inline void scale_inplace(DenseMatrix& a, double s) {
    for (double& v : a.data) v *= s;
}

// Sum of each column as a 1xN row vector.
inline DenseMatrix column_sums(const DenseMatrix& a) {
    DenseMatrix s(1, a.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        for (std::size_t j = 0; j < a.cols; ++j) s.data[j] += arow[j];
    }
    return s;
}

inline double sum_squares(const DenseMatrix& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return s;
}

inline double row_norm(const DenseMatrix& a, std::size_t i) {
    double s = 0.0;
    const double* p = a.row_ptr(i);
    for (std::size_t j = 0; j < a.cols; ++j) s += p[j] * p[j];
    return std::sqrt(s);
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("max_abs_diff: " + shape_str(a) + " vs " + shape_str(b));
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

// Extract a subset of rows in the given index order.
inline DenseMatrix take_rows(const DenseMatrix& a, const std::vector<std::size_t>& idx) {
    DenseMatrix out(idx.size(), a.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double* src = a.row_ptr(idx[i]);
        double* dst = out.row_ptr(i);
        for (std::size_t j = 0; j < a.cols; ++j) dst[j] = src[j];
    }
    return out;
}

inline DenseMatrix vstack(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    if (a.cols != b.cols) {
        throw ShapeError("vstack: " + shape_str(a) + " vs " + shape_str(b));
    }
    DenseMatrix out(a.rows + b.rows, a.cols);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
}

} // namespace bacoun

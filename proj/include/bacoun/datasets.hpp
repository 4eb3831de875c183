#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bacoun/errors.hpp"
#include "bacoun/matrix.hpp"
#include "bacoun/rng.hpp"

namespace bacoun {

// Per-feature affine statistics fitted on one split and applied to others.
struct Standardization {
    std::vector<double> mean;
    std::vector<double> std_dev;
    std::vector<std::size_t> constant_columns; // flagged, left at std 1
};

// Inputs, class labels in [0, class_count), and a per-row indicator marking
// synthetic boundary rows (which carry label class_count-1 when present).
struct LabeledDataset {
    DenseMatrix x;
    std::vector<int> y;
    std::vector<std::uint8_t> ood_flag;
    std::size_t class_count = 0;
    Standardization standardization; // empty vectors until standardize() ran

    std::size_t size() const { return x.rows; }
    std::size_t dim() const { return x.cols; }

    void validate() const {
        if (y.size() != x.rows || ood_flag.size() != x.rows)
            throw ShapeError("LabeledDataset: label/flag length mismatch");
        for (int label : y) {
            if (label < 0 || static_cast<std::size_t>(label) >= class_count)
                throw std::invalid_argument("LabeledDataset: label out of range");
        }
    }
};

struct GmmSpec {
    std::vector<std::vector<double>> means;
    double sigma = 1.0; // isotropic standard deviation
    std::size_t points_per_cluster = 500;

    void validate() const {
        if (means.empty()) throw std::invalid_argument("GmmSpec: empty means list");
        const std::size_t d = means.front().size();
        for (const auto& m : means)
            if (m.size() != d)
                throw std::invalid_argument("GmmSpec: means of unequal dimension");
        if (!(sigma > 0.0)) throw std::invalid_argument("GmmSpec: sigma must be > 0");
        if (points_per_cluster == 0)
            throw std::invalid_argument("GmmSpec: points_per_cluster must be > 0");
    }
};

struct MoonsSpec {
    std::size_t points_per_class = 2000;
    double noise = 0.05;

    void validate() const {
        if (points_per_class == 0)
            throw std::invalid_argument("MoonsSpec: points_per_class must be > 0");
        if (noise < 0.0) throw std::invalid_argument("MoonsSpec: noise must be >= 0");
    }
};

inline LabeledDataset generate_gmm(const GmmSpec& spec, std::uint64_t seed) {
    spec.validate();
    const std::size_t k = spec.means.size();
    const std::size_t d = spec.means.front().size();
    const std::size_t n = k * spec.points_per_cluster;

    Rng rng(seed);
    LabeledDataset ds;
    ds.x = DenseMatrix(n, d);
    ds.y.resize(n);
    ds.ood_flag.assign(n, 0);
    ds.class_count = k;
    std::size_t row = 0;
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < spec.points_per_cluster; ++i, ++row) {
            double* p = ds.x.row_ptr(row);
            for (std::size_t j = 0; j < d; ++j)
                p[j] = spec.means[c][j] + spec.sigma * rng.normal();
            ds.y[row] = static_cast<int>(c);
        }
    }
    return ds;
}

// Two interleaved half-circles: class 0 = (cos t, sin t), class 1 =
// (1 - cos t, 0.5 - sin t), t equally spaced in [0, pi], plus isotropic noise.
inline LabeledDataset generate_moons(const MoonsSpec& spec, std::uint64_t seed) {
    spec.validate();
    const std::size_t n = spec.points_per_class;
    Rng rng(seed);
    LabeledDataset ds;
    ds.x = DenseMatrix(2 * n, 2);
    ds.y.resize(2 * n);
    ds.ood_flag.assign(2 * n, 0);
    ds.class_count = 2;
    const double step = n > 1 ? std::numbers::pi / static_cast<double>(n - 1) : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = step * static_cast<double>(i);
        ds.x(i, 0) = std::cos(t) + spec.noise * rng.normal();
        ds.x(i, 1) = std::sin(t) + spec.noise * rng.normal();
        ds.y[i] = 0;
        ds.x(n + i, 0) = 1.0 - std::cos(t) + spec.noise * rng.normal();
        ds.x(n + i, 1) = 0.5 - std::sin(t) + spec.noise * rng.normal();
        ds.y[n + i] = 1;
    }
    return ds;
}

// Rows whose label falls outside the training classes, kept for evaluation
// against their original labels.
struct CsvLoadResult {
    LabeledDataset train;                // labels remapped to 0..K-1
    std::vector<int> class_mapping;      // original label per new class index
    DenseMatrix heldout_x;
    std::vector<int> heldout_labels;     // original labels
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_cell(const std::string& cell, std::size_t line_no) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    while (ptr < last && (*ptr == ' ' || *ptr == '\t')) ++ptr;
    if (ec != std::errc{} || ptr != last)
        throw ParseError("line " + std::to_string(line_no) +
                         ": cannot parse numeric cell '" + cell + "'");
    return v;
}

} // namespace detail

// Headered numeric CSV with one label column (matched case-sensitively).
// Rows with labels in `positive_classes` form the training set with classes
// renumbered 0..K-1 in sorted original order; the rest are held out.
inline CsvLoadResult load_csv(const std::string& path,
                              const std::string& label_column,
                              const std::set<int>& positive_classes) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("load_csv: cannot open " + path);
    if (positive_classes.empty())
        throw std::invalid_argument("load_csv: empty positive class set");

    std::string line;
    if (!std::getline(in, line)) throw ParseError("line 1: empty file");
    const auto header = detail::split_csv_line(line);
    std::size_t label_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == label_column) label_idx = i;
    if (label_idx == header.size())
        throw SchemaError("load_csv: no column named '" + label_column + "'");
    const std::size_t d = header.size() - 1;
    if (d == 0) throw SchemaError("load_csv: no feature columns");

    std::map<int, int> remap;
    {
        int next = 0;
        for (int c : positive_classes) remap[c] = next++;
    }

    std::vector<double> train_rows, held_rows;
    std::vector<int> train_y, held_y;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(fields.size()));
        const double label_val = detail::parse_cell(fields[label_idx], line_no);
        const int label = static_cast<int>(std::llround(label_val));
        std::vector<double> feats;
        feats.reserve(d);
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i == label_idx) continue;
            feats.push_back(detail::parse_cell(fields[i], line_no));
        }
        if (auto it = remap.find(label); it != remap.end()) {
            train_rows.insert(train_rows.end(), feats.begin(), feats.end());
            train_y.push_back(it->second);
        } else {
            held_rows.insert(held_rows.end(), feats.begin(), feats.end());
            held_y.push_back(label);
        }
    }

    CsvLoadResult out;
    out.train.x.rows = train_y.size();
    out.train.x.cols = d;
    out.train.x.data = std::move(train_rows);
    out.train.y = std::move(train_y);
    out.train.ood_flag.assign(out.train.y.size(), 0);
    out.train.class_count = positive_classes.size();
    out.class_mapping.assign(positive_classes.begin(), positive_classes.end());
    out.heldout_x.rows = held_y.size();
    out.heldout_x.cols = d;
    out.heldout_x.data = std::move(held_rows);
    out.heldout_labels = std::move(held_y);
    return out;
}

// Fit zero-mean unit-variance statistics (population convention, divide by N)
// on the dataset and apply them in place. Constant columns are centered only
// and flagged.
inline void standardize(LabeledDataset& ds) {
    if (ds.x.rows == 0) throw std::invalid_argument("standardize: empty dataset");
    const std::size_t n = ds.x.rows, d = ds.x.cols;
    Standardization st;
    st.mean.assign(d, 0.0);
    st.std_dev.assign(d, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = ds.x.row_ptr(i);
        for (std::size_t j = 0; j < d; ++j) st.mean[j] += row[j];
    }
    for (std::size_t j = 0; j < d; ++j) st.mean[j] /= static_cast<double>(n);
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = ds.x.row_ptr(i);
        for (std::size_t j = 0; j < d; ++j) {
            const double c = row[j] - st.mean[j];
            var[j] += c * c;
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        var[j] /= static_cast<double>(n);
        if (var[j] > 0.0) {
            st.std_dev[j] = std::sqrt(var[j]);
        } else {
            st.constant_columns.push_back(j);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double* row = ds.x.row_ptr(i);
        for (std::size_t j = 0; j < d; ++j)
            row[j] = (row[j] - st.mean[j]) / st.std_dev[j];
    }
    ds.standardization = std::move(st);
}

inline void apply_standardization(const Standardization& st, DenseMatrix& x) {
    if (st.mean.size() != x.cols)
        throw ShapeError("apply_standardization: stats dimension mismatch");
    for (std::size_t i = 0; i < x.rows; ++i) {
        double* row = x.row_ptr(i);
        for (std::size_t j = 0; j < x.cols; ++j)
            row[j] = (row[j] - st.mean[j]) / st.std_dev[j];
    }
}

inline void invert_standardization(const Standardization& st, DenseMatrix& x) {
    if (st.mean.size() != x.cols)
        throw ShapeError("invert_standardization: stats dimension mismatch");
    for (std::size_t i = 0; i < x.rows; ++i) {
        double* row = x.row_ptr(i);
        for (std::size_t j = 0; j < x.cols; ++j)
            row[j] = row[j] * st.std_dev[j] + st.mean[j];
    }
}

// Artificial OOD rows: random in-distribution rows with one coordinate
// replaced by Gaussian draws, making that dimension stand far off the
// training scale.
inline DenseMatrix inflate_ood(const LabeledDataset& ds, std::size_t dim_index,
                               double mean, double std_dev, std::size_t n,
                               std::uint64_t seed) {
    if (dim_index >= ds.dim())
        throw std::invalid_argument("inflate_ood: dim_index out of range");
    Rng rng(seed);
    DenseMatrix out(n, ds.dim());
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t src = rng.uniform_index(ds.size());
        const double* srow = ds.x.row_ptr(src);
        double* drow = out.row_ptr(i);
        for (std::size_t j = 0; j < ds.dim(); ++j) drow[j] = srow[j];
        drow[dim_index] = rng.normal(mean, std_dev);
    }
    return out;
}

// Append boundary points as one extra class (index K) with the OOD flag set.
// Original rows are untouched and keep their indices.
inline LabeledDataset augment_with_ood(const LabeledDataset& ds,
                                       const DenseMatrix& boundary_points) {
    if (!boundary_points.empty() && boundary_points.cols != ds.dim())
        throw ShapeError("augment_with_ood: boundary dimension " +
                         shape_str(boundary_points) + " vs data dim " +
                         std::to_string(ds.dim()));
    LabeledDataset out = ds;
    out.class_count = ds.class_count + 1;
    const int ood_label = static_cast<int>(ds.class_count);
    out.x = vstack(ds.x, boundary_points);
    out.y.resize(ds.size() + boundary_points.rows, ood_label);
    out.ood_flag.resize(ds.size() + boundary_points.rows, 1);
    return out;
}

// Seeded shuffled split; returns index sets (train, test).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction <= 1.0))
        throw std::invalid_argument("split_indices: train_fraction out of (0,1]");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    const std::size_t n_train =
        std::max<std::size_t>(1, static_cast<std::size_t>(
                                     std::floor(train_fraction * static_cast<double>(n))));
    std::vector<std::size_t> train(order.begin(), order.begin() + n_train);
    std::vector<std::size_t> test(order.begin() + n_train, order.end());
    return {std::move(train), std::move(test)};
}

inline LabeledDataset subset(const LabeledDataset& ds,
                             const std::vector<std::size_t>& idx) {
    LabeledDataset out;
    out.x = take_rows(ds.x, idx);
    out.y.reserve(idx.size());
    out.ood_flag.reserve(idx.size());
    for (std::size_t i : idx) {
        out.y.push_back(ds.y[i]);
        out.ood_flag.push_back(ds.ood_flag[i]);
    }
    out.class_count = ds.class_count;
    out.standardization = ds.standardization;
    return out;
}

} // namespace bacoun

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "kselect/errors.hpp"

namespace kselect {

// Dense row-major matrix of doubles. Sized for the problem at hand: n up to a
// few tens of thousands of rows, d up to a few hundred columns.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) throw Error("matrix data size does not match shape");
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::span<const double> flat() const { return data_; }
    std::span<double> flat() { return data_; }

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double ss = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        ss += diff * diff;
    }
    return ss;
}

// Observation matrix: finite entries, at least one row and one column.
class DataMatrix {
public:
    explicit DataMatrix(Matrix values) : values_(std::move(values)) {
        if (values_.rows() == 0 || values_.cols() == 0)
            throw Error("data matrix must have at least one row and one column");
        for (double v : values_.flat())
            if (!std::isfinite(v)) throw Error("data matrix contains a non-finite value");
    }

    const Matrix& values() const { return values_; }
    std::size_t n() const { return values_.rows(); }
    std::size_t d() const { return values_.cols(); }
    double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }
    std::span<const double> row(std::size_t i) const { return values_.row(i); }

private:
    Matrix values_;
};

inline std::vector<double> column_means(const Matrix& x) {
    std::vector<double> means(x.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) means[j] += x(i, j);
    for (double& m : means) m /= static_cast<double>(x.rows());
    return means;
}

// Sample variances with the n-1 denominator; n = 1 yields zeros.
inline std::vector<double> column_variances(const Matrix& x) {
    std::vector<double> vars(x.cols(), 0.0);
    if (x.rows() < 2) return vars;
    const std::vector<double> means = column_means(x);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const double diff = x(i, j) - means[j];
            vars[j] += diff * diff;
        }
    for (double& v : vars) v /= static_cast<double>(x.rows() - 1);
    return vars;
}

// Total sum of squares about the grand column-mean vector.
inline double total_ss(const DataMatrix& x) {
    const std::vector<double> means = column_means(x.values());
    double ss = 0.0;
    for (std::size_t i = 0; i < x.n(); ++i)
        for (std::size_t j = 0; j < x.d(); ++j) {
            const double diff = x(i, j) - means[j];
            ss += diff * diff;
        }
    return ss;
}

// Scales every column to unit sample variance. Scaling only, no centering:
// k-means is translation invariant, so centering would not change any fit.
// Zero-variance columns throw in strict mode and pass through unchanged
// otherwise.
inline DataMatrix standardize(const DataMatrix& x, bool strict = true) {
    const std::vector<double> vars = column_variances(x.values());
    Matrix out(x.n(), x.d());
    for (std::size_t j = 0; j < x.d(); ++j) {
        if (vars[j] <= 0.0) {
            if (strict) throw ConstantColumn(j);
            for (std::size_t i = 0; i < x.n(); ++i) out(i, j) = x(i, j);
            continue;
        }
        const double inv_sd = 1.0 / std::sqrt(vars[j]);
        for (std::size_t i = 0; i < x.n(); ++i) out(i, j) = x(i, j) * inv_sd;
    }
    return DataMatrix(std::move(out));
}

}  // namespace kselect

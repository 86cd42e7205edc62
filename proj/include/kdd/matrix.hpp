#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace kdd {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Sizes are tiny (desk scale), so all
// operations favour clarity and fixed reduction order over speed tricks.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<Vector>& rows) {
        if (rows.empty()) return Matrix();
        Matrix m(rows.size(), rows.front().size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != m.cols_)
                throw std::invalid_argument("Matrix::from_rows: ragged rows");
            for (std::size_t j = 0; j < m.cols_; ++j) m(i, j) = rows[i][j];
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    Vector row_copy(std::size_t i) const {
        auto r = row(i);
        return Vector(r.begin(), r.end());
    }

    void set_row(std::size_t i, std::span<const double> v) {
        if (v.size() != cols_) throw std::invalid_argument("Matrix::set_row: size mismatch");
        for (std::size_t j = 0; j < cols_; ++j) (*this)(i, j) = v[j];
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    Matrix& operator+=(const Matrix& o) {
        require_same_shape(o, "Matrix::operator+=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }

    Matrix& operator-=(const Matrix& o) {
        require_same_shape(o, "Matrix::operator-=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
        return *this;
    }

    Matrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    void require_same_shape(const Matrix& o, const char* where) const {
        if (!same_shape(o)) throw std::invalid_argument(std::string(where) + ": shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// --- small vector helpers (fixed order, no fancy blocking) ---

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("squared_distance: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("axpy: dimension mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace kdd

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace quatfm {

// Dense row-major matrix of doubles. Deliberately minimal: the model layers
// are small (d x d with d <= 64) and the explicit loops keep the quaternion
// sign patterns readable where they matter.
struct RealMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    RealMatrix() = default;
    RealMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    std::size_t size() const { return data.size(); }
};

inline void check_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw std::invalid_argument(std::string("size mismatch in ") + what);
}

// y += s * M x
inline void matvec_acc(const RealMatrix& m, std::span<const double> x,
                       std::span<double> y, double s) {
    check_same_size(x.size(), m.cols, "matvec_acc x");
    check_same_size(y.size(), m.rows, "matvec_acc y");
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.data.data() + i * m.cols;
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) acc += row[j] * x[j];
        y[i] += s * acc;
    }
}

// y += s * M^T x
inline void matvec_t_acc(const RealMatrix& m, std::span<const double> x,
                         std::span<double> y, double s) {
    check_same_size(x.size(), m.rows, "matvec_t_acc x");
    check_same_size(y.size(), m.cols, "matvec_t_acc y");
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.data.data() + i * m.cols;
        const double xi = s * x[i];
        for (std::size_t j = 0; j < m.cols; ++j) y[j] += xi * row[j];
    }
}

// M += s * u v^T
inline void outer_acc(RealMatrix& m, std::span<const double> u,
                      std::span<const double> v, double s) {
    check_same_size(u.size(), m.rows, "outer_acc u");
    check_same_size(v.size(), m.cols, "outer_acc v");
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* row = m.data.data() + i * m.cols;
        const double ui = s * u[i];
        for (std::size_t j = 0; j < m.cols; ++j) row[j] += ui * v[j];
    }
}

inline double dot(std::span<const double> x, std::span<const double> y) {
    check_same_size(x.size(), y.size(), "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    return acc;
}

// y += s * x
inline void axpy(double s, std::span<const double> x, std::span<double> y) {
    check_same_size(x.size(), y.size(), "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

}  // namespace quatfm

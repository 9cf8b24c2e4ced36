#pragma once

#include "stfuse/core.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace stfuse::bspline {

// Uniform cubic B-spline on [0, 4).
inline double uniform_cubic(double s) {
    if (s < 0.0 || s >= 4.0) return 0.0;
    if (s < 1.0) return s * s * s / 6.0;
    if (s < 2.0) return (-3.0 * s * s * s + 12.0 * s * s - 12.0 * s + 4.0) / 6.0;
    if (s < 3.0) return (3.0 * s * s * s - 24.0 * s * s + 60.0 * s - 44.0) / 6.0;
    const double r = 4.0 - s;
    return r * r * r / 6.0;
}

/// Cubic B-spline basis with equally spaced knots. The non-cyclic basis
/// covers [lo, hi] with K functions (K - 3 intervals) and forms a partition
/// of unity there; the cyclic basis wraps K functions around [lo, lo + period).
class Basis {
public:
    static Basis open(double lo, double hi, int size) {
        require(size >= 4, "B-spline basis size must be >= 4");
        require(hi > lo, "B-spline basis needs hi > lo");
        Basis b;
        b.lo_ = lo;
        b.hi_ = hi;
        b.size_ = size;
        b.h_ = (hi - lo) / (size - 3);
        return b;
    }

    static Basis cyclic(double lo, double period, int size) {
        require(size >= 4, "B-spline basis size must be >= 4");
        require(period > 0, "cyclic B-spline basis needs a positive period");
        Basis b;
        b.lo_ = lo;
        b.hi_ = lo + period;
        b.size_ = size;
        b.h_ = period / size;
        b.cyclic_ = true;
        return b;
    }

    int size() const { return size_; }
    bool is_cyclic() const { return cyclic_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    double spacing() const { return h_; }

    bool contains(double x) const { return cyclic_ ? std::isfinite(x) : (x >= lo_ && x <= hi_); }

    Eigen::VectorXd eval(double x) const {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(size_);
        if (cyclic_) {
            const double period = hi_ - lo_;
            double u = std::fmod(x - lo_, period);
            if (u < 0) u += period;
            const double pos = u / h_;
            for (int k = 0; k < size_; ++k) {
                double s = std::fmod(pos - k, static_cast<double>(size_));
                if (s < 0) s += size_;
                v[k] = uniform_cubic(s);
            }
            return v;
        }
        if (!contains(x)) throw InputError("B-spline evaluation outside the basis support");
        const double pos = (x - lo_) / h_;
        for (int k = 0; k < size_; ++k) v[k] = uniform_cubic(pos - k + 3.0);
        return v;
    }

    /// Integral of each basis function over the support (exact: the pieces are
    /// cubic, integrated with 4-point Gauss-Legendre per knot interval).
    Eigen::VectorXd integrals() const {
        static constexpr double gx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
        static constexpr double gw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
        Eigen::VectorXd m = Eigen::VectorXd::Zero(size_);
        const int intervals = cyclic_ ? size_ : size_ - 3;
        for (int j = 0; j < intervals; ++j) {
            const double a = lo_ + j * h_;
            for (int q = 0; q < 4; ++q) m += gw[q] * 0.5 * h_ * eval(a + 0.5 * h_ * (gx[q] + 1.0));
        }
        return m;
    }

private:
    double lo_ = 0.0, hi_ = 1.0, h_ = 1.0;
    int size_ = 4;
    bool cyclic_ = false;
};

/// Order-d difference matrix (K - d) x K; cyclic variant is K x K circulant.
inline Eigen::MatrixXd difference_matrix(int size, int order, bool cyclic = false) {
    require(order >= 0 && order < size, "difference order must be below the basis size");
    Eigen::MatrixXd d = Eigen::MatrixXd::Identity(size, size);
    for (int o = 0; o < order; ++o) {
        const auto rows = d.rows();
        if (cyclic) {
            Eigen::MatrixXd next(rows, size);
            for (Eigen::Index r = 0; r < rows; ++r) next.row(r) = d.row((r + 1) % rows) - d.row(r);
            d = next;
        } else {
            Eigen::MatrixXd next(rows - 1, size);
            for (Eigen::Index r = 0; r + 1 < rows; ++r) next.row(r) = d.row(r + 1) - d.row(r);
            d = next;
        }
    }
    return d;
}

inline Eigen::MatrixXd difference_penalty(int size, int order, bool cyclic = false) {
    const Eigen::MatrixXd d = difference_matrix(size, order, cyclic);
    return d.transpose() * d;
}

/// Row-major Kronecker of two evaluation vectors: index i * |b| + j.
inline Eigen::VectorXd tensor(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    Eigen::VectorXd out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a[i] * b;
    return out;
}

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

} // namespace stfuse::bspline

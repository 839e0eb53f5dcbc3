// Tiny dense helpers for the n x n (n <= 3 in practice) anisotropy matrices.

#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace hqi {

// Row-major square matrix.
class SquareMatrix {
public:
    SquareMatrix() = default;
    explicit SquareMatrix(int n) : n_(n), v_(static_cast<size_t>(n) * n, 0.0) {
        if (n < 1) throw std::invalid_argument("SquareMatrix: n must be >= 1");
    }
    SquareMatrix(int n, std::vector<double> vals) : n_(n), v_(std::move(vals)) {
        if (n < 1 || v_.size() != static_cast<size_t>(n) * n)
            throw std::invalid_argument("SquareMatrix: bad value count");
    }

    static SquareMatrix identity(int n) {
        SquareMatrix m(n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int size() const { return n_; }
    double operator()(int i, int j) const { return v_[static_cast<size_t>(i) * n_ + j]; }
    double& operator()(int i, int j) { return v_[static_cast<size_t>(i) * n_ + j]; }
    const std::vector<double>& values() const { return v_; }

    bool symmetric(double tol = 1e-12) const {
        for (int i = 0; i < n_; ++i)
            for (int j = i + 1; j < n_; ++j)
                if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
        return true;
    }

    std::vector<double> apply(std::span<const double> x) const {
        std::vector<double> y(static_cast<size_t>(n_), 0.0);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) y[static_cast<size_t>(i)] += (*this)(i, j) * x[static_cast<size_t>(j)];
        return y;
    }

    SquareMatrix multiply(const SquareMatrix& o) const {
        SquareMatrix r(n_);
        for (int i = 0; i < n_; ++i)
            for (int k = 0; k < n_; ++k)
                for (int j = 0; j < n_; ++j) r(i, j) += (*this)(i, k) * o(k, j);
        return r;
    }

    SquareMatrix transpose() const {
        SquareMatrix r(n_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) r(i, j) = (*this)(j, i);
        return r;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (double x : v_) s += x * x;
        return std::sqrt(s);
    }

private:
    int n_ = 0;
    std::vector<double> v_;
};

// Lower Cholesky factor L with L L^T = m; throws unless m is SPD.
inline SquareMatrix cholesky(const SquareMatrix& m) {
    if (!m.symmetric()) throw std::invalid_argument("cholesky: matrix not symmetric");
    const int n = m.size();
    SquareMatrix l(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = m(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (s <= 0.0) throw std::invalid_argument("cholesky: matrix not positive definite");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

// Inverse of an SPD matrix via its Cholesky factor.
inline SquareMatrix inverse_spd(const SquareMatrix& m) {
    const int n = m.size();
    const SquareMatrix l = cholesky(m);
    SquareMatrix inv(n);
    for (int col = 0; col < n; ++col) {
        std::vector<double> y(static_cast<size_t>(n), 0.0);
        for (int i = 0; i < n; ++i) {
            double s = (i == col) ? 1.0 : 0.0;
            for (int k = 0; k < i; ++k) s -= l(i, k) * y[static_cast<size_t>(k)];
            y[static_cast<size_t>(i)] = s / l(i, i);
        }
        for (int i = n; i-- > 0;) {
            double s = y[static_cast<size_t>(i)];
            for (int k = i + 1; k < n; ++k) s -= l(k, i) * inv(k, col);
            inv(i, col) = s / l(i, i);
        }
    }
    return inv;
}

inline double determinant_spd(const SquareMatrix& m) {
    const SquareMatrix l = cholesky(m);
    double d = 1.0;
    for (int i = 0; i < m.size(); ++i) d *= l(i, i);
    return d * d;
}

// General inverse by Gauss-Jordan with partial pivoting; n is tiny here.
inline SquareMatrix inverse(const SquareMatrix& m) {
    const int n = m.size();
    SquareMatrix a = m;
    SquareMatrix inv = SquareMatrix::identity(n);
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (a(piv, col) == 0.0) throw std::invalid_argument("inverse: singular matrix");
        if (piv != col)
            for (int j = 0; j < n; ++j) {
                std::swap(a(piv, j), a(col, j));
                std::swap(inv(piv, j), inv(col, j));
            }
        const double d = a(col, col);
        for (int j = 0; j < n; ++j) {
            a(col, j) /= d;
            inv(col, j) /= d;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col || a(r, col) == 0.0) continue;
            const double f = a(r, col);
            for (int j = 0; j < n; ++j) {
                a(r, j) -= f * a(col, j);
                inv(r, j) -= f * inv(col, j);
            }
        }
    }
    return inv;
}

inline double determinant(const SquareMatrix& m) {
    const int n = m.size();
    SquareMatrix a = m;
    double det = 1.0;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (a(piv, col) == 0.0) return 0.0;
        if (piv != col) {
            for (int j = 0; j < n; ++j) std::swap(a(piv, j), a(col, j));
            det = -det;
        }
        det *= a(col, col);
        for (int r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            for (int j = col; j < n; ++j) a(r, j) -= f * a(col, j);
        }
    }
    return det;
}

}  // namespace hqi

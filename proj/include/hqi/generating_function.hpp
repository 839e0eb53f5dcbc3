// Hermite-Gaussian generating functions
//
//   H(x) = pi^{-n/2} sum_beta c_beta H_beta(x) e^{-|x|^2},
//
// optionally composed with a symmetric positive definite anisotropy B
// (kernel argument C x with C^T C = B^{-1} and a (det B)^{-1/2} prefactor).

#pragma once

#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hqi/linalg.hpp"
#include "hqi/multi_index.hpp"
#include "hqi/special_functions.hpp"

namespace hqi {

struct Anisotropy {
    SquareMatrix b;       // the SPD matrix B
    SquareMatrix factor;  // C with C^T C = B^{-1}
    double det_b = 1.0;

    static Anisotropy from_matrix(const SquareMatrix& b) {
        Anisotropy a;
        a.b = b;
        const SquareMatrix binv = inverse_spd(b);  // throws for non-SPD input
        a.factor = cholesky(binv).transpose();     // upper factor, C^T C = B^{-1}
        a.det_b = determinant_spd(b);
        return a;
    }
};

class GeneratingFunction {
public:
    GeneratingFunction(int dimension, int order, IndexMap<double> coeffs,
                       std::optional<Anisotropy> aniso = std::nullopt)
        : n_(dimension), order_(order), coeffs_(std::move(coeffs)), aniso_(std::move(aniso)) {
        if (dimension < 1) throw std::invalid_argument("GeneratingFunction: dimension must be >= 1");
        if (order < 1) throw std::invalid_argument("GeneratingFunction: order must be >= 1");
        for (const auto& [beta, c] : coeffs_) {
            if (beta.size() != dimension)
                throw std::invalid_argument("GeneratingFunction: mixed dimensions");
            (void)c;
        }
        if (aniso_ && aniso_->b.size() != dimension)
            throw std::invalid_argument("GeneratingFunction: anisotropy dimension mismatch");
    }

    static GeneratingFunction gaussian(int dimension) {
        IndexMap<double> c;
        c.emplace(MultiIndex(dimension), 1.0);
        return GeneratingFunction(dimension, 1, std::move(c));
    }

    int dimension() const { return n_; }
    int order() const { return order_; }
    const IndexMap<double>& coefficients() const { return coeffs_; }
    const std::optional<Anisotropy>& anisotropy() const { return aniso_; }

    double coefficient(const MultiIndex& beta) const {
        auto it = coeffs_.find(beta);
        return it == coeffs_.end() ? 0.0 : it->second;
    }

    // highest |beta| carrying a nonzero coefficient
    int degree() const {
        int d = 0;
        for (const auto& [beta, c] : coeffs_)
            if (c != 0.0) d = std::max(d, beta.order());
        return d;
    }

    // pi^{-n/2} sum c_beta H_beta(t) e^{-|t|^2} on an argument already in the
    // isotropic frame (anisotropy transform and prefactor not applied).
    template <typename T>
    T eval_polynomial_gaussian(std::span<const T> t) const {
        T q = T(0);
        for (T v : t) q += v * v;
        T poly = T(0);
        for (const auto& [beta, c] : coeffs_) {
            if (c == 0.0) continue;
            poly += T(c) * hermite_eval<T>(beta, t);
        }
        const T pi = T(3.14159265358979323846264338327950288L);
        return std::pow(pi, -T(n_) / 2) * poly * std::exp(-q);
    }

    template <typename T>
    T eval(std::span<const T> x) const {
        if (static_cast<int>(x.size()) != n_)
            throw std::invalid_argument("GeneratingFunction::eval: dimension mismatch");
        std::vector<T> t(x.begin(), x.end());
        T prefactor = T(1);
        if (aniso_) {
            std::vector<T> y(static_cast<size_t>(n_), T(0));
            for (int i = 0; i < n_; ++i)
                for (int j = 0; j < n_; ++j)
                    y[static_cast<size_t>(i)] += T(aniso_->factor(i, j)) * t[static_cast<size_t>(j)];
            t = std::move(y);
            prefactor = T(1) / std::sqrt(T(aniso_->det_b));
        }
        return prefactor * eval_polynomial_gaussian<T>(std::span<const T>(t));
    }

    double eval(std::span<const double> x) const { return eval<double>(x); }

    // structured text record: {n, N, c_beta table in graded-lex order, optional B}
    void write(std::ostream& os) const {
        os << "hqi-generating-function v1\n";
        os << "n " << n_ << "\n";
        os << "N " << order_ << "\n";
        for (const auto& [beta, c] : coeffs_) {
            os << "coeff";
            for (int j = 0; j < beta.size(); ++j) os << ' ' << beta[j];
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", c);
            os << ' ' << buf << "\n";
        }
        if (aniso_) {
            os << "B";
            for (double v : aniso_->b.values()) {
                char buf[40];
                std::snprintf(buf, sizeof buf, "%.17g", v);
                os << ' ' << buf;
            }
            os << "\n";
        }
    }

    std::string to_text() const {
        std::ostringstream os;
        write(os);
        return os.str();
    }

    static GeneratingFunction read(std::istream& is) {
        std::string line;
        if (!std::getline(is, line) || line != "hqi-generating-function v1")
            throw std::runtime_error("GeneratingFunction::read: bad magic line");
        int n = 0, order = 0;
        IndexMap<double> coeffs;
        std::optional<Anisotropy> aniso;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string key;
            ls >> key;
            if (key == "n") {
                ls >> n;
            } else if (key == "N") {
                ls >> order;
            } else if (key == "coeff") {
                if (n < 1) throw std::runtime_error("GeneratingFunction::read: coeff before n");
                std::vector<int> e(static_cast<size_t>(n));
                for (int j = 0; j < n; ++j) ls >> e[static_cast<size_t>(j)];
                double c = 0.0;
                ls >> c;
                if (!ls) throw std::runtime_error("GeneratingFunction::read: malformed coeff line");
                coeffs.emplace(MultiIndex(e), c);
            } else if (key == "B") {
                if (n < 1) throw std::runtime_error("GeneratingFunction::read: B before n");
                std::vector<double> v(static_cast<size_t>(n) * n);
                for (double& x : v) ls >> x;
                if (!ls) throw std::runtime_error("GeneratingFunction::read: malformed B line");
                aniso = Anisotropy::from_matrix(SquareMatrix(n, std::move(v)));
            } else {
                throw std::runtime_error("GeneratingFunction::read: unknown key '" + key + "'");
            }
        }
        return GeneratingFunction(n, order, std::move(coeffs), std::move(aniso));
    }

    static GeneratingFunction from_text(const std::string& text) {
        std::istringstream is(text);
        return read(is);
    }

private:
    int n_;
    int order_;
    IndexMap<double> coeffs_;
    std::optional<Anisotropy> aniso_;
};

}  // namespace hqi

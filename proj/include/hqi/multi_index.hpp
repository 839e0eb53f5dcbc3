// Multi-index algebra: the alpha, beta, gamma bookkeeping everything else
// rests on. Orderings are fixed globally to graded-lexicographic so that
// moment matrices are deterministically unit upper triangular.

#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "hqi/rational.hpp"

namespace hqi {

class MultiIndex {
public:
    MultiIndex() = default;
    explicit MultiIndex(int dimension) : e_(static_cast<size_t>(dimension), 0) {
        if (dimension < 1) throw std::invalid_argument("MultiIndex: dimension must be >= 1");
    }
    MultiIndex(std::initializer_list<int> vals) : e_(vals) { validate(); }
    explicit MultiIndex(std::vector<int> vals) : e_(std::move(vals)) { validate(); }

    int size() const { return static_cast<int>(e_.size()); }
    int operator[](int j) const { return e_[static_cast<size_t>(j)]; }
    int& operator[](int j) { return e_[static_cast<size_t>(j)]; }
    const std::vector<int>& exponents() const { return e_; }

    // |alpha| = sum of components
    int order() const {
        int s = 0;
        for (int v : e_) s += v;
        return s;
    }

    bool operator==(const MultiIndex& o) const { return e_ == o.e_; }
    bool operator!=(const MultiIndex& o) const { return e_ != o.e_; }

    bool has_odd_component() const {
        return std::any_of(e_.begin(), e_.end(), [](int v) { return v % 2 != 0; });
    }

    // gamma with alpha = 2*gamma; requires all components even
    MultiIndex half() const {
        MultiIndex g(*this);
        for (int& v : g.e_) {
            if (v % 2 != 0) throw std::logic_error("MultiIndex::half: odd component");
            v /= 2;
        }
        return g;
    }

    MultiIndex operator+(const MultiIndex& o) const {
        check_same_dim(o);
        MultiIndex r(*this);
        for (size_t j = 0; j < e_.size(); ++j) r.e_[j] += o.e_[j];
        return r;
    }

    // requires o <= *this componentwise
    MultiIndex operator-(const MultiIndex& o) const {
        check_same_dim(o);
        MultiIndex r(*this);
        for (size_t j = 0; j < e_.size(); ++j) {
            r.e_[j] -= o.e_[j];
            if (r.e_[j] < 0) throw std::logic_error("MultiIndex: negative component in difference");
        }
        return r;
    }

    // alpha! = prod_j alpha_j!
    BigInt fact() const {
        BigInt r = 1;
        for (int v : e_) r *= factorial(v);
        return r;
    }

    // prod_j x_j^{alpha_j}
    template <typename T>
    T monomial(std::span<const T> x) const {
        if (static_cast<int>(x.size()) != size())
            throw std::invalid_argument("MultiIndex::monomial: dimension mismatch");
        T r = T(1);
        for (size_t j = 0; j < e_.size(); ++j)
            for (int k = 0; k < e_[j]; ++k) r *= x[j];
        return r;
    }

private:
    void validate() const {
        if (e_.empty()) throw std::invalid_argument("MultiIndex: dimension must be >= 1");
        for (int v : e_)
            if (v < 0) throw std::invalid_argument("MultiIndex: negative exponent");
    }
    void check_same_dim(const MultiIndex& o) const {
        if (o.size() != size()) throw std::invalid_argument("MultiIndex: dimension mismatch");
    }

    std::vector<int> e_;
};

// Partial order: alpha <= beta componentwise.
inline bool componentwise_leq(const MultiIndex& a, const MultiIndex& b) {
    if (a.size() != b.size()) throw std::invalid_argument("componentwise_leq: dimension mismatch");
    for (int j = 0; j < a.size(); ++j)
        if (a[j] > b[j]) return false;
    return true;
}

// Graded order (by |alpha|), ties broken lexicographically with the leading
// component largest first: (1,0) precedes (0,1).
inline bool graded_lex_less(const MultiIndex& a, const MultiIndex& b) {
    if (a.size() != b.size()) throw std::invalid_argument("graded_lex_less: dimension mismatch");
    const int oa = a.order(), ob = b.order();
    if (oa != ob) return oa < ob;
    for (int j = 0; j < a.size(); ++j)
        if (a[j] != b[j]) return a[j] > b[j];
    return false;
}

struct GradedLexLess {
    bool operator()(const MultiIndex& a, const MultiIndex& b) const { return graded_lex_less(a, b); }
};

template <typename T>
using IndexMap = std::map<MultiIndex, T, GradedLexLess>;

// All multi-indices of total degree <= max_total_degree in graded-lex order.
class IndexSet {
public:
    IndexSet(int dimension, int max_total_degree)
        : dimension_(dimension), max_total_degree_(max_total_degree) {
        if (dimension < 1) throw std::invalid_argument("IndexSet: dimension must be >= 1");
        if (max_total_degree < 0) throw std::invalid_argument("IndexSet: negative degree bound");
        std::vector<int> buf(static_cast<size_t>(dimension), 0);
        for (int deg = 0; deg <= max_total_degree; ++deg) emit(buf, 0, deg);
        for (size_t i = 0; i < indices_.size(); ++i) position_[indices_[i]] = i;
    }

    int dimension() const { return dimension_; }
    int max_total_degree() const { return max_total_degree_; }
    const std::vector<MultiIndex>& indices() const& { return indices_; }
    const std::vector<MultiIndex>& indices() && = delete;
    size_t count() const { return indices_.size(); }
    const MultiIndex& operator[](size_t i) const { return indices_[i]; }

    size_t position(const MultiIndex& alpha) const {
        auto it = position_.find(alpha);
        if (it == position_.end()) throw std::out_of_range("IndexSet: index not in set");
        return it->second;
    }
    bool contains(const MultiIndex& alpha) const { return position_.count(alpha) > 0; }

private:
    void emit(std::vector<int>& buf, size_t slot, int remaining) {
        if (slot + 1 == buf.size()) {
            buf[slot] = remaining;
            indices_.emplace_back(buf);
            return;
        }
        for (int v = remaining; v >= 0; --v) {
            buf[slot] = v;
            emit(buf, slot + 1, remaining - v);
        }
    }

    int dimension_;
    int max_total_degree_;
    std::vector<MultiIndex> indices_;
    std::map<MultiIndex, size_t, GradedLexLess> position_;
};

inline IndexSet enumerate_indices(int dimension, int max_total_degree) {
    return IndexSet(dimension, max_total_degree);
}

}  // namespace hqi

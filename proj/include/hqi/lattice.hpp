// Lattice window bookkeeping and the tolerance-driven truncation radius.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace hqi {

// Inclusive per-axis index ranges of a lattice window.
struct LatticeBox {
    std::vector<std::array<long long, 2>> ranges;

    int dimension() const { return static_cast<int>(ranges.size()); }

    size_t count() const {
        size_t c = 1;
        for (const auto& r : ranges) {
            if (r[1] < r[0]) return 0;
            c *= static_cast<size_t>(r[1] - r[0] + 1);
        }
        return c;
    }

    bool contains(std::span<const long long> idx) const {
        for (size_t j = 0; j < ranges.size(); ++j)
            if (idx[j] < ranges[j][0] || idx[j] > ranges[j][1]) return false;
        return true;
    }

    // row-major position of an index inside the box
    size_t flat_index(std::span<const long long> idx) const {
        size_t pos = 0;
        for (size_t j = 0; j < ranges.size(); ++j) {
            if (idx[j] < ranges[j][0] || idx[j] > ranges[j][1])
                throw std::out_of_range("LatticeBox: index outside window");
            pos = pos * static_cast<size_t>(ranges[j][1] - ranges[j][0] + 1) +
                  static_cast<size_t>(idx[j] - ranges[j][0]);
        }
        return pos;
    }
};

// Visit every index of the box in fixed row-major order (last axis fastest).
template <typename Fn>
void for_each_lattice_point(const LatticeBox& box, Fn&& fn) {
    const int n = box.dimension();
    if (box.count() == 0) return;
    std::vector<long long> idx(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) idx[static_cast<size_t>(j)] = box.ranges[static_cast<size_t>(j)][0];
    while (true) {
        fn(std::span<const long long>(idx));
        int axis = n - 1;
        while (axis >= 0) {
            if (++idx[static_cast<size_t>(axis)] <= box.ranges[static_cast<size_t>(axis)][1]) break;
            idx[static_cast<size_t>(axis)] = box.ranges[static_cast<size_t>(axis)][0];
            --axis;
        }
        if (axis < 0) return;
    }
}

// Dimensionless truncation radius: lattice points with scaled quadratic-form
// distance above R are dropped. R solves R^2 = ln(1/tol) + deg ln R + ln c so
// the polynomial growth of Hermite factors cannot eat the Gaussian tail.
inline double truncation_radius(double tail_tol, int poly_degree) {
    if (!(tail_tol > 0.0 && tail_tol < 1.0))
        throw std::invalid_argument("truncation_radius: tail_tol must lie in (0,1)");
    const double base = std::log(1.0 / tail_tol) + std::log(16.0);
    double r = std::sqrt(base);
    for (int i = 0; i < 4; ++i) r = std::sqrt(base + poly_degree * std::log(std::max(r, 2.0)));
    return r;
}

}  // namespace hqi

// Neumaier-compensated accumulation. Lattice sums are evaluated in a fixed
// iteration order with extended-precision carries so results are identical
// across thread counts and stay meaningful near the saturation floor.

#pragma once

#include <cmath>

namespace hqi {

template <typename T = long double>
class NeumaierSum {
public:
    void add(T x) {
        const T t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            carry_ += (sum_ - t) + x;
        else
            carry_ += (x - t) + sum_;
        sum_ = t;
    }

    T total() const { return sum_ + carry_; }

private:
    T sum_ = 0;
    T carry_ = 0;
};

}  // namespace hqi

// Quasi-interpolant evaluation over sampled grid data:
//
//   M u(x) = D^{-n/2} sum_m H((x-hm)/(h sqrt(D)))
//            * sum_gamma (-h sqrt(D))^{|gamma|} a_gamma d^gamma u(hm)
//
// plus the Laplacian-power, anisotropic and harmonic-restricted variants.
// Lattice sums are truncated by the tolerance-driven radius and accumulated
// in fixed order with compensation, so evaluation is deterministic.

#pragma once

#include <cmath>
#include <functional>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "hqi/accumulate.hpp"
#include "hqi/generating_function.hpp"
#include "hqi/lattice.hpp"
#include "hqi/qpolynomial.hpp"

namespace hqi {

struct QIConfig {
    double h = 0.1;          // grid spacing
    double shape = 2.0;      // the parameter D
    int order = 2;           // approximation order N
    double tail_tol = 1e-16; // lattice-sum truncation tolerance

    double step() const { return h * std::sqrt(shape); }

    void validate() const {
        if (!(h > 0.0)) throw std::invalid_argument("QIConfig: h must be positive");
        if (!(shape > 0.0)) throw std::invalid_argument("QIConfig: D must be positive");
        if (order < 1) throw std::invalid_argument("QIConfig: order must be >= 1");
        if (!(tail_tol > 0.0 && tail_tol < 1.0))
            throw std::invalid_argument("QIConfig: tail_tol must lie in (0,1)");
    }
};

// Grid samples of d^gamma u (Hermite channels) and/or operator powers
// (Delta^s u or B^s u) over a lattice window, with an optional membership
// mask for a domain Omega.
struct HermiteData {
    int n = 0;
    double h = 0.0;
    LatticeBox window;
    std::optional<std::vector<uint8_t>> mask;  // 1 = lattice point belongs to Omega
    IndexMap<std::vector<double>> deriv_channels;
    std::map<int, std::vector<double>> power_channels;

    size_t count() const { return window.count(); }

    const std::vector<double>& derivative_channel(const MultiIndex& gamma) const {
        auto it = deriv_channels.find(gamma);
        if (it == deriv_channels.end())
            throw std::invalid_argument("HermiteData: missing derivative channel");
        if (it->second.size() != count())
            throw std::invalid_argument("HermiteData: channel shape differs from the window");
        return it->second;
    }
    const std::vector<double>& power_channel(int s) const {
        auto it = power_channels.find(s);
        if (it == power_channels.end())
            throw std::invalid_argument("HermiteData: missing operator-power channel");
        if (it->second.size() != count())
            throw std::invalid_argument("HermiteData: channel shape differs from the window");
        return it->second;
    }

    bool included(size_t flat) const { return !mask || (*mask)[flat] != 0; }

    void write(std::ostream& os) const {
        os << "hqi-hermite-data v1\n";
        os << "n " << n << "\n";
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", h);
        os << "h " << buf << "\n";
        os << "window";
        for (const auto& r : window.ranges) os << ' ' << r[0] << ' ' << r[1];
        os << "\n";
        if (mask) {
            os << "mask";
            for (uint8_t v : *mask) os << ' ' << int(v);
            os << "\n";
        }
        auto write_values = [&](const std::vector<double>& vals) {
            for (double v : vals) {
                std::snprintf(buf, sizeof buf, "%.17g", v);
                os << ' ' << buf;
            }
            os << "\n";
        };
        for (const auto& [gamma, vals] : deriv_channels) {
            os << "channel-d";
            for (int j = 0; j < gamma.size(); ++j) os << ' ' << gamma[j];
            os << "\n values";
            write_values(vals);
        }
        for (const auto& [s, vals] : power_channels) {
            os << "channel-p " << s << "\n values";
            write_values(vals);
        }
    }

    std::string to_text() const {
        std::ostringstream os;
        write(os);
        return os.str();
    }

    static HermiteData read(std::istream& is) {
        std::string line;
        if (!std::getline(is, line) || line != "hqi-hermite-data v1")
            throw std::runtime_error("HermiteData::read: bad magic line");
        HermiteData d;
        auto read_values = [&](size_t want) {
            if (!std::getline(is, line))
                throw std::runtime_error("HermiteData::read: missing values line");
            std::istringstream ls(line);
            std::string key;
            ls >> key;
            if (key != "values") throw std::runtime_error("HermiteData::read: expected values line");
            std::vector<double> vals(want);
            for (double& v : vals) ls >> v;
            if (!ls) throw std::runtime_error("HermiteData::read: short values line");
            return vals;
        };
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string key;
            ls >> key;
            if (key == "n") {
                ls >> d.n;
            } else if (key == "h") {
                ls >> d.h;
            } else if (key == "window") {
                if (d.n < 1) throw std::runtime_error("HermiteData::read: window before n");
                d.window.ranges.resize(static_cast<size_t>(d.n));
                for (auto& r : d.window.ranges) ls >> r[0] >> r[1];
                if (!ls) throw std::runtime_error("HermiteData::read: malformed window");
            } else if (key == "mask") {
                std::vector<uint8_t> m(d.count());
                for (auto& v : m) {
                    int x = 0;
                    ls >> x;
                    v = static_cast<uint8_t>(x);
                }
                if (!ls) throw std::runtime_error("HermiteData::read: malformed mask");
                d.mask = std::move(m);
            } else if (key == "channel-d") {
                std::vector<int> e(static_cast<size_t>(d.n));
                for (int& v : e) ls >> v;
                if (!ls) throw std::runtime_error("HermiteData::read: malformed channel-d");
                d.deriv_channels.emplace(MultiIndex(e), read_values(d.count()));
            } else if (key == "channel-p") {
                int s = 0;
                ls >> s;
                if (!ls) throw std::runtime_error("HermiteData::read: malformed channel-p");
                d.power_channels.emplace(s, read_values(d.count()));
            } else {
                throw std::runtime_error("HermiteData::read: unknown key '" + key + "'");
            }
        }
        return d;
    }

    static HermiteData from_text(const std::string& text) {
        std::istringstream is(text);
        return read(is);
    }
};

using ScalarField = std::function<double(std::span<const double>)>;
using DomainPredicate = std::function<bool(std::span<const double>)>;

// Closures for a test function: derivative fields d^gamma u and operator
// powers (Delta^s u or B^s u), looked up on demand.
struct FieldSet {
    IndexMap<ScalarField> derivatives;
    std::map<int, ScalarField> powers;
};

inline HermiteData sample_on_window(const FieldSet& fields, int n, double h,
                                    std::span<const double> lo, std::span<const double> hi,
                                    const std::vector<MultiIndex>& required_derivs,
                                    const std::vector<int>& required_powers,
                                    const DomainPredicate& omega = nullptr) {
    if (n < 1) throw std::invalid_argument("sample_on_window: dimension must be >= 1");
    if (static_cast<int>(lo.size()) != n || static_cast<int>(hi.size()) != n)
        throw std::invalid_argument("sample_on_window: bounds dimension mismatch");
    if (!(h > 0.0)) throw std::invalid_argument("sample_on_window: h must be positive");

    HermiteData data;
    data.n = n;
    data.h = h;
    data.window.ranges.resize(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        // nudge against representation error so printed bounds behave as written
        data.window.ranges[static_cast<size_t>(j)] = {
            static_cast<long long>(std::ceil(lo[j] / h - 1e-9)),
            static_cast<long long>(std::floor(hi[j] / h + 1e-9))};
        if (data.window.ranges[static_cast<size_t>(j)][1] < data.window.ranges[static_cast<size_t>(j)][0])
            throw std::invalid_argument("sample_on_window: empty window");
    }
    const size_t count = data.count();

    std::vector<std::vector<double>> points(count, std::vector<double>(static_cast<size_t>(n)));
    {
        size_t k = 0;
        for_each_lattice_point(data.window, [&](std::span<const long long> idx) {
            for (int j = 0; j < n; ++j) points[k][static_cast<size_t>(j)] = h * idx[static_cast<size_t>(j)];
            ++k;
        });
    }

    if (omega) {
        std::vector<uint8_t> m(count);
        for (size_t k = 0; k < count; ++k) m[k] = omega(points[k]) ? 1 : 0;
        data.mask = std::move(m);
    }

    auto fill = [&](const ScalarField& f) {
        std::vector<double> vals(count, 0.0);
        for (size_t k = 0; k < count; ++k)
            if (data.included(k)) vals[k] = f(points[k]);
        return vals;
    };

    for (const auto& gamma : required_derivs) {
        auto it = fields.derivatives.find(gamma);
        if (it == fields.derivatives.end())
            throw std::invalid_argument("sample_on_window: closure missing for derivative channel");
        data.deriv_channels.emplace(gamma, fill(it->second));
    }
    for (int s : required_powers) {
        auto it = fields.powers.find(s);
        if (it == fields.powers.end())
            throw std::invalid_argument("sample_on_window: closure missing for power channel");
        data.power_channels.emplace(s, fill(it->second));
    }
    return data;
}

struct QIResult {
    double value = 0.0;
    // true when the truncation ball had to be clipped by the data window;
    // such points sit closer than one radius to the window edge
    bool window_clipped = false;
    // min over axes of (distance to window edge)/(truncation radius)
    double window_margin = 0.0;
};

namespace detail {

struct ClippedBox {
    LatticeBox box;
    bool clipped = false;
    double margin = 0.0;
};

inline ClippedBox clip_ball_to_window(const HermiteData& data, std::span<const double> x,
                                      double radius) {
    ClippedBox out;
    out.margin = std::numeric_limits<double>::infinity();
    const int n = data.n;
    out.box.ranges.resize(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        const auto& win = data.window.ranges[static_cast<size_t>(j)];
        const long long lo = static_cast<long long>(std::ceil((x[j] - radius) / data.h - 1e-12));
        const long long hi = static_cast<long long>(std::floor((x[j] + radius) / data.h + 1e-12));
        out.box.ranges[static_cast<size_t>(j)] = {std::max(lo, win[0]), std::min(hi, win[1])};
        if (lo < win[0] || hi > win[1]) out.clipped = true;
        const double left = (x[j] - data.h * win[0]) / radius;
        const double right = (data.h * win[1] - x[j]) / radius;
        out.margin = std::min(out.margin, std::min(left, right));
    }
    return out;
}

inline void check_point(const HermiteData& data, const QIConfig& cfg, std::span<const double> x) {
    cfg.validate();
    if (static_cast<int>(x.size()) != data.n)
        throw std::invalid_argument("evaluate: point dimension mismatch");
    if (std::abs(data.h - cfg.h) > 1e-12 * cfg.h)
        throw std::invalid_argument("evaluate: config spacing differs from data spacing");
}

}  // namespace detail

// General Hermite quasi-interpolant over derivative channels.
inline QIResult evaluate_qi(const GeneratingFunction& h_fn, const QPolynomial& q,
                            const HermiteData& data, const QIConfig& cfg,
                            std::span<const double> x) {
    detail::check_point(data, cfg, x);
    if (h_fn.dimension() != data.n || q.dimension() != data.n)
        throw std::invalid_argument("evaluate_qi: dimension mismatch");

    const int n = data.n;
    const double step = cfg.step();
    const double r_scaled = truncation_radius(cfg.tail_tol, h_fn.degree());

    // channel weights (-h sqrt(D))^{|gamma|} a_gamma
    std::vector<std::pair<const std::vector<double>*, double>> channels;
    for (const auto& [gamma, a] : q.coefficients()) {
        if (a == Rational(0)) continue;
        channels.emplace_back(&data.derivative_channel(gamma),
                              to_double(a) * std::pow(-step, gamma.order()));
    }

    const Anisotropy* aniso = h_fn.anisotropy() ? &*h_fn.anisotropy() : nullptr;
    double ball_radius = r_scaled * step;
    if (aniso) ball_radius *= std::sqrt(aniso->b.frobenius_norm());

    const auto clip = detail::clip_ball_to_window(data, x, ball_radius);
    const double r2 = r_scaled * r_scaled;
    const long double prefactor =
        std::pow(static_cast<long double>(cfg.shape), -n / 2.0L) /
        (aniso ? std::sqrt(static_cast<long double>(aniso->det_b)) : 1.0L);

    NeumaierSum<long double> acc;
    std::vector<long double> t(static_cast<size_t>(n));
    for_each_lattice_point(clip.box, [&](std::span<const long long> idx) {
        const size_t flat = data.window.flat_index(idx);
        if (!data.included(flat)) return;
        for (int j = 0; j < n; ++j)
            t[static_cast<size_t>(j)] =
                (static_cast<long double>(x[j]) - static_cast<long double>(data.h) * idx[static_cast<size_t>(j)]) /
                step;
        if (aniso) {
            // move to the isotropic frame: t <- C t
            std::vector<long double> y(static_cast<size_t>(n), 0.0L);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    y[static_cast<size_t>(i)] +=
                        static_cast<long double>(aniso->factor(i, j)) * t[static_cast<size_t>(j)];
            t = y;
        }
        long double q2 = 0.0L;
        for (long double v : t) q2 += v * v;
        if (q2 > r2) return;
        NeumaierSum<long double> combo;
        for (const auto& [vals, w] : channels)
            combo.add(static_cast<long double>(w) * (*vals)[flat]);
        acc.add(combo.total() *
                h_fn.eval_polynomial_gaussian<long double>(std::span<const long double>(t)));
    });

    return {static_cast<double>(prefactor * acc.total()), clip.clipped, clip.margin};
}

namespace detail {

// shared Gaussian-kernel loop for the Laplacian/anisotropic/harmonic forms
template <typename Combo>
QIResult gaussian_kernel_sum(const HermiteData& data, const QIConfig& cfg,
                             std::span<const double> x, const Anisotropy* aniso, Combo&& combo) {
    const int n = data.n;
    const double step = cfg.step();
    const double r_scaled = truncation_radius(cfg.tail_tol, 0);
    double ball_radius = r_scaled * step;
    if (aniso) ball_radius *= std::sqrt(aniso->b.frobenius_norm());

    const auto clip = clip_ball_to_window(data, x, ball_radius);
    const double r2 = r_scaled * r_scaled;
    const long double pi = 3.14159265358979323846264338327950288L;
    const long double prefactor =
        std::pow(pi * static_cast<long double>(cfg.shape), -n / 2.0L) /
        std::sqrt(static_cast<long double>(aniso ? aniso->det_b : 1.0));

    NeumaierSum<long double> acc;
    std::vector<long double> t(static_cast<size_t>(n));
    for_each_lattice_point(clip.box, [&](std::span<const long long> idx) {
        const size_t flat = data.window.flat_index(idx);
        if (!data.included(flat)) return;
        for (int j = 0; j < n; ++j)
            t[static_cast<size_t>(j)] =
                (static_cast<long double>(x[j]) - static_cast<long double>(data.h) * idx[static_cast<size_t>(j)]) /
                step;
        long double q2 = 0.0L;
        if (aniso) {
            for (int i = 0; i < n; ++i) {
                long double yi = 0.0L;
                for (int j = 0; j < n; ++j)
                    yi += static_cast<long double>(aniso->factor(i, j)) * t[static_cast<size_t>(j)];
                q2 += yi * yi;
            }
        } else {
            for (long double v : t) q2 += v * v;
        }
        if (q2 > r2) return;
        acc.add(combo(flat) * std::exp(-q2));
    });

    return {static_cast<double>(prefactor * acc.total()), clip.clipped, clip.margin};
}

}  // namespace detail

// Laplacian-power form: (pi D)^{-n/2} sum_m sum_s (h sqrt(D))^{2s} (-1)^s/(s! 4^s)
// Delta^s u(hm) e^{-|x-hm|^2/(h^2 D)}, order N = 2M.
inline QIResult evaluate_laplacian_qi(const HermiteData& data, int half_order, const QIConfig& cfg,
                                      std::span<const double> x) {
    detail::check_point(data, cfg, x);
    if (half_order < 1) throw std::invalid_argument("evaluate_laplacian_qi: M must be >= 1");

    std::vector<std::pair<const std::vector<double>*, long double>> channels;
    const double step2 = cfg.step() * cfg.step();
    for (int s = 0; s < half_order; ++s) {
        long double w = std::pow(static_cast<long double>(step2), s) /
                        (to_double(Rational(factorial(s) * int_pow(BigInt(4), s))));
        if (s % 2 != 0) w = -w;
        channels.emplace_back(&data.power_channel(s), w);
    }
    return detail::gaussian_kernel_sum(data, cfg, x, nullptr, [&](size_t flat) {
        NeumaierSum<long double> combo;
        for (const auto& [vals, w] : channels) combo.add(w * (*vals)[flat]);
        return combo.total();
    });
}

// Anisotropic form for B u = sum b_ij d_i d_j u (B symmetric positive definite):
// (det B)^{-1/2} (pi D)^{-n/2} sum_m sum_s (-h^2 D)^s/(s! 4^s) B^s u(hm)
// e^{-<B^{-1}(x-hm), x-hm>/(h^2 D)}.
inline QIResult evaluate_anisotropic_qi(const SquareMatrix& b, const HermiteData& data,
                                        int half_order, const QIConfig& cfg,
                                        std::span<const double> x) {
    detail::check_point(data, cfg, x);
    if (half_order < 1) throw std::invalid_argument("evaluate_anisotropic_qi: M must be >= 1");
    if (b.size() != data.n) throw std::invalid_argument("evaluate_anisotropic_qi: B dimension mismatch");
    const Anisotropy aniso = Anisotropy::from_matrix(b);  // rejects non-SPD B

    std::vector<std::pair<const std::vector<double>*, long double>> channels;
    const double step2 = cfg.step() * cfg.step();
    for (int s = 0; s < half_order; ++s) {
        long double w = std::pow(static_cast<long double>(step2), s) /
                        (to_double(Rational(factorial(s) * int_pow(BigInt(4), s))));
        if (s % 2 != 0) w = -w;
        channels.emplace_back(&data.power_channel(s), w);
    }
    return detail::gaussian_kernel_sum(data, cfg, x, &aniso, [&](size_t flat) {
        NeumaierSum<long double> combo;
        for (const auto& [vals, w] : channels) combo.add(w * (*vals)[flat]);
        return combo.total();
    });
}

// Harmonic restriction: single-channel Gaussian sum over the grid points of
// Omega (samples outside Omega are excluded by the data mask). With B given,
// uses the anisotropic kernel and (det B)^{-1/2} prefactor.
inline QIResult evaluate_harmonic_qi(const HermiteData& data, const QIConfig& cfg,
                                     std::span<const double> x,
                                     const SquareMatrix* b = nullptr) {
    detail::check_point(data, cfg, x);
    const std::vector<double>* values = nullptr;
    if (data.power_channels.count(0) != 0) {
        values = &data.power_channel(0);
    } else {
        values = &data.derivative_channel(MultiIndex(data.n));
    }
    std::optional<Anisotropy> aniso;
    if (b) aniso = Anisotropy::from_matrix(*b);
    return detail::gaussian_kernel_sum(
        data, cfg, x, aniso ? &*aniso : nullptr,
        [&](size_t flat) { return static_cast<long double>((*values)[flat]); });
}

// Pointwise record of M u(x) - u(x) over an evaluation set.
struct ErrorReport {
    std::vector<std::vector<double>> points;
    std::vector<double> errors;

    double sup_norm() const {
        double s = 0.0;
        for (double e : errors) s = std::max(s, std::abs(e));
        return s;
    }

    void write_csv(std::ostream& os) const {
        if (points.empty()) return;
        const size_t n = points.front().size();
        for (size_t j = 0; j < n; ++j) os << 'x' << (j + 1) << ',';
        os << "error,abs_error\n";
        char buf[40];
        for (size_t i = 0; i < points.size(); ++i) {
            for (double v : points[i]) {
                std::snprintf(buf, sizeof buf, "%.17g", v);
                os << buf << ',';
            }
            std::snprintf(buf, sizeof buf, "%.17g", errors[i]);
            os << buf << ',';
            std::snprintf(buf, sizeof buf, "%.17g", std::abs(errors[i]));
            os << buf << '\n';
        }
    }
};

}  // namespace hqi

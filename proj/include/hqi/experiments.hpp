// Experiment harness behind the CLI: JSON experiment specs, the test-function
// registry, generator presets named after the worked examples, and the
// converge / harmonic / saturation / moments-check / deriv runners. Every
// runner writes CSV whose first line carries the fully resolved config, so a
// result file is reproducible on its own.

#pragma once

#include <algorithm>
#include <atomic>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <random>
#include <thread>

#include "hqi/derivatives.hpp"
#include "hqi/generator_synthesis.hpp"
#include "hqi/interpolant.hpp"
#include "hqi/saturation.hpp"

namespace hqi::experiments {

using nlohmann::json;

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct RunOptions {
    std::string out_override;
    double tail_tol_override = 0.0;  // 0: keep the config's value
    int threads = 1;
    uint64_t seed = 12345;
};

struct ExperimentResult {
    bool ok = true;
    std::string out_path;
    std::vector<std::string> summary;  // human-readable lines, also printed by the CLI
};

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void parallel_for(size_t count, int threads, const std::function<void(size_t)>& fn) {
    threads = std::max(1, threads);
    if (threads == 1 || count < 2) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

template <typename T>
T require(const json& j, const std::string& field) {
    if (!j.contains(field)) throw ConfigError("missing field '" + field + "'");
    try {
        return j.at(field).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("field '" + field + "': " + e.what());
    }
}

template <typename T>
T optional_field(const json& j, const std::string& field, T fallback) {
    if (!j.contains(field)) return fallback;
    try {
        return j.at(field).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("field '" + field + "': " + e.what());
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// test functions

struct TestFunction {
    std::string id;
    int dimension = 1;
    // d^gamma u; throws for unsupported gamma
    std::function<double(const MultiIndex&, std::span<const double>)> derivative;
    // Delta^s u (or B^s u for the anisotropic presets)
    std::function<double(int, std::span<const double>)> power;
    AnalyticExtension extension;  // empty when no closed-form extension is known
    // sup |d^beta u| over the evaluation box, for floor predictions
    std::function<double(const MultiIndex&)> derivative_sup;
    std::optional<HermiteData> grid;  // only for grid:<path>
};

// u ids: cos | sin | exp-cos-2d | poly:<degree> | linear | bpoly | bexpcos |
// grid:<path>. The b* entries are B-harmonic companions of the anisotropic
// preset and need the matrix passed in.
inline TestFunction make_test_function(const std::string& id, std::span<const double> box_lo,
                                       std::span<const double> box_hi,
                                       const SquareMatrix* b = nullptr) {
    TestFunction f;
    f.id = id;
    auto box_abs_max = [&](int axis) {
        return std::max(std::abs(box_lo[static_cast<size_t>(axis)]),
                        std::abs(box_hi[static_cast<size_t>(axis)]));
    };

    if (id == "cos" || id == "sin") {
        const double phase0 = id == "cos" ? 0.0 : -kPi / 2.0;
        f.dimension = 1;
        f.derivative = [phase0](const MultiIndex& g, std::span<const double> x) {
            return std::cos(x[0] + phase0 + g[0] * kPi / 2.0);
        };
        f.power = [phase0](int s, std::span<const double> x) {
            return (s % 2 == 0 ? 1.0 : -1.0) * std::cos(x[0] + phase0);
        };
        f.extension = [phase0](std::span<const std::complex<double>> z) {
            return std::cos(z[0] + phase0);
        };
        f.derivative_sup = [](const MultiIndex&) { return 1.0; };
        return f;
    }

    if (id == "exp-cos-2d") {
        f.dimension = 2;
        f.derivative = [](const MultiIndex& g, std::span<const double> x) {
            return std::exp(x[0]) * std::cos(x[1] + g[1] * kPi / 2.0);
        };
        f.power = [](int s, std::span<const double> x) {
            return s == 0 ? std::exp(x[0]) * std::cos(x[1]) : 0.0;  // harmonic
        };
        f.extension = [](std::span<const std::complex<double>> z) {
            return std::exp(z[0]) * std::cos(z[1]);
        };
        const double amp = std::exp(std::abs(box_hi[0]));
        f.derivative_sup = [amp](const MultiIndex&) { return amp; };
        return f;
    }

    if (id.rfind("poly:", 0) == 0) {
        const int degree = std::stoi(id.substr(5));
        if (degree < 0) throw ConfigError("poly: degree must be >= 0");
        f.dimension = 1;
        auto dpoly = [degree](int k, double t) {
            if (k > degree) return 0.0;
            double c = 1.0;
            for (int i = 0; i < k; ++i) c *= degree - i;
            return c * std::pow(t, degree - k);
        };
        f.derivative = [dpoly](const MultiIndex& g, std::span<const double> x) {
            return dpoly(g[0], x[0]);
        };
        f.power = [dpoly](int s, std::span<const double> x) { return dpoly(2 * s, x[0]); };
        f.extension = [degree](std::span<const std::complex<double>> z) {
            return std::pow(z[0], degree);
        };
        const double xmax = box_abs_max(0);
        f.derivative_sup = [dpoly, xmax](const MultiIndex& g) {
            return std::abs(dpoly(g[0], xmax));
        };
        return f;
    }

    if (id == "linear") {
        f.dimension = 1;
        f.derivative = [](const MultiIndex& g, std::span<const double> x) {
            if (g.order() == 0) return x[0];
            return g.order() == 1 && g[0] == 1 ? 1.0 : 0.0;
        };
        f.power = [](int s, std::span<const double> x) { return s == 0 ? x[0] : 0.0; };
        f.extension = [](std::span<const std::complex<double>> z) { return z[0]; };
        const double xmax = box_abs_max(0);
        f.derivative_sup = [xmax](const MultiIndex& g) {
            if (g.order() == 0) return xmax;
            return g.order() == 1 ? 1.0 : 0.0;
        };
        return f;
    }

    if (id == "bpoly") {
        if (!b) throw ConfigError("bpoly requires the anisotropy matrix B");
        // u = b22 x1^2 - b11 x2^2 solves B u = 0
        const double c1 = (*b)(1, 1), c2 = (*b)(0, 0);
        f.dimension = 2;
        f.derivative = [c1, c2](const MultiIndex& g, std::span<const double> x) {
            if (g.order() == 0) return c1 * x[0] * x[0] - c2 * x[1] * x[1];
            if (g == MultiIndex{1, 0}) return 2.0 * c1 * x[0];
            if (g == MultiIndex{0, 1}) return -2.0 * c2 * x[1];
            if (g == MultiIndex{2, 0}) return 2.0 * c1;
            if (g == MultiIndex{0, 2}) return -2.0 * c2;
            return 0.0;
        };
        f.power = [c1, c2](int s, std::span<const double> x) {
            return s == 0 ? c1 * x[0] * x[0] - c2 * x[1] * x[1] : 0.0;
        };
        const double m0 = box_abs_max(0), m1 = box_abs_max(1);
        f.derivative_sup = [c1, c2, m0, m1](const MultiIndex& g) {
            if (g.order() == 0) return c1 * m0 * m0 + c2 * m1 * m1;
            if (g.order() == 1) return 2.0 * std::max(c1 * m0, c2 * m1);
            if (g.order() == 2) return 2.0 * std::max(c1, c2);
            return 0.0;
        };
        return f;
    }

    if (id == "bexpcos") {
        if (!b) throw ConfigError("bexpcos requires the anisotropy matrix B");
        // u(x) = U(C x) with U(xi) = e^{xi_1} cos(xi_2), so B u = (Delta U)(C x) = 0
        const Anisotropy aniso = Anisotropy::from_matrix(*b);
        const SquareMatrix c = aniso.factor;
        f.dimension = 2;
        auto to_xi = [c](std::span<const double> x) {
            std::vector<double> xi(2, 0.0);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    xi[static_cast<size_t>(i)] += c(i, j) * x[static_cast<size_t>(j)];
            return xi;
        };
        f.derivative = [to_xi](const MultiIndex& g, std::span<const double> x) {
            if (g.order() != 0)
                throw ConfigError("bexpcos supplies only the value channel");
            const auto xi = to_xi(x);
            return std::exp(xi[0]) * std::cos(xi[1]);
        };
        f.power = [to_xi](int s, std::span<const double> x) {
            if (s != 0) return 0.0;
            const auto xi = to_xi(x);
            return std::exp(xi[0]) * std::cos(xi[1]);
        };
        const double cn = c.frobenius_norm();
        const double m = std::max(box_abs_max(0), box_abs_max(1));
        const double amp = std::exp(cn * m);
        f.derivative_sup = [amp](const MultiIndex&) { return amp; };
        return f;
    }

    if (id.rfind("grid:", 0) == 0) {
        const std::string path = id.substr(5);
        std::ifstream in(path);
        if (!in) throw ConfigError("grid file not found: " + path);
        HermiteData data = HermiteData::read(in);
        f.dimension = data.n;
        f.grid = std::move(data);
        f.derivative_sup = [](const MultiIndex&) { return 1.0; };
        return f;
    }

    throw ConfigError("unknown test function '" + id + "'");
}

// ---------------------------------------------------------------------------
// generator presets

struct GeneratorSpec {
    enum class Kind { hermite, laplacian, anisotropic };
    Kind kind = Kind::hermite;
    std::string name;
    int dimension = 1;
    int order = 2;                       // N
    std::optional<QPolynomial> q;        // hermite kind
    std::optional<GeneratingFunction> h; // hermite kind
    int half_order = 1;                  // laplacian / anisotropic M
    std::optional<SquareMatrix> b;       // anisotropic

    std::vector<MultiIndex> required_derivatives() const {
        std::vector<MultiIndex> out;
        if (kind == Kind::hermite) {
            for (const auto& [gamma, a] : q->coefficients())
                if (a != Rational(0)) out.push_back(gamma);
        }
        return out;
    }
    std::vector<int> required_powers() const {
        std::vector<int> out;
        if (kind != Kind::hermite)
            for (int s = 0; s < half_order; ++s) out.push_back(s);
        return out;
    }
};

inline Rational rational_from_json(const json& v) {
    if (v.is_number_integer()) return Rational(BigInt(v.get<long long>()));
    return rational_from_double(v.get<double>());
}

inline GeneratorSpec resolve_generator(const json& g, int dimension_hint) {
    GeneratorSpec spec;
    spec.dimension = dimension_hint;

    if (g.contains("Q")) {
        const json& qj = g.at("Q");
        const int n = detail::require<int>(qj, "n");
        const int order = detail::require<int>(qj, "N");
        IndexMap<Rational> coeffs;
        for (const json& entry : detail::optional_field<json>(qj, "coefficients", json::array())) {
            const auto idx = detail::require<std::vector<int>>(entry, "index");
            if (static_cast<int>(idx.size()) != n)
                throw ConfigError("Q coefficient index has wrong dimension");
            coeffs.emplace(MultiIndex(idx), rational_from_json(entry.at("value")));
        }
        spec.name = "custom-Q";
        spec.dimension = n;
        spec.order = order;
        try {
            spec.q = QPolynomial(n, order, std::move(coeffs));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("invalid Q: ") + e.what());
        }
        spec.h = build_hermite_generator(*spec.q);
        return spec;
    }

    const std::string preset = detail::require<std::string>(g, "preset");
    spec.name = preset;
    spec.dimension = detail::optional_field<int>(g, "n", dimension_hint);
    auto suffix_int = [&](const std::string& prefix) {
        try {
            return std::stoi(preset.substr(prefix.size()));
        } catch (...) {
            throw ConfigError("preset '" + preset + "': bad numeric suffix");
        }
    };

    if (preset.rfind("laguerre-", 0) == 0) {
        const int m = suffix_int("laguerre-");
        if (m < 1) throw ConfigError("laguerre-M needs M >= 1");
        spec.order = 2 * m;
        spec.q = QPolynomial::one(spec.dimension, spec.order);
        spec.h = build_hermite_generator(*spec.q);
        return spec;
    }
    if (preset == "example1-a") {
        const double a = detail::optional_field<double>(g, "a", 0.0);
        spec.dimension = 1;
        spec.order = 2;
        IndexMap<Rational> coeffs;
        if (a != 0.0) coeffs.emplace(MultiIndex{1}, rational_from_double(a));
        spec.q = QPolynomial(1, 2, std::move(coeffs));
        spec.h = build_hermite_generator(*spec.q);
        return spec;
    }
    if (preset == "example2-M1") {
        spec.dimension = 1;
        spec.order = 4;
        IndexMap<Rational> coeffs;
        coeffs.emplace(MultiIndex{1}, rat(-1, 2));
        spec.q = QPolynomial(1, 4, std::move(coeffs));
        spec.h = build_hermite_generator(*spec.q);
        return spec;
    }
    if (preset == "example2-M2") {
        spec.dimension = 1;
        spec.order = 4;
        IndexMap<Rational> coeffs;
        coeffs.emplace(MultiIndex{2}, rat(-1, 4));
        spec.q = QPolynomial(1, 4, std::move(coeffs));
        spec.h = build_hermite_generator(*spec.q);
        return spec;
    }
    if (preset.rfind("laplacian-", 0) == 0) {
        const int m = suffix_int("laplacian-");
        if (m < 1) throw ConfigError("laplacian-M needs M >= 1");
        spec.kind = GeneratorSpec::Kind::laplacian;
        spec.half_order = m;
        spec.order = 2 * m;
        return spec;
    }
    if (preset.rfind("anisotropic-", 0) == 0) {
        const int m = suffix_int("anisotropic-");
        if (m < 1) throw ConfigError("anisotropic-M needs M >= 1");
        spec.kind = GeneratorSpec::Kind::anisotropic;
        spec.half_order = m;
        spec.order = 2 * m;
        const auto rows = detail::require<std::vector<std::vector<double>>>(g, "B");
        const int n = static_cast<int>(rows.size());
        std::vector<double> flat;
        for (const auto& r : rows) {
            if (static_cast<int>(r.size()) != n) throw ConfigError("B must be square");
            flat.insert(flat.end(), r.begin(), r.end());
        }
        spec.dimension = n;
        spec.b = SquareMatrix(n, std::move(flat));
        if (!spec.b->symmetric()) throw ConfigError("B must be symmetric");
        return spec;
    }
    throw ConfigError("unknown generator preset '" + preset + "'");
}

// ---------------------------------------------------------------------------
// shared experiment plumbing

struct EvalGrid {
    std::vector<double> lo, hi;
    std::vector<int> count;
    std::vector<std::vector<double>> points;  // row-major tensor grid
};

inline EvalGrid parse_eval_grid(const json& j, int dimension) {
    EvalGrid g;
    g.lo = detail::require<std::vector<double>>(j, "lo");
    g.hi = detail::require<std::vector<double>>(j, "hi");
    g.count = detail::require<std::vector<int>>(j, "count");
    if (static_cast<int>(g.lo.size()) != dimension || static_cast<int>(g.hi.size()) != dimension ||
        static_cast<int>(g.count.size()) != dimension)
        throw ConfigError("eval grid fields must have the experiment dimension");
    for (int c : g.count)
        if (c < 1) throw ConfigError("eval count must be >= 1");

    std::vector<int> idx(static_cast<size_t>(dimension), 0);
    for (;;) {
        std::vector<double> p(static_cast<size_t>(dimension));
        for (int j2 = 0; j2 < dimension; ++j2) {
            const int c = g.count[static_cast<size_t>(j2)];
            p[static_cast<size_t>(j2)] =
                c == 1 ? g.lo[static_cast<size_t>(j2)]
                       : g.lo[static_cast<size_t>(j2)] +
                             (g.hi[static_cast<size_t>(j2)] - g.lo[static_cast<size_t>(j2)]) *
                                 idx[static_cast<size_t>(j2)] / (c - 1);
        }
        g.points.push_back(std::move(p));
        int axis = dimension - 1;
        while (axis >= 0) {
            if (++idx[static_cast<size_t>(axis)] < g.count[static_cast<size_t>(axis)]) break;
            idx[static_cast<size_t>(axis)] = 0;
            --axis;
        }
        if (axis < 0) break;
    }
    return g;
}

namespace detail {

inline HermiteData sample_for(const GeneratorSpec& gen, const TestFunction& fn, double h,
                              double step, double tail_tol, const EvalGrid& grid) {
    const int n = fn.dimension;
    double radius = truncation_radius(tail_tol, gen.h ? gen.h->degree() : 0) * step;
    if (gen.b) radius *= std::sqrt(gen.b->frobenius_norm());
    std::vector<double> lo(grid.lo), hi(grid.hi);
    for (int j = 0; j < n; ++j) {
        lo[static_cast<size_t>(j)] -= radius + h;
        hi[static_cast<size_t>(j)] += radius + h;
    }
    FieldSet fields;
    for (const auto& gamma : gen.required_derivatives())
        fields.derivatives.emplace(gamma, [&fn, gamma](std::span<const double> x) {
            return fn.derivative(gamma, x);
        });
    for (int s : gen.required_powers())
        fields.powers.emplace(s, [&fn, s](std::span<const double> x) { return fn.power(s, x); });
    return sample_on_window(fields, n, h, lo, hi, gen.required_derivatives(),
                            gen.required_powers());
}

inline double evaluate_generator(const GeneratorSpec& gen, const HermiteData& data,
                                 const QIConfig& cfg, std::span<const double> x) {
    switch (gen.kind) {
        case GeneratorSpec::Kind::hermite:
            return evaluate_qi(*gen.h, *gen.q, data, cfg, x).value;
        case GeneratorSpec::Kind::laplacian:
            return evaluate_laplacian_qi(data, gen.half_order, cfg, x).value;
        case GeneratorSpec::Kind::anisotropic:
            return evaluate_anisotropic_qi(*gen.b, data, gen.half_order, cfg, x).value;
    }
    return 0.0;
}

inline double floor_prediction(const GeneratorSpec& gen, const TestFunction& fn, double shape,
                               double step) {
    SaturationBound bound;
    switch (gen.kind) {
        case GeneratorSpec::Kind::hermite:
            bound = epsilon_bound(*gen.h, *gen.q, shape);
            break;
        case GeneratorSpec::Kind::laplacian:
            bound = epsilon_bound(GeneratingFunction::gaussian(fn.dimension),
                                  laplacian_polynomial(fn.dimension, gen.half_order), shape);
            break;
        case GeneratorSpec::Kind::anisotropic:
            bound = epsilon_bound_anisotropic(*gen.b, gen.half_order, shape);
            break;
    }
    IndexMap<double> sups;
    for (const auto& [beta, amp] : bound.per_beta) sups.emplace(beta, fn.derivative_sup(beta));
    return saturation_floor(bound, step, sups);
}

inline std::ofstream open_csv(const std::string& path, const json& resolved) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open output file: " + path);
    os << "# config: " << resolved.dump() << "\n";
    return os;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// runners

// Convergence study: per-(h, D) sup-error table with fitted log2 slopes;
// slope fits are suppressed where the error is within 10x of the
// epsilon-floor and the row is flagged instead.
inline ExperimentResult run_converge(const json& spec, const RunOptions& opt) {
    const std::string fn_id = detail::require<std::string>(spec, "function");
    const json gen_json = detail::require<json>(spec, "generator");
    const auto shapes = detail::require<std::vector<double>>(spec, "D");
    const double tail_tol = opt.tail_tol_override > 0.0
                                ? opt.tail_tol_override
                                : detail::optional_field<double>(spec, "tail_tol", 1e-16);

    const json eval_json = detail::require<json>(spec, "eval");
    const int dim =
        static_cast<int>(detail::require<std::vector<double>>(eval_json, "lo").size());
    GeneratorSpec gen = resolve_generator(gen_json, dim);
    EvalGrid grid = parse_eval_grid(eval_json, dim);
    const TestFunction fn =
        make_test_function(fn_id, grid.lo, grid.hi, gen.b ? &*gen.b : nullptr);
    if (fn.dimension != dim) throw ConfigError("function dimension does not match the eval grid");
    if (gen.kind == GeneratorSpec::Kind::hermite && gen.dimension != dim)
        throw ConfigError("generator dimension does not match the eval grid");

    std::vector<double> hs;
    if (fn.grid) {
        hs.push_back(fn.grid->h);  // grid data fixes its own spacing
    } else {
        hs = detail::require<std::vector<double>>(spec, "h");
    }

    const std::string out =
        opt.out_override.empty() ? detail::require<std::string>(spec, "out") : opt.out_override;
    json resolved = spec;
    resolved["resolved_tail_tol"] = tail_tol;
    resolved["seed"] = opt.seed;
    std::ofstream os = detail::open_csv(out, resolved);
    os << "preset,function,D,h,sup_error,slope_from_prev,floor_pred,floor_flag\n";

    ExperimentResult result;
    result.out_path = out;
    if (gen.h) {
        // persist the generator record next to the table for reproducibility
        std::ofstream gos(out + ".generator.txt");
        gen.h->write(gos);
        result.summary.push_back("generator record: " + out + ".generator.txt");
    }
    for (double shape : shapes) {
        double prev_err = 0.0, prev_h = 0.0;
        bool prev_flag = true;
        bool first = true;
        for (double h : hs) {
            QIConfig cfg{.h = h, .shape = shape, .order = gen.order, .tail_tol = tail_tol};
            if (cfg.step() >= 1.0)
                result.summary.push_back("warning: h sqrt(D) = " + detail::fmt(cfg.step()) +
                                         " >= 1 at D=" + detail::fmt(shape) +
                                         ", h=" + detail::fmt(h));

            HermiteData data;
            std::vector<std::vector<double>> points;
            std::vector<double> reference(grid.points.size());
            if (fn.grid) {
                // custom grid: probe at the file's own interior lattice points
                // and compare against the sampled values
                data = *fn.grid;
                const auto& values = data.power_channels.count(0)
                                         ? data.power_channel(0)
                                         : data.derivative_channel(MultiIndex(dim));
                reference.clear();
                size_t k = 0;
                for_each_lattice_point(data.window, [&](std::span<const long long> idx) {
                    std::vector<double> x(static_cast<size_t>(dim));
                    for (int j = 0; j < dim; ++j) x[static_cast<size_t>(j)] = h * idx[static_cast<size_t>(j)];
                    bool interior = true;
                    const double margin =
                        truncation_radius(tail_tol, gen.h ? gen.h->degree() : 0) * cfg.step();
                    for (int j = 0; j < dim; ++j) {
                        if (x[static_cast<size_t>(j)] - margin < h * data.window.ranges[static_cast<size_t>(j)][0] ||
                            x[static_cast<size_t>(j)] + margin > h * data.window.ranges[static_cast<size_t>(j)][1])
                            interior = false;
                    }
                    if (interior && data.included(k)) {
                        points.push_back(std::move(x));
                        reference.push_back(values[k]);
                    }
                    ++k;
                });
                if (points.empty()) throw ConfigError("grid file has no interior points");
            } else {
                data = detail::sample_for(gen, fn, h, cfg.step(), tail_tol, grid);
                points = grid.points;
                const MultiIndex zero(dim);
                for (size_t i = 0; i < points.size(); ++i)
                    reference[i] = fn.derivative(zero, points[i]);
            }

            std::vector<double> errs(points.size());
            detail::parallel_for(points.size(), opt.threads, [&](size_t i) {
                errs[i] = detail::evaluate_generator(gen, data, cfg, points[i]) - reference[i];
            });
            double sup = 0.0;
            for (double e : errs) sup = std::max(sup, std::abs(e));

            const double floor = detail::floor_prediction(gen, fn, shape, cfg.step());
            const bool flagged = sup <= 10.0 * floor;
            std::string slope_txt;
            if (!first && !flagged && !prev_flag) {
                const double slope = std::log2(prev_err / sup) / std::log2(prev_h / h);
                slope_txt = detail::fmt(slope);
            }
            os << gen.name << ',' << fn_id << ',' << detail::fmt(shape) << ',' << detail::fmt(h)
               << ',' << detail::fmt(sup) << ',' << slope_txt << ',' << detail::fmt(floor) << ','
               << (flagged ? 1 : 0) << "\n";
            std::string note;
            if (flagged)
                note = " [floor]";
            else if (!slope_txt.empty())
                note = " slope=" + slope_txt;
            result.summary.push_back("converge " + gen.name + " D=" + detail::fmt(shape) +
                                     " h=" + detail::fmt(h) + " sup=" + detail::fmt(sup) + note);
            prev_err = sup;
            prev_h = h;
            prev_flag = flagged;
            first = false;
        }
    }
    return result;
}

// Harmonic saturation study on a 2-D test function with a known analytic
// extension: error grid per (D, h), h-independence ratios, and the
// measured-vs-predicted saturation columns.
inline ExperimentResult run_harmonic(const json& spec, const RunOptions& opt) {
    const std::string fn_id = detail::require<std::string>(spec, "function");
    const auto shapes = detail::require<std::vector<double>>(spec, "D");
    const auto hs = detail::require<std::vector<double>>(spec, "h");
    const double tail_tol = opt.tail_tol_override > 0.0
                                ? opt.tail_tol_override
                                : detail::optional_field<double>(spec, "tail_tol", 1e-20);

    const json eval_json = detail::require<json>(spec, "eval");
    const auto lo_probe = detail::require<std::vector<double>>(eval_json, "lo");
    EvalGrid grid = parse_eval_grid(eval_json, static_cast<int>(lo_probe.size()));
    const TestFunction fn = make_test_function(fn_id, grid.lo, grid.hi);
    if (fn.dimension != 2) throw ConfigError("run_harmonic expects a 2-D test function");
    if (!fn.extension) throw ConfigError("run_harmonic needs a function with an analytic extension");

    json resolved = spec;
    resolved["resolved_tail_tol"] = tail_tol;
    resolved["seed"] = opt.seed;
    const std::string out =
        opt.out_override.empty() ? detail::require<std::string>(spec, "out") : opt.out_override;
    std::ofstream os = detail::open_csv(out, resolved);
    os << "D,h,x1,x2,measured,predicted,abs_gap,pred_cutoff\n";

    ExperimentResult result;
    result.out_path = out;

    std::map<double, std::vector<double>> sups_by_shape;
    for (double shape : shapes) {
        for (double h : hs) {
            QIConfig cfg{.h = h, .shape = shape, .order = 2, .tail_tol = tail_tol};
            if (cfg.step() >= 1.0)
                result.summary.push_back("warning: h sqrt(D) = " + detail::fmt(cfg.step()) +
                                         " >= 1 at D=" + detail::fmt(shape) +
                                         ", h=" + detail::fmt(h));
            GeneratorSpec harm;
            harm.kind = GeneratorSpec::Kind::laplacian;
            harm.half_order = 1;
            harm.order = 2;
            const HermiteData data = detail::sample_for(harm, fn, h, cfg.step(), tail_tol, grid);

            std::vector<double> measured(grid.points.size()), predicted(grid.points.size());
            std::vector<int> cutoffs(grid.points.size());
            detail::parallel_for(grid.points.size(), opt.threads, [&](size_t i) {
                const auto& x = grid.points[i];
                const double mu = evaluate_harmonic_qi(data, cfg, x).value;
                measured[i] = mu - fn.power(0, x);
                const SaturationPrediction pred =
                    predict_harmonic_saturation(fn.extension, 2, x, h, shape);
                predicted[i] = pred.value;
                cutoffs[i] = pred.cutoff;
            });
            double sup = 0.0;
            for (size_t i = 0; i < grid.points.size(); ++i) {
                const auto& x = grid.points[i];
                os << detail::fmt(shape) << ',' << detail::fmt(h) << ',' << detail::fmt(x[0])
                   << ',' << detail::fmt(x[1]) << ',' << detail::fmt(measured[i]) << ','
                   << detail::fmt(predicted[i]) << ','
                   << detail::fmt(std::abs(measured[i] - predicted[i])) << ',' << cutoffs[i]
                   << "\n";
                sup = std::max(sup, std::abs(measured[i]));
            }
            sups_by_shape[shape].push_back(sup);
            result.summary.push_back("harmonic D=" + detail::fmt(shape) + " h=" + detail::fmt(h) +
                                     " sup=" + detail::fmt(sup));
        }
    }

    // h-independence ratios and the slope of log sup-error against D
    for (const auto& [shape, sups] : sups_by_shape) {
        const auto [mn, mx] = std::minmax_element(sups.begin(), sups.end());
        result.summary.push_back("harmonic D=" + detail::fmt(shape) +
                                 " h-ratio=" + detail::fmt(*mx / std::max(*mn, 1e-300)));
    }
    if (sups_by_shape.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double cnt = static_cast<double>(sups_by_shape.size());
        for (const auto& [shape, sups] : sups_by_shape) {
            const double y = std::log(*std::max_element(sups.begin(), sups.end()));
            sx += shape;
            sy += y;
            sxx += shape * shape;
            sxy += shape * y;
        }
        const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
        result.summary.push_back("harmonic log-sup slope vs D: " + detail::fmt(slope) +
                                 " (exp(-pi^2 D) envelope gives " + detail::fmt(-kPi * kPi) + ")");
    }
    return result;
}

// sigma/epsilon tables with the lattice-sum cross-check.
inline ExperimentResult run_saturation(const json& spec, const RunOptions& opt) {
    const int n = detail::optional_field<int>(spec, "n", 1);
    const auto shapes = detail::require<std::vector<double>>(spec, "D");
    const int beta_max = detail::optional_field<int>(spec, "beta_max", 3);
    const int samples = detail::optional_field<int>(spec, "x_samples", 20);
    const double tol = detail::optional_field<double>(spec, "tolerance", 1e-12);
    if (n < 1 || beta_max < 0 || samples < 1) throw ConfigError("bad saturation parameters");

    json resolved = spec;
    resolved["seed"] = opt.seed;
    const std::string out =
        opt.out_override.empty() ? detail::require<std::string>(spec, "out") : opt.out_override;
    std::ofstream os = detail::open_csv(out, resolved);
    os << "D,beta,sup_amplitude,cutoff,max_cross_check_gap,pass\n";

    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> coord(-2.0, 2.0);
    const IndexSet betas(n, beta_max);

    // draw all probe points up front so thread count cannot matter
    std::vector<std::vector<double>> probes(static_cast<size_t>(samples));
    for (auto& p : probes) {
        p.resize(static_cast<size_t>(n));
        for (double& v : p) v = coord(rng);
    }

    ExperimentResult result;
    result.out_path = out;
    for (double shape : shapes) {
        for (const auto& beta : betas.indices()) {
            std::vector<double> gaps(probes.size());
            detail::parallel_for(probes.size(), opt.threads, [&](size_t i) {
                const double fourier = sigma_beta(beta, probes[i], shape).value;
                const double lattice = sigma_beta_lattice(beta, probes[i], shape);
                gaps[i] = std::abs(fourier - lattice);
            });
            const double worst = *std::max_element(gaps.begin(), gaps.end());
            const SigmaValue sample = sigma_beta(beta, probes.front(), shape);
            const double amp = sigma_sup_amplitude(beta, shape);
            const bool pass = worst <= tol;
            result.ok = result.ok && pass;
            os << detail::fmt(shape) << ',';
            for (int j = 0; j < n; ++j) os << beta[j] << (j + 1 < n ? ' ' : ',');
            os << detail::fmt(amp) << ',' << sample.cutoff << ',' << detail::fmt(worst) << ','
               << (pass ? 1 : 0) << "\n";
        }
        result.summary.push_back("saturation D=" + detail::fmt(shape) +
                                 (result.ok ? " all cross-checks passed" : " CROSS-CHECK FAILURE"));
    }
    return result;
}

// Moment-condition residuals for seeded random derivative polynomials.
inline ExperimentResult run_moments_check(const json& spec, const RunOptions& opt) {
    const int trials = detail::optional_field<int>(spec, "trials", 50);
    const int n_max = detail::optional_field<int>(spec, "n_max", 3);
    const int order_max = detail::optional_field<int>(spec, "order_max", 6);
    const double tol = detail::optional_field<double>(spec, "tolerance", 1e-10);
    if (trials < 1 || n_max < 1 || order_max < 2) throw ConfigError("bad moments-check parameters");

    json resolved = spec;
    resolved["seed"] = opt.seed;
    const std::string out =
        opt.out_override.empty() ? detail::require<std::string>(spec, "out") : opt.out_override;
    std::ofstream os = detail::open_csv(out, resolved);
    os << "trial,n,N,max_residual,pass\n";

    std::mt19937_64 rng(opt.seed);
    static const Rational pool[] = {rat(-1), rat(-1, 2), rat(-1, 4), rat(0),
                                    rat(1, 4), rat(1, 2), rat(1)};
    std::uniform_int_distribution<int> pick_n(1, n_max), pick_order(2, order_max);
    std::uniform_int_distribution<size_t> pick_coeff(0, std::size(pool) - 1);

    ExperimentResult result;
    result.out_path = out;
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        const int n = pick_n(rng);
        const int order = pick_order(rng);
        IndexMap<Rational> coeffs;
        const IndexSet gammas(n, order - 1);
        for (const auto& gamma : gammas.indices()) {
            if (gamma.order() == 0) continue;
            const Rational a = pool[pick_coeff(rng)];
            if (a != Rational(0)) coeffs.emplace(gamma, a);
        }
        const QPolynomial q(n, order, std::move(coeffs));
        const GeneratingFunction h = build_hermite_generator(q);
        const MomentReport report = verify_moment_conditions(h, q, tol);
        worst = std::max(worst, report.max_abs_residual);
        result.ok = result.ok && report.pass;
        os << t << ',' << n << ',' << order << ',' << detail::fmt(report.max_abs_residual) << ','
           << (report.pass ? 1 : 0) << "\n";
    }
    result.summary.push_back("moments-check " + std::to_string(trials) +
                             " trials, worst residual " + detail::fmt(worst) +
                             (result.ok ? " (all passed)" : " (TOLERANCE FAILURE)"));
    return result;
}

// Derivative study: operator route against central differences, and the
// approximation error of d^beta u with slopes across h.
inline ExperimentResult run_deriv(const json& spec, const RunOptions& opt) {
    const std::string fn_id = detail::require<std::string>(spec, "function");
    const json gen_json = detail::require<json>(spec, "generator");
    const auto shapes = detail::require<std::vector<double>>(spec, "D");
    const auto hs = detail::require<std::vector<double>>(spec, "h");
    const auto beta_vec = detail::require<std::vector<int>>(spec, "beta");
    const double id_tol = detail::optional_field<double>(spec, "identity_tolerance", 1e-5);
    const double tail_tol = opt.tail_tol_override > 0.0
                                ? opt.tail_tol_override
                                : detail::optional_field<double>(spec, "tail_tol", 1e-16);

    GeneratorSpec gen = resolve_generator(gen_json, 1);
    if (gen.kind != GeneratorSpec::Kind::hermite)
        throw ConfigError("run_deriv needs a Hermite-form generator");
    const MultiIndex beta(beta_vec);
    const EvalGrid grid = parse_eval_grid(detail::require<json>(spec, "eval"), gen.dimension);
    const TestFunction fn = make_test_function(fn_id, grid.lo, grid.hi);
    if (fn.dimension != gen.dimension) throw ConfigError("function/generator dimension mismatch");

    json resolved = spec;
    resolved["resolved_tail_tol"] = tail_tol;
    resolved["seed"] = opt.seed;
    const std::string out =
        opt.out_override.empty() ? detail::require<std::string>(spec, "out") : opt.out_override;
    std::ofstream os = detail::open_csv(out, resolved);
    os << "function,beta,D,h,sup_identity_gap,sup_error,slope_from_prev\n";

    ExperimentResult result;
    result.out_path = out;
    const double fd_step = 1e-6;
    for (double shape : shapes) {
        double prev_err = 0.0, prev_h = 0.0;
        bool first = true;
        for (double h : hs) {
            QIConfig cfg{.h = h, .shape = shape, .order = gen.order, .tail_tol = tail_tol};
            const HermiteData data = detail::sample_for(gen, fn, h, cfg.step(), tail_tol, grid);

            std::vector<double> gap(grid.points.size()), err(grid.points.size());
            detail::parallel_for(grid.points.size(), opt.threads, [&](size_t i) {
                const auto& x = grid.points[i];
                const double op = evaluate_qi_derivative(*gen.h, *gen.q, data, cfg, x, beta).value;
                // central difference of the plain interpolant along the beta axes
                int axis = 0;
                while (beta[axis] == 0) ++axis;
                std::vector<double> xp(x), xm(x);
                xp[static_cast<size_t>(axis)] += fd_step;
                xm[static_cast<size_t>(axis)] -= fd_step;
                double fd;
                if (beta.order() == 1) {
                    fd = (detail::evaluate_generator(gen, data, cfg, xp) -
                          detail::evaluate_generator(gen, data, cfg, xm)) /
                         (2.0 * fd_step);
                } else {
                    // higher orders: difference the derived-operator route one
                    // order down, which is exact in the kernel
                    MultiIndex down(beta);
                    down[axis] -= 1;
                    fd = (evaluate_qi_derivative(*gen.h, *gen.q, data, cfg, xp, down).value -
                          evaluate_qi_derivative(*gen.h, *gen.q, data, cfg, xm, down).value) /
                         (2.0 * fd_step);
                }
                gap[i] = std::abs(op - fd);
                err[i] = std::abs(op - fn.derivative(beta, x));
            });
            const double sup_gap = *std::max_element(gap.begin(), gap.end());
            const double sup_err = *std::max_element(err.begin(), err.end());
            const bool pass = sup_gap <= id_tol;
            result.ok = result.ok && pass;

            std::string slope_txt;
            if (!first) {
                const double slope = std::log2(prev_err / sup_err) / std::log2(prev_h / h);
                slope_txt = detail::fmt(slope);
            }
            os << fn_id << ',';
            for (int j = 0; j < beta.size(); ++j) os << beta[j] << (j + 1 < beta.size() ? ' ' : ',');
            os << detail::fmt(shape) << ',' << detail::fmt(h) << ',' << detail::fmt(sup_gap) << ','
               << detail::fmt(sup_err) << ',' << slope_txt << "\n";
            result.summary.push_back("deriv D=" + detail::fmt(shape) + " h=" + detail::fmt(h) +
                                     " identity-gap=" + detail::fmt(sup_gap) +
                                     (pass ? "" : " (FAIL)"));
            prev_err = sup_err;
            prev_h = h;
            first = false;
        }
    }
    return result;
}

// dispatch on spec["kind"]; unknown kinds are config errors
inline ExperimentResult run_experiment(const json& spec, const RunOptions& opt) {
    const std::string kind = detail::require<std::string>(spec, "kind");
    if (kind == "converge") return run_converge(spec, opt);
    if (kind == "harmonic") return run_harmonic(spec, opt);
    if (kind == "saturation") return run_saturation(spec, opt);
    if (kind == "moments-check") return run_moments_check(spec, opt);
    if (kind == "deriv") return run_deriv(spec, opt);
    throw ConfigError("unknown experiment kind '" + kind + "'");
}

inline json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

}  // namespace hqi::experiments

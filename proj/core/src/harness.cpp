#include "hsav/harness.hpp"

#include "hsav/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace hsav {

std::string_view to_string(ErrorNorm norm) {
    return norm == ErrorNorm::l2_h ? "l2_h" : "max";
}

std::string_view to_string(ReferenceKind kind) {
    switch (kind) {
        case ReferenceKind::analytic: return "analytic";
        case ReferenceKind::finest_dt: return "finest_dt";
        case ReferenceKind::cauchy: return "cauchy";
    }
    return "unknown";
}

ReferenceKind parse_reference(std::string_view text) {
    if (text == "analytic") return ReferenceKind::analytic;
    if (text == "finest_dt") return ReferenceKind::finest_dt;
    if (text == "cauchy") return ReferenceKind::cauchy;
    throw std::invalid_argument("unknown reference '" + std::string(text) + "' (analytic, finest_dt, cauchy)");
}

double error_norm(const Field& a, const Field& b, ErrorNorm norm_kind) {
    if (norm_kind == ErrorNorm::max) return max_abs_diff(a, b);
    return norm(a - b);
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!first_error) first_error = std::current_exception();
                    }
                }
            });
        }
    }
    if (first_error) std::rethrow_exception(first_error);
}

// Refinement -----------------------------------------------------------------

void validate_dt_list(std::span<const double> dt_list, double t_end) {
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("refinement: t_end must be > 0");
    if (dt_list.size() < 2) throw std::invalid_argument("refinement: need at least two time steps");
    for (std::size_t i = 0; i < dt_list.size(); ++i) {
        const double dt = dt_list[i];
        if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("refinement: dt must be > 0");
        if (i > 0 && !(dt < dt_list[i - 1])) {
            std::ostringstream msg;
            msg << "refinement: dt list must be strictly decreasing (entry " << i << " = " << dt
                << " after " << dt_list[i - 1] << ")";
            throw std::invalid_argument(msg.str());
        }
        const double n = t_end / dt;
        if (std::abs(n - std::round(n)) > 1e-8 * std::max(1.0, n)) {
            std::ostringstream msg;
            msg << "refinement: dt = " << dt << " does not divide t_end = " << t_end;
            throw std::invalid_argument(msg.str());
        }
    }
}

ConvergenceTable refinement_study(const ModelSpec& model, const Field& phi0, const RefinementSpec& spec) {
    validate_dt_list(spec.dt_list, spec.t_end);
    if (spec.reference == ReferenceKind::analytic && !spec.analytic) {
        throw std::invalid_argument("refinement: analytic reference requested without a solution");
    }
    spec.solver.validate();

    const std::size_t n = spec.dt_list.size();
    std::vector<std::optional<Field>> finals(n);
    std::vector<std::string> failures(n);
    const SavState initial = init_consistent(phi0, model);

    parallel_for(n, spec.threads, [&](std::size_t i) {
        try {
            finals[i] = integrate(initial, model, spec.method, spec.dt_list[i], spec.t_end, {}, spec.solver).phi;
        } catch (const NumericalError& e) {
            failures[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < n; ++i) {
        if (!finals[i]) {
            std::ostringstream msg;
            msg << "refinement (" << spec.method.name() << ") failed at dt = " << spec.dt_list[i] << ": "
                << failures[i];
            throw NumericalError(msg.str());
        }
    }

    ConvergenceTable table{spec.method.name(), spec.norm, spec.reference, {}};
    auto add_row = [&](double dt, double error) {
        ConvergenceRow row{dt, error, std::nullopt};
        if (!table.rows.empty()) {
            const auto& prev = table.rows.back();
            row.order = std::log(prev.error / error) / std::log(prev.dt / dt);
        }
        table.rows.push_back(row);
    };
    switch (spec.reference) {
        case ReferenceKind::analytic: {
            const Field exact = spec.analytic(spec.t_end);
            for (std::size_t i = 0; i < n; ++i) add_row(spec.dt_list[i], error_norm(*finals[i], exact, spec.norm));
            break;
        }
        case ReferenceKind::finest_dt:
            for (std::size_t i = 0; i + 1 < n; ++i) {
                add_row(spec.dt_list[i], error_norm(*finals[i], *finals[n - 1], spec.norm));
            }
            break;
        case ReferenceKind::cauchy:
            for (std::size_t i = 0; i + 1 < n; ++i) {
                add_row(spec.dt_list[i], error_norm(*finals[i], *finals[i + 1], spec.norm));
            }
            break;
    }
    return table;
}

std::vector<double> orders_above_floor(const ConvergenceTable& table, double floor, std::size_t pairs) {
    std::vector<double> orders;
    for (std::size_t i = 1; i < table.rows.size(); ++i) {
        if (table.rows[i - 1].error > floor && table.rows[i].error > floor && table.rows[i].order) {
            orders.push_back(*table.rows[i].order);
        }
    }
    if (orders.size() > pairs) orders.erase(orders.begin(), orders.end() - static_cast<std::ptrdiff_t>(pairs));
    return orders;
}

// Energy ---------------------------------------------------------------------

double EnergyTrace::worst_increase(double slack) const {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < samples.size(); ++i) {
        const double before = samples[i - 1].modified;
        worst = std::max(worst, samples[i].modified - before - slack * (1.0 + std::abs(before)));
    }
    return worst;
}

EnergyTrace record_energy(const ModelSpec& model, const Field& phi0, const Method& method, double dt, double t_end,
                          std::size_t stride, const SolverConfig& solver) {
    EnergyTrace trace{method, dt, {}, std::nullopt};
    const Observer observer{std::max<std::size_t>(stride, 1), [&](const StepEvent& ev) {
                                const EnergyPair e = energy(ev.state, model);
                                trace.samples.push_back({ev.t, e.modified, e.raw, ev.state.q});
                            }};
    try {
        integrate(init_consistent(phi0, model), model, method, dt, t_end, std::span(&observer, 1), solver);
    } catch (const NumericalError& e) {
        trace.failure = e.what();
    }
    return trace;
}

std::vector<EnergyTrace> energy_sweep(const ModelSpec& model, const Field& phi0, std::span<const Method> methods,
                                      std::span<const double> dt_list, double t_end, std::size_t stride,
                                      const SolverConfig& solver, int threads) {
    solver.validate();
    std::vector<EnergyTrace> traces(methods.size() * dt_list.size());
    parallel_for(traces.size(), threads, [&](std::size_t i) {
        const Method& m = methods[i / dt_list.size()];
        const double dt = dt_list[i % dt_list.size()];
        traces[i] = record_energy(model, phi0, m, dt, t_end, stride, solver);
    });
    return traces;
}

// Fits -----------------------------------------------------------------------

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("fit_line: x and y differ in length");
    if (x.size() < 2) throw std::invalid_argument("fit_line: need at least two points");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_line: x values are all equal");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

PowerLawFit fit_power_law(std::span<const EnergySample> samples, double t_lo, double t_hi, bool use_raw) {
    if (!(t_lo > 0.0) || !(t_hi > t_lo)) throw std::invalid_argument("power law: window must satisfy 0 < t_lo < t_hi");
    std::vector<double> lx;
    std::vector<double> ly;
    for (const auto& s : samples) {
        if (s.t < t_lo || s.t > t_hi) continue;
        const double e = use_raw ? s.raw : s.modified;
        if (!(e > 0.0)) {
            std::ostringstream msg;
            msg << "power law: non-positive energy " << e << " at t = " << s.t;
            throw NumericalError(msg.str());
        }
        lx.push_back(std::log(s.t));
        ly.push_back(std::log(e));
    }
    if (lx.size() < 5) {
        std::ostringstream msg;
        msg << "power law: window [" << t_lo << ", " << t_hi << "] holds " << lx.size() << " samples, need >= 5";
        throw std::invalid_argument(msg.str());
    }
    const LinearFit f = fit_line(lx, ly);
    return {f.slope, f.intercept, t_lo, t_hi, f.residual, lx.size()};
}

// Disk -----------------------------------------------------------------------

double disk_volume(const Field& phi) {
    const auto count = std::count_if(phi.values().begin(), phi.values().end(), [](double v) { return v > 0.0; });
    return phi.grid().hx() * phi.grid().hy() * static_cast<double>(count);
}

double DiskTrace::max_relative_deviation(double radius, double t_lo, double t_hi) const {
    const double v0 = std::numbers::pi * radius * radius;
    double worst = 0.0;
    for (const auto& s : samples) {
        if (s.t < t_lo || s.t > t_hi) continue;
        const double expected = v0 - 2.0 * std::numbers::pi * s.t;
        worst = std::max(worst, std::abs(s.volume - expected) / expected);
    }
    return worst;
}

std::vector<DiskTrace> disk_benchmark(const DiskBenchmarkConfig& config, std::span<const double> dt_list,
                                      std::span<const Method> methods, int threads) {
    config.solver.validate();
    if (!(config.sample_interval > 0.0)) throw std::invalid_argument("disk: sample interval must be > 0");
    const ModelSpec model = allen_cahn(config.params, config.grid);
    const Field phi0 = initial_condition(DiskInit{config.radius}, config.grid);

    std::vector<DiskTrace> traces(methods.size() * dt_list.size());
    parallel_for(traces.size(), threads, [&](std::size_t i) {
        DiskTrace& trace = traces[i];
        trace.method = methods[i / dt_list.size()];
        trace.dt = dt_list[i % dt_list.size()];
        const auto stride = static_cast<std::size_t>(std::max(1.0, std::round(config.sample_interval / trace.dt)));
        const Observer observer{stride, [&](const StepEvent& ev) {
                                    trace.samples.push_back({ev.t, disk_volume(ev.state.phi)});
                                }};
        try {
            integrate(init_consistent(phi0, model), model, trace.method, trace.dt, config.t_end,
                      std::span(&observer, 1), config.solver);
        } catch (const NumericalError& e) {
            trace.failure = e.what();
        }
        std::vector<double> ts;
        std::vector<double> vs;
        for (const auto& s : trace.samples) {
            if (s.t >= config.fit_t_lo) {
                ts.push_back(s.t);
                vs.push_back(s.volume);
            }
        }
        if (ts.size() >= 2) trace.fit = fit_line(ts, vs);
    });
    return traces;
}

// Power law ------------------------------------------------------------------

PowerLawResult power_law_study(const PowerLawConfig& config) {
    const double hi = config.window_hi.value_or(config.t_end);
    if (!(hi <= config.t_end)) throw std::invalid_argument("power law: window extends past t_end");
    const ModelSpec model = cahn_hilliard(config.params, config.grid);
    const Field phi0 = initial_condition(config.initial, config.grid);
    PowerLawResult result;
    result.trace = record_energy(model, phi0, config.method, config.dt, config.t_end, config.stride, config.solver);
    if (result.trace.failure) throw NumericalError("power law run failed: " + *result.trace.failure);
    result.modified = fit_power_law(result.trace.samples, config.window_lo, hi, false);
    result.raw = fit_power_law(result.trace.samples, config.window_lo, hi, true);
    return result;
}

// Oracle ---------------------------------------------------------------------

namespace {

struct OracleRhs {
    Field dphi;
    double dq;
};

// phi_t = G (L phi + q g'(phi)/r),  q_t = (g'(phi)/(2r), phi_t)_h,  r = sqrt((g(phi),1)_h + C0)
OracleRhs oracle_rhs(const ModelSpec& model, const Field& phi, double q) {
    const Field g = model.potential(phi);
    double mass = 0.0;
    for (double v : g.values()) mass += v;
    const double rad = mass * phi.grid().hx() * phi.grid().hy() + model.c0;
    if (!(rad > 0.0)) throw RadicandError("oracle: non-positive radicand", rad);
    const double r = std::sqrt(rad);

    Field w = model.variation(phi);
    w *= 1.0 / r;
    Field mu = apply_symbol(model.linear, phi);
    mu.axpy(q, w);
    Field dphi = apply_symbol(model.mobility, mu);
    const double dq = 0.5 * inner(w, dphi);
    return {std::move(dphi), dq};
}

}  // namespace

SavState oracle_reference(const ModelSpec& model, const SavState& initial, double t_end, double dt_ref) {
    const Grid2D& grid = initial.phi.grid();
    if (grid.size() > kOracleMaxNodes) {
        throw std::invalid_argument("oracle: grid larger than 16x16 is outside the oracle budget");
    }
    if (!(dt_ref > 0.0)) throw std::invalid_argument("oracle: dt_ref must be > 0");
    const double span = t_end - initial.t;
    if (!(span >= 0.0)) throw std::invalid_argument("oracle: t_end is before the initial time");
    const double steps_real = std::ceil(span / dt_ref - 1e-9);
    if (steps_real > kOracleMaxSteps) {
        std::ostringstream msg;
        msg << "oracle: " << steps_real << " steps exceed the budget of " << kOracleMaxSteps;
        throw std::invalid_argument(msg.str());
    }
    const auto steps = static_cast<std::size_t>(std::max(0.0, steps_real));

    SavState state = initial;
    for (std::size_t n = 0; n < steps; ++n) {
        const double t_next = n + 1 == steps ? t_end : initial.t + static_cast<double>(n + 1) * dt_ref;
        const double h = t_next - state.t;

        // Implicit midpoint y1 = y0 + h f((y0 + y1)/2), fixed point from an Euler predictor.
        const OracleRhs f0 = oracle_rhs(model, state.phi, state.q);
        Field phi1 = state.phi;
        phi1.axpy(h, f0.dphi);
        double q1 = state.q + h * f0.dq;
        bool converged = false;
        double change = 0.0;
        for (int it = 0; it < 100; ++it) {
            Field mid = state.phi + phi1;
            mid *= 0.5;
            const OracleRhs f = oracle_rhs(model, mid, 0.5 * (state.q + q1));
            Field next = state.phi;
            next.axpy(h, f.dphi);
            const double q_next = state.q + h * f.dq;
            change = std::max(max_abs_diff(next, phi1), std::abs(q_next - q1));
            phi1 = std::move(next);
            q1 = q_next;
            const double scale = 1.0 + std::max(phi1.max_abs(), std::abs(q1));
            if (change <= 4e-16 * scale) {
                converged = true;
                break;
            }
        }
        if (!converged && change > 1e-13 * (1.0 + phi1.max_abs() + std::abs(q1))) {
            throw ConvergenceError("oracle: midpoint fixed point did not converge", 100, change);
        }
        state.phi = std::move(phi1);
        state.q = q1;
        state.t = t_next;
    }
    return state;
}

// CSV ------------------------------------------------------------------------

std::uint64_t fnv1a(std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_energy_csv(std::ostream& out, const EnergyTrace& trace, std::string_view manifest) {
    out << "# manifest: " << manifest << '\n';
    if (trace.failure) out << "# failure: " << *trace.failure << '\n';
    out << "t,E_modified,E_raw,q\n" << std::setprecision(17);
    for (const auto& s : trace.samples) out << s.t << ',' << s.modified << ',' << s.raw << ',' << s.q << '\n';
}

void write_convergence_csv(std::ostream& out, const ConvergenceTable& table, std::string_view manifest) {
    out << "# manifest: " << manifest << '\n';
    out << "dt,error,order\n" << std::setprecision(17);
    for (const auto& r : table.rows) {
        out << r.dt << ',' << r.error << ',';
        if (r.order) out << *r.order;
        out << '\n';
    }
}

void write_disk_csv(std::ostream& out, const DiskTrace& trace, std::string_view manifest) {
    out << "# manifest: " << manifest << '\n';
    if (trace.failure) out << "# failure: " << *trace.failure << '\n';
    out << "t,volume\n" << std::setprecision(17);
    for (const auto& s : trace.samples) out << s.t << ',' << s.volume << '\n';
}

}  // namespace hsav

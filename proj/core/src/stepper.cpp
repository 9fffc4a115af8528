#include "hsav/stepper.hpp"

#include "hsav/dense.hpp"
#include "hsav/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace hsav {

void SolverConfig::validate() const {
    if (!(tolerance > 0.0)) throw std::invalid_argument("SolverConfig: tolerance must be > 0");
    if (max_iterations < 1) throw std::invalid_argument("SolverConfig: max_iterations must be >= 1");
    if (anderson_depth < 0) throw std::invalid_argument("SolverConfig: anderson_depth must be >= 0");
}

std::string_view to_string(SolverMode mode) {
    return mode == SolverMode::full_picard ? "full_picard" : "picard_preconditioned";
}

SolverMode parse_solver_mode(std::string_view text) {
    if (text == "picard_preconditioned") return SolverMode::picard_preconditioned;
    if (text == "full_picard") return SolverMode::full_picard;
    throw std::invalid_argument("unknown solver mode '" + std::string(text) +
                                "' (expected picard_preconditioned or full_picard)");
}

bool dissipation_holds(double before, double after) noexcept {
    return after <= before + kDissipationSlack * (1.0 + std::abs(before));
}

namespace {

/// Anderson mixing (type II) on a flat iterate vector.
class AndersonMixer {
public:
    explicit AndersonMixer(std::size_t depth) : depth_(depth) {}

    /// Given the current iterate x and the sweep output g = G(x), returns the
    /// next iterate.
    std::vector<double> next(const std::vector<double>& x, const std::vector<double>& g) {
        std::vector<double> f(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) f[i] = g[i] - x[i];
        if (!prev_f_.empty()) {
            std::vector<double> df(f.size());
            std::vector<double> dg(g.size());
            for (std::size_t i = 0; i < f.size(); ++i) {
                df[i] = f[i] - prev_f_[i];
                dg[i] = g[i] - prev_g_[i];
            }
            d_f_.push_back(std::move(df));
            d_g_.push_back(std::move(dg));
            if (d_f_.size() > depth_) {
                d_f_.erase(d_f_.begin());
                d_g_.erase(d_g_.begin());
            }
        }
        prev_f_ = f;
        prev_g_ = g;
        if (d_f_.empty()) return g;

        // Least squares min |f - dF gamma| through regularised normal equations.
        const std::size_t m = d_f_.size();
        std::vector<double> gram(m * m);
        std::vector<double> rhs(m);
        double trace = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t b = a; b < m; ++b) {
                double sum = 0.0;
                for (std::size_t i = 0; i < f.size(); ++i) sum += d_f_[a][i] * d_f_[b][i];
                gram[a * m + b] = gram[b * m + a] = sum;
            }
            double sum = 0.0;
            for (std::size_t i = 0; i < f.size(); ++i) sum += d_f_[a][i] * f[i];
            rhs[a] = sum;
            trace += gram[a * m + a];
        }
        if (!(trace > 0.0)) return g;
        for (std::size_t a = 0; a < m; ++a) gram[a * m + a] += 1e-14 * trace;
        try {
            dense::solve_in_place<double>(gram, rhs, m);
        } catch (const std::domain_error&) {
            reset();
            return g;
        }
        std::vector<double> out = g;
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t i = 0; i < out.size(); ++i) out[i] -= rhs[a] * d_g_[a][i];
        }
        return out;
    }

    void reset() {
        d_f_.clear();
        d_g_.clear();
        prev_f_.clear();
        prev_g_.clear();
    }

private:
    std::size_t depth_;
    std::vector<std::vector<double>> d_f_;
    std::vector<std::vector<double>> d_g_;
    std::vector<double> prev_f_;
    std::vector<double> prev_g_;
};

bool same_spectra(const std::vector<Spectrum>& a, const std::vector<Spectrum>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto ca = a[i].coefficients();
        const auto cb = b[i].coefficients();
        if (!std::equal(ca.begin(), ca.end(), cb.begin())) return false;
    }
    return true;
}

}  // namespace

struct HsavStepper::Impl {
    struct LinearSolve {
        std::vector<Spectrum> phi_hat;
        std::vector<double> q;
        std::vector<Spectrum> k_hat;
        std::vector<double> l;
        std::vector<double> mu_g_mu;  // (mu_i, G mu_i)_h
    };

    Impl(const ModelSpec& m, ButcherTableau t, SolverConfig c, TableauPolicy policy)
        : model(&m), tableau(std::move(t)), config(c), s(tableau.stages()), grid(m.grid()) {
        config.validate();
        stable = check_stability(tableau).passes;
        if (!stable && policy == TableauPolicy::require_stable) {
            throw std::invalid_argument("tableau '" + tableau.name() +
                                        "' fails the energy-stability condition; pass "
                                        "TableauPolicy::allow_unstable to run it anyway");
        }
        const std::size_t modes = grid.spectral_size();
        weight.resize(modes);
        const double c_norm = grid.hx() * grid.hy() / static_cast<double>(grid.size());
        for (std::size_t j = 0; j < grid.nx(); ++j) {
            for (std::size_t k = 0; k < grid.spectral_ny(); ++k) {
                weight[j * grid.spectral_ny() + k] = c_norm * column_weight(grid, k);
            }
        }
    }

    // Effective linear symbol sigma_L + shift * shape at mode m.
    double shifted_linear(std::size_t m, double shift) const {
        return shift == 0.0 ? model->linear[m] : model->linear[m] + shift * model->jacobian->shape[m];
    }

    void prepare(double dt, double shift) {
        if (dt == cached_dt && shift == cached_shift) return;
        const std::size_t modes = grid.spectral_size();
        const std::size_t ss = s * s;
        m_mat.assign(modes * ss, 0.0);
        p_mat.assign(modes * ss, 0.0);
        std::vector<double> sys(ss);
        std::vector<double> scratch(ss + s);
        for (std::size_t m = 0; m < modes; ++m) {
            const double sigma = model->mobility[m] * shifted_linear(m, shift);
            for (std::size_t i = 0; i < s; ++i) {
                for (std::size_t j = 0; j < s; ++j) {
                    sys[i * s + j] = (i == j ? 1.0 : 0.0) - dt * sigma * tableau.a(i, j);
                }
            }
            std::span<double> mm(m_mat.data() + m * ss, ss);
            try {
                dense::invert<double>(sys, mm, s, scratch);
            } catch (const std::domain_error&) {
                cached_dt = std::numeric_limits<double>::quiet_NaN();
                throw ConvergenceError("hsav step: singular stage matrix for a Fourier mode (dt = " +
                                           std::to_string(dt) + ")",
                                       0, std::numeric_limits<double>::infinity());
            }
            std::span<double> pm(p_mat.data() + m * ss, ss);
            for (std::size_t i = 0; i < s; ++i) {
                for (std::size_t j = 0; j < s; ++j) {
                    double sum = 0.0;
                    for (std::size_t r = 0; r < s; ++r) sum += mm[i * s + r] * tableau.a(r, j);
                    pm[i * s + j] = sum;
                }
            }
        }
        cached_dt = dt;
        cached_shift = shift;
    }

    Spectrum normalized_variation_hat(const Field& phi) const {
        const double r = std::sqrt(radicand(phi, *model));
        Field w = model->variation(phi);
        w *= 1.0 / r;
        return forward(w);
    }

    double modified_energy(const Spectrum& phi_hat, double q) const {
        double quad = 0.0;
        for (std::size_t m = 0; m < phi_hat.size(); ++m) quad += weight[m] * model->linear[m] * std::norm(phi_hat[m]);
        return 0.5 * quad + q * q - model->c0;
    }

    // Solves the stage equations with every w_i frozen. With `q_frozen` set the
    // Q_i inside k_i are frozen too (full Picard); otherwise they are solved for.
    // A nonzero shift moves shift * shape * Phi_i to the implicit side and
    // freezes the same term at the previous iterate `phi_old_hat`.
    LinearSolve solve_linear(const Spectrum& phi_n_hat, double q_n, const std::vector<Spectrum>& w_hat,
                             const std::vector<double>* q_frozen, double dt, double shift = 0.0,
                             const std::vector<Spectrum>* phi_old_hat = nullptr) const {
        const std::size_t modes = grid.spectral_size();
        const std::size_t ss = s * s;
        const bool shifted = shift != 0.0;
        // e_j = -shift * shape * Phi_j^old, the Q-independent part of the frozen forcing.
        auto extra = [&](std::size_t j, std::size_t m) {
            return shifted ? -shift * model->jacobian->shape[m] * (*phi_old_hat)[j][m] : std::complex<double>(0.0, 0.0);
        };

        std::vector<double> l0(s, 0.0);
        std::vector<double> bmat(ss, 0.0);
        for (std::size_t m = 0; m < modes; ++m) {
            const double sg = model->mobility[m];
            if (sg == 0.0) continue;
            const double wt = weight[m];
            const double sl = shifted_linear(m, shift);
            const double* mm = m_mat.data() + m * ss;
            const auto p = phi_n_hat[m];
            for (std::size_t i = 0; i < s; ++i) {
                double u = 0.0;
                std::complex<double> me(0.0, 0.0);
                for (std::size_t j = 0; j < s; ++j) {
                    u += mm[i * s + j];
                    if (shifted) me += mm[i * s + j] * extra(j, m);
                }
                const auto wi = w_hat[i][m];
                const auto k0 = sg * (sl * u * p + me);
                l0[i] += 0.5 * wt * (wi.real() * k0.real() + wi.imag() * k0.imag());
                for (std::size_t j = 0; j < s; ++j) {
                    const auto wj = w_hat[j][m];
                    bmat[i * s + j] += 0.5 * wt * sg * mm[i * s + j] * (wi.real() * wj.real() + wi.imag() * wj.imag());
                }
            }
        }

        LinearSolve out;
        std::vector<double> qk(s);  // Q values entering k
        if (q_frozen == nullptr) {
            std::vector<double> sys(ss);
            std::vector<double> rhs(s);
            for (std::size_t i = 0; i < s; ++i) {
                rhs[i] = q_n;
                for (std::size_t j = 0; j < s; ++j) {
                    double ab = 0.0;
                    for (std::size_t r = 0; r < s; ++r) ab += tableau.a(i, r) * bmat[r * s + j];
                    sys[i * s + j] = (i == j ? 1.0 : 0.0) - dt * ab;
                    rhs[i] += dt * tableau.a(i, j) * l0[j];
                }
            }
            dense::solve_in_place<double>(sys, rhs, s);
            qk = rhs;
            out.q = rhs;
            out.l.assign(s, 0.0);
            for (std::size_t i = 0; i < s; ++i) {
                out.l[i] = l0[i];
                for (std::size_t j = 0; j < s; ++j) out.l[i] += bmat[i * s + j] * qk[j];
            }
        } else {
            qk = *q_frozen;
            out.l.assign(s, 0.0);
            out.q.assign(s, q_n);
            for (std::size_t i = 0; i < s; ++i) {
                out.l[i] = l0[i];
                for (std::size_t j = 0; j < s; ++j) out.l[i] += bmat[i * s + j] * qk[j];
            }
            for (std::size_t i = 0; i < s; ++i) {
                for (std::size_t j = 0; j < s; ++j) out.q[i] += dt * tableau.a(i, j) * out.l[j];
            }
        }

        out.phi_hat.assign(s, Spectrum(grid));
        out.k_hat.assign(s, Spectrum(grid));
        out.mu_g_mu.assign(s, 0.0);
        std::vector<std::complex<double>> qw(s);
        for (std::size_t m = 0; m < modes; ++m) {
            const double sg = model->mobility[m];
            const double sl = shifted_linear(m, shift);
            const double wt = weight[m];
            const double* mm = m_mat.data() + m * ss;
            const double* pm = p_mat.data() + m * ss;
            const auto p = phi_n_hat[m];
            for (std::size_t j = 0; j < s; ++j) qw[j] = qk[j] * w_hat[j][m] + extra(j, m);
            for (std::size_t i = 0; i < s; ++i) {
                double u = 0.0;
                std::complex<double> pq(0.0, 0.0);
                std::complex<double> mq(0.0, 0.0);
                for (std::size_t j = 0; j < s; ++j) {
                    u += mm[i * s + j];
                    pq += pm[i * s + j] * qw[j];
                    mq += mm[i * s + j] * qw[j];
                }
                const auto phi_i = u * p + dt * sg * pq;
                const auto mu_i = sl * phi_i + qw[i];
                out.phi_hat[i][m] = phi_i;
                out.k_hat[i][m] = sg * (sl * u * p + mq);
                out.mu_g_mu[i] += wt * sg * std::norm(mu_i);
            }
        }
        return out;
    }

    StepResult finish(const SavState& state, const Spectrum& phi_n_hat, double energy_before,
                      const LinearSolve& sol, std::vector<Field>&& stage_phi, double dt,
                      int iterations, double residual) const {
        Spectrum next_hat = phi_n_hat;
        double q_next = state.q;
        double dissipation = 0.0;
        for (std::size_t i = 0; i < s; ++i) {
            const double bdt = dt * tableau.b(i);
            const auto& kh = sol.k_hat[i];
            for (std::size_t m = 0; m < next_hat.size(); ++m) next_hat[m] += bdt * kh[m];
            q_next += bdt * sol.l[i];
            dissipation += bdt * sol.mu_g_mu[i];
        }
        const double energy_after = modified_energy(next_hat, q_next);

        StepResult result{SavState{inverse(std::move(next_hat)), q_next, state.t + dt}, StepReport{}, {}};
        result.report.iterations_used = iterations;
        result.report.final_residual = residual;
        result.report.energy_before = energy_before;
        result.report.energy_after = energy_after;
        result.report.dissipation = dissipation;
        result.report.dissipation_ok = dissipation_holds(energy_before, energy_after);

        if (config.record_stages) {
            result.stages.phi = std::move(stage_phi);
            result.stages.q = sol.q;
            result.stages.l = sol.l;
            for (const auto& kh : sol.k_hat) result.stages.k.push_back(inverse(kh));
        }
        return result;
    }

    using Vec = std::vector<double>;

    // One application of the frozen-data map T to x = (Phi_1..Phi_s, Q_1..Q_s).
    struct Sweep {
        Vec out;
        LinearSolve sol;
    };

    std::vector<Spectrum> variations_of(const Vec& x) const {
        const std::size_t n = grid.size();
        std::vector<Spectrum> w_hat;
        w_hat.reserve(s);
        for (std::size_t i = 0; i < s; ++i) {
            w_hat.push_back(normalized_variation_hat(Field(grid, Vec(x.begin() + static_cast<long>(i * n),
                                                                     x.begin() + static_cast<long>((i + 1) * n)))));
        }
        return w_hat;
    }

    Sweep sweep(const Vec& x, const std::vector<Spectrum>& w_hat, const Spectrum& phi_n_hat, double q_n, double dt,
                double shift) const {
        const std::size_t n = grid.size();
        std::vector<Spectrum> phi_hat;
        if (shift != 0.0) {
            for (std::size_t i = 0; i < s; ++i) {
                phi_hat.push_back(forward(Field(grid, Vec(x.begin() + static_cast<long>(i * n),
                                                          x.begin() + static_cast<long>((i + 1) * n)))));
            }
        }
        const Vec q(x.begin() + static_cast<long>(s * n), x.end());
        const bool freeze_q = config.mode == SolverMode::full_picard;
        Sweep out{Vec(x.size()), solve_linear(phi_n_hat, q_n, w_hat, freeze_q ? &q : nullptr, dt, shift, &phi_hat)};
        for (std::size_t i = 0; i < s; ++i) {
            const Field f = inverse(out.sol.phi_hat[i]);
            std::copy(f.values().begin(), f.values().end(), out.out.begin() + static_cast<long>(i * n));
            out.out[s * n + i] = out.sol.q[i];
        }
        return out;
    }

    // max_i |Phi_i - Phi_i'|_inf + |Q_i - Q_i'|; NaN when either side is not finite.
    double increment(const Vec& a, const Vec& b) const {
        const std::size_t n = grid.size();
        double worst = 0.0;
        for (std::size_t i = 0; i < s; ++i) {
            double d = 0.0;
            for (std::size_t p = i * n; p < (i + 1) * n; ++p) {
                const double e = std::abs(a[p] - b[p]);
                if (!std::isfinite(e)) return std::numeric_limits<double>::quiet_NaN();
                d = std::max(d, e);
            }
            const double e = std::abs(a[s * n + i] - b[s * n + i]);
            if (!std::isfinite(e)) return std::numeric_limits<double>::quiet_NaN();
            worst = std::max(worst, d + e);
        }
        return worst;
    }

    // (a, b)_h on the stage fields plus the plain product on the stage scalars.
    double dot(const Vec& a, const Vec& b) const {
        const std::size_t n = grid.size() * s;
        double fields = 0.0;
        for (std::size_t p = 0; p < n; ++p) fields += a[p] * b[p];
        double scalars = 0.0;
        for (std::size_t p = n; p < a.size(); ++p) scalars += a[p] * b[p];
        return grid.hx() * grid.hy() * fields + scalars;
    }

    // Restarted GMRES for J d = rhs with J applied through `apply`.
    Vec gmres(const std::function<Vec(const Vec&)>& apply, const Vec& rhs, double rel_tol) const {
        constexpr std::size_t kRestart = 40;
        constexpr int kCycles = 4;
        const std::size_t len = rhs.size();
        Vec d(len, 0.0);
        const double rhs_norm = std::sqrt(dot(rhs, rhs));
        if (!(rhs_norm > 0.0)) return d;
        for (int cycle = 0; cycle < kCycles; ++cycle) {
            Vec r = rhs;
            if (cycle > 0) {
                const Vec jd = apply(d);
                for (std::size_t p = 0; p < len; ++p) r[p] -= jd[p];
            }
            const double beta = std::sqrt(dot(r, r));
            if (beta <= rel_tol * rhs_norm) break;
            std::vector<Vec> basis{r};
            for (double& v : basis[0]) v /= beta;
            std::vector<std::vector<double>> h;  // column j holds H(0..j+1, j)
            std::vector<double> cs;
            std::vector<double> sn;
            std::vector<double> g{beta};
            std::size_t used = 0;
            for (std::size_t j = 0; j < kRestart; ++j) {
                Vec v = apply(basis[j]);
                std::vector<double> col(j + 2, 0.0);
                for (std::size_t i = 0; i <= j; ++i) {
                    col[i] = dot(v, basis[i]);
                    for (std::size_t p = 0; p < len; ++p) v[p] -= col[i] * basis[i][p];
                }
                col[j + 1] = std::sqrt(dot(v, v));
                for (std::size_t i = 0; i < j; ++i) {
                    const double t = cs[i] * col[i] + sn[i] * col[i + 1];
                    col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                    col[i] = t;
                }
                const double rho = std::hypot(col[j], col[j + 1]);
                cs.push_back(rho > 0.0 ? col[j] / rho : 1.0);
                sn.push_back(rho > 0.0 ? col[j + 1] / rho : 0.0);
                const double sub = col[j + 1];
                col[j] = rho;
                col[j + 1] = 0.0;
                g.push_back(-sn[j] * g[j]);
                g[j] *= cs[j];
                h.push_back(std::move(col));
                used = j + 1;
                if (std::abs(g[j + 1]) <= rel_tol * rhs_norm || !(sub > 0.0)) break;
                for (double& e : v) e /= sub;
                basis.push_back(std::move(v));
            }
            std::vector<double> y(used, 0.0);
            for (std::size_t i = used; i-- > 0;) {
                double sum = g[i];
                for (std::size_t c = i + 1; c < used; ++c) sum -= h[c][i] * y[c];
                y[i] = sum / h[i][i];
            }
            for (std::size_t i = 0; i < used; ++i) {
                for (std::size_t p = 0; p < len; ++p) d[p] += y[i] * basis[i][p];
            }
            if (std::abs(g[used]) <= rel_tol * rhs_norm) break;
        }
        return d;
    }

    struct Solved {
        Vec x;
        Sweep sweep;
        int iterations = 0;
        double increment = 0.0;
    };

    // Stage solve for step dt from the initial iterate x: Picard sweeps, then
    // Newton-Krylov when they stall. Throws ConvergenceError on failure.
    Solved solve_stages(Vec x, const Spectrum& phi_n_hat, double q_n, double dt, double shift, int picard_budget,
                        int newton_budget) {
        prepare(dt, shift);
        AndersonMixer mixer(static_cast<std::size_t>(config.anderson_depth));
        const bool exact_shortcut = config.mode == SolverMode::picard_preconditioned && config.anderson_depth == 0 &&
                                    shift == 0.0;
        Vec best_x = x;
        double best_inc = std::numeric_limits<double>::infinity();
        double inc = best_inc;
        double prev_inc = best_inc;
        int slow = 0;
        int sweeps = 0;
        std::vector<Spectrum> w_hat = variations_of(x);
        while (sweeps < picard_budget) {
            ++sweeps;
            Sweep sw = sweep(x, w_hat, phi_n_hat, q_n, dt, shift);
            inc = increment(sw.out, x);
            if (!std::isfinite(inc)) break;
            if (inc <= config.tolerance) return {std::move(x), std::move(sw), sweeps, inc};
            if (inc < best_inc) {
                best_inc = inc;
                best_x = x;
            }
            slow = inc > 0.9 * prev_inc ? slow + 1 : 0;
            prev_inc = inc;
            if (config.newton_fallback && (slow >= 3 || inc > 1e3 * best_inc)) break;

            if (config.anderson_depth > 0) {
                x = mixer.next(x, sw.out);
            } else {
                x = std::move(sw.out);
            }
            try {
                std::vector<Spectrum> w_next = variations_of(x);
                // Unchanged frozen data means the next sweep reproduces this one exactly.
                if (exact_shortcut && same_spectra(w_next, w_hat)) {
                    sw.out = x;
                    return {std::move(x), std::move(sw), sweeps, 0.0};
                }
                w_hat = std::move(w_next);
            } catch (const RadicandError&) {
                if (!config.newton_fallback) throw;
                break;
            }
        }
        if (!config.newton_fallback || best_inc == std::numeric_limits<double>::infinity()) {
            std::ostringstream msg;
            if (!std::isfinite(inc)) {
                msg << "hsav step: stage iteration produced non-finite values at iteration " << sweeps;
            } else {
                msg << "hsav step: stage iteration did not converge in " << sweeps << " iterations (dt = " << dt
                    << ", last increment " << inc << ", tolerance " << config.tolerance << ")";
            }
            throw ConvergenceError(msg.str(), sweeps, inc);
        }
        return newton(std::move(best_x), phi_n_hat, q_n, dt, shift, sweeps, newton_budget);
    }

    // Jacobian-free Newton-Krylov on F(x) = x - T(x) with a backtracking line search.
    Solved newton(Vec x, const Spectrum& phi_n_hat, double q_n, double dt, double shift, int sweeps, int budget) {
        auto evaluate = [&](const Vec& at, Sweep& sw, Vec& f) {
            try {
                sw = sweep(at, variations_of(at), phi_n_hat, q_n, dt, shift);
            } catch (const RadicandError&) {
                return false;
            }
            f.resize(at.size());
            for (std::size_t p = 0; p < at.size(); ++p) f[p] = at[p] - sw.out[p];
            return std::isfinite(increment(sw.out, at));
        };

        Sweep sw;
        Vec f;
        if (!evaluate(x, sw, f)) {
            throw ConvergenceError("hsav step: Newton start point is not admissible", sweeps, 0.0);
        }
        double inc = increment(sw.out, x);
        for (int it = 1; it <= budget; ++it) {
            if (inc <= config.tolerance) return {std::move(x), std::move(sw), sweeps + it - 1, inc};
            const double f_norm = std::sqrt(dot(f, f));
            const double x_norm = std::sqrt(dot(x, x));
            auto jacobian = [&](const Vec& v) {
                const double v_norm = std::sqrt(dot(v, v));
                Vec out(v.size(), 0.0);
                if (!(v_norm > 0.0)) return out;
                const double h = 1e-7 * (1.0 + x_norm) / v_norm;
                Vec xp = x;
                for (std::size_t p = 0; p < v.size(); ++p) xp[p] += h * v[p];
                Sweep sp;
                Vec fp;
                if (!evaluate(xp, sp, fp)) {
                    throw ConvergenceError("hsav step: Jacobian probe left the admissible set", sweeps + it, inc);
                }
                for (std::size_t p = 0; p < v.size(); ++p) out[p] = (fp[p] - f[p]) / h;
                return out;
            };
            Vec minus_f = f;
            for (double& e : minus_f) e = -e;
            const Vec d = gmres(jacobian, minus_f, 1e-4);

            bool accepted = false;
            double alpha = 1.0;
            for (int ls = 0; ls < 12 && !accepted; ++ls, alpha *= 0.5) {
                Vec xt = x;
                for (std::size_t p = 0; p < xt.size(); ++p) xt[p] += alpha * d[p];
                Sweep st;
                Vec ft;
                if (!evaluate(xt, st, ft)) continue;
                if (std::sqrt(dot(ft, ft)) <= (1.0 - 1e-4 * alpha) * f_norm) {
                    x = std::move(xt);
                    sw = std::move(st);
                    f = std::move(ft);
                    inc = increment(sw.out, x);
                    accepted = true;
                }
            }
            if (!accepted) {
                if (inc <= 1e3 * config.tolerance) return {std::move(x), std::move(sw), sweeps + it, inc};
                std::ostringstream msg;
                msg << "hsav step: Newton line search stalled (dt = " << dt << ", increment " << inc << ")";
                throw ConvergenceError(msg.str(), sweeps + it, inc);
            }
        }
        if (inc <= config.tolerance) return {std::move(x), std::move(sw), sweeps + budget, inc};
        std::ostringstream msg;
        msg << "hsav step: Newton iteration did not converge in " << budget << " iterations (dt = " << dt
            << ", last increment " << inc << ", tolerance " << config.tolerance << ")";
        throw ConvergenceError(msg.str(), sweeps + budget, inc);
    }

    StepResult step(const SavState& state, double dt) {
        if (!(dt >= 0.0) || !std::isfinite(dt)) throw std::invalid_argument("hsav step: dt must be finite and >= 0");
        if (dt == 0.0) {
            StepResult r{state, StepReport{}, {}};
            const double e = energy(state, *model).modified;
            r.report.energy_before = r.report.energy_after = e;
            return r;
        }
        // Constant-coefficient part of the Jacobian of Q g'(Phi)/r, taken at phi^n.
        double shift = 0.0;
        if (model->jacobian) shift = state.q / std::sqrt(radicand(state.phi, *model)) * model->jacobian->scale(state.phi);
        const Spectrum phi_n_hat = forward(state.phi);
        const double energy_before = modified_energy(phi_n_hat, state.q);
        const std::size_t n = grid.size();

        Vec x0(s * n + s);
        for (std::size_t i = 0; i < s; ++i) {
            std::copy(state.phi.values().begin(), state.phi.values().end(), x0.begin() + static_cast<long>(i * n));
            x0[s * n + i] = state.q;
        }

        auto done = [&](Solved& sol) {
            std::vector<Field> stage_phi;
            for (std::size_t i = 0; i < s; ++i) {
                stage_phi.emplace_back(grid, Vec(sol.sweep.out.begin() + static_cast<long>(i * n),
                                                 sol.sweep.out.begin() + static_cast<long>((i + 1) * n)));
            }
            return finish(state, phi_n_hat, energy_before, sol.sweep.sol, std::move(stage_phi), dt, sol.iterations,
                          sol.increment);
        };

        constexpr int kNewtonPerSolve = 25;
        std::optional<ConvergenceError> direct_failure;
        try {
            Solved sol = solve_stages(x0, phi_n_hat, state.q, dt, shift, config.max_iterations, kNewtonPerSolve);
            return done(sol);
        } catch (const ConvergenceError& e) {
            if (!config.newton_fallback) throw;
            direct_failure = e;
        }

        // Continuation in the step size: solve for a growing fraction tau of
        // dt, extrapolating each converged stage set linearly in tau.
        constexpr int kMaxRejections = 12;
        int rejections = 0;
        double tau_done = 0.0;
        Vec x_done = x0;
        double h = dt / 8.0;
        int total = 0;
        while (tau_done < dt) {
            const double tau = std::min(dt, tau_done + h);
            Vec guess = x0;
            if (tau_done > 0.0) {
                const double ratio = tau / tau_done;
                for (std::size_t p = 0; p < guess.size(); ++p) guess[p] = x0[p] + ratio * (x_done[p] - x0[p]);
            }
            try {
                Solved sol = solve_stages(std::move(guess), phi_n_hat, state.q, tau, shift, 30, kNewtonPerSolve);
                total += sol.iterations;
                if (tau == dt) {
                    sol.iterations = total;
                    return done(sol);
                }
                x_done = std::move(sol.x);
                tau_done = tau;
                h *= 2.0;
            } catch (const ConvergenceError& e) {
                h *= 0.25;
                if (h < 1e-6 * dt || ++rejections > kMaxRejections) {
                    std::ostringstream msg;
                    msg << direct_failure->what() << "; continuation in dt stalled at " << tau_done / dt
                        << " of the step (" << e.what() << ")";
                    throw ConvergenceError(msg.str(), total, e.residual());
                }
            }
        }
        throw ConvergenceError(direct_failure->what(), total, direct_failure->residual());
    }

    StepResult frozen_step(const SavState& state, const Field& frozen_variation, double dt) {
        if (!(dt >= 0.0) || !std::isfinite(dt)) throw std::invalid_argument("frozen step: dt must be finite and >= 0");
        if (dt == 0.0) return step(state, 0.0);
        prepare(dt, 0.0);
        const Spectrum phi_n_hat = forward(state.phi);
        const double energy_before = modified_energy(phi_n_hat, state.q);
        std::vector<Spectrum> w_hat(s, forward(frozen_variation));
        LinearSolve sol = solve_linear(phi_n_hat, state.q, w_hat, nullptr, dt);
        std::vector<Field> stage_phi;
        if (config.record_stages) {
            for (const auto& ph : sol.phi_hat) stage_phi.push_back(inverse(ph));
        }
        return finish(state, phi_n_hat, energy_before, sol, std::move(stage_phi), dt, 1, 0.0);
    }

    const ModelSpec* model;
    ButcherTableau tableau;
    SolverConfig config;
    std::size_t s;
    Grid2D grid;
    bool stable = false;
    double cached_dt = std::numeric_limits<double>::quiet_NaN();
    double cached_shift = 0.0;
    std::vector<double> weight;
    std::vector<double> m_mat;  // (I - dt sigma A)^-1 per mode
    std::vector<double> p_mat;  // M A per mode
};

HsavStepper::HsavStepper(const ModelSpec& model, ButcherTableau tableau, SolverConfig config,
                         TableauPolicy policy)
    : impl_(std::make_unique<Impl>(model, std::move(tableau), config, policy)) {}

HsavStepper::~HsavStepper() = default;
HsavStepper::HsavStepper(HsavStepper&&) noexcept = default;
HsavStepper& HsavStepper::operator=(HsavStepper&&) noexcept = default;

StepResult HsavStepper::step(const SavState& state, double dt) { return impl_->step(state, dt); }

StepResult HsavStepper::frozen_step(const SavState& state, const Field& frozen_variation, double dt) {
    return impl_->frozen_step(state, frozen_variation, dt);
}

const ButcherTableau& HsavStepper::tableau() const noexcept { return impl_->tableau; }
const SolverConfig& HsavStepper::config() const noexcept { return impl_->config; }
bool HsavStepper::stable_tableau() const noexcept { return impl_->stable; }

StepResult hsav_rk_step(const SavState& state, const ModelSpec& model, const ButcherTableau& tableau,
                        double dt, const SolverConfig& config, TableauPolicy policy) {
    HsavStepper stepper(model, tableau, config, policy);
    return stepper.step(state, dt);
}

namespace {

Field cn_extrapolated_variation(const SavState& state, const CnHistory& history, const ModelSpec& model,
                                double dt) {
    if (!(history.dt_prev > 0.0)) throw std::invalid_argument("sav_cn_step: history dt must be > 0");
    Field star = state.phi;
    star.axpy(0.5 * dt / history.dt_prev, state.phi - history.phi_prev);
    const double r = std::sqrt(radicand(star, model));
    Field w = model.variation(star);
    w *= 1.0 / r;
    return w;
}

// First CN step: one implicit midpoint step, or, if its stage solve fails,
// the linear midpoint step with w frozen at phi^n (local error O(dt^2)).
StepResult cn_bootstrap(HsavStepper& midpoint, const SavState& state, const ModelSpec& model, double dt) {
    try {
        return midpoint.step(state, dt);
    } catch (const ConvergenceError&) {
        Field w = model.variation(state.phi);
        w *= 1.0 / std::sqrt(radicand(state.phi, model));
        return midpoint.frozen_step(state, w, dt);
    }
}

}  // namespace

StepResult sav_cn_step(const SavState& state, const ModelSpec& model, double dt,
                       const std::optional<CnHistory>& history, const SolverConfig& bootstrap_config) {
    HsavStepper midpoint(model, gauss_tableau(1), bootstrap_config);
    if (!history) return cn_bootstrap(midpoint, state, model, dt);
    if (dt == 0.0) return midpoint.step(state, 0.0);
    return midpoint.frozen_step(state, cn_extrapolated_variation(state, *history, model, dt), dt);
}

Method Method::parse(std::string_view text) {
    if (text == "cn") return cn();
    if (text.starts_with("gauss")) {
        const auto digits = text.substr(5);
        int s = 0;
        const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), s);
        if (ec == std::errc() && ptr == digits.data() + digits.size() && !digits.empty()) {
            if (s < 1 || s > kMaxGaussStages) {
                throw std::invalid_argument("method '" + std::string(text) + "': Gauss stage count must be in [1, " +
                                            std::to_string(kMaxGaussStages) + "]");
            }
            return gauss(s);
        }
    }
    throw std::invalid_argument("unknown method '" + std::string(text) + "' (expected cn or gaussN)");
}

std::string Method::name() const { return kind == Kind::cn ? "cn" : "gauss" + std::to_string(stages); }

SavState integrate(SavState state, const ModelSpec& model, const Method& method, double dt, double t_end,
                   std::span<const Observer> observers, const SolverConfig& config) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("integrate: dt must be > 0");
    if (!(t_end >= state.t)) throw std::invalid_argument("integrate: t_end is before the current time");

    const double t0 = state.t;
    const double span = t_end - t0;
    // Number of steps; a trailing remainder shorter than 1e-9 dt is absorbed.
    auto steps = static_cast<std::size_t>(std::floor(span / dt));
    if (span - static_cast<double>(steps) * dt > 1e-9 * dt) ++steps;

    StepReport initial;
    const double e0 = energy(state, model).modified;
    initial.energy_before = initial.energy_after = e0;
    for (const auto& obs : observers) obs.callback(StepEvent{0, state.t, state, initial});

    HsavStepper stepper(model, method.kind == Method::Kind::cn ? gauss_tableau(1) : gauss_tableau(method.stages),
                        config);
    std::optional<CnHistory> history;

    for (std::size_t n = 1; n <= steps; ++n) {
        const double t_next = n == steps ? t_end : t0 + static_cast<double>(n) * dt;
        const double h = t_next - state.t;
        StepResult r = [&] {
            try {
                if (method.kind == Method::Kind::cn && history) {
                    return stepper.frozen_step(state, cn_extrapolated_variation(state, *history, model, h), h);
                }
                if (method.kind == Method::Kind::cn) return cn_bootstrap(stepper, state, model, h);
                return stepper.step(state, h);
            } catch (const NumericalError& e) {
                std::ostringstream msg;
                msg << "step " << n << " at t = " << state.t << " (" << method.name() << ", dt = " << h
                    << "): " << e.what();
                throw StepFailure(msg.str(), n, state.t);
            }
        }();
        if (method.kind == Method::Kind::cn) history = CnHistory{state.phi, h};
        r.state.t = t_next;
        state = std::move(r.state);
        for (const auto& obs : observers) {
            if (n == steps || (obs.stride > 0 && n % obs.stride == 0)) {
                obs.callback(StepEvent{n, state.t, state, r.report});
            }
        }
    }
    return state;
}

}  // namespace hsav

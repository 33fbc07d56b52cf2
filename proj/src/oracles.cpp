#include "hkdvb/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hkdvb/errors.hpp"

namespace hkdvb {

SolutionKind solution_kind_from_string(const std::string& name) {
    if (name == "linear_mode") return SolutionKind::linear_mode;
    if (name == "kdv_soliton") return SolutionKind::kdv_soliton;
    if (name == "burgers_front") return SolutionKind::burgers_front;
    if (name == "kdvb_tanh") return SolutionKind::kdvb_tanh;
    throw std::invalid_argument("unknown solution kind: " + name);
}

std::string to_string(SolutionKind kind) {
    switch (kind) {
        case SolutionKind::linear_mode: return "linear_mode";
        case SolutionKind::kdv_soliton: return "kdv_soliton";
        case SolutionKind::burgers_front: return "burgers_front";
        case SolutionKind::kdvb_tanh: return "kdvb_tanh";
    }
    return "linear_mode";
}

ExactSolution ExactSolution::make(SolutionKind kind, const SolutionParams& params,
                                  const Coefficients& coeffs) {
    const auto reject = [&](const std::string& need) {
        throw std::invalid_argument("exact_solution(" + to_string(kind) +
                                    "): coefficient pattern mismatch, needs " + need);
    };
    switch (kind) {
        case SolutionKind::linear_mode:
            if (coeffs.A != 0.0) reject("A = 0");
            break;
        case SolutionKind::kdv_soliton:
            if (!(coeffs.A > 0.0) || !(coeffs.B > 0.0) || coeffs.C != 0.0 || coeffs.D != 0.0 ||
                coeffs.epsilon != 0.0) {
                reject("A > 0, B > 0, C = D = eps = 0");
            }
            if (!(params.c > 0.0)) reject("c > 0");
            break;
        case SolutionKind::burgers_front:
            if (!(coeffs.A > 0.0) || !(coeffs.C > 0.0) || coeffs.B != 0.0 || coeffs.D != 0.0 ||
                coeffs.epsilon != 0.0) {
                reject("A > 0, C > 0, B = D = eps = 0");
            }
            if (!(params.c > 0.0)) reject("c > 0");
            break;
        case SolutionKind::kdvb_tanh:
            if (!(coeffs.A > 0.0) || !(coeffs.B > 0.0) || !(coeffs.C > 0.0) || coeffs.D != 0.0 ||
                coeffs.epsilon != 0.0) {
                reject("A > 0, B > 0, C > 0, D = eps = 0");
            }
            break;
    }
    ExactSolution s;
    s.kind_ = kind;
    s.params_ = params;
    s.coeffs_ = coeffs;
    return s;
}

double ExactSolution::speed() const {
    switch (kind_) {
        case SolutionKind::linear_mode: return 0.0;
        case SolutionKind::kdv_soliton:
        case SolutionKind::burgers_front: return params_.c;
        case SolutionKind::kdvb_tanh:
            return 6.0 * coeffs_.C * coeffs_.C / (25.0 * coeffs_.B);
    }
    return 0.0;
}

double ExactSolution::operator()(double x, double t) const {
    const Coefficients& cf = coeffs_;
    switch (kind_) {
        case SolutionKind::linear_mode: {
            const double k = params_.wavenumber;
            const double mu = cf.epsilon * k * k * k * k + cf.C * k * k + cf.D;
            return params_.amplitude * std::exp(-mu * t) *
                   std::sin(k * x + cf.B * k * k * k * t + params_.phase);
        }
        case SolutionKind::kdv_soliton: {
            const double amp = 3.0 * params_.c / cf.A;
            const double beta = std::sqrt(params_.c / (4.0 * cf.B));
            const double s = 1.0 / std::cosh(beta * (x - params_.c * t - params_.x0));
            return amp * s * s;
        }
        case SolutionKind::burgers_front: {
            const double z = params_.c * (x - params_.c * t - params_.x0) / (2.0 * cf.C);
            return params_.c / cf.A * (1.0 - std::tanh(z));
        }
        case SolutionKind::kdvb_tanh: {
            const double kappa = cf.C / (10.0 * cf.B);
            const double v = speed();
            const double T = std::tanh(kappa * (x - v * t - params_.x0));
            const double s = 3.0 * cf.C * cf.C / (25.0 * cf.A * cf.B);
            return s * (4.0 - (1.0 + T) * (1.0 + T));
        }
    }
    return 0.0;
}

double ExactSolution::periodic(double x, double t, double L) const {
    const double y = x - speed() * t - params_.x0;
    const double wrapped = y - L * std::floor(y / L + 0.5);
    // Re-evaluate the profile at t = 0 with the wrapped offset.
    switch (kind_) {
        case SolutionKind::linear_mode:
            return (*this)(x, t);  // already periodic in x for basis wavenumbers
        default: {
            ExactSolution frozen = *this;
            frozen.params_.x0 = 0.0;
            return frozen(wrapped, 0.0);
        }
    }
}

double exact_solution(SolutionKind kind, const SolutionParams& params, double x, double t,
                      const Coefficients& coeffs) {
    return ExactSolution::make(kind, params, coeffs)(x, t);
}

std::vector<double> fornberg_weights(double x0, std::span<const double> x, int k) {
    const int n = static_cast<int>(x.size());
    std::vector<std::vector<double>> c(static_cast<size_t>(n),
                                       std::vector<double>(static_cast<size_t>(k) + 1, 0.0));
    c[0][0] = 1.0;
    double c1 = 1.0;
    double c4 = x[0] - x0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, k);
        double c2 = 1.0;
        double c5 = c4;
        c4 = x[static_cast<size_t>(i)] - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = x[static_cast<size_t>(i)] - x[static_cast<size_t>(j)];
            c2 *= c3;
            if (j == i - 1) {
                for (int s = mn; s >= 1; --s) {
                    c[static_cast<size_t>(i)][static_cast<size_t>(s)] =
                        c1 *
                        (s * c[static_cast<size_t>(i - 1)][static_cast<size_t>(s - 1)] -
                         c5 * c[static_cast<size_t>(i - 1)][static_cast<size_t>(s)]) /
                        c2;
                }
                c[static_cast<size_t>(i)][0] = -c1 * c5 * c[static_cast<size_t>(i - 1)][0] / c2;
            }
            for (int s = mn; s >= 1; --s) {
                c[static_cast<size_t>(j)][static_cast<size_t>(s)] =
                    (c4 * c[static_cast<size_t>(j)][static_cast<size_t>(s)] -
                     s * c[static_cast<size_t>(j)][static_cast<size_t>(s - 1)]) /
                    c3;
            }
            c[static_cast<size_t>(j)][0] = c4 * c[static_cast<size_t>(j)][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) w[static_cast<size_t>(j)] = c[static_cast<size_t>(j)][static_cast<size_t>(k)];
    return w;
}

double residual(const std::function<double(double, double)>& u, const Coefficients& coeffs,
                const ResidualGrid& grid) {
    constexpr int pad = 4;  // 9-point centered stencils
    const int nx = grid.nx;
    const int nt = grid.nt;
    if (nx < 1 || nt < 1) throw std::invalid_argument("residual: grid sizes must be positive");
    const double hx = (grid.x_hi - grid.x_lo) / (nx + 1);
    const double ht = (grid.t_hi - grid.t_lo) / (nt + 1);
    const int mx = nx + 2 * pad;
    const int mt = nt + 2 * pad;

    std::vector<double> values(static_cast<size_t>(mx) * static_cast<size_t>(mt));
    for (int it = 0; it < mt; ++it) {
        const double t = grid.t_lo + (it - pad + 1) * ht;
        for (int ix = 0; ix < mx; ++ix) {
            const double x = grid.x_lo + (ix - pad + 1) * hx;
            values[static_cast<size_t>(it) * mx + ix] = u(x, t);
        }
    }

    std::vector<double> stencil(2 * pad + 1);
    for (int i = 0; i <= 2 * pad; ++i) stencil[static_cast<size_t>(i)] = (i - pad);
    std::vector<double> wt = fornberg_weights(0.0, stencil, 1);
    std::vector<double> w1 = wt, w2 = fornberg_weights(0.0, stencil, 2);
    std::vector<double> w3 = fornberg_weights(0.0, stencil, 3);
    std::vector<double> w4 = fornberg_weights(0.0, stencil, 4);
    for (auto& v : wt) v /= ht;
    for (auto& v : w1) v /= hx;
    for (auto& v : w2) v /= hx * hx;
    for (auto& v : w3) v /= hx * hx * hx;
    for (auto& v : w4) v /= hx * hx * hx * hx;

    double acc = 0.0;
    for (int it = pad; it < mt - pad; ++it) {
        for (int ix = pad; ix < mx - pad; ++ix) {
            const double uc = values[static_cast<size_t>(it) * mx + ix];
            double ut = 0.0, ux = 0.0, u2x = 0.0, u3x = 0.0, u4x = 0.0;
            for (int s = -pad; s <= pad; ++s) {
                ut += wt[static_cast<size_t>(s + pad)] *
                      values[static_cast<size_t>(it + s) * mx + ix];
                const double vx = values[static_cast<size_t>(it) * mx + (ix + s)];
                ux += w1[static_cast<size_t>(s + pad)] * vx;
                u2x += w2[static_cast<size_t>(s + pad)] * vx;
                u3x += w3[static_cast<size_t>(s + pad)] * vx;
                u4x += w4[static_cast<size_t>(s + pad)] * vx;
            }
            const double r = ut + coeffs.A * uc * ux + coeffs.B * u3x - coeffs.C * u2x +
                             coeffs.D * uc + coeffs.epsilon * u4x;
            acc += r * r;
        }
    }
    return std::sqrt(acc * hx * ht);
}

double oracle_gate_tolerance(SolutionKind kind) {
    return kind == SolutionKind::linear_mode ? 1e-10 : 1e-6;
}

double gate_oracle(const ExactSolution& sol, const Domain& domain, double T) {
    ResidualGrid grid;
    grid.x_lo = domain.x1 + 0.05 * domain.length();
    grid.x_hi = domain.x2 - 0.05 * domain.length();
    grid.t_lo = 0.0;
    grid.t_hi = std::min(0.25, T);
    grid.nx = 384;
    grid.nt = 48;
    const double res = residual([&sol](double x, double t) { return sol(x, t); },
                                sol.coeffs(), grid);
    if (!(res < oracle_gate_tolerance(sol.kind()))) {
        throw ValidationError("oracle " + to_string(sol.kind()) +
                              " failed the residual gate: " + std::to_string(res));
    }
    return res;
}

ValidateReport validate_against_oracle(const SimConfig& config, SolutionKind kind,
                                       const SolutionParams& params, double tolerance) {
    SimConfig cfg = config;
    cfg.noise.kind = NoiseKind::off;
    cfg = validate_config(cfg);

    const ExactSolution sol = ExactSolution::make(kind, params, cfg.coeffs);
    ValidateReport rep;
    rep.kind = to_string(kind);
    rep.tolerance = tolerance;
    rep.oracle_residual = gate_oracle(sol, cfg.domain, cfg.T);

    const Basis basis(cfg.m, cfg.domain);
    const double L = cfg.domain.length();
    const bool front = kind == SolutionKind::burgers_front || kind == SolutionKind::kdvb_tanh;
    // Front profiles are not periodic; compare away from the seam.
    const double win_lo = front ? cfg.domain.x1 + 0.2 * L : cfg.domain.x1;
    const double win_hi = front ? cfg.domain.x2 - 0.2 * L : cfg.domain.x2;

    Field init;
    init.values.resize(static_cast<size_t>(basis.grid_size()));
    for (int i = 0; i < basis.grid_size(); ++i) {
        init.values[static_cast<size_t>(i)] = sol(basis.grid()[static_cast<size_t>(i)], 0.0);
    }
    const SpectralState u0 = to_spectral(init, basis);

    const NoiseOperator noise_op(cfg.noise, basis);
    const double e0 = l2_norm(u0);

    const auto compare = [&](const SpectralState& s, double t) {
        const Field f = to_physical(s, basis);
        double num = 0.0, den = 0.0;
        for (int i = 0; i < basis.grid_size(); ++i) {
            const double x = basis.grid()[static_cast<size_t>(i)];
            if (x < win_lo || x > win_hi) continue;
            const double ex = front ? sol(x, t) : sol.periodic(x, t, L);
            const double d = f.values[static_cast<size_t>(i)] - ex;
            num += d * d;
            den += ex * ex;
        }
        const double err = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
        rep.times.push_back(t);
        rep.rel_l2_errors.push_back(err);
        rep.max_rel_error = std::max(rep.max_rel_error, err);
    };

    compare(u0, 0.0);
    PathRunner stepper(cfg, basis, noise_op, 0);
    stepper.set_initial_state(u0);
    while (!stepper.done()) {
        stepper.advance();
        if (stepper.step_index() % cfg.save_stride == 0 || stepper.done()) {
            compare(stepper.state(), stepper.time());
        }
    }
    const double eT = l2_norm(stepper.state());
    rep.energy_drift_rel_per_time =
        std::abs(eT * eT - e0 * e0) / std::max(e0 * e0, 1e-300) / cfg.T;
    rep.passed = rep.max_rel_error <= tolerance;
    return rep;
}

StudyMode study_mode_from_string(const std::string& name) {
    if (name == "eps") return StudyMode::eps;
    if (name == "modes") return StudyMode::modes;
    if (name == "dt") return StudyMode::dt;
    throw std::invalid_argument("unknown study mode: " + name);
}

std::string to_string(StudyMode mode) {
    switch (mode) {
        case StudyMode::eps: return "eps";
        case StudyMode::modes: return "modes";
        case StudyMode::dt: return "dt";
    }
    return "eps";
}

namespace {

// L2(0,T;L2) distance between two saved trajectories on a shared time grid.
double path_distance(const std::vector<SpectralState>& a, const std::vector<SpectralState>& b,
                     double dt_saved) {
    const size_t n = std::min(a.size(), b.size());
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double d2 = 0.0;
        const size_t na = a[i].coeffs.size(), nb = b[i].coeffs.size();
        const size_t common = std::min(na, nb);
        for (size_t c = 0; c < common; ++c) {
            const double d = a[i].coeffs[c] - b[i].coeffs[c];
            d2 += d * d;
        }
        for (size_t c = common; c < na; ++c) d2 += a[i].coeffs[c] * a[i].coeffs[c];
        for (size_t c = common; c < nb; ++c) d2 += b[i].coeffs[c] * b[i].coeffs[c];
        const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
        acc += w * d2 * dt_saved;
    }
    return std::sqrt(acc);
}

}  // namespace

ConvergenceStudy convergence_study(const SimConfig& config, StudyMode mode,
                                   std::span<const double> levels) {
    if (levels.size() < 2) throw UsageError("converge: need at least two levels");
    ConvergenceStudy study;
    study.mode = mode;
    study.levels.assign(levels.begin(), levels.end());

    if (mode == StudyMode::dt) {
        for (size_t i = 1; i < levels.size(); ++i) {
            if (!(levels[i] < levels[i - 1])) {
                throw UsageError("converge: dt levels must be strictly decreasing");
            }
        }
        SimConfig base = config;
        base.noise.kind = NoiseKind::off;
        if (base.scheme == Scheme::auto_select) base.scheme = Scheme::em;
        std::vector<SpectralState> finals;
        const Basis basis(base.m, base.domain);
        for (double dt : levels) {
            SimConfig cfg = base;
            cfg.dt = dt;
            cfg = validate_config(cfg);
            const NoiseOperator op(cfg.noise, basis);
            PathRunner runner(cfg, basis, op, 0);
            try {
                while (!runner.done()) runner.advance();
            } catch (const BlowupError&) {
                ++study.blowups;
                break;
            }
            finals.push_back(runner.state());
        }
        for (size_t j = 0; j + 1 < finals.size(); ++j) {
            double d2 = 0.0;
            for (size_t c = 0; c < finals[j].coeffs.size(); ++c) {
                const double d = finals[j].coeffs[c] - finals[j + 1].coeffs[c];
                d2 += d * d;
            }
            study.mean_diffs.push_back(std::sqrt(d2));
            study.per_path_diffs.push_back({std::sqrt(d2)});
        }
        for (size_t j = 0; j + 1 < study.mean_diffs.size(); ++j) {
            const double r = study.mean_diffs[j] / study.mean_diffs[j + 1];
            const double h = levels[j] / levels[j + 1];
            study.orders.push_back(std::log(r) / std::log(h));
        }
        study.fraction_decreasing = 1.0;
        return study;
    }

    // eps and modes studies share the coupled-noise path loop.
    const bool eps_mode = mode == StudyMode::eps;
    for (size_t i = 1; i < levels.size(); ++i) {
        const bool ok = eps_mode ? levels[i] < levels[i - 1] : levels[i] > levels[i - 1];
        if (!ok) {
            throw UsageError(eps_mode ? "converge: eps levels must be strictly decreasing"
                                      : "converge: mode counts must be strictly increasing");
        }
    }

    std::vector<SimConfig> cfgs;
    std::vector<Basis> bases;
    int common_rank = 0;
    if (!eps_mode) {
        common_rank = 2 * static_cast<int>(levels[0]) + 1;
    }
    for (double level : levels) {
        SimConfig cfg = config;
        if (eps_mode) {
            cfg.coeffs.epsilon = level;
        } else {
            cfg.m = static_cast<int>(level);
            if (cfg.noise.kind != NoiseKind::off) cfg.noise.rank = common_rank;
        }
        cfg = validate_config(cfg);
        cfgs.push_back(cfg);
        bases.emplace_back(cfg.m, cfg.domain);
    }

    const long n_steps = std::max<long>(1, std::llround(config.T / config.dt));
    for (size_t l = 0; l < cfgs.size(); ++l) {
        IncrementStream s{cfgs[l].seed, 0, cfgs[l].dt, static_cast<int>(n_steps),
                          cfgs[l].noise.kind == NoiseKind::off ? 1 : cfgs[l].noise_rank};
        study.checksums.push_back(increment_checksum(s));
    }
    for (size_t l = 1; l < study.checksums.size(); ++l) {
        if (study.checksums[l] != study.checksums[0]) study.checksums_equal = false;
    }

    const int n_paths = config.n_paths;
    const size_t n_pairs = levels.size() - 1;
    study.per_path_diffs.assign(n_pairs, std::vector<double>(static_cast<size_t>(n_paths), 0.0));
    std::vector<char> path_ok(static_cast<size_t>(n_paths), 1);

    parallel_paths(n_paths, resolve_threads(config), [&](int path) {
        std::vector<std::vector<SpectralState>> saved(cfgs.size());
        for (size_t l = 0; l < cfgs.size(); ++l) {
            const NoiseOperator op(cfgs[l].noise, bases[l]);
            PathRunner runner(cfgs[l], bases[l], op, static_cast<std::uint64_t>(path));
            saved[l].push_back(runner.state());
            try {
                while (!runner.done()) {
                    runner.advance();
                    if (runner.step_index() % cfgs[l].save_stride == 0 || runner.done()) {
                        saved[l].push_back(runner.state());
                    }
                }
            } catch (const BlowupError&) {
                path_ok[static_cast<size_t>(path)] = 0;
                return;
            }
        }
        const double dt_saved = config.dt * config.save_stride;
        for (size_t j = 0; j + 1 < cfgs.size(); ++j) {
            study.per_path_diffs[j][static_cast<size_t>(path)] =
                path_distance(saved[j], saved[j + 1], dt_saved);
        }
    });

    int ok_paths = 0, decreasing = 0;
    for (int p = 0; p < n_paths; ++p) {
        if (!path_ok[static_cast<size_t>(p)]) {
            ++study.blowups;
            continue;
        }
        ++ok_paths;
        bool dec = true;
        for (size_t j = 0; j + 1 < n_pairs; ++j) {
            if (!(study.per_path_diffs[j][static_cast<size_t>(p)] >
                  study.per_path_diffs[j + 1][static_cast<size_t>(p)])) {
                dec = false;
            }
        }
        if (dec) ++decreasing;
    }
    study.fraction_decreasing = ok_paths > 0 ? static_cast<double>(decreasing) / ok_paths : 0.0;
    for (size_t j = 0; j < n_pairs; ++j) {
        std::vector<double> vals;
        for (int p = 0; p < n_paths; ++p) {
            if (path_ok[static_cast<size_t>(p)]) {
                vals.push_back(study.per_path_diffs[j][static_cast<size_t>(p)]);
            }
        }
        study.mean_diffs.push_back(vals.empty() ? 0.0
                                                : pairwise_sum(vals) / static_cast<double>(vals.size()));
    }
    return study;
}

}  // namespace hkdvb

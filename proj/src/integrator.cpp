#include "hkdvb/integrator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "hkdvb/errors.hpp"

namespace hkdvb {

namespace {

constexpr double kBlowupNorm = 1e10;

// phi_k(z) = (e^z - sum_{j<k} z^j/j!) / z^k, evaluated stably.
void phi123(std::complex<double> z, std::complex<double>& p1, std::complex<double>& p2,
            std::complex<double>& p3) {
    if (std::abs(z) <= 1.0) {
        // phi_3 by series, then down the recurrence phi_k = z phi_{k+1} + 1/k!.
        std::complex<double> acc(0.0, 0.0);
        std::complex<double> term(1.0, 0.0);
        double fact = 6.0;  // 3!
        for (int n = 0; n < 24; ++n) {
            acc += term / fact;
            term *= z;
            fact *= static_cast<double>(n + 4);
        }
        p3 = acc;
        p2 = z * p3 + 1.0 / 2.0;
        p1 = z * p2 + 1.0;
        return;
    }
    const std::complex<double> ez = std::exp(z);
    p1 = (ez - 1.0) / z;
    p2 = (ez - 1.0 - z) / (z * z);
    p3 = (ez - 1.0 - z - 0.5 * z * z) / (z * z * z);
}

std::complex<double> mode_symbol(double k, const Coefficients& c) {
    const double k2 = k * k;
    return std::complex<double>(-(c.epsilon * k2 * k2 + c.C * k2 + c.D), -c.B * k2 * k);
}

inline std::complex<double> pair_at(const SpectralState& s, int j) {
    if (j == 0) return {s.coeffs[0], 0.0};
    return {s.coeffs[static_cast<size_t>(2 * j - 1)], s.coeffs[static_cast<size_t>(2 * j)]};
}

inline void set_pair(SpectralState& s, int j, std::complex<double> v) {
    if (j == 0) {
        s.coeffs[0] = v.real();
        return;
    }
    s.coeffs[static_cast<size_t>(2 * j - 1)] = v.real();
    s.coeffs[static_cast<size_t>(2 * j)] = v.imag();
}

}  // namespace

SpectralState nonlinear_term(const SpectralState& u, const SimConfig& config,
                             const Basis& basis, double* theta_out) {
    SpectralState out;
    out.time = u.time;
    out.coeffs.assign(u.coeffs.size(), 0.0);
    if (config.coeffs.A == 0.0) {
        if (theta_out) *theta_out = 1.0;
        return out;
    }
    const SpectralState ux = spectral_derivative(u, 1, basis);
    double grad2 = 0.0;
    for (double v : ux.coeffs) grad2 += v * v;
    const double theta = theta_cutoff(grad2 / static_cast<double>(config.m));
    if (theta_out) *theta_out = theta;
    if (theta == 0.0) return out;
    out = dealiased_product(u, ux, basis);
    const double f = -config.coeffs.A * theta;
    for (double& v : out.coeffs) v *= f;
    out.time = u.time;
    return out;
}

SpectralState effective_drift(const SpectralState& u, const SimConfig& config,
                              const Basis& basis) {
    SpectralState out = nonlinear_term(u, config, basis);
    for (int j = 0; j <= basis.truncation(); ++j) {
        const std::complex<double> lam = mode_symbol(basis.wavenumber(j), config.coeffs);
        set_pair(out, j, pair_at(out, j) + pair_at(u, j) * lam);
    }
    out.time = u.time;
    return out;
}

SpectralState step(const SpectralState& state, double dt, std::span<const double> dW,
                   const SimConfig& config, const Basis& basis, const NoiseOperator& noise_op) {
    if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be > 0");
    SpectralState v = nonlinear_term(state, config, basis);
    for (size_t i = 0; i < v.coeffs.size(); ++i) {
        v.coeffs[i] = state.coeffs[i] + dt * v.coeffs[i];
    }
    if (noise_op.kind() != NoiseKind::off) {
        const SpectralState dn = noise_op.apply(state, dW, basis);
        for (size_t i = 0; i < v.coeffs.size(); ++i) v.coeffs[i] += dn.coeffs[i];
    }
    SpectralState out;
    out.coeffs.assign(v.coeffs.size(), 0.0);
    out.time = state.time + dt;
    for (int j = 0; j <= basis.truncation(); ++j) {
        const std::complex<double> e = std::exp(mode_symbol(basis.wavenumber(j), config.coeffs) * dt);
        set_pair(out, j, pair_at(v, j) * e);
    }
    const double norm = l2_norm(out);
    if (!std::isfinite(norm) || norm > kBlowupNorm) {
        throw BlowupError(out.time, norm, "step: state norm " + std::to_string(norm) +
                                              " at t = " + std::to_string(out.time));
    }
    return out;
}

PathRunner::PathRunner(const SimConfig& config, const Basis& basis,
                       const NoiseOperator& noise_op, std::uint64_t path_index)
    : config_(&config),
      basis_(&basis),
      noise_op_(&noise_op),
      stream_(config.seed, path_index),
      sqrt_dt_(std::sqrt(config.dt)) {
    n_steps_ = std::max<long>(1, std::llround(config.T / config.dt));
    scheme_ = config.scheme;
    if (scheme_ == Scheme::auto_select) {
        scheme_ = noise_op.kind() == NoiseKind::off ? Scheme::etdrk4 : Scheme::em;
    }
    if (scheme_ == Scheme::etdrk4 && noise_op.kind() != NoiseKind::off) {
        throw ValidationError("scheme: etdrk4 is deterministic only; noise requires em");
    }
    state_ = initial_state(config, basis);
    const int mp = basis.truncation() + 1;
    exp_full_.resize(static_cast<size_t>(mp));
    const double dt = config.dt;
    for (int j = 0; j < mp; ++j) {
        const std::complex<double> z = mode_symbol(basis.wavenumber(j), config.coeffs) * dt;
        exp_full_[static_cast<size_t>(j)] = std::exp(z);
    }
    if (scheme_ == Scheme::etdrk4) {
        exp_half_.resize(static_cast<size_t>(mp));
        q_.resize(static_cast<size_t>(mp));
        f1_.resize(static_cast<size_t>(mp));
        f2_.resize(static_cast<size_t>(mp));
        f3_.resize(static_cast<size_t>(mp));
        for (int j = 0; j < mp; ++j) {
            const std::complex<double> z =
                mode_symbol(basis.wavenumber(j), config.coeffs) * dt;
            exp_half_[static_cast<size_t>(j)] = std::exp(0.5 * z);
            std::complex<double> p1h, p2h, p3h;
            phi123(0.5 * z, p1h, p2h, p3h);
            q_[static_cast<size_t>(j)] = 0.5 * dt * p1h;
            std::complex<double> p1, p2, p3;
            phi123(z, p1, p2, p3);
            f1_[static_cast<size_t>(j)] = dt * (p1 - 3.0 * p2 + 4.0 * p3);
            f2_[static_cast<size_t>(j)] = dt * (p2 - 2.0 * p3);
            f3_[static_cast<size_t>(j)] = dt * (4.0 * p3 - p2);
        }
    }
    if (noise_op.kind() != NoiseKind::off) {
        dw_.resize(static_cast<size_t>(noise_op.rank()));
    }
}

void PathRunner::set_initial_state(SpectralState s) {
    if (step_index_ != 0) {
        throw std::logic_error("set_initial_state: path already advanced");
    }
    if (s.coeffs.size() != state_.coeffs.size()) {
        throw std::invalid_argument("set_initial_state: dimension mismatch");
    }
    state_ = std::move(s);
    state_.time = 0.0;
}

void PathRunner::check_finite() {
    const double norm = l2_norm(state_);
    if (!std::isfinite(norm) || norm > kBlowupNorm) {
        throw BlowupError(time(), norm, "path: state norm " + std::to_string(norm) +
                                            " at t = " + std::to_string(time()));
    }
}

const std::vector<double>& PathRunner::advance() {
    const SimConfig& cfg = *config_;
    const Basis& basis = *basis_;
    const int mp = basis.truncation() + 1;

    if (noise_op_->kind() != NoiseKind::off) {
        for (double& v : dw_) v = sqrt_dt_ * stream_.next();
    }

    double theta = 1.0;
    if (scheme_ == Scheme::em) {
        SpectralState v = nonlinear_term(state_, cfg, basis, &theta);
        for (size_t i = 0; i < v.coeffs.size(); ++i) {
            v.coeffs[i] = state_.coeffs[i] + cfg.dt * v.coeffs[i];
        }
        if (noise_op_->kind() != NoiseKind::off) {
            const SpectralState dn = noise_op_->apply(state_, dw_, basis);
            for (size_t i = 0; i < v.coeffs.size(); ++i) v.coeffs[i] += dn.coeffs[i];
        }
        for (int j = 0; j < mp; ++j) {
            set_pair(state_, j, pair_at(v, j) * exp_full_[static_cast<size_t>(j)]);
        }
    } else {
        // ETDRK4 stages on the per-mode complex pairs.
        const SpectralState& u = state_;
        const SpectralState nu = nonlinear_term(u, cfg, basis, &theta);
        SpectralState a = u, b = u, c = u;
        for (int j = 0; j < mp; ++j) {
            set_pair(a, j, pair_at(u, j) * exp_half_[static_cast<size_t>(j)] +
                               pair_at(nu, j) * q_[static_cast<size_t>(j)]);
        }
        double th = 1.0;
        const SpectralState na = nonlinear_term(a, cfg, basis, &th);
        theta = std::min(theta, th);
        for (int j = 0; j < mp; ++j) {
            set_pair(b, j, pair_at(u, j) * exp_half_[static_cast<size_t>(j)] +
                               pair_at(na, j) * q_[static_cast<size_t>(j)]);
        }
        const SpectralState nb = nonlinear_term(b, cfg, basis, &th);
        theta = std::min(theta, th);
        for (int j = 0; j < mp; ++j) {
            set_pair(c, j, pair_at(a, j) * exp_half_[static_cast<size_t>(j)] +
                               (2.0 * pair_at(nb, j) - pair_at(nu, j)) *
                                   q_[static_cast<size_t>(j)]);
        }
        const SpectralState nc = nonlinear_term(c, cfg, basis, &th);
        theta = std::min(theta, th);
        for (int j = 0; j < mp; ++j) {
            const std::complex<double> v =
                pair_at(u, j) * exp_full_[static_cast<size_t>(j)] +
                pair_at(nu, j) * f1_[static_cast<size_t>(j)] +
                (pair_at(na, j) + pair_at(nb, j)) * 2.0 * f2_[static_cast<size_t>(j)] +
                pair_at(nc, j) * f3_[static_cast<size_t>(j)];
            set_pair(state_, j, v);
        }
    }
    if (theta < 1.0) ++cutoff_activations_;
    ++step_index_;
    state_.time = time();
    check_finite();
    return dw_;
}

namespace {

void record_point(Trajectory& traj, const SpectralState& state, const Basis& basis,
                  double lambda_x) {
    traj.times.push_back(state.time);
    traj.states.push_back(state);
    const Field f = to_physical(state, basis);
    const double mx = max_abs(f);
    traj.max_abs_values.push_back(mx);
    traj.lambda_flags.push_back(mx >= lambda_x ? 1 : 0);
}

}  // namespace

Trajectory simulate_path(const SimConfig& config, const Basis& basis,
                         std::uint64_t path_index, const PathOptions& options) {
    const NoiseOperator noise_op(config.noise, basis);
    PathRunner runner(config, basis, noise_op, path_index);
    Trajectory traj;
    traj.path_index = path_index;
    traj.scheme = to_string(runner.scheme());
    record_point(traj, runner.state(), basis, config.lambda_x);
    try {
        while (!runner.done()) {
            const std::vector<double>& dw = runner.advance();
            if (options.record_noise) traj.noise_record.push_back(dw);
            if (runner.step_index() % options.save_stride == 0 || runner.done()) {
                record_point(traj, runner.state(), basis, config.lambda_x);
            }
        }
    } catch (const BlowupError& e) {
        traj.blew_up = true;
        traj.blowup_time = e.time;
        traj.blowup_norm = e.norm;
    }
    traj.cutoff_activations = runner.cutoff_activations();
    return traj;
}

Trajectory simulate_path(const SimConfig& config, std::uint64_t path_index,
                         const PathOptions& options) {
    const Basis basis(config.m, config.domain);
    return simulate_path(config, basis, path_index, options);
}

double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 4) {
        double acc = 0.0;
        for (double v : values) acc += v;
        return acc;
    }
    const size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

FunctionalStats summarize(const std::string& name, std::vector<double> samples) {
    FunctionalStats out;
    out.name = name;
    const size_t n = samples.size();
    if (n == 0) {
        out.samples = std::move(samples);
        return out;
    }
    out.mean = pairwise_sum(samples) / static_cast<double>(n);
    if (n >= 2) {
        std::vector<double> sq(n);
        for (size_t i = 0; i < n; ++i) {
            const double d = samples[i] - out.mean;
            sq[i] = d * d;
        }
        out.variance = pairwise_sum(sq) / static_cast<double>(n - 1);
        out.ci_half = 1.96 * std::sqrt(out.variance / static_cast<double>(n));
    }
    out.samples = std::move(samples);
    return out;
}

int resolve_threads(const SimConfig& config) {
    if (config.threads > 0) return config.threads;
    if (const char* env = std::getenv("HKDVB_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_paths(int n, int threads, const std::function<void(int)>& fn) {
    const int k = std::max(1, std::min(threads, n));
    if (k == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(k));
    std::vector<std::exception_ptr> errors(static_cast<size_t>(k));
    for (int w = 0; w < k; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                errors[static_cast<size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

const FunctionalStats& EnsembleStats::functional(const std::string& name) const {
    for (const auto& f : functionals) {
        if (f.name == name) return f;
    }
    throw std::out_of_range("ensemble: no functional named " + name);
}

EnsembleStats run_ensemble(const SimConfig& config, const Basis& basis,
                           const EnsembleOptions& options) {
    const int n = config.n_paths;
    const IntervalNorms local(basis, config.k_effective);
    const NoiseOperator noise_op(config.noise, basis);

    struct PathResult {
        double sup_l2_sq = 0.0;
        double int_h2_sq = 0.0;
        double int_h1_local_sq = 0.0;
        double terminal = 0.0;
        bool blew_up = false;
        long lambda_hits = 0;
        long cutoff_activations = 0;
    };
    std::vector<PathResult> results(static_cast<size_t>(n));

    const auto run_one = [&](int index) {
        PathResult& r = results[static_cast<size_t>(index)];
        PathRunner runner(config, basis, noise_op, static_cast<std::uint64_t>(index));
        double l2sq = 0.0, h2sq = 0.0, h1sq = 0.0;
        const auto measure = [&](const SpectralState& s) {
            const double l2 = l2_norm(s);
            l2sq = l2 * l2;
            const double h2 = sobolev_norm(s, 2.0, basis);
            h2sq = h2 * h2;
            const double h1 = local.h1(s);
            h1sq = h1 * h1;
            const Field f = to_physical(s, basis);
            if (max_abs(f) >= config.lambda_x) ++r.lambda_hits;
        };
        try {
            measure(runner.state());
            r.sup_l2_sq = l2sq;
            while (!runner.done()) {
                const double prev_h2 = h2sq, prev_h1 = h1sq;
                runner.advance();
                measure(runner.state());
                r.sup_l2_sq = std::max(r.sup_l2_sq, l2sq);
                r.int_h2_sq += 0.5 * config.dt * (prev_h2 + h2sq);
                r.int_h1_local_sq += 0.5 * config.dt * (prev_h1 + h1sq);
            }
            if (options.terminal_functional) {
                r.terminal = options.terminal_functional(runner.state());
            }
            r.cutoff_activations = runner.cutoff_activations();
        } catch (const BlowupError&) {
            r.blew_up = true;
        }
    };

    parallel_paths(n, resolve_threads(config), run_one);

    EnsembleStats stats;
    stats.n_paths = n;
    std::vector<double> sup, h2, h1, term;
    for (const PathResult& r : results) {
        if (r.blew_up) {
            ++stats.n_blowups;
            continue;
        }
        sup.push_back(r.sup_l2_sq);
        h2.push_back(r.int_h2_sq);
        h1.push_back(r.int_h1_local_sq);
        if (options.terminal_functional) term.push_back(r.terminal);
        stats.lambda_violations += r.lambda_hits;
        stats.cutoff_activations += r.cutoff_activations;
    }
    if (2 * stats.n_blowups > n) {
        throw BlowupError(config.T, 0.0,
                          "ensemble: " + std::to_string(stats.n_blowups) + " of " +
                              std::to_string(n) + " paths blew up");
    }
    stats.functionals.push_back(summarize("sup_l2_sq", std::move(sup)));
    stats.functionals.push_back(summarize("int_h2_sq", std::move(h2)));
    stats.functionals.push_back(summarize("int_h1_local_sq", std::move(h1)));
    if (options.terminal_functional) {
        stats.functionals.push_back(summarize(options.terminal_name, std::move(term)));
    }
    return stats;
}

EnsembleStats run_ensemble(const SimConfig& config, const EnsembleOptions& options) {
    const Basis basis(config.m, config.domain);
    return run_ensemble(config, basis, options);
}

}  // namespace hkdvb

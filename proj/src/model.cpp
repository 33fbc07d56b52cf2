#include "hkdvb/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hkdvb/errors.hpp"

namespace hkdvb {

PresetName preset_from_string(const std::string& name) {
    if (name == "kdv") return PresetName::kdv;
    if (name == "damped_kdv") return PresetName::damped_kdv;
    if (name == "burgers") return PresetName::burgers;
    if (name == "kdv_burgers") return PresetName::kdv_burgers;
    if (name == "damped_burgers") return PresetName::damped_burgers;
    if (name == "full") return PresetName::full;
    throw std::invalid_argument("unknown preset: " + name);
}

std::string to_string(PresetName name) {
    switch (name) {
        case PresetName::kdv: return "kdv";
        case PresetName::damped_kdv: return "damped_kdv";
        case PresetName::burgers: return "burgers";
        case PresetName::kdv_burgers: return "kdv_burgers";
        case PresetName::damped_burgers: return "damped_burgers";
        case PresetName::full: return "full";
    }
    return "full";
}

Coefficients preset(PresetName name) {
    Coefficients c{1.0, 1.0, 1.0, 1.0, 0.0};
    switch (name) {
        case PresetName::kdv: c.C = 0.0; c.D = 0.0; break;
        case PresetName::damped_kdv: c.C = 0.0; break;
        case PresetName::burgers: c.B = 0.0; c.D = 0.0; break;
        case PresetName::kdv_burgers: c.D = 0.0; break;
        case PresetName::damped_burgers: c.B = 0.0; break;
        case PresetName::full: break;
    }
    return c;
}

Coefficients preset(const std::string& name) { return preset(preset_from_string(name)); }

InitKind init_kind_from_string(const std::string& name) {
    if (name == "soliton") return InitKind::soliton;
    if (name == "gaussian") return InitKind::gaussian;
    if (name == "mode") return InitKind::mode;
    if (name == "colored") return InitKind::colored;
    if (name.rfind("file", 0) == 0) return InitKind::file;
    throw std::invalid_argument("unknown initial data kind: " + name);
}

std::string to_string(InitKind kind) {
    switch (kind) {
        case InitKind::soliton: return "soliton";
        case InitKind::gaussian: return "gaussian";
        case InitKind::mode: return "mode";
        case InitKind::colored: return "colored";
        case InitKind::file: return "file";
    }
    return "gaussian";
}

Scheme scheme_from_string(const std::string& name) {
    if (name == "auto") return Scheme::auto_select;
    if (name == "em") return Scheme::em;
    if (name == "etdrk4") return Scheme::etdrk4;
    throw std::invalid_argument("unknown scheme: " + name);
}

std::string to_string(Scheme scheme) {
    switch (scheme) {
        case Scheme::auto_select: return "auto";
        case Scheme::em: return "em";
        case Scheme::etdrk4: return "etdrk4";
    }
    return "auto";
}

namespace {

std::string num(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

SimConfig validate_config(SimConfig config) {
    config.warnings.clear();
    validate_domain(config.domain);
    const Coefficients& c = config.coeffs;

    if (c.B < 0.0) throw ValidationError("coefficients: B >= 0 fails (B = " + num(c.B) + ")");
    if (c.C < 0.0) throw ValidationError("coefficients: C >= 0 fails (C = " + num(c.C) + ")");
    if (c.D < 0.0) throw ValidationError("coefficients: D >= 0 fails (D = " + num(c.D) + ")");
    if (c.epsilon < 0.0) {
        throw ValidationError("coefficients: epsilon >= 0 fails (epsilon = " + num(c.epsilon) + ")");
    }
    if (3.0 * c.B < c.A + 1.0) {
        const std::string msg = "coefficient condition 3B >= A + 1 fails (3*" + num(c.B) +
                                " = " + num(3.0 * c.B) + " < " + num(c.A + 1.0) + " = A + 1)";
        if (config.enforce_ccond) throw ValidationError(msg);
        config.warnings.push_back(msg);
    }

    if (config.m < 1) throw ValidationError("discretization: m >= 1 fails");
    if (!(config.dt > 0.0)) throw ValidationError("discretization: dt > 0 fails");
    if (!(config.T >= config.dt)) throw ValidationError("discretization: T >= dt fails");
    if (config.save_stride < 1) throw ValidationError("discretization: save_stride >= 1 fails");
    if (!(config.lambda_x > 0.0)) {
        throw ValidationError("run: lambda_x > 0 fails (lambda_x = " + num(config.lambda_x) + ")");
    }
    if (config.n_paths < 1) throw ValidationError("run: n_paths >= 1 fails");

    config.grid_size = 4 * config.m + 4;

    const int dim = 2 * config.m + 1;
    if (config.noise.kind != NoiseKind::off) {
        if (!(config.noise.kappa1 > 0.0)) {
            throw ValidationError("noise: kappa1 > 0 fails");
        }
        if (config.noise.kappa2 < 0.0) throw ValidationError("noise: kappa2 >= 0 fails");
        if (!(config.noise.decay_p > 0.5)) {
            throw ValidationError("noise: decay_p > 1/2 fails (decay_p = " +
                                  num(config.noise.decay_p) + ")");
        }
        if (config.noise.rank > dim) {
            throw ValidationError("noise: rank <= basis dimension fails (rank = " +
                                  std::to_string(config.noise.rank) + ", dim = " +
                                  std::to_string(dim) + ")");
        }
    }
    config.noise_rank = config.noise.rank > 0 ? config.noise.rank : dim;

    const double k_max = std::min(-config.domain.x1, config.domain.x2);
    config.k_effective = config.k_interval > 0.0 ? config.k_interval : 0.5 * k_max;
    if (config.k_effective > k_max) {
        throw ValidationError("run: k_interval <= min(-x1, x2) fails (k = " +
                              num(config.k_effective) + ", bound = " + num(k_max) + ")");
    }
    return config;
}

double theta_cutoff(double xi) {
    if (xi < 0.0) throw std::invalid_argument("theta_cutoff: xi must be >= 0");
    if (xi <= 1.0) return 1.0;
    if (xi >= 2.0) return 0.0;
    const auto psi = [](double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; };
    const double up = psi(2.0 - xi);
    const double down = psi(xi - 1.0);
    return up / (up + down);
}

CutoffArguments cutoffs_from_norms(const SpectralState& state, int m, const Basis& basis) {
    double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
    for (int j = 1; j <= basis.truncation(); ++j) {
        const double k2 = basis.wavenumber(j) * basis.wavenumber(j);
        const double a = state.coeffs[static_cast<size_t>(2 * j - 1)];
        const double b = state.coeffs[static_cast<size_t>(2 * j)];
        const double e = a * a + b * b;
        s1 += k2 * e;
        s2 += k2 * k2 * e;
        s3 += k2 * k2 * k2 * e;
        s4 += k2 * k2 * k2 * k2 * e;
    }
    const double md = static_cast<double>(m);
    return CutoffArguments{s1 / md, s2 / md, s3 / md, s4 / md};
}

CutoffArguments cutoff_arguments(const SpectralState& state, const SimConfig& config,
                                 const Basis& basis) {
    return cutoffs_from_norms(state, config.m, basis);
}

namespace {

SpectralState drift_impl(const SpectralState& state, const SimConfig& config,
                         const Basis& basis, bool with_cutoffs) {
    const int dim = basis.dim();
    if (static_cast<int>(state.coeffs.size()) != dim) {
        throw std::invalid_argument("drift: state dimension does not match basis");
    }
    const Coefficients& c = config.coeffs;

    double t1 = 1.0, t2 = 1.0, t3 = 1.0, t4 = 1.0;
    if (with_cutoffs) {
        const CutoffArguments xi = cutoffs_from_norms(state, config.m, basis);
        t1 = theta_cutoff(xi.xi1);
        t2 = theta_cutoff(xi.xi2);
        t3 = theta_cutoff(xi.xi3);
        t4 = theta_cutoff(xi.xi4);
    }

    SpectralState out;
    out.time = state.time;
    out.coeffs.assign(static_cast<size_t>(dim), 0.0);

    // Linear terms are diagonal per mode pair.
    for (int j = 0; j <= basis.truncation(); ++j) {
        const double k = basis.wavenumber(j);
        const double k2 = k * k;
        const double damp = c.epsilon * t4 * k2 * k2 + c.C * t2 * k2 + c.D;
        const double rot = c.B * t3 * k2 * k;  // u_3x contributes -B k^3 rotation
        if (j == 0) {
            out.coeffs[0] = -c.D * state.coeffs[0];
            continue;
        }
        const double a = state.coeffs[static_cast<size_t>(2 * j - 1)];
        const double b = state.coeffs[static_cast<size_t>(2 * j)];
        // d/dt (a + ib) = (-damp - i rot)(a + ib)
        out.coeffs[static_cast<size_t>(2 * j - 1)] = -damp * a + rot * b;
        out.coeffs[static_cast<size_t>(2 * j)] = -damp * b - rot * a;
    }

    if (c.A != 0.0) {
        const SpectralState ux = spectral_derivative(state, 1, basis);
        const SpectralState uux = dealiased_product(state, ux, basis);
        const double f = c.A * t1;
        for (int i = 0; i < dim; ++i) {
            out.coeffs[static_cast<size_t>(i)] -= f * uux.coeffs[static_cast<size_t>(i)];
        }
    }
    return out;
}

}  // namespace

SpectralState galerkin_drift(const SpectralState& state, const SimConfig& config,
                             const Basis& basis) {
    return drift_impl(state, config, basis, true);
}

SpectralState deterministic_rhs(const SpectralState& state, const SimConfig& config,
                                const Basis& basis) {
    return drift_impl(state, config, basis, false);
}

SpectralState initial_state(const SimConfig& config, const Basis& basis) {
    const InitialData& init = config.init;
    SpectralState out;
    out.coeffs.assign(static_cast<size_t>(basis.dim()), 0.0);
    out.time = 0.0;

    switch (init.kind) {
        case InitKind::mode: {
            if (init.mode < 1 || init.mode > basis.truncation()) {
                throw ValidationError("initial data: mode index outside 1..m");
            }
            // amplitude * sin(k y + phase) expressed in the orthonormal basis
            const double s = std::sqrt(basis.domain().length() / 2.0);
            out.coeffs[static_cast<size_t>(2 * init.mode - 1)] =
                init.amplitude * std::sin(init.phase) * s;
            out.coeffs[static_cast<size_t>(2 * init.mode)] =
                init.amplitude * std::cos(init.phase) * s;
            return out;
        }
        case InitKind::colored: {
            // Deterministic rough profile: slot i gets (i+1)^{-width} with
            // alternating sign, normalized to |u|_{L2} = amplitude.
            const int dim = basis.dim();
            double norm2 = 0.0;
            for (int i = 0; i < dim; ++i) {
                const double v = std::pow(static_cast<double>(i + 1), -init.width) *
                                 ((i % 2 == 0) ? 1.0 : -1.0);
                out.coeffs[static_cast<size_t>(i)] = v;
                norm2 += v * v;
            }
            const double scale = init.amplitude / std::sqrt(norm2);
            for (double& v : out.coeffs) v *= scale;
            return out;
        }
        case InitKind::file: {
            std::ifstream in(init.path);
            if (!in) throw UsageError("initial data: cannot open file " + init.path);
            std::vector<double> values;
            double v;
            while (in >> v) values.push_back(v);
            if (static_cast<int>(values.size()) != basis.grid_size()) {
                throw UsageError("initial data: file " + init.path + " has " +
                                 std::to_string(values.size()) + " values, expected " +
                                 std::to_string(basis.grid_size()));
            }
            Field f;
            f.values = std::move(values);
            return to_spectral(f, basis);
        }
        case InitKind::soliton: {
            const Coefficients& c = config.coeffs;
            if (!(c.A > 0.0) || !(c.B > 0.0)) {
                throw ValidationError("initial data: soliton requires A > 0 and B > 0");
            }
            const double amp = 3.0 * init.speed / c.A;
            const double beta = std::sqrt(init.speed / (4.0 * c.B));
            Field f;
            f.values.resize(static_cast<size_t>(basis.grid_size()));
            for (int i = 0; i < basis.grid_size(); ++i) {
                const double arg = beta * (basis.grid()[static_cast<size_t>(i)] - init.center);
                const double s = 1.0 / std::cosh(arg);
                f.values[static_cast<size_t>(i)] = amp * s * s;
            }
            return to_spectral(f, basis);
        }
        case InitKind::gaussian:
        default: {
            Field f;
            f.values.resize(static_cast<size_t>(basis.grid_size()));
            for (int i = 0; i < basis.grid_size(); ++i) {
                const double x = basis.grid()[static_cast<size_t>(i)] - init.center;
                f.values[static_cast<size_t>(i)] =
                    init.amplitude * std::exp(-x * x / (2.0 * init.width * init.width));
            }
            return to_spectral(f, basis);
        }
    }
}

}  // namespace hkdvb

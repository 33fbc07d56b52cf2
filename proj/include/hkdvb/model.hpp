#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hkdvb/noise.hpp"
#include "hkdvb/spectral.hpp"

namespace hkdvb {

// Equation coefficients: u_t + A u u_x + B u_3x = C u_2x - D u, plus the
// fourth-order regularization strength epsilon.
struct Coefficients {
    double A = 1.0;
    double B = 1.0;
    double C = 1.0;
    double D = 1.0;
    double epsilon = 0.0;
};

enum class PresetName { kdv, damped_kdv, burgers, kdv_burgers, damped_burgers, full };

PresetName preset_from_string(const std::string& name);
std::string to_string(PresetName name);

// Zero patterns of the named special cases; nonzero entries default to 1.
Coefficients preset(PresetName name);
Coefficients preset(const std::string& name);

enum class InitKind { soliton, gaussian, mode, colored, file };

struct InitialData {
    InitKind kind = InitKind::gaussian;
    double amplitude = 1.0;
    double width = 1.0;
    double center = 0.0;
    int mode = 1;          // mode pair index for kind = mode
    double speed = 4.0;    // soliton speed c
    double phase = 0.0;    // phase offset for kind = mode
    std::string path;      // grid values for kind = file
};

InitKind init_kind_from_string(const std::string& name);
std::string to_string(InitKind kind);

enum class Scheme { auto_select, em, etdrk4 };

Scheme scheme_from_string(const std::string& name);
std::string to_string(Scheme scheme);

struct SimConfig {
    Coefficients coeffs;
    Domain domain;
    int m = 64;
    double dt = 1e-3;
    double T = 1.0;
    int save_stride = 1;
    NoiseSpec noise;
    double lambda_x = 10.0;
    std::uint64_t seed = 12345;
    int n_paths = 1;
    bool enforce_ccond = true;
    InitialData init;
    double k_interval = 0.0;  // 0 means 0.5 * min(-x1, x2)
    Scheme scheme = Scheme::auto_select;
    int threads = 0;          // 0 means HKDVB_THREADS or hardware count

    // Filled by validate_config.
    int grid_size = 0;
    int noise_rank = 0;
    double k_effective = 0.0;
    std::vector<std::string> warnings;
};

// Accepts iff B, C, D >= 0, the coefficient condition 3B >= A + 1 holds when
// enforcement is on, and the structural bounds hold. Returns the config with
// derived quantities (grid size, noise rank, interval half-width) filled.
SimConfig validate_config(SimConfig config);

// Smooth cutoff: 1 on [0, 1], 0 on [2, inf), monotone in between, built from
// the exponential bump psi(s) = exp(-1/s) [s > 0].
double theta_cutoff(double xi);

// Right-hand side of the cutoff Galerkin system:
//   -( eps theta(|u4x|^2/m) u4x + A theta(|ux|^2/m) P_m(u ux)
//      + B theta(|u3x|^2/m) u3x - C theta(|u2x|^2/m) u2x + D u )
// where |.| is the L2(X) norm and the quadratic term is dealiased.
SpectralState galerkin_drift(const SpectralState& state, const SimConfig& config,
                             const Basis& basis);

// Same with all theta factors forced to 1 (the plain regularized equation).
SpectralState deterministic_rhs(const SpectralState& state, const SimConfig& config,
                                const Basis& basis);

// theta arguments |u_kx|^2 / m for k = 1..4 evaluated at a state.
struct CutoffArguments {
    double xi1, xi2, xi3, xi4;
};
CutoffArguments cutoff_arguments(const SpectralState& state, const SimConfig& config,
                                 const Basis& basis);

// Initial data on the basis (kind-specific profile projected onto span(P_m)).
SpectralState initial_state(const SimConfig& config, const Basis& basis);

}  // namespace hkdvb

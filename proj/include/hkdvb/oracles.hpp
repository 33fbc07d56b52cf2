#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hkdvb/integrator.hpp"
#include "hkdvb/model.hpp"

namespace hkdvb {

enum class SolutionKind { linear_mode, kdv_soliton, burgers_front, kdvb_tanh };

SolutionKind solution_kind_from_string(const std::string& name);
std::string to_string(SolutionKind kind);

struct SolutionParams {
    double amplitude = 1.0;   // linear_mode
    double wavenumber = 1.0;  // linear_mode
    double phase = 0.0;       // linear_mode
    double c = 4.0;           // soliton / front speed
    double x0 = 0.0;          // structure position at t = 0
};

// Closed-form traveling or oscillating solutions of the special cases.
// Candidate formulas must pass the residual gate before they are trusted.
class ExactSolution {
public:
    static ExactSolution make(SolutionKind kind, const SolutionParams& params,
                              const Coefficients& coeffs);

    double operator()(double x, double t) const;
    SolutionKind kind() const { return kind_; }
    const SolutionParams& params() const { return params_; }
    const Coefficients& coeffs() const { return coeffs_; }
    double speed() const;  // transport speed of the profile

    // Profile evaluated with x - speed t wrapped into a period of length L
    // around x0 (for comparisons on the periodic domain).
    double periodic(double x, double t, double L) const;

private:
    SolutionKind kind_;
    SolutionParams params_;
    Coefficients coeffs_;
};

double exact_solution(SolutionKind kind, const SolutionParams& params, double x, double t,
                      const Coefficients& coeffs);

struct ResidualGrid {
    double x_lo = -3.0;
    double x_hi = 3.0;
    int nx = 384;
    double t_lo = 0.0;
    double t_hi = 0.25;
    int nt = 48;
};

// Fornberg weights: f^{(k)}(x0) ~ sum w_j f(x_j).
std::vector<double> fornberg_weights(double x0, std::span<const double> x, int k);

// Discrete L2 norm of u_t + A u u_x + B u_3x - C u_2x + D u + eps u_4x over
// the grid, derivatives by order >= 6 centered finite differences.
double residual(const std::function<double(double, double)>& u, const Coefficients& coeffs,
                const ResidualGrid& grid);

// Gate tolerance per solution kind (linear modes are exact, traveling waves
// are held to the finite-difference floor).
double oracle_gate_tolerance(SolutionKind kind);

// Residual of an ExactSolution on a kind-appropriate window; throws
// ValidationError when the gate fails.
double gate_oracle(const ExactSolution& sol, const Domain& domain, double T);

struct ValidateReport {
    std::vector<double> times;
    std::vector<double> rel_l2_errors;
    double max_rel_error = 0.0;
    double oracle_residual = 0.0;
    double energy_drift_rel_per_time = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    std::string kind;
};

// Deterministic solver against a gated exact solution: initial data sampled
// from the oracle, relative L2 error at every saved time. Front solutions are
// compared on an interior window to keep the periodic seam out of the error.
ValidateReport validate_against_oracle(const SimConfig& config, SolutionKind kind,
                                       const SolutionParams& params, double tolerance);

enum class StudyMode { eps, modes, dt };

StudyMode study_mode_from_string(const std::string& name);
std::string to_string(StudyMode mode);

struct ConvergenceStudy {
    StudyMode mode = StudyMode::eps;
    std::vector<double> levels;
    // Pair j compares levels j and j+1; per-path distances and their mean.
    std::vector<double> mean_diffs;
    std::vector<std::vector<double>> per_path_diffs;
    double fraction_decreasing = 0.0;  // paths with strictly decreasing diffs
    std::vector<double> orders;        // dt mode: observed orders per pair
    std::vector<std::uint64_t> checksums;  // increment stream checksums per level
    bool checksums_equal = true;
    int blowups = 0;
};

// eps: coupled-noise runs at decreasing epsilon, L2(0,T;L2) differences of
//      successive levels per path (Cauchy diagnostic).
// modes: increasing m with zero-padding prolongation, same structure.
// dt: deterministic self-convergence order (noise forced off).
ConvergenceStudy convergence_study(const SimConfig& config, StudyMode mode,
                                   std::span<const double> levels);

}  // namespace hkdvb

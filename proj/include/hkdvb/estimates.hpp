#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "hkdvb/integrator.hpp"
#include "hkdvb/model.hpp"
#include "hkdvb/noise.hpp"
#include "hkdvb/spectral.hpp"

namespace hkdvb {

// Polynomial in powers of (x - x0).
struct Poly {
    std::vector<double> c;
    double x0 = 0.0;

    double operator()(double x) const;
    Poly derivative() const;
    int degree() const { return static_cast<int>(c.size()) - 1; }
};

// Weight p with its certified constants: p(x1) = delta, p' > alpha_x on X,
// B p''' + C p'' <= gamma < -1 on X.
struct WeightFunction {
    Poly p;
    double delta = 0.0;
    double alpha_x = 0.0;
    double gamma = 0.0;
};

// Cubic ansatz p = delta + a (x-x1) + c (x-x1)^3 when B > 0, quadratic
// p = delta + a (x-x1) + b (x-x1)^2 when B = 0 and C > 0. B = C = 0 is
// infeasible since the curvature condition cannot reach gamma < -1.
WeightFunction construct_weight(const Domain& domain, double B, double C, double delta,
                                double gamma);

struct WeightReport {
    bool increasing = false;
    bool boundary_value = false;
    bool slope_bound = false;
    bool curvature_bound = false;
    double min_slope = 0.0;
    double max_curvature_combo = 0.0;  // max of B p''' + C p''
    double p_at_x1 = 0.0;
    double failing_x = 0.0;  // first grid point violating a condition
    bool passed() const { return increasing && boundary_value && slope_bound && curvature_bound; }
};

// Grid check of conditions (i)-(iv) on 10^4 points over X.
WeightReport verify_weight(const WeightFunction& w, const Domain& domain, double B, double C);

// F(u) = int_X p u^2 dx.
double energy_functional(const SpectralState& state, const WeightFunction& w, const Basis& basis);

// Cached p-weighted quadratures against one basis.
class EnergyEvaluator {
public:
    EnergyEvaluator(const WeightFunction& w, const Basis& basis);

    double value(const SpectralState& state) const;  // int p u^2
    // int q u v where q indexes the derivative of p: 0 -> p, 1 -> p', ...
    double weighted_product(const SpectralState& u, const SpectralState& v, int q) const;
    double weighted_square(const SpectralState& u, int q) const;
    // int p e_i^2 for every basis slot, used by the trace term.
    const std::vector<double>& basis_squares() const { return basis_squares_; }
    double max_p() const { return max_p_; }

private:
    GridQuadrature quad_;
    std::vector<std::vector<double>> pw_;  // weights * p^{(q)}(nodes), q = 0..3
    std::vector<double> basis_squares_;
    double max_p_;
};

struct IdentityReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
    double boundary_correction = 0.0;        // analytic boundary term for periodic u
    double residual_after_correction = 0.0;  // |lhs - rhs - boundary|
    double scale = 1.0;                      // magnitude reference for relative checks
    std::map<std::string, double> constants;
};

struct IbpReport {
    IdentityReport third_order;   // int p u u_3x = 3/2 int p' u_x^2 - 1/2 int p''' u^2
    IdentityReport second_order;  // int p u u_2x = 1/2 int p'' u^2 - int p u_x^2
};

IbpReport check_ibp_identities(const Field& u, const WeightFunction& w, const Basis& basis);

struct InequalityReport {
    // fourth-order lemma: deficit ratio for
    //   int p u u_4x >= 1/2 int p u_2x^2 - C1 |u|^2 - C2 int p' u_x^2
    double fourth_order_ratio = 0.0;
    // cubic lemma: int p u^2 u_x >= -C3 (1 + |u|^6) - 1/2 int p' u_x^2
    double cubic_ratio = 0.0;
    // interpolation: |u u_x|_{H^-1(-k,k)} <= C5(k) |u|^{3/2}_{L2} |u|^{1/2}_{H1}
    double interpolation_ratio = 0.0;
    double interpolation_lhs = 0.0;
    double interpolation_rhs_structure = 0.0;
};

InequalityReport check_inequalities(const Field& u, const WeightFunction& w, const Basis& basis,
                                    double k);

// Discrete Ito decomposition of F(u) along a trajectory recorded with
// save_stride 1 and stored noise increments:
//   dF = <F'; Phi dW> + <F'; drift> dt + 1/2 Tr(F'' Phi Phi*) dt
// with the drift the one the integrator applied (exact linear symbol plus the
// cutoff A-term). Reports the accumulated residual.
IdentityReport ito_energy_check(const Trajectory& trajectory, const WeightFunction& w,
                                const SimConfig& config, const Basis& basis,
                                const NoiseOperator& noise_op);

struct ItoScanRow {
    double dt = 0.0;
    double mean_residual = 0.0;      // ensemble mean of per-path accumulated residual
    double mean_abs_residual = 0.0;
    int n_paths = 0;
};

// Ensemble-mean Ito residual across a list of time steps (same horizon).
std::vector<ItoScanRow> ito_dt_scan(const SimConfig& config, const WeightFunction& w,
                                    std::span<const double> dts);

struct MomentScanRow {
    double eps = 0.0;
    double eps_h2_mean = 0.0;  // eps * E int |u|^2_{H2} dt
    double eps_h2_ci = 0.0;
    double h1_local_mean = 0.0;  // E int |u|^2_{H1(-k,k)} dt
    double h1_local_ci = 0.0;
    int blowups = 0;
};

struct MomentScan {
    std::vector<MomentScanRow> rows;
    double h2_ratio = 0.0;  // max/min over the eps column
    double h1_ratio = 0.0;
    bool bounded = false;   // both ratios < 10
};

// Runs one ensemble per epsilon (descending list) and reports the scaled
// moment functionals with confidence intervals.
MomentScan moment_bound_scan(const SimConfig& config, std::span<const double> eps_list,
                             double k);

enum class PhiKind { one, tanh_l2, tanh_avg };

PhiKind phi_kind_from_string(const std::string& name);
std::string to_string(PhiKind kind);

struct MartingaleProbe {
    double s = 0.0;
    double t = 0.0;
    PhiKind phi = PhiKind::one;
};

struct ProbeResult {
    double s = 0.0;
    double t = 0.0;
    std::string phi;
    double increment_mean = 0.0;
    double increment_ci = 0.0;
    double qv_mean = 0.0;
    double qv_ci = 0.0;
    bool increment_pass = false;
    bool qv_pass = false;
};

struct MartingaleReport {
    std::vector<ProbeResult> probes;
    double doob_sup_mean = 0.0;        // E sup_t |M|^2
    double doob_final_mean = 0.0;      // E |M(T)|^2
    double doob_ratio = 0.0;           // sup mean / final mean
    bool doob_pass = false;            // ratio <= 4 for p = 2
    double doob_final_abs_mean = 0.0;  // E |M(T)| (the paper's right-hand side)
    int n_paths = 0;
    bool power_warning = false;        // fewer than 16 paths
};

// Reconstructs M(t) = sum Phi(u_n) dW_n along fresh paths and tests the
// martingale increment property, the quadratic-variation compensation and the
// Doob inequality at p = 2. Test functions a and b are smooth bumps
// compactly supported in (-k, k).
MartingaleReport martingale_diagnostics(const SimConfig& config, const Basis& basis,
                                        std::span<const MartingaleProbe> probes);

// The bump pair used by the diagnostics (exposed for tests).
SpectralState martingale_test_function(const Basis& basis, double k, int which);

}  // namespace hkdvb

#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hkdvb/model.hpp"
#include "hkdvb/noise.hpp"
#include "hkdvb/spectral.hpp"

namespace hkdvb {

// -A theta(|u_x|^2/m) P_m(u u_x); the cutoff actually applied is returned
// through theta_out when given.
SpectralState nonlinear_term(const SpectralState& u, const SimConfig& config,
                             const Basis& basis, double* theta_out = nullptr);

// The drift the time stepper realizes: exact linear symbol plus the cutoff
// A-term, i.e. deterministic_rhs with the linear theta factors at 1.
SpectralState effective_drift(const SpectralState& u, const SimConfig& config,
                              const Basis& basis);

// One exponential Euler-Maruyama step:
//   u+ = e^{L dt} (u + dt N(u) + Phi(u) dW)
// with L the linear symbol per mode pair (decay eps k^4 + C k^2 + D,
// rotation B k^3) treated exactly. With noise off and N = 0 the step is exact.
SpectralState step(const SpectralState& state, double dt, std::span<const double> dW,
                   const SimConfig& config, const Basis& basis, const NoiseOperator& noise_op);

struct Trajectory {
    std::vector<double> times;
    std::vector<SpectralState> states;
    std::vector<double> max_abs_values;
    std::vector<char> lambda_flags;
    std::vector<std::vector<double>> noise_record;  // per step, when recorded
    long cutoff_activations = 0;
    bool blew_up = false;
    double blowup_time = 0.0;
    double blowup_norm = 0.0;
    std::string scheme;
    std::uint64_t path_index = 0;
};

struct PathOptions {
    int save_stride = 1;
    bool record_noise = false;
};

// Steps one sample path; owns the scheme caches and the increment stream.
class PathRunner {
public:
    PathRunner(const SimConfig& config, const Basis& basis, const NoiseOperator& noise_op,
               std::uint64_t path_index);

    const SpectralState& state() const { return state_; }
    // Replace the initial state (e.g. with an oracle sample); only valid
    // before the first step.
    void set_initial_state(SpectralState s);
    double time() const { return static_cast<double>(step_index_) * config_->dt; }
    long step_index() const { return step_index_; }
    long n_steps() const { return n_steps_; }
    bool done() const { return step_index_ >= n_steps_; }
    Scheme scheme() const { return scheme_; }
    long cutoff_activations() const { return cutoff_activations_; }

    // Advance one step; returns the Wiener increments consumed (empty when
    // noise is off). Throws BlowupError on non-finite or diverging state.
    const std::vector<double>& advance();

private:
    const SimConfig* config_;
    const Basis* basis_;
    const NoiseOperator* noise_op_;
    SpectralState state_;
    GaussianStream stream_;
    std::vector<double> dw_;
    long step_index_ = 0;
    long n_steps_;
    Scheme scheme_;
    long cutoff_activations_ = 0;
    double sqrt_dt_;
    // Per-mode complex scheme coefficients.
    std::vector<std::complex<double>> exp_full_, exp_half_, q_, f1_, f2_, f3_;

    void check_finite();
};

Trajectory simulate_path(const SimConfig& config, const Basis& basis,
                         std::uint64_t path_index, const PathOptions& options = {});
Trajectory simulate_path(const SimConfig& config, std::uint64_t path_index = 0,
                         const PathOptions& options = {});

struct FunctionalStats {
    std::string name;
    double mean = 0.0;
    double variance = 0.0;
    double ci_half = 0.0;  // 1.96 sd / sqrt(n)
    std::vector<double> samples;
};

struct EnsembleStats {
    int n_paths = 0;
    int n_blowups = 0;
    long lambda_violations = 0;
    long cutoff_activations = 0;
    std::vector<FunctionalStats> functionals;

    const FunctionalStats& functional(const std::string& name) const;
};

struct EnsembleOptions {
    // Optional terminal functional (the weighted energy F(u(T)) is wired in
    // by the harness to keep this layer independent of the estimates module).
    std::function<double(const SpectralState&)> terminal_functional;
    std::string terminal_name = "terminal";
};

// Simulates n_paths independent trajectories (seed-split) and accumulates the
// moment functionals sup_t |u|^2, int_0^T |u|^2_{H2} dt and
// int_0^T |u|^2_{H1(-k,k)} dt per path. Results do not depend on the worker
// count: per-path samples land in index order and are reduced pairwise.
EnsembleStats run_ensemble(const SimConfig& config, const Basis& basis,
                           const EnsembleOptions& options = {});
EnsembleStats run_ensemble(const SimConfig& config, const EnsembleOptions& options = {});

// Deterministic pairwise reduction helpers shared by the ensemble layers.
double pairwise_sum(std::span<const double> values);
FunctionalStats summarize(const std::string& name, std::vector<double> samples);

// Worker count: explicit config value, else HKDVB_THREADS, else hardware.
int resolve_threads(const SimConfig& config);

// Runs fn(path_index) for all indices in [0, n) on the resolved worker count.
void parallel_paths(int n, int threads, const std::function<void(int)>& fn);

}  // namespace hkdvb

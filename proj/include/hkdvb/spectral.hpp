#pragma once

#include <memory>
#include <span>
#include <vector>

#include "hkdvb/errors.hpp"

namespace hkdvb {

// Bounded interval X = [x1, x2] with 0 in the interior.
struct Domain {
    double x1 = -3.14159265358979323846;
    double x2 = 3.14159265358979323846;
    double length() const { return x2 - x1; }
};

Domain make_domain(double x1, double x2);
void validate_domain(const Domain& d);

// Truncated solution as real spectral coefficients at one time instant.
// Layout: coeffs[0] is the constant mode, coeffs[2j-1]/coeffs[2j] are the
// cos/sin pair of wavenumber k_j = 2*pi*j/L, j = 1..m.
struct SpectralState {
    std::vector<double> coeffs;
    double time = 0.0;
};

// Physical-space view on the collocation grid.
struct Field {
    std::vector<double> values;
};

namespace detail {
class FftPlan;
}

// Real trigonometric orthonormal basis {1/sqrt(L), sqrt(2/L) cos(k_j (x-x1)),
// sqrt(2/L) sin(k_j (x-x1))} on X with periodic extension, plus its
// collocation grid. The grid has N = 4m+4 equispaced points on [x1, x2),
// enough to integrate quadratic products of band-limited functions exactly.
class Basis {
public:
    Basis(int m, Domain domain);

    int truncation() const { return m_; }
    int dim() const { return 2 * m_ + 1; }
    int grid_size() const { return static_cast<int>(grid_.size()); }
    const Domain& domain() const { return domain_; }
    const std::vector<double>& grid() const { return grid_; }
    const std::vector<double>& wavenumbers() const { return wavenumbers_; }

    // Wavenumber of coefficient slot c (0 for the constant mode).
    double slot_wavenumber(int c) const;
    // Wavenumber k_j = 2*pi*j/L of mode pair j, j = 0..m.
    double wavenumber(int j) const { return wavenumbers_[static_cast<size_t>(j)]; }

    const detail::FftPlan& fft() const { return *fft_; }

private:
    int m_;
    Domain domain_;
    std::vector<double> grid_;
    std::vector<double> wavenumbers_;
    std::shared_ptr<const detail::FftPlan> fft_;
};

Basis build_basis(int m, const Domain& domain);

// Transforms: exact on span(P_m), to_spectral . to_physical = identity.
Field to_physical(const SpectralState& state, const Basis& basis);
SpectralState to_spectral(const Field& field, const Basis& basis);

// Exact differentiation of trigonometric polynomials, order in 1..4.
SpectralState spectral_derivative(const SpectralState& state, int order, const Basis& basis);

// ( sum_modes (1 + k^2)^s |coeff pair|^2 )^{1/2}; s = 0 is the L2 norm.
double sobolev_norm(const SpectralState& state, double s, const Basis& basis);

double l2_norm(const SpectralState& state);

// P_m(u * v) with the product formed on the oversampled collocation grid,
// which is alias-free for quadratic products (2/3-rule style dealiasing).
SpectralState dealiased_product(const SpectralState& u, const SpectralState& v,
                                const Basis& basis);

// <f, g> over X by periodic quadrature; exact for band-limited products.
double inner_product(const Field& f, const Field& g, const Basis& basis);

double max_abs(const Field& field);

// Evaluate the spectral interpolant at an arbitrary point.
double eval_state(const SpectralState& state, double x, const Basis& basis);

// Composite Gauss-Legendre quadrature over [a, b] in X, resolved for the
// basis band limit, with a cached evaluation matrix for spectral states.
class GridQuadrature {
public:
    GridQuadrature(const Basis& basis, double a, double b, int oversample = 1);

    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }

    std::vector<double> evaluate(const SpectralState& state) const;
    double integrate(std::span<const double> values_at_nodes) const;

    // Row-major [node][coeff] matrix of basis values at the nodes.
    const std::vector<double>& eval_matrix() const { return eval_matrix_; }
    int basis_dim() const { return dim_; }

private:
    std::vector<double> nodes_;
    std::vector<double> weights_;
    std::vector<double> eval_matrix_;  // row-major [node][coeff]
    int dim_;
};

// Cached evaluator for Sobolev norms on a subinterval (-k, k) of X.
// s = 0 and s = 1 are quadratures of u^2 and u^2 + u_x^2; s = -1 is a
// Dirichlet sine-series surrogate for the dual norm, truncated at
// J = 4 * dim(basis) terms.
class IntervalNorms {
public:
    IntervalNorms(const Basis& basis, double k, bool with_negative = false);

    double k() const { return k_; }
    double l2(const SpectralState& state) const;
    double h1(const SpectralState& state) const;
    double h_minus1(const SpectralState& state) const;

    // Negative norm of a function given by its values at the sine nodes
    // (for products that leave span(P_m)).
    double h_minus1_values(std::span<const double> values) const;
    const std::vector<double>& sine_nodes() const { return sine_nodes_; }
    std::vector<double> evaluate_at_sine_nodes(const SpectralState& state) const;

private:
    const Basis* basis_;
    double k_;
    GridQuadrature quad_;
    // Sine-series data, present when with_negative.
    std::vector<double> sine_nodes_;
    std::vector<double> sine_weights_;
    std::vector<double> sine_eval_;    // [node][coeff]
    std::vector<double> sine_matrix_;  // [j][node], includes weights
    std::vector<double> dual_weights_; // (1 + (pi j / 2k)^2)^{-1}
    int n_sine_ = 0;
};

// s restricted to {-1, 0, 1}; interval (-k, k) must be contained in X.
double local_sobolev_norm(const Field& field, double k, int s, const Basis& basis);

// n-point Gauss-Legendre rule on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace hkdvb

#include "hkdvb/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <mutex>
#include <numbers>
#include <string>

namespace hkdvb {

namespace {
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

namespace detail {

// One r2c/c2r plan pair for a fixed grid size. Plans are created with
// FFTW_UNALIGNED so they can execute on plain std::vector storage; the
// new-array execute calls are thread safe.
class FftPlan {
public:
    explicit FftPlan(int n) : n_(n) {
        std::vector<double> real(static_cast<size_t>(n));
        std::vector<std::complex<double>> cplx(static_cast<size_t>(n / 2 + 1));
        std::lock_guard<std::mutex> lock(planner_mutex());
        fwd_ = fftw_plan_dft_r2c_1d(n, real.data(),
                                    reinterpret_cast<fftw_complex*>(cplx.data()),
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
        bwd_ = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(cplx.data()),
                                    real.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
    }

    ~FftPlan() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }

    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;

    void forward(double* in, std::complex<double>* out) const {
        fftw_execute_dft_r2c(fwd_, in, reinterpret_cast<fftw_complex*>(out));
    }

    void backward(std::complex<double>* in, double* out) const {
        fftw_execute_dft_c2r(bwd_, reinterpret_cast<fftw_complex*>(in), out);
    }

    int size() const { return n_; }

private:
    int n_;
    fftw_plan fwd_;
    fftw_plan bwd_;
};

}  // namespace detail

namespace {

struct Scratch {
    std::vector<double> real;
    std::vector<std::complex<double>> cplx;
    void resize(int n) {
        real.resize(static_cast<size_t>(n));
        cplx.resize(static_cast<size_t>(n / 2 + 1));
    }
};

Scratch& scratch() {
    thread_local Scratch s;
    return s;
}

}  // namespace

void validate_domain(const Domain& d) {
    if (!(d.x1 < 0.0) || !(0.0 < d.x2)) {
        throw ValidationError("domain: require x1 < 0 < x2, got [" +
                              std::to_string(d.x1) + ", " + std::to_string(d.x2) + "]");
    }
    if (!(d.length() > 0.0) || !std::isfinite(d.length())) {
        throw ValidationError("domain: length must be positive and finite");
    }
}

Domain make_domain(double x1, double x2) {
    Domain d{x1, x2};
    validate_domain(d);
    return d;
}

Basis::Basis(int m, Domain domain) : m_(m), domain_(domain) {
    if (m < 1) throw ValidationError("basis: truncation m must be >= 1");
    validate_domain(domain);
    const int n = 4 * m + 4;
    const double L = domain.length();
    grid_.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        grid_[static_cast<size_t>(i)] = domain.x1 + L * static_cast<double>(i) / n;
    }
    wavenumbers_.resize(static_cast<size_t>(m) + 1);
    for (int j = 0; j <= m; ++j) {
        wavenumbers_[static_cast<size_t>(j)] = 2.0 * std::numbers::pi * j / L;
    }
    fft_ = std::make_shared<const detail::FftPlan>(n);
}

double Basis::slot_wavenumber(int c) const {
    if (c == 0) return 0.0;
    return wavenumbers_[static_cast<size_t>((c + 1) / 2)];
}

Basis build_basis(int m, const Domain& domain) { return Basis(m, domain); }

Field to_physical(const SpectralState& state, const Basis& basis) {
    const int dim = basis.dim();
    if (static_cast<int>(state.coeffs.size()) != dim) {
        throw std::invalid_argument("to_physical: state has " +
                                    std::to_string(state.coeffs.size()) +
                                    " coefficients, basis dim is " + std::to_string(dim));
    }
    const int n = basis.grid_size();
    const int m = basis.truncation();
    const double L = basis.domain().length();
    const double c0 = 1.0 / std::sqrt(L);
    const double cj = 0.5 * std::sqrt(2.0 / L);

    Scratch& s = scratch();
    s.resize(n);
    std::fill(s.cplx.begin(), s.cplx.end(), std::complex<double>(0.0, 0.0));
    s.cplx[0] = std::complex<double>(state.coeffs[0] * c0, 0.0);
    for (int j = 1; j <= m; ++j) {
        const double a = state.coeffs[static_cast<size_t>(2 * j - 1)];
        const double b = state.coeffs[static_cast<size_t>(2 * j)];
        s.cplx[static_cast<size_t>(j)] = std::complex<double>(a * cj, -b * cj);
    }
    Field out;
    out.values.resize(static_cast<size_t>(n));
    basis.fft().backward(s.cplx.data(), out.values.data());
    return out;
}

SpectralState to_spectral(const Field& field, const Basis& basis) {
    const int n = basis.grid_size();
    if (static_cast<int>(field.values.size()) != n) {
        throw std::invalid_argument("to_spectral: field has " +
                                    std::to_string(field.values.size()) +
                                    " values, grid size is " + std::to_string(n));
    }
    const int m = basis.truncation();
    const double L = basis.domain().length();

    Scratch& s = scratch();
    s.resize(n);
    std::copy(field.values.begin(), field.values.end(), s.real.begin());
    basis.fft().forward(s.real.data(), s.cplx.data());

    SpectralState out;
    out.coeffs.resize(static_cast<size_t>(basis.dim()));
    out.coeffs[0] = s.cplx[0].real() / n * std::sqrt(L);
    const double scale = std::sqrt(L / 2.0) * 2.0 / n;
    for (int j = 1; j <= m; ++j) {
        out.coeffs[static_cast<size_t>(2 * j - 1)] = s.cplx[static_cast<size_t>(j)].real() * scale;
        out.coeffs[static_cast<size_t>(2 * j)] = -s.cplx[static_cast<size_t>(j)].imag() * scale;
    }
    return out;
}

SpectralState spectral_derivative(const SpectralState& state, int order, const Basis& basis) {
    if (order < 1 || order > 4) {
        throw std::invalid_argument("spectral_derivative: order must be in 1..4, got " +
                                    std::to_string(order));
    }
    const int dim = basis.dim();
    if (static_cast<int>(state.coeffs.size()) != dim) {
        throw std::invalid_argument("spectral_derivative: coefficient size mismatch");
    }
    SpectralState out;
    out.time = state.time;
    out.coeffs.assign(static_cast<size_t>(dim), 0.0);
    const int m = basis.truncation();
    for (int j = 1; j <= m; ++j) {
        const double k = basis.wavenumber(j);
        const double a = state.coeffs[static_cast<size_t>(2 * j - 1)];
        const double b = state.coeffs[static_cast<size_t>(2 * j)];
        double ra = 0.0, rb = 0.0;
        switch (order) {
            case 1: ra = k * b; rb = -k * a; break;
            case 2: ra = -k * k * a; rb = -k * k * b; break;
            case 3: ra = -k * k * k * b; rb = k * k * k * a; break;
            case 4: ra = k * k * k * k * a; rb = k * k * k * k * b; break;
        }
        out.coeffs[static_cast<size_t>(2 * j - 1)] = ra;
        out.coeffs[static_cast<size_t>(2 * j)] = rb;
    }
    return out;
}

double l2_norm(const SpectralState& state) {
    double acc = 0.0;
    for (double c : state.coeffs) acc += c * c;
    return std::sqrt(acc);
}

double sobolev_norm(const SpectralState& state, double s, const Basis& basis) {
    const int m = basis.truncation();
    if (static_cast<int>(state.coeffs.size()) != basis.dim()) {
        throw std::invalid_argument("sobolev_norm: coefficient size mismatch");
    }
    double acc = state.coeffs[0] * state.coeffs[0];  // (1 + 0)^s = 1
    for (int j = 1; j <= m; ++j) {
        const double k = basis.wavenumber(j);
        const double a = state.coeffs[static_cast<size_t>(2 * j - 1)];
        const double b = state.coeffs[static_cast<size_t>(2 * j)];
        acc += std::pow(1.0 + k * k, s) * (a * a + b * b);
    }
    return std::sqrt(acc);
}

SpectralState dealiased_product(const SpectralState& u, const SpectralState& v,
                                const Basis& basis) {
    Field fu = to_physical(u, basis);
    const Field fv = to_physical(v, basis);
    for (size_t i = 0; i < fu.values.size(); ++i) fu.values[i] *= fv.values[i];
    SpectralState out = to_spectral(fu, basis);
    out.time = u.time;
    return out;
}

double inner_product(const Field& f, const Field& g, const Basis& basis) {
    const size_t n = static_cast<size_t>(basis.grid_size());
    if (f.values.size() != n || g.values.size() != n) {
        throw std::invalid_argument("inner_product: field size does not match grid");
    }
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += f.values[i] * g.values[i];
    return acc * basis.domain().length() / static_cast<double>(n);
}

double max_abs(const Field& field) {
    double v = 0.0;
    for (double x : field.values) v = std::max(v, std::abs(x));
    return v;
}

double eval_state(const SpectralState& state, double x, const Basis& basis) {
    const int m = basis.truncation();
    const double L = basis.domain().length();
    const double y = x - basis.domain().x1;
    double acc = state.coeffs[0] / std::sqrt(L);
    const double amp = std::sqrt(2.0 / L);
    for (int j = 1; j <= m; ++j) {
        const double ky = basis.wavenumber(j) * y;
        acc += amp * (state.coeffs[static_cast<size_t>(2 * j - 1)] * std::cos(ky) +
                      state.coeffs[static_cast<size_t>(2 * j)] * std::sin(ky));
    }
    return acc;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.resize(static_cast<size_t>(n));
    weights.resize(static_cast<size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        // Newton iteration from the Chebyshev estimate.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[static_cast<size_t>(i)] = -x;
        nodes[static_cast<size_t>(n - 1 - i)] = x;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[static_cast<size_t>(i)] = w;
        weights[static_cast<size_t>(n - 1 - i)] = w;
    }
}

namespace {

constexpr int kNodesPerPanel = 12;

void fill_eval_matrix(const Basis& basis, const std::vector<double>& nodes,
                      std::vector<double>& matrix) {
    const int dim = basis.dim();
    const int m = basis.truncation();
    const double L = basis.domain().length();
    const double c0 = 1.0 / std::sqrt(L);
    const double amp = std::sqrt(2.0 / L);
    matrix.assign(nodes.size() * static_cast<size_t>(dim), 0.0);
    for (size_t p = 0; p < nodes.size(); ++p) {
        const double y = nodes[p] - basis.domain().x1;
        double* row = &matrix[p * static_cast<size_t>(dim)];
        row[0] = c0;
        for (int j = 1; j <= m; ++j) {
            const double ky = basis.wavenumber(j) * y;
            row[2 * j - 1] = amp * std::cos(ky);
            row[2 * j] = amp * std::sin(ky);
        }
    }
}

void composite_panels(double a, double b, int n_panels,
                      const std::vector<double>& ref_nodes,
                      const std::vector<double>& ref_weights,
                      std::vector<double>& nodes, std::vector<double>& weights) {
    const double h = (b - a) / n_panels;
    nodes.clear();
    weights.clear();
    nodes.reserve(static_cast<size_t>(n_panels) * ref_nodes.size());
    weights.reserve(static_cast<size_t>(n_panels) * ref_nodes.size());
    for (int p = 0; p < n_panels; ++p) {
        const double lo = a + p * h;
        for (size_t q = 0; q < ref_nodes.size(); ++q) {
            nodes.push_back(lo + 0.5 * h * (ref_nodes[q] + 1.0));
            weights.push_back(0.5 * h * ref_weights[q]);
        }
    }
}

}  // namespace

GridQuadrature::GridQuadrature(const Basis& basis, double a, double b, int oversample)
    : dim_(basis.dim()) {
    if (!(a < b)) throw std::invalid_argument("quadrature: require a < b");
    const double L = basis.domain().length();
    // Panel width about half the shortest basis wavelength.
    const int band_panels = static_cast<int>(
        std::ceil((b - a) / L * (2.0 * basis.truncation() + 4.0)));
    const int n_panels = std::max(4, band_panels * std::max(1, oversample));
    std::vector<double> ref_nodes, ref_weights;
    gauss_legendre(kNodesPerPanel, ref_nodes, ref_weights);
    composite_panels(a, b, n_panels, ref_nodes, ref_weights, nodes_, weights_);
    fill_eval_matrix(basis, nodes_, eval_matrix_);
}

std::vector<double> GridQuadrature::evaluate(const SpectralState& state) const {
    if (static_cast<int>(state.coeffs.size()) != dim_) {
        throw std::invalid_argument("quadrature: coefficient size mismatch");
    }
    std::vector<double> out(nodes_.size(), 0.0);
    for (size_t p = 0; p < nodes_.size(); ++p) {
        const double* row = &eval_matrix_[p * static_cast<size_t>(dim_)];
        double acc = 0.0;
        for (int c = 0; c < dim_; ++c) acc += row[c] * state.coeffs[static_cast<size_t>(c)];
        out[p] = acc;
    }
    return out;
}

double GridQuadrature::integrate(std::span<const double> values_at_nodes) const {
    if (values_at_nodes.size() != weights_.size()) {
        throw std::invalid_argument("quadrature: value vector size mismatch");
    }
    double acc = 0.0;
    for (size_t p = 0; p < weights_.size(); ++p) acc += weights_[p] * values_at_nodes[p];
    return acc;
}

IntervalNorms::IntervalNorms(const Basis& basis, double k, bool with_negative)
    : basis_(&basis), k_(k), quad_(basis, -k, k) {
    if (!(k > 0.0)) throw std::domain_error("interval norms: require k > 0");
    if (-k < basis.domain().x1 || k > basis.domain().x2) {
        throw std::domain_error("interval norms: (-k, k) not contained in X");
    }
    if (!with_negative) return;

    n_sine_ = 4 * basis.dim();
    // Nodes fine enough for the highest sine mode: one panel per half
    // wavelength of sin(n_sine pi (x+k) / (2k)).
    const int n_panels = std::max(8, n_sine_ / 2 + 4);
    std::vector<double> ref_nodes, ref_weights;
    gauss_legendre(kNodesPerPanel, ref_nodes, ref_weights);
    composite_panels(-k, k, n_panels, ref_nodes, ref_weights, sine_nodes_, sine_weights_);
    fill_eval_matrix(basis, sine_nodes_, sine_eval_);

    const double norm = std::sqrt(1.0 / k);
    sine_matrix_.assign(static_cast<size_t>(n_sine_) * sine_nodes_.size(), 0.0);
    dual_weights_.resize(static_cast<size_t>(n_sine_));
    for (int j = 1; j <= n_sine_; ++j) {
        const double freq = j * std::numbers::pi / (2.0 * k);
        dual_weights_[static_cast<size_t>(j - 1)] = 1.0 / (1.0 + freq * freq);
        double* row = &sine_matrix_[static_cast<size_t>(j - 1) * sine_nodes_.size()];
        for (size_t p = 0; p < sine_nodes_.size(); ++p) {
            row[p] = norm * std::sin(freq * (sine_nodes_[p] + k)) * sine_weights_[p];
        }
    }
}

double IntervalNorms::l2(const SpectralState& state) const {
    const std::vector<double> u = quad_.evaluate(state);
    double acc = 0.0;
    for (size_t p = 0; p < u.size(); ++p) acc += quad_.weights()[p] * u[p] * u[p];
    return std::sqrt(std::max(0.0, acc));
}

double IntervalNorms::h1(const SpectralState& state) const {
    const SpectralState dstate = spectral_derivative(state, 1, *basis_);
    const std::vector<double> u = quad_.evaluate(state);
    const std::vector<double> ux = quad_.evaluate(dstate);
    double acc = 0.0;
    for (size_t p = 0; p < u.size(); ++p) {
        acc += quad_.weights()[p] * (u[p] * u[p] + ux[p] * ux[p]);
    }
    return std::sqrt(std::max(0.0, acc));
}

std::vector<double> IntervalNorms::evaluate_at_sine_nodes(const SpectralState& state) const {
    if (n_sine_ == 0) {
        throw std::logic_error("interval norms: built without negative-order support");
    }
    const int dim = basis_->dim();
    std::vector<double> u(sine_nodes_.size(), 0.0);
    for (size_t p = 0; p < sine_nodes_.size(); ++p) {
        const double* row = &sine_eval_[p * static_cast<size_t>(dim)];
        double acc = 0.0;
        for (int c = 0; c < dim; ++c) acc += row[c] * state.coeffs[static_cast<size_t>(c)];
        u[p] = acc;
    }
    return u;
}

double IntervalNorms::h_minus1_values(std::span<const double> values) const {
    if (n_sine_ == 0) {
        throw std::logic_error("interval norms: built without negative-order support");
    }
    if (values.size() != sine_nodes_.size()) {
        throw std::invalid_argument("interval norms: value vector size mismatch");
    }
    double acc = 0.0;
    for (int j = 0; j < n_sine_; ++j) {
        const double* row = &sine_matrix_[static_cast<size_t>(j) * sine_nodes_.size()];
        double d = 0.0;
        for (size_t p = 0; p < values.size(); ++p) d += row[p] * values[p];
        acc += dual_weights_[static_cast<size_t>(j)] * d * d;
    }
    return std::sqrt(acc);
}

double IntervalNorms::h_minus1(const SpectralState& state) const {
    return h_minus1_values(evaluate_at_sine_nodes(state));
}

double local_sobolev_norm(const Field& field, double k, int s, const Basis& basis) {
    if (s < -1 || s > 1) {
        throw std::invalid_argument("local_sobolev_norm: s must be in {-1, 0, 1}");
    }
    const SpectralState state = to_spectral(field, basis);
    IntervalNorms norms(basis, k, s == -1);
    switch (s) {
        case 0: return norms.l2(state);
        case 1: return norms.h1(state);
        default: return norms.h_minus1(state);
    }
}

}  // namespace hkdvb

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hkdvb/spectral.hpp"

namespace hkdvb {

enum class NoiseKind { off, diagonal_gain, pointwise_multiplicative };

NoiseKind noise_kind_from_string(const std::string& name);
std::string to_string(NoiseKind kind);

// Parameters of the noise operator family. Mode amplitudes decay as
// lambda_i = lambda0 * i^{-decay_p} over the retained Wiener modes, with
// lambda0 fixed so sum lambda_i^2 = kappa1^2.
struct NoiseSpec {
    NoiseKind kind = NoiseKind::off;
    double kappa1 = 0.1;
    double kappa2 = 0.0;
    double decay_p = 0.6;
    int rank = 0;  // 0 means basis dimension
};

// Finite-rank representation of u |-> Phi(u). Immutable after construction.
//
// diagonal_gain:  Phi(u) e_i = lambda_i * g(|u|) * e_i with g(r) = min(r^2, r),
//                 so |Phi(u)|_HS = kappa1 * min(|u|^2, |u|) exactly.
// pointwise_multiplicative:
//                 (Phi(u) e_i)(x) = lambda_i * u(x) e_i(x) / (1 + |u|),
//                 dealiased and projected onto span(P_m).
class NoiseOperator {
public:
    NoiseOperator(const NoiseSpec& spec, const Basis& basis);

    NoiseKind kind() const { return spec_.kind; }
    int rank() const { return rank_; }
    const NoiseSpec& spec() const { return spec_; }
    const std::vector<double>& lambdas() const { return lambdas_; }

    // Spectral coefficients of Phi(u) e_i, i in 1..rank.
    SpectralState column(const SpectralState& u, int i, const Basis& basis) const;

    // P_m Phi(u) dW = sum_i dW_i Phi(u) e_i.
    SpectralState apply(const SpectralState& u, std::span<const double> dW,
                        const Basis& basis) const;

    // ( sum_{i<=rank} |Phi(u) e_i|_{L2}^2 )^{1/2}, optionally truncated to the
    // leading `modes` terms.
    double hs_norm(const SpectralState& u, const Basis& basis, int modes = 0) const;

    // Components <Phi(u) e_i, a> for i in 1..rank (the adjoint Phi(u)^* a).
    std::vector<double> adjoint(const SpectralState& u, const SpectralState& a,
                                const Basis& basis) const;

private:
    NoiseSpec spec_;
    int rank_;
    std::vector<double> lambdas_;
};

NoiseOperator make_noise_operator(const NoiseSpec& spec, const Basis& basis);

double hs_norm(const NoiseOperator& op, const SpectralState& state, const Basis& basis);

SpectralState apply_noise(const NoiseOperator& op, const SpectralState& state,
                          std::span<const double> dW, const Basis& basis);

// Gaussian increment stream, fully determined by (seed, path index). The
// generator is hand-rolled (SplitMix64 + Box-Muller) so streams are stable
// across platforms and thread counts.
class GaussianStream {
public:
    GaussianStream(std::uint64_t seed, std::uint64_t path_index);
    double next();  // standard normal

private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

struct IncrementStream {
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;
    double dt = 0.0;
    int n_steps = 0;
    int rank = 0;
};

// n_steps vectors of length rank with N(0, dt) entries, drawn step-major.
std::vector<std::vector<double>> wiener_increments(const IncrementStream& stream);

// FNV-1a over the raw bytes of the increment doubles, for coupled-path runs.
std::uint64_t increment_checksum(const IncrementStream& stream);

}  // namespace hkdvb

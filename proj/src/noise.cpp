#include "hkdvb/noise.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include "hkdvb/errors.hpp"

namespace hkdvb {

NoiseKind noise_kind_from_string(const std::string& name) {
    if (name == "off") return NoiseKind::off;
    if (name == "diagonal_gain") return NoiseKind::diagonal_gain;
    if (name == "pointwise_multiplicative") return NoiseKind::pointwise_multiplicative;
    throw std::invalid_argument("unknown noise kind: " + name);
}

std::string to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::off: return "off";
        case NoiseKind::diagonal_gain: return "diagonal_gain";
        case NoiseKind::pointwise_multiplicative: return "pointwise_multiplicative";
    }
    return "off";
}

namespace {

double gain(double r) { return std::min(r * r, r); }

}  // namespace

NoiseOperator::NoiseOperator(const NoiseSpec& spec, const Basis& basis) : spec_(spec) {
    rank_ = spec.rank > 0 ? spec.rank : basis.dim();
    if (rank_ > basis.dim()) {
        throw std::invalid_argument("noise operator: rank exceeds basis dimension");
    }
    if (spec.kind == NoiseKind::off) {
        rank_ = std::min(rank_, basis.dim());
        lambdas_.assign(static_cast<size_t>(rank_), 0.0);
        return;
    }
    if (!(spec.kappa1 > 0.0)) throw std::invalid_argument("noise operator: kappa1 must be > 0");
    if (!(spec.decay_p > 0.5)) throw std::invalid_argument("noise operator: decay_p must be > 1/2");
    lambdas_.resize(static_cast<size_t>(rank_));
    double sum = 0.0;
    for (int i = 1; i <= rank_; ++i) {
        const double v = std::pow(static_cast<double>(i), -spec.decay_p);
        lambdas_[static_cast<size_t>(i - 1)] = v;
        sum += v * v;
    }
    const double lambda0 = spec.kappa1 / std::sqrt(sum);
    for (double& v : lambdas_) v *= lambda0;
}

NoiseOperator make_noise_operator(const NoiseSpec& spec, const Basis& basis) {
    return NoiseOperator(spec, basis);
}

SpectralState NoiseOperator::column(const SpectralState& u, int i, const Basis& basis) const {
    if (i < 1 || i > rank_) throw std::invalid_argument("noise column: index outside 1..rank");
    SpectralState out;
    out.time = u.time;
    out.coeffs.assign(static_cast<size_t>(basis.dim()), 0.0);
    if (spec_.kind == NoiseKind::off) return out;
    const double lam = lambdas_[static_cast<size_t>(i - 1)];
    if (spec_.kind == NoiseKind::diagonal_gain) {
        out.coeffs[static_cast<size_t>(i - 1)] = lam * gain(l2_norm(u));
        return out;
    }
    // pointwise multiplicative: lambda_i P_m(u e_i) / (1 + |u|).
    SpectralState ei;
    ei.coeffs.assign(static_cast<size_t>(basis.dim()), 0.0);
    ei.coeffs[static_cast<size_t>(i - 1)] = 1.0;
    out = dealiased_product(u, ei, basis);
    const double f = lam / (1.0 + l2_norm(u));
    for (double& v : out.coeffs) v *= f;
    out.time = u.time;
    return out;
}

SpectralState NoiseOperator::apply(const SpectralState& u, std::span<const double> dW,
                                   const Basis& basis) const {
    if (static_cast<int>(dW.size()) != rank_) {
        throw std::invalid_argument("apply_noise: dW length " + std::to_string(dW.size()) +
                                    " does not match rank " + std::to_string(rank_));
    }
    SpectralState out;
    out.time = u.time;
    out.coeffs.assign(static_cast<size_t>(basis.dim()), 0.0);
    if (spec_.kind == NoiseKind::off) return out;

    if (spec_.kind == NoiseKind::diagonal_gain) {
        const double g = gain(l2_norm(u));
        for (int i = 0; i < rank_; ++i) {
            out.coeffs[static_cast<size_t>(i)] = lambdas_[static_cast<size_t>(i)] * g * dW[static_cast<size_t>(i)];
        }
        return out;
    }

    // sum_i dW_i lambda_i P_m(u e_i) / (1 + |u|) = P_m(u w) / (1 + |u|)
    // with w = sum_i lambda_i dW_i e_i.
    SpectralState w;
    w.coeffs.assign(static_cast<size_t>(basis.dim()), 0.0);
    for (int i = 0; i < rank_; ++i) {
        w.coeffs[static_cast<size_t>(i)] = lambdas_[static_cast<size_t>(i)] * dW[static_cast<size_t>(i)];
    }
    out = dealiased_product(u, w, basis);
    const double f = 1.0 / (1.0 + l2_norm(u));
    for (double& v : out.coeffs) v *= f;
    out.time = u.time;
    return out;
}

double NoiseOperator::hs_norm(const SpectralState& u, const Basis& basis, int modes) const {
    const int n = modes > 0 ? std::min(modes, rank_) : rank_;
    if (spec_.kind == NoiseKind::off) return 0.0;
    if (spec_.kind == NoiseKind::diagonal_gain) {
        const double g = gain(l2_norm(u));
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            const double v = lambdas_[static_cast<size_t>(i)] * g;
            acc += v * v;
        }
        return std::sqrt(acc);
    }
    double acc = 0.0;
    for (int i = 1; i <= n; ++i) {
        const SpectralState col = column(u, i, basis);
        const double v = l2_norm(col);
        acc += v * v;
    }
    return std::sqrt(acc);
}

std::vector<double> NoiseOperator::adjoint(const SpectralState& u, const SpectralState& a,
                                           const Basis& basis) const {
    std::vector<double> out(static_cast<size_t>(rank_), 0.0);
    if (spec_.kind == NoiseKind::off) return out;
    if (spec_.kind == NoiseKind::diagonal_gain) {
        const double g = gain(l2_norm(u));
        for (int i = 0; i < rank_; ++i) {
            out[static_cast<size_t>(i)] =
                lambdas_[static_cast<size_t>(i)] * g * a.coeffs[static_cast<size_t>(i)];
        }
        return out;
    }
    // <Phi(u) e_i, a> = lambda_i <u e_i, a> / (1 + |u|) = lambda_i (P_m(u a))_i / (1 + |u|)
    const SpectralState ua = dealiased_product(u, a, basis);
    const double f = 1.0 / (1.0 + l2_norm(u));
    for (int i = 0; i < rank_; ++i) {
        out[static_cast<size_t>(i)] = lambdas_[static_cast<size_t>(i)] * f *
                                      ua.coeffs[static_cast<size_t>(i)];
    }
    return out;
}

double hs_norm(const NoiseOperator& op, const SpectralState& state, const Basis& basis) {
    return op.hs_norm(state, basis);
}

SpectralState apply_noise(const NoiseOperator& op, const SpectralState& state,
                          std::span<const double> dW, const Basis& basis) {
    return op.apply(state, dW, basis);
}

namespace {

std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

GaussianStream::GaussianStream(std::uint64_t seed, std::uint64_t path_index) {
    state_ = mix64(mix64(seed) ^ mix64(path_index * 0x2545F4914F6CDD1DULL + 1));
}

double GaussianStream::next() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    // SplitMix64 words -> (0, 1] uniforms -> Box-Muller pair.
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z1 = state_;
    z1 = (z1 ^ (z1 >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z1 = (z1 ^ (z1 >> 27)) * 0x94D049BB133111EBULL;
    z1 ^= z1 >> 31;
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z2 = state_;
    z2 = (z2 ^ (z2 >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z2 = (z2 ^ (z2 >> 27)) * 0x94D049BB133111EBULL;
    z2 ^= z2 >> 31;

    const double u1 = (static_cast<double>(z1 >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(z2 >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(phi);
    has_cached_ = true;
    return r * std::cos(phi);
}

std::vector<std::vector<double>> wiener_increments(const IncrementStream& stream) {
    if (!(stream.dt > 0.0)) throw std::invalid_argument("wiener_increments: dt must be > 0");
    if (stream.rank < 1) throw std::invalid_argument("wiener_increments: rank must be >= 1");
    GaussianStream g(stream.seed, stream.path_index);
    const double s = std::sqrt(stream.dt);
    std::vector<std::vector<double>> out(static_cast<size_t>(stream.n_steps));
    for (auto& vec : out) {
        vec.resize(static_cast<size_t>(stream.rank));
        for (double& v : vec) v = s * g.next();
    }
    return out;
}

std::uint64_t increment_checksum(const IncrementStream& stream) {
    GaussianStream g(stream.seed, stream.path_index);
    const double s = std::sqrt(stream.dt);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (long n = 0; n < static_cast<long>(stream.n_steps) * stream.rank; ++n) {
        const std::uint64_t bits = std::bit_cast<std::uint64_t>(s * g.next());
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xFFULL;
            h *= 0x100000001B3ULL;
        }
    }
    return h;
}

}  // namespace hkdvb

#pragma once

// Frozen random hidden layer: inverse-quadratic kernels
//   h_i(x, v) = 1 / (|x - cx_i|^2 + |v - cv_i|^2 + w03^2)
// with centers drawn uniformly over the (padded) training box.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>

#include "mechlaw/dataset.hpp"
#include "mechlaw/errors.hpp"
#include "mechlaw/linalg.hpp"

namespace mechlaw {

/// Coordinates in which kernel distances are measured.
///   physical: raw (wrapped) x and v; centers are mapped back from the scaled box.
///   scaled:   the scaler's [-1, 1] coordinates.
enum class FeatureSpace { physical, scaled };

[[nodiscard]] inline std::string to_string(FeatureSpace s) {
    return s == FeatureSpace::physical ? "physical" : "scaled";
}

[[nodiscard]] inline FeatureSpace feature_space_from_string(const std::string& s) {
    if (s == "physical") return FeatureSpace::physical;
    if (s == "scaled") return FeatureSpace::scaled;
    throw InvalidInput("unknown feature space '" + s + "'");
}

/// Portable uniform draws on top of mt19937_64 (the standard distributions
/// are implementation-defined, which would break cross-toolchain determinism).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

private:
    std::mt19937_64 gen_;
};

struct BankOptions {
    std::size_t n_feat = 100;
    double w03 = 2.0;
    std::uint64_t seed = 1;
    double margin = 0.1;  // padding of the [-1, 1] sampling box, relative
    FeatureSpace space = FeatureSpace::physical;
};

struct FeatureBank {
    Matrix centers_x;  // n_feat x N
    Matrix centers_v;  // n_feat x N
    double w03 = 1.0;
    std::uint64_t seed = 0;
    double margin = 0.0;
    FeatureSpace space = FeatureSpace::physical;
    Scaler scaler;

    [[nodiscard]] std::size_t n_feat() const noexcept { return centers_x.rows(); }
    [[nodiscard]] std::size_t dim() const noexcept { return centers_x.cols(); }
};

/// Draws n_feat centers i.i.d. uniform over [-1-margin, 1+margin] per scaled
/// coordinate (degenerate coordinates collapse to their single point).
[[nodiscard]] inline FeatureBank sample_bank(const Scaler& scaler, const BankOptions& opt) {
    detail::require(opt.n_feat >= 1, "sample_bank: n_feat must be >= 1");
    detail::require(std::isfinite(opt.w03) && opt.w03 > 0.0, "sample_bank: w03 must be > 0");
    detail::require(std::isfinite(opt.margin) && opt.margin >= 0.0, "sample_bank: margin must be >= 0");
    const std::size_t n = scaler.dim();
    detail::require(n >= 1, "sample_bank: scaler has no dimensions");

    FeatureBank bank;
    bank.centers_x = Matrix(opt.n_feat, n);
    bank.centers_v = Matrix(opt.n_feat, n);
    bank.w03 = opt.w03;
    bank.seed = opt.seed;
    bank.margin = opt.margin;
    bank.space = opt.space;
    bank.scaler = scaler;

    const double lim = 1.0 + opt.margin;
    Rng rng(opt.seed);
    for (std::size_t i = 0; i < opt.n_feat; ++i) {
        Vector cx(n), cv(n);
        for (std::size_t d = 0; d < n; ++d)
            cx[d] = scaler.x_maps[d].degenerate ? 0.0 : rng.uniform(-lim, lim);
        for (std::size_t d = 0; d < n; ++d)
            cv[d] = scaler.v_maps[d].degenerate ? 0.0 : rng.uniform(-lim, lim);
        if (opt.space == FeatureSpace::physical) {
            cx = scaler.unscale_x(cx);
            cv = scaler.unscale_v(cv);
        }
        std::copy(cx.begin(), cx.end(), bank.centers_x.row(i).begin());
        std::copy(cv.begin(), cv.end(), bank.centers_v.row(i).begin());
    }
    return bank;
}

namespace detail {

/// Input coordinates as seen by the kernels (wrapped, then optionally scaled).
inline void kernel_inputs(const FeatureBank& bank, std::span<const double> x,
                          std::span<const double> v, Vector& xi, Vector& vi) {
    xi = bank.scaler.wrap.wrap(x);
    vi.assign(v.begin(), v.end());
    if (bank.space == FeatureSpace::scaled) {
        xi = bank.scaler.scale_x(xi);
        vi = bank.scaler.scale_v(vi);
    }
}

inline void features_into(const FeatureBank& bank, std::span<const double> xi,
                          std::span<const double> vi, std::span<double> out) {
    const std::size_t n = bank.dim();
    const double w2 = bank.w03 * bank.w03;
    for (std::size_t i = 0; i < bank.n_feat(); ++i) {
        auto cx = bank.centers_x.row(i);
        auto cv = bank.centers_v.row(i);
        double d2 = w2;
        for (std::size_t k = 0; k < n; ++k) {
            const double dx = xi[k] - cx[k];
            const double dv = vi[k] - cv[k];
            d2 += dx * dx + dv * dv;
        }
        out[i] = 1.0 / d2;
    }
}

}  // namespace detail

/// Hidden-layer activations at phase point (x, v).
[[nodiscard]] inline Vector features(const FeatureBank& bank, std::span<const double> x,
                                     std::span<const double> v) {
    detail::require(x.size() == bank.dim() && v.size() == bank.dim(),
                    "features: dimension mismatch");
    Vector xi, vi;
    detail::kernel_inputs(bank, x, v, xi, vi);
    Vector out(bank.n_feat());
    detail::features_into(bank, xi, vi, out);
    return out;
}

/// N_data x N_feat matrix; row n holds features(x_n, v_n).
[[nodiscard]] inline Matrix feature_matrix(const FeatureBank& bank, const Dataset& ds) {
    detail::require(ds.dim() == bank.dim(), "feature_matrix: dimension mismatch");
    Matrix f(ds.size(), bank.n_feat());
    Vector xi, vi;
    for (std::size_t n = 0; n < ds.size(); ++n) {
        detail::kernel_inputs(bank, ds.samples[n].x, ds.samples[n].v, xi, vi);
        detail::features_into(bank, xi, vi, f.row(n));
    }
    return f;
}

}  // namespace mechlaw

#pragma once

// Exact discrete-time results for the linear oscillator x'' = -omega^2 x
// sampled with step dt (k = omega * dt).

#include <cmath>

#include "mechlaw/errors.hpp"

namespace mechlaw::analytic {

struct HarmonicSpec {
    double omega = 1.0;
    double dt = 0.1;

    [[nodiscard]] double k() const noexcept { return omega * dt; }
};

/// x_{n+1} = 2 cos(k) x_n - x_{n-1}.
[[nodiscard]] inline double harmonic_step(const HarmonicSpec& s, double x_n, double x_nm1) {
    return 2.0 * std::cos(s.k()) * x_n - x_nm1;
}

/// Z(k) = 2 (1 - cos k) / k^2, with a series branch for |k| < 1e-4.
[[nodiscard]] inline double z_factor(double k) {
    const double k2 = k * k;
    if (std::abs(k) < 1e-4) return 1.0 - k2 / 12.0 + k2 * k2 / 360.0;
    return 2.0 * (1.0 - std::cos(k)) / k2;
}

/// Discrete force of the sampled oscillator: -Z(k) omega^2 x (no velocity dependence).
[[nodiscard]] inline double harmonic_discrete_force(const HarmonicSpec& s, double x) {
    return -z_factor(s.k()) * s.omega * s.omega * x;
}

/// Conserved quantity of the discrete recursion with backward-difference v:
///   1/2 ((k v - omega x (1 - cos k)) / sin k)^2 + 1/2 omega^2 x^2.
[[nodiscard]] inline double discrete_energy(const HarmonicSpec& s, double x, double v) {
    const double k = s.k();
    const double sk = std::sin(k);
    if (std::abs(sk) < 1e-12) throw InvalidInput("discrete_energy: sin(omega dt) must be non-zero");
    const double xdot = (k * v - s.omega * x * (1.0 - std::cos(k))) / sk;
    return 0.5 * xdot * xdot + 0.5 * s.omega * s.omega * x * x;
}

}  // namespace mechlaw::analytic

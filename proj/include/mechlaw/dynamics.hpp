#pragma once

// Ground-truth mechanics: equations of motion for the studied systems and
// two embedded Runge-Kutta integrators of different order (Dormand-Prince
// 8(5,3) and 5(4)) whose disagreement on chaotic systems is observable.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "mechlaw/errors.hpp"
#include "mechlaw/linalg.hpp"

namespace mechlaw {

enum class SystemKind { harmonic, gravity_pendulum, double_pendulum };

[[nodiscard]] inline std::string to_string(SystemKind k) {
    switch (k) {
        case SystemKind::harmonic: return "harmonic";
        case SystemKind::gravity_pendulum: return "gravity_pendulum";
        case SystemKind::double_pendulum: return "double_pendulum";
    }
    return "unknown";
}

[[nodiscard]] inline SystemKind system_kind_from_string(const std::string& s) {
    if (s == "harmonic") return SystemKind::harmonic;
    if (s == "gravity_pendulum") return SystemKind::gravity_pendulum;
    if (s == "double_pendulum") return SystemKind::double_pendulum;
    throw InvalidInput("unknown system kind '" + s + "'");
}

/// A mechanical system with its named parameters.
///   harmonic:         omega
///   gravity_pendulum: (none; time is rescaled so that x'' = -sin x)
///   double_pendulum:  l1, l2, m1, m2, g
struct SystemSpec {
    SystemKind kind = SystemKind::harmonic;
    std::map<std::string, double> params;
    std::vector<std::size_t> periodic_dims;

    [[nodiscard]] std::size_t dim() const noexcept {
        return kind == SystemKind::double_pendulum ? 2 : 1;
    }

    [[nodiscard]] double param(const std::string& name) const {
        auto it = params.find(name);
        if (it == params.end()) throw InvalidInput("system parameter '" + name + "' missing");
        return it->second;
    }

    void validate() const {
        auto positive = [&](const char* name) {
            const double v = param(name);
            detail::require(std::isfinite(v) && v > 0.0,
                            std::string("system parameter '") + name + "' must be > 0");
        };
        switch (kind) {
            case SystemKind::harmonic: positive("omega"); break;
            case SystemKind::gravity_pendulum: break;
            case SystemKind::double_pendulum:
                for (const char* p : {"l1", "l2", "m1", "m2", "g"}) positive(p);
                break;
        }
        for (auto d : periodic_dims)
            detail::require(d < dim(), "periodic dimension index out of range");
    }

    static SystemSpec harmonic(double omega) {
        SystemSpec s{SystemKind::harmonic, {{"omega", omega}}, {}};
        s.validate();
        return s;
    }
    static SystemSpec gravity_pendulum() { return {SystemKind::gravity_pendulum, {}, {0}}; }
    /// Parametrized by total mass M = m1 + m2 as in the usual reduced form.
    static SystemSpec double_pendulum(double l1, double l2, double total_mass, double m2, double g) {
        SystemSpec s{SystemKind::double_pendulum,
                     {{"l1", l1}, {"l2", l2}, {"m1", total_mass - m2}, {"m2", m2}, {"g", g}},
                     {0, 1}};
        s.validate();
        return s;
    }
};

/// Continuum acceleration x'' = f(x, x').
[[nodiscard]] inline Vector rhs(const SystemSpec& spec, std::span<const double> x,
                                std::span<const double> xdot) {
    const std::size_t n = spec.dim();
    detail::require(x.size() == n && xdot.size() == n, "rhs: dimension mismatch");
    switch (spec.kind) {
        case SystemKind::harmonic: {
            const double w = spec.param("omega");
            return {-w * w * x[0]};
        }
        case SystemKind::gravity_pendulum:
            return {-std::sin(x[0])};
        case SystemKind::double_pendulum: {
            const double l1 = spec.param("l1"), l2 = spec.param("l2");
            const double m2 = spec.param("m2"), g = spec.param("g");
            const double M = spec.param("m1") + m2;
            const double dphi = x[0] - x[1];
            const double c = std::cos(dphi), s = std::sin(dphi);
            const double den = M - m2 * c * c;
            const double w1sq = xdot[0] * xdot[0], w2sq = xdot[1] * xdot[1];
            const double a1 = -(g * M * std::sin(x[0]) - g * m2 * c * std::sin(x[1]) +
                                0.5 * l1 * m2 * w1sq * std::sin(2.0 * dphi) + l2 * m2 * w2sq * s) /
                              (l1 * den);
            const double a2 =
                s / (l2 * den) * (g * M * std::cos(x[0]) + l1 * M * w1sq + l2 * m2 * w2sq * c);
            return {a1, a2};
        }
    }
    return {};
}

/// Total mechanical energy of the continuum system.
[[nodiscard]] inline double continuum_energy(const SystemSpec& spec, std::span<const double> x,
                                             std::span<const double> xdot) {
    detail::require(x.size() == spec.dim() && xdot.size() == spec.dim(),
                    "continuum_energy: dimension mismatch");
    switch (spec.kind) {
        case SystemKind::harmonic: {
            const double w = spec.param("omega");
            return 0.5 * xdot[0] * xdot[0] + 0.5 * w * w * x[0] * x[0];
        }
        case SystemKind::gravity_pendulum:
            return 0.5 * xdot[0] * xdot[0] + 1.0 - std::cos(x[0]);
        case SystemKind::double_pendulum: {
            const double l1 = spec.param("l1"), l2 = spec.param("l2");
            const double m2 = spec.param("m2"), g = spec.param("g");
            const double M = spec.param("m1") + m2;
            const double kin = 0.5 * M * l1 * l1 * xdot[0] * xdot[0] +
                               0.5 * m2 * l2 * l2 * xdot[1] * xdot[1] +
                               m2 * l1 * l2 * xdot[0] * xdot[1] * std::cos(x[0] - x[1]);
            const double pot = -g * M * l1 * std::cos(x[0]) - g * m2 * l2 * std::cos(x[1]);
            return kin + pot;
        }
    }
    return 0.0;
}

/// Uniformly sampled configuration time series.
struct Trajectory {
    double dt = 0.0;
    std::vector<Vector> states;
    Vector initial_velocity;  // simulation input only; never used for training
    std::string label;

    [[nodiscard]] std::size_t size() const noexcept { return states.size(); }
    [[nodiscard]] std::size_t dim() const noexcept { return states.empty() ? 0 : states.front().size(); }

    void validate() const {
        detail::require(dt > 0.0 && std::isfinite(dt), "trajectory: dt must be positive");
        detail::require(states.size() >= 3, "trajectory '" + label + "' needs at least 3 samples");
        for (const auto& s : states)
            detail::require(s.size() == states.front().size(),
                            "trajectory '" + label + "': inconsistent state dimension");
    }
};

/// Positions and velocities on the sampling grid.
struct PhaseTrajectory {
    double dt = 0.0;
    std::vector<Vector> x;
    std::vector<Vector> v;
};

enum class IntegratorMethod { high_order, medium_order };

struct IntegratorOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    std::size_t max_steps = 50'000'000;
    /// Let the step size run free and fill the grid by Hermite interpolation
    /// between accepted steps, instead of landing a step on every sample.
    bool dense_output = false;
};

namespace detail {

using State = std::vector<double>;

inline State phase_rhs(const SystemSpec& spec, const State& y) {
    const std::size_t n = spec.dim();
    std::span<const double> ys(y);
    Vector a = rhs(spec, ys.first(n), ys.subspan(n, n));
    State out(2 * n);
    std::copy_n(y.begin() + static_cast<std::ptrdiff_t>(n), n, out.begin());
    std::copy(a.begin(), a.end(), out.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
}

// Dormand-Prince 8(5,3) tableau (12 stages + FSAL evaluation).
struct Dop853 {
    static constexpr std::size_t stages = 12;
    static constexpr double error_exponent = 1.0 / 8.0;
    static constexpr std::array<double, 12> c = {
        0.0,
        0.526001519587677318785587544488e-01,
        0.789002279381515978178381316732e-01,
        0.118350341907227396726757197510,
        0.281649658092772603273242802490,
        0.333333333333333333333333333333,
        0.25,
        0.307692307692307692307692307692,
        0.651282051282051282051282051282,
        0.6,
        0.857142857142857142857142857142,
        1.0};

    static double a(std::size_t i, std::size_t j) {
        static const auto table = [] {
            std::array<std::array<double, 12>, 13> m{};
            m[1][0] = 5.26001519587677318785587544488e-2;
            m[2][0] = 1.97250569845378994544595329183e-2;
            m[2][1] = 5.91751709536136983633785987549e-2;
            m[3][0] = 2.95875854768068491816892993775e-2;
            m[3][2] = 8.87627564304205475450678981324e-2;
            m[4][0] = 2.41365134159266685502369798665e-1;
            m[4][2] = -8.84549479328286085344864962717e-1;
            m[4][3] = 9.24834003261792003115737966543e-1;
            m[5][0] = 3.7037037037037037037037037037e-2;
            m[5][3] = 1.70828608729473871279604482173e-1;
            m[5][4] = 1.25467687566822425016691814123e-1;
            m[6][0] = 3.7109375e-2;
            m[6][3] = 1.70252211019544039314978060272e-1;
            m[6][4] = 6.02165389804559606850219397283e-2;
            m[6][5] = -1.7578125e-2;
            m[7][0] = 3.70920001185047927108779319836e-2;
            m[7][3] = 1.70383925712239993810214054705e-1;
            m[7][4] = 1.07262030446373284651809199168e-1;
            m[7][5] = -1.53194377486244017527936158236e-2;
            m[7][6] = 8.27378916381402288758473766002e-3;
            m[8][0] = 6.24110958716075717114429577812e-1;
            m[8][3] = -3.36089262944694129406857109825;
            m[8][4] = -8.68219346841726006818189891453e-1;
            m[8][5] = 2.75920996994467083049415600797e1;
            m[8][6] = 2.01540675504778934086186788979e1;
            m[8][7] = -4.34898841810699588477366255144e1;
            m[9][0] = 4.77662536438264365890433908527e-1;
            m[9][3] = -2.48811461997166764192642586468;
            m[9][4] = -5.90290826836842996371446475743e-1;
            m[9][5] = 2.12300514481811942347288949897e1;
            m[9][6] = 1.52792336328824235832596922938e1;
            m[9][7] = -3.32882109689848629194453265587e1;
            m[9][8] = -2.03312017085086261358222928593e-2;
            m[10][0] = -9.3714243008598732571704021658e-1;
            m[10][3] = 5.18637242884406370830023853209;
            m[10][4] = 1.09143734899672957818500254654;
            m[10][5] = -8.14978701074692612513997267357;
            m[10][6] = -1.85200656599969598641566180701e1;
            m[10][7] = 2.27394870993505042818970056734e1;
            m[10][8] = 2.49360555267965238987089396762;
            m[10][9] = -3.0467644718982195003823669022;
            m[11][0] = 2.27331014751653820792359768449;
            m[11][3] = -1.05344954667372501984066689879e1;
            m[11][4] = -2.00087205822486249909675718444;
            m[11][5] = -1.79589318631187989172765950534e1;
            m[11][6] = 2.79488845294199600508499808837e1;
            m[11][7] = -2.85899827713502369474065508674;
            m[11][8] = -8.87285693353062954433549289258;
            m[11][9] = 1.23605671757943030647266201528e1;
            m[11][10] = 6.43392746015763530355970484046e-1;
            // Row 12 holds the 8th-order solution weights.
            m[12][0] = 5.42937341165687622380535766363e-2;
            m[12][5] = 4.45031289275240888144113950566;
            m[12][6] = 1.89151789931450038304281599044;
            m[12][7] = -5.8012039600105847814672114227;
            m[12][8] = 3.1116436695781989440891606237e-1;
            m[12][9] = -1.52160949662516078556178806805e-1;
            m[12][10] = 2.01365400804030348374776537501e-1;
            m[12][11] = 4.47106157277725905176885569043e-2;
            return m;
        }();
        return table[i][j];
    }
    static double b(std::size_t j) { return a(12, j); }

    // Error weights over the 12 stages plus the FSAL stage (index 12).
    static double e5(std::size_t j) {
        static constexpr std::array<double, 13> w = {
            0.1312004499419488073250102996e-1, 0, 0, 0, 0,
            -0.1225156446376204440720569753e+1, -0.4957589496572501915214079952,
            0.1664377182454986536961530415e+1, -0.3503288487499736816886487290,
            0.3341791187130174790297318841, 0.8192320648511571246570742613e-1,
            -0.2235530786388629525884427845e-1, 0};
        return w[j];
    }
    static double e3(std::size_t j) {
        if (j == 12) return 0.0;
        double w = b(j);
        if (j == 0) w -= 0.244094488188976377952755905512;
        if (j == 8) w -= 0.733846688281611857341361741547;
        if (j == 11) w -= 0.220588235294117647058823529412e-1;
        return w;
    }
};

// Dormand-Prince 5(4).
struct Dopri5 {
    static constexpr std::size_t stages = 6;
    static constexpr double error_exponent = 1.0 / 5.0;
    static constexpr std::array<double, 6> c = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0};
    static double a(std::size_t i, std::size_t j) {
        static constexpr double m[6][5] = {
            {0, 0, 0, 0, 0},
            {1.0 / 5, 0, 0, 0, 0},
            {3.0 / 40, 9.0 / 40, 0, 0, 0},
            {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0},
            {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0},
            {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656}};
        return m[i][j];
    }
    static double b(std::size_t j) {
        static constexpr double w[6] = {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784,
                                        11.0 / 84};
        return w[j];
    }
    // b - b_hat over the 6 stages plus the FSAL stage (index 6).
    static double e(std::size_t j) {
        static constexpr double w[7] = {71.0 / 57600,      0, -71.0 / 16695, 71.0 / 1920,
                                        -17253.0 / 339200, 22.0 / 525, -1.0 / 40};
        return w[j];
    }
};

struct StepResult {
    State y;
    State f_new;
    double err = 0.0;  // scaled error norm, accept when <= 1
};

template <class Tableau>
StepResult rk_step(const SystemSpec& spec, const State& y, const State& f0, double h,
                   const IntegratorOptions& opt) {
    const std::size_t n = y.size();
    std::vector<State> k(Tableau::stages + 1);
    k[0] = f0;
    State tmp(n);
    for (std::size_t s = 1; s < Tableau::stages; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < s; ++j) acc += Tableau::a(s, j) * k[j][i];
            tmp[i] = y[i] + h * acc;
        }
        k[s] = phase_rhs(spec, tmp);
    }
    StepResult r;
    r.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < Tableau::stages; ++j) acc += Tableau::b(j) * k[j][i];
        r.y[i] = y[i] + h * acc;
    }
    r.f_new = phase_rhs(spec, r.y);
    k[Tableau::stages] = r.f_new;

    auto scale = [&](std::size_t i) {
        return opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(r.y[i]));
    };
    if constexpr (Tableau::stages == 12) {
        double n5 = 0.0, n3 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s5 = 0.0, s3 = 0.0;
            for (std::size_t j = 0; j <= 12; ++j) {
                s5 += Tableau::e5(j) * k[j][i];
                s3 += Tableau::e3(j) * k[j][i];
            }
            s5 /= scale(i);
            s3 /= scale(i);
            n5 += s5 * s5;
            n3 += s3 * s3;
        }
        if (n5 == 0.0 && n3 == 0.0) {
            r.err = 0.0;
        } else {
            r.err = std::abs(h) * n5 / std::sqrt((n5 + 0.01 * n3) * static_cast<double>(n));
        }
    } else {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j <= Tableau::stages; ++j) s += Tableau::e(j) * k[j][i];
            s = h * s / scale(i);
            acc += s * s;
        }
        r.err = std::sqrt(acc / static_cast<double>(n));
    }
    return r;
}

template <class Tableau>
PhaseTrajectory integrate_grid(const SystemSpec& spec, const State& y0, std::size_t samples,
                               double dt, const IntegratorOptions& opt) {
    const std::size_t n = spec.dim();
    PhaseTrajectory out;
    out.dt = dt;
    auto record = [&](const State& y) {
        out.x.emplace_back(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
        out.v.emplace_back(y.begin() + static_cast<std::ptrdiff_t>(n), y.end());
    };

    State y = y0;
    State f = phase_rhs(spec, y);
    record(y);
    double t = 0.0;
    double h = std::min(dt, 1e-2);
    std::size_t steps = 0;
    constexpr double safety = 0.9, min_factor = 0.2, max_factor = 10.0;

    if (opt.dense_output) {
        const double t_final = static_cast<double>(samples - 1) * dt;
        std::size_t k = 1;
        while (k < samples) {
            if (++steps > opt.max_steps) throw DivergenceError("integrate: step budget exhausted", t);
            bool last = false;
            double h_try = h;
            if (t + h_try >= t_final) {
                h_try = t_final - t;
                last = true;
            }
            if (h_try < 1e-14 * std::max(1.0, std::abs(t)))
                throw DivergenceError("integrate: step size underflow", t);
            StepResult r = rk_step<Tableau>(spec, y, f, h_try, opt);
            bool finite = std::isfinite(r.err);
            for (double v : r.y) finite = finite && std::isfinite(v);
            if (!finite) {
                if (h_try < 1e-10) throw DivergenceError("integrate: non-finite state", t);
                h = 0.25 * h_try;
                continue;
            }
            if (r.err > 1.0) {
                h = h_try * std::max(min_factor, safety * std::pow(r.err, -Tableau::error_exponent));
                continue;
            }
            const double t_new = last ? t_final : t + h_try;
            // Samples inside (t, t_new]: quintic Hermite for x (x, x', x'' at both
            // ends), cubic Hermite for v (v, v' at both ends).
            while (k < samples && static_cast<double>(k) * dt <= t_new + 1e-12 * dt) {
                const double tk = std::min(static_cast<double>(k) * dt, t_new);
                if (tk == t_new) {
                    record(r.y);
                } else {
                    const double hs = t_new - t;
                    const double s = (tk - t) / hs, s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
                    const double h00 = 1 - 10 * s3 + 15 * s4 - 6 * s5, h01 = 10 * s3 - 15 * s4 + 6 * s5;
                    const double h10 = s - 6 * s3 + 8 * s4 - 3 * s5, h11 = -4 * s3 + 7 * s4 - 3 * s5;
                    const double h20 = 0.5 * (s2 - 3 * s3 + 3 * s4 - s5), h21 = 0.5 * (s3 - 2 * s4 + s5);
                    const double c00 = 1 - 3 * s2 + 2 * s3, c01 = 3 * s2 - 2 * s3;
                    const double c10 = s - 2 * s2 + s3, c11 = -s2 + s3;
                    State yi(2 * n);
                    for (std::size_t i = 0; i < n; ++i) {
                        yi[i] = h00 * y[i] + h01 * r.y[i] + hs * (h10 * f[i] + h11 * r.f_new[i]) +
                                hs * hs * (h20 * f[n + i] + h21 * r.f_new[n + i]);
                        yi[n + i] = c00 * y[n + i] + c01 * r.y[n + i] +
                                    hs * (c10 * f[n + i] + c11 * r.f_new[n + i]);
                    }
                    record(yi);
                }
                ++k;
            }
            t = t_new;
            y = std::move(r.y);
            f = std::move(r.f_new);
            const double factor =
                r.err == 0.0 ? max_factor
                             : std::clamp(safety * std::pow(r.err, -Tableau::error_exponent), min_factor,
                                          max_factor);
            if (!last) h = h_try * factor;
        }
        return out;
    }

    for (std::size_t k = 1; k < samples; ++k) {
        const double t_target = static_cast<double>(k) * dt;
        while (t < t_target) {
            if (++steps > opt.max_steps) throw DivergenceError("integrate: step budget exhausted", t);
            bool last = false;
            double h_try = h;
            if (t + h_try >= t_target) {
                h_try = t_target - t;
                last = true;
            }
            if (h_try < 1e-14 * std::max(1.0, std::abs(t)))
                throw DivergenceError("integrate: step size underflow", t);

            StepResult r = rk_step<Tableau>(spec, y, f, h_try, opt);
            bool finite = std::isfinite(r.err);
            for (double v : r.y) finite = finite && std::isfinite(v);
            if (!finite) {
                if (h_try < 1e-10) throw DivergenceError("integrate: non-finite state", t);
                h = 0.25 * h_try;
                continue;
            }
            if (r.err <= 1.0) {
                t = last ? t_target : t + h_try;
                y = std::move(r.y);
                f = std::move(r.f_new);
                const double factor =
                    r.err == 0.0 ? max_factor
                                 : std::clamp(safety * std::pow(r.err, -Tableau::error_exponent),
                                              1.0, max_factor);
                // A grid-clipped step says nothing about the sustainable size.
                h = last ? std::max(h, h_try * factor) : h_try * factor;
            } else {
                h = h_try * std::max(min_factor, safety * std::pow(r.err, -Tableau::error_exponent));
            }
        }
        record(y);
    }
    return out;
}

}  // namespace detail

/// Number of grid samples t = 0, dt, ..., covering [0, t_end].
[[nodiscard]] inline std::size_t grid_samples(double t_end, double dt) {
    return static_cast<std::size_t>(std::floor(t_end / dt + 1e-9)) + 1;
}

/// Integrates x'' = rhs(x, x') and returns positions and velocities exactly on the grid.
[[nodiscard]] inline PhaseTrajectory integrate_phase(const SystemSpec& spec,
                                                     std::span<const double> x0,
                                                     std::span<const double> v0, double t_end,
                                                     double dt, IntegratorMethod method,
                                                     const IntegratorOptions& opt = {}) {
    spec.validate();
    const std::size_t n = spec.dim();
    detail::require(x0.size() == n && v0.size() == n, "integrate: initial state dimension mismatch");
    detail::require(std::isfinite(dt) && dt > 0.0, "integrate: dt must be > 0");
    detail::require(std::isfinite(t_end) && t_end >= 3.0 * dt - 1e-12,
                    "integrate: t_end must be >= 3*dt");
    detail::require(opt.rtol > 0.0 && opt.atol >= 0.0, "integrate: tolerances must be positive");

    detail::State y0(x0.begin(), x0.end());
    y0.insert(y0.end(), v0.begin(), v0.end());
    const std::size_t samples = grid_samples(t_end, dt);
    if (method == IntegratorMethod::high_order)
        return detail::integrate_grid<detail::Dop853>(spec, y0, samples, dt, opt);
    return detail::integrate_grid<detail::Dopri5>(spec, y0, samples, dt, opt);
}

[[nodiscard]] inline Trajectory integrate(const SystemSpec& spec, std::span<const double> x0,
                                          std::span<const double> v0, double t_end, double dt,
                                          IntegratorMethod method,
                                          const IntegratorOptions& opt = {},
                                          std::string label = {}) {
    PhaseTrajectory p = integrate_phase(spec, x0, v0, t_end, dt, method, opt);
    Trajectory tr;
    tr.dt = dt;
    tr.states = std::move(p.x);
    tr.initial_velocity.assign(v0.begin(), v0.end());
    tr.label = std::move(label);
    return tr;
}

}  // namespace mechlaw

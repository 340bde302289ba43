#pragma once

// Training data: (x, v, a) triplets built from uniformly sampled
// trajectories with backward-difference velocity and central-difference
// acceleration proxies, plus the affine map onto [-1, 1].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mechlaw/dynamics.hpp"
#include "mechlaw/errors.hpp"
#include "mechlaw/linalg.hpp"

namespace mechlaw {

/// Reduces an angle into (-pi, pi].
[[nodiscard]] inline double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::remainder(a, two_pi);
    if (r <= -std::numbers::pi) r += two_pi;
    return r;
}

/// Per-dimension periodicity flags; applies wrapping and shortest-arc differences.
struct WrapFlags {
    std::vector<bool> flags;

    [[nodiscard]] std::size_t size() const noexcept { return flags.size(); }
    [[nodiscard]] bool operator[](std::size_t i) const { return i < flags.size() && flags[i]; }

    [[nodiscard]] Vector wrap(std::span<const double> x) const {
        Vector out(x.begin(), x.end());
        for (std::size_t i = 0; i < out.size(); ++i)
            if ((*this)[i]) out[i] = wrap_angle(out[i]);
        return out;
    }

    /// a - b, taken along the shortest arc on periodic dimensions.
    [[nodiscard]] Vector difference(std::span<const double> a, std::span<const double> b) const {
        Vector d(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            d[i] = a[i] - b[i];
            if ((*this)[i]) d[i] = wrap_angle(d[i]);
        }
        return d;
    }

    static WrapFlags none(std::size_t dim) { return {std::vector<bool>(dim, false)}; }
    static WrapFlags from_dims(std::size_t dim, std::span<const std::size_t> periodic) {
        WrapFlags w = none(dim);
        for (auto d : periodic) {
            detail::require(d < dim, "wrap: periodic dimension out of range");
            w.flags[d] = true;
        }
        return w;
    }

    friend bool operator==(const WrapFlags&, const WrapFlags&) = default;
};

/// One (x, v, a) training triplet at step n of trajectory traj_id.
struct PhaseSample {
    Vector x;
    Vector v;  // (x_n - x_{n-1}) / dt
    Vector a;  // (x_{n+1} - 2 x_n + x_{n-1}) / dt^2
    std::size_t traj_id = 0;
    std::size_t step = 0;
};

/// Affine map of one coordinate: scaled = (value + offset) * gain.
struct AffineMap {
    double offset = 0.0;
    double gain = 1.0;
    bool degenerate = false;  // zero-width range: maps everything to 0

    [[nodiscard]] double apply(double value) const { return (value + offset) * gain; }
    [[nodiscard]] double invert(double scaled) const {
        return degenerate ? -offset : scaled / gain - offset;
    }

    /// Maps [lo, hi] onto [-1, 1].
    static AffineMap from_range(double lo, double hi) {
        AffineMap m;
        m.offset = -0.5 * (lo + hi);
        if (hi > lo) {
            m.gain = 2.0 / (hi - lo);
        } else {
            m.gain = 0.0;
            m.degenerate = true;
        }
        return m;
    }

    friend bool operator==(const AffineMap&, const AffineMap&) = default;
};

/// Maps phase points (x, v) into [-1, 1]^(2N) over the training data.
struct Scaler {
    std::vector<AffineMap> x_maps;
    std::vector<AffineMap> v_maps;
    WrapFlags wrap;

    [[nodiscard]] std::size_t dim() const noexcept { return x_maps.size(); }

    [[nodiscard]] Vector scale_x(std::span<const double> x) const {
        detail::require(x.size() == dim(), "scaler: x dimension mismatch");
        Vector out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = x_maps[i].apply(x[i]);
        return out;
    }
    [[nodiscard]] Vector scale_v(std::span<const double> v) const {
        detail::require(v.size() == dim(), "scaler: v dimension mismatch");
        Vector out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = v_maps[i].apply(v[i]);
        return out;
    }
    [[nodiscard]] Vector unscale_x(std::span<const double> xs) const {
        Vector out(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) out[i] = x_maps.at(i).invert(xs[i]);
        return out;
    }
    [[nodiscard]] Vector unscale_v(std::span<const double> vs) const {
        Vector out(vs.size());
        for (std::size_t i = 0; i < vs.size(); ++i) out[i] = v_maps.at(i).invert(vs[i]);
        return out;
    }

    /// Physical width of the training range of each velocity component.
    [[nodiscard]] Vector v_range() const {
        Vector r(dim());
        for (std::size_t i = 0; i < dim(); ++i)
            r[i] = v_maps[i].degenerate ? 0.0 : 2.0 / v_maps[i].gain;
        return r;
    }

    friend bool operator==(const Scaler&, const Scaler&) = default;
};

/// Immutable training set.
struct Dataset {
    std::vector<PhaseSample> samples;
    double dt = 0.0;
    Scaler scaler;
    /// [begin, end) sample index range of each trajectory that contributed samples.
    std::vector<std::pair<std::size_t, std::size_t>> boundaries;
    WrapFlags wrap;
    std::size_t skipped_trajectories = 0;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    [[nodiscard]] std::size_t dim() const noexcept {
        return samples.empty() ? 0 : samples.front().x.size();
    }

    /// N_data x N matrix of acceleration proxies.
    [[nodiscard]] Matrix accelerations() const {
        Matrix a(size(), dim());
        for (std::size_t n = 0; n < size(); ++n)
            std::copy(samples[n].a.begin(), samples[n].a.end(), a.row(n).begin());
        return a;
    }
};

/// Per-dimension min/max of x and v over the samples mapped onto [-1, 1].
[[nodiscard]] inline Scaler fit_scaler(const Dataset& ds) {
    detail::require(!ds.samples.empty(), "fit_scaler: empty dataset");
    const std::size_t n = ds.dim();
    Vector xlo(n, HUGE_VAL), xhi(n, -HUGE_VAL), vlo(n, HUGE_VAL), vhi(n, -HUGE_VAL);
    for (const auto& s : ds.samples) {
        for (std::size_t i = 0; i < n; ++i) {
            xlo[i] = std::min(xlo[i], s.x[i]);
            xhi[i] = std::max(xhi[i], s.x[i]);
            vlo[i] = std::min(vlo[i], s.v[i]);
            vhi[i] = std::max(vhi[i], s.v[i]);
        }
    }
    Scaler sc;
    sc.wrap = ds.wrap;
    for (std::size_t i = 0; i < n; ++i) {
        sc.x_maps.push_back(AffineMap::from_range(xlo[i], xhi[i]));
        sc.v_maps.push_back(AffineMap::from_range(vlo[i], vhi[i]));
    }
    return sc;
}

/// Builds one sample per interior index of every trajectory. Trajectories
/// shorter than 3 samples are skipped and counted; periodic dimensions are
/// wrapped into (-pi, pi] and differenced along the shortest arc.
[[nodiscard]] inline Dataset build_dataset(std::span<const Trajectory> trajs, const WrapFlags& wrap) {
    detail::require(!trajs.empty(), "build_dataset: no trajectories");
    Dataset ds;
    ds.wrap = wrap;
    std::size_t dim = 0;
    for (std::size_t t = 0; t < trajs.size(); ++t) {
        const Trajectory& tr = trajs[t];
        detail::require(std::isfinite(tr.dt) && tr.dt > 0.0, "build_dataset: dt must be positive");
        if (ds.dt == 0.0) {
            ds.dt = tr.dt;
        } else if (std::abs(tr.dt - ds.dt) > 1e-12 * ds.dt) {
            throw InvalidInput("build_dataset: mixed dt values (" + std::to_string(ds.dt) + " vs " +
                               std::to_string(tr.dt) + " in '" + tr.label + "')");
        }
        if (!tr.states.empty()) {
            if (dim == 0) dim = tr.states.front().size();
            for (const auto& s : tr.states)
                detail::require(s.size() == dim, "build_dataset: inconsistent dimensions");
        }
        if (tr.states.size() < 3) {
            ++ds.skipped_trajectories;
            continue;
        }
    }
    detail::require(dim > 0, "build_dataset: zero-dimensional states");
    detail::require(wrap.size() == 0 || wrap.size() == dim, "build_dataset: wrap flag count mismatch");
    if (ds.wrap.size() == 0) ds.wrap = WrapFlags::none(dim);

    const double dt = ds.dt;
    const double dt2 = dt * dt;
    for (std::size_t t = 0; t < trajs.size(); ++t) {
        const auto& st = trajs[t].states;
        if (st.size() < 3) continue;
        const std::size_t begin = ds.samples.size();
        for (std::size_t n = 1; n + 1 < st.size(); ++n) {
            PhaseSample s;
            s.traj_id = t;
            s.step = n;
            s.x = ds.wrap.wrap(st[n]);
            s.v.resize(dim);
            s.a.resize(dim);
            for (std::size_t i = 0; i < dim; ++i) {
                if (ds.wrap[i]) {
                    const double back = wrap_angle(st[n][i] - st[n - 1][i]);
                    const double fwd = wrap_angle(st[n + 1][i] - st[n][i]);
                    s.v[i] = back / dt;
                    s.a[i] = (fwd - back) / dt2;
                } else {
                    s.v[i] = (st[n][i] - st[n - 1][i]) / dt;
                    s.a[i] = (st[n + 1][i] - 2.0 * st[n][i] + st[n - 1][i]) / dt2;
                }
            }
            ds.samples.push_back(std::move(s));
        }
        ds.boundaries.emplace_back(begin, ds.samples.size());
    }
    detail::require(!ds.samples.empty(), "build_dataset: no trajectory has at least 3 samples");
    ds.scaler = fit_scaler(ds);
    return ds;
}

}  // namespace mechlaw

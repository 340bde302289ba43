#pragma once

// Figures of merit. Definitions:
//   force precision         100 * (1 - |F_pred - a|_2 / |a|_2), floored at 0
//   conservation precision  pooled within-trajectory std of C / pooled |mean C|
//   reconstruction error    100 * RMS(x_rec - x_true) / RMS(x_true - mean x_true)
//   divergence time         first t with max_i |x_a,i - x_b,i| > threshold

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mechlaw/dataset.hpp"
#include "mechlaw/dynamics.hpp"
#include "mechlaw/errors.hpp"
#include "mechlaw/feature_bank.hpp"
#include "mechlaw/law_extractor.hpp"
#include "mechlaw/linalg.hpp"

namespace mechlaw {

[[nodiscard]] inline double force_precision(const Matrix& pred, const Matrix& a) {
    detail::require(pred.rows() == a.rows() && pred.cols() == a.cols(),
                    "force_precision: shape mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double d = pred.data()[i] - a.data()[i];
        num += d * d;
        den += a.data()[i] * a.data()[i];
    }
    detail::require(den > 0.0, "force_precision: reference accelerations are all zero");
    return std::max(0.0, 100.0 * (1.0 - std::sqrt(num / den)));
}

/// force_precision restricted to one column.
[[nodiscard]] inline double force_precision_component(const Matrix& pred, const Matrix& a,
                                                      std::size_t c) {
    Matrix p(a.rows(), 1), r(a.rows(), 1);
    for (std::size_t n = 0; n < a.rows(); ++n) {
        p(n, 0) = pred(n, c);
        r(n, 0) = a(n, c);
    }
    return force_precision(p, r);
}

struct LawConservation {
    Vector mean_per_traj;
    double pooled_std = 0.0;
    double pooled_abs_mean = 0.0;
    /// pooled_std / pooled_abs_mean; absent when the mean vanishes.
    std::optional<double> normalized;
    /// running[t][b]: mean of C over bin b of trajectory t divided by the trajectory mean.
    std::vector<Vector> running;
};

/// Statistics of a series C_n split into trajectories. Pooled |mean| is the
/// sample-weighted average of |per-trajectory mean|.
[[nodiscard]] inline LawConservation conservation_of_series(std::span<const double> c,
                                                            const Boundaries& boundaries,
                                                            std::size_t bin = 50) {
    detail::require(!c.empty(), "conservation: empty series");
    LawConservation out;
    double ss = 0.0, abs_mean = 0.0;
    std::size_t total = 0;
    for (auto [b, e] : boundaries) {
        detail::require(b <= e && e <= c.size(), "conservation: boundary out of range");
        if (e == b) continue;
        const double len = static_cast<double>(e - b);
        double m = 0.0;
        for (std::size_t n = b; n < e; ++n) m += c[n];
        m /= len;
        for (std::size_t n = b; n < e; ++n) ss += (c[n] - m) * (c[n] - m);
        abs_mean += std::abs(m) * len;
        total += e - b;
        out.mean_per_traj.push_back(m);

        Vector run;
        for (std::size_t s = b; s < e; s += bin) {
            const std::size_t stop = std::min(e, s + bin);
            double bm = 0.0;
            for (std::size_t n = s; n < stop; ++n) bm += c[n];
            bm /= static_cast<double>(stop - s);
            run.push_back(m != 0.0 ? bm / m : bm);
        }
        out.running.push_back(std::move(run));
    }
    detail::require(total > 0, "conservation: no samples inside the boundaries");
    out.pooled_std = std::sqrt(ss / static_cast<double>(total));
    out.pooled_abs_mean = abs_mean / static_cast<double>(total);
    if (out.pooled_abs_mean > 0.0) out.normalized = out.pooled_std / out.pooled_abs_mean;
    return out;
}

/// Per-law conservation statistics of a trained model over a dataset.
[[nodiscard]] inline std::vector<LawConservation> conservation_report(const LawModel& m,
                                                                      const Dataset& ds) {
    detail::require(!ds.samples.empty(), "conservation_report: empty dataset");
    const Matrix f = feature_matrix(m.bank, ds);
    std::vector<LawConservation> out;
    for (const auto& law : m.laws) {
        const Vector c = multiply(f, law.weights);
        out.push_back(conservation_of_series(c, ds.boundaries));
    }
    return out;
}

struct ReconstructionError {
    Vector per_dim;  // percent
    double pooled = 0.0;
};

/// Compares two equally sampled trajectories; periodic dimensions are
/// differenced along the shortest arc.
[[nodiscard]] inline ReconstructionError reconstruction_error(const Trajectory& recon,
                                                              const Trajectory& truth,
                                                              const WrapFlags& wrap = {}) {
    detail::require(recon.size() == truth.size() && !truth.states.empty(),
                    "reconstruction_error: length mismatch");
    detail::require(std::abs(recon.dt - truth.dt) <= 1e-12 * truth.dt,
                    "reconstruction_error: dt mismatch");
    const std::size_t n = truth.dim();
    const double len = static_cast<double>(truth.size());
    Vector mean(n, 0.0);
    for (const auto& s : truth.states)
        for (std::size_t i = 0; i < n; ++i) mean[i] += s[i] / len;
    Vector num(n, 0.0), den(n, 0.0);
    for (std::size_t k = 0; k < truth.size(); ++k) {
        const Vector d = wrap.difference(recon.states[k], truth.states[k]);
        for (std::size_t i = 0; i < n; ++i) {
            num[i] += d[i] * d[i];
            const double t = truth.states[k][i] - mean[i];
            den[i] += t * t;
        }
    }
    ReconstructionError out;
    double tn = 0.0, td = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        detail::require(den[i] > 0.0, "reconstruction_error: reference trajectory is constant");
        out.per_dim.push_back(100.0 * std::sqrt(num[i] / den[i]));
        tn += num[i];
        td += den[i];
    }
    out.pooled = 100.0 * std::sqrt(tn / td);
    return out;
}

/// First sample time at which the two trajectories differ by more than
/// `threshold` in any coordinate; compared over the common prefix.
[[nodiscard]] inline std::optional<double> divergence_time(const Trajectory& a, const Trajectory& b,
                                                           double threshold) {
    detail::require(std::abs(a.dt - b.dt) <= 1e-12 * std::max(a.dt, b.dt),
                    "divergence_time: dt mismatch");
    detail::require(a.dim() == b.dim(), "divergence_time: dimension mismatch");
    const std::size_t len = std::min(a.size(), b.size());
    for (std::size_t k = 0; k < len; ++k) {
        double worst = 0.0;
        for (std::size_t i = 0; i < a.dim(); ++i)
            worst = std::max(worst, std::abs(a.states[k][i] - b.states[k][i]));
        if (worst > threshold) return static_cast<double>(k) * a.dt;
    }
    return std::nullopt;
}

/// Flat key-value summary of a run.
struct Report {
    std::map<std::string, std::string> entries;

    void set(const std::string& key, double value) {
        std::ostringstream os;
        os.precision(17);
        os << value;
        entries[key] = os.str();
    }
    void set(const std::string& key, const std::string& value) { entries[key] = value; }

    [[nodiscard]] std::string to_text() const {
        std::string out;
        for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
        return out;
    }
};

}  // namespace mechlaw

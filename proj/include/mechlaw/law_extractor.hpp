#pragma once

// Last-layer training on a fixed feature matrix F (N_data x N_feat):
//   conserved laws  - unit vectors w minimizing |dF w|^2 with
//                     dF_n = F_n - F_{n+k} inside one trajectory, i.e. the
//                     smallest-eigenvalue eigenvectors of dF^T dF;
//   discrete force  - least squares F w = a through the eigen-decomposition
//                     of F^T F, dropping modes with lambda / lambda_max <= eps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mechlaw/dataset.hpp"
#include "mechlaw/errors.hpp"
#include "mechlaw/feature_bank.hpp"
#include "mechlaw/linalg.hpp"

namespace mechlaw {

using Boundaries = std::vector<std::pair<std::size_t, std::size_t>>;

struct ConservedLaw {
    Vector weights;       // unit norm
    double eigenvalue = 0.0;
    double sigma = 0.0;   // pooled within-trajectory standard deviation of C_n
    double sigma_worst = 0.0;  // largest per-trajectory standard deviation
    Vector mean_per_traj;
};

struct ForceModel {
    Matrix weights;  // N_feat x N, one column per acceleration component
    double cutoff_eps = 1e-10;
    std::size_t spectrum_kept = 0;
    Vector training_residual;  // |F w - a| / |a| per component
};

struct LawModel {
    FeatureBank bank;
    std::vector<ConservedLaw> laws;
    ForceModel force;
    double dt = 0.0;
    std::uint64_t seed = 0;
    std::string config_hash;

    [[nodiscard]] std::size_t dim() const noexcept { return bank.dim(); }
    [[nodiscard]] const WrapFlags& wrap() const noexcept { return bank.scaler.wrap; }
};

/// Rows F_n - F_{n+k} for every pair that stays inside one trajectory.
[[nodiscard]] inline Matrix difference_rows(const Matrix& f, const Boundaries& boundaries,
                                            std::size_t k_sep) {
    detail::require(k_sep >= 1, "extract_conserved: k_sep must be >= 1");
    std::size_t count = 0;
    for (auto [b, e] : boundaries) {
        detail::require(b <= e && e <= f.rows(), "extract_conserved: boundary out of range");
        if (e - b > k_sep) count += e - b - k_sep;
    }
    detail::require(count > 0, "extract_conserved: no valid row pairs for this k_sep");
    Matrix df(count, f.cols());
    std::size_t r = 0;
    for (auto [b, e] : boundaries) {
        for (std::size_t n = b; n + k_sep < e; ++n, ++r) {
            auto a = f.row(n);
            auto c = f.row(n + k_sep);
            auto out = df.row(r);
            for (std::size_t i = 0; i < f.cols(); ++i) out[i] = a[i] - c[i];
        }
    }
    return df;
}

/// Fills the per-trajectory statistics of C_n = F_n . w.
inline void law_statistics(ConservedLaw& law, const Matrix& f, const Boundaries& boundaries) {
    const Vector c = multiply(f, law.weights);
    law.mean_per_traj.clear();
    double ss = 0.0;
    std::size_t total = 0;
    law.sigma_worst = 0.0;
    for (auto [b, e] : boundaries) {
        if (e <= b) {
            law.mean_per_traj.push_back(0.0);
            continue;
        }
        double m = 0.0;
        for (std::size_t n = b; n < e; ++n) m += c[n];
        m /= static_cast<double>(e - b);
        double s = 0.0;
        for (std::size_t n = b; n < e; ++n) s += (c[n] - m) * (c[n] - m);
        ss += s;
        total += e - b;
        law.mean_per_traj.push_back(m);
        law.sigma_worst = std::max(law.sigma_worst, std::sqrt(s / static_cast<double>(e - b)));
    }
    law.sigma = total > 0 ? std::sqrt(ss / static_cast<double>(total)) : 0.0;
}

/// The n_laws smallest-eigenvalue directions of dF^T dF, ascending.
[[nodiscard]] inline std::vector<ConservedLaw> extract_conserved(const Matrix& f,
                                                                 const Boundaries& boundaries,
                                                                 std::size_t k_sep,
                                                                 std::size_t n_laws) {
    detail::require(n_laws >= 1, "extract_conserved: n_laws must be >= 1");
    detail::require(n_laws <= f.cols(), "extract_conserved: n_laws exceeds N_feat");
    const Matrix df = difference_rows(f, boundaries, k_sep);
    const SymmetricEigen eig = symmetric_eigen(gram(df));

    std::vector<ConservedLaw> laws;
    for (std::size_t k = 0; k < n_laws; ++k) {
        ConservedLaw law;
        auto r = eig.vectors.row(k);
        law.weights.assign(r.begin(), r.end());
        const double nrm = norm2(law.weights);
        for (double& w : law.weights) w /= nrm;
        // Sign is arbitrary; fix it so the law is positive on average.
        const Vector c = multiply(f, law.weights);
        double sum = 0.0;
        for (double v : c) sum += v;
        if (sum < 0.0)
            for (double& w : law.weights) w = -w;
        law.eigenvalue = std::max(eig.values[k], 0.0);
        law_statistics(law, f, boundaries);
        laws.push_back(std::move(law));
    }
    return laws;
}

/// Least-squares force weights via the cut-off pseudoinverse of F^T F.
[[nodiscard]] inline ForceModel fit_force(const Matrix& f, const Matrix& a, double eps = 1e-10) {
    detail::require(f.rows() == a.rows(), "fit_force: row count mismatch between F and a");
    detail::require(f.rows() > 0 && f.cols() > 0 && a.cols() > 0, "fit_force: empty input");
    detail::require(eps > 0.0 && eps < 1.0, "fit_force: eps must be in (0, 1)");

    const SymmetricEigen eig = symmetric_eigen(gram(f));
    const double lmax = eig.values.back();
    if (!(lmax > 0.0)) throw DegenerateModel("fit_force: F^T F has no positive eigenvalue");

    const Matrix fta = multiply_transposed(f, a);  // N_feat x N
    const std::size_t p = f.cols();
    const std::size_t comps = a.cols();
    ForceModel model;
    model.cutoff_eps = eps;
    model.weights = Matrix(p, comps);
    for (std::size_t k = 0; k < p; ++k) {
        const double lam = eig.values[k];
        if (!(lam / lmax > eps)) continue;
        ++model.spectrum_kept;
        auto r = eig.vectors.row(k);
        for (std::size_t c = 0; c < comps; ++c) {
            double proj = 0.0;
            for (std::size_t i = 0; i < p; ++i) proj += r[i] * fta(i, c);
            const double coef = proj / lam;
            for (std::size_t i = 0; i < p; ++i) model.weights(i, c) += coef * r[i];
        }
    }
    if (model.spectrum_kept == 0) throw DegenerateModel("fit_force: every mode is below the cutoff");

    const Matrix pred = multiply(f, model.weights);
    model.training_residual.assign(comps, 0.0);
    for (std::size_t c = 0; c < comps; ++c) {
        double num = 0.0, den = 0.0;
        for (std::size_t n = 0; n < f.rows(); ++n) {
            const double d = pred(n, c) - a(n, c);
            num += d * d;
            den += a(n, c) * a(n, c);
        }
        model.training_residual[c] = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
    }
    return model;
}

struct TrainOptions {
    BankOptions bank;
    std::size_t n_laws = 2;
    std::size_t k_sep = 10;
    double cutoff_eps = 1e-10;
};

/// Samples the feature bank over the dataset's range and fits laws and force.
[[nodiscard]] inline LawModel train(const Dataset& ds, const TrainOptions& opt) {
    detail::require(!ds.samples.empty(), "train: empty dataset");
    LawModel m;
    m.bank = sample_bank(ds.scaler, opt.bank);
    m.dt = ds.dt;
    m.seed = opt.bank.seed;
    const Matrix f = feature_matrix(m.bank, ds);
    m.force = fit_force(f, ds.accelerations(), opt.cutoff_eps);
    m.laws = extract_conserved(f, ds.boundaries, opt.k_sep, opt.n_laws);
    return m;
}

/// C = features(x, v) . w for law `index`.
[[nodiscard]] inline double evaluate_law(const LawModel& m, std::size_t index,
                                         std::span<const double> x, std::span<const double> v) {
    if (index >= m.laws.size()) throw InvalidInput("evaluate_law: law index out of range");
    return dot(features(m.bank, x, v), m.laws[index].weights);
}

/// All law values from a single feature evaluation.
[[nodiscard]] inline Vector evaluate_laws(const LawModel& m, std::span<const double> x,
                                          std::span<const double> v) {
    const Vector h = features(m.bank, x, v);
    Vector c(m.laws.size());
    for (std::size_t k = 0; k < m.laws.size(); ++k) c[k] = dot(h, m.laws[k].weights);
    return c;
}

/// Learned discrete force f = W^T features(x, v).
[[nodiscard]] inline Vector evaluate_force(const LawModel& m, std::span<const double> x,
                                           std::span<const double> v) {
    const Vector h = features(m.bank, x, v);
    const Matrix& w = m.force.weights;
    detail::require(w.rows() == h.size(), "evaluate_force: weight/feature size mismatch");
    Vector out(w.cols(), 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t c = 0; c < w.cols(); ++c) out[c] += w(i, c) * h[i];
    return out;
}

}  // namespace mechlaw

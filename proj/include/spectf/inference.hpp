#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "spectf/admm.hpp"
#include "spectf/errors.hpp"
#include "spectf/models.hpp"
#include "spectf/parallel.hpp"
#include "spectf/random.hpp"

namespace spectf {

enum class AuxiliaryLaw { Mammen, Rademacher, UniformSqrt3 };

inline std::string to_string(AuxiliaryLaw law) {
    switch (law) {
        case AuxiliaryLaw::Mammen: return "mammen";
        case AuxiliaryLaw::Rademacher: return "rademacher";
        case AuxiliaryLaw::UniformSqrt3: return "uniform";
    }
    return "mammen";
}

inline AuxiliaryLaw auxiliary_law_from_string(const std::string& s) {
    if (s == "mammen") return AuxiliaryLaw::Mammen;
    if (s == "rademacher") return AuxiliaryLaw::Rademacher;
    if (s == "uniform") return AuxiliaryLaw::UniformSqrt3;
    throw DataError("unknown auxiliary law '" + s + "' (expected mammen, rademacher or uniform)");
}

/// Fills `out` with i.i.d. mean-zero, unit-variance draws.
///
/// Mammen's two-point law puts (1 + sqrt5)/2 on probability (sqrt5 - 1)/(2 sqrt5)
/// and (1 - sqrt5)/2 on the rest, so its third and fourth moments are 1 and 2.
inline void fill_auxiliary(AuxiliaryLaw law, Rng& rng, Vector& out) {
    const double s5 = std::sqrt(5.0);
    switch (law) {
        case AuxiliaryLaw::Mammen: {
            std::bernoulli_distribution high((s5 - 1.0) / (2.0 * s5));
            for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = high(rng) ? 0.5 * (1.0 + s5) : 0.5 * (1.0 - s5);
            break;
        }
        case AuxiliaryLaw::Rademacher: {
            std::bernoulli_distribution coin(0.5);
            for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = coin(rng) ? 1.0 : -1.0;
            break;
        }
        case AuxiliaryLaw::UniformSqrt3: {
            std::uniform_real_distribution<double> unif(-std::sqrt(3.0), std::sqrt(3.0));
            for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = unif(rng);
            break;
        }
    }
}

inline Vector draw_auxiliary(AuxiliaryLaw law, Eigen::Index m, std::uint64_t seed) {
    if (m < 1) throw DataError("need at least one auxiliary draw");
    Rng rng = substream(seed, streams::auxiliary);
    Vector out(m);
    fill_auxiliary(law, rng, out);
    return out;
}

/// Smallest sample value whose empirical CDF reaches `level`. `sorted` must
/// be in ascending order.
inline double empirical_quantile(const std::vector<double>& sorted, double level) {
    if (sorted.empty()) throw DataError("quantile of an empty sample");
    const double B = static_cast<double>(sorted.size());
    // small slack so that level * B landing on an integer is not pushed up by rounding
    auto k = static_cast<std::size_t>(std::max(1.0, std::ceil(level * B - 1e-9)));
    k = std::min(k, sorted.size());
    return sorted[k - 1];
}

struct ScalarInterval {
    std::string name;
    double lower = 0.0;
    double estimate = 0.0;
    double upper = 0.0;
    bool significant = false;
};

struct BootstrapBands {
    double conf_level = 0.95;
    Vector estimate;
    Vector lower;
    Vector upper;
    std::vector<bool> significant_mask;
    std::vector<ScalarInterval> scalar_intervals;
    int B = 0;
    AuxiliaryLaw law = AuxiliaryLaw::Mammen;
    std::uint64_t seed = 0;
    // per replicate, in replicate order
    std::vector<PenaltySpec> replicate_penalty;
    std::vector<int> replicate_iterations;
    std::vector<bool> replicate_converged;
};

/// Replicate coefficient draws; bands at any level can be read off them.
struct BootstrapSample {
    Vector estimate;
    std::vector<std::string> scalar_names;
    Matrix draws;  // B x (p + r), row b = coefficients of replicate b
    std::vector<PenaltySpec> penalty;
    std::vector<int> iterations;
    std::vector<unsigned char> converged;  // not vector<bool>: replicates write concurrently
    AuxiliaryLaw law = AuxiliaryLaw::Mammen;
    std::uint64_t seed = 0;
};

struct BootstrapOptions {
    int B = 1000;
    AuxiliaryLaw law = AuxiliaryLaw::Mammen;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    ModelOptions model{};  // ADMM settings for the refits
};

/// Wild-bootstrap replicates of a Gaussian fit: y* = y_hat + e_hat * w with w
/// from the auxiliary law, refit at the same penalty, warm-started at the
/// original solution. Replicate b draws from its own substream (seed, b).
inline BootstrapSample wild_bootstrap_sample(const TfFit& fit, const Eigen::Ref<const Matrix>& X,
                                             const Eigen::Ref<const Matrix>& Z, const Eigen::Ref<const Vector>& y,
                                             const BootstrapOptions& opts) {
    if (fit.family.kind != Family::Gaussian)
        throw DataError("wild bootstrap bands are only available for Gaussian responses");
    if (opts.B < 1) throw DataError("need at least one bootstrap replicate");
    detail::check_inputs(X, y);
    if (X.cols() != fit.p()) throw DimensionError("spectra do not match the fitted grid");
    const Eigen::Index zc = detail::scalar_columns(Z);
    if (zc + (fit.intercept ? 1 : 0) != fit.scalar_count())
        throw DimensionError("scalar covariates do not match the fit");

    const Matrix design = detail::build_design(X, Z, fit.intercept);
    const Eigen::Index r = fit.scalar_count();
    const Vector theta = fit.coefficients();
    const Vector fitted = design * theta;
    const Vector resid = y - fitted;

    BootstrapSample out;
    out.estimate = theta;
    out.scalar_names = fit.scalar_names;
    out.law = opts.law;
    out.seed = opts.seed;
    const auto Bn = static_cast<std::size_t>(opts.B);
    out.draws.resize(opts.B, theta.size());
    out.penalty.assign(Bn, fit.penalty);
    out.iterations.assign(Bn, 0);
    out.converged.assign(Bn, 1);

    const GramProblem prob = GramProblem::from_design(design, y, r);
    const Matrix design_t = design.transpose();

    if (fit.estimator == Estimator::Spline) {
        const Matrix pen_gram = AugmentedOperator(DifferenceOperator(fit.p(), 2), r).gram();
        const Eigen::LLT<Matrix> llt = factorize_normal(prob.xtx, pen_gram, fit.spline_lambda);
        parallel_for(Bn, opts.threads, [&](std::size_t b) {
            Rng rng = substream(opts.seed, streams::bootstrap, b);
            Vector w(y.size());
            fill_auxiliary(opts.law, rng, w);
            const Vector ystar = fitted + resid.cwiseProduct(w);
            out.draws.row(static_cast<Eigen::Index>(b)) = llt.solve(design_t * ystar).transpose();
        });
        return out;
    }

    const ConstraintSystem constraints(fit.penalty, fit.p(), r);
    AdmmState warm = fit.state;
    if (warm.alpha.size() != theta.size()) warm = AdmmState{};
    warm.alpha = theta;
    parallel_for(Bn, opts.threads, [&](std::size_t b) {
        Rng rng = substream(opts.seed, streams::bootstrap, b);
        Vector w(y.size());
        fill_auxiliary(opts.law, rng, w);
        const Vector ystar = fitted + resid.cwiseProduct(w);
        AdmmSolver solver(prob, fit.penalty, opts.model.admm, &constraints);
        const AdmmState s = solver.solve(design_t * ystar, ystar.squaredNorm(), &warm);
        out.draws.row(static_cast<Eigen::Index>(b)) = s.alpha.transpose();
        out.iterations[b] = s.iter;
        out.converged[b] = s.converged ? 1 : 0;
    });
    return out;
}

/// Pointwise percentile bands at levels (1 - conf)/2 and (1 + conf)/2.
inline BootstrapBands bootstrap_bands(const BootstrapSample& sample, double conf_level) {
    if (!(conf_level > 0.0 && conf_level < 1.0)) throw DataError("confidence level must lie in (0, 1)");
    const auto B = static_cast<int>(sample.draws.rows());
    const double alpha = 1.0 - conf_level;
    if (B < 100) throw DataError("need at least 100 bootstrap replicates, got " + std::to_string(B));
    if (B * alpha / 2.0 < 5.0 - 1e-9)
        throw DataError("B = " + std::to_string(B) + " is too small for confidence level " + std::to_string(conf_level) +
                        "; need B * (1 - level) / 2 >= 5");
    const Eigen::Index total = sample.draws.cols();
    const Eigen::Index r = static_cast<Eigen::Index>(sample.scalar_names.size());
    const Eigen::Index p = total - r;

    Vector lo(total), hi(total);
    std::vector<double> col(static_cast<std::size_t>(B));
    for (Eigen::Index j = 0; j < total; ++j) {
        for (int b = 0; b < B; ++b) col[static_cast<std::size_t>(b)] = sample.draws(b, j);
        std::sort(col.begin(), col.end());
        lo[j] = empirical_quantile(col, alpha / 2.0);
        hi[j] = empirical_quantile(col, 1.0 - alpha / 2.0);
    }

    BootstrapBands bands;
    bands.conf_level = conf_level;
    bands.B = B;
    bands.law = sample.law;
    bands.seed = sample.seed;
    bands.estimate = sample.estimate.head(p);
    bands.lower = lo.head(p);
    bands.upper = hi.head(p);
    bands.significant_mask.resize(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j)
        bands.significant_mask[static_cast<std::size_t>(j)] = !(bands.lower[j] <= 0.0 && 0.0 <= bands.upper[j]);
    for (Eigen::Index k = 0; k < r; ++k) {
        ScalarInterval si;
        si.name = sample.scalar_names[static_cast<std::size_t>(k)];
        si.lower = lo[p + k];
        si.estimate = sample.estimate[p + k];
        si.upper = hi[p + k];
        si.significant = !(si.lower <= 0.0 && 0.0 <= si.upper);
        bands.scalar_intervals.push_back(si);
    }
    bands.replicate_penalty = sample.penalty;
    bands.replicate_iterations = sample.iterations;
    bands.replicate_converged.assign(sample.converged.begin(), sample.converged.end());
    return bands;
}

inline BootstrapBands wild_bootstrap(const TfFit& fit, const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Z,
                                     const Eigen::Ref<const Vector>& y, double conf_level = 0.95,
                                     const BootstrapOptions& opts = {}) {
    // check the replicate count before spending time on refits
    const double alpha = 1.0 - conf_level;
    if (!(conf_level > 0.0 && conf_level < 1.0)) throw DataError("confidence level must lie in (0, 1)");
    if (opts.B < 100) throw DataError("need at least 100 bootstrap replicates, got " + std::to_string(opts.B));
    if (opts.B * alpha / 2.0 < 5.0 - 1e-9)
        throw DataError("B = " + std::to_string(opts.B) + " is too small for confidence level " +
                        std::to_string(conf_level) + "; need B * (1 - level) / 2 >= 5");
    return bootstrap_bands(wild_bootstrap_sample(fit, X, Z, y, opts), conf_level);
}

} // namespace spectf

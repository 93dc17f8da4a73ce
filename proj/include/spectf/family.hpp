#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "spectf/errors.hpp"

namespace spectf {

enum class Family { Gaussian, Bernoulli, Poisson };

inline std::string to_string(Family f) {
    switch (f) {
        case Family::Gaussian: return "gaussian";
        case Family::Bernoulli: return "bernoulli";
        case Family::Poisson: return "poisson";
    }
    return "gaussian";
}

inline Family family_from_string(const std::string& s) {
    if (s == "gaussian") return Family::Gaussian;
    if (s == "bernoulli" || s == "binomial") return Family::Bernoulli;
    if (s == "poisson") return Family::Poisson;
    throw DataError("unknown response family '" + s + "'");
}

/// Canonical-link exponential family: identity, logit or log. For these links
/// the IRLS working weight is W = V(mu).
struct ResponseFamily {
    Family kind = Family::Gaussian;

    static constexpr double prob_clamp = 1e-8;
    static constexpr double weight_floor = 1e-6;

    double mean(double eta) const {
        switch (kind) {
            case Family::Gaussian: return eta;
            case Family::Bernoulli: {
                const double p = eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
                return std::clamp(p, prob_clamp, 1.0 - prob_clamp);
            }
            case Family::Poisson: return std::exp(std::min(eta, 700.0));
        }
        return eta;
    }

    double variance(double mu) const {
        switch (kind) {
            case Family::Gaussian: return 1.0;
            case Family::Bernoulli: return mu * (1.0 - mu);
            case Family::Poisson: return mu;
        }
        return 1.0;
    }

    double weight(double mu) const { return std::max(variance(mu), weight_floor); }

    /// Negative log-likelihood contribution, dropping terms free of eta.
    double nll(double y, double eta) const {
        switch (kind) {
            case Family::Gaussian: return 0.5 * (y - eta) * (y - eta);
            case Family::Bernoulli: {
                // log(1 + e^eta) - y eta, computed stably
                const double softplus = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
                return softplus - y * eta;
            }
            case Family::Poisson: return std::exp(std::min(eta, 700.0)) - y * eta;
        }
        return 0.0;
    }

    /// Unit deviance 2 [l(y; y) - l(y; mu)].
    double deviance(double y, double mu) const {
        switch (kind) {
            case Family::Gaussian: return (y - mu) * (y - mu);
            case Family::Bernoulli: {
                const double m = std::clamp(mu, prob_clamp, 1.0 - prob_clamp);
                return -2.0 * (y * std::log(m) + (1.0 - y) * std::log(1.0 - m));
            }
            case Family::Poisson: {
                const double m = std::max(mu, 1e-300);
                const double term = y > 0 ? y * std::log(y / m) : 0.0;
                return 2.0 * (term - (y - m));
            }
        }
        return 0.0;
    }

    void validate_response(const Eigen::VectorXd& y) const {
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double v = y[i];
            if (!std::isfinite(v)) throw DataError("response " + std::to_string(i) + " is not finite");
            if (kind == Family::Bernoulli && v != 0.0 && v != 1.0)
                throw DataError("Bernoulli response " + std::to_string(i) + " must be 0 or 1");
            if (kind == Family::Poisson && (v < 0.0 || v != std::floor(v)))
                throw DataError("Poisson response " + std::to_string(i) + " must be a nonnegative integer");
        }
    }
};

} // namespace spectf

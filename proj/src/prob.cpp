// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcd/prob.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tcd/error.hpp"

namespace tcd {

Temperature::Temperature(double tau) : tau_(tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw ParameterError("temperature must be positive and finite, got " + std::to_string(tau));
    }
}

LogitVector::LogitVector(std::vector<double> values) : values_(std::move(values)) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw DomainError("logit at index " + std::to_string(i) + " is not finite");
        }
    }
}

LogitVector LogitVector::from_floats(std::span<const float> values) {
    return LogitVector(std::vector<double>(values.begin(), values.end()));
}

ProbDist::ProbDist(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw DimensionError("probability vector is empty");
    long double sum = 0.0L;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
        const double p = probs_[i];
        if (!(p >= 0.0) || !std::isfinite(p)) {
            throw DomainError("probability at index " + std::to_string(i) + " is negative or not finite");
        }
        sum += p;
    }
    if (std::fabs(static_cast<double>(sum) - 1.0) > kNormTolerance) {
        throw DomainError("probabilities sum to " + std::to_string(static_cast<double>(sum)) + ", not 1");
    }
}

ProbDist softmax(std::span<const double> logits, Temperature tau) {
    if (logits.empty()) throw DimensionError("softmax of an empty vector");
    const double t = tau.value();
    const double top = *std::max_element(logits.begin(), logits.end());

    std::vector<double> out(logits.size());
    long double sum = 0.0L;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp((logits[i] - top) / t);
        sum += out[i];
    }
    // sum >= 1 because the max element contributes exp(0).
    for (double& p : out) {
        p = static_cast<double>(static_cast<long double>(p) / sum);
    }
    return ProbDist(ProbDist::Trusted{}, std::move(out));
}

double jsd(const ProbDist& p, const ProbDist& q) {
    if (p.size() != q.size()) {
        throw DimensionError("jsd length mismatch: " + std::to_string(p.size()) + " vs " +
                             std::to_string(q.size()));
    }
    // Each summand is formed symmetrically in (p_i, q_i), so swapping the
    // arguments reproduces the same floating-point sum.
    long double acc = 0.0L;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double a = p[i];
        const double b = q[i];
        const double m = 0.5 * (a + b);
        const double ta = a > 0.0 ? a * std::log(a / m) : 0.0;
        const double tb = b > 0.0 ? b * std::log(b / m) : 0.0;
        acc += static_cast<long double>(ta + tb);
    }
    const double d = static_cast<double>(0.5L * acc);
    return std::clamp(d, 0.0, std::numbers::ln2);
}

double log_safe_ratio(double a, double b, double eps) {
    if (!(a >= 0.0) || !(b >= 0.0)) throw DomainError("log_safe_ratio needs non-negative probabilities");
    if (!(eps > 0.0)) throw ParameterError("log_safe_ratio eps must be positive");
    return std::log((a + eps) / (b + eps));
}

}  // namespace tcd

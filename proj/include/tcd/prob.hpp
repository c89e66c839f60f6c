// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tcd {

inline constexpr double kLogEps = 1e-12;
inline constexpr double kNormTolerance = 1e-9;

class Temperature {
public:
    Temperature() = default;
    explicit Temperature(double tau);

    double value() const noexcept { return tau_; }

private:
    double tau_ = 1.0;
};

/// Raw per-token scores for one layer. Entries are finite; masking is kept
/// out of band (see `FusedLogits`).
class LogitVector {
public:
    LogitVector() = default;
    explicit LogitVector(std::vector<double> values);
    static LogitVector from_floats(std::span<const float> values);

    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    double operator[](std::size_t i) const { return values_[i]; }

private:
    std::vector<double> values_;
};

/// Normalized distribution over the vocabulary.
class ProbDist {
public:
    ProbDist() = default;
    /// Validates non-negativity and normalization within kNormTolerance.
    explicit ProbDist(std::vector<double> probs);

    std::span<const double> probs() const noexcept { return probs_; }
    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](std::size_t i) const { return probs_[i]; }

private:
    struct Trusted {};
    ProbDist(Trusted, std::vector<double> probs) : probs_(std::move(probs)) {}
    friend ProbDist softmax(std::span<const double>, Temperature);

    std::vector<double> probs_;
};

ProbDist softmax(std::span<const double> logits, Temperature tau = Temperature{});
inline ProbDist softmax(const LogitVector& z, Temperature tau = Temperature{}) {
    return softmax(z.values(), tau);
}

/// Natural-log Jensen-Shannon divergence, bounded by ln 2.
double jsd(const ProbDist& p, const ProbDist& q);

/// ln((a + eps) / (b + eps)) for probabilities a, b.
double log_safe_ratio(double a, double b, double eps = kLogEps);

/// Index of the largest element; the lowest index wins ties.
template <typename T>
std::size_t argmax(std::span<const T> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

}  // namespace tcd

// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "tcd/error.hpp"
#include "tcd/prob.hpp"

using namespace tcd;

namespace {

double sum_of(const ProbDist& p) {
    long double s = 0.0L;
    for (double v : p.probs()) s += v;
    return static_cast<double>(s);
}

ProbDist dist(std::vector<double> v) { return ProbDist(std::move(v)); }
LogitVector logits(std::vector<double> v) { return LogitVector(std::move(v)); }

}  // namespace

TEST_CASE("temperature must be positive and finite") {
    CHECK_THROWS_AS(Temperature{0.0}, ParameterError);
    CHECK_THROWS_AS(Temperature{-1.0}, ParameterError);
    CHECK_THROWS_AS(Temperature{std::nan("")}, ParameterError);
    CHECK_THROWS_AS(Temperature{std::numeric_limits<double>::infinity()}, ParameterError);
    CHECK(Temperature().value() == 1.0);
}

TEST_CASE("logit vectors reject non-finite entries") {
    CHECK_THROWS_AS(logits({1.0, std::nan("")}), DomainError);
    CHECK_THROWS_AS(logits({std::numeric_limits<double>::infinity()}), DomainError);
    CHECK_NOTHROW(logits({-1e300, 1e300}));
}

TEST_CASE("softmax of a uniform vector is uniform") {
    const std::vector<double> z(4, 3.5);
    const auto p = softmax(z);
    for (double v : p.probs()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("softmax survives extreme logits") {
    const std::vector<double> z{1000.0, 0.0, -1000.0};
    const auto p = softmax(z);
    CHECK(p[0] == 1.0);
    CHECK(p[2] == 0.0);
    CHECK(softmax(std::vector<double>{-1e308, -1e308})[0] == 0.5);
}

TEST_CASE("softmax matches the long-double oracle") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto z = oracle::random_logits(rng, 1 + rng() % 300, 30.0);
        for (double tau : {0.1, 1.0, 10.0}) {
            const auto p = softmax(z, Temperature(tau));
            const auto ref = oracle::softmax(z, tau);
            CHECK(std::fabs(sum_of(p) - 1.0) <= 1e-9);
            for (std::size_t i = 0; i < z.size(); ++i) {
                REQUIRE(std::fabs(p[i] - static_cast<double>(ref[i])) <= 1e-12);
            }
        }
    }
}

TEST_CASE("softmax is invariant to constant shifts and keeps the argmax") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> shift(-100.0, 100.0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto z = oracle::random_logits(rng, 2 + rng() % 200, 10.0);
        const double c = shift(rng);
        std::vector<double> zc(z);
        for (auto& v : zc) v += c;
        const auto p = softmax(z), q = softmax(zc);
        for (std::size_t i = 0; i < z.size(); ++i) REQUIRE(std::fabs(p[i] - q[i]) <= 1e-12);
        const auto top = argmax(std::span<const double>(z));
        for (double tau : {0.1, 1.0, 10.0}) CHECK(argmax(softmax(z, Temperature(tau)).probs()) == top);
    }
}

TEST_CASE("argmax breaks ties toward the lowest index") {
    const std::vector<double> v{1.0, 3.0, 3.0, 2.0};
    CHECK(argmax(std::span<const double>(v)) == 1);
    const std::vector<float> f{5.0f, 5.0f};
    CHECK(argmax(std::span<const float>(f)) == 0);
}

TEST_CASE("probability vectors are validated") {
    CHECK_THROWS_AS(dist({}), DimensionError);
    CHECK_THROWS_AS(dist({0.5, 0.6}), DomainError);
    CHECK_THROWS_AS(dist({1.5, -0.5}), DomainError);
    CHECK_NOTHROW(dist({0.5, 0.5 + 1e-10}));
}

TEST_CASE("jsd hand cases") {
    CHECK(jsd(dist({1, 0}), dist({0, 1})) == doctest::Approx(0.69314718055994530942).epsilon(1e-14));
    CHECK(jsd(dist({0.5, 0.5}), dist({1, 0})) == doctest::Approx(0.21576155433883569558).epsilon(1e-13));
    CHECK(jsd(dist({0.25, 0.25, 0.25, 0.25}), dist({1, 0, 0, 0})) ==
          doctest::Approx(0.38039566584857788471).epsilon(1e-13));
    CHECK(jsd(dist({0.9, 0.1}), dist({0.1, 0.9})) == doctest::Approx(0.36806420716849706991).epsilon(1e-13));
    CHECK(jsd(dist({1.0 / 3, 1.0 / 3, 1.0 / 3}), dist({0.5, 0.5, 0})) ==
          doctest::Approx(0.13230412471889827942).epsilon(1e-13));
}

TEST_CASE("jsd is symmetric, bounded and zero on identical inputs") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng() % 100;
        const auto p = softmax(oracle::random_logits(rng, n, 20.0));
        const auto q = softmax(oracle::random_logits(rng, n, 20.0));
        const double d = jsd(p, q);
        CHECK(d == jsd(q, p));
        CHECK(d >= 0.0);
        CHECK(d <= std::numbers::ln2);
        CHECK(jsd(p, p) <= 1e-12);
        std::vector<long double> pl(p.probs().begin(), p.probs().end()), ql(q.probs().begin(), q.probs().end());
        CHECK(std::fabs(d - static_cast<double>(oracle::jsd(pl, ql))) <= 1e-10);
    }
}

TEST_CASE("jsd rejects mismatched lengths") {
    CHECK_THROWS_AS(jsd(dist({1.0}), dist({0.5, 0.5})), DimensionError);
}

TEST_CASE("log_safe_ratio") {
    CHECK(log_safe_ratio(0.5, 0.25) == 0.6931471805579453);
    CHECK(log_safe_ratio(0.0, 0.0) == 0.0);
    CHECK(std::isfinite(log_safe_ratio(1.0, 0.0)));
    CHECK_THROWS_AS(log_safe_ratio(-0.1, 0.5), DomainError);
    CHECK_THROWS_AS(log_safe_ratio(0.1, 0.5, 0.0), ParameterError);
}

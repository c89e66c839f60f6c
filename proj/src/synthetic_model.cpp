// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcd/synthetic_model.hpp"

#include <cmath>

#include "tcd/error.hpp"

namespace tcd {

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

constexpr double unit_interval(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace

void SyntheticModelConfig::validate() const {
    if (num_layers < 2) throw ConfigError("num_layers", "synthetic model needs at least 2 layers");
    if (vocab.size() == 0) throw ConfigError("vocab", "synthetic model needs a vocabulary");
    if (!(base_scale >= 0.0) || !std::isfinite(base_scale)) throw ConfigError("base_scale", "must be >= 0");
    if (prior_depth > num_layers) throw ConfigError("prior_depth", "must not exceed num_layers");
    for (const auto& inj : injections) {
        if (inj.layer < 1 || inj.layer > num_layers) {
            throw ConfigError("injections.layer", "layer " + std::to_string(inj.layer) + " outside [1, L]");
        }
        if (inj.token >= vocab.size()) {
            throw DomainError("injection token id " + std::to_string(inj.token) + " out of range");
        }
        if (!std::isfinite(inj.boost)) throw ConfigError("injections.boost", "must be finite");
    }
    for (const auto& pb : prior_bias) {
        if (pb.token >= vocab.size()) {
            throw DomainError("prior_bias token id " + std::to_string(pb.token) + " out of range");
        }
        if (!std::isfinite(pb.bias)) throw ConfigError("prior_bias.bias", "must be finite");
    }
}

double synthetic_base_value(std::uint64_t seed, std::uint32_t step, std::size_t layer, TokenId token) {
    std::uint64_t key = splitmix64(seed);
    key = splitmix64(key ^ step);
    key = splitmix64(key ^ static_cast<std::uint64_t>(layer));
    key = splitmix64(key ^ token);
    double sum = 0.0;
    for (std::uint64_t k = 0; k < 4; ++k) {
        sum += unit_interval(splitmix64(key + k));
    }
    return sum - 2.0;
}

LayerLogitStack synthetic_step(const SyntheticModelConfig& cfg, const DecodeContext& ctx) {
    cfg.validate();
    const std::size_t L = cfg.num_layers;
    const std::size_t V = cfg.vocab.size();
    for (TokenId t : ctx.prefix) {
        if (t >= V) throw DomainError("prefix token id " + std::to_string(t) + " out of range");
    }
    const auto step = static_cast<std::uint32_t>(ctx.prefix.size());
    const std::size_t depth = cfg.prior_depth == 0 ? L : cfg.prior_depth;

    std::vector<double> z(L * V);
    for (std::size_t l = 1; l <= L; ++l) {
        for (TokenId t = 0; t < V; ++t) {
            z[(l - 1) * V + t] = cfg.base_scale * synthetic_base_value(cfg.seed, step, l, t);
        }
    }
    for (const auto& inj : cfg.injections) {
        if (inj.at_step && *inj.at_step != step) continue;
        if (!inj.condition.empty() && ctx.question.find(inj.condition) == std::string::npos) continue;
        for (std::size_t l = inj.layer; l <= L; ++l) z[(l - 1) * V + inj.token] += inj.boost;
    }
    for (const auto& pb : cfg.prior_bias) {
        if (pb.at_step && *pb.at_step != step) continue;
        for (std::size_t l = depth; l <= L; ++l) z[(l - 1) * V + pb.token] += pb.bias;
    }

    std::vector<float> data(z.begin(), z.end());
    return LayerLogitStack(step, L, V, std::move(data));
}

SyntheticModel::SyntheticModel(SyntheticModelConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

}  // namespace tcd

// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tcd/layered_model.hpp"

namespace tcd {

/// Adds `boost` to `token` at every layer >= `layer` whenever the question
/// contains `condition` (empty matches everything). `at_step` limits the
/// injection to one decoding step.
struct Injection {
    std::size_t layer = 1;
    TokenId token = 0;
    double boost = 0.0;
    std::string condition;
    std::optional<std::uint32_t> at_step;
};

/// Language-prior bias applied to layers >= SyntheticModelConfig::prior_depth.
struct PriorBias {
    TokenId token = 0;
    double bias = 0.0;
    std::optional<std::uint32_t> at_step;
};

struct SyntheticModelConfig {
    std::uint64_t seed = 0;
    std::size_t num_layers = 32;
    Vocabulary vocab;
    std::vector<Injection> injections;
    std::vector<PriorBias> prior_bias;
    std::size_t prior_depth = 0;  // 0 means "mature layer only"
    double base_scale = 0.5;      // base logits lie in [-2*scale, 2*scale]

    void validate() const;
};

/// Counter-based pseudo-random value in [-2, 2] (sum of four uniforms minus
/// two), keyed by (seed, step, layer, token). Pure integer and IEEE
/// arithmetic, so identical on every platform.
double synthetic_base_value(std::uint64_t seed, std::uint32_t step, std::size_t layer, TokenId token);

LayerLogitStack synthetic_step(const SyntheticModelConfig& cfg, const DecodeContext& ctx);

class SyntheticModel final : public LayeredModel {
public:
    explicit SyntheticModel(SyntheticModelConfig cfg);

    std::size_t num_layers() const override { return cfg_.num_layers; }
    const Vocabulary& vocab() const override { return cfg_.vocab; }
    LayerLogitStack step(const DecodeContext& ctx) const override { return synthetic_step(cfg_, ctx); }
    const SyntheticModelConfig& config() const noexcept { return cfg_; }

private:
    SyntheticModelConfig cfg_;
};

}  // namespace tcd

// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "tcd/error.hpp"
#include "tcd/layer_select.hpp"
#include "tcd/layered_model.hpp"

namespace tcd {

enum class FusionMode {
    tri,           // z(L) - z(a) + lambda * z(v)
    interpolated,  // z(L) - lambda * z(a) + (1 - lambda) * z(v)
};

enum class AmateurMode {
    per_step,  // re-run the JSD search on every step
    fixed,     // search once on the first step and reuse it
};

FusionMode parse_fusion_mode(std::string_view text);
std::string_view to_string(FusionMode mode);
AmateurMode parse_amateur_mode(std::string_view text);
std::string_view to_string(AmateurMode mode);

struct DecodeConfig {
    double lambda = 1.0;
    double beta = 0.1;
    Temperature tau;
    GainMode gain_mode = GainMode::difference;
    std::size_t candidate_k = kDefaultCandidateCount;
    FusionMode fusion = FusionMode::tri;
    AmateurMode amateur_mode = AmateurMode::per_step;
    std::size_t max_tokens = 32;
    std::vector<TokenId> stop_tokens;
    /// Fuse log-softmax rows instead of raw logits.
    bool normalize_rows = false;
    /// Sample from softmax(F / tau) over the plausible set instead of argmax.
    bool sample = false;
    std::uint64_t sample_seed = 0;
    /// Experimental: re-select the visual layer on every step using this
    /// token's gain in the current stack.
    std::optional<TokenId> per_step_visual_token;

    /// Throws ParameterError naming the offending field.
    void validate() const;
};

/// Tokens whose mature probability is at least beta times the maximum.
class PlausibleSet {
public:
    PlausibleSet(std::vector<TokenId> ids, std::size_t vocab_size);

    const std::vector<TokenId>& ids() const noexcept { return ids_; }
    std::size_t size() const noexcept { return ids_.size(); }
    bool contains(TokenId t) const { return t < member_.size() && member_[t]; }

private:
    std::vector<TokenId> ids_;
    std::vector<bool> member_;
};

PlausibleSet apc_mask(const ProbDist& mature_probs, double beta);

/// Fused scores with the mask kept separately: tokens outside the plausible
/// set score -inf without storing a non-finite value.
struct FusedLogits {
    LogitVector scores;
    std::vector<bool> mask;  // true = plausible

    /// Lowest-index argmax over the plausible tokens.
    TokenId best() const;
    double score(TokenId t) const;
};

FusedLogits fuse_logits(const LayerLogitStack& stack, const TriLayerSelection& sel, const PlausibleSet& plausible,
                        const DecodeConfig& cfg);

enum class Termination { stop_token, max_tokens, replay_exhausted };
std::string_view to_string(Termination t);

struct StepRecord {
    std::uint32_t step = 0;
    TriLayerSelection selection;
    std::size_t plausible_count = 0;
    TokenId token = 0;
    double fused_score = 0.0;
};

struct GenerationResult {
    std::vector<TokenId> tokens;
    std::vector<StepRecord> steps;
    Termination termination = Termination::max_tokens;
};

/// Carries the tokens produced before a trace ran out of recorded steps.
class DecodeInterrupted : public ReplayExhausted {
public:
    DecodeInterrupted(const std::string& what, GenerationResult partial)
        : ReplayExhausted(what), partial_(std::move(partial)) {}
    const GenerationResult& partial() const noexcept { return partial_; }

private:
    GenerationResult partial_;
};

/// Tri-layer contrastive greedy decoding with `visual_layer` fixed by the
/// watermark pre-pass.
GenerationResult decode_greedy(const LayeredModel& model, const DecodeContext& ctx, std::size_t visual_layer,
                               const DecodeConfig& cfg);

/// Plain greedy decoding on the mature layer, the baseline.
GenerationResult decode_mature_greedy(const LayeredModel& model, const DecodeContext& ctx,
                                      const DecodeConfig& cfg);

}  // namespace tcd

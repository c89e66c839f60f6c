// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcd/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace tcd {

namespace {

std::vector<double> row_values(const LayerLogitStack& stack, std::size_t layer, bool normalize) {
    const auto r = stack.row(layer);
    std::vector<double> z(r.begin(), r.end());
    if (normalize) {
        const double top = *std::max_element(z.begin(), z.end());
        long double sum = 0.0L;
        for (double v : z) sum += std::exp(v - top);
        const double log_z = top + static_cast<double>(std::log(sum));
        for (double& v : z) v -= log_z;
    }
    return z;
}

TokenId sample_plausible(const FusedLogits& fused, Temperature tau, std::mt19937_64& rng) {
    std::vector<TokenId> ids;
    std::vector<double> scores;
    for (std::size_t t = 0; t < fused.mask.size(); ++t) {
        if (!fused.mask[t]) continue;
        ids.push_back(static_cast<TokenId>(t));
        scores.push_back(fused.scores[t]);
    }
    const ProbDist p = softmax(scores, tau);
    // 53 random bits; avoids implementation-defined distribution objects.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    double acc = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        acc += p[i];
        if (u < acc) return ids[i];
    }
    return ids.back();
}

bool is_stop(const DecodeConfig& cfg, TokenId t) {
    return std::find(cfg.stop_tokens.begin(), cfg.stop_tokens.end(), t) != cfg.stop_tokens.end();
}

}  // namespace

FusionMode parse_fusion_mode(std::string_view text) {
    if (text == "tri") return FusionMode::tri;
    if (text == "interp" || text == "interpolated") return FusionMode::interpolated;
    throw ConfigError("fusion", "expected 'tri' or 'interp', got '" + std::string(text) + "'");
}

std::string_view to_string(FusionMode mode) {
    return mode == FusionMode::tri ? "tri" : "interp";
}

AmateurMode parse_amateur_mode(std::string_view text) {
    if (text == "per-step" || text == "per_step") return AmateurMode::per_step;
    if (text == "static" || text == "fixed") return AmateurMode::fixed;
    throw ConfigError("amateur_mode", "expected 'per-step' or 'static', got '" + std::string(text) + "'");
}

std::string_view to_string(AmateurMode mode) {
    return mode == AmateurMode::per_step ? "per-step" : "static";
}

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::stop_token: return "stop_token";
        case Termination::max_tokens: return "max_tokens";
        case Termination::replay_exhausted: return "replay_exhausted";
    }
    return "unknown";
}

void DecodeConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda", "must be a finite value >= 0");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta", "must lie in [0, 1]");
    if (candidate_k == 0) throw ConfigError("k", "candidate count must be >= 1");
    if (max_tokens == 0) throw ConfigError("max_tokens", "must be >= 1");
}

PlausibleSet::PlausibleSet(std::vector<TokenId> ids, std::size_t vocab_size)
    : ids_(std::move(ids)), member_(vocab_size, false) {
    if (ids_.empty()) throw ParameterError("plausible set is empty");
    std::sort(ids_.begin(), ids_.end());
    for (TokenId t : ids_) {
        if (t >= vocab_size) throw DomainError("plausible token id out of range");
        member_[t] = true;
    }
}

PlausibleSet apc_mask(const ProbDist& mature_probs, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ParameterError("beta must lie in [0, 1]");
    const auto p = mature_probs.probs();
    if (p.empty()) throw DimensionError("empty distribution");
    const double threshold = beta * *std::max_element(p.begin(), p.end());
    std::vector<TokenId> ids;
    for (std::size_t t = 0; t < p.size(); ++t) {
        if (p[t] >= threshold) ids.push_back(static_cast<TokenId>(t));
    }
    return PlausibleSet(std::move(ids), p.size());
}

TokenId FusedLogits::best() const {
    std::optional<TokenId> best;
    for (std::size_t t = 0; t < mask.size(); ++t) {
        if (!mask[t]) continue;
        if (!best || scores[t] > scores[*best]) best = static_cast<TokenId>(t);
    }
    if (!best) throw ParameterError("no plausible token to choose from");
    return *best;
}

double FusedLogits::score(TokenId t) const {
    return mask.at(t) ? scores[t] : -std::numeric_limits<double>::infinity();
}

FusedLogits fuse_logits(const LayerLogitStack& stack, const TriLayerSelection& sel, const PlausibleSet& plausible,
                        const DecodeConfig& cfg) {
    const std::size_t V = stack.vocab_size();
    if (plausible.size() == 0) throw ParameterError("plausible set is empty");
    const auto mature = row_values(stack, sel.mature, cfg.normalize_rows);
    const auto amateur = row_values(stack, sel.amateur, cfg.normalize_rows);
    const auto visual = row_values(stack, sel.visual, cfg.normalize_rows);
    const double lam = cfg.lambda;

    std::vector<double> scores(V);
    std::vector<bool> mask(V, false);
    for (std::size_t t = 0; t < V; ++t) {
        scores[t] = cfg.fusion == FusionMode::tri ? mature[t] - amateur[t] + lam * visual[t]
                                                  : mature[t] - lam * amateur[t] + (1.0 - lam) * visual[t];
        mask[t] = plausible.contains(static_cast<TokenId>(t));
    }
    return FusedLogits{LogitVector(std::move(scores)), std::move(mask)};
}

GenerationResult decode_greedy(const LayeredModel& model, const DecodeContext& ctx, std::size_t visual_layer,
                               const DecodeConfig& cfg) {
    cfg.validate();
    const std::size_t L = model.num_layers();
    if (visual_layer < 1 || visual_layer > L) {
        throw ParameterError("visual layer " + std::to_string(visual_layer) + " outside [1, " + std::to_string(L) + "]");
    }
    const CandidateSet candidates = CandidateSet::below_mature(L, cfg.candidate_k);

    GenerationResult result;
    DecodeContext cur = ctx;
    std::optional<AmateurLayerChoice> fixed_amateur;
    std::mt19937_64 rng(cfg.sample_seed);

    for (std::size_t i = 0; i < cfg.max_tokens; ++i) {
        LayerLogitStack stack;
        try {
            stack = model.step(cur);
        } catch (const ReplayExhausted& e) {
            result.termination = Termination::replay_exhausted;
            throw DecodeInterrupted(e.what(), std::move(result));
        }

        const PlausibleSet plausible = apc_mask(stack.probs(L, cfg.tau), cfg.beta);

        TriLayerSelection sel;
        sel.mature = L;
        if (cfg.amateur_mode == AmateurMode::per_step || !fixed_amateur) {
            auto choice = select_amateur_layer(stack, candidates, cfg.tau);
            sel.amateur = choice.layer;
            sel.jsd_profile = choice.jsd;
            if (cfg.amateur_mode == AmateurMode::fixed) fixed_amateur = std::move(choice);
        } else {
            sel.amateur = fixed_amateur->layer;
        }
        sel.visual = visual_layer;
        if (cfg.per_step_visual_token) {
            auto v = select_visual_layer(stack, *cfg.per_step_visual_token, cfg.gain_mode, cfg.tau);
            sel.visual = v.layer;
            sel.gain_profile = std::move(v.gains);
        }

        const FusedLogits fused = fuse_logits(stack, sel, plausible, cfg);
        const TokenId token = cfg.sample ? sample_plausible(fused, cfg.tau, rng) : fused.best();

        result.steps.push_back(StepRecord{static_cast<std::uint32_t>(i), std::move(sel), plausible.size(), token,
                                          fused.scores[token]});
        result.tokens.push_back(token);
        cur.prefix.push_back(token);
        if (is_stop(cfg, token)) {
            result.termination = Termination::stop_token;
            return result;
        }
    }
    result.termination = Termination::max_tokens;
    return result;
}

GenerationResult decode_mature_greedy(const LayeredModel& model, const DecodeContext& ctx,
                                      const DecodeConfig& cfg) {
    cfg.validate();
    const std::size_t L = model.num_layers();
    GenerationResult result;
    DecodeContext cur = ctx;
    for (std::size_t i = 0; i < cfg.max_tokens; ++i) {
        LayerLogitStack stack;
        try {
            stack = model.step(cur);
        } catch (const ReplayExhausted& e) {
            result.termination = Termination::replay_exhausted;
            throw DecodeInterrupted(e.what(), std::move(result));
        }
        const auto mature = stack.row(L);
        const auto token = static_cast<TokenId>(argmax(mature));
        StepRecord rec;
        rec.step = static_cast<std::uint32_t>(i);
        rec.selection.mature = L;
        rec.plausible_count = stack.vocab_size();
        rec.token = token;
        rec.fused_score = mature[token];
        result.steps.push_back(std::move(rec));
        result.tokens.push_back(token);
        cur.prefix.push_back(token);
        if (is_stop(cfg, token)) {
            result.termination = Termination::stop_token;
            return result;
        }
    }
    result.termination = Termination::max_tokens;
    return result;
}

}  // namespace tcd

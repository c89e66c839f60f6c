// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "tcd/layered_model.hpp"
#include "tcd/watermark.hpp"

namespace tcd {

inline constexpr std::size_t kDefaultCandidateCount = 20;

/// How the per-layer gain of the watermark answer token is measured.
enum class GainMode {
    difference,  // p(l) - p(l-1), "change"
    log_ratio,   // ln((p(l) + eps) / (p(l-1) + eps)), "log"
};

GainMode parse_gain_mode(std::string_view text);
std::string_view to_string(GainMode mode);

/// Strictly increasing layer indices in [1, L-1] eligible as amateur layers.
class CandidateSet {
public:
    CandidateSet(std::vector<std::size_t> layers, std::size_t num_layers);
    /// The k layers immediately below the mature layer (clamped to layer 1).
    static CandidateSet below_mature(std::size_t num_layers, std::size_t k);

    const std::vector<std::size_t>& layers() const noexcept { return layers_; }
    std::size_t size() const noexcept { return layers_.size(); }

private:
    std::vector<std::size_t> layers_;
};

struct VisualLayerChoice {
    std::size_t layer = 0;
    std::vector<double> answer_probs;  // p(l)(answer) for l = 1..L
    std::vector<double> gains;         // gain at l = 2..L, so gains[i] belongs to layer i + 2
};

struct AmateurLayerChoice {
    std::size_t layer = 0;
    std::vector<double> jsd;  // one entry per candidate, in candidate order
};

struct TriLayerSelection {
    std::size_t mature = 0;
    std::size_t amateur = 0;
    std::size_t visual = 0;
    std::vector<double> gain_profile;
    std::vector<double> jsd_profile;
};

VisualLayerChoice select_visual_layer(const LayerLogitStack& stack, TokenId answer_token, GainMode mode,
                                      Temperature tau = Temperature{});

AmateurLayerChoice select_amateur_layer(const LayerLogitStack& stack, const CandidateSet& candidates,
                                        Temperature tau = Temperature{});

struct PrepassResult {
    VisualLayerChoice choice;
    TokenId answer_token = 0;
    std::uint32_t position = 0;  // probe step whose stack was scored
    bool recorded = false;       // true when the model replayed an archived probe
};

/// Composites the watermark, asks the probe question and scores the first
/// content-token position. `sample` carries the sample id and the original
/// image; its question and prefix are ignored.
PrepassResult run_watermark_prepass(const LayeredModel& model, const DecodeContext& sample,
                                    const WatermarkSpec& spec, GainMode mode, Temperature tau = Temperature{});

/// Write-once cache of per-sample visual layers, shared between threads.
class VisualLayerCache {
public:
    std::optional<PrepassResult> find(const std::string& sample_id) const;
    /// Returns the cached entry, computing it with `compute` on first use.
    template <typename Fn>
    PrepassResult get_or_compute(const std::string& sample_id, Fn&& compute) {
        if (auto hit = find(sample_id)) return *hit;
        PrepassResult fresh = compute();
        std::unique_lock lock(mu_);
        return entries_.try_emplace(sample_id, std::move(fresh)).first->second;
    }
    std::size_t size() const;

private:
    mutable std::shared_mutex mu_;
    std::map<std::string, PrepassResult> entries_;
};

}  // namespace tcd

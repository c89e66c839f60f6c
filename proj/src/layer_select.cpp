// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcd/layer_select.hpp"

#include <algorithm>

#include "tcd/error.hpp"

namespace tcd {

namespace {

// Probes that open with special tokens are stepped through greedily; give up
// after this many.
constexpr std::uint32_t kMaxProbeSpecialTokens = 8;

}  // namespace

GainMode parse_gain_mode(std::string_view text) {
    if (text == "change" || text == "difference" || text == "diff") return GainMode::difference;
    if (text == "log" || text == "log-ratio" || text == "log_ratio") return GainMode::log_ratio;
    throw ConfigError("gain", "expected 'change' or 'log', got '" + std::string(text) + "'");
}

std::string_view to_string(GainMode mode) {
    return mode == GainMode::difference ? "change" : "log";
}

CandidateSet::CandidateSet(std::vector<std::size_t> layers, std::size_t num_layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ParameterError("amateur candidate set is empty");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i] < 1 || layers_[i] >= num_layers) {
            throw ParameterError("candidate layer " + std::to_string(layers_[i]) + " outside [1, " +
                                 std::to_string(num_layers - 1) + "]");
        }
        if (i > 0 && layers_[i] <= layers_[i - 1]) throw ParameterError("candidate layers must strictly increase");
    }
}

CandidateSet CandidateSet::below_mature(std::size_t num_layers, std::size_t k) {
    if (num_layers < 2) throw DimensionError("need at least 2 layers");
    if (k == 0) throw ParameterError("candidate count must be positive");
    const std::size_t first = num_layers - 1 >= k ? num_layers - k : 1;
    std::vector<std::size_t> layers;
    for (std::size_t l = first; l < num_layers; ++l) layers.push_back(l);
    return CandidateSet(std::move(layers), num_layers);
}

VisualLayerChoice select_visual_layer(const LayerLogitStack& stack, TokenId answer_token, GainMode mode,
                                      Temperature tau) {
    const std::size_t L = stack.num_layers();
    if (L < 2) throw DimensionError("visual layer selection needs at least 2 layers");
    if (answer_token >= stack.vocab_size()) {
        throw DomainError("answer token id " + std::to_string(answer_token) + " out of range");
    }
    VisualLayerChoice out;
    out.answer_probs.reserve(L);
    for (std::size_t l = 1; l <= L; ++l) out.answer_probs.push_back(stack.probs(l, tau)[answer_token]);

    out.gains.reserve(L - 1);
    for (std::size_t l = 2; l <= L; ++l) {
        const double cur = out.answer_probs[l - 1];
        const double prev = out.answer_probs[l - 2];
        out.gains.push_back(mode == GainMode::difference ? cur - prev : log_safe_ratio(cur, prev));
    }
    out.layer = argmax(std::span<const double>(out.gains)) + 2;
    return out;
}

AmateurLayerChoice select_amateur_layer(const LayerLogitStack& stack, const CandidateSet& candidates,
                                        Temperature tau) {
    const std::size_t L = stack.num_layers();
    if (candidates.size() == 0) throw ParameterError("amateur candidate set is empty");
    const ProbDist mature = stack.probs(L, tau);
    AmateurLayerChoice out;
    out.jsd.reserve(candidates.size());
    for (std::size_t l : candidates.layers()) {
        if (l >= L) throw ParameterError("candidate layer " + std::to_string(l) + " is not below the mature layer");
        out.jsd.push_back(jsd(mature, stack.probs(l, tau)));
    }
    out.layer = candidates.layers()[argmax(std::span<const double>(out.jsd))];
    return out;
}

PrepassResult run_watermark_prepass(const LayeredModel& model, const DecodeContext& sample,
                                    const WatermarkSpec& spec, GainMode mode, Temperature tau) {
    spec.validate();
    PrepassResult out;
    const auto answer = model.vocab().find(spec.expected_answer);
    if (!answer) {
        throw ConfigError("expected_answer", "'" + spec.expected_answer + "' is not a vocabulary token");
    }
    out.answer_token = *answer;

    if (auto rec = model.recorded_probe(sample)) {
        out.choice = select_visual_layer(rec->stack, out.answer_token, mode, tau);
        out.position = rec->position;
        out.recorded = true;
        return out;
    }

    DecodeContext probe;
    probe.sample_id = sample.sample_id;
    probe.question = spec.probe_question;
    if (sample.image && !spec.image.empty()) {
        probe.image = std::make_shared<const ImageBuffer>(embed_watermark(*sample.image, spec));
    } else {
        probe.image = sample.image;
    }

    // Score the first position whose mature prediction is a content token.
    for (std::uint32_t pos = 0;; ++pos) {
        LayerLogitStack stack = model.step(probe);
        const auto top = static_cast<TokenId>(argmax(stack.row(stack.num_layers())));
        if (!model.vocab().is_special(top) || pos + 1 >= kMaxProbeSpecialTokens) {
            out.choice = select_visual_layer(stack, out.answer_token, mode, tau);
            out.position = pos;
            return out;
        }
        probe.prefix.push_back(top);
    }
}

std::optional<PrepassResult> VisualLayerCache::find(const std::string& sample_id) const {
    std::shared_lock lock(mu_);
    auto it = entries_.find(sample_id);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::size_t VisualLayerCache::size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
}

}  // namespace tcd

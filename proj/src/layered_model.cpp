// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcd/layered_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "tcd/error.hpp"

namespace tcd {

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<TokenId> special)
    : tokens_(std::move(tokens)), special_(std::move(special)), is_special_(tokens_.size(), false) {
    if (tokens_.empty()) throw DimensionError("vocabulary is empty");
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
            throw ConfigError("vocab", "duplicate token '" + tokens_[i] + "'");
        }
    }
    std::sort(special_.begin(), special_.end());
    special_.erase(std::unique(special_.begin(), special_.end()), special_.end());
    for (TokenId id : special_) {
        if (id >= tokens_.size()) throw ConfigError("special_tokens", "id " + std::to_string(id) + " out of range");
        is_special_[id] = true;
    }
}

Vocabulary Vocabulary::with_angle_specials(std::vector<std::string> tokens) {
    std::vector<TokenId> special;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& t = tokens[i];
        if (t.size() >= 2 && t.front() == '<' && t.back() == '>') special.push_back(static_cast<TokenId>(i));
    }
    return Vocabulary(std::move(tokens), std::move(special));
}

std::optional<TokenId> Vocabulary::find(std::string_view text) const {
    auto it = index_.find(std::string(text));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

TokenId Vocabulary::require(std::string_view text, const std::string& key) const {
    if (auto id = find(text)) return *id;
    throw ConfigError(key, "token '" + std::string(text) + "' is not in the vocabulary");
}

LayerLogitStack::LayerLogitStack(std::uint32_t step_index, std::size_t num_layers, std::size_t vocab_size,
                                 std::vector<float> data)
    : step_(step_index), layers_(num_layers), vocab_(vocab_size), data_(std::move(data)) {
    if (layers_ < 2) throw DimensionError("a logit stack needs at least 2 layers");
    if (vocab_ == 0) throw DimensionError("a logit stack needs a non-empty vocabulary");
    if (data_.size() != layers_ * vocab_) throw DimensionError("logit stack payload does not match L x |V|");
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            throw DomainError("non-finite logit at layer " + std::to_string(i / vocab_ + 1) + ", token " +
                              std::to_string(i % vocab_));
        }
    }
}

LayerLogitStack LayerLogitStack::from_rows(std::uint32_t step_index, const std::vector<std::vector<float>>& rows) {
    if (rows.empty()) throw DimensionError("a logit stack needs at least 2 layers");
    const std::size_t v = rows.front().size();
    std::vector<float> data;
    data.reserve(rows.size() * v);
    for (const auto& r : rows) {
        if (r.size() != v) throw DimensionError("logit rows have different widths");
        data.insert(data.end(), r.begin(), r.end());
    }
    return LayerLogitStack(step_index, rows.size(), v, std::move(data));
}

std::span<const float> LayerLogitStack::row(std::size_t layer) const {
    if (layer < 1 || layer > layers_) {
        throw DimensionError("layer " + std::to_string(layer) + " outside [1, " + std::to_string(layers_) + "]");
    }
    return std::span<const float>(data_).subspan((layer - 1) * vocab_, vocab_);
}

ProbDist LayerLogitStack::probs(std::size_t layer, Temperature tau) const {
    const auto r = row(layer);
    std::vector<double> z(r.begin(), r.end());
    return softmax(z, tau);
}

bool operator==(const LayerLogitStack& a, const LayerLogitStack& b) {
    return a.step_ == b.step_ && a.layers_ == b.layers_ && a.vocab_ == b.vocab_ &&
           a.data_.size() == b.data_.size() &&
           (a.data_.empty() || std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0);
}

}  // namespace tcd

// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tcd/image.hpp"
#include "tcd/prob.hpp"

namespace tcd {

using TokenId = std::uint32_t;

/// Ordered token strings plus the subset treated as special (BOS/EOS/...).
/// Token strings are unique.
class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(std::vector<std::string> tokens, std::vector<TokenId> special);
    /// Marks every "<...>" token as special.
    static Vocabulary with_angle_specials(std::vector<std::string> tokens);

    std::size_t size() const noexcept { return tokens_.size(); }
    const std::string& token(TokenId id) const { return tokens_.at(id); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    const std::vector<TokenId>& special_ids() const noexcept { return special_; }
    bool is_special(TokenId id) const { return id < is_special_.size() && is_special_[id]; }
    std::optional<TokenId> find(std::string_view text) const;
    /// Like find() but throws ConfigError naming `key` when absent.
    TokenId require(std::string_view text, const std::string& key) const;

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
        return a.tokens_ == b.tokens_ && a.special_ == b.special_;
    }

private:
    std::vector<std::string> tokens_;
    std::vector<TokenId> special_;
    std::vector<bool> is_special_;
    std::unordered_map<std::string, TokenId> index_;
};

/// Per-step logits for every layer. Rows are 1-indexed; row L is the mature
/// layer. Storage is layer-major float32, which is also the trace layout.
class LayerLogitStack {
public:
    LayerLogitStack() = default;
    LayerLogitStack(std::uint32_t step_index, std::size_t num_layers, std::size_t vocab_size,
                    std::vector<float> data);
    static LayerLogitStack from_rows(std::uint32_t step_index, const std::vector<std::vector<float>>& rows);

    std::uint32_t step_index() const noexcept { return step_; }
    std::size_t num_layers() const noexcept { return layers_; }
    std::size_t vocab_size() const noexcept { return vocab_; }
    std::span<const float> data() const noexcept { return data_; }

    std::span<const float> row(std::size_t layer) const;
    LogitVector logits(std::size_t layer) const { return LogitVector::from_floats(row(layer)); }
    ProbDist probs(std::size_t layer, Temperature tau = Temperature{}) const;

    /// Bitwise comparison of the payload.
    friend bool operator==(const LayerLogitStack& a, const LayerLogitStack& b);

private:
    std::uint32_t step_ = 0;
    std::size_t layers_ = 0;
    std::size_t vocab_ = 0;
    std::vector<float> data_;
};

struct DecodeContext {
    std::string sample_id;
    std::shared_ptr<const ImageBuffer> image;
    std::string question;
    std::vector<TokenId> prefix;
};

/// Watermark probe stack recorded ahead of time (trace-backed models).
struct RecordedProbe {
    LayerLogitStack stack;
    std::uint32_t position = 0;
};

/// Produces a LayerLogitStack for a decoding context. Implementations are
/// deterministic and safe to call concurrently.
class LayeredModel {
public:
    virtual ~LayeredModel() = default;

    virtual std::size_t num_layers() const = 0;
    virtual const Vocabulary& vocab() const = 0;
    virtual LayerLogitStack step(const DecodeContext& ctx) const = 0;

    /// Models that cannot be re-queried return the probe stack they recorded.
    virtual std::optional<RecordedProbe> recorded_probe(const DecodeContext&) const { return std::nullopt; }
};

}  // namespace tcd

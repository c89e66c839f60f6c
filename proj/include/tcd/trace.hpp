// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Trace archives record per-layer logits exported from a real model so the
// decoder can replay them without the host framework.
//
// Directory layout:
//   manifest.json        model name, L, vocabulary, sample descriptors
//   samples/<id>.tcdt    binary records, one per step
//
// Record layout (little-endian):
//   "TCDT" | version u16 | L u16 | |V| u32 | step u32 | L*|V| float32
// Floats are layer-major, then token-major. The optional watermark probe
// record comes first and carries step = kProbeStep. The manifest stores a
// CRC-32 of each sample file.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "tcd/layered_model.hpp"

namespace tcd {

inline constexpr std::uint16_t kTraceVersion = 1;
inline constexpr std::uint32_t kProbeStep = 0xFFFFFFFFu;
inline constexpr std::size_t kRecordHeaderSize = 16;

struct TraceProbe {
    std::string question;
    std::string answer;
    std::uint32_t position = 0;  // first content-token position; also the stack's step index
    LayerLogitStack stack;

    friend bool operator==(const TraceProbe&, const TraceProbe&) = default;
};

struct TraceSample {
    std::string id;
    std::string question;
    std::vector<TokenId> greedy_tokens;  // host model's own greedy output
    std::optional<TraceProbe> probe;
    std::vector<LayerLogitStack> steps;
    nlohmann::json metadata = nlohmann::json::object();

    friend bool operator==(const TraceSample&, const TraceSample&) = default;
};

struct TraceArchive {
    std::string model;
    std::size_t num_layers = 0;
    Vocabulary vocab;
    std::vector<std::size_t> layer_ids;  // host-model layer behind each row, if known
    std::vector<TraceSample> samples;
    nlohmann::json metadata = nlohmann::json::object();

    const TraceSample& sample(const std::string& id) const;
    friend bool operator==(const TraceArchive&, const TraceArchive&) = default;
};

/// Serializes one sample's records exactly as stored in samples/<id>.tcdt.
std::vector<std::uint8_t> encode_sample_payload(const TraceSample& sample, std::size_t num_layers,
                                                std::size_t vocab_size);
std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

void write_trace(const TraceArchive& archive, const std::filesystem::path& dir);
TraceArchive read_trace(const std::filesystem::path& dir);

struct TraceIssue {
    std::string sample;  // empty for manifest-level issues
    std::string message;
};

struct TraceValidation {
    std::size_t samples_checked = 0;
    std::size_t steps_checked = 0;
    std::vector<TraceIssue> issues;
    bool ok() const noexcept { return issues.empty(); }
};

/// Checks every sample instead of stopping at the first failure.
TraceValidation validate_trace(const std::filesystem::path& dir);

/// Recorded stack for step = prefix length (teacher-forced replay).
LayerLogitStack trace_step(const TraceArchive& archive, const std::string& sample, const DecodeContext& ctx);

class TraceModel final : public LayeredModel {
public:
    explicit TraceModel(std::shared_ptr<const TraceArchive> archive);

    std::size_t num_layers() const override { return archive_->num_layers; }
    const Vocabulary& vocab() const override { return archive_->vocab; }
    /// Uses ctx.sample_id to pick the recorded sample.
    LayerLogitStack step(const DecodeContext& ctx) const override;
    std::optional<RecordedProbe> recorded_probe(const DecodeContext& ctx) const override;

    bool has_sample(const std::string& id) const { return index_.contains(id); }
    const TraceArchive& archive() const noexcept { return *archive_; }

private:
    const TraceSample& lookup(const std::string& id) const;

    std::shared_ptr<const TraceArchive> archive_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace tcd

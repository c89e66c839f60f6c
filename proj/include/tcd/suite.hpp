// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tcd/decode.hpp"
#include "tcd/metrics.hpp"
#include "tcd/synthetic_model.hpp"
#include "tcd/watermark.hpp"

namespace tcd {

inline constexpr std::string_view kDefaultPromptSuffix = "Please answer the question using a single word or phrase.";

enum class SuiteKind { pope, mme, amber };

SuiteKind parse_suite_kind(std::string_view text);
std::string_view to_string(SuiteKind kind);

struct DatasetSample {
    std::string id;
    std::string question;
    Answer label = Answer::invalid;  // binary suites
    std::string split;
    std::string image_id;
    std::string subtask;
    std::vector<std::string> gt_objects;  // generative suites
    std::filesystem::path image;          // empty when the sample has no image
    std::string trace_sample;             // defaults to id
    std::optional<SyntheticModelConfig> synthetic;
};

struct Dataset {
    SuiteKind suite = SuiteKind::pope;
    std::string prompt_suffix;
    std::optional<std::filesystem::path> trace;
    Vocabulary vocab;  // required when any sample is synthetic
    std::size_t num_layers = 32;
    std::vector<std::string> object_lexicon;
    std::vector<std::string> cog_prone;
    std::vector<DatasetSample> samples;

    /// Question as sent to the model (binary suites append the prompt suffix).
    std::string prompt(const DatasetSample& s) const;
};

/// Relative paths resolve against `base_dir`. Token fields in synthetic
/// configs accept either a vocabulary string or an id.
Dataset parse_dataset(const nlohmann::json& j, const std::filesystem::path& base_dir);
Dataset load_dataset(const std::filesystem::path& path);

/// First non-special token, stripped of word-boundary markers, matched
/// case-insensitively against yes/no.
Answer parse_binary_answer(const Vocabulary& vocab, std::span<const TokenId> tokens);

/// Joins non-special tokens. Marker-prefixed tokens ("▁", "Ġ") start a new
/// word; without any markers in the vocabulary tokens are space-separated.
std::string detokenize(const Vocabulary& vocab, std::span<const TokenId> tokens);

/// Exact word-sequence matches of lexicon entries in `text`, lower-cased.
std::vector<std::string> extract_objects(std::string_view text, const std::vector<std::string>& lexicon);

struct SuiteOptions {
    DecodeConfig decode;
    WatermarkSpec watermark;
    std::size_t jobs = 1;
    bool watermark_in_main_pass = false;
    bool per_step_visual = false;
    /// Overrides the dataset's trace directory.
    std::optional<std::filesystem::path> trace;
};

struct DecodeOutcome {
    std::vector<TokenId> tokens;
    std::string text;
    Termination termination = Termination::max_tokens;
    Answer answer = Answer::invalid;
    std::vector<std::string> mentioned;
};

struct SampleOutcome {
    std::string id;
    std::size_t visual_layer = 0;
    std::vector<double> gain_profile;
    DecodeOutcome tcd;
    DecodeOutcome baseline;
    std::vector<StepRecord> steps;  // TCD steps
};

struct SuiteReport {
    SuiteKind suite = SuiteKind::pope;
    std::size_t total = 0;
    std::vector<std::string> skipped;
    std::vector<std::string> warnings;
    std::vector<SampleOutcome> outcomes;  // dataset order
    nlohmann::json metrics;               // {"tcd": ..., "baseline": ...}
};

/// Evaluates every sample with both the TCD decoder and mature-only greedy.
/// Results do not depend on `jobs`.
SuiteReport run_suite(const Dataset& dataset, const SuiteOptions& opts);

nlohmann::json report_to_json(const SuiteReport& report);
/// One JSON object per line, dataset order.
std::string report_jsonl(const SuiteReport& report, const Dataset& dataset);
/// metric,tcd,baseline rows.
std::string report_csv(const SuiteReport& report);

}  // namespace tcd

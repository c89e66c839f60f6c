// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcd/decode.hpp"
#include "tcd/suite.hpp"
#include "tcd/watermark.hpp"

namespace tcd {

/// Everything a CLI run needs. Config files and flag overrides use the same
/// flat key names:
///   lambda beta tau gain k fusion amateur_mode max_tokens stop_tokens
///   normalize_rows sample seed jobs trace dataset out alpha anchor scale
///   blend watermark_image probe_question expected_answer
///   watermark_in_main_pass per_step_visual
struct EngineConfig {
    DecodeConfig decode;
    WatermarkSpec watermark;  // image is loaded separately
    std::vector<std::string> stop_tokens;  // token strings; empty = all special tokens
    std::optional<std::filesystem::path> watermark_image;
    std::optional<std::filesystem::path> trace;
    std::optional<std::filesystem::path> dataset;
    std::optional<std::filesystem::path> out;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    bool watermark_in_main_pass = false;
    bool per_step_visual = false;

    /// Range checks; throws ConfigError naming the key.
    void validate() const;
};

/// Applies `j` on top of `cfg`. Unknown keys and ill-typed values throw
/// ConfigError naming the key.
void apply_config(EngineConfig& cfg, const nlohmann::json& j);

/// Reads a JSON config file. A missing file is an IoError; malformed JSON is
/// a ConfigError.
nlohmann::json read_config_file(const std::filesystem::path& path);

/// Layering: defaults < file < TCD_SEED < flags. `env_seed` is the raw
/// environment value (nullptr when unset).
EngineConfig resolve_config(const nlohmann::json& file, const nlohmann::json& flags, const char* env_seed);

/// Resolves stop-token strings against `vocab` and loads the watermark image.
SuiteOptions suite_options(const EngineConfig& cfg, const Vocabulary& vocab);
DecodeConfig decode_config(const EngineConfig& cfg, const Vocabulary& vocab);

nlohmann::json config_to_json(const EngineConfig& cfg);

}  // namespace tcd

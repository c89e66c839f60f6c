// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcd/config.hpp"

#include <cmath>
#include <fstream>

#include "tcd/error.hpp"

namespace tcd {

using nlohmann::json;

namespace {

template <typename T>
T get(const json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw ConfigError(key, "unexpected value " + v.dump());
    }
}

double get_number(const json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError(key, "expected a number, got " + v.dump());
    return v.get<double>();
}

std::size_t get_count(const json& v, const std::string& key) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ConfigError(key, "expected a non-negative integer, got " + v.dump());
    }
    return v.get<std::size_t>();
}

bool get_bool(const json& v, const std::string& key) {
    if (!v.is_boolean()) throw ConfigError(key, "expected true or false, got " + v.dump());
    return v.get<bool>();
}

std::uint64_t parse_seed(const json& v, const std::string& key) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        std::size_t used = 0;
        try {
            const auto x = std::stoull(s, &used, 0);
            if (used == s.size() && !s.empty() && s.front() != '-') return x;
        } catch (const std::exception&) {
        }
    }
    throw ConfigError(key, "expected a 64-bit unsigned integer, got " + v.dump());
}

BlendMode parse_blend(const std::string& s) {
    if (s == "additive") return BlendMode::additive;
    if (s == "convex") return BlendMode::convex;
    throw ConfigError("blend", "expected 'additive' or 'convex', got '" + s + "'");
}

std::string_view blend_name(BlendMode b) { return b == BlendMode::additive ? "additive" : "convex"; }

}  // namespace

void EngineConfig::validate() const {
    decode.validate();
    if (!(watermark.alpha >= 0.0 && watermark.alpha <= 1.0)) throw ConfigError("alpha", "must lie in [0, 1]");
    if (!(watermark.anchor_x > 0.0 && watermark.anchor_x <= 1.0) ||
        !(watermark.anchor_y > 0.0 && watermark.anchor_y <= 1.0)) {
        throw ConfigError("anchor", "fractions must lie in (0, 1]");
    }
    if (!(watermark.scale > 0.0) || !std::isfinite(watermark.scale)) throw ConfigError("scale", "must be positive");
    if (watermark.expected_answer.empty()) throw ConfigError("expected_answer", "must not be empty");
    if (jobs == 0) throw ConfigError("jobs", "must be >= 1");
}

void apply_config(EngineConfig& cfg, const json& j) {
    if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
        if (key == "lambda") {
            cfg.decode.lambda = get_number(v, key);
        } else if (key == "beta") {
            cfg.decode.beta = get_number(v, key);
        } else if (key == "tau") {
            const double tau = get_number(v, key);
            if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError(key, "must be positive and finite");
            cfg.decode.tau = Temperature(tau);
        } else if (key == "gain") {
            cfg.decode.gain_mode = parse_gain_mode(get<std::string>(v, key));
        } else if (key == "k") {
            cfg.decode.candidate_k = get_count(v, key);
        } else if (key == "fusion") {
            cfg.decode.fusion = parse_fusion_mode(get<std::string>(v, key));
        } else if (key == "amateur_mode") {
            cfg.decode.amateur_mode = parse_amateur_mode(get<std::string>(v, key));
        } else if (key == "max_tokens") {
            cfg.decode.max_tokens = get_count(v, key);
        } else if (key == "stop_tokens") {
            cfg.stop_tokens = get<std::vector<std::string>>(v, key);
        } else if (key == "normalize_rows") {
            cfg.decode.normalize_rows = get_bool(v, key);
        } else if (key == "sample") {
            cfg.decode.sample = get_bool(v, key);
        } else if (key == "seed") {
            cfg.seed = parse_seed(v, key);
        } else if (key == "jobs") {
            cfg.jobs = get_count(v, key);
        } else if (key == "trace") {
            cfg.trace = get<std::string>(v, key);
        } else if (key == "dataset") {
            cfg.dataset = get<std::string>(v, key);
        } else if (key == "out") {
            cfg.out = get<std::string>(v, key);
        } else if (key == "alpha") {
            cfg.watermark.alpha = get_number(v, key);
        } else if (key == "anchor") {
            if (v.is_array()) {
                if (v.size() != 2) throw ConfigError(key, "expected a number or [x, y]");
                cfg.watermark.anchor_x = get_number(v[0], key);
                cfg.watermark.anchor_y = get_number(v[1], key);
            } else {
                cfg.watermark.anchor_x = cfg.watermark.anchor_y = get_number(v, key);
            }
        } else if (key == "scale") {
            cfg.watermark.scale = get_number(v, key);
        } else if (key == "blend") {
            cfg.watermark.blend = parse_blend(get<std::string>(v, key));
        } else if (key == "watermark_image") {
            cfg.watermark_image = get<std::string>(v, key);
        } else if (key == "probe_question") {
            cfg.watermark.probe_question = get<std::string>(v, key);
        } else if (key == "expected_answer") {
            cfg.watermark.expected_answer = get<std::string>(v, key);
        } else if (key == "watermark_in_main_pass") {
            cfg.watermark_in_main_pass = get_bool(v, key);
        } else if (key == "per_step_visual") {
            cfg.per_step_visual = get_bool(v, key);
        } else {
            throw ConfigError(key, "unknown config key");
        }
    }
}

json read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("", "config '" + path.string() + "' is not valid JSON: " + e.what());
    }
}

EngineConfig resolve_config(const json& file, const json& flags, const char* env_seed) {
    EngineConfig cfg;
    if (!file.is_null()) apply_config(cfg, file);
    if (env_seed != nullptr) cfg.seed = parse_seed(json(std::string(env_seed)), "TCD_SEED");
    if (!flags.is_null()) apply_config(cfg, flags);
    cfg.decode.sample_seed = cfg.seed;
    cfg.validate();
    return cfg;
}

DecodeConfig decode_config(const EngineConfig& cfg, const Vocabulary& vocab) {
    DecodeConfig d = cfg.decode;
    d.stop_tokens.clear();
    for (const auto& t : cfg.stop_tokens) d.stop_tokens.push_back(vocab.require(t, "stop_tokens"));
    return d;
}

SuiteOptions suite_options(const EngineConfig& cfg, const Vocabulary& vocab) {
    SuiteOptions o;
    o.decode = decode_config(cfg, vocab);
    o.watermark = cfg.watermark;
    if (cfg.watermark_image) o.watermark.image = load_image(*cfg.watermark_image);
    o.jobs = cfg.jobs;
    o.watermark_in_main_pass = cfg.watermark_in_main_pass;
    o.per_step_visual = cfg.per_step_visual;
    o.trace = cfg.trace;
    return o;
}

json config_to_json(const EngineConfig& cfg) {
    json j{{"lambda", cfg.decode.lambda},
           {"beta", cfg.decode.beta},
           {"tau", cfg.decode.tau.value()},
           {"gain", to_string(cfg.decode.gain_mode)},
           {"k", cfg.decode.candidate_k},
           {"fusion", to_string(cfg.decode.fusion)},
           {"amateur_mode", to_string(cfg.decode.amateur_mode)},
           {"max_tokens", cfg.decode.max_tokens},
           {"stop_tokens", cfg.stop_tokens},
           {"normalize_rows", cfg.decode.normalize_rows},
           {"sample", cfg.decode.sample},
           {"seed", cfg.seed},
           {"jobs", cfg.jobs},
           {"alpha", cfg.watermark.alpha},
           {"anchor", {cfg.watermark.anchor_x, cfg.watermark.anchor_y}},
           {"scale", cfg.watermark.scale},
           {"blend", blend_name(cfg.watermark.blend)},
           {"probe_question", cfg.watermark.probe_question},
           {"expected_answer", cfg.watermark.expected_answer},
           {"watermark_in_main_pass", cfg.watermark_in_main_pass},
           {"per_step_visual", cfg.per_step_visual}};
    auto path = [](const std::optional<std::filesystem::path>& p) { return p ? json(p->string()) : json(nullptr); };
    j["watermark_image"] = path(cfg.watermark_image);
    j["trace"] = path(cfg.trace);
    j["dataset"] = path(cfg.dataset);
    j["out"] = path(cfg.out);
    return j;
}

}  // namespace tcd

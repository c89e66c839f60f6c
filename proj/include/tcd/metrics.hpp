// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tcd {

enum class Answer { yes, no, invalid };

Answer parse_answer_label(std::string_view text);
std::string_view to_string(Answer a);

struct BinarySample {
    std::string id;
    Answer gold = Answer::no;
    Answer predicted = Answer::invalid;
    std::string image_id;  // pairs questions for MME scoring
    std::string split;     // e.g. random / popular / adversarial
};

/// Confusion-matrix metrics with "yes" as the positive class. An invalid
/// prediction counts as a false negative on a "yes" item and a false positive
/// on a "no" item.
struct BinaryReport {
    std::size_t total = 0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::size_t invalid = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double yes_ratio = 0.0;
};

BinaryReport binary_metrics(std::span<const BinarySample> samples);

struct GenerativeSample {
    std::string id;
    std::set<std::string> mentioned;
    std::set<std::string> gt;
    std::set<std::string> cog_prone;
};

/// Lower-cases and de-duplicates the object sets.
GenerativeSample make_generative_sample(std::string id, const std::vector<std::string>& mentioned,
                                        const std::vector<std::string>& gt,
                                        const std::vector<std::string>& cog_prone);

struct AmberReport {
    std::size_t samples = 0;
    double chair = 0.0;
    double cover = 0.0;
    double hal_rate = 0.0;
    double cog = 0.0;
    std::vector<std::string> empty_gt;  // excluded from the Cover denominator
};

AmberReport amber_metrics(std::span<const GenerativeSample> samples);

struct MmePair {
    std::string image_id;
    BinarySample first;
    BinarySample second;
};

/// Groups questions by image_id; every image must contribute exactly two.
std::vector<MmePair> group_mme_pairs(std::span<const BinarySample> samples);

/// 100 * accuracy + 100 * accuracy_plus, in [0, 200].
double mme_score(std::span<const MmePair> pairs);

}  // namespace tcd

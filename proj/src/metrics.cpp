// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcd/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "tcd/error.hpp"

namespace tcd {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

bool correct(const BinarySample& s) { return s.predicted == s.gold; }

}  // namespace

Answer parse_answer_label(std::string_view text) {
    const auto t = lower(text);
    if (t == "yes") return Answer::yes;
    if (t == "no") return Answer::no;
    return Answer::invalid;
}

std::string_view to_string(Answer a) {
    switch (a) {
        case Answer::yes: return "yes";
        case Answer::no: return "no";
        case Answer::invalid: return "invalid";
    }
    return "invalid";
}

BinaryReport binary_metrics(std::span<const BinarySample> samples) {
    if (samples.empty()) throw ParameterError("binary_metrics needs at least one sample");
    BinaryReport r;
    std::size_t predicted_yes = 0;
    for (const auto& s : samples) {
        if (s.gold == Answer::invalid) throw ValidationError("sample '" + s.id + "' has no yes/no gold label");
        if (s.predicted == Answer::invalid) ++r.invalid;
        if (s.predicted == Answer::yes) ++predicted_yes;
        if (s.gold == Answer::yes) {
            (s.predicted == Answer::yes ? r.tp : r.fn)++;
        } else {
            (s.predicted == Answer::no ? r.tn : r.fp)++;
        }
    }
    r.total = samples.size();
    r.accuracy = ratio(static_cast<double>(r.tp + r.tn), static_cast<double>(r.total));
    r.precision = ratio(static_cast<double>(r.tp), static_cast<double>(r.tp + r.fp));
    r.recall = ratio(static_cast<double>(r.tp), static_cast<double>(r.tp + r.fn));
    // Same value as 2PR / (P + R), but exact in rational arithmetic.
    r.f1 = ratio(2.0 * static_cast<double>(r.tp), static_cast<double>(2 * r.tp + r.fp + r.fn));
    r.yes_ratio = ratio(static_cast<double>(predicted_yes), static_cast<double>(r.total));
    return r;
}

GenerativeSample make_generative_sample(std::string id, const std::vector<std::string>& mentioned,
                                        const std::vector<std::string>& gt,
                                        const std::vector<std::string>& cog_prone) {
    GenerativeSample s;
    s.id = std::move(id);
    for (const auto& m : mentioned) s.mentioned.insert(lower(m));
    for (const auto& g : gt) s.gt.insert(lower(g));
    for (const auto& c : cog_prone) s.cog_prone.insert(lower(c));
    return s;
}

AmberReport amber_metrics(std::span<const GenerativeSample> samples) {
    if (samples.empty()) throw ParameterError("amber_metrics needs at least one sample");
    AmberReport r;
    r.samples = samples.size();
    std::size_t mentioned = 0, hallucinated = 0, covered = 0, gt_total = 0, cog = 0, with_hallucination = 0;
    for (const auto& s : samples) {
        std::size_t halluc_here = 0;
        for (const auto& m : s.mentioned) {
            if (s.gt.contains(m)) {
                ++covered;
            } else {
                ++halluc_here;
                if (s.cog_prone.contains(m)) ++cog;
            }
        }
        mentioned += s.mentioned.size();
        hallucinated += halluc_here;
        if (halluc_here > 0) ++with_hallucination;
        if (s.gt.empty()) {
            r.empty_gt.push_back(s.id);
        } else {
            gt_total += s.gt.size();
        }
    }
    r.chair = ratio(static_cast<double>(hallucinated), static_cast<double>(mentioned));
    r.cover = ratio(static_cast<double>(covered), static_cast<double>(gt_total));
    r.hal_rate = ratio(static_cast<double>(with_hallucination), static_cast<double>(r.samples));
    r.cog = ratio(static_cast<double>(cog), static_cast<double>(mentioned));
    return r;
}

std::vector<MmePair> group_mme_pairs(std::span<const BinarySample> samples) {
    std::map<std::string, std::vector<const BinarySample*>> by_image;
    std::vector<std::string> order;
    for (const auto& s : samples) {
        if (s.image_id.empty()) throw DataError("MME sample '" + s.id + "' has no image_id");
        auto& bucket = by_image[s.image_id];
        if (bucket.empty()) order.push_back(s.image_id);
        bucket.push_back(&s);
    }
    std::vector<MmePair> pairs;
    pairs.reserve(order.size());
    for (const auto& image : order) {
        const auto& qs = by_image[image];
        if (qs.size() != 2) {
            throw DataError("MME image '" + image + "' has " + std::to_string(qs.size()) +
                                  " questions; expected exactly 2");
        }
        pairs.push_back(MmePair{image, *qs[0], *qs[1]});
    }
    return pairs;
}

double mme_score(std::span<const MmePair> pairs) {
    if (pairs.empty()) throw ParameterError("mme_score needs at least one image");
    std::size_t right = 0, both = 0;
    for (const auto& p : pairs) {
        const bool a = correct(p.first), b = correct(p.second);
        right += static_cast<std::size_t>(a) + static_cast<std::size_t>(b);
        if (a && b) ++both;
    }
    const auto n = static_cast<double>(pairs.size());
    return 100.0 * static_cast<double>(right) / (2.0 * n) + 100.0 * static_cast<double>(both) / n;
}

}  // namespace tcd

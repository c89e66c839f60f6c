// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcd/synth_fixtures.hpp"

#include <algorithm>

#include "tcd/error.hpp"
#include "tcd/synthetic_model.hpp"
#include "tcd/watermark.hpp"

namespace tcd {

using nlohmann::json;

namespace {

constexpr double kProbeBoost = 10.0;
constexpr double kGroundedBoost = 6.0;
constexpr double kEosBoost = 12.0;
constexpr double kUnbiasedPrior = 1.0;

// Counter-based generator so fixtures are identical across standard libraries.
class FixtureRng {
public:
    explicit FixtureRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t x = (state_ += 0x9e3779b97f4a7c15ull);
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }
    std::size_t uniform(std::size_t lo, std::size_t hi) {  // inclusive
        return lo + static_cast<std::size_t>(next() % (hi - lo + 1));
    }
    double real(double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(next() >> 11) * 0x1.0p-53);
    }

private:
    std::uint64_t state_;
};

// Grounded layer and prior depth. Candidate layers below j_v stay base-only
// so the JSD search picks an amateur layer without the grounded boost.
struct Depths {
    std::size_t grounded;
    std::size_t prior;
};

Depths draw_depths(FixtureRng& rng, std::size_t L) {
    if (L < 16) throw ParameterError("fixtures need at least 16 layers");
    const std::size_t lo = L >= 20 ? L - 18 : 2;
    const std::size_t jv = rng.uniform(lo, L - 10);
    return Depths{jv, rng.uniform(jv + 3, L - 2)};
}

json injection(std::size_t layer, const std::string& token, double boost, const std::string& condition,
               std::optional<std::uint32_t> at_step) {
    json j{{"layer", layer}, {"token", token}, {"boost", boost}, {"condition", condition}};
    j["at_step"] = at_step ? json(*at_step) : json(nullptr);
    return j;
}

json prior(const std::string& token, double bias, std::uint32_t at_step) {
    return json{{"token", token}, {"bias", bias}, {"at_step", at_step}};
}

json base_dataset(const char* suite, std::size_t L) {
    return json{{"suite", suite},
                {"num_layers", L},
                {"vocab", synthetic_vocabulary().tokens()},
                {"object_lexicon", synthetic_objects()},
                {"samples", json::array()}};
}

// One yes/no question driven by the grounded/biased mechanism.
json binary_sample(FixtureRng& rng, std::size_t L, const std::string& id, const std::string& object, bool gold_yes,
                   bool biased) {
    const Depths d = draw_depths(rng, L);
    const std::string gold = gold_yes ? "yes" : "no";
    const std::string wrong = gold_yes ? "no" : "yes";
    json syn{{"seed", rng.next()}, {"prior_depth", d.prior}, {"base_scale", 0.5}};
    syn["injections"] = json::array({
        injection(d.grounded, std::string(kDefaultExpectedAnswer), kProbeBoost, "captcha", 0),
        injection(d.grounded, gold, kGroundedBoost, "Is there", 0),
        injection(1, "</s>", kEosBoost, "", 1),
    });
    syn["prior_bias"] = json::array(
        {biased ? prior(wrong, kGroundedBoost + rng.real(0.6, 1.2), 0) : prior(gold, kUnbiasedPrior, 0)});
    return json{{"id", id},
                {"question", "Is there a " + object + " in the image?"},
                {"label", gold},
                {"biased", biased},
                {"grounded_layer", d.grounded},
                {"synthetic", std::move(syn)}};
}

}  // namespace

Vocabulary synthetic_vocabulary() {
    std::vector<std::string> t{"<s>", "</s>", "<unk>", "yes", "no", "Yes", "No"};
    for (char c = '0'; c <= '9'; ++c) t.emplace_back(1, c);
    for (char c = 'a'; c <= 'z'; ++c) t.emplace_back(1, c);
    for (const auto& o : synthetic_objects()) t.push_back(o);
    for (const char* w : {"the", "is", "in", "and", "of", "with", "on", "."}) t.emplace_back(w);
    return Vocabulary::with_angle_specials(std::move(t));
}

const std::vector<std::string>& synthetic_objects() {
    static const std::vector<std::string> objects{"dog",   "cat",  "car",  "person", "chair",   "table",
                                                  "bottle", "cup", "bicycle", "bird", "horse", "boat",
                                                  "tv",    "laptop", "book", "clock"};
    return objects;
}

json make_pope_fixture(const FixtureOptions& opts) {
    if (opts.samples == 0) throw ParameterError("fixture needs at least one sample");
    FixtureRng rng(opts.seed);
    static const char* kSplits[] = {"random", "popular", "adversarial"};
    json d = base_dataset("pope", opts.num_layers);
    const auto& objects = synthetic_objects();
    for (std::size_t i = 0; i < opts.samples; ++i) {
        json s = binary_sample(rng, opts.num_layers, "pope-" + std::to_string(i), objects[i % objects.size()],
                               i % 2 == 0, (i / 2) % 2 == 1);
        s["split"] = kSplits[i % 3];
        s["image_id"] = "img" + std::to_string(i);
        d["samples"].push_back(std::move(s));
    }
    return d;
}

json make_mme_fixture(const FixtureOptions& opts) {
    if (opts.samples == 0) throw ParameterError("fixture needs at least one sample");
    FixtureRng rng(opts.seed);
    static const char* kSubtasks[] = {"existence", "count", "position", "color"};
    json d = base_dataset("mme", opts.num_layers);
    const auto& objects = synthetic_objects();
    const std::size_t images = (opts.samples + 1) / 2;
    for (std::size_t img = 0; img < images; ++img) {
        const bool biased = img % 2 == 1;
        for (std::size_t q = 0; q < 2; ++q) {
            const std::size_t i = 2 * img + q;
            json s = binary_sample(rng, opts.num_layers, "mme-" + std::to_string(i),
                                   objects[(img + q * 5) % objects.size()], q == 0, biased);
            s["image_id"] = "img" + std::to_string(img);
            s["subtask"] = kSubtasks[img % 4];
            d["samples"].push_back(std::move(s));
        }
    }
    return d;
}

json make_amber_fixture(const FixtureOptions& opts) {
    if (opts.samples == 0) throw ParameterError("fixture needs at least one sample");
    FixtureRng rng(opts.seed);
    json d = base_dataset("amber", opts.num_layers);
    d["prompt_suffix"] = "";
    d["cog_prone"] = {"chair", "table", "cup", "bottle", "book"};
    const auto& objects = synthetic_objects();
    for (std::size_t i = 0; i < opts.samples; ++i) {
        const Depths dep = draw_depths(rng, opts.num_layers);
        std::vector<std::string> pool = objects;
        const std::size_t m = rng.uniform(1, 3);
        std::vector<std::string> gt;
        for (std::size_t k = 0; k < m; ++k) {
            const std::size_t pick = rng.uniform(0, pool.size() - 1);
            gt.push_back(pool[pick]);
            pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
        }
        const bool biased = i % 2 == 1;
        json syn{{"seed", rng.next()}, {"prior_depth", dep.prior}, {"base_scale", 0.5}};
        syn["injections"] = json::array({injection(dep.grounded, std::string(kDefaultExpectedAnswer), kProbeBoost,
                                                   "captcha", 0)});
        syn["prior_bias"] = json::array();
        const std::size_t biased_step = rng.uniform(0, m - 1);
        const std::string absent = pool[rng.uniform(0, pool.size() - 1)];
        for (std::size_t k = 0; k < m; ++k) {
            const auto step = static_cast<std::uint32_t>(k);
            syn["injections"].push_back(injection(dep.grounded, gt[k], kGroundedBoost, "Describe", step));
            if (biased && k == biased_step) {
                syn["prior_bias"].push_back(prior(absent, kGroundedBoost + rng.real(0.6, 1.2), step));
            } else {
                syn["prior_bias"].push_back(prior(gt[k], kUnbiasedPrior, step));
            }
        }
        syn["injections"].push_back(injection(1, "</s>", kEosBoost, "", static_cast<std::uint32_t>(m)));
        d["samples"].push_back(json{{"id", "amber-" + std::to_string(i)},
                                    {"question", "Describe the image."},
                                    {"gt_objects", gt},
                                    {"biased", biased},
                                    {"grounded_layer", dep.grounded},
                                    {"synthetic", std::move(syn)}});
    }
    return d;
}

TraceArchive make_synthetic_trace(const FixtureOptions& opts, std::size_t steps) {
    if (opts.samples == 0) throw ParameterError("trace fixture needs at least one sample");
    if (steps == 0) throw ParameterError("trace fixture needs at least one step");
    FixtureRng rng(opts.seed);
    const Vocabulary vocab = synthetic_vocabulary();
    const auto& objects = synthetic_objects();
    const TokenId probe_answer = vocab.require(kDefaultExpectedAnswer, "expected_answer");

    TraceArchive a;
    a.model = "synthetic";
    a.num_layers = opts.num_layers;
    a.vocab = vocab;
    for (std::size_t l = 1; l <= opts.num_layers; ++l) a.layer_ids.push_back(l);
    a.metadata = json{{"generator", "tcd synth"}, {"seed", opts.seed}, {"rows", "raw logits"}};

    for (std::size_t i = 0; i < opts.samples; ++i) {
        const bool gold_yes = i % 2 == 0;
        json desc = binary_sample(rng, opts.num_layers, "s" + std::to_string(i), objects[i % objects.size()],
                                  gold_yes, (i / 2) % 2 == 1);
        // Keep the host generating until the last recorded step.
        desc["synthetic"]["injections"][2]["at_step"] = steps - 1;

        SyntheticModelConfig cfg;
        cfg.seed = desc["synthetic"]["seed"].get<std::uint64_t>();
        cfg.num_layers = opts.num_layers;
        cfg.vocab = vocab;
        cfg.prior_depth = desc["synthetic"]["prior_depth"].get<std::size_t>();
        for (const auto& ij : desc["synthetic"]["injections"]) {
            cfg.injections.push_back(Injection{ij["layer"].get<std::size_t>(),
                                               vocab.require(ij["token"].get<std::string>(), "token"),
                                               ij["boost"].get<double>(), ij["condition"].get<std::string>(),
                                               ij["at_step"].get<std::uint32_t>()});
        }
        for (const auto& pj : desc["synthetic"]["prior_bias"]) {
            cfg.prior_bias.push_back(PriorBias{vocab.require(pj["token"].get<std::string>(), "token"),
                                               pj["bias"].get<double>(), pj["at_step"].get<std::uint32_t>()});
        }
        const SyntheticModel model(cfg);

        TraceSample s;
        s.id = desc["id"].get<std::string>();
        s.question = desc["question"].get<std::string>();
        s.metadata = json{{"label", desc["label"]}, {"grounded_layer", desc["grounded_layer"]}};

        DecodeContext probe{s.id, nullptr, std::string(kDefaultProbeQuestion), {}};
        for (std::uint32_t pos = 0;; ++pos) {
            LayerLogitStack stack = model.step(probe);
            const auto top = static_cast<TokenId>(argmax(stack.row(opts.num_layers)));
            if (!vocab.is_special(top) || pos + 1 >= 8) {
                s.probe = TraceProbe{probe.question, vocab.token(probe_answer), pos, std::move(stack)};
                break;
            }
            probe.prefix.push_back(top);
        }

        DecodeContext ctx{s.id, nullptr, s.question, {}};
        for (std::size_t k = 0; k < steps; ++k) {
            LayerLogitStack stack = model.step(ctx);
            const auto top = static_cast<TokenId>(argmax(stack.row(opts.num_layers)));
            s.steps.push_back(std::move(stack));
            s.greedy_tokens.push_back(top);
            ctx.prefix.push_back(top);
        }
        a.samples.push_back(std::move(s));
    }
    return a;
}

}  // namespace tcd

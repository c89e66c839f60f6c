// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcd/suite.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "tcd/error.hpp"
#include "tcd/layer_select.hpp"
#include "tcd/trace.hpp"

namespace tcd {

using nlohmann::json;

namespace {

constexpr std::string_view kSentencePieceMarker = "\xE2\x96\x81";  // U+2581
constexpr std::string_view kByteLevelMarker = "\xC4\xA0";          // U+0120

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string_view strip_marker(std::string_view t) {
    for (auto m : {kSentencePieceMarker, kByteLevelMarker}) {
        if (t.starts_with(m)) return t.substr(m.size());
    }
    return t;
}

bool has_marker(std::string_view t) { return strip_marker(t).size() != t.size(); }

std::vector<std::string> words_of(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

TokenId token_field(const json& j, const Vocabulary& vocab, const std::string& where) {
    if (j.is_number_unsigned()) {
        const auto id = j.get<std::uint64_t>();
        if (id >= vocab.size()) throw FormatError(where + ": token id " + std::to_string(id) + " out of range");
        return static_cast<TokenId>(id);
    }
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (auto id = vocab.find(s)) return *id;
        throw FormatError(where + ": '" + s + "' is not a vocabulary token");
    }
    throw FormatError(where + ": token must be a string or a non-negative id");
}

std::optional<std::uint32_t> step_field(const json& j) {
    if (!j.contains("at_step") || j["at_step"].is_null()) return std::nullopt;
    return j["at_step"].get<std::uint32_t>();
}

SyntheticModelConfig parse_synthetic(const json& j, const Dataset& d, const std::string& where) {
    SyntheticModelConfig cfg;
    cfg.vocab = d.vocab;
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.num_layers = j.value("num_layers", d.num_layers);
    cfg.prior_depth = j.value("prior_depth", std::size_t{0});
    cfg.base_scale = j.value("base_scale", 0.5);
    for (const auto& ij : j.value("injections", json::array())) {
        Injection inj;
        inj.layer = ij.at("layer").get<std::size_t>();
        inj.token = token_field(ij.at("token"), d.vocab, where + ".injections");
        inj.boost = ij.at("boost").get<double>();
        inj.condition = ij.value("condition", std::string{});
        inj.at_step = step_field(ij);
        cfg.injections.push_back(std::move(inj));
    }
    for (const auto& pj : j.value("prior_bias", json::array())) {
        PriorBias pb;
        pb.token = token_field(pj.at("token"), d.vocab, where + ".prior_bias");
        pb.bias = pj.at("bias").get<double>();
        pb.at_step = step_field(pj);
        cfg.prior_bias.push_back(std::move(pb));
    }
    try {
        cfg.validate();
    } catch (const ValidationError& e) {
        throw FormatError(where + ".synthetic: " + e.what());
    }
    return cfg;
}

bool is_binary(SuiteKind k) { return k != SuiteKind::amber; }

json binary_json(const BinaryReport& r) {
    return json{{"total", r.total},         {"tp", r.tp},
                {"fp", r.fp},               {"tn", r.tn},
                {"fn", r.fn},               {"invalid", r.invalid},
                {"accuracy", r.accuracy},   {"precision", r.precision},
                {"recall", r.recall},       {"f1", r.f1},
                {"yes_ratio", r.yes_ratio}};
}

json pope_metrics(const std::vector<BinarySample>& samples) {
    std::map<std::string, std::vector<BinarySample>> by_split;
    for (const auto& s : samples) by_split[s.split.empty() ? "default" : s.split].push_back(s);
    json out;
    json splits = json::object();
    double acc = 0.0, prec = 0.0, rec = 0.0, f1 = 0.0;
    for (const auto& [name, group] : by_split) {
        const auto r = binary_metrics(group);
        splits[name] = binary_json(r);
        acc += r.accuracy;
        prec += r.precision;
        rec += r.recall;
        f1 += r.f1;
    }
    const auto n = static_cast<double>(by_split.size());
    out["splits"] = std::move(splits);
    out["all"] = binary_json(binary_metrics(samples));
    out["all_macro"] = json{{"accuracy", acc / n}, {"precision", prec / n}, {"recall", rec / n}, {"f1", f1 / n}};
    return out;
}

json mme_metrics(const std::vector<BinarySample>& samples, const std::vector<std::string>& subtasks) {
    std::map<std::string, std::vector<BinarySample>> by_task;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        by_task[subtasks[i].empty() ? "default" : subtasks[i]].push_back(samples[i]);
    }
    json tasks = json::object();
    double total = 0.0;
    for (const auto& [name, group] : by_task) {
        const auto pairs = group_mme_pairs(group);
        const double score = mme_score(pairs);
        tasks[name] = score;
        total += score;
    }
    return json{{"subtasks", std::move(tasks)}, {"total", total}, {"binary", binary_json(binary_metrics(samples))}};
}

json amber_json(const AmberReport& r) {
    return json{{"samples", r.samples}, {"chair", r.chair},       {"cover", r.cover},
                {"hal_rate", r.hal_rate}, {"cog", r.cog}, {"empty_gt", r.empty_gt}};
}

struct SampleSlot {
    std::optional<SampleOutcome> outcome;
    std::vector<std::string> warnings;
    std::exception_ptr error;
};

DecodeOutcome finish(const Dataset& d, const Vocabulary& vocab, GenerationResult r) {
    DecodeOutcome o;
    o.tokens = std::move(r.tokens);
    o.termination = r.termination;
    o.text = detokenize(vocab, o.tokens);
    if (is_binary(d.suite)) {
        o.answer = parse_binary_answer(vocab, o.tokens);
    } else {
        o.mentioned = extract_objects(o.text, d.object_lexicon);
    }
    return o;
}

template <typename Fn>
GenerationResult run_decoder(Fn&& fn, const std::string& id, const char* which, std::vector<std::string>& warnings) {
    try {
        return fn();
    } catch (const DecodeInterrupted& e) {
        warnings.push_back("sample '" + id + "': " + which + " decode stopped early: " + e.what());
        return e.partial();
    }
}

}  // namespace

SuiteKind parse_suite_kind(std::string_view text) {
    if (text == "pope") return SuiteKind::pope;
    if (text == "mme") return SuiteKind::mme;
    if (text == "amber") return SuiteKind::amber;
    throw ConfigError("suite", "expected pope, mme or amber, got '" + std::string(text) + "'");
}

std::string_view to_string(SuiteKind kind) {
    switch (kind) {
        case SuiteKind::pope: return "pope";
        case SuiteKind::mme: return "mme";
        case SuiteKind::amber: return "amber";
    }
    return "pope";
}

std::string Dataset::prompt(const DatasetSample& s) const {
    if (prompt_suffix.empty()) return s.question;
    return s.question + " " + prompt_suffix;
}

Dataset parse_dataset(const json& j, const std::filesystem::path& base_dir) {
    Dataset d;
    try {
        if (!j.is_object()) throw FormatError("dataset: top level must be an object");
        d.suite = parse_suite_kind(j.value("suite", std::string{"pope"}));
        d.prompt_suffix = j.value("prompt_suffix",
                                  is_binary(d.suite) ? std::string(kDefaultPromptSuffix) : std::string{});
        if (j.contains("trace")) d.trace = base_dir / j["trace"].get<std::string>();
        d.num_layers = j.value("num_layers", std::size_t{32});
        if (j.contains("vocab")) {
            auto tokens = j["vocab"].get<std::vector<std::string>>();
            if (j.contains("special_tokens")) {
                std::vector<TokenId> special;
                Vocabulary plain(tokens, {});
                for (const auto& t : j["special_tokens"]) special.push_back(token_field(t, plain, "special_tokens"));
                d.vocab = Vocabulary(std::move(tokens), std::move(special));
            } else {
                d.vocab = Vocabulary::with_angle_specials(std::move(tokens));
            }
        }
        d.object_lexicon = j.value("object_lexicon", std::vector<std::string>{});
        d.cog_prone = j.value("cog_prone", std::vector<std::string>{});
        const std::filesystem::path default_image =
            j.contains("image") ? base_dir / j["image"].get<std::string>() : std::filesystem::path{};

        for (const auto& sj : j.at("samples")) {
            DatasetSample s;
            s.id = sj.at("id").get<std::string>();
            const std::string where = "sample '" + s.id + "'";
            s.question = sj.at("question").get<std::string>();
            if (is_binary(d.suite)) {
                s.label = parse_answer_label(sj.at("label").get<std::string>());
                if (s.label == Answer::invalid) throw FormatError(where + ": label must be yes or no");
            }
            s.split = sj.value("split", std::string{});
            s.image_id = sj.value("image_id", std::string{});
            s.subtask = sj.value("subtask", std::string{});
            s.gt_objects = sj.value("gt_objects", std::vector<std::string>{});
            s.image = sj.contains("image") ? base_dir / sj["image"].get<std::string>() : default_image;
            s.trace_sample = sj.value("trace_sample", s.id);
            if (sj.contains("synthetic")) {
                if (d.vocab.size() == 0) throw FormatError(where + ": synthetic samples need a dataset vocab");
                s.synthetic = parse_synthetic(sj["synthetic"], d, where);
            }
            d.samples.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("dataset: ") + e.what());
    } catch (const ValidationError& e) {
        throw FormatError(std::string("dataset: ") + e.what());
    }
    return d;
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("dataset '" + path.string() + "': " + e.what());
    }
    return parse_dataset(j, path.parent_path());
}

Answer parse_binary_answer(const Vocabulary& vocab, std::span<const TokenId> tokens) {
    for (TokenId t : tokens) {
        if (vocab.is_special(t)) continue;
        std::string_view text = strip_marker(vocab.token(t));
        while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
        while (!text.empty() && std::ispunct(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
        return parse_answer_label(text);
    }
    return Answer::invalid;
}

std::string detokenize(const Vocabulary& vocab, std::span<const TokenId> tokens) {
    const bool markers = std::any_of(vocab.tokens().begin(), vocab.tokens().end(),
                                     [](const std::string& t) { return has_marker(t); });
    std::string out;
    for (TokenId t : tokens) {
        if (vocab.is_special(t)) continue;
        const std::string& tok = vocab.token(t);
        if (markers) {
            if (has_marker(tok)) {
                if (!out.empty()) out.push_back(' ');
                out.append(strip_marker(tok));
            } else {
                out.append(tok);
            }
        } else {
            if (!out.empty()) out.push_back(' ');
            out.append(tok);
        }
    }
    return out;
}

std::vector<std::string> extract_objects(std::string_view text, const std::vector<std::string>& lexicon) {
    const auto words = words_of(text);
    std::vector<std::string> found;
    for (const auto& entry : lexicon) {
        const auto needle = words_of(entry);
        if (needle.empty() || needle.size() > words.size()) continue;
        const auto it = std::search(words.begin(), words.end(), needle.begin(), needle.end());
        if (it == words.end()) continue;
        auto name = lower(entry);
        if (std::find(found.begin(), found.end(), name) == found.end()) found.push_back(std::move(name));
    }
    return found;
}

SuiteReport run_suite(const Dataset& dataset, const SuiteOptions& opts) {
    if (dataset.samples.empty()) throw ParameterError("dataset has no samples");
    opts.decode.validate();
    opts.watermark.validate();
    if (opts.jobs == 0) throw ConfigError("jobs", "must be >= 1");

    SuiteReport report;
    report.suite = dataset.suite;
    report.total = dataset.samples.size();

    std::shared_ptr<const TraceModel> trace_model;
    const auto trace_dir = opts.trace ? opts.trace : dataset.trace;
    if (trace_dir) trace_model = std::make_shared<TraceModel>(std::make_shared<TraceArchive>(read_trace(*trace_dir)));

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const auto& s = dataset.samples[i];
        if (s.synthetic) {
            todo.push_back(i);
        } else if (trace_model && trace_model->has_sample(s.trace_sample)) {
            todo.push_back(i);
        } else if (trace_model) {
            report.skipped.push_back(s.id);
            report.warnings.push_back("sample '" + s.id + "': trace has no sample '" + s.trace_sample + "', skipped");
        } else {
            throw FormatError("sample '" + s.id + "' has neither a synthetic config nor a trace");
        }
    }
    if (todo.empty()) throw DataError("no dataset sample could be evaluated");

    VisualLayerCache cache;
    std::vector<SampleSlot> slots(todo.size());

    auto evaluate = [&](std::size_t slot) {
        const DatasetSample& s = dataset.samples[todo[slot]];
        SampleSlot& out = slots[slot];
        std::unique_ptr<SyntheticModel> synthetic;
        const LayeredModel* model = trace_model.get();
        if (s.synthetic) {
            synthetic = std::make_unique<SyntheticModel>(*s.synthetic);
            model = synthetic.get();
        }

        DecodeContext ctx;
        ctx.sample_id = s.synthetic ? s.id : s.trace_sample;
        ctx.question = dataset.prompt(s);
        if (!s.image.empty()) ctx.image = std::make_shared<const ImageBuffer>(load_image(s.image));

        const PrepassResult pre = cache.get_or_compute(ctx.sample_id, [&] {
            return run_watermark_prepass(*model, ctx, opts.watermark, opts.decode.gain_mode, opts.decode.tau);
        });

        DecodeConfig cfg = opts.decode;
        if (cfg.stop_tokens.empty()) cfg.stop_tokens = model->vocab().special_ids();
        if (opts.per_step_visual) cfg.per_step_visual_token = pre.answer_token;

        DecodeContext main_ctx = ctx;
        if (opts.watermark_in_main_pass && ctx.image && !opts.watermark.image.empty()) {
            main_ctx.image = std::make_shared<const ImageBuffer>(embed_watermark(*ctx.image, opts.watermark));
        }

        SampleOutcome o;
        o.id = s.id;
        o.visual_layer = pre.choice.layer;
        o.gain_profile = pre.choice.gains;
        auto tcd = run_decoder([&] { return decode_greedy(*model, main_ctx, pre.choice.layer, cfg); }, s.id, "TCD",
                               out.warnings);
        o.steps = tcd.steps;
        o.tcd = finish(dataset, model->vocab(), std::move(tcd));
        o.baseline = finish(dataset, model->vocab(),
                            run_decoder([&] { return decode_mature_greedy(*model, ctx, cfg); }, s.id, "baseline",
                                        out.warnings));
        out.outcome = std::move(o);
    };

    const std::size_t workers = std::min(opts.jobs, todo.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < todo.size(); ++i) {
            try {
                evaluate(i);
            } catch (...) {
                slots[i].error = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < todo.size(); i = next++) {
                    try {
                        evaluate(i);
                    } catch (...) {
                        slots[i].error = std::current_exception();
                    }
                }
            });
        }
    }

    for (auto& slot : slots) {
        if (slot.error) std::rethrow_exception(slot.error);
        report.warnings.insert(report.warnings.end(), slot.warnings.begin(), slot.warnings.end());
        report.outcomes.push_back(std::move(*slot.outcome));
    }

    json metrics;
    if (is_binary(dataset.suite)) {
        std::vector<BinarySample> tcd, base;
        std::vector<std::string> subtasks;
        for (std::size_t i = 0; i < todo.size(); ++i) {
            const auto& s = dataset.samples[todo[i]];
            const auto& o = report.outcomes[i];
            tcd.push_back(BinarySample{s.id, s.label, o.tcd.answer, s.image_id, s.split});
            base.push_back(BinarySample{s.id, s.label, o.baseline.answer, s.image_id, s.split});
            subtasks.push_back(s.subtask);
        }
        if (dataset.suite == SuiteKind::pope) {
            metrics["tcd"] = pope_metrics(tcd);
            metrics["baseline"] = pope_metrics(base);
        } else {
            metrics["tcd"] = mme_metrics(tcd, subtasks);
            metrics["baseline"] = mme_metrics(base, subtasks);
        }
    } else {
        std::vector<GenerativeSample> tcd, base;
        for (std::size_t i = 0; i < todo.size(); ++i) {
            const auto& s = dataset.samples[todo[i]];
            const auto& o = report.outcomes[i];
            tcd.push_back(make_generative_sample(s.id, o.tcd.mentioned, s.gt_objects, dataset.cog_prone));
            base.push_back(make_generative_sample(s.id, o.baseline.mentioned, s.gt_objects, dataset.cog_prone));
        }
        metrics["tcd"] = amber_json(amber_metrics(tcd));
        metrics["baseline"] = amber_json(amber_metrics(base));
    }
    report.metrics = std::move(metrics);
    return report;
}

json report_to_json(const SuiteReport& report) {
    return json{{"suite", to_string(report.suite)},
                {"samples", report.total},
                {"evaluated", report.outcomes.size()},
                {"skipped", report.skipped},
                {"warnings", report.warnings.size()},
                {"tcd", report.metrics.at("tcd")},
                {"baseline", report.metrics.at("baseline")}};
}

std::string report_jsonl(const SuiteReport& report, const Dataset& dataset) {
    std::map<std::string, const DatasetSample*> by_id;
    for (const auto& s : dataset.samples) by_id.emplace(s.id, &s);
    std::ostringstream os;
    for (const auto& o : report.outcomes) {
        json line{{"id", o.id},
                  {"visual_layer", o.visual_layer},
                  {"tcd_text", o.tcd.text},
                  {"tcd_tokens", o.tcd.tokens},
                  {"tcd_termination", to_string(o.tcd.termination)},
                  {"baseline_text", o.baseline.text},
                  {"baseline_tokens", o.baseline.tokens},
                  {"baseline_termination", to_string(o.baseline.termination)}};
        const auto* s = by_id.at(o.id);
        if (is_binary(report.suite)) {
            line["gold"] = to_string(s->label);
            line["tcd_answer"] = to_string(o.tcd.answer);
            line["baseline_answer"] = to_string(o.baseline.answer);
        } else {
            line["gt_objects"] = s->gt_objects;
            line["tcd_mentioned"] = o.tcd.mentioned;
            line["baseline_mentioned"] = o.baseline.mentioned;
        }
        json steps = json::array();
        for (const auto& st : o.steps) {
            steps.push_back(json{{"step", st.step},
                                 {"l_a", st.selection.amateur},
                                 {"l_v", st.selection.visual},
                                 {"plausible", st.plausible_count},
                                 {"token", st.token},
                                 {"score", st.fused_score}});
        }
        line["steps"] = std::move(steps);
        os << line.dump() << '\n';
    }
    return os.str();
}

std::string report_csv(const SuiteReport& report) {
    std::ostringstream os;
    os << "metric,tcd,baseline\n";
    const json& tcd = report.metrics.at("tcd");
    const json& base = report.metrics.at("baseline");
    auto row = [&](const std::string& name, const json& a, const json& b) {
        os << name << ',' << a.dump() << ',' << b.dump() << '\n';
    };
    auto binary_rows = [&](const std::string& prefix, const json& a, const json& b) {
        for (const char* k : {"accuracy", "precision", "recall", "f1", "yes_ratio", "invalid"}) {
            if (a.contains(k)) row(prefix + k, a.at(k), b.at(k));
        }
    };
    switch (report.suite) {
        case SuiteKind::pope:
            for (const auto& [split, v] : tcd.at("splits").items()) {
                binary_rows(split + ".", v, base.at("splits").at(split));
            }
            binary_rows("all.", tcd.at("all"), base.at("all"));
            binary_rows("all_macro.", tcd.at("all_macro"), base.at("all_macro"));
            break;
        case SuiteKind::mme:
            for (const auto& [task, v] : tcd.at("subtasks").items()) row(task, v, base.at("subtasks").at(task));
            row("total", tcd.at("total"), base.at("total"));
            break;
        case SuiteKind::amber:
            for (const char* k : {"chair", "cover", "hal_rate", "cog"}) row(k, tcd.at(k), base.at(k));
            break;
    }
    return os.str();
}

}  // namespace tcd

// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcd/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "tcd/config.hpp"
#include "tcd/error.hpp"
#include "tcd/layer_select.hpp"
#include "tcd/suite.hpp"
#include "tcd/synth_fixtures.hpp"
#include "tcd/trace.hpp"

namespace tcd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flags shared by every command that builds an EngineConfig. Only flags that
// were given end up in the override object.
struct EngineFlags {
    std::string config;
    double lambda = 0, beta = 0, tau = 0, alpha = 0, scale = 0;
    std::string gain, fusion, amateur_mode, anchor, blend, wm, probe_question, expected_answer;
    std::string trace, dataset, out, seed;
    std::size_t k = 0, max_tokens = 0, jobs = 0;
    std::vector<std::string> stop_tokens;
    bool normalize_rows = false, sampling = false, wm_main = false, per_step_visual = false;
    std::map<std::string, CLI::Option*> opts;

    void add(CLI::App& app) {
        app.add_option("--config", config, "JSON config file");
        opts["lambda"] = app.add_option("--lambda", lambda, "visual-layer weight");
        opts["beta"] = app.add_option("--beta", beta, "plausibility threshold");
        opts["tau"] = app.add_option("--tau", tau, "softmax temperature");
        opts["gain"] = app.add_option("--gain,--mode", gain, "change | log");
        opts["k"] = app.add_option("--k", k, "amateur candidate count");
        opts["fusion"] = app.add_option("--fusion", fusion, "tri | interp");
        opts["amateur_mode"] = app.add_option("--amateur-mode", amateur_mode, "per-step | static");
        opts["max_tokens"] = app.add_option("--max-tokens", max_tokens);
        opts["stop_tokens"] = app.add_option("--stop-token", stop_tokens, "stop token string (repeatable)");
        opts["normalize_rows"] = app.add_flag("--normalize-rows", normalize_rows, "fuse log-softmax rows");
        opts["sample"] = app.add_flag("--sampling", sampling, "sample instead of argmax");
        opts["seed"] = app.add_option("--seed", seed);
        opts["jobs"] = app.add_option("--jobs", jobs, "worker threads");
        opts["trace"] = app.add_option("--trace", trace, "trace directory");
        opts["dataset"] = app.add_option("--dataset", dataset, "dataset manifest");
        opts["out"] = app.add_option("--out", out, "output directory");
        opts["alpha"] = app.add_option("--alpha", alpha, "watermark opacity");
        opts["anchor"] = app.add_option("--anchor", anchor, "x or x,y anchor fractions");
        opts["scale"] = app.add_option("--scale", scale, "watermark scale");
        opts["blend"] = app.add_option("--blend", blend, "additive | convex");
        opts["watermark_image"] = app.add_option("--wm", wm, "watermark image");
        opts["probe_question"] = app.add_option("--probe-question", probe_question);
        opts["expected_answer"] = app.add_option("--expected-answer", expected_answer);
        opts["watermark_in_main_pass"] = app.add_flag("--watermark-main-pass", wm_main);
        opts["per_step_visual"] = app.add_flag("--per-step-visual", per_step_visual);
    }

    json overrides() const {
        json j = json::object();
        auto given = [&](const char* key) { return opts.at(key)->count() > 0; };
        if (given("lambda")) j["lambda"] = lambda;
        if (given("beta")) j["beta"] = beta;
        if (given("tau")) j["tau"] = tau;
        if (given("gain")) j["gain"] = gain;
        if (given("k")) j["k"] = k;
        if (given("fusion")) j["fusion"] = fusion;
        if (given("amateur_mode")) j["amateur_mode"] = amateur_mode;
        if (given("max_tokens")) j["max_tokens"] = max_tokens;
        if (given("stop_tokens")) j["stop_tokens"] = stop_tokens;
        if (given("normalize_rows")) j["normalize_rows"] = normalize_rows;
        if (given("sample")) j["sample"] = sampling;
        if (given("seed")) j["seed"] = seed;
        if (given("jobs")) j["jobs"] = jobs;
        if (given("trace")) j["trace"] = trace;
        if (given("dataset")) j["dataset"] = dataset;
        if (given("out")) j["out"] = out;
        if (given("alpha")) j["alpha"] = alpha;
        if (given("anchor")) j["anchor"] = parse_anchor(anchor);
        if (given("scale")) j["scale"] = scale;
        if (given("blend")) j["blend"] = blend;
        if (given("watermark_image")) j["watermark_image"] = wm;
        if (given("probe_question")) j["probe_question"] = probe_question;
        if (given("expected_answer")) j["expected_answer"] = expected_answer;
        if (given("watermark_in_main_pass")) j["watermark_in_main_pass"] = wm_main;
        if (given("per_step_visual")) j["per_step_visual"] = per_step_visual;
        return j;
    }

    EngineConfig resolve() const {
        const json file = config.empty() ? json(nullptr) : read_config_file(config);
        return resolve_config(file, overrides(), std::getenv("TCD_SEED"));
    }

    static json parse_anchor(const std::string& text) {
        std::vector<double> parts;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                std::size_t used = 0;
                parts.push_back(std::stod(item, &used));
                if (used != item.size()) throw std::invalid_argument(item);
            } catch (const std::exception&) {
                throw ConfigError("anchor", "expected x or x,y, got '" + text + "'");
            }
        }
        if (parts.size() == 1) return parts[0];
        if (parts.size() == 2) return json{parts[0], parts[1]};
        throw ConfigError("anchor", "expected x or x,y, got '" + text + "'");
    }
};

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write '" + path.string() + "'");
    os << content;
    if (!os) throw IoError("short write to '" + path.string() + "'");
}

// A model plus the decoding context for one sample, from either a trace or a
// synthetic dataset.
struct SampleModel {
    std::shared_ptr<const LayeredModel> model;
    DecodeContext ctx;
};

std::shared_ptr<const TraceModel> open_trace(const fs::path& dir) {
    return std::make_shared<TraceModel>(std::make_shared<TraceArchive>(read_trace(dir)));
}

SampleModel from_dataset_sample(const Dataset& d, const DatasetSample& s,
                                const std::shared_ptr<const TraceModel>& trace) {
    SampleModel m;
    m.ctx.question = d.prompt(s);
    if (!s.image.empty()) m.ctx.image = std::make_shared<const ImageBuffer>(load_image(s.image));
    if (s.synthetic) {
        m.model = std::make_shared<SyntheticModel>(*s.synthetic);
        m.ctx.sample_id = s.id;
    } else {
        if (!trace) throw FormatError("sample '" + s.id + "' has neither a synthetic config nor a trace");
        m.model = trace;
        m.ctx.sample_id = s.trace_sample;
    }
    return m;
}

SampleModel open_sample(const EngineConfig& cfg, const std::string& id) {
    if (cfg.dataset) {
        const Dataset d = load_dataset(*cfg.dataset);
        const auto trace_dir = cfg.trace ? cfg.trace : d.trace;
        std::shared_ptr<const TraceModel> trace;
        if (trace_dir) trace = open_trace(*trace_dir);
        for (const auto& s : d.samples) {
            if (s.id == id) return from_dataset_sample(d, s, trace);
        }
        throw DataError("dataset has no sample '" + id + "'");
    }
    if (!cfg.trace) throw ConfigError("trace", "give --trace or --dataset");
    auto trace = open_trace(*cfg.trace);
    const auto& sample = trace->archive().sample(id);
    return SampleModel{trace, DecodeContext{id, nullptr, sample.question, {}}};
}

WatermarkSpec watermark_for(const EngineConfig& cfg) {
    WatermarkSpec spec = cfg.watermark;
    if (cfg.watermark_image) spec.image = load_image(*cfg.watermark_image);
    return spec;
}

json selection_json(const SampleModel& m, const EngineConfig& cfg, const PrepassResult& pre) {
    const LayerLogitStack first = m.model->step(DecodeContext{m.ctx.sample_id, m.ctx.image, m.ctx.question, {}});
    const std::size_t L = m.model->num_layers();
    const auto candidates = CandidateSet::below_mature(L, cfg.decode.candidate_k);
    const auto amateur = select_amateur_layer(first, candidates, cfg.decode.tau);
    return json{{"sample", m.ctx.sample_id},
                {"mature", L},
                {"amateur", amateur.layer},
                {"visual", pre.choice.layer},
                {"gain", to_string(cfg.decode.gain_mode)},
                {"answer", m.model->vocab().token(pre.answer_token)},
                {"probe_position", pre.position},
                {"recorded_probe", pre.recorded},
                {"answer_probs", pre.choice.answer_probs},
                {"gain_profile", pre.choice.gains},
                {"candidates", candidates.layers()},
                {"jsd_profile", amateur.jsd}};
}

int cmd_watermark(const std::string& in, const std::string& out_path, const EngineConfig& cfg, std::ostream& out) {
    if (!cfg.watermark_image) throw ConfigError("watermark_image", "give --wm");
    const WatermarkSpec spec = watermark_for(cfg);
    const ImageBuffer base = load_image(in);
    const auto placement = place_watermark(base.width(), base.height(), spec.image.width(), spec.image.height(), spec);
    const ImageBuffer result = embed_watermark(base, spec);
    save_image(result, out_path);
    out << json{{"out", out_path},
                {"rect", {placement.x0, placement.y0, placement.x1, placement.y1}},
                {"watermark_size", {placement.wm_width, placement.wm_height}},
                {"shrink_iterations", placement.shrink_iterations}}
               .dump()
        << '\n';
    return kExitOk;
}

int cmd_synth(const std::string& kind, const FixtureOptions& fo, std::size_t steps, const std::string& out_path,
              std::ostream& out) {
    if (kind == "trace") {
        const TraceArchive a = make_synthetic_trace(fo, steps);
        write_trace(a, out_path);
        json ds{{"suite", "pope"}, {"trace", "."}, {"samples", json::array()}};
        for (const auto& s : a.samples) {
            ds["samples"].push_back(json{{"id", s.id},
                                         {"question", s.question},
                                         {"label", s.metadata.at("label")},
                                         {"image_id", s.id}});
        }
        write_file(fs::path(out_path) / "dataset.json", ds.dump(2) + "\n");
        out << "wrote trace with " << a.samples.size() << " samples to " << out_path << '\n';
        return kExitOk;
    }
    json d;
    if (kind == "pope") {
        d = make_pope_fixture(fo);
    } else if (kind == "mme") {
        d = make_mme_fixture(fo);
    } else if (kind == "amber") {
        d = make_amber_fixture(fo);
    } else {
        throw ConfigError("kind", "expected pope, mme, amber or trace, got '" + kind + "'");
    }
    write_file(out_path, d.dump(2) + "\n");
    out << "wrote " << d["samples"].size() << " " << kind << " samples to " << out_path << '\n';
    return kExitOk;
}

int cmd_select(const std::string& sample, const std::string& heatmap, const EngineConfig& cfg, std::ostream& out) {
    const WatermarkSpec spec = watermark_for(cfg);
    if (!heatmap.empty()) {
        std::vector<SampleModel> models;
        if (cfg.dataset) {
            const Dataset d = load_dataset(*cfg.dataset);
            const auto trace_dir = cfg.trace ? cfg.trace : d.trace;
            std::shared_ptr<const TraceModel> trace;
            if (trace_dir) trace = open_trace(*trace_dir);
            for (const auto& s : d.samples) models.push_back(from_dataset_sample(d, s, trace));
        } else if (cfg.trace) {
            auto trace = open_trace(*cfg.trace);
            for (const auto& s : trace->archive().samples) {
                models.push_back(SampleModel{trace, DecodeContext{s.id, nullptr, s.question, {}}});
            }
        } else {
            throw ConfigError("trace", "give --trace or --dataset");
        }
        if (models.empty()) throw ParameterError("no samples to select over");
        const std::size_t L = models.front().model->num_layers();
        std::vector<std::size_t> visual(L + 1, 0), amateur(L + 1, 0);
        for (const auto& m : models) {
            if (m.model->num_layers() != L) throw DimensionError("samples disagree on the layer count");
            const auto pre = run_watermark_prepass(*m.model, m.ctx, spec, cfg.decode.gain_mode, cfg.decode.tau);
            const auto sel = selection_json(m, cfg, pre);
            ++visual[pre.choice.layer];
            ++amateur[sel.at("amateur").get<std::size_t>()];
        }
        std::ostringstream csv;
        csv << "layer,visual_count,visual_freq,amateur_count,amateur_freq\n";
        const auto n = static_cast<double>(models.size());
        for (std::size_t l = 1; l <= L; ++l) {
            csv << l << ',' << visual[l] << ',' << json(static_cast<double>(visual[l]) / n).dump() << ','
                << amateur[l] << ',' << json(static_cast<double>(amateur[l]) / n).dump() << '\n';
        }
        fs::path path = heatmap;
        if (cfg.out && path.is_relative()) path = *cfg.out / path;
        write_file(path, csv.str());
        out << "wrote layer frequencies over " << models.size() << " samples to " << path.string() << '\n';
        return kExitOk;
    }
    if (sample.empty()) throw ConfigError("sample", "give --sample or --emit-heatmap");
    const SampleModel m = open_sample(cfg, sample);
    const auto pre = run_watermark_prepass(*m.model, m.ctx, spec, cfg.decode.gain_mode, cfg.decode.tau);
    const auto sel = selection_json(m, cfg, pre);
    out << sel.dump() << '\n';
    if (cfg.out) write_file(*cfg.out / "select.json", sel.dump(2) + "\n");
    return kExitOk;
}

int cmd_decode(const std::string& sample, bool baseline, const EngineConfig& cfg, std::ostream& out,
               std::ostream& err) {
    if (sample.empty()) throw ConfigError("sample", "give --sample");
    const SampleModel m = open_sample(cfg, sample);
    const auto& vocab = m.model->vocab();
    DecodeConfig dc = decode_config(cfg, vocab);
    if (dc.stop_tokens.empty()) dc.stop_tokens = vocab.special_ids();
    const WatermarkSpec spec = watermark_for(cfg);
    const auto pre = run_watermark_prepass(*m.model, m.ctx, spec, dc.gain_mode, dc.tau);
    if (cfg.per_step_visual) dc.per_step_visual_token = pre.answer_token;
    DecodeContext ctx = m.ctx;
    if (cfg.watermark_in_main_pass && ctx.image && !spec.image.empty()) {
        ctx.image = std::make_shared<const ImageBuffer>(embed_watermark(*ctx.image, spec));
    }

    GenerationResult r;
    try {
        r = baseline ? decode_mature_greedy(*m.model, m.ctx, dc) : decode_greedy(*m.model, ctx, pre.choice.layer, dc);
    } catch (const DecodeInterrupted& e) {
        err << "warning: " << e.what() << '\n';
        r = e.partial();
    }

    std::ostringstream log;
    for (const auto& st : r.steps) {
        log << json{{"step", st.step},
                    {"l_a", st.selection.amateur},
                    {"l_v", st.selection.visual},
                    {"plausible", st.plausible_count},
                    {"token", vocab.token(st.token)},
                    {"token_id", st.token},
                    {"score", st.fused_score}}
                   .dump()
            << '\n';
    }
    std::vector<std::string> texts;
    for (TokenId t : r.tokens) texts.push_back(vocab.token(t));
    const json summary{{"sample", sample},
                       {"visual_layer", pre.choice.layer},
                       {"tokens", texts},
                       {"text", detokenize(vocab, r.tokens)},
                       {"termination", to_string(r.termination)}};
    out << summary.at("text").get<std::string>() << '\n' << log.str() << summary.dump() << '\n';
    if (cfg.out) {
        write_file(*cfg.out / "decode.jsonl", log.str() + summary.dump() + "\n");
    }
    return kExitOk;
}

int cmd_eval(const std::string& suite, const EngineConfig& cfg, bool deterministic, std::ostream& out,
             std::ostream& err) {
    if (!cfg.dataset) throw ConfigError("dataset", "give --dataset");
    const auto started = std::chrono::steady_clock::now();
    Dataset d = load_dataset(*cfg.dataset);
    if (!suite.empty()) {
        const SuiteKind want = parse_suite_kind(suite);
        if (want != d.suite) {
            throw ConfigError("suite", "dataset is a " + std::string(to_string(d.suite)) + " suite, not " + suite);
        }
    }
    // Stop tokens resolve against the vocabulary the samples will decode with.
    Vocabulary vocab = d.vocab;
    const auto trace_dir = cfg.trace ? cfg.trace : d.trace;
    if (!cfg.stop_tokens.empty() && vocab.size() == 0 && trace_dir) vocab = read_trace(*trace_dir).vocab;
    const SuiteOptions opts = suite_options(cfg, vocab);

    const SuiteReport report = run_suite(d, opts);
    for (const auto& w : report.warnings) err << "warning: " << w << '\n';
    const json summary = report_to_json(report);
    out << summary.dump(2) << '\n';
    if (cfg.out) {
        write_file(*cfg.out / "report.json", summary.dump(2) + "\n");
        write_file(*cfg.out / "samples.jsonl", report_jsonl(report, d));
        write_file(*cfg.out / "summary.csv", report_csv(report));
    }
    if (!deterministic) {
        const std::chrono::duration<double> took = std::chrono::steady_clock::now() - started;
        err << "eval: " << report.outcomes.size() << " samples in " << std::fixed << std::setprecision(2)
            << took.count() << " s\n";
    }
    return kExitOk;
}

int cmd_trace_validate(const std::string& dir, std::ostream& out) {
    if (!fs::exists(dir)) throw IoError("no such trace directory '" + dir + "'");
    const TraceValidation v = validate_trace(dir);
    for (const auto& issue : v.issues) {
        out << "error: " << (issue.sample.empty() ? std::string("manifest") : "sample '" + issue.sample + "'") << ": "
            << issue.message << '\n';
    }
    out << (v.ok() ? "ok" : "invalid") << ": " << v.samples_checked << " samples, " << v.steps_checked
        << " steps checked\n";
    return v.ok() ? kExitOk : kExitData;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tri-layer contrastive decoding engine", "tcd"};
    app.require_subcommand(1);
    bool deterministic = false;
    app.add_flag("--deterministic", deterministic, "suppress timing output");

    auto* wm = app.add_subcommand("watermark", "composite a watermark into an image");
    std::string wm_in, wm_out;
    wm->add_option("--in", wm_in, "base image")->required();
    EngineFlags wm_flags;
    wm_flags.add(*wm);

    auto* synth = app.add_subcommand("synth", "write synthetic datasets or traces");
    std::string synth_kind = "pope", synth_out;
    FixtureOptions fo;
    std::size_t synth_steps = 6;
    synth->add_option("--kind", synth_kind, "pope | mme | amber | trace");
    synth->add_option("--seed", fo.seed);
    synth->add_option("--samples", fo.samples);
    synth->add_option("--layers", fo.num_layers);
    synth->add_option("--steps", synth_steps, "recorded steps per trace sample");
    synth->add_option("--out", synth_out, "dataset file, or directory for --kind trace")->required();

    auto* select = app.add_subcommand("select", "run layer selection for one sample or a sample set");
    std::string select_sample, heatmap;
    select->add_option("--sample", select_sample);
    select->add_option("--emit-heatmap", heatmap, "write a per-layer selection-frequency CSV");
    EngineFlags select_flags;
    select_flags.add(*select);

    auto* decode = app.add_subcommand("decode", "decode one sample");
    std::string decode_sample;
    bool decode_baseline = false;
    decode->add_option("--sample", decode_sample);
    decode->add_flag("--baseline", decode_baseline, "mature-layer greedy instead of TCD");
    EngineFlags decode_flags;
    decode_flags.add(*decode);

    auto* eval = app.add_subcommand("eval", "evaluate a dataset");
    std::string eval_suite;
    eval->add_option("--suite", eval_suite, "pope | mme | amber");
    EngineFlags eval_flags;
    eval_flags.add(*eval);

    auto* trace = app.add_subcommand("trace", "trace archive tools");
    trace->require_subcommand(1);
    auto* validate = trace->add_subcommand("validate", "check a trace directory");
    std::string validate_dir;
    validate->add_option("dir", validate_dir)->required();
    auto* validate_alias = app.add_subcommand("trace-validate", "same as 'trace validate'");
    validate_alias->add_option("dir", validate_dir)->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }

    try {
        if (wm->parsed()) {
            const EngineConfig cfg = wm_flags.resolve();
            if (!cfg.out) throw ConfigError("out", "give --out");
            return cmd_watermark(wm_in, cfg.out->string(), cfg, out);
        }
        if (synth->parsed()) return cmd_synth(synth_kind, fo, synth_steps, synth_out, out);
        if (select->parsed()) return cmd_select(select_sample, heatmap, select_flags.resolve(), out);
        if (decode->parsed()) return cmd_decode(decode_sample, decode_baseline, decode_flags.resolve(), out, err);
        if (eval->parsed()) return cmd_eval(eval_suite, eval_flags.resolve(), deterministic, out, err);
        return cmd_trace_validate(validate_dir, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
}

}  // namespace tcd::cli

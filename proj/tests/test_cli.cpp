// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "tcd/cli.hpp"
#include "tcd/config.hpp"
#include "tcd/error.hpp"
#include "tcd/image.hpp"
#include "test_util.hpp"

using namespace tcd;
using nlohmann::json;
using tcd::test::fixture;
using tcd::test::TempDir;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run tcd_run(std::vector<std::string> args) {
    std::ostringstream out, err;
    Run r;
    r.code = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

class ScopedEnv {
public:
    ScopedEnv(const char* name, const char* value) : name_(name) { ::setenv(name, value, 1); }
    ~ScopedEnv() { ::unsetenv(name_); }

private:
    const char* name_;
};

}  // namespace

TEST_CASE("config layering: defaults < file < TCD_SEED < flags") {
    const json file{{"lambda", 0.3}, {"seed", 5}, {"beta", 0.2}};
    auto cfg = resolve_config(file, json{{"lambda", 0.5}}, nullptr);
    CHECK(cfg.decode.lambda == 0.5);
    CHECK(cfg.decode.beta == 0.2);
    CHECK(cfg.seed == 5);
    cfg = resolve_config(file, json::object(), "11");
    CHECK(cfg.seed == 11);
    CHECK(cfg.decode.sample_seed == 11);
    cfg = resolve_config(file, json{{"seed", 12}}, "11");
    CHECK(cfg.seed == 12);
    cfg = resolve_config(nullptr, nullptr, nullptr);
    CHECK(cfg.decode.lambda == 1.0);
    CHECK(cfg.decode.beta == 0.1);
    CHECK(cfg.watermark.alpha == 0.8);
}

TEST_CASE("config errors name the key") {
    CHECK_THROWS_WITH_AS(resolve_config(json{{"lamda", 1}}, nullptr, nullptr), doctest::Contains("'lamda'"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(resolve_config(json{{"beta", "high"}}, nullptr, nullptr), doctest::Contains("'beta'"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(resolve_config(nullptr, json{{"beta", 1.5}}, nullptr), doctest::Contains("'beta'"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(resolve_config(nullptr, nullptr, "-3"), doctest::Contains("TCD_SEED"), ConfigError);
    CHECK_THROWS_WITH_AS(resolve_config(json{{"anchor", {0.5, 1.5}}}, nullptr, nullptr), doctest::Contains("anchor"),
                         ConfigError);
    CHECK_THROWS_AS(resolve_config(json{{"jobs", 0}}, nullptr, nullptr), ConfigError);
    CHECK_THROWS_AS(read_config_file("/nonexistent.json"), IoError);
}

TEST_CASE("config round-trips through json") {
    EngineConfig cfg;
    cfg.decode.lambda = 0.25;
    cfg.watermark.anchor_x = 0.5;
    cfg.trace = "t";
    const auto j = config_to_json(cfg);
    CHECK(j["anchor"] == json{0.5, 0.9});
    json file = j;
    for (const char* k : {"trace", "dataset", "out", "watermark_image"}) {
        if (file[k].is_null()) file.erase(k);
    }
    CHECK(config_to_json(resolve_config(file, nullptr, nullptr)) == j);
}

TEST_CASE("exit codes") {
    CHECK(tcd_run({}).code == cli::kExitValidation);
    CHECK(tcd_run({"decode", "--bogus"}).code == cli::kExitValidation);
    const auto beta = tcd_run({"decode", "--trace", fixture("demo").string(), "--sample", "s0", "--beta", "1.5"});
    CHECK(beta.code == cli::kExitValidation);
    CHECK(beta.err.find("beta") != std::string::npos);
    CHECK(tcd_run({"decode", "--trace", "/nonexistent", "--sample", "s0"}).code == cli::kExitData);
    CHECK(tcd_run({"decode", "--trace", fixture("demo").string(), "--sample", "zz"}).code == cli::kExitData);
    CHECK(tcd_run({"eval", "--dataset", "/nonexistent.json"}).code == cli::kExitData);
    CHECK(tcd_run({"decode", "--config", "/nonexistent.json", "--trace", "x"}).code == cli::kExitData);
    CHECK(tcd_run({"trace", "validate", "/nonexistent"}).code == cli::kExitData);
    CHECK(tcd_run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("decode smoke on the demo trace") {
    const auto r = tcd_run({"decode", "--trace", fixture("demo").string(), "--sample", "s0"});
    REQUIRE(r.code == 0);
    const auto ls = lines(r.out);
    REQUIRE(ls.size() >= 3);
    CHECK(ls[0].rfind("yes", 0) == 0);
    const auto step = json::parse(ls[1]);
    for (const char* k : {"step", "l_a", "l_v", "plausible", "token", "token_id", "score"}) CHECK(step.contains(k));
    CHECK(step["token"] == "yes");
    const auto summary = json::parse(ls.back());
    CHECK(summary["termination"] == "stop_token");
    CHECK(summary["tokens"].front() == "yes");
    CHECK(summary["tokens"].back() == "</s>");
    CHECK(r.out == tcd_run({"decode", "--trace", fixture("demo").string(), "--sample", "s0"}).out);

    const auto base = tcd_run({"decode", "--trace", fixture("demo").string(), "--sample", "s1", "--baseline"});
    REQUIRE(base.code == 0);
    CHECK(json::parse(lines(base.out).back())["tokens"].size() >= 1);
}

TEST_CASE("flag beats config file for lambda") {
    TempDir dir;
    std::ofstream(dir / "cfg.json") << R"({"lambda": 0.3})";
    const std::string trace = fixture("demo").string();
    const auto cfg_flag = tcd_run({"decode", "--trace", trace, "--sample", "s2", "--config",
                                   (dir / "cfg.json").string(), "--lambda", "0.5"});
    const auto flag = tcd_run({"decode", "--trace", trace, "--sample", "s2", "--lambda", "0.5"});
    const auto file = tcd_run({"decode", "--trace", trace, "--sample", "s2", "--config", (dir / "cfg.json").string()});
    REQUIRE(cfg_flag.code == 0);
    CHECK(cfg_flag.out == flag.out);
    CHECK(cfg_flag.out != file.out);

    std::ofstream(dir / "bad.json") << R"({"lambda": 0.3, "gamma": 1})";
    const auto bad = tcd_run({"decode", "--trace", trace, "--sample", "s2", "--config", (dir / "bad.json").string()});
    CHECK(bad.code == cli::kExitValidation);
    CHECK(bad.err.find("'gamma'") != std::string::npos);
}

TEST_CASE("TCD_SEED reaches the sampler") {
    const std::string trace = fixture("demo").string();
    const std::vector<std::string> args{"decode", "--trace", trace, "--sample", "s0", "--sampling", "--beta", "0",
                                        "--tau", "50", "--stop-token", "<unk>", "--max-tokens", "6"};
    auto with_seed = [&](const char* seed) {
        ScopedEnv env("TCD_SEED", seed);
        return tcd_run(args);
    };
    const auto a = with_seed("1");
    REQUIRE(a.code == 0);
    CHECK(a.out == with_seed("1").out);
    CHECK(a.out != with_seed("2").out);
    auto flagged = args;
    flagged.insert(flagged.end(), {"--seed", "1"});
    ScopedEnv env("TCD_SEED", "2");
    CHECK(tcd_run(flagged).out == a.out);
}

TEST_CASE("eval reproduces the golden pope report") {
    TempDir dir;
    const auto ds = (dir / "pope.json").string();
    REQUIRE(tcd_run({"synth", "--kind", "pope", "--seed", "7", "--samples", "100", "--out", ds}).code == 0);
    const auto out1 = (dir / "a").string(), out2 = (dir / "b").string();
    const auto r1 = tcd_run({"--deterministic", "eval", "--suite", "pope", "--dataset", ds, "--out", out1});
    const auto r2 = tcd_run({"--deterministic", "eval", "--suite", "pope", "--dataset", ds, "--out", out2, "--jobs",
                             "3"});
    REQUIRE(r1.code == 0);
    CHECK(r1.err.empty());
    CHECK(r1.out == r2.out);
    for (const char* f : {"report.json", "samples.jsonl", "summary.csv"}) {
        CHECK(tcd::test::read_bytes(dir / "a" / f) == tcd::test::read_bytes(dir / "b" / f));
    }
    CHECK(tcd::test::read_text(dir / "a/report.json") == tcd::test::read_text(fixture("golden_pope/report.json")));
    CHECK(tcd::test::read_text(dir / "a/summary.csv") == tcd::test::read_text(fixture("golden_pope/summary.csv")));

    const auto timed = tcd_run({"eval", "--dataset", ds});
    CHECK(timed.err.find("samples in") != std::string::npos);
    CHECK(tcd_run({"eval", "--suite", "mme", "--dataset", ds}).code == cli::kExitValidation);
}

TEST_CASE("eval on the trace-backed demo dataset") {
    const auto r = tcd_run({"--deterministic", "eval", "--dataset", fixture("demo/dataset.json").string()});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["samples"] == 4);
    CHECK(j["tcd"]["all"]["accuracy"] == 1.0);
}

TEST_CASE("heatmap concentrates on the grounded layers") {
    TempDir dir;
    const auto ds = (dir / "pope.json").string();
    REQUIRE(tcd_run({"synth", "--kind", "pope", "--seed", "3", "--samples", "300", "--out", ds}).code == 0);
    const auto r = tcd_run({"select", "--dataset", ds, "--emit-heatmap", "heat.csv", "--out", dir.path().string()});
    REQUIRE(r.code == 0);

    std::vector<std::size_t> expected(33, 0);
    const json dataset = json::parse(tcd::test::read_text(dir / "pope.json"));
    for (const auto& s : dataset["samples"]) {
        ++expected[s["grounded_layer"].get<std::size_t>()];
    }
    const auto rows = lines(tcd::test::read_text(dir / "heat.csv"));
    REQUIRE(rows.size() == 33);
    CHECK(rows[0] == "layer,visual_count,visual_freq,amateur_count,amateur_freq");
    std::size_t inside = 0;
    for (std::size_t l = 1; l <= 32; ++l) {
        std::istringstream row(rows[l]);
        std::string layer, count;
        std::getline(row, layer, ',');
        std::getline(row, count, ',');
        CHECK(std::stoul(layer) == l);
        CHECK(std::stoul(count) == expected[l]);
        if (l >= 14 && l <= 22) inside += std::stoul(count);
    }
    CHECK(inside == 300);
}

TEST_CASE("select prints the layer triple") {
    const auto r = tcd_run({"select", "--trace", fixture("golden_trace").string(), "--sample", "s0", "--mode", "log"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["mature"] == 16);
    CHECK(j["visual"] == 5);
    CHECK(j["gain"] == "log");
    CHECK(j["recorded_probe"] == true);
    CHECK(j["answer"] == "8");
    CHECK(j["gain_profile"].size() == 15);
    CHECK(j["jsd_profile"].size() == j["candidates"].size());
}

TEST_CASE("trace validate") {
    const auto ok = tcd_run({"trace", "validate", fixture("golden_trace").string()});
    CHECK(ok.code == 0);
    CHECK(ok.out == "ok: 2 samples, 6 steps checked\n");
    CHECK(tcd_run({"trace-validate", fixture("golden_trace").string()}).out == ok.out);

    TempDir dir;
    std::filesystem::copy(fixture("golden_trace"), dir.path(), std::filesystem::copy_options::recursive);
    auto bytes = tcd::test::read_bytes(dir / "samples/s0.tcdt");
    bytes[40] ^= 1;
    tcd::test::write_bytes(dir / "samples/s0.tcdt", bytes);
    const auto bad = tcd_run({"trace", "validate", dir.path().string()});
    CHECK(bad.code == cli::kExitData);
    CHECK(bad.out.find("error: sample 's0'") == 0);
    CHECK(bad.out.find("invalid: 2 samples") != std::string::npos);
}

TEST_CASE("watermark command") {
    TempDir dir;
    save_image(ImageBuffer(100, 100, 3, std::uint8_t{0}), dir / "base.png");
    save_image(ImageBuffer(10, 10, 3, std::uint8_t{100}), dir / "wm.png");
    const auto r = tcd_run({"watermark", "--in", (dir / "base.png").string(), "--wm", (dir / "wm.png").string(),
                            "--out", (dir / "out.png").string()});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["rect"] == json{85, 85, 95, 95});
    CHECK(j["shrink_iterations"] == 0);
    const auto img = load_image(dir / "out.png");
    CHECK(img.at(90, 90, 0) == 80);
    CHECK(img.at(10, 10, 0) == 0);

    const auto anchored = tcd_run({"watermark", "--in", (dir / "base.png").string(), "--wm",
                                   (dir / "wm.png").string(), "--anchor", "0.5,0.2", "--alpha", "1", "--out",
                                   (dir / "b.ppm").string()});
    REQUIRE(anchored.code == 0);
    CHECK(json::parse(anchored.out)["rect"] == json{45, 15, 55, 25});
    CHECK(load_image(dir / "b.ppm").at(50, 20, 1) == 100);

    CHECK(tcd_run({"watermark", "--in", (dir / "base.png").string(), "--out", (dir / "c.png").string()}).code ==
          cli::kExitValidation);
    CHECK(tcd_run({"watermark", "--in", (dir / "base.png").string(), "--wm", (dir / "wm.png").string(), "--anchor",
                   "1,2,3", "--out", (dir / "c.png").string()})
              .code == cli::kExitValidation);
    CHECK(tcd_run({"watermark", "--in", (dir / "none.png").string(), "--wm", (dir / "wm.png").string(), "--out",
                   (dir / "c.png").string()})
              .code == cli::kExitData);
}

TEST_CASE("synth writes every kind") {
    TempDir dir;
    for (const char* kind : {"pope", "mme", "amber"}) {
        const auto path = (dir / (std::string(kind) + ".json")).string();
        REQUIRE(tcd_run({"synth", "--kind", kind, "--samples", "6", "--out", path}).code == 0);
        CHECK(json::parse(tcd::test::read_text(path))["suite"] == kind);
    }
    REQUIRE(tcd_run({"synth", "--kind", "trace", "--samples", "2", "--layers", "16", "--steps", "3", "--seed", "3",
                     "--out", (dir / "t").string()})
                .code == 0);
    for (const char* f : {"samples/s0.tcdt", "samples/s1.tcdt"}) {
        CHECK(tcd::test::read_bytes(dir / "t" / f) == tcd::test::read_bytes(fixture("golden_trace") / f));
    }
    CHECK(tcd_run({"synth", "--kind", "vqa", "--out", (dir / "x").string()}).code == cli::kExitValidation);
}

// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcd/trace.hpp"

#include <zlib.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "tcd/error.hpp"

namespace tcd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'T', 'C', 'D', 'T'};
constexpr const char* kFormatName = "tcd-trace";

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_record(std::vector<std::uint8_t>& out, const LayerLogitStack& stack, std::uint32_t step) {
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_u16(out, kTraceVersion);
    put_u16(out, static_cast<std::uint16_t>(stack.num_layers()));
    put_u32(out, static_cast<std::uint32_t>(stack.vocab_size()));
    put_u32(out, step);
    for (float f : stack.data()) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

bool valid_sample_id(const std::string& id) {
    if (id.empty() || id == "." || id == "..") return false;
    for (unsigned char c : id) {
        if (!(std::isalnum(c) || c == '_' || c == '-' || c == '.')) return false;
    }
    return true;
}

std::string checksum_string(std::uint32_t crc) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "crc32:%08x", crc);
    return buf;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

struct ManifestSample {
    std::string id;
    std::string question;
    std::string file;
    std::uint32_t checksum = 0;
    std::size_t num_steps = 0;
    std::vector<TokenId> greedy_tokens;
    bool has_probe = false;
    std::string probe_question;
    std::string probe_answer;
    std::uint32_t probe_position = 0;
    json metadata = json::object();
};

struct Manifest {
    std::string model;
    std::size_t num_layers = 0;
    Vocabulary vocab;
    std::vector<std::size_t> layer_ids;
    std::vector<ManifestSample> samples;
    json metadata = json::object();
};

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw FormatError(where + ": missing '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(where + ": bad '" + key + "': " + e.what());
    }
}

Manifest parse_manifest(const fs::path& dir) {
    json j;
    {
        std::ifstream in(dir / "manifest.json");
        if (!in) throw IoError("cannot open '" + (dir / "manifest.json").string() + "'");
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw FormatError(std::string("manifest.json: ") + e.what());
        }
    }
    const std::string where = "manifest.json";
    if (field<std::string>(j, "format", where) != kFormatName) throw FormatError("manifest.json: not a tcd trace");
    const auto version = field<int>(j, "version", where);
    if (version != kTraceVersion) {
        throw FormatError("manifest.json: unsupported trace version " + std::to_string(version));
    }
    Manifest m;
    m.model = field<std::string>(j, "model", where);
    m.num_layers = field<std::size_t>(j, "num_layers", where);
    if (m.num_layers < 2 || m.num_layers > 0xFFFF) throw FormatError("manifest.json: num_layers outside [2, 65535]");
    try {
        m.vocab = Vocabulary(field<std::vector<std::string>>(j, "vocab", where),
                             j.value("special_tokens", std::vector<TokenId>{}));
    } catch (const ConfigError& e) {
        throw FormatError(std::string("manifest.json: ") + e.what());
    } catch (const DimensionError& e) {
        throw FormatError(std::string("manifest.json: ") + e.what());
    }
    m.layer_ids = j.value("layer_ids", std::vector<std::size_t>{});
    if (!m.layer_ids.empty() && m.layer_ids.size() != m.num_layers) {
        throw FormatError("manifest.json: layer_ids must list one entry per row");
    }
    for (std::size_t i = 1; i < m.layer_ids.size(); ++i) {
        if (m.layer_ids[i] <= m.layer_ids[i - 1]) throw FormatError("manifest.json: layer_ids must increase");
    }
    m.metadata = j.value("metadata", json::object());

    for (const auto& s : field<json>(j, "samples", where)) {
        ManifestSample ms;
        ms.id = field<std::string>(s, "id", where);
        const std::string sw = where + " sample '" + ms.id + "'";
        if (!valid_sample_id(ms.id)) throw FormatError(sw + ": invalid id");
        ms.question = s.value("question", "");
        ms.file = s.value("file", "samples/" + ms.id + ".tcdt");
        ms.num_steps = field<std::size_t>(s, "num_steps", sw);
        ms.greedy_tokens = s.value("greedy_tokens", std::vector<TokenId>{});
        for (TokenId t : ms.greedy_tokens) {
            if (t >= m.vocab.size()) throw FormatError(sw + ": greedy token id out of range");
        }
        const auto cs = field<std::string>(s, "checksum", sw);
        unsigned int crc = 0;
        if (cs.size() != 14 || cs.rfind("crc32:", 0) != 0 || std::sscanf(cs.c_str() + 6, "%8x", &crc) != 1) {
            throw FormatError(sw + ": malformed checksum '" + cs + "'");
        }
        ms.checksum = crc;
        if (s.contains("probe") && !s.at("probe").is_null()) {
            const auto& p = s.at("probe");
            ms.has_probe = true;
            ms.probe_question = field<std::string>(p, "question", sw);
            ms.probe_answer = field<std::string>(p, "answer", sw);
            ms.probe_position = field<std::uint32_t>(p, "position", sw);
        }
        ms.metadata = s.value("metadata", json::object());
        m.samples.push_back(std::move(ms));
    }
    return m;
}

// Parses one .tcdt payload after its checksum has been verified.
void parse_payload(std::span<const std::uint8_t> bytes, const Manifest& m, const ManifestSample& ms,
                   TraceSample& out) {
    const std::size_t L = m.num_layers;
    const std::size_t V = m.vocab.size();
    const std::size_t record = kRecordHeaderSize + L * V * 4;
    const std::size_t expected_records = ms.num_steps + (ms.has_probe ? 1 : 0);
    const std::string sw = "sample '" + ms.id + "'";
    if (bytes.size() < expected_records * record) {
        throw TruncatedError(sw + ": truncated payload (" + std::to_string(bytes.size()) + " bytes, expected " +
                             std::to_string(expected_records * record) + ")");
    }
    if (bytes.size() != expected_records * record) throw FormatError(sw + ": trailing bytes after last record");

    for (std::size_t r = 0; r < expected_records; ++r) {
        const std::uint8_t* p = bytes.data() + r * record;
        if (std::memcmp(p, kMagic, 4) != 0) throw FormatError(sw + ": bad record magic");
        const auto version = get_u16(p + 4);
        if (version != kTraceVersion) throw FormatError(sw + ": unsupported record version " + std::to_string(version));
        if (get_u16(p + 6) != L || get_u32(p + 8) != V) throw FormatError(sw + ": record shape disagrees with manifest");
        const std::uint32_t step = get_u32(p + 12);
        const bool is_probe = ms.has_probe && r == 0;
        const std::uint32_t want = is_probe ? kProbeStep : static_cast<std::uint32_t>(r - (ms.has_probe ? 1 : 0));
        if (step != want) throw FormatError(sw + ": record out of order (step " + std::to_string(step) + ")");

        std::vector<float> data(L * V);
        const std::uint8_t* f = p + kRecordHeaderSize;
        for (std::size_t i = 0; i < data.size(); ++i) data[i] = std::bit_cast<float>(get_u32(f + 4 * i));
        LayerLogitStack stack(is_probe ? ms.probe_position : step, L, V, std::move(data));
        if (is_probe) {
            out.probe = TraceProbe{ms.probe_question, ms.probe_answer, ms.probe_position, std::move(stack)};
        } else {
            out.steps.push_back(std::move(stack));
        }
    }
}

TraceSample load_sample(const fs::path& dir, const Manifest& m, const ManifestSample& ms) {
    const auto bytes = read_bytes(dir / ms.file);
    const auto crc = crc32_of(bytes);
    if (crc != ms.checksum) {
        throw ChecksumError(ms.id, "sample '" + ms.id + "': checksum mismatch (manifest " +
                                       checksum_string(ms.checksum) + ", file " + checksum_string(crc) + ")");
    }
    TraceSample s;
    s.id = ms.id;
    s.question = ms.question;
    s.greedy_tokens = ms.greedy_tokens;
    s.metadata = ms.metadata;
    parse_payload(bytes, m, ms, s);
    return s;
}

}  // namespace

const TraceSample& TraceArchive::sample(const std::string& id) const {
    for (const auto& s : samples) {
        if (s.id == id) return s;
    }
    throw DataError("trace has no sample '" + id + "'");
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large buffers in chunks.
    std::size_t off = 0;
    while (off < bytes.size()) {
        const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
        crc = ::crc32(crc, bytes.data() + off, n);
        off += n;
    }
    return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_sample_payload(const TraceSample& sample, std::size_t num_layers,
                                                std::size_t vocab_size) {
    auto check = [&](const LayerLogitStack& s) {
        if (s.num_layers() != num_layers || s.vocab_size() != vocab_size) {
            throw DimensionError("sample '" + sample.id + "': stack shape disagrees with archive");
        }
    };
    std::vector<std::uint8_t> out;
    out.reserve((sample.steps.size() + 1) * (kRecordHeaderSize + num_layers * vocab_size * 4));
    if (sample.probe) {
        check(sample.probe->stack);
        put_record(out, sample.probe->stack, kProbeStep);
    }
    for (std::size_t i = 0; i < sample.steps.size(); ++i) {
        check(sample.steps[i]);
        if (sample.steps[i].step_index() != i) {
            throw DimensionError("sample '" + sample.id + "': steps must be numbered 0..n-1");
        }
        put_record(out, sample.steps[i], static_cast<std::uint32_t>(i));
    }
    return out;
}

void write_trace(const TraceArchive& archive, const fs::path& dir) {
    if (archive.num_layers < 2 || archive.num_layers > 0xFFFF) {
        throw DimensionError("trace num_layers must lie in [2, 65535]");
    }
    if (!archive.layer_ids.empty() && archive.layer_ids.size() != archive.num_layers) {
        throw DimensionError("layer_ids must list one entry per row");
    }
    std::error_code ec;
    fs::create_directories(dir / "samples", ec);
    if (ec) throw IoError("cannot create '" + (dir / "samples").string() + "': " + ec.message());

    json samples = json::array();
    for (const auto& s : archive.samples) {
        if (!valid_sample_id(s.id)) throw ValidationError("invalid sample id '" + s.id + "'");
        const auto payload = encode_sample_payload(s, archive.num_layers, archive.vocab.size());
        const std::string file = "samples/" + s.id + ".tcdt";
        write_atomic(dir / file, payload);

        json js = {{"id", s.id},
                   {"question", s.question},
                   {"file", file},
                   {"num_steps", s.steps.size()},
                   {"greedy_tokens", s.greedy_tokens},
                   {"checksum", checksum_string(crc32_of(payload))}};
        if (s.probe) {
            js["probe"] = {{"question", s.probe->question},
                           {"answer", s.probe->answer},
                           {"position", s.probe->position}};
        } else {
            js["probe"] = nullptr;
        }
        js["metadata"] = s.metadata;
        samples.push_back(std::move(js));
    }
    json manifest = {{"format", kFormatName},
                     {"version", kTraceVersion},
                     {"model", archive.model},
                     {"num_layers", archive.num_layers},
                     {"vocab", archive.vocab.tokens()},
                     {"special_tokens", archive.vocab.special_ids()},
                     {"layer_ids", archive.layer_ids},
                     {"metadata", archive.metadata},
                     {"samples", std::move(samples)}};
    const std::string text = manifest.dump(2) + "\n";
    write_atomic(dir / "manifest.json", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

TraceArchive read_trace(const fs::path& dir) {
    const Manifest m = parse_manifest(dir);
    TraceArchive a;
    a.model = m.model;
    a.num_layers = m.num_layers;
    a.vocab = m.vocab;
    a.layer_ids = m.layer_ids;
    a.metadata = m.metadata;
    for (const auto& ms : m.samples) a.samples.push_back(load_sample(dir, m, ms));
    return a;
}

TraceValidation validate_trace(const fs::path& dir) {
    TraceValidation report;
    Manifest m;
    try {
        m = parse_manifest(dir);
    } catch (const Error& e) {
        report.issues.push_back({"", e.what()});
        return report;
    }
    for (const auto& ms : m.samples) {
        ++report.samples_checked;
        try {
            const auto s = load_sample(dir, m, ms);
            report.steps_checked += s.steps.size();
            if (!s.greedy_tokens.empty() && s.greedy_tokens.size() > s.steps.size()) {
                report.issues.push_back({ms.id, "more greedy tokens than recorded steps"});
            }
        } catch (const Error& e) {
            report.issues.push_back({ms.id, e.what()});
        }
    }
    return report;
}

LayerLogitStack trace_step(const TraceArchive& archive, const std::string& sample, const DecodeContext& ctx) {
    const auto& s = archive.sample(sample);
    if (ctx.prefix.size() >= s.steps.size()) {
        throw ReplayExhausted("sample '" + sample + "': step " + std::to_string(ctx.prefix.size()) +
                              " is beyond the " + std::to_string(s.steps.size()) + " recorded steps");
    }
    return s.steps[ctx.prefix.size()];
}

TraceModel::TraceModel(std::shared_ptr<const TraceArchive> archive) : archive_(std::move(archive)) {
    if (!archive_) throw ValidationError("TraceModel needs an archive");
    for (std::size_t i = 0; i < archive_->samples.size(); ++i) index_.emplace(archive_->samples[i].id, i);
}

const TraceSample& TraceModel::lookup(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw DataError("trace has no sample '" + id + "'");
    return archive_->samples[it->second];
}

LayerLogitStack TraceModel::step(const DecodeContext& ctx) const {
    const auto& s = lookup(ctx.sample_id);
    if (ctx.prefix.size() >= s.steps.size()) {
        throw ReplayExhausted("sample '" + s.id + "': step " + std::to_string(ctx.prefix.size()) +
                              " is beyond the " + std::to_string(s.steps.size()) + " recorded steps");
    }
    return s.steps[ctx.prefix.size()];
}

std::optional<RecordedProbe> TraceModel::recorded_probe(const DecodeContext& ctx) const {
    const auto& s = lookup(ctx.sample_id);
    if (!s.probe) throw DataError("sample '" + s.id + "' has no recorded watermark probe");
    return RecordedProbe{s.probe->stack, s.probe->position};
}

}  // namespace tcd

#pragma once

// Dataset construction driver: per-game index builds, clip pairing, JSONL manifests and
// the sampled manual audit.

#include "nesvmdb/audio.hpp"
#include "nesvmdb/common.hpp"
#include "nesvmdb/fingerprint.hpp"
#include "nesvmdb/midi.hpp"
#include "nesvmdb/segmenter.hpp"
#include "nesvmdb/symbolic.hpp"
#include "nesvmdb/synth.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace nesvmdb {

/// Search phrase used to find a game's long-play video.
[[nodiscard]] inline std::string longplay_query(std::string_view game_title) {
    if (detail::trim(game_title).empty()) throw InvalidArgument("game title must not be empty");
    return std::string(game_title) + " NES World of Longplay";
}

struct GameEntry {
    std::string game_id;
    std::string title;
    std::filesystem::path midi_dir;
    std::filesystem::path clips_dir;
};

/// Reads {"games": [{"game_id", "title", "midi_dir", "clips_dir"}, ...]}. Relative directories are
/// resolved against the file's own directory. Game ids must be unique.
[[nodiscard]] inline std::vector<GameEntry> load_games(const std::filesystem::path &path) {
    std::vector<GameEntry> games;
    const auto base = path.parent_path();
    try {
        const auto j = nlohmann::json::parse(detail::read_file_text(path));
        for (const auto &g : j.at("games")) {
            GameEntry e;
            e.game_id = g.at("game_id").get<std::string>();
            e.title = g.value("title", e.game_id);
            const auto resolve = [&](const char *key) {
                std::filesystem::path p = g.at(key).get<std::string>();
                return p.is_absolute() ? p : base / p;
            };
            e.midi_dir = resolve("midi_dir");
            e.clips_dir = g.contains("clips_dir") ? resolve("clips_dir") : std::filesystem::path{};
            games.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception &e) {
        throw FormatError("games file '" + path.string() + "': " + e.what());
    }
    std::map<std::string, int> seen;
    for (const auto &g : games) {
        if (g.game_id.empty()) throw FormatError("games file '" + path.string() + "': empty game_id");
        if (seen[g.game_id]++ > 0) throw FormatError("games file '" + path.string() + "': duplicate game_id '" + g.game_id + "'");
    }
    return games;
}

struct BuildParams {
    MidiParseOptions midi;
    OverlapTieBreak tie_break = OverlapTieBreak::keep_higher_pitch;
    double min_piece_seconds = complete_piece_min_seconds;
    SynthConfig synth;
    FingerprintParams fingerprint;
    unsigned threads = 0;
};

struct BuildReport {
    std::string game_id;
    std::size_t files = 0;
    std::size_t kept = 0;
    std::size_t filtered = 0;
    std::size_t unreadable = 0;
    std::uint64_t fingerprints = 0;
    std::vector<std::string> warnings;
    std::vector<std::string> filtered_ids;

    [[nodiscard]] nlohmann::ordered_json to_json() const {
        return { { "game_id", game_id },       { "files", files },           { "kept", kept },
                 { "filtered", filtered },     { "unreadable", unreadable }, { "fingerprints", fingerprints },
                 { "filtered_ids", filtered_ids }, { "warnings", warnings } };
    }
};

/// parse -> filter (> min_piece_seconds) -> normalize -> synthesize -> fingerprint, in memory.
/// Unreadable MIDI files are skipped and counted; throws if no piece survives.
[[nodiscard]] inline std::pair<FingerprintIndex, BuildReport> build_game_index(const GameEntry &entry, const BuildParams &params) {
    BuildReport report;
    report.game_id = entry.game_id;
    const auto files = detail::list_files(entry.midi_dir, { ".mid", ".midi" });
    report.files = files.size();

    std::vector<std::optional<SymbolicPiece>> parsed(files.size());
    std::vector<std::string> errors(files.size());
    detail::parallel_for(
        files.size(),
        [&](std::size_t i) {
            try {
                parsed[i] = read_midi_file(files[i], params.midi);
            } catch (const Error &e) {
                errors[i] = e.what();
            }
        },
        params.threads);

    std::vector<std::pair<std::string, SymbolicPiece>> kept;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const std::string id = files[i].stem().string();
        if (!parsed[i]) {
            ++report.unreadable;
            report.warnings.push_back("skipped " + files[i].filename().string() + ": " + errors[i]);
            continue;
        }
        if (!(piece_duration_seconds(*parsed[i]) > params.min_piece_seconds)) {
            ++report.filtered;
            report.filtered_ids.push_back(id);
            continue;
        }
        kept.emplace_back(id, normalize_monophony(std::move(*parsed[i]), params.tie_break));
    }
    report.kept = kept.size();
    if (kept.empty()) {
        throw InvalidArgument("no complete pieces in '" + entry.midi_dir.string() + "' for game '" + entry.game_id + "' (" +
                              std::to_string(report.files) + " files, " + std::to_string(report.filtered) + " filtered, " +
                              std::to_string(report.unreadable) + " unreadable)");
    }
    std::vector<PieceRender> renders(kept.size());
    detail::parallel_for(
        kept.size(), [&](std::size_t i) { renders[i] = PieceRender{ kept[i].first, render_piece(kept[i].second, params.synth) }; },
        params.threads);
    auto index = FingerprintIndex::build(entry.game_id, std::move(renders), params.fingerprint, params.threads);
    report.fingerprints = index.posting_count();
    return { std::move(index), std::move(report) };
}

/// Builds the game's index and persists it at `index_path`.
inline BuildReport build_game_db(const GameEntry &entry, const BuildParams &params, const std::filesystem::path &index_path) {
    auto [index, report] = build_game_index(entry, params);
    index.save(index_path);
    return report;
}

enum class PairingStatus { matched, no_match, ambiguous };

[[nodiscard]] constexpr std::string_view status_name(PairingStatus s) noexcept {
    switch (s) {
        case PairingStatus::matched: return "matched";
        case PairingStatus::no_match: return "no_match";
        case PairingStatus::ambiguous: return "ambiguous";
    }
    return "?";
}

[[nodiscard]] inline PairingStatus parse_status(std::string_view s) {
    for (auto v : { PairingStatus::matched, PairingStatus::no_match, PairingStatus::ambiguous }) {
        if (status_name(v) == s) return v;
    }
    throw FormatError("unknown pairing status '" + std::string(s) + "'");
}

struct PairingRecord {
    std::string clip_id;
    std::string game_id;
    double start_seconds = 0.0;
    PairingStatus status = PairingStatus::no_match;
    std::optional<std::string> piece_id;
    double offset_seconds = 0.0;
    std::uint32_t matches = 0;
    double confidence = 0.0;
    std::string note;

    friend bool operator==(const PairingRecord &, const PairingRecord &) = default;
};

/// Manifest line with fields in fixed order; "note" only when non-empty.
[[nodiscard]] inline nlohmann::ordered_json record_to_json(const PairingRecord &r) {
    nlohmann::ordered_json j;
    j["clip_id"] = r.clip_id;
    j["game_id"] = r.game_id;
    j["start_s"] = r.start_seconds;
    j["status"] = status_name(r.status);
    j["piece_id"] = r.piece_id ? nlohmann::ordered_json(*r.piece_id) : nlohmann::ordered_json(nullptr);
    j["offset_s"] = r.offset_seconds;
    j["matches"] = r.matches;
    j["confidence"] = r.confidence;
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

[[nodiscard]] inline PairingRecord record_from_json(const nlohmann::json &j) {
    PairingRecord r;
    j.at("clip_id").get_to(r.clip_id);
    j.at("game_id").get_to(r.game_id);
    j.at("start_s").get_to(r.start_seconds);
    r.status = parse_status(j.at("status").get<std::string>());
    if (!j.at("piece_id").is_null()) r.piece_id = j.at("piece_id").get<std::string>();
    j.at("offset_s").get_to(r.offset_seconds);
    j.at("matches").get_to(r.matches);
    j.at("confidence").get_to(r.confidence);
    r.note = j.value("note", std::string{});
    return r;
}

[[nodiscard]] inline std::string manifest_to_jsonl(const std::vector<PairingRecord> &records) {
    std::string out;
    for (const auto &r : records) out += record_to_json(r).dump() + "\n";
    return out;
}

inline void write_manifest(const std::vector<PairingRecord> &records, const std::filesystem::path &path) {
    detail::write_file_text(path, manifest_to_jsonl(records));
}

[[nodiscard]] inline std::vector<PairingRecord> read_manifest(const std::filesystem::path &path) {
    std::vector<PairingRecord> out;
    std::istringstream in(detail::read_file_text(path));
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (detail::trim(line).empty()) continue;
        try {
            out.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception &e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

struct PairingParams {
    MatchParams match;
    /// Flag matches whose best competing piece scores within `ambiguity_ratio` of the winner.
    bool ambiguity_rule = true;
    double ambiguity_ratio = 0.10;
    double clip_seconds = default_clip_seconds;
    unsigned threads = 0;
};

struct PairingSummary {
    std::size_t matched = 0;
    std::size_t no_match = 0;
    std::size_t ambiguous = 0;
    [[nodiscard]] std::size_t total() const noexcept { return matched + no_match + ambiguous; }
    [[nodiscard]] std::string line() const {
        return "clips=" + std::to_string(total()) + " matched=" + std::to_string(matched) +
               " no_match=" + std::to_string(no_match) + " ambiguous=" + std::to_string(ambiguous);
    }
};

[[nodiscard]] inline PairingSummary summarize(const std::vector<PairingRecord> &records) {
    PairingSummary s;
    for (const auto &r : records) {
        switch (r.status) {
            case PairingStatus::matched: ++s.matched; break;
            case PairingStatus::no_match: ++s.no_match; break;
            case PairingStatus::ambiguous: ++s.ambiguous; break;
        }
    }
    return s;
}

/// Status assignment for one clip from its match result.
[[nodiscard]] inline PairingRecord make_record(std::string clip_id, std::string game_id, double start_seconds,
                                               const MatchResult &m, const PairingParams &params) {
    PairingRecord r;
    r.clip_id = std::move(clip_id);
    r.game_id = std::move(game_id);
    r.start_seconds = start_seconds;
    r.matches = m.aligned_matches;
    r.confidence = m.confidence;
    if (!m.matched()) {
        r.status = PairingStatus::no_match;
        return r;
    }
    r.offset_seconds = m.offset_seconds;
    if (params.ambiguity_rule && m.runner_up_id &&
        static_cast<double>(m.runner_up_matches) >= (1.0 - params.ambiguity_ratio) * m.aligned_matches) {
        r.status = PairingStatus::ambiguous;
        r.note = "top pieces " + *m.piece_id + " (" + std::to_string(m.aligned_matches) + ") and " + *m.runner_up_id + " (" +
                 std::to_string(m.runner_up_matches) + ") within " + std::to_string(static_cast<int>(params.ambiguity_ratio * 100)) + "%";
        return r;
    }
    r.status = PairingStatus::matched;
    r.piece_id = m.piece_id;
    return r;
}

/// Matches every *.wav under `clips_dir` (recursively) against `index`, in parallel.
/// Clip ids are the relative path without extension, prefixed with the game id when the clip
/// sits directly in `clips_dir`. Start times come from clips.jsonl when present, otherwise from
/// a numeric file stem times the clip length. The manifest is sorted by clip id.
[[nodiscard]] inline std::vector<PairingRecord> pair_clips(const FingerprintIndex &index, const std::filesystem::path &clips_dir,
                                                           const PairingParams &params = {}) {
    const auto files = detail::list_files(clips_dir, { ".wav" }, true);
    std::map<std::string, double> listed_start;
    for (const auto &listing : { clips_dir / "clips.jsonl", clips_dir.parent_path() / "clips.jsonl" }) {
        if (!std::filesystem::is_regular_file(listing)) continue;
        for (const auto &spec : read_clip_listing(listing)) listed_start.emplace(spec.clip_id, spec.start_seconds);
    }

    struct Job {
        std::filesystem::path path;
        std::string clip_id;
        double start = 0.0;
    };
    std::vector<Job> jobs;
    for (const auto &f : files) {
        auto rel = std::filesystem::relative(f, clips_dir).replace_extension().generic_string();
        const std::string stem = f.stem().string();
        std::string clip_id = rel.find('/') == std::string::npos ? index.game_id() + "/" + rel : rel;
        double start = 0.0;
        if (auto it = listed_start.find(clip_id); it != listed_start.end()) {
            start = it->second;
        } else if (!stem.empty() && std::all_of(stem.begin(), stem.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            start = std::stod(stem) * params.clip_seconds;
        }
        jobs.push_back(Job{ f, std::move(clip_id), start });
    }
    std::sort(jobs.begin(), jobs.end(), [](const Job &a, const Job &b) { return a.clip_id < b.clip_id; });

    std::vector<PairingRecord> records(jobs.size());
    detail::parallel_for(
        jobs.size(),
        [&](std::size_t i) {
            const auto &job = jobs[i];
            try {
                const auto audio = read_wav(job.path);
                if (audio.sample_rate != index.params().sample_rate) {
                    throw FormatError("clip sample rate " + std::to_string(audio.sample_rate) + " Hz differs from index rate " +
                                      std::to_string(index.params().sample_rate) + " Hz");
                }
                records[i] = make_record(job.clip_id, index.game_id(), job.start, match_query(index, audio, params.match), params);
            } catch (const Error &e) {
                PairingRecord r;
                r.clip_id = job.clip_id;
                r.game_id = index.game_id();
                r.start_seconds = job.start;
                r.status = PairingStatus::no_match;
                r.note = std::string("unreadable clip: ") + e.what();
                records[i] = std::move(r);
            }
        },
        params.threads);
    return records;
}

struct PipelineReport {
    std::vector<BuildReport> builds;
    std::vector<std::string> errors;
    PairingSummary summary;
};

/// For every game: build and persist `<out>/<game_id>/index.nvfp` (+ build_report.json), then pair
/// its clips. Games run in parallel; results are assembled in input order, so the combined
/// `<out>/manifest.jsonl` (sorted by clip id) and `<out>/summary.json` do not depend on scheduling.
/// A game that fails to build is recorded in `errors` and skipped.
inline PipelineReport run_pipeline(const std::vector<GameEntry> &games, const std::filesystem::path &out_dir,
                                   const BuildParams &build, const PairingParams &pairing) {
    std::map<std::string, int> seen;
    for (const auto &g : games) {
        if (seen[g.game_id]++ > 0) throw InvalidArgument("duplicate game_id '" + g.game_id + "'");
    }
    struct GameOutcome {
        std::optional<BuildReport> build;
        std::vector<PairingRecord> records;
        std::string error;
    };
    std::vector<GameOutcome> outcomes(games.size());
    detail::parallel_for(
        games.size(),
        [&](std::size_t i) {
            const auto &game = games[i];
            const auto game_dir = out_dir / game.game_id;
            try {
                auto [index, br] = build_game_index(game, build);
                index.save(game_dir / "index.nvfp");
                detail::write_file_text(game_dir / "build_report.json", br.to_json().dump(2) + "\n");
                outcomes[i].build = std::move(br);
                if (!game.clips_dir.empty()) outcomes[i].records = pair_clips(index, game.clips_dir, pairing);
            } catch (const Error &e) {
                outcomes[i].error = game.game_id + ": " + e.what();
            }
        },
        build.threads);

    PipelineReport report;
    std::vector<PairingRecord> manifest;
    for (auto &o : outcomes) {
        if (o.build) report.builds.push_back(std::move(*o.build));
        if (!o.error.empty()) report.errors.push_back(std::move(o.error));
        manifest.insert(manifest.end(), std::make_move_iterator(o.records.begin()), std::make_move_iterator(o.records.end()));
    }
    std::stable_sort(manifest.begin(), manifest.end(),
                     [](const PairingRecord &a, const PairingRecord &b) { return a.clip_id < b.clip_id; });
    write_manifest(manifest, out_dir / "manifest.jsonl");
    report.summary = summarize(manifest);
    nlohmann::ordered_json summary{ { "games", games.size() },
                                    { "games_built", report.builds.size() },
                                    { "clips", report.summary.total() },
                                    { "matched", report.summary.matched },
                                    { "no_match", report.summary.no_match },
                                    { "ambiguous", report.summary.ambiguous },
                                    { "errors", report.errors } };
    detail::write_file_text(out_dir / "summary.json", summary.dump(2) + "\n");
    return report;
}

// ---------------------------------------------------------------------------------------------
// audit worksheets

struct AuditRow {
    std::string clip_id;
    std::string game_id;
    double start_seconds = 0.0;
    std::string status;
    std::string piece_id;
    double confidence = 0.0;
    /// Filled in by the annotator: correct, incorrect, sfx (sound effects only), or blank.
    std::string verdict;
    friend bool operator==(const AuditRow &, const AuditRow &) = default;
};

/// Deterministic sample of `n` records without replacement (partial Fisher-Yates over a
/// seeded mt19937_64), returned in clip-id order.
[[nodiscard]] inline std::vector<AuditRow> audit_sample(const std::vector<PairingRecord> &manifest, std::size_t n,
                                                        std::uint64_t seed) {
    if (n > manifest.size()) {
        throw InvalidArgument("audit sample size " + std::to_string(n) + " exceeds manifest size " + std::to_string(manifest.size()));
    }
    std::vector<std::size_t> order(manifest.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t span = order.size() - i;
        std::uint64_t draw;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
        do {
            draw = rng();
        } while (draw >= limit);
        std::swap(order[i], order[i + static_cast<std::size_t>(draw % span)]);
    }
    order.resize(n);
    std::vector<AuditRow> rows;
    rows.reserve(n);
    for (auto idx : order) {
        const auto &r = manifest[idx];
        rows.push_back(AuditRow{ r.clip_id, r.game_id, r.start_seconds, std::string(status_name(r.status)), r.piece_id.value_or(""),
                                 r.confidence, "" });
    }
    std::sort(rows.begin(), rows.end(), [](const AuditRow &a, const AuditRow &b) { return a.clip_id < b.clip_id; });
    return rows;
}

namespace detail {

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

/// RFC-4180 style parsing of one CSV document into rows of fields.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        any = true;
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else {
            field += c;
        }
    }
    if (quoted) throw FormatError("csv: unterminated quoted field");
    if (any) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << v;
    return os.str();
}

}  // namespace detail

inline constexpr std::string_view audit_header = "clip_id,game_id,start_s,status,piece_id,confidence,verdict";

[[nodiscard]] inline std::string audit_to_csv(const std::vector<AuditRow> &rows) {
    std::string out(audit_header);
    out += "\n";
    for (const auto &r : rows) {
        out += detail::csv_field(r.clip_id) + "," + detail::csv_field(r.game_id) + "," + detail::format_double(r.start_seconds) + "," +
               detail::csv_field(r.status) + "," + detail::csv_field(r.piece_id) + "," + detail::format_double(r.confidence) + "," +
               detail::csv_field(r.verdict) + "\n";
    }
    return out;
}

[[nodiscard]] inline std::vector<AuditRow> audit_from_csv(std::string_view text) {
    const auto rows = detail::parse_csv(text);
    if (rows.empty() || rows.front().size() < 7 || rows.front()[0] != "clip_id") throw FormatError("audit worksheet: missing header");
    std::vector<AuditRow> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto &f = rows[i];
        if (f.size() == 1 && f[0].empty()) continue;
        if (f.size() < 7) throw FormatError("audit worksheet: row " + std::to_string(i + 1) + " has " + std::to_string(f.size()) + " fields");
        try {
            out.push_back(AuditRow{ f[0], f[1], std::stod(f[2]), f[3], f[4], std::stod(f[5]), std::string(detail::trim(f[6])) });
        } catch (const std::logic_error &) {
            throw FormatError("audit worksheet: bad number on row " + std::to_string(i + 1));
        }
    }
    return out;
}

struct AuditSummary {
    std::size_t correct = 0;
    std::size_t incorrect = 0;
    std::size_t sfx_only = 0;
    std::size_t unlabeled = 0;
    /// correct / (correct + incorrect); sound-effect-only clips carry no music to judge.
    [[nodiscard]] double accuracy() const noexcept {
        const auto judged = correct + incorrect;
        return judged == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(judged);
    }
};

/// Verdicts are case-insensitive: correct/c/1, incorrect/wrong/0, sfx/sfx_only. Anything else
/// non-empty is an error.
[[nodiscard]] inline AuditSummary summarize_audit(const std::vector<AuditRow> &rows) {
    AuditSummary s;
    for (const auto &r : rows) {
        const auto v = detail::to_lower_ascii(detail::trim(r.verdict));
        if (v.empty()) {
            ++s.unlabeled;
        } else if (v == "correct" || v == "c" || v == "1") {
            ++s.correct;
        } else if (v == "incorrect" || v == "wrong" || v == "0") {
            ++s.incorrect;
        } else if (v == "sfx" || v == "sfx_only") {
            ++s.sfx_only;
        } else {
            throw FormatError("audit worksheet: unknown verdict '" + r.verdict + "' for clip " + r.clip_id);
        }
    }
    return s;
}

}  // namespace nesvmdb

// nesvmdb command-line front end.

#include "nesvmdb/nesvmdb.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>

namespace nv = nesvmdb;

namespace {

struct FingerprintOpts {
    nv::FingerprintParams params;
    void add(CLI::App *app) {
        app->add_option("--window", params.window_size, "STFT window (power of two)")->capture_default_str();
        app->add_option("--hop", params.hop, "STFT hop in samples")->capture_default_str();
        app->add_option("--peak-frames", params.neighborhood_frames, "peak neighborhood half-extent in frames")->capture_default_str();
        app->add_option("--peak-bins", params.neighborhood_bins, "peak neighborhood half-extent in bins")->capture_default_str();
        app->add_option("--amp-min", params.amp_min, "minimum peak level (dB)")->capture_default_str();
        app->add_option("--fan-out", params.fan_out, "pairs per anchor peak")->capture_default_str();
        app->add_option("--max-delta", params.max_delta_frames, "maximum anchor-target distance in frames")->capture_default_str();
        app->add_option("--sample-rate", params.sample_rate, "audio sample rate")->capture_default_str();
    }
};

struct MatchOpts {
    nv::PairingParams pairing;
    bool no_reject = false;
    bool no_ambiguity = false;
    void add(CLI::App *app) {
        app->add_option("--min-matches", pairing.match.min_matches, "votes the best offset bin needs")->capture_default_str();
        app->add_option("--min-confidence", pairing.match.min_confidence, "aligned votes / query hashes needed")->capture_default_str();
        app->add_flag("--no-reject", no_reject, "always accept the best bin (plain argmax)");
        app->add_flag("--no-ambiguity", no_ambiguity, "do not flag near-tied pieces as ambiguous");
        app->add_option("--ambiguity-ratio", pairing.ambiguity_ratio, "runner-up within this fraction of the winner is ambiguous")
            ->capture_default_str();
        app->add_option("--clip-seconds", pairing.clip_seconds, "clip length used to infer start times")->capture_default_str();
    }
    nv::PairingParams resolved(unsigned threads) const {
        auto p = pairing;
        p.match.reject = !no_reject;
        p.ambiguity_rule = !no_ambiguity;
        p.threads = threads;
        return p;
    }
};

struct BuildOpts {
    nv::BuildParams build;
    std::string mapping_path;
    bool keep_lower = false;
    void add(CLI::App *app) {
        app->add_option("--mapping", mapping_path, "JSON track/channel/name/program to voice mapping");
        app->add_option("--min-seconds", build.min_piece_seconds, "keep pieces strictly longer than this")->capture_default_str();
        app->add_flag("--keep-lower-pitch", keep_lower, "on simultaneous onsets keep the lower pitch");
        app->add_option("--duty", build.synth.pulse_duty, "pulse duty cycle")->capture_default_str();
        app->add_option("--release", build.synth.release_seconds, "release after note-off (s)")->capture_default_str();
    }
    nv::BuildParams resolved(const nv::FingerprintParams &fp, unsigned threads) const {
        auto b = build;
        if (!mapping_path.empty()) b.midi.mapping = nv::ChannelMapping::load(mapping_path);
        b.tie_break = keep_lower ? nv::OverlapTieBreak::keep_lower_pitch : nv::OverlapTieBreak::keep_higher_pitch;
        b.fingerprint = fp;
        b.synth.sample_rate = fp.sample_rate;
        b.threads = threads;
        return b;
    }
};

std::string format_result(const nv::MatchResult &m) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "matches=%u hashes=%u confidence=%.5f offset_s=%.3f", m.aligned_matches, m.query_hash_count,
                  m.confidence, m.offset_seconds);
    std::string out = (m.piece_id ? "match " + *m.piece_id : "no_match (best " + m.candidate_id.value_or("-") + ")") + " " + buf;
    if (m.runner_up_id) out += " runner_up=" + *m.runner_up_id + ":" + std::to_string(m.runner_up_matches);
    return out;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{ "NES music/video dataset toolkit: synthesis, fingerprint pairing, metrics and tokens" };
    app.require_subcommand(1);
    unsigned threads = 0;
    app.add_option("-j,--threads", threads, "worker threads (0 = all cores)");

    // build-db
    auto *build_cmd = app.add_subcommand("build-db", "render a game's MIDI files and build its fingerprint index");
    std::string game_id, midi_dir, index_out, report_out;
    FingerprintOpts build_fp;
    BuildOpts build_opts;
    build_cmd->add_option("--game-id", game_id, "game identifier")->required();
    build_cmd->add_option("--midi-dir", midi_dir, "directory of .mid files")->required()->check(CLI::ExistingDirectory);
    build_cmd->add_option("--out", index_out, "index file to write")->required();
    build_cmd->add_option("--report", report_out, "build report JSON (default: stdout)");
    build_fp.add(build_cmd);
    build_opts.add(build_cmd);

    // pair
    auto *pair_cmd = app.add_subcommand("pair", "match every clip of a game against its index");
    std::string pair_index, clips_dir, manifest_out;
    MatchOpts pair_opts;
    pair_cmd->add_option("--index", pair_index, "index file")->required()->check(CLI::ExistingFile);
    pair_cmd->add_option("--clips", clips_dir, "directory of clip .wav files")->required()->check(CLI::ExistingDirectory);
    pair_cmd->add_option("--out", manifest_out, "manifest JSONL to write")->required();
    pair_opts.add(pair_cmd);

    // pipeline
    auto *pipe_cmd = app.add_subcommand("pipeline", "build-db and pair for every game in a games file");
    std::string games_file, pipe_out;
    FingerprintOpts pipe_fp;
    BuildOpts pipe_build;
    MatchOpts pipe_match;
    pipe_cmd->add_option("--games", games_file, "JSON games file")->required()->check(CLI::ExistingFile);
    pipe_cmd->add_option("--out", pipe_out, "output directory")->required();
    pipe_fp.add(pipe_cmd);
    pipe_build.add(pipe_cmd);
    pipe_match.add(pipe_cmd);

    // audit
    auto *audit_cmd = app.add_subcommand("audit", "sample a manifest for manual review, or score a filled worksheet");
    audit_cmd->require_subcommand(1);
    auto *audit_sample_cmd = audit_cmd->add_subcommand("sample", "write a worksheet with a blank verdict column");
    std::string audit_manifest, worksheet;
    std::size_t audit_n = 30;
    std::uint64_t audit_seed = 0;
    audit_sample_cmd->add_option("--manifest", audit_manifest, "manifest JSONL")->required()->check(CLI::ExistingFile);
    audit_sample_cmd->add_option("-n", audit_n, "sample size")->capture_default_str();
    audit_sample_cmd->add_option("--seed", audit_seed, "sampling seed")->capture_default_str();
    audit_sample_cmd->add_option("--out", worksheet, "worksheet CSV")->required();
    auto *audit_score_cmd = audit_cmd->add_subcommand("score", "summarize verdicts of a filled worksheet");
    audit_score_cmd->add_option("worksheet", worksheet, "worksheet CSV")->required()->check(CLI::ExistingFile);

    // slice
    auto *slice_cmd = app.add_subcommand("slice", "extract audio from a media file and cut fixed-length clips");
    std::string slice_in, slice_out, slice_game, decoder_config;
    double clip_seconds = nv::default_clip_seconds;
    int slice_rate = 44100;
    bool keep_remainder = false, append_listing = false;
    slice_cmd->add_option("--in", slice_in, "media file")->required()->check(CLI::ExistingFile);
    slice_cmd->add_option("--game-id", slice_game, "game identifier (clip id prefix)")->required();
    slice_cmd->add_option("--out", slice_out, "output directory")->required();
    slice_cmd->add_option("--clip-seconds", clip_seconds, "clip length")->capture_default_str();
    slice_cmd->add_option("--sample-rate", slice_rate, "target sample rate")->capture_default_str();
    slice_cmd->add_flag("--keep-remainder", keep_remainder, "keep a final clip shorter than the clip length");
    slice_cmd->add_flag("--append", append_listing, "append to an existing clips.jsonl");
    slice_cmd->add_option("--decoder-config", decoder_config, "JSON file {\"decoder\": \"<command template>\"}");

    // synth
    auto *synth_cmd = app.add_subcommand("synth", "render a MIDI file with the NES voice models");
    std::string synth_in, synth_out, synth_mapping;
    nv::SynthConfig synth_cfg;
    synth_cmd->add_option("--in", synth_in, "MIDI file")->required()->check(CLI::ExistingFile);
    synth_cmd->add_option("--out", synth_out, "WAV file")->required();
    synth_cmd->add_option("--mapping", synth_mapping, "JSON voice mapping");
    synth_cmd->add_option("--sample-rate", synth_cfg.sample_rate)->capture_default_str();
    synth_cmd->add_option("--duty", synth_cfg.pulse_duty)->capture_default_str();

    // match
    auto *match_cmd = app.add_subcommand("match", "identify one audio file against an index");
    std::string match_index, match_in;
    MatchOpts match_opts;
    match_cmd->add_option("--index", match_index, "index file")->required()->check(CLI::ExistingFile);
    match_cmd->add_option("--in", match_in, "WAV query")->required()->check(CLI::ExistingFile);
    match_opts.add(match_cmd);

    // metrics
    auto *metrics_cmd = app.add_subcommand("metrics", "structure metrics per MIDI directory");
    std::vector<std::string> metric_dirs;
    std::vector<std::string> metric_outs;
    nv::CorpusOptions corpus_opts;
    metrics_cmd->add_option("--dirs", metric_dirs, "name=directory pairs")->required();
    metrics_cmd->add_option("--out", metric_outs, "output files (.txt table or .csv rows)");
    metrics_cmd->add_flag("--noise-pitch", corpus_opts.metrics.noise_in_pitch_metrics, "include the noise voice in pitch metrics");
    metrics_cmd->add_flag("--per-channel-groove", corpus_opts.metrics.per_channel_groove, "average per-channel groove instead of merged");

    // encode / decode
    auto *encode_cmd = app.add_subcommand("encode", "MIDI file to compound tokens (JSONL)");
    std::string enc_in, enc_out;
    nv::TokenizerConfig tok_cfg;
    encode_cmd->add_option("--in", enc_in, "MIDI file")->required()->check(CLI::ExistingFile);
    encode_cmd->add_option("--out", enc_out, "tokens JSONL")->required();
    encode_cmd->add_option("--max-length", tok_cfg.max_length)->capture_default_str();
    encode_cmd->add_flag("--pad", tok_cfg.pad, "pad with end-of-song tokens up to --max-length");
    auto *decode_cmd = app.add_subcommand("decode", "compound tokens (JSONL) to a MIDI file");
    std::string dec_in, dec_out;
    nv::DecodeConfig dec_cfg;
    decode_cmd->add_option("--in", dec_in, "tokens JSONL")->required()->check(CLI::ExistingFile);
    decode_cmd->add_option("--out", dec_out, "MIDI file")->required();
    decode_cmd->add_option("--tpq", dec_cfg.ticks_per_quarter, "ticks per quarter")->capture_default_str();

    // genres
    auto *genres_cmd = app.add_subcommand("genres", "genre mapping table and statistics");
    genres_cmd->require_subcommand(1);
    auto *genres_map = genres_cmd->add_subcommand("map", "map a specific genre to its store genre");
    std::string genre_name_arg;
    genres_map->add_option("name", genre_name_arg)->required();
    auto *genres_stats = genres_cmd->add_subcommand("stats", "genre distribution of a label file");
    std::string labels_file;
    genres_stats->add_option("labels", labels_file, "one label per line or game,label CSV")->required()->check(CLI::ExistingFile);
    auto *genres_export = genres_cmd->add_subcommand("export", "write the mapping table as CSV");
    std::string genres_out;
    genres_export->add_option("--out", genres_out, "CSV file (default: stdout)");

    auto *query_cmd = app.add_subcommand("longplay-query", "search phrase for a game's long-play video");
    std::string query_title;
    query_cmd->add_option("title", query_title)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*build_cmd) {
            const nv::GameEntry entry{ game_id, game_id, midi_dir, {} };
            const auto report = nv::build_game_db(entry, build_opts.resolved(build_fp.params, threads), index_out);
            for (const auto &w : report.warnings) std::cerr << "warning: " << w << "\n";
            const auto text = report.to_json().dump(2) + "\n";
            if (report_out.empty()) {
                std::cout << text;
            } else {
                nv::detail::write_file_text(report_out, text);
            }
            std::cerr << "indexed " << report.kept << " pieces (" << report.filtered << " filtered, " << report.unreadable
                      << " unreadable), " << report.fingerprints << " fingerprints\n";
        } else if (*pair_cmd) {
            const auto index = nv::FingerprintIndex::load(pair_index);
            const auto records = nv::pair_clips(index, clips_dir, pair_opts.resolved(threads));
            nv::write_manifest(records, manifest_out);
            std::cout << nv::summarize(records).line() << "\n";
        } else if (*pipe_cmd) {
            const auto games = nv::load_games(games_file);
            const auto report =
                nv::run_pipeline(games, pipe_out, pipe_build.resolved(pipe_fp.params, threads), pipe_match.resolved(threads));
            for (const auto &b : report.builds) {
                for (const auto &w : b.warnings) std::cerr << "warning: " << b.game_id << ": " << w << "\n";
            }
            for (const auto &e : report.errors) std::cerr << "error: " << e << "\n";
            std::cout << report.summary.line() << "\n";
            return report.errors.empty() ? 0 : 1;
        } else if (*audit_sample_cmd) {
            const auto rows = nv::audit_sample(nv::read_manifest(audit_manifest), audit_n, audit_seed);
            nv::detail::write_file_text(worksheet, nv::audit_to_csv(rows));
            std::cout << "wrote " << rows.size() << " rows to " << worksheet << "\n";
        } else if (*audit_score_cmd) {
            const auto s = nv::summarize_audit(nv::audit_from_csv(nv::detail::read_file_text(worksheet)));
            std::printf("correct=%zu incorrect=%zu sfx_only=%zu unlabeled=%zu accuracy=%.3f\n", s.correct, s.incorrect, s.sfx_only,
                        s.unlabeled, s.accuracy());
        } else if (*slice_cmd) {
            const auto decoder = decoder_config.empty() ? nv::DecoderConfig::from_environment() : nv::DecoderConfig::load(decoder_config);
            const auto audio = nv::extract_audio(slice_in, slice_rate, decoder);
            const auto clips = nv::slice_clips(audio, clip_seconds, slice_game, slice_in, keep_remainder);
            nv::write_clips(clips, slice_out, append_listing);
            std::cout << "wrote " << clips.size() << " clips from " << audio.duration_seconds() << " s of audio\n";
        } else if (*synth_cmd) {
            nv::MidiParseOptions opts;
            if (!synth_mapping.empty()) opts.mapping = nv::ChannelMapping::load(synth_mapping);
            const auto piece = nv::normalize_monophony(nv::read_midi_file(synth_in, opts));
            nv::write_wav(nv::render_piece(piece, synth_cfg), synth_out);
        } else if (*match_cmd) {
            const auto index = nv::FingerprintIndex::load(match_index);
            const auto p = match_opts.resolved(threads);
            const auto m = nv::match_query(index, nv::read_wav(match_in), p.match);
            std::cerr << format_result(m) << "\n";
            std::cout << nv::record_to_json(nv::make_record(std::filesystem::path(match_in).stem().string(), index.game_id(), 0.0, m, p)).dump()
                      << "\n";
        } else if (*metrics_cmd) {
            std::vector<std::pair<std::string, std::filesystem::path>> dirs;
            for (const auto &d : metric_dirs) {
                const auto eq = d.find('=');
                if (eq == std::string::npos || eq == 0) throw nv::InvalidArgument("--dirs expects name=directory, got '" + d + "'");
                dirs.emplace_back(d.substr(0, eq), d.substr(eq + 1));
            }
            corpus_opts.threads = threads;
            const auto rows = nv::corpus_report(dirs, corpus_opts);
            const auto text = nv::render_report_text(rows);
            std::cout << text;
            for (const auto &o : metric_outs) {
                const bool csv = nv::detail::to_lower_ascii(std::filesystem::path(o).extension().string()) == ".csv";
                nv::detail::write_file_text(o, csv ? nv::render_report_csv(rows) : text);
            }
        } else if (*encode_cmd) {
            const auto tokens = nv::encode(nv::normalize_monophony(nv::read_midi_file(enc_in)), tok_cfg);
            nv::detail::write_file_text(enc_out, nv::tokens_to_jsonl(tokens));
        } else if (*decode_cmd) {
            const auto piece = nv::decode(nv::tokens_from_jsonl(nv::detail::read_file_text(dec_in)), dec_cfg);
            nv::write_midi_file(piece, dec_out);
        } else if (*genres_map) {
            std::cout << nv::genre_name(nv::map_genre(genre_name_arg)) << "\n";
        } else if (*genres_stats) {
            const auto labels = nv::read_genre_labels(nv::detail::read_file_text(labels_file));
            std::cout << nv::render_histogram(nv::genre_histogram(labels));
            std::printf("random-guess baseline: %.1f%%\n", 100.0 * nv::random_guess_baseline);
        } else if (*genres_export) {
            if (genres_out.empty()) {
                std::cout << nv::genre_table_csv();
            } else {
                nv::detail::write_file_text(genres_out, nv::genre_table_csv());
            }
        } else if (*query_cmd) {
            std::cout << nv::longplay_query(query_title) << "\n";
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#pragma once

// Compound-token encoding on the sixteenth-note grid (7 attributes per token) and its inverse.
//
// Layout per bar: a bar token, then for each beat a beat token followed by the melodic tokens
// whose onset falls on the beat's first sixteenth. Onsets on later sixteenths of the beat are
// introduced by sub-step rhythmic tokens (timestep none), one per sixteenth up to the last
// occupied one. After the last bar the sequence ends with one or more EOS tokens.

#include "nesvmdb/common.hpp"
#include "nesvmdb/symbolic.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace nesvmdb {

enum class TokenType { rhythmic, melodic, eos };
enum class Timestep { none, beat, bar };

inline constexpr int max_strength = 4;
inline constexpr int max_token_duration = 64;

struct CompoundToken {
    TokenType type = TokenType::eos;
    Timestep timestep = Timestep::none;
    std::optional<int> density;
    std::optional<int> strength;
    std::optional<ChannelKind> instrument;
    std::optional<int> pitch;
    std::optional<int> duration;  // sixteenths

    [[nodiscard]] static CompoundToken rhythm(Timestep ts, int strength, int density) {
        return CompoundToken{ TokenType::rhythmic, ts, density, strength, std::nullopt, std::nullopt, std::nullopt };
    }
    [[nodiscard]] static CompoundToken note(ChannelKind kind, int pitch, int duration) {
        return CompoundToken{ TokenType::melodic, Timestep::none, std::nullopt, std::nullopt, kind, pitch, duration };
    }
    [[nodiscard]] static CompoundToken end() { return CompoundToken{}; }

    friend bool operator==(const CompoundToken &, const CompoundToken &) = default;
};

using TokenSequence = std::vector<CompoundToken>;

struct TokenizerConfig {
    /// Lower bounds of the density buckets; the last bucket is open-ended.
    std::vector<int> density_boundaries{ 0, 1, 2, 3, 4, 6, 8, 12, 16 };
    std::size_t max_length = 10000;
    /// Pad with EOS up to max_length (otherwise a single EOS terminates the sequence).
    bool pad = false;

    void validate() const {
        if (density_boundaries.empty() || density_boundaries.front() != 0) throw InvalidArgument("density buckets must start at 0");
        for (std::size_t i = 1; i < density_boundaries.size(); ++i) {
            if (density_boundaries[i] <= density_boundaries[i - 1]) throw InvalidArgument("density buckets must be strictly increasing");
        }
        if (max_length == 0) throw InvalidArgument("max_length must be positive");
    }
    [[nodiscard]] int bucket_count() const noexcept { return static_cast<int>(density_boundaries.size()); }
    [[nodiscard]] int density_bucket(std::size_t onsets) const noexcept {
        int b = 0;
        for (std::size_t i = 0; i < density_boundaries.size(); ++i) {
            if (static_cast<std::size_t>(density_boundaries[i]) <= onsets) b = static_cast<int>(i);
        }
        return b;
    }
};

struct DecodeConfig {
    int ticks_per_quarter = 480;
    double microseconds_per_quarter = 500000.0;
    TimeSignature meter{};
    int velocity = 100;
};

/// Strength and density of one beat, as carried by its beat token.
struct BeatFeature {
    std::int64_t bar = 0;
    int beat = 0;
    int strength = 0;
    int density = 0;
    friend bool operator==(const BeatFeature &, const BeatFeature &) = default;
};

namespace detail {

struct GridNote {
    std::int64_t slot;
    ChannelKind kind;
    int pitch;
    int duration;
};

struct Grid {
    int slots_per_bar = 16;
    int slots_per_beat = 4;
    int beats_per_bar = 4;
    std::int64_t bars = 0;
    std::vector<GridNote> notes;  // sorted by slot, then P1,P2,TR,NO, then pitch, duration
};

inline void beat_layout(const TimeSignature &meter, int &slots_per_bar_out, int &slots_per_beat, int &beats) {
    slots_per_bar_out = slots_per_bar(meter);
    if (16 % meter.denominator != 0) {
        throw InvalidArgument("meter " + std::to_string(meter.numerator) + "/" + std::to_string(meter.denominator) +
                              " has beats shorter than a sixteenth");
    }
    slots_per_beat = 16 / meter.denominator;
    beats = meter.numerator;
}

inline Grid quantize(const SymbolicPiece &piece) {
    Grid g;
    beat_layout(piece.meter, g.slots_per_bar, g.slots_per_beat, g.beats_per_bar);
    const int tpq = piece.tempo.ticks_per_quarter;
    std::int64_t last = sixteenth_slot(piece.length_ticks, tpq);
    for (auto kind : all_channel_kinds) {
        for (const auto &n : piece.channel(kind).notes) {
            const auto on = sixteenth_slot(n.onset, tpq);
            const auto off = sixteenth_slot(n.end(), tpq);
            const int dur = static_cast<int>(std::clamp<std::int64_t>(off - on, 1, max_token_duration));
            g.notes.push_back(GridNote{ on, kind, n.pitch, dur });
            last = std::max(last, on + 1);
            last = std::max(last, off);
        }
    }
    std::sort(g.notes.begin(), g.notes.end(), [](const GridNote &a, const GridNote &b) {
        if (a.slot != b.slot) return a.slot < b.slot;
        if (a.kind != b.kind) return channel_index(a.kind) < channel_index(b.kind);
        if (a.pitch != b.pitch) return a.pitch < b.pitch;
        return a.duration < b.duration;
    });
    g.bars = (last + g.slots_per_bar - 1) / g.slots_per_bar;
    return g;
}

inline int channel_mask_count(unsigned mask) { return __builtin_popcount(mask); }

struct BarSummary {
    std::vector<unsigned> beat_masks;
    unsigned bar_mask = 0;
    std::size_t onsets = 0;
};

inline std::vector<BarSummary> summarize_bars(const Grid &g) {
    std::vector<BarSummary> bars(static_cast<std::size_t>(g.bars));
    for (auto &b : bars) b.beat_masks.assign(static_cast<std::size_t>(g.beats_per_bar), 0u);
    for (const auto &n : g.notes) {
        auto &b = bars[static_cast<std::size_t>(n.slot / g.slots_per_bar)];
        const auto beat = static_cast<std::size_t>((n.slot % g.slots_per_bar) / g.slots_per_beat);
        const unsigned bit = 1u << channel_index(n.kind);
        b.beat_masks[beat] |= bit;
        b.bar_mask |= bit;
        ++b.onsets;
    }
    return bars;
}

}  // namespace detail

/// Per-beat (strength, density) exactly as `encode` emits them on beat tokens.
[[nodiscard]] inline std::vector<BeatFeature> rhythm_features(const SymbolicPiece &piece, const TokenizerConfig &cfg = {}) {
    cfg.validate();
    const auto g = detail::quantize(piece);
    const auto bars = detail::summarize_bars(g);
    std::vector<BeatFeature> out;
    for (std::size_t b = 0; b < bars.size(); ++b) {
        const int density = cfg.density_bucket(bars[b].onsets);
        for (int beat = 0; beat < g.beats_per_bar; ++beat) {
            out.push_back(BeatFeature{ static_cast<std::int64_t>(b), beat,
                                       detail::channel_mask_count(bars[b].beat_masks[static_cast<std::size_t>(beat)]), density });
        }
    }
    return out;
}

[[nodiscard]] inline TokenSequence encode(const SymbolicPiece &piece, const TokenizerConfig &cfg = {}) {
    cfg.validate();
    const auto g = detail::quantize(piece);
    const auto bars = detail::summarize_bars(g);
    TokenSequence seq;
    std::size_t next = 0;
    for (std::int64_t b = 0; b < g.bars; ++b) {
        const auto &bar = bars[static_cast<std::size_t>(b)];
        const int density = cfg.density_bucket(bar.onsets);
        seq.push_back(CompoundToken::rhythm(Timestep::bar, detail::channel_mask_count(bar.bar_mask), density));
        for (int beat = 0; beat < g.beats_per_bar; ++beat) {
            const int strength = detail::channel_mask_count(bar.beat_masks[static_cast<std::size_t>(beat)]);
            const std::int64_t first = b * g.slots_per_bar + static_cast<std::int64_t>(beat) * g.slots_per_beat;
            seq.push_back(CompoundToken::rhythm(Timestep::beat, strength, density));
            for (std::int64_t slot = first; slot < first + g.slots_per_beat; ++slot) {
                // sub-step marker only while later onsets remain inside this beat
                if (slot != first) {
                    if (next >= g.notes.size() || g.notes[next].slot >= first + g.slots_per_beat) break;
                    seq.push_back(CompoundToken::rhythm(Timestep::none, strength, density));
                }
                while (next < g.notes.size() && g.notes[next].slot == slot) {
                    const auto &n = g.notes[next++];
                    seq.push_back(CompoundToken::note(n.kind, n.pitch, n.duration));
                }
            }
        }
    }
    if (seq.size() + 1 > cfg.max_length) {
        throw InvalidArgument("encoded piece needs " + std::to_string(seq.size() + 1) + " tokens, more than the maximum " +
                              std::to_string(cfg.max_length));
    }
    seq.push_back(CompoundToken::end());
    if (cfg.pad) seq.resize(cfg.max_length, CompoundToken::end());
    return seq;
}

/// Structural validation of a single token's attribute combination.
inline void validate_token(const CompoundToken &t, std::size_t position, const TokenizerConfig &cfg = {}) {
    const auto fail = [&](const std::string &why) {
        throw FormatError("token " + std::to_string(position) + ": " + why);
    };
    switch (t.type) {
        case TokenType::rhythmic:
            if (t.instrument || t.pitch || t.duration) fail("rhythmic token carries melodic attributes");
            if (!t.strength || !t.density) fail("rhythmic token lacks strength or density");
            if (*t.strength < 0 || *t.strength > max_strength) fail("strength out of range");
            if (*t.density < 0 || *t.density >= cfg.bucket_count()) fail("density bucket out of range");
            break;
        case TokenType::melodic:
            if (t.timestep != Timestep::none || t.strength || t.density) fail("melodic token carries rhythmic attributes");
            if (!t.instrument || !t.pitch || !t.duration) fail("melodic token lacks instrument, pitch or duration");
            if (*t.pitch < 0 || *t.pitch > 127) fail("pitch out of range");
            if (*t.duration < 1 || *t.duration > max_token_duration) fail("duration out of range");
            break;
        case TokenType::eos:
            if (t.timestep != Timestep::none || t.strength || t.density || t.instrument || t.pitch || t.duration) {
                fail("end-of-song token carries attributes");
            }
            break;
    }
}

[[nodiscard]] inline SymbolicPiece decode(const TokenSequence &tokens, const DecodeConfig &dc = {}, const TokenizerConfig &cfg = {}) {
    int spb = 16;
    int slots_per_beat = 4;
    int beats = 4;
    detail::beat_layout(dc.meter, spb, slots_per_beat, beats);
    if (dc.ticks_per_quarter <= 0 || dc.ticks_per_quarter % 4 != 0) throw InvalidArgument("ticks per quarter must be a positive multiple of 4");
    const Tick sixteenth = dc.ticks_per_quarter / 4;

    SymbolicPiece piece;
    piece.tempo.ticks_per_quarter = dc.ticks_per_quarter;
    piece.tempo.changes = { TempoChange{ 0, dc.microseconds_per_quarter } };
    piece.meter = dc.meter;

    std::int64_t bar = -1;
    int beat = -1;
    std::int64_t slot = -1;  // -1 until a beat token is seen in the current bar
    bool ended = false;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto &t = tokens[i];
        validate_token(t, i, cfg);
        if (ended) {
            if (t.type != TokenType::eos) throw FormatError("token " + std::to_string(i) + ": content after end-of-song");
            continue;
        }
        if (t.type == TokenType::eos) {
            ended = true;
            continue;
        }
        if (t.type == TokenType::rhythmic) {
            switch (t.timestep) {
                case Timestep::bar:
                    ++bar;
                    beat = -1;
                    slot = -1;
                    break;
                case Timestep::beat:
                    if (bar < 0) throw FormatError("token " + std::to_string(i) + ": beat before any bar");
                    if (++beat >= beats) throw FormatError("token " + std::to_string(i) + ": more than " + std::to_string(beats) + " beats in a bar");
                    slot = bar * spb + static_cast<std::int64_t>(beat) * slots_per_beat;
                    break;
                case Timestep::none: {
                    if (slot < 0) throw FormatError("token " + std::to_string(i) + ": sub-step before any beat");
                    const std::int64_t beat_start = bar * spb + static_cast<std::int64_t>(beat) * slots_per_beat;
                    if (++slot >= beat_start + slots_per_beat) throw FormatError("token " + std::to_string(i) + ": sub-step past the end of its beat");
                    break;
                }
            }
            continue;
        }
        if (slot < 0) throw FormatError("token " + std::to_string(i) + ": melodic token before any beat token");
        piece.channel(*t.instrument).notes.push_back(NoteEvent{ slot * sixteenth, *t.duration * sixteenth, *t.pitch, dc.velocity });
    }
    if (!tokens.empty() && !ended) throw FormatError("token sequence is not terminated by end-of-song");
    for (auto &ch : piece.channels) ch.sort_notes();
    piece.length_ticks = std::max<Tick>((bar + 1) * spb * sixteenth, piece.last_note_off());
    return piece;
}

// ---------------------------------------------------------------------------------------------
// JSONL form: one token per line with all seven attributes named (null when not applicable)

[[nodiscard]] inline std::string_view token_type_name(TokenType t) noexcept {
    switch (t) {
        case TokenType::rhythmic: return "rhythmic";
        case TokenType::melodic: return "melodic";
        case TokenType::eos: return "eos";
    }
    return "?";
}

[[nodiscard]] inline std::string_view timestep_name(Timestep t) noexcept {
    switch (t) {
        case Timestep::none: return "none";
        case Timestep::beat: return "beat";
        case Timestep::bar: return "bar";
    }
    return "?";
}

[[nodiscard]] inline nlohmann::ordered_json token_to_json(const CompoundToken &t) {
    const auto opt = [](const std::optional<int> &v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr); };
    nlohmann::ordered_json j;
    j["token_type"] = token_type_name(t.type);
    j["timestep"] = t.type == TokenType::rhythmic ? nlohmann::ordered_json(timestep_name(t.timestep)) : nlohmann::ordered_json(nullptr);
    j["density"] = opt(t.density);
    j["strength"] = opt(t.strength);
    j["instrument"] = t.instrument ? nlohmann::ordered_json(channel_name(*t.instrument)) : nlohmann::ordered_json(nullptr);
    j["pitch"] = opt(t.pitch);
    j["duration"] = opt(t.duration);
    return j;
}

[[nodiscard]] inline CompoundToken token_from_json(const nlohmann::json &j) {
    CompoundToken t;
    const auto type = j.at("token_type").get<std::string>();
    if (type == "rhythmic") {
        t.type = TokenType::rhythmic;
    } else if (type == "melodic") {
        t.type = TokenType::melodic;
    } else if (type == "eos") {
        t.type = TokenType::eos;
    } else {
        throw FormatError("unknown token_type '" + type + "'");
    }
    const auto ts = j.value("timestep", nlohmann::json(nullptr));
    if (!ts.is_null()) {
        const auto s = ts.get<std::string>();
        if (s == "bar") {
            t.timestep = Timestep::bar;
        } else if (s == "beat") {
            t.timestep = Timestep::beat;
        } else if (s == "none") {
            t.timestep = Timestep::none;
        } else {
            throw FormatError("unknown timestep '" + s + "'");
        }
    }
    const auto get_int = [&](const char *key) -> std::optional<int> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return j.at(key).get<int>();
    };
    t.density = get_int("density");
    t.strength = get_int("strength");
    t.pitch = get_int("pitch");
    t.duration = get_int("duration");
    if (j.contains("instrument") && !j.at("instrument").is_null()) {
        const auto name = j.at("instrument").get<std::string>();
        t.instrument = parse_channel_kind(name);
        if (!t.instrument) throw FormatError("unknown instrument '" + name + "'");
    }
    return t;
}

[[nodiscard]] inline std::string tokens_to_jsonl(const TokenSequence &seq) {
    std::string out;
    for (const auto &t : seq) out += token_to_json(t).dump() + "\n";
    return out;
}

[[nodiscard]] inline TokenSequence tokens_from_jsonl(std::string_view text) {
    TokenSequence seq;
    std::istringstream in{ std::string(text) };
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (detail::trim(line).empty()) continue;
        try {
            seq.push_back(token_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception &e) {
            throw FormatError("tokens line " + std::to_string(lineno) + ": " + e.what());
        } catch (const FormatError &e) {
            throw FormatError("tokens line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return seq;
}

}  // namespace nesvmdb

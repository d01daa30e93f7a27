#pragma once

#include "nesvmdb/common.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nesvmdb {

using Tick = std::int64_t;

/// The four NES voices carried by the piece model.
enum class ChannelKind : std::uint8_t { P1 = 0, P2 = 1, TR = 2, NO = 3 };

inline constexpr std::array<ChannelKind, 4> all_channel_kinds{ ChannelKind::P1, ChannelKind::P2, ChannelKind::TR,
                                                               ChannelKind::NO };

[[nodiscard]] constexpr std::size_t channel_index(ChannelKind kind) noexcept { return static_cast<std::size_t>(kind); }

/// P1, P2 and TR are pitched; NO uses its pitch to select a noise period.
[[nodiscard]] constexpr bool is_melodic(ChannelKind kind) noexcept { return kind != ChannelKind::NO; }

[[nodiscard]] constexpr std::string_view channel_name(ChannelKind kind) noexcept {
    switch (kind) {
        case ChannelKind::P1: return "P1";
        case ChannelKind::P2: return "P2";
        case ChannelKind::TR: return "TR";
        case ChannelKind::NO: return "NO";
    }
    return "?";
}

/// Case-insensitive; accepts "P1", "p2", "tr", ...
[[nodiscard]] inline std::optional<ChannelKind> parse_channel_kind(std::string_view name) {
    const auto lower = detail::to_lower_ascii(detail::trim(name));
    for (auto kind : all_channel_kinds) {
        if (lower == detail::to_lower_ascii(channel_name(kind))) return kind;
    }
    return std::nullopt;
}

struct NoteEvent {
    Tick onset = 0;
    Tick duration = 1;
    int pitch = 60;
    int velocity = 100;

    [[nodiscard]] Tick end() const noexcept { return onset + duration; }
    friend bool operator==(const NoteEvent &, const NoteEvent &) = default;
};

/// Canonical note order: onset, then pitch ascending.
[[nodiscard]] inline bool note_order(const NoteEvent &a, const NoteEvent &b) noexcept {
    if (a.onset != b.onset) return a.onset < b.onset;
    if (a.pitch != b.pitch) return a.pitch < b.pitch;
    if (a.duration != b.duration) return a.duration < b.duration;
    return a.velocity < b.velocity;
}

struct Channel {
    ChannelKind kind = ChannelKind::P1;
    std::vector<NoteEvent> notes;

    void sort_notes() { std::stable_sort(notes.begin(), notes.end(), note_order); }
    friend bool operator==(const Channel &, const Channel &) = default;
};

struct TempoChange {
    Tick tick = 0;
    double microseconds_per_quarter = 500000.0;
    friend bool operator==(const TempoChange &, const TempoChange &) = default;
};

/// Piecewise-constant tempo over a tick timeline. Always holds an entry at tick 0.
struct TempoMap {
    int ticks_per_quarter = 480;
    std::vector<TempoChange> changes{ TempoChange{} };

    /// Wall-clock seconds elapsed at `tick`.
    [[nodiscard]] double seconds_at(Tick tick) const {
        double seconds = 0.0;
        for (std::size_t i = 0; i < changes.size(); ++i) {
            const Tick start = changes[i].tick;
            if (start >= tick) break;
            const Tick stop = (i + 1 < changes.size()) ? std::min(changes[i + 1].tick, tick) : tick;
            seconds += static_cast<double>(stop - start) * changes[i].microseconds_per_quarter * 1e-6 /
                       static_cast<double>(ticks_per_quarter);
        }
        return seconds;
    }

    /// Sorts, drops duplicates at the same tick (last wins) and guarantees a tick-0 entry.
    void canonicalize() {
        std::stable_sort(changes.begin(), changes.end(),
                         [](const TempoChange &a, const TempoChange &b) { return a.tick < b.tick; });
        std::vector<TempoChange> out;
        for (const auto &c : changes) {
            if (!out.empty() && out.back().tick == c.tick) {
                out.back() = c;
            } else {
                out.push_back(c);
            }
        }
        if (out.empty() || out.front().tick != 0) {
            out.insert(out.begin(), TempoChange{ 0, 500000.0 });
        }
        changes = std::move(out);
    }

    friend bool operator==(const TempoMap &, const TempoMap &) = default;
};

struct TimeSignature {
    int numerator = 4;
    int denominator = 4;
    friend bool operator==(const TimeSignature &, const TimeSignature &) = default;
};

/// Four-voice NES piece: one channel per ChannelKind, indexed by channel_index().
struct SymbolicPiece {
    std::array<Channel, 4> channels{ Channel{ ChannelKind::P1, {} }, Channel{ ChannelKind::P2, {} },
                                     Channel{ ChannelKind::TR, {} }, Channel{ ChannelKind::NO, {} } };
    TempoMap tempo;
    TimeSignature meter;
    /// Declared end of the piece in ticks (end-of-track); never less than the last note-off.
    Tick length_ticks = 0;

    [[nodiscard]] Channel &channel(ChannelKind kind) noexcept { return channels[channel_index(kind)]; }
    [[nodiscard]] const Channel &channel(ChannelKind kind) const noexcept { return channels[channel_index(kind)]; }

    [[nodiscard]] Tick last_note_off() const noexcept {
        Tick end = 0;
        for (const auto &ch : channels) {
            for (const auto &n : ch.notes) end = std::max(end, n.end());
        }
        return end;
    }

    [[nodiscard]] std::size_t note_count() const noexcept {
        std::size_t n = 0;
        for (const auto &ch : channels) n += ch.notes.size();
        return n;
    }

    /// Ticks in one bar under the prevailing meter.
    [[nodiscard]] double bar_ticks() const noexcept {
        return static_cast<double>(tempo.ticks_per_quarter) * 4.0 * meter.numerator / meter.denominator;
    }

    friend bool operator==(const SymbolicPiece &, const SymbolicPiece &) = default;
};

/// Sixteenth-note grid index nearest to `tick`; exact halves round down.
[[nodiscard]] inline std::int64_t sixteenth_slot(Tick tick, int ticks_per_quarter) noexcept {
    // slot = ceil(4*tick/tpq - 1/2) = ceil((8*tick - tpq) / (2*tpq))
    const std::int64_t num = 8 * tick - ticks_per_quarter;
    const std::int64_t den = 2 * static_cast<std::int64_t>(ticks_per_quarter);
    if (num <= 0) return 0;
    return (num + den - 1) / den;
}

/// Sixteenth slots per bar for a meter (16 in 4/4).
[[nodiscard]] inline int slots_per_bar(const TimeSignature &meter) {
    const int slots = 16 * meter.numerator / meter.denominator;
    if (slots <= 0 || 16 * meter.numerator % meter.denominator != 0) {
        throw InvalidArgument("meter " + std::to_string(meter.numerator) + "/" + std::to_string(meter.denominator) +
                              " does not map onto a sixteenth-note grid");
    }
    return slots;
}

/// Wall-clock time of the last note-off; 0 for an empty piece.
[[nodiscard]] inline double piece_duration_seconds(const SymbolicPiece &piece) {
    return piece.tempo.seconds_at(piece.last_note_off());
}

/// Minimum duration, in seconds, a piece must strictly exceed to count as music rather than a sound effect.
inline constexpr double complete_piece_min_seconds = 8.0;

/// Keeps pieces whose duration strictly exceeds `min_seconds`, preserving order.
[[nodiscard]] inline std::vector<SymbolicPiece> filter_complete_pieces(std::vector<SymbolicPiece> pieces,
                                                                       double min_seconds = complete_piece_min_seconds) {
    std::erase_if(pieces, [&](const SymbolicPiece &p) { return !(piece_duration_seconds(p) > min_seconds); });
    return pieces;
}

enum class OverlapTieBreak { keep_higher_pitch, keep_lower_pitch };

/// Makes P1/P2/TR monophonic: among notes sharing an onset one survives (per `tie_break`),
/// and a note still sounding at the next onset is cut short there. NO is left untouched.
[[nodiscard]] inline SymbolicPiece normalize_monophony(SymbolicPiece piece,
                                                       OverlapTieBreak tie_break = OverlapTieBreak::keep_higher_pitch) {
    for (auto &ch : piece.channels) {
        ch.sort_notes();
        if (!is_melodic(ch.kind)) continue;
        std::vector<NoteEvent> kept;
        kept.reserve(ch.notes.size());
        for (std::size_t i = 0; i < ch.notes.size();) {
            std::size_t j = i;
            std::size_t pick = i;
            for (; j < ch.notes.size() && ch.notes[j].onset == ch.notes[i].onset; ++j) {
                const bool better = tie_break == OverlapTieBreak::keep_higher_pitch
                                        ? ch.notes[j].pitch > ch.notes[pick].pitch
                                        : ch.notes[j].pitch < ch.notes[pick].pitch;
                // equal pitch: the longer note wins
                if (better || (ch.notes[j].pitch == ch.notes[pick].pitch && ch.notes[j].duration > ch.notes[pick].duration)) {
                    pick = j;
                }
            }
            kept.push_back(ch.notes[pick]);
            i = j;
        }
        for (std::size_t i = 0; i + 1 < kept.size(); ++i) {
            if (kept[i].end() > kept[i + 1].onset) kept[i].duration = kept[i + 1].onset - kept[i].onset;
        }
        std::erase_if(kept, [](const NoteEvent &n) { return n.duration <= 0; });
        ch.notes = std::move(kept);
    }
    return piece;
}

/// Shifts melodic pitches by `semitones`; notes leaving [0,127] are dropped. NO is not transposed.
[[nodiscard]] inline SymbolicPiece transpose(SymbolicPiece piece, int semitones) {
    for (auto &ch : piece.channels) {
        if (!is_melodic(ch.kind) || semitones == 0) continue;
        std::vector<NoteEvent> out;
        out.reserve(ch.notes.size());
        for (auto n : ch.notes) {
            n.pitch += semitones;
            if (n.pitch >= 0 && n.pitch <= 127) out.push_back(n);
        }
        ch.notes = std::move(out);
    }
    return piece;
}

/// Multiplies the tempo by `factor` (1.1 plays 10% faster).
[[nodiscard]] inline SymbolicPiece scale_tempo(SymbolicPiece piece, double factor) {
    if (!(factor > 0.0)) throw InvalidArgument("tempo factor must be positive");
    for (auto &c : piece.tempo.changes) c.microseconds_per_quarter /= factor;
    return piece;
}

/// Multiplies every velocity by `factor`, clamping to [1,127].
[[nodiscard]] inline SymbolicPiece scale_velocity(SymbolicPiece piece, double factor) {
    for (auto &ch : piece.channels) {
        for (auto &n : ch.notes) {
            n.velocity = std::clamp(static_cast<int>(std::lround(n.velocity * factor)), 1, 127);
        }
    }
    return piece;
}

struct AugmentedPiece {
    int semitones = 0;
    double tempo_factor = 1.0;
    double velocity_factor = 1.0;
    SymbolicPiece piece;
};

struct AugmentationGrid {
    int min_semitones = -5;
    int max_semitones = 6;
    std::vector<double> tempo_factors{ 0.9, 1.0, 1.1 };
    std::vector<double> velocity_factors{ 0.9, 1.0, 1.1 };
};

/// Full cross product of transpositions x tempo factors x velocity factors (108 variants by default).
/// Order: semitones outermost, velocity factor innermost.
[[nodiscard]] inline std::vector<AugmentedPiece> augment(const SymbolicPiece &piece, const AugmentationGrid &grid = {}) {
    std::vector<AugmentedPiece> out;
    out.reserve(static_cast<std::size_t>(grid.max_semitones - grid.min_semitones + 1) * grid.tempo_factors.size() *
                grid.velocity_factors.size());
    for (int k = grid.min_semitones; k <= grid.max_semitones; ++k) {
        const SymbolicPiece shifted = transpose(piece, k);
        for (double tf : grid.tempo_factors) {
            const SymbolicPiece timed = tf == 1.0 ? shifted : scale_tempo(shifted, tf);
            for (double vf : grid.velocity_factors) {
                out.push_back(AugmentedPiece{ k, tf, vf, vf == 1.0 ? timed : scale_velocity(timed, vf) });
            }
        }
    }
    return out;
}

}  // namespace nesvmdb

#pragma once

// Objective structure metrics on the sixteenth-note grid, and corpus comparison tables.

#include "nesvmdb/common.hpp"
#include "nesvmdb/midi.hpp"
#include "nesvmdb/symbolic.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nesvmdb {

struct MetricsOptions {
    /// The noise voice's "pitch" selects a noise period, so it is left out of pitch metrics by default.
    bool noise_in_pitch_metrics = false;
    /// Average the groove of each channel's own onset vectors instead of merging all channels.
    bool per_channel_groove = false;
};

struct MetricsReport {
    std::optional<double> groove_similarity;
    std::optional<double> unique_pitch_classes;
    std::optional<double> pitch_class_entropy;
    std::optional<double> pitch_range;
    std::optional<double> polyphony;
    friend bool operator==(const MetricsReport &, const MetricsReport &) = default;
};

inline constexpr std::array<std::string_view, 5> metric_names{ "groove_similarity", "unique_pitch_classes", "pitch_class_entropy",
                                                               "pitch_range", "polyphony" };

namespace detail {

inline std::vector<int> pitch_notes(const SymbolicPiece &piece, const MetricsOptions &opt) {
    std::vector<int> pitches;
    for (auto kind : all_channel_kinds) {
        if (!is_melodic(kind) && !opt.noise_in_pitch_metrics) continue;
        for (const auto &n : piece.channel(kind).notes) pitches.push_back(n.pitch);
    }
    return pitches;
}

inline std::array<std::size_t, 12> pitch_class_counts(const std::vector<int> &pitches) {
    std::array<std::size_t, 12> h{};
    for (int p : pitches) ++h[static_cast<std::size_t>(((p % 12) + 12) % 12)];
    return h;
}

/// Bars spanned by the notes (ceil of the last note-off slot over the bar size).
inline std::int64_t bar_count(const SymbolicPiece &piece, int slots) {
    std::int64_t last = 0;
    for (const auto &ch : piece.channels) {
        for (const auto &n : ch.notes) last = std::max(last, sixteenth_slot(n.end(), piece.tempo.ticks_per_quarter));
    }
    return (last + slots - 1) / slots;
}

inline std::optional<double> groove_of(const std::vector<const Channel *> &channels, const SymbolicPiece &piece) {
    const int slots = slots_per_bar(piece.meter);
    const auto bars = bar_count(piece, slots);
    if (bars < 2) return std::nullopt;
    std::vector<std::uint8_t> grid(static_cast<std::size_t>(bars * slots), 0);
    for (const auto *ch : channels) {
        for (const auto &n : ch->notes) {
            const auto s = sixteenth_slot(n.onset, piece.tempo.ticks_per_quarter);
            if (s < bars * slots) grid[static_cast<std::size_t>(s)] = 1;
        }
    }
    double total = 0.0;
    for (std::int64_t b = 0; b + 1 < bars; ++b) {
        int hamming = 0;
        for (int s = 0; s < slots; ++s) {
            hamming += grid[static_cast<std::size_t>(b * slots + s)] != grid[static_cast<std::size_t>((b + 1) * slots + s)];
        }
        total += 1.0 - static_cast<double>(hamming) / slots;
    }
    return total / static_cast<double>(bars - 1);
}

}  // namespace detail

/// Shannon entropy (bits) of the pitch-class histogram of melodic notes.
[[nodiscard]] inline std::optional<double> pitch_class_entropy(const SymbolicPiece &piece, const MetricsOptions &opt = {}) {
    const auto pitches = detail::pitch_notes(piece, opt);
    if (pitches.empty()) return std::nullopt;
    const auto h = detail::pitch_class_counts(pitches);
    double e = 0.0;
    for (auto c : h) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(pitches.size());
        e -= p * std::log2(p);
    }
    return e == 0.0 ? 0.0 : e;  // avoid -0
}

/// Mean of 1 - hamming/slots over neighbouring bars' onset vectors (all channels merged unless
/// `per_channel_groove`). Absent with fewer than two bars.
[[nodiscard]] inline std::optional<double> grooving_similarity(const SymbolicPiece &piece, const MetricsOptions &opt = {}) {
    if (!opt.per_channel_groove) {
        std::vector<const Channel *> all;
        for (const auto &ch : piece.channels) all.push_back(&ch);
        return detail::groove_of(all, piece);
    }
    double sum = 0.0;
    int n = 0;
    for (const auto &ch : piece.channels) {
        if (ch.notes.empty()) continue;
        if (auto g = detail::groove_of({ &ch }, piece)) {
            sum += *g;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

[[nodiscard]] inline std::optional<double> pitch_range(const SymbolicPiece &piece, const MetricsOptions &opt = {}) {
    const auto pitches = detail::pitch_notes(piece, opt);
    if (pitches.empty()) return std::nullopt;
    const auto [lo, hi] = std::minmax_element(pitches.begin(), pitches.end());
    return static_cast<double>(*hi - *lo);
}

[[nodiscard]] inline std::optional<double> unique_pitch_classes(const SymbolicPiece &piece, const MetricsOptions &opt = {}) {
    const auto pitches = detail::pitch_notes(piece, opt);
    if (pitches.empty()) return std::nullopt;
    const auto h = detail::pitch_class_counts(pitches);
    return static_cast<double>(std::count_if(h.begin(), h.end(), [](std::size_t c) { return c > 0; }));
}

/// Mean number of sounding notes (all four voices) over sixteenth slots where at least one
/// note sounds. A note occupies [slot(onset), max(slot(onset)+1, slot(end))).
[[nodiscard]] inline std::optional<double> polyphony(const SymbolicPiece &piece) {
    const int tpq = piece.tempo.ticks_per_quarter;
    std::vector<std::pair<std::int64_t, int>> edges;
    for (const auto &ch : piece.channels) {
        for (const auto &n : ch.notes) {
            const auto a = sixteenth_slot(n.onset, tpq);
            const auto b = std::max(a + 1, sixteenth_slot(n.end(), tpq));
            edges.emplace_back(a, +1);
            edges.emplace_back(b, -1);
        }
    }
    if (edges.empty()) return std::nullopt;
    std::sort(edges.begin(), edges.end());
    std::int64_t occupied = 0;
    std::int64_t weighted = 0;
    int sounding = 0;
    for (std::size_t i = 0; i < edges.size();) {
        const auto at = edges[i].first;
        while (i < edges.size() && edges[i].first == at) sounding += edges[i++].second;
        if (i < edges.size() && sounding > 0) {
            const auto span = edges[i].first - at;
            occupied += span;
            weighted += span * sounding;
        }
    }
    return static_cast<double>(weighted) / static_cast<double>(occupied);
}

[[nodiscard]] inline MetricsReport compute_metrics(const SymbolicPiece &piece, const MetricsOptions &opt = {}) {
    return MetricsReport{ grooving_similarity(piece, opt), unique_pitch_classes(piece, opt), pitch_class_entropy(piece, opt),
                          pitch_range(piece, opt), polyphony(piece) };
}

[[nodiscard]] inline std::array<std::optional<double>, 5> metric_values(const MetricsReport &r) {
    return { r.groove_similarity, r.unique_pitch_classes, r.pitch_class_entropy, r.pitch_range, r.polyphony };
}

struct MetricMean {
    std::optional<double> mean;
    std::size_t counted = 0;
    std::size_t excluded = 0;
};

/// Unweighted per-metric means; pieces where a metric is absent are excluded from that mean.
[[nodiscard]] inline std::array<MetricMean, 5> corpus_means(const std::vector<MetricsReport> &reports) {
    std::array<MetricMean, 5> out{};
    std::array<double, 5> sum{};
    for (const auto &r : reports) {
        const auto v = metric_values(r);
        for (std::size_t m = 0; m < 5; ++m) {
            if (v[m]) {
                sum[m] += *v[m];
                ++out[m].counted;
            } else {
                ++out[m].excluded;
            }
        }
    }
    for (std::size_t m = 0; m < 5; ++m) {
        if (out[m].counted > 0) out[m].mean = sum[m] / static_cast<double>(out[m].counted);
    }
    return out;
}

struct CorpusRow {
    std::string name;
    std::size_t pieces = 0;
    std::size_t unreadable = 0;
    std::array<MetricMean, 5> metrics{};
};

struct CorpusOptions {
    MetricsOptions metrics;
    MidiParseOptions midi;
    bool normalize = true;
    OverlapTieBreak tie_break = OverlapTieBreak::keep_higher_pitch;
    unsigned threads = 0;
};

/// Computes a row for a named directory of MIDI files. Unreadable files are counted and skipped.
[[nodiscard]] inline CorpusRow corpus_row(std::string name, const std::filesystem::path &dir, const CorpusOptions &opt = {}) {
    const auto files = detail::list_files(dir, { ".mid", ".midi" });
    if (files.empty()) throw InvalidArgument("no MIDI files in '" + dir.string() + "' (set '" + name + "')");
    std::vector<std::optional<MetricsReport>> reports(files.size());
    detail::parallel_for(
        files.size(),
        [&](std::size_t i) {
            try {
                auto piece = read_midi_file(files[i], opt.midi);
                if (opt.normalize) piece = normalize_monophony(std::move(piece), opt.tie_break);
                reports[i] = compute_metrics(piece, opt.metrics);
            } catch (const Error &) {
            }
        },
        opt.threads);
    CorpusRow row;
    row.name = std::move(name);
    std::vector<MetricsReport> ok;
    for (auto &r : reports) {
        if (r) {
            ok.push_back(*r);
        } else {
            ++row.unreadable;
        }
    }
    row.pieces = ok.size();
    row.metrics = corpus_means(ok);
    return row;
}

[[nodiscard]] inline std::vector<CorpusRow> corpus_report(const std::vector<std::pair<std::string, std::filesystem::path>> &dirs,
                                                          const CorpusOptions &opt = {}) {
    std::vector<CorpusRow> rows;
    for (const auto &[name, dir] : dirs) rows.push_back(corpus_row(name, dir, opt));
    return rows;
}

namespace detail {

inline std::string fmt3(const std::optional<double> &v) {
    if (!v) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return buf;
}

inline std::string pad(std::string s, std::size_t w, bool right) {
    if (s.size() >= w) return s;
    return right ? std::string(w - s.size(), ' ') + s : s + std::string(w - s.size(), ' ');
}

}  // namespace detail

inline constexpr std::array<std::string_view, 5> metric_labels{ "Grooving Pattern Similarity", "Number of Unique Pitch Classes",
                                                                "Pitch Class Histogram Entropy", "Pitch Range",
                                                                "Number of Notes Played Concurrently" };

/// Metrics as rows, corpora as columns, followed by exclusion notes.
[[nodiscard]] inline std::string render_report_text(const std::vector<CorpusRow> &rows) {
    std::size_t label_w = std::string_view("Pieces").size();
    for (auto l : metric_labels) label_w = std::max(label_w, l.size());
    std::vector<std::size_t> col_w;
    for (const auto &r : rows) col_w.push_back(std::max<std::size_t>(8, r.name.size()));

    std::string out = detail::pad("Metric", label_w, false);
    for (std::size_t c = 0; c < rows.size(); ++c) out += "  " + detail::pad(rows[c].name, col_w[c], true);
    out += "\n" + std::string(out.size() - 1, '-') + "\n";
    for (std::size_t m = 0; m < 5; ++m) {
        out += detail::pad(std::string(metric_labels[m]), label_w, false);
        for (std::size_t c = 0; c < rows.size(); ++c) out += "  " + detail::pad(detail::fmt3(rows[c].metrics[m].mean), col_w[c], true);
        out += "\n";
    }
    out += detail::pad("Pieces", label_w, false);
    for (std::size_t c = 0; c < rows.size(); ++c) out += "  " + detail::pad(std::to_string(rows[c].pieces), col_w[c], true);
    out += "\n";
    for (const auto &r : rows) {
        for (std::size_t m = 0; m < 5; ++m) {
            if (r.metrics[m].excluded > 0) {
                out += "note: " + r.name + ": " + std::string(metric_names[m]) + " absent for " + std::to_string(r.metrics[m].excluded) +
                       " of " + std::to_string(r.pieces) + " pieces (excluded from mean)\n";
            }
        }
        if (r.unreadable > 0) out += "note: " + r.name + ": " + std::to_string(r.unreadable) + " unreadable files skipped\n";
    }
    return out;
}

/// One line per (corpus, metric): set,metric,mean,counted,excluded. Absent means are empty.
[[nodiscard]] inline std::string render_report_csv(const std::vector<CorpusRow> &rows) {
    std::string out = "set,metric,mean,counted,excluded\n";
    for (const auto &r : rows) {
        for (std::size_t m = 0; m < 5; ++m) {
            char buf[64] = "";
            if (r.metrics[m].mean) std::snprintf(buf, sizeof buf, "%.6f", *r.metrics[m].mean);
            out += r.name + "," + std::string(metric_names[m]) + "," + buf + "," + std::to_string(r.metrics[m].counted) + "," +
                   std::to_string(r.metrics[m].excluded) + "\n";
        }
    }
    return out;
}

}  // namespace nesvmdb

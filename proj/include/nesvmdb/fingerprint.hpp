#pragma once

// Landmark fingerprinting: log-magnitude STFT, 2-D local-maximum peak picking, anchor/target
// pair hashing into 32-bit codes, a per-game inverted index and offset-histogram matching.

#include "nesvmdb/audio.hpp"
#include "nesvmdb/common.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace nesvmdb {

/// Analysis parameters. An index records the values it was built with and refuses
/// queries analysed differently.
struct FingerprintParams {
    int window_size = 4096;
    int hop = 2048;
    /// Peak neighborhood half-extents: a peak dominates frames +-neighborhood_frames and bins +-neighborhood_bins.
    int neighborhood_frames = 20;
    int neighborhood_bins = 20;
    /// Minimum log-magnitude (dB) of a peak.
    double amp_min = 10.0;
    int fan_out = 15;
    int max_delta_frames = 200;
    int sample_rate = 44100;

    void validate() const {
        if (window_size < 16 || (window_size & (window_size - 1)) != 0) {
            throw InvalidArgument("window size must be a power of two >= 16");
        }
        if (hop <= 0 || hop > window_size) throw InvalidArgument("hop must satisfy 0 < hop <= window size");
        if (neighborhood_frames < 1 || neighborhood_bins < 1) throw InvalidArgument("neighborhood dimensions must be >= 1");
        if (fan_out < 1) throw InvalidArgument("fan-out must be >= 1");
        if (max_delta_frames < 1 || max_delta_frames > 4095) throw InvalidArgument("max delta frames must be in [1, 4095]");
        if (sample_rate <= 0) throw InvalidArgument("sample rate must be positive");
    }

    [[nodiscard]] double frame_seconds() const noexcept { return static_cast<double>(hop) / sample_rate; }

    friend bool operator==(const FingerprintParams &, const FingerprintParams &) = default;
};

/// Acceptance thresholds applied to the best offset bin.
struct MatchParams {
    std::uint32_t min_matches = 10;
    double min_confidence = 0.002;
    /// When false the best bin is always accepted, however weak.
    bool reject = true;
};

inline constexpr double spectrogram_floor_epsilon = 1e-10;

/// Row-major frames x bins matrix of 10*log10(|X|^2 + eps).
struct Spectrogram {
    std::vector<float> values;
    std::size_t frames = 0;
    std::size_t bins = 0;
    int window_size = 0;
    int hop = 0;
    int sample_rate = 0;

    [[nodiscard]] float at(std::size_t frame, std::size_t bin) const noexcept { return values[frame * bins + bin]; }
    [[nodiscard]] std::span<const float> frame(std::size_t f) const noexcept { return { values.data() + f * bins, bins }; }
};

[[nodiscard]] constexpr std::size_t spectrogram_frame_count(std::size_t samples, std::size_t window, std::size_t hop) noexcept {
    return samples < window ? 0 : (samples - window) / hop + 1;
}

namespace detail {

/// Real-to-complex FFTW plan of one size. Planning is serialized; execution through the
/// new-array interface is safe from any thread.
class RealFft {
public:
    explicit RealFft(int n) : n_{ n } {
        std::lock_guard lock(planner_mutex());
        auto *in = fftw_alloc_real(static_cast<std::size_t>(n));
        auto *out = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
        plan_ = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
        fftw_free(in);
        fftw_free(out);
        if (plan_ == nullptr) throw Error("FFTW failed to create a plan of size " + std::to_string(n));
    }
    ~RealFft() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }
    RealFft(const RealFft &) = delete;
    RealFft &operator=(const RealFft &) = delete;

    void execute(double *in, fftw_complex *out) const noexcept { fftw_execute_dft_r2c(plan_, in, out); }
    [[nodiscard]] int size() const noexcept { return n_; }

    static const RealFft &cached(int n) {
        static std::mutex cache_mutex;
        static std::map<int, std::unique_ptr<RealFft>> cache;
        std::lock_guard lock(cache_mutex);
        auto &slot = cache[n];
        if (!slot) slot = std::make_unique<RealFft>(n);
        return *slot;
    }

private:
    static std::mutex &planner_mutex() {
        static std::mutex m;
        return m;
    }
    int n_;
    fftw_plan plan_ = nullptr;
};

struct FftwDeleter {
    void operator()(void *p) const noexcept { fftw_free(p); }
};

/// Sliding maximum of width 2*radius+1 (clipped at the ends) over `n` values spaced `stride` apart.
inline void sliding_max(const float *in, float *out, std::size_t n, std::size_t stride, std::size_t radius,
                        std::deque<std::size_t> &window) {
    window.clear();
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t hi = std::min(n - 1, i + radius);
        for (; next <= hi; ++next) {
            while (!window.empty() && in[window.back() * stride] <= in[next * stride]) window.pop_back();
            window.push_back(next);
        }
        while (window.front() + radius < i) window.pop_front();
        out[i * stride] = in[window.front() * stride];
    }
}

}  // namespace detail

/// Hann-windowed (symmetric) magnitude STFT in dB: 10*log10(|X|^2 + 1e-10). Audio shorter
/// than one window yields an empty spectrogram.
[[nodiscard]] inline Spectrogram compute_spectrogram(const AudioBuffer &audio, int window_size, int hop) {
    if (window_size < 2 || (window_size & (window_size - 1)) != 0) throw InvalidArgument("window size must be a power of two");
    if (hop <= 0 || hop > window_size) throw InvalidArgument("hop must satisfy 0 < hop <= window size");
    Spectrogram spec;
    spec.window_size = window_size;
    spec.hop = hop;
    spec.sample_rate = audio.sample_rate;
    const auto n = static_cast<std::size_t>(window_size);
    spec.bins = n / 2 + 1;
    spec.frames = spectrogram_frame_count(audio.samples.size(), n, static_cast<std::size_t>(hop));
    spec.values.resize(spec.frames * spec.bins);
    if (spec.frames == 0) return spec;

    std::vector<double> window(n);
    for (std::size_t i = 0; i < n; ++i) {
        window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    const auto &fft = detail::RealFft::cached(window_size);
    std::unique_ptr<double, detail::FftwDeleter> in(fftw_alloc_real(n));
    std::unique_ptr<fftw_complex, detail::FftwDeleter> out(fftw_alloc_complex(spec.bins));
    for (std::size_t f = 0; f < spec.frames; ++f) {
        const float *src = audio.samples.data() + f * static_cast<std::size_t>(hop);
        for (std::size_t i = 0; i < n; ++i) in.get()[i] = src[i] * window[i];
        fft.execute(in.get(), out.get());
        float *row = spec.values.data() + f * spec.bins;
        for (std::size_t b = 0; b < spec.bins; ++b) {
            const double re = out.get()[b][0];
            const double im = out.get()[b][1];
            row[b] = static_cast<float>(10.0 * std::log10(re * re + im * im + spectrogram_floor_epsilon));
        }
    }
    return spec;
}

struct Peak {
    std::uint32_t frame = 0;
    std::uint32_t bin = 0;
    float magnitude = 0.0f;
    friend bool operator==(const Peak &, const Peak &) = default;
};

/// Peaks sorted by frame, then bin.
using PeakConstellation = std::vector<Peak>;

/// Local maxima over a (2*frames+1) x (2*bins+1) neighborhood with magnitude >= amp_min.
/// Among equal values in a neighborhood only the lowest (frame, bin) counts as a peak.
[[nodiscard]] inline PeakConstellation detect_peaks(const Spectrogram &spec, int neighborhood_frames,
                                                    int neighborhood_bins, double amp_min) {
    if (neighborhood_frames < 1 || neighborhood_bins < 1) throw InvalidArgument("neighborhood dimensions must be >= 1");
    PeakConstellation peaks;
    if (spec.frames == 0) return peaks;
    const std::size_t nf = spec.frames;
    const std::size_t nb = spec.bins;
    const auto rf = static_cast<std::size_t>(neighborhood_frames);
    const auto rb = static_cast<std::size_t>(neighborhood_bins);

    std::vector<float> row_max(nf * nb);
    std::vector<float> local_max(nf * nb);
    std::deque<std::size_t> window;
    for (std::size_t f = 0; f < nf; ++f) {
        detail::sliding_max(spec.values.data() + f * nb, row_max.data() + f * nb, nb, 1, rb, window);
    }
    for (std::size_t b = 0; b < nb; ++b) {
        detail::sliding_max(row_max.data() + b, local_max.data() + b, nf, nb, rf, window);
    }

    for (std::size_t f = 0; f < nf; ++f) {
        for (std::size_t b = 0; b < nb; ++b) {
            const float v = spec.values[f * nb + b];
            if (v != local_max[f * nb + b] || !(v >= amp_min)) continue;
            // tie check: an equal value earlier in (frame, bin) order wins
            bool earlier_tie = false;
            const std::size_t f0 = f >= rf ? f - rf : 0;
            const std::size_t b0 = b >= rb ? b - rb : 0;
            const std::size_t b1 = std::min(nb - 1, b + rb);
            for (std::size_t g = f0; g <= f && !earlier_tie; ++g) {
                const std::size_t stop = g == f ? b : b1 + 1;
                for (std::size_t c = b0; c < stop; ++c) {
                    if (spec.values[g * nb + c] == v) {
                        earlier_tie = true;
                        break;
                    }
                }
            }
            if (!earlier_tie) peaks.push_back(Peak{ static_cast<std::uint32_t>(f), static_cast<std::uint32_t>(b), v });
        }
    }
    return peaks;
}

/// 32-bit landmark code: f1 (10 bits) | f2 (10 bits) | delta frames (12 bits).
struct Fingerprint {
    std::uint32_t hash = 0;
    std::uint32_t anchor_frame = 0;
    friend auto operator<=>(const Fingerprint &, const Fingerprint &) = default;
};

struct HashFields {
    std::uint32_t f1 = 0;
    std::uint32_t f2 = 0;
    std::uint32_t delta_frames = 0;
    friend bool operator==(const HashFields &, const HashFields &) = default;
};

[[nodiscard]] constexpr std::uint32_t pack_hash(HashFields h) noexcept {
    return ((h.f1 & 0x3FFu) << 22) | ((h.f2 & 0x3FFu) << 12) | (h.delta_frames & 0xFFFu);
}

[[nodiscard]] constexpr HashFields unpack_hash(std::uint32_t code) noexcept {
    return HashFields{ code >> 22, (code >> 12) & 0x3FFu, code & 0xFFFu };
}

/// Maps an FFT bin of a `window_size` transform onto 10 bits: bin * 1024 / (window_size / 2), clamped to 1023.
[[nodiscard]] constexpr std::uint32_t quantize_bin(std::uint32_t bin, int window_size) noexcept {
    const std::uint64_t scaled = static_cast<std::uint64_t>(bin) * 2048u / static_cast<std::uint64_t>(window_size);
    return static_cast<std::uint32_t>(std::min<std::uint64_t>(scaled, 1023u));
}

/// Pairs every anchor with up to `fan_out` later peaks (same-frame peaks skipped) lying
/// 1..max_delta_frames frames ahead. Output is in anchor order, then target order.
[[nodiscard]] inline std::vector<Fingerprint> hash_constellation(const PeakConstellation &peaks, int fan_out,
                                                                 int max_delta_frames, int window_size = 4096) {
    if (fan_out < 1) throw InvalidArgument("fan-out must be >= 1");
    if (max_delta_frames < 1 || max_delta_frames > 4095) throw InvalidArgument("max delta frames must be in [1, 4095]");
    std::vector<Fingerprint> out;
    for (std::size_t i = 0; i < peaks.size(); ++i) {
        int emitted = 0;
        for (std::size_t j = i + 1; j < peaks.size() && emitted < fan_out; ++j) {
            const std::uint32_t delta = peaks[j].frame - peaks[i].frame;
            if (delta == 0) continue;
            if (delta > static_cast<std::uint32_t>(max_delta_frames)) break;
            const HashFields fields{ quantize_bin(peaks[i].bin, window_size), quantize_bin(peaks[j].bin, window_size), delta };
            out.push_back(Fingerprint{ pack_hash(fields), peaks[i].frame });
            ++emitted;
        }
    }
    return out;
}

/// Spectrogram -> peaks -> hashes for one buffer.
[[nodiscard]] inline std::vector<Fingerprint> fingerprint_audio(const AudioBuffer &audio, const FingerprintParams &params) {
    params.validate();
    if (audio.sample_rate != params.sample_rate) {
        throw InvalidArgument("audio sample rate " + std::to_string(audio.sample_rate) + " Hz does not match parameter sample rate " +
                              std::to_string(params.sample_rate) + " Hz");
    }
    const auto spec = compute_spectrogram(audio, params.window_size, params.hop);
    const auto peaks = detect_peaks(spec, params.neighborhood_frames, params.neighborhood_bins, params.amp_min);
    return hash_constellation(peaks, params.fan_out, params.max_delta_frames, params.window_size);
}

/// Sorted, duplicate-free copy of a fingerprint list.
[[nodiscard]] inline std::vector<Fingerprint> unique_fingerprints(std::vector<Fingerprint> fps) {
    std::sort(fps.begin(), fps.end());
    fps.erase(std::unique(fps.begin(), fps.end()), fps.end());
    return fps;
}

struct PieceRender {
    std::string piece_id;
    AudioBuffer audio;
};

struct MatchResult;

/// Inverted index from hash to (piece, anchor frame) postings for the pieces of one game.
/// Pieces are kept sorted by id, so the numeric piece index orders like the id.
class FingerprintIndex {
public:
    static constexpr std::uint16_t format_version = 1;

    struct PieceMeta {
        std::string id;
        std::uint64_t hash_count = 0;
        double duration_seconds = 0.0;
        friend bool operator==(const PieceMeta &, const PieceMeta &) = default;
    };

    struct Entry {
        std::uint32_t hash = 0;
        std::uint32_t piece = 0;
        std::uint32_t anchor_frame = 0;
        friend auto operator<=>(const Entry &, const Entry &) = default;
    };

    FingerprintIndex() = default;
    FingerprintIndex(std::string game_id, FingerprintParams params) : game_id_{ std::move(game_id) }, params_{ params } {
        params_.validate();
    }

    [[nodiscard]] const std::string &game_id() const noexcept { return game_id_; }
    [[nodiscard]] const FingerprintParams &params() const noexcept { return params_; }
    [[nodiscard]] const std::vector<PieceMeta> &pieces() const noexcept { return pieces_; }
    [[nodiscard]] const std::vector<Entry> &entries() const noexcept { return entries_; }
    [[nodiscard]] std::size_t posting_count() const noexcept { return entries_.size(); }
    [[nodiscard]] bool empty() const noexcept { return pieces_.empty(); }

    [[nodiscard]] std::optional<std::uint32_t> find_piece(std::string_view id) const {
        const auto it = std::lower_bound(pieces_.begin(), pieces_.end(), id,
                                         [](const PieceMeta &m, std::string_view key) { return m.id < key; });
        if (it == pieces_.end() || it->id != id) return std::nullopt;
        return static_cast<std::uint32_t>(it - pieces_.begin());
    }

    /// Postings of one hash, ordered by (piece, anchor).
    [[nodiscard]] std::span<const Entry> postings(std::uint32_t hash) const {
        const auto lo = std::lower_bound(entries_.begin(), entries_.end(), hash,
                                         [](const Entry &e, std::uint32_t h) { return e.hash < h; });
        const auto hi = std::upper_bound(lo, entries_.end(), hash,
                                         [](std::uint32_t h, const Entry &e) { return h < e.hash; });
        return { lo, hi };
    }

    /// Hash -> sorted (piece id, anchor) list; convenient for comparing indexes.
    [[nodiscard]] std::map<std::uint32_t, std::vector<std::pair<std::string, std::uint32_t>>> posting_map() const {
        std::map<std::uint32_t, std::vector<std::pair<std::string, std::uint32_t>>> out;
        for (const auto &e : entries_) out[e.hash].emplace_back(pieces_[e.piece].id, e.anchor_frame);
        for (auto &[h, list] : out) std::sort(list.begin(), list.end());
        return out;
    }

    /// Fingerprints every render (in parallel) and assembles the index. Duplicate ids are rejected.
    [[nodiscard]] static FingerprintIndex build(std::string game_id, std::vector<PieceRender> renders,
                                                const FingerprintParams &params, unsigned threads = 0) {
        FingerprintIndex index(std::move(game_id), params);
        std::sort(renders.begin(), renders.end(), [](const PieceRender &a, const PieceRender &b) { return a.piece_id < b.piece_id; });
        for (std::size_t i = 1; i < renders.size(); ++i) {
            if (renders[i].piece_id == renders[i - 1].piece_id) throw InvalidArgument("duplicate piece id '" + renders[i].piece_id + "'");
        }
        std::vector<std::vector<Fingerprint>> per_piece(renders.size());
        detail::parallel_for(
            renders.size(), [&](std::size_t i) { per_piece[i] = unique_fingerprints(fingerprint_audio(renders[i].audio, params)); },
            threads);
        std::size_t total = 0;
        for (const auto &fps : per_piece) total += fps.size();
        index.entries_.reserve(total);
        for (std::size_t i = 0; i < renders.size(); ++i) {
            index.pieces_.push_back(PieceMeta{ renders[i].piece_id, per_piece[i].size(), renders[i].audio.duration_seconds() });
            for (const auto &fp : per_piece[i]) {
                index.entries_.push_back(Entry{ fp.hash, static_cast<std::uint32_t>(i), fp.anchor_frame });
            }
        }
        std::sort(index.entries_.begin(), index.entries_.end());
        return index;
    }

    /// Union of two indexes built with equal parameters over disjoint piece ids.
    [[nodiscard]] static FingerprintIndex merge(const FingerprintIndex &a, const FingerprintIndex &b) {
        if (!(a.params_ == b.params_)) throw InvalidArgument("cannot merge indexes built with different parameters");
        FingerprintIndex out(a.game_id_.empty() ? b.game_id_ : a.game_id_, a.params_);
        out.pieces_ = a.pieces_;
        out.pieces_.insert(out.pieces_.end(), b.pieces_.begin(), b.pieces_.end());
        std::sort(out.pieces_.begin(), out.pieces_.end(), [](const PieceMeta &x, const PieceMeta &y) { return x.id < y.id; });
        for (std::size_t i = 1; i < out.pieces_.size(); ++i) {
            if (out.pieces_[i].id == out.pieces_[i - 1].id) throw InvalidArgument("duplicate piece id '" + out.pieces_[i].id + "'");
        }
        out.entries_.reserve(a.entries_.size() + b.entries_.size());
        for (const FingerprintIndex *src : { &a, &b }) {
            std::vector<std::uint32_t> remap(src->pieces_.size());
            for (std::size_t i = 0; i < remap.size(); ++i) remap[i] = *out.find_piece(src->pieces_[i].id);
            for (auto e : src->entries_) {
                e.piece = remap[e.piece];
                out.entries_.push_back(e);
            }
        }
        std::sort(out.entries_.begin(), out.entries_.end());
        return out;
    }

    /// Binary form: "NVFP", u16 version, parameter block, game id, piece table, hash -> postings.
    /// All integers little-endian; strings are u32 length + bytes.
    [[nodiscard]] std::vector<std::uint8_t> serialize() const {
        detail::ByteWriter w;
        w.raw("NVFP");
        w.u16(format_version);
        w.u32(static_cast<std::uint32_t>(params_.window_size));
        w.u32(static_cast<std::uint32_t>(params_.hop));
        w.u32(static_cast<std::uint32_t>(params_.neighborhood_frames));
        w.u32(static_cast<std::uint32_t>(params_.neighborhood_bins));
        w.f64(params_.amp_min);
        w.u32(static_cast<std::uint32_t>(params_.fan_out));
        w.u32(static_cast<std::uint32_t>(params_.max_delta_frames));
        w.u32(static_cast<std::uint32_t>(params_.sample_rate));
        w.str(game_id_);
        w.u32(static_cast<std::uint32_t>(pieces_.size()));
        for (const auto &p : pieces_) {
            w.str(p.id);
            w.u64(p.hash_count);
            w.f64(p.duration_seconds);
        }
        std::uint64_t distinct = 0;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (i == 0 || entries_[i].hash != entries_[i - 1].hash) ++distinct;
        }
        w.u64(distinct);
        for (std::size_t i = 0; i < entries_.size();) {
            std::size_t j = i;
            while (j < entries_.size() && entries_[j].hash == entries_[i].hash) ++j;
            w.u32(entries_[i].hash);
            w.u32(static_cast<std::uint32_t>(j - i));
            for (std::size_t k = i; k < j; ++k) {
                w.u32(entries_[k].piece);
                w.u32(entries_[k].anchor_frame);
            }
            i = j;
        }
        return w.take();
    }

    [[nodiscard]] static FingerprintIndex deserialize(std::span<const std::uint8_t> bytes) {
        detail::ByteReader r(bytes.data(), bytes.size(), "index");
        if (bytes.size() < 6 || r.raw(4) != "NVFP") throw FormatError("not a fingerprint index (bad magic)");
        const auto version = r.u16();
        if (version != format_version) throw FormatError("unsupported index format version " + std::to_string(version));
        FingerprintParams p;
        p.window_size = static_cast<int>(r.u32());
        p.hop = static_cast<int>(r.u32());
        p.neighborhood_frames = static_cast<int>(r.u32());
        p.neighborhood_bins = static_cast<int>(r.u32());
        p.amp_min = r.f64();
        p.fan_out = static_cast<int>(r.u32());
        p.max_delta_frames = static_cast<int>(r.u32());
        p.sample_rate = static_cast<int>(r.u32());
        try {
            p.validate();
        } catch (const InvalidArgument &e) {
            throw FormatError(std::string("index parameter block invalid: ") + e.what());
        }
        FingerprintIndex index(r.str(), p);
        const auto piece_count = r.u32();
        for (std::uint32_t i = 0; i < piece_count; ++i) {
            PieceMeta m;
            m.id = r.str();
            m.hash_count = r.u64();
            m.duration_seconds = r.f64();
            if (!index.pieces_.empty() && !(index.pieces_.back().id < m.id)) throw FormatError("index piece table not strictly sorted");
            index.pieces_.push_back(std::move(m));
        }
        const auto distinct = r.u64();
        for (std::uint64_t h = 0; h < distinct; ++h) {
            const auto hash = r.u32();
            const auto n = r.u32();
            if (!index.entries_.empty() && index.entries_.back().hash >= hash) throw FormatError("index hashes not strictly increasing");
            if (n == 0) throw FormatError("index has an empty posting list");
            for (std::uint32_t k = 0; k < n; ++k) {
                Entry e{ hash, r.u32(), r.u32() };
                if (e.piece >= piece_count) throw FormatError("index posting references unknown piece " + std::to_string(e.piece));
                if (k > 0 && !(index.entries_.back() < e)) throw FormatError("index postings not strictly sorted");
                index.entries_.push_back(e);
            }
        }
        if (!r.at_end()) throw FormatError("index has " + std::to_string(r.remaining()) + " trailing bytes");
        return index;
    }

    void save(const std::filesystem::path &path) const { detail::write_file_bytes(path, serialize()); }

    [[nodiscard]] static FingerprintIndex load(const std::filesystem::path &path) {
        const auto bytes = detail::read_file_bytes(path);
        try {
            return deserialize(bytes);
        } catch (const FormatError &e) {
            throw FormatError(path.string() + ": " + e.what());
        }
    }

    friend bool operator==(const FingerprintIndex &, const FingerprintIndex &) = default;

private:
    std::string game_id_;
    FingerprintParams params_;
    std::vector<PieceMeta> pieces_;
    std::vector<Entry> entries_;
};

struct MatchResult {
    /// Accepted piece; empty when the best bin fails the thresholds.
    std::optional<std::string> piece_id;
    /// Best bin, reported whether or not it was accepted.
    std::optional<std::string> candidate_id;
    std::int64_t aligned_offset_frames = 0;
    std::uint32_t aligned_matches = 0;
    std::uint32_t query_hash_count = 0;
    double confidence = 0.0;
    /// Strongest bin belonging to a different piece than the best bin.
    std::optional<std::string> runner_up_id;
    std::uint32_t runner_up_matches = 0;
    double offset_seconds = 0.0;

    [[nodiscard]] bool matched() const noexcept { return piece_id.has_value(); }
};

/// Offset-histogram vote: every query/index hash collision votes for (piece, db anchor - query anchor).
/// The tallest bin wins (ties: smaller piece, then smaller offset).
[[nodiscard]] inline MatchResult match_fingerprints(const FingerprintIndex &index, const std::vector<Fingerprint> &query,
                                                    const MatchParams &match = {}) {
    const auto fps = unique_fingerprints(query);
    MatchResult result;
    result.query_hash_count = static_cast<std::uint32_t>(fps.size());

    std::unordered_map<std::uint64_t, std::uint32_t> votes;
    const auto key = [](std::uint32_t piece, std::int64_t offset) {
        return (static_cast<std::uint64_t>(piece) << 33) | static_cast<std::uint64_t>(offset + (std::int64_t{ 1 } << 32));
    };
    for (const auto &fp : fps) {
        for (const auto &e : index.postings(fp.hash)) {
            ++votes[key(e.piece, static_cast<std::int64_t>(e.anchor_frame) - fp.anchor_frame)];
        }
    }

    struct Bin {
        std::uint32_t votes = 0;
        std::uint32_t piece = 0;
        std::int64_t offset = 0;
    };
    const auto beats = [](const Bin &a, const Bin &b) {
        if (a.votes != b.votes) return a.votes > b.votes;
        if (a.piece != b.piece) return a.piece < b.piece;
        return a.offset < b.offset;
    };
    std::vector<std::optional<Bin>> best_per_piece(index.pieces().size());
    for (const auto &[k, v] : votes) {
        const Bin bin{ v, static_cast<std::uint32_t>(k >> 33), static_cast<std::int64_t>(k & ((std::uint64_t{ 1 } << 33) - 1)) - (std::int64_t{ 1 } << 32) };
        auto &slot = best_per_piece[bin.piece];
        if (!slot || beats(bin, *slot)) slot = bin;
    }
    std::optional<Bin> best;
    std::optional<Bin> second;
    for (const auto &b : best_per_piece) {
        if (!b) continue;
        if (!best || beats(*b, *best)) {
            second = best;
            best = b;
        } else if (!second || beats(*b, *second)) {
            second = b;
        }
    }
    if (!best) return result;

    const auto &params = index.params();
    result.candidate_id = index.pieces()[best->piece].id;
    result.aligned_offset_frames = best->offset;
    result.aligned_matches = best->votes;
    result.offset_seconds = static_cast<double>(best->offset) * params.frame_seconds();
    result.confidence = static_cast<double>(best->votes) / std::max<std::uint32_t>(result.query_hash_count, 1);
    if (second) {
        result.runner_up_id = index.pieces()[second->piece].id;
        result.runner_up_matches = second->votes;
    }
    const bool accepted = !match.reject || (best->votes >= match.min_matches && result.confidence >= match.min_confidence);
    if (accepted) result.piece_id = result.candidate_id;
    return result;
}

/// Fingerprints `query` with `params` (which must equal the index's recorded parameters) and votes.
[[nodiscard]] inline MatchResult match_query(const FingerprintIndex &index, const AudioBuffer &query,
                                             const FingerprintParams &params, const MatchParams &match = {}) {
    if (!(params == index.params())) {
        throw InvalidArgument("query parameters differ from the parameters recorded in index '" + index.game_id() + "'");
    }
    return match_fingerprints(index, fingerprint_audio(query, params), match);
}

[[nodiscard]] inline MatchResult match_query(const FingerprintIndex &index, const AudioBuffer &query, const MatchParams &match = {}) {
    return match_query(index, query, index.params(), match);
}

}  // namespace nesvmdb

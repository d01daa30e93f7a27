#pragma once

// Four-voice NES-style renderer: band-limited pulse (P1/P2), 32-step triangle (TR) and
// 15-bit LFSR noise (NO), mixed linearly and peak-normalized.

#include "nesvmdb/audio.hpp"
#include "nesvmdb/common.hpp"
#include "nesvmdb/symbolic.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace nesvmdb {

struct SynthConfig {
    int sample_rate = 44100;
    /// One of 0.125, 0.25, 0.5, 0.75.
    double pulse_duty = 0.5;
    /// Per-voice gain indexed by channel_index().
    std::array<double, 4> gains{ 1.0, 1.0, 1.0, 0.5 };
    /// Linear fade-out appended after every note-off, in seconds.
    double release_seconds = 0.01;

    void validate() const {
        if (sample_rate < 8000) throw InvalidArgument("sample rate must be at least 8000 Hz");
        constexpr std::array<double, 4> duties{ 0.125, 0.25, 0.5, 0.75 };
        if (std::find(duties.begin(), duties.end(), pulse_duty) == duties.end()) {
            throw InvalidArgument("pulse duty must be one of 0.125, 0.25, 0.5, 0.75");
        }
        for (double g : gains) {
            if (!(g >= 0.0)) throw InvalidArgument("voice gains must be non-negative");
        }
        if (!(release_seconds >= 0.0)) throw InvalidArgument("release must be non-negative");
    }
};

/// Peak level of a normalized render (-1 dBFS).
inline constexpr double render_peak_level = 0.89;

[[nodiscard]] inline double midi_pitch_hz(int pitch) noexcept {
    return 440.0 * std::exp2((pitch - 69) / 12.0);
}

namespace detail {

inline constexpr double nes_cpu_hz = 1789773.0;
/// NTSC noise timer periods in CPU cycles; index 0 is the brightest.
inline constexpr std::array<int, 16> noise_periods{ 4, 8, 16, 32, 64, 96, 128, 160, 202, 254, 380, 508, 762, 1016, 2034, 4068 };

[[nodiscard]] inline double poly_blep(double t, double dt) noexcept {
    if (t < dt) {
        t /= dt;
        return t + t - t * t - 1.0;
    }
    if (t > 1.0 - dt) {
        t = (t - 1.0) / dt;
        return t * t + t + t + 1.0;
    }
    return 0.0;
}

class PulseOsc {
public:
    PulseOsc(double hz, double duty, int sample_rate) : dt_{ hz / sample_rate }, duty_{ duty } {}
    double next() noexcept {
        double v = phase_ < duty_ ? 1.0 : -1.0;
        v += poly_blep(phase_, dt_);
        v -= poly_blep(std::fmod(phase_ + 1.0 - duty_, 1.0), dt_);
        phase_ += dt_;
        if (phase_ >= 1.0) phase_ -= 1.0;
        return v - (2.0 * duty_ - 1.0);
    }

private:
    double dt_;
    double duty_;
    double phase_ = 0.0;
};

class TriangleOsc {
public:
    TriangleOsc(double hz, int sample_rate) : dt_{ hz / sample_rate } {}
    double next() noexcept {
        const int step = std::min(31, static_cast<int>(phase_ * 32.0));
        const int level = step < 16 ? 15 - step : step - 16;
        phase_ += dt_;
        if (phase_ >= 1.0) phase_ -= 1.0;
        return level / 7.5 - 1.0;
    }

private:
    double dt_;
    double phase_ = 0.0;
};

/// 15-bit LFSR with feedback from bits 0 and 1 (the NES long mode), seeded with 1.
class NoiseLfsr {
public:
    void set_period(int cpu_cycles, int sample_rate) noexcept { step_ = nes_cpu_hz / cpu_cycles / sample_rate; }
    double next() noexcept {
        const double out = (reg_ & 1u) ? -1.0 : 1.0;
        acc_ += step_;
        while (acc_ >= 1.0) {
            const std::uint16_t fb = (reg_ ^ (reg_ >> 1)) & 1u;
            reg_ = static_cast<std::uint16_t>((reg_ >> 1) | (fb << 14));
            acc_ -= 1.0;
        }
        return out;
    }

private:
    std::uint16_t reg_ = 1;
    double step_ = 0.0;
    double acc_ = 0.0;
};

}  // namespace detail

/// Noise timer period (CPU cycles) used for a NO-channel pitch: higher pitch-mod-16 gives a shorter period.
[[nodiscard]] constexpr int noise_period_for_pitch(int pitch) noexcept {
    return detail::noise_periods[static_cast<std::size_t>(15 - ((pitch % 16) + 16) % 16)];
}

/// Number of samples render_piece produces for `piece`.
[[nodiscard]] inline std::size_t render_length(const SymbolicPiece &piece, const SynthConfig &config) {
    return static_cast<std::size_t>(
        std::llround((piece_duration_seconds(piece) + config.release_seconds) * config.sample_rate));
}

/// Renders one voice, unmixed and unclamped, into `length` samples. Amplitude is gain * velocity / 127
/// while the note is held, then fades linearly to zero over the release time.
[[nodiscard]] inline AudioBuffer render_channel(const Channel &channel, const TempoMap &tempo, const SynthConfig &config,
                                                std::size_t length) {
    config.validate();
    AudioBuffer out{ std::vector<float>(length, 0.0f), config.sample_rate };
    const double sr = config.sample_rate;
    const auto release = static_cast<std::size_t>(std::llround(config.release_seconds * sr));
    const double gain = config.gains[channel_index(channel.kind)];
    detail::NoiseLfsr lfsr;

    for (const auto &note : channel.notes) {
        const auto start = static_cast<std::size_t>(std::llround(tempo.seconds_at(note.onset) * sr));
        const auto stop = static_cast<std::size_t>(std::llround(tempo.seconds_at(note.end()) * sr));
        const std::size_t last = std::min(length, stop + release);
        const double amp = gain * std::clamp(note.velocity, 0, 127) / 127.0;
        const double hz = midi_pitch_hz(note.pitch);

        detail::PulseOsc pulse(hz, config.pulse_duty, config.sample_rate);
        detail::TriangleOsc triangle(hz, config.sample_rate);
        lfsr.set_period(noise_period_for_pitch(note.pitch), config.sample_rate);

        for (std::size_t i = start; i < last; ++i) {
            double v = 0.0;
            switch (channel.kind) {
                case ChannelKind::P1:
                case ChannelKind::P2: v = pulse.next(); break;
                case ChannelKind::TR: v = triangle.next(); break;
                case ChannelKind::NO: v = lfsr.next(); break;
            }
            double env = 1.0;
            if (i >= stop) env = release == 0 ? 0.0 : 1.0 - static_cast<double>(i - stop) / static_cast<double>(release);
            out.samples[i] += static_cast<float>(amp * env * v);
        }
    }
    return out;
}

/// Renders one voice of `piece` at the piece's full render length (unnormalized).
[[nodiscard]] inline AudioBuffer render_channel(const SymbolicPiece &piece, ChannelKind kind, const SynthConfig &config = {}) {
    return render_channel(piece.channel(kind), piece.tempo, config, render_length(piece, config));
}

/// Scales `audio` so its peak equals `level`; silent input is returned unchanged.
inline void peak_normalize(AudioBuffer &audio, double level = render_peak_level) {
    const double peak = peak_abs(audio.samples);
    if (peak <= 0.0) return;
    const double scale = level / peak;
    for (auto &s : audio.samples) s = static_cast<float>(s * scale);
}

/// Sum of the four voice renders, peak-normalized to -1 dBFS. Length = duration + release.
[[nodiscard]] inline AudioBuffer render_piece(const SymbolicPiece &piece, const SynthConfig &config = {}) {
    config.validate();
    const std::size_t length = render_length(piece, config);
    AudioBuffer mix{ std::vector<float>(length, 0.0f), config.sample_rate };
    for (const auto &ch : piece.channels) {
        if (ch.notes.empty()) continue;
        const auto voice = render_channel(ch, piece.tempo, config, length);
        for (std::size_t i = 0; i < length; ++i) mix.samples[i] += voice.samples[i];
    }
    peak_normalize(mix);
    return mix;
}

}  // namespace nesvmdb

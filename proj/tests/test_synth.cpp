#include "nesvmdb/synth.hpp"
#include "support/procedural.hpp"

#include <gtest/gtest.h>

#include <complex>
#include <set>
#include <numbers>

using namespace nesvmdb;
namespace nt = nesvmdb::testing;

namespace {

SymbolicPiece one_note(ChannelKind kind, int pitch, double seconds, int velocity = 127) {
    SymbolicPiece p;  // 120 bpm, tpq 480: 960 ticks per second
    p.channel(kind).notes.push_back(NoteEvent{ 0, static_cast<Tick>(std::llround(seconds * 960)), pitch, velocity });
    return p;
}

// Hann-windowed single-frequency correlation magnitude.
double tone_magnitude(const std::vector<float> &x, std::size_t first, std::size_t n, double hz, int sr) {
    std::complex<double> acc{};
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
        const double ph = -2.0 * std::numbers::pi * hz * static_cast<double>(i) / sr;
        acc += w * static_cast<double>(x[first + i]) * std::complex<double>(std::cos(ph), std::sin(ph));
    }
    return std::abs(acc);
}

std::size_t naive_dft_argmax(const std::vector<float> &x, std::size_t first, std::size_t n) {
    std::size_t best = 0;
    double best_mag = -1.0;
    for (std::size_t k = 1; k <= n / 2; ++k) {
        std::complex<double> acc{};
        for (std::size_t i = 0; i < n; ++i) {
            const double ph = -2.0 * std::numbers::pi * static_cast<double>(k * i % n) / static_cast<double>(n);
            acc += static_cast<double>(x[first + i]) * std::complex<double>(std::cos(ph), std::sin(ph));
        }
        if (std::abs(acc) > best_mag) {
            best_mag = std::abs(acc);
            best = k;
        }
    }
    return best;
}

// Reference 15-bit LFSR: feedback = bit0 xor bit1 into bit 14.
std::vector<int> lfsr_bits(std::size_t clocks) {
    std::vector<int> out;
    unsigned reg = 1;
    for (std::size_t k = 0; k <= clocks; ++k) {
        out.push_back(static_cast<int>(reg & 1u));
        const unsigned fb = (reg ^ (reg >> 1)) & 1u;
        reg = (reg >> 1) | (fb << 14);
    }
    return out;
}

}  // namespace

TEST(Synth, PulseSpectrumPeaksAt440) {
    SynthConfig cfg;
    const auto audio = render_channel(one_note(ChannelKind::P1, 69, 1.0), ChannelKind::P1, cfg);
    const std::size_t n = 8192;
    const auto bin = naive_dft_argmax(audio.samples, 4000, n);
    EXPECT_EQ(bin, static_cast<std::size_t>(std::lround(440.0 * n / cfg.sample_rate)));
}

TEST(Synth, TrianglePeaksAtSameFrequency) {
    SynthConfig cfg;
    const auto audio = render_channel(one_note(ChannelKind::TR, 57, 1.0), ChannelKind::TR, cfg);
    const std::size_t n = 8192;
    EXPECT_EQ(naive_dft_argmax(audio.samples, 4000, n), static_cast<std::size_t>(std::lround(220.0 * n / cfg.sample_rate)));
}

TEST(Synth, TriangleHarmonicsFallFasterThanPulse) {
    SynthConfig cfg;
    const double f = midi_pitch_hz(57);
    const auto tri = render_channel(one_note(ChannelKind::TR, 57, 1.0), ChannelKind::TR, cfg);
    const auto pul = render_channel(one_note(ChannelKind::P1, 57, 1.0), ChannelKind::P1, cfg);
    const std::size_t n = 32768;
    std::array<double, 6> t{}, p{};
    for (int h = 1; h <= 5; ++h) {
        t[static_cast<std::size_t>(h)] = tone_magnitude(tri.samples, 2000, n, h * f, cfg.sample_rate);
        p[static_cast<std::size_t>(h)] = tone_magnitude(pul.samples, 2000, n, h * f, cfg.sample_rate);
    }
    // both waves are half-wave antisymmetric: even harmonics are negligible
    EXPECT_LT(t[2] / t[1], 0.02);
    EXPECT_LT(p[2] / p[1], 0.02);
    // odd harmonics: about 1/n for the square, 1/n^2 for the triangle
    EXPECT_NEAR(p[3] / p[1], 1.0 / 3.0, 0.03);
    EXPECT_NEAR(t[3] / t[1], 1.0 / 9.0, 0.03);
    EXPECT_LT(t[3] / t[1], p[3] / p[1]);
    EXPECT_LT(t[5] / t[1], p[5] / p[1]);
}

TEST(Synth, TriangleHas16Levels) {
    const auto audio = render_channel(one_note(ChannelKind::TR, 45, 0.5), ChannelKind::TR, SynthConfig{});
    std::set<float> levels(audio.samples.begin(), audio.samples.begin() + 20000);
    EXPECT_EQ(levels.size(), 16u);
    EXPECT_FLOAT_EQ(*levels.begin(), -1.0f);
    EXPECT_FLOAT_EQ(*levels.rbegin(), 1.0f);
}

TEST(Synth, PulseDutyControlsHighFraction) {
    for (double duty : { 0.125, 0.25, 0.5, 0.75 }) {
        SynthConfig cfg;
        cfg.pulse_duty = duty;
        const auto audio = render_channel(one_note(ChannelKind::P2, 60, 0.5), ChannelKind::P2, cfg);
        std::size_t high = 0;
        const std::size_t n = 20000;
        for (std::size_t i = 0; i < n; ++i) high += audio.samples[i] > 0.0f;
        EXPECT_NEAR(static_cast<double>(high) / n, duty, 0.02) << duty;
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += audio.samples[i];
        EXPECT_NEAR(mean / n, 0.0, 0.02) << duty;
    }
}

TEST(Synth, NoiseFollowsReferenceLfsr) {
    SynthConfig cfg;
    for (int pitch : { 0, 7, 15, 37 }) {
        const auto audio = render_channel(one_note(ChannelKind::NO, pitch, 0.25), ChannelKind::NO, cfg);
        const int period = noise_period_for_pitch(pitch);
        const double step = 1789773.0 / period / cfg.sample_rate;
        const std::size_t n = 10000;
        const auto bits = lfsr_bits(static_cast<std::size_t>(step * n) + 2);
        std::size_t agree = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(std::floor(step * static_cast<double>(i)));
            const float expect = bits[k] ? -0.5f : 0.5f;  // NO gain 0.5, velocity 127
            agree += audio.samples[i] == expect;
        }
        EXPECT_GT(static_cast<double>(agree) / n, 0.99) << pitch;
    }
}

TEST(Synth, NoisePeriodTableIndexedByPitchMod16) {
    EXPECT_EQ(noise_period_for_pitch(15), 4);
    EXPECT_EQ(noise_period_for_pitch(0), 4068);
    EXPECT_EQ(noise_period_for_pitch(16), 4068);
    for (int p = 0; p < 15; ++p) EXPECT_GT(noise_period_for_pitch(p), noise_period_for_pitch(p + 1));
}

TEST(Synth, EmptyChannelIsSilentAtPieceLength) {
    const auto piece = one_note(ChannelKind::P1, 60, 1.0);
    const auto audio = render_channel(piece, ChannelKind::TR, SynthConfig{});
    EXPECT_EQ(audio.samples.size(), render_length(piece, SynthConfig{}));
    EXPECT_EQ(peak_abs(audio.samples), 0.0);
}

TEST(Synth, RenderLengthAndSilentPiece) {
    SymbolicPiece silent;
    const auto a = render_piece(silent);
    EXPECT_EQ(a.samples.size(), static_cast<std::size_t>(std::llround(0.01 * 44100)));
    EXPECT_EQ(peak_abs(a.samples), 0.0);
    const auto piece = nt::procedural_piece(4, 8);
    SynthConfig cfg;
    cfg.sample_rate = 22050;
    EXPECT_EQ(render_piece(piece, cfg).samples.size(),
              static_cast<std::size_t>(std::llround((piece_duration_seconds(piece) + 0.01) * 22050)));
}

TEST(Synth, PeakNormalizedAndDeterministic) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const auto piece = nt::procedural_piece(seed, 8);
        const auto a = render_piece(piece);
        const auto b = render_piece(piece);
        EXPECT_EQ(a.samples, b.samples);
        EXPECT_NEAR(peak_abs(a.samples), render_peak_level, 1e-6);
        EXPECT_LE(peak_abs(a.samples), render_peak_level + 1e-6);
    }
}

TEST(Synth, SingleVoiceEqualsNormalizedChannel) {
    const auto piece = one_note(ChannelKind::TR, 50, 0.5, 90);
    auto expect = render_channel(piece, ChannelKind::TR, SynthConfig{});
    peak_normalize(expect);
    EXPECT_EQ(render_piece(piece).samples, expect.samples);
}

TEST(Synth, MixIsSampleWiseSum) {
    auto piece = one_note(ChannelKind::P1, 72, 0.5, 100);
    piece.channel(ChannelKind::TR).notes.push_back(NoteEvent{ 120, 300, 48, 80 });
    SynthConfig cfg;
    const auto a = render_channel(piece, ChannelKind::P1, cfg);
    const auto b = render_channel(piece, ChannelKind::TR, cfg);
    std::vector<double> sum(a.samples.size());
    double peak = 0.0;
    for (std::size_t i = 0; i < sum.size(); ++i) {
        sum[i] = static_cast<double>(a.samples[i]) + b.samples[i];
        peak = std::max(peak, std::abs(sum[i]));
    }
    const auto mix = render_piece(piece, cfg);
    ASSERT_EQ(mix.samples.size(), sum.size());
    for (std::size_t i = 0; i < sum.size(); ++i) ASSERT_NEAR(mix.samples[i], sum[i] * render_peak_level / peak, 1e-6);
}

TEST(Synth, VelocityScalesAmplitudeAndReleaseFades) {
    SynthConfig cfg;
    const auto loud = render_channel(one_note(ChannelKind::TR, 60, 0.5, 120), ChannelKind::TR, cfg);
    const auto soft = render_channel(one_note(ChannelKind::TR, 60, 0.5, 60), ChannelKind::TR, cfg);
    const std::span<const float> span_l(loud.samples.data(), 22050), span_s(soft.samples.data(), 22050);
    EXPECT_NEAR(rms(span_l) / rms(span_s), 2.0, 1e-6);
    EXPECT_NEAR(peak_abs(span_l), 120.0 / 127.0, 1e-6);
    // release: note-off at exactly 0.5 s, fade over 441 samples, silence after
    const std::size_t stop = 22050;
    for (std::size_t i = stop; i < stop + 441; ++i) {
        EXPECT_LE(std::abs(loud.samples[i]), 120.0 / 127.0 * (1.0 - static_cast<double>(i - stop) / 441.0) + 1e-6);
    }
    for (std::size_t i = stop + 441; i < loud.samples.size(); ++i) EXPECT_EQ(loud.samples[i], 0.0f);
}

TEST(Synth, DoublingVelocityNeverLowersRms) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const auto kind = all_channel_kinds[static_cast<std::size_t>(nt::uniform_int(rng, 0, 3))];
        const int v = nt::uniform_int(rng, 1, 63);
        const int pitch = nt::uniform_int(rng, 30, 90);
        const auto a = render_channel(one_note(kind, pitch, 0.2, v), kind, SynthConfig{});
        const auto b = render_channel(one_note(kind, pitch, 0.2, 2 * v), kind, SynthConfig{});
        EXPECT_GE(rms(b.samples), rms(a.samples));
    }
}

TEST(Synth, ConfigValidation) {
    SynthConfig c;
    c.pulse_duty = 0.3;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = SynthConfig{};
    c.sample_rate = 4000;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = SynthConfig{};
    c.gains[2] = -1.0;
    EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Synth, PitchToFrequency) {
    EXPECT_DOUBLE_EQ(midi_pitch_hz(69), 440.0);
    EXPECT_NEAR(midi_pitch_hz(81), 880.0, 1e-9);
    EXPECT_NEAR(midi_pitch_hz(60), 261.6255653, 1e-6);
}

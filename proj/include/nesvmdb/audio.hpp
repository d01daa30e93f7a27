#pragma once

#include "nesvmdb/common.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace nesvmdb {

/// Mono PCM signal. Samples are expected to be finite and within [-1, +1].
struct AudioBuffer {
    std::vector<float> samples;
    int sample_rate = 44100;

    [[nodiscard]] double duration_seconds() const noexcept {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
    [[nodiscard]] bool empty() const noexcept { return samples.empty(); }

    /// Copy of samples [first, first + count), clipped to the buffer.
    [[nodiscard]] AudioBuffer slice(std::size_t first, std::size_t count) const {
        AudioBuffer out{ {}, sample_rate };
        if (first < samples.size()) {
            const std::size_t n = std::min(count, samples.size() - first);
            out.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(first),
                               samples.begin() + static_cast<std::ptrdiff_t>(first + n));
        }
        return out;
    }

    friend bool operator==(const AudioBuffer &, const AudioBuffer &) = default;
};

[[nodiscard]] inline double peak_abs(std::span<const float> x) noexcept {
    double peak = 0.0;
    for (float v : x) peak = std::max(peak, static_cast<double>(std::fabs(v)));
    return peak;
}

[[nodiscard]] inline double rms(std::span<const float> x) noexcept {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (float v : x) acc += static_cast<double>(v) * v;
    return std::sqrt(acc / static_cast<double>(x.size()));
}

/// Encodes 16-bit PCM mono little-endian RIFF/WAVE. Samples are clamped to [-1, 1] and scaled by 32768.
[[nodiscard]] inline std::vector<std::uint8_t> encode_wav(const AudioBuffer &audio) {
    if (audio.sample_rate <= 0) throw InvalidArgument("sample rate must be positive");
    const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
    detail::ByteWriter w;
    w.raw("RIFF");
    w.u32(36 + data_bytes);
    w.raw("WAVE");
    w.raw("fmt ");
    w.u32(16);
    w.u16(1);  // PCM
    w.u16(1);  // mono
    w.u32(static_cast<std::uint32_t>(audio.sample_rate));
    w.u32(static_cast<std::uint32_t>(audio.sample_rate) * 2);
    w.u16(2);
    w.u16(16);
    w.raw("data");
    w.u32(data_bytes);
    for (float s : audio.samples) {
        const double v = std::isfinite(s) ? std::clamp(static_cast<double>(s), -1.0, 1.0) : 0.0;
        const auto q = static_cast<std::int16_t>(std::clamp<long>(std::lround(v * 32768.0), -32768, 32767));
        w.u16(static_cast<std::uint16_t>(q));
    }
    return w.take();
}

/// Decodes 16-bit PCM RIFF/WAVE (plain or WAVE_FORMAT_EXTENSIBLE). Multi-channel input is
/// downmixed to mono by averaging the channels of each frame.
[[nodiscard]] inline AudioBuffer decode_wav(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes.data(), bytes.size(), "wav");
    if (bytes.size() < 12 || r.raw(4) != "RIFF") throw FormatError("not a RIFF file");
    r.u32();
    if (r.raw(4) != "WAVE") throw FormatError("RIFF file is not WAVE");

    bool have_fmt = false;
    std::uint16_t channels = 0;
    std::uint16_t bits = 0;
    std::uint32_t rate = 0;
    while (r.remaining() >= 8) {
        const std::string id = r.raw(4);
        const std::uint32_t len = r.u32();
        if (id == "fmt ") {
            if (len < 16) throw FormatError("wav: fmt chunk too short");
            detail::ByteReader f(bytes.data() + r.position(), std::min<std::size_t>(len, r.remaining()), "wav fmt");
            std::uint16_t tag = f.u16();
            channels = f.u16();
            rate = f.u32();
            f.u32();
            f.u16();
            bits = f.u16();
            if (tag == 0xFFFE && len >= 40) {
                f.u16();
                f.u16();
                f.u32();
                tag = f.u16();  // first two bytes of the sub-format GUID carry the format tag
            }
            if (tag != 1 || bits != 16) {
                throw FormatError("unsupported WAV encoding (format tag " + std::to_string(tag) + ", " +
                                  std::to_string(bits) + " bits); expected 16-bit PCM");
            }
            if (channels == 0 || rate == 0) throw FormatError("wav: zero channels or sample rate");
            have_fmt = true;
            r.raw(std::min<std::size_t>(len + (len & 1u), r.remaining()));
        } else if (id == "data") {
            if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk");
            const std::size_t n = std::min<std::size_t>(len, r.remaining());
            const std::size_t frames = n / (2u * channels);
            AudioBuffer out{ std::vector<float>(frames), static_cast<int>(rate) };
            for (std::size_t i = 0; i < frames; ++i) {
                double acc = 0.0;
                for (std::uint16_t c = 0; c < channels; ++c) acc += static_cast<std::int16_t>(r.u16());
                out.samples[i] = static_cast<float>(acc / channels / 32768.0);
            }
            return out;
        } else {
            r.raw(std::min<std::size_t>(len + (len & 1u), r.remaining()));
        }
    }
    throw FormatError("wav: no data chunk");
}

inline void write_wav(const AudioBuffer &audio, const std::filesystem::path &path) {
    detail::write_file_bytes(path, encode_wav(audio));
}

[[nodiscard]] inline AudioBuffer read_wav(const std::filesystem::path &path) {
    const auto bytes = detail::read_file_bytes(path);
    try {
        return decode_wav(bytes);
    } catch (const FormatError &e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace nesvmdb

#include "nesvmdb/audio.hpp"
#include "support/procedural.hpp"
#include "support/tempdir.hpp"

#include <gtest/gtest.h>

using namespace nesvmdb;
namespace nt = nesvmdb::testing;

namespace {

std::vector<std::uint8_t> wav_header(std::uint16_t tag, std::uint16_t channels, std::uint32_t rate, std::uint16_t bits,
                                     const std::vector<std::int16_t> &samples, bool extensible = false) {
    detail::ByteWriter w;
    const std::uint32_t fmt_len = extensible ? 40 : 16;
    const auto data_len = static_cast<std::uint32_t>(samples.size() * 2);
    w.raw("RIFF");
    w.u32(4 + 8 + fmt_len + 8 + 8 + 2 + data_len);
    w.raw("WAVE");
    w.raw("LIST");  // an unrelated chunk first
    w.u32(2);
    w.u16(0);
    w.raw("fmt ");
    w.u32(fmt_len);
    w.u16(extensible ? 0xFFFE : tag);
    w.u16(channels);
    w.u32(rate);
    w.u32(rate * channels * bits / 8);
    w.u16(static_cast<std::uint16_t>(channels * bits / 8));
    w.u16(bits);
    if (extensible) {
        w.u16(22);
        w.u16(bits);
        w.u32(0);
        w.u16(tag);
        for (int i = 0; i < 14; ++i) w.u8(0);
    }
    w.raw("data");
    w.u32(data_len);
    for (auto s : samples) w.u16(static_cast<std::uint16_t>(s));
    return w.take();
}

}  // namespace

TEST(Wav, RoundTripWithinQuantization) {
    const auto noise = nt::white_noise(9, 0.2, 0.99, 22050);
    const auto back = decode_wav(encode_wav(noise));
    EXPECT_EQ(back.sample_rate, 22050);
    ASSERT_EQ(back.samples.size(), noise.samples.size());
    for (std::size_t i = 0; i < noise.samples.size(); ++i) EXPECT_NEAR(back.samples[i], noise.samples[i], 0.5 / 32768.0 + 1e-7);
}

TEST(Wav, ClampsOutOfRange) {
    const AudioBuffer a{ { 2.0f, -3.0f, 1.0f, -1.0f }, 8000 };
    const auto back = decode_wav(encode_wav(a));
    EXPECT_FLOAT_EQ(back.samples[0], 32767.0f / 32768.0f);
    EXPECT_FLOAT_EQ(back.samples[1], -1.0f);
    EXPECT_FLOAT_EQ(back.samples[2], 32767.0f / 32768.0f);
    EXPECT_FLOAT_EQ(back.samples[3], -1.0f);
}

TEST(Wav, StereoIsAveraged) {
    const auto bytes = wav_header(1, 2, 44100, 16, { 1000, 3000, -2000, 0 });
    const auto a = decode_wav(bytes);
    ASSERT_EQ(a.samples.size(), 2u);
    EXPECT_FLOAT_EQ(a.samples[0], 2000.0f / 32768.0f);
    EXPECT_FLOAT_EQ(a.samples[1], -1000.0f / 32768.0f);
}

TEST(Wav, ExtensiblePcmAccepted) {
    const auto a = decode_wav(wav_header(1, 1, 48000, 16, { 16384 }, true));
    EXPECT_EQ(a.sample_rate, 48000);
    EXPECT_FLOAT_EQ(a.samples[0], 0.5f);
}

TEST(Wav, RejectsOtherEncodings) {
    EXPECT_THROW((void)decode_wav(wav_header(3, 1, 44100, 32, { 0, 0 })), FormatError);
    EXPECT_THROW((void)decode_wav(wav_header(1, 1, 44100, 24, { 0, 0, 0 })), FormatError);
    const std::vector<std::uint8_t> junk(64, 'x');
    EXPECT_THROW((void)decode_wav(junk), FormatError);
}

TEST(Wav, FileIo) {
    nt::TempDir dir;
    const auto s = nt::sine(440, 0.1);
    write_wav(s, dir / "sub/a.wav");
    EXPECT_EQ(read_wav(dir / "sub/a.wav").samples.size(), s.samples.size());
    EXPECT_THROW((void)read_wav(dir / "none.wav"), IoError);
}

TEST(AudioBuffer, SliceAndLevels) {
    const AudioBuffer a{ { 0.0f, 0.5f, -1.0f, 0.25f }, 4 };
    EXPECT_DOUBLE_EQ(a.duration_seconds(), 1.0);
    EXPECT_EQ(a.slice(1, 2).samples, (std::vector<float>{ 0.5f, -1.0f }));
    EXPECT_DOUBLE_EQ(peak_abs(a.samples), 1.0);
    EXPECT_NEAR(rms(a.samples), std::sqrt((0.25 + 1.0 + 0.0625) / 4.0), 1e-12);
}

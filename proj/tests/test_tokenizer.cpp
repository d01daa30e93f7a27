#include "nesvmdb/tokenizer.hpp"
#include "support/procedural.hpp"

#include <gtest/gtest.h>

#include <set>
#include <tuple>

using namespace nesvmdb;
namespace nt = nesvmdb::testing;
using CT = CompoundToken;

namespace {

const auto P1 = ChannelKind::P1, P2 = ChannelKind::P2, TR = ChannelKind::TR, NO = ChannelKind::NO;

CT bar(int s, int d) { return CT::rhythm(Timestep::bar, s, d); }
CT beat(int s, int d) { return CT::rhythm(Timestep::beat, s, d); }
CT sub(int s, int d) { return CT::rhythm(Timestep::none, s, d); }

using NoteKey = std::tuple<std::size_t, Tick, Tick, int>;
std::multiset<NoteKey> note_set(const SymbolicPiece &p) {
    std::multiset<NoteKey> out;
    for (const auto &ch : p.channels)
        for (const auto &n : ch.notes) out.emplace(channel_index(ch.kind), n.onset, n.duration, n.pitch);
    return out;
}

SymbolicPiece fixture() {
    SymbolicPiece p;
    p.length_ticks = 3840;
    p.channel(P1).notes = { { 0, 480, 72, 90 }, { 21 * 120, 360, 74, 90 } };
    p.channel(P2).notes = { { 240, 240, 67, 90 } };
    p.channel(TR).notes = { { 0, 960, 40, 90 } };
    p.channel(NO).notes = { { 960, 120, 5, 90 } };
    return p;
}

}  // namespace

TEST(Tokenizer, EmptyBarEncodesToBarBeatsAndEnd) {
    SymbolicPiece p;
    p.length_ticks = 1920;
    const TokenSequence expect{ bar(0, 0), beat(0, 0), beat(0, 0), beat(0, 0), beat(0, 0), CT::end() };
    EXPECT_EQ(encode(p), expect);
    EXPECT_EQ(encode(SymbolicPiece{}), TokenSequence{ CT::end() });
}

TEST(Tokenizer, SingleNoteExample) {
    SymbolicPiece p;
    p.channel(P1).notes.push_back({ 0, 480, 69, 100 });
    const TokenSequence expect{ bar(1, 1), beat(1, 1), CT::note(P1, 69, 4), beat(0, 1), beat(0, 1), beat(0, 1), CT::end() };
    EXPECT_EQ(encode(p), expect);
    const auto back = decode(expect);
    ASSERT_EQ(back.channel(P1).notes.size(), 1u);
    EXPECT_EQ(back.channel(P1).notes[0], (NoteEvent{ 0, 480, 69, 100 }));
    EXPECT_EQ(back.length_ticks, 1920);
}

TEST(Tokenizer, HandEnumeratedFixture) {
    const TokenSequence expect{
        bar(4, 4),  beat(3, 4), CT::note(P1, 72, 4), CT::note(TR, 40, 8), sub(3, 4), sub(3, 4), CT::note(P2, 67, 2),
        beat(0, 4), beat(1, 4), CT::note(NO, 5, 1),  beat(0, 4),
        bar(1, 1),  beat(0, 1), beat(1, 1), sub(1, 1), CT::note(P1, 74, 3), beat(0, 1), beat(0, 1),
        CT::end(),
    };
    EXPECT_EQ(encode(fixture()), expect);
    const auto feats = rhythm_features(fixture());
    ASSERT_EQ(feats.size(), 8u);
    EXPECT_EQ(feats[0], (BeatFeature{ 0, 0, 3, 4 }));
    EXPECT_EQ(feats[2], (BeatFeature{ 0, 2, 1, 4 }));
    EXPECT_EQ(feats[5], (BeatFeature{ 1, 1, 1, 1 }));
}

TEST(Tokenizer, DensityBuckets) {
    TokenizerConfig c;
    EXPECT_EQ(c.bucket_count(), 9);
    const std::vector<std::pair<std::size_t, int>> cases{ { 0, 0 }, { 1, 1 }, { 3, 3 }, { 4, 4 }, { 5, 4 }, { 6, 5 },
                                                          { 7, 5 }, { 8, 6 }, { 11, 6 }, { 12, 7 }, { 16, 8 }, { 500, 8 } };
    for (auto [n, b] : cases) EXPECT_EQ(c.density_bucket(n), b) << n;
    c.density_boundaries = { 1, 2 };
    EXPECT_THROW(c.validate(), InvalidArgument);
    c.density_boundaries = { 0, 2, 2 };
    EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Tokenizer, RoundTripOnGridPieces) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto p = nt::grid_piece(seed, 1 + static_cast<int>(seed % 8), 0.2 + 0.06 * static_cast<double>(seed % 10));
        const auto tokens = encode(p);
        const auto back = decode(tokens);
        EXPECT_EQ(note_set(back), note_set(p)) << seed;
        EXPECT_EQ(back.length_ticks, p.length_ticks) << seed;
        EXPECT_EQ(encode(back), tokens) << seed;
        EXPECT_EQ(tokens.back(), CT::end());
        EXPECT_EQ(std::count(tokens.begin(), tokens.end(), CT::end()), 1);
    }
}

TEST(Tokenizer, EncodingIsIdempotentOffGrid) {
    std::mt19937_64 rng(4);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto p = nt::procedural_piece(seed, 6);
        for (auto &ch : p.channels)
            for (auto &n : ch.notes) n.onset = std::max<Tick>(0, n.onset + nt::uniform_int(rng, -50, 50));
        const auto once = encode(p);
        EXPECT_EQ(encode(decode(once)), once) << seed;
    }
}

TEST(Tokenizer, VocabularyClosure) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto tokens = encode(nt::grid_piece(seed, 4, 0.7));
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            EXPECT_NO_THROW(validate_token(tokens[i], i));
            if (tokens[i].type == TokenType::rhythmic) {
                EXPECT_GE(*tokens[i].strength, 0);
                EXPECT_LE(*tokens[i].strength, 4);
            }
        }
    }
}

TEST(Tokenizer, MoreVoicesNeverLowerStrength) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto full = nt::grid_piece(seed, 4, 0.5);
        auto fewer = full;
        fewer.channel(NO).notes.clear();
        const auto a = rhythm_features(full), b = rhythm_features(fewer);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_GE(a[i].strength, b[i].strength);
            EXPECT_GE(a[i].density, b[i].density);
        }
    }
}

TEST(Tokenizer, FeaturesAgreeWithBeatTokens) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto p = nt::grid_piece(seed, 3, 0.5);
        const auto feats = rhythm_features(p);
        std::vector<BeatFeature> from_tokens;
        std::int64_t b = -1;
        int k = 0;
        for (const auto &t : encode(p)) {
            if (t.type != TokenType::rhythmic) continue;
            if (t.timestep == Timestep::bar) {
                ++b;
                k = 0;
            } else if (t.timestep == Timestep::beat) {
                from_tokens.push_back(BeatFeature{ b, k++, *t.strength, *t.density });
            }
        }
        EXPECT_EQ(feats, from_tokens);
    }
}

TEST(Tokenizer, DurationsClampAndRound) {
    SymbolicPiece p;
    p.channel(TR).notes.push_back({ 10, 100 * 120, 40, 100 });  // longer than 64 sixteenths
    p.channel(P1).notes.push_back({ 61, 10, 70, 100 });            // rounds to slot 1 (61 > 60), zero length -> 1
    const auto tokens = encode(p);
    EXPECT_NE(std::find(tokens.begin(), tokens.end(), CT::note(TR, 40, 64)), tokens.end());
    EXPECT_NE(std::find(tokens.begin(), tokens.end(), CT::note(P1, 70, 1)), tokens.end());
    const auto back = decode(tokens);
    EXPECT_EQ(back.channel(P1).notes[0].onset, 120);
    EXPECT_EQ(back.channel(TR).notes[0].duration, 64 * 120);
}

TEST(Tokenizer, MaxLengthAndPadding) {
    const auto p = fixture();
    const auto n = encode(p).size();
    TokenizerConfig c;
    c.max_length = n;
    EXPECT_EQ(encode(p, c).size(), n);
    c.max_length = n - 1;
    EXPECT_THROW((void)encode(p, c), InvalidArgument);
    c.max_length = n + 10;
    c.pad = true;
    const auto padded = encode(p, c);
    ASSERT_EQ(padded.size(), n + 10);
    EXPECT_TRUE(std::all_of(padded.begin() + static_cast<std::ptrdiff_t>(n - 1), padded.end(), [](auto &t) { return t == CT::end(); }));
    EXPECT_EQ(note_set(decode(padded)), note_set(decode(encode(p))));
}

TEST(Tokenizer, OtherMeters) {
    auto p = nt::grid_piece(3, 4, 0.5);
    p.meter = TimeSignature{ 3, 4 };
    DecodeConfig dc;
    dc.meter = p.meter;
    const auto tokens = encode(p);
    EXPECT_EQ(std::count_if(tokens.begin(), tokens.end(), [](auto &t) { return t.timestep == Timestep::bar; }),
              (4 * 16 + 11) / 12);
    EXPECT_EQ(note_set(decode(tokens, dc)), note_set(p));
    p.meter = TimeSignature{ 7, 32 };
    EXPECT_THROW((void)encode(p), InvalidArgument);
}

TEST(Tokenizer, DecodeRejectsMalformedSequences) {
    const auto e = CT::end();
    const auto n = CT::note(P1, 60, 2);
    const std::vector<TokenSequence> bad{
        { n, e },                                                   // note before any beat
        { beat(0, 0), e },                                          // beat before bar
        { bar(0, 0), n, e },                                        // note before the bar's first beat
        { bar(0, 0), beat(0, 0), beat(0, 0), beat(0, 0), beat(0, 0), beat(0, 0), e },  // five beats in 4/4
        { bar(0, 0), beat(0, 0), sub(0, 0), sub(0, 0), sub(0, 0), sub(0, 0), e },       // past the beat
        { bar(0, 0), sub(0, 0), e },                                // sub-step before beat
        { bar(0, 0), beat(0, 0), e, n },                            // content after end
        { bar(0, 0), beat(0, 0), n },                               // unterminated
        { bar(5, 0), e },                                           // strength out of range
        { bar(0, 9), e },                                           // density out of range
        { CT::note(P1, 128, 2), e },                                // pitch out of range
        { CT::note(P1, 60, 0), e },                                 // duration out of range
        { CT{ TokenType::melodic, Timestep::none, 1, std::nullopt, P1, 60, 2 }, e },
        { CT{ TokenType::eos, Timestep::bar, std::nullopt, std::nullopt, std::nullopt, std::nullopt, std::nullopt } },
    };
    for (std::size_t i = 0; i < bad.size(); ++i) EXPECT_THROW((void)decode(bad[i]), FormatError) << i;
    EXPECT_NO_THROW((void)decode({ bar(0, 0), beat(0, 0), e, e, e }));
    EXPECT_THROW((void)decode({ e }, DecodeConfig{ 90 }), InvalidArgument);
}

TEST(Tokenizer, JsonLinesRoundTrip) {
    const auto tokens = encode(fixture());
    const auto text = tokens_to_jsonl(tokens);
    EXPECT_EQ(tokens_from_jsonl(text), tokens);
    EXPECT_EQ(text.substr(0, text.find('\n')),
              R"({"token_type":"rhythmic","timestep":"bar","density":4,"strength":4,"instrument":null,"pitch":null,"duration":null})");
    EXPECT_NE(text.find(R"({"token_type":"melodic","timestep":null,"density":null,"strength":null,"instrument":"TR","pitch":40,"duration":8})"),
              std::string::npos);
    EXPECT_THROW((void)tokens_from_jsonl(R"({"token_type":"chord"})"), FormatError);
    EXPECT_THROW((void)tokens_from_jsonl(R"({"token_type":"melodic","instrument":"DMC","pitch":1,"duration":1})"), FormatError);
    EXPECT_THROW((void)tokens_from_jsonl("{oops"), FormatError);
}

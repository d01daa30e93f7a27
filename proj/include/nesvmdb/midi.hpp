#pragma once

// Standard MIDI File (format 0/1) reader and format-1 writer for the four-voice piece model.

#include "nesvmdb/common.hpp"
#include "nesvmdb/symbolic.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nesvmdb {

/// Rules assigning note-bearing MIDI sources (a track, or a MIDI channel inside a format-0 track) to voices.
///
/// Lookup order per source: explicit track index, then MIDI channel (format 0 only), then
/// lowercase track name, then first program number. Sources no rule matches fall back to the
/// default rule when enabled: a track named p1/p2/tr/no takes that voice, the remaining
/// sources take the unused voices in P1, P2, TR, NO order.
struct ChannelMapping {
    std::map<int, ChannelKind> tracks;
    std::map<int, ChannelKind> midi_channels;
    std::map<std::string, ChannelKind> names;
    std::map<int, ChannelKind> programs;
    bool use_default_rule = true;

    /// JSON form: {"tracks": {"1": "P1"}, "channels": {"9": "NO"}, "names": {"lead": "P1"},
    ///             "programs": {"80": "P2"}, "default": true}
    static ChannelMapping from_json(const nlohmann::json &j) {
        ChannelMapping m;
        const auto voice = [](const nlohmann::json &v) {
            const auto kind = parse_channel_kind(v.get<std::string>());
            if (!kind) throw FormatError("mapping: unknown voice '" + v.get<std::string>() + "'");
            return *kind;
        };
        const auto int_keys = [&](const char *key, std::map<int, ChannelKind> &out) {
            if (!j.contains(key)) return;
            for (const auto &[k, v] : j.at(key).items()) out[std::stoi(k)] = voice(v);
        };
        int_keys("tracks", m.tracks);
        int_keys("channels", m.midi_channels);
        int_keys("programs", m.programs);
        if (j.contains("names")) {
            for (const auto &[k, v] : j.at("names").items()) m.names[detail::to_lower_ascii(k)] = voice(v);
        }
        if (j.contains("default")) m.use_default_rule = j.at("default").get<bool>();
        return m;
    }

    static ChannelMapping load(const std::filesystem::path &path) {
        try {
            return from_json(nlohmann::json::parse(detail::read_file_text(path)));
        } catch (const nlohmann::json::exception &e) {
            throw FormatError("mapping file '" + path.string() + "': " + e.what());
        }
    }
};

struct MidiParseOptions {
    ChannelMapping mapping;
    /// Close notes still sounding at end-of-track instead of failing.
    bool close_dangling_notes = false;
};

namespace detail {

struct MidiSource {
    int track = 0;
    int midi_channel = 0;
    std::string name;
    std::optional<int> program;
    std::vector<NoteEvent> notes;
};

inline std::uint32_t read_be(ByteReader &r, int width) {
    std::uint32_t v = 0;
    for (int i = 0; i < width; ++i) v = (v << 8) | r.u8();
    return v;
}

inline std::uint32_t read_vlq(ByteReader &r, const std::string &where) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        const std::uint8_t b = r.u8();
        v = (v << 7) | (b & 0x7Fu);
        if ((b & 0x80u) == 0) return v;
    }
    throw FormatError(where + ": variable-length quantity longer than 4 bytes");
}

inline void write_vlq(ByteWriter &w, std::uint32_t v) {
    std::array<std::uint8_t, 5> buf{};
    int n = 0;
    buf[n++] = static_cast<std::uint8_t>(v & 0x7F);
    while ((v >>= 7) != 0) buf[n++] = static_cast<std::uint8_t>(0x80 | (v & 0x7F));
    while (n > 0) w.u8(buf[--n]);
}

inline void write_be(ByteWriter &w, std::uint32_t v, int width) {
    for (int i = width - 1; i >= 0; --i) w.u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace detail

/// Parses SMF bytes into a SymbolicPiece. Throws FormatError on malformed input, dangling
/// note-ons, or voices that cannot be assigned.
[[nodiscard]] inline SymbolicPiece parse_midi(std::span<const std::uint8_t> bytes, const MidiParseOptions &options = {}) {
    detail::ByteReader r(bytes.data(), bytes.size(), "midi");
    if (bytes.size() < 14 || r.raw(4) != "MThd") throw FormatError("bad header: missing MThd chunk");
    const std::uint32_t header_len = detail::read_be(r, 4);
    if (header_len < 6) throw FormatError("bad header: MThd length " + std::to_string(header_len));
    const auto format = detail::read_be(r, 2);
    const auto ntracks = detail::read_be(r, 2);
    const auto division = detail::read_be(r, 2);
    r.raw(header_len - 6);
    if (format > 1) throw FormatError("unsupported SMF format " + std::to_string(format));
    if ((division & 0x8000u) != 0 || division == 0) throw FormatError("unsupported SMPTE or zero time division");

    SymbolicPiece piece;
    piece.tempo.ticks_per_quarter = static_cast<int>(division);
    piece.tempo.changes.clear();
    std::optional<TimeSignature> meter;
    std::vector<detail::MidiSource> sources;

    int track = 0;
    while (!r.at_end() && track < static_cast<int>(ntracks)) {
        if (r.remaining() < 8) throw FormatError("truncated chunk header after track " + std::to_string(track));
        const std::string id = r.raw(4);
        const std::uint32_t len = detail::read_be(r, 4);
        if (len > r.remaining()) {
            throw FormatError("truncated chunk '" + id + "': declared " + std::to_string(len) + " bytes, " +
                              std::to_string(r.remaining()) + " available");
        }
        const std::size_t chunk_start = r.position();
        if (id != "MTrk") {
            r.raw(len);
            continue;
        }
        const std::string where = "track " + std::to_string(track);
        detail::ByteReader t(bytes.data() + chunk_start, len, where);
        r.raw(len);

        std::string track_name;
        std::map<int, std::size_t> source_of_channel;
        std::map<int, int> program_of_channel;
        std::map<std::pair<int, int>, std::deque<std::pair<Tick, int>>> sounding;
        const auto source_for = [&](int ch) -> detail::MidiSource & {
            auto it = source_of_channel.find(ch);
            if (it == source_of_channel.end()) {
                sources.push_back(detail::MidiSource{ track, ch, {}, {}, {} });
                it = source_of_channel.emplace(ch, sources.size() - 1).first;
            }
            return sources[it->second];
        };

        Tick tick = 0;
        std::uint8_t running = 0;
        bool ended = false;
        while (!t.at_end() && !ended) {
            tick += detail::read_vlq(t, where);
            std::uint8_t status = t.u8();
            std::uint8_t data1 = 0;
            if (status < 0x80) {
                if (running == 0) throw FormatError(where + ": data byte without running status at tick " + std::to_string(tick));
                data1 = status;
                status = running;
            } else if (status < 0xF0) {
                running = status;
                data1 = t.u8();
            }
            if (status == 0xFF) {
                const std::uint8_t type = t.u8();
                const std::uint32_t mlen = detail::read_vlq(t, where);
                const std::string data = t.raw(mlen);
                if (type == 0x51 && mlen == 3) {
                    const auto us = (static_cast<std::uint32_t>(static_cast<std::uint8_t>(data[0])) << 16) |
                                    (static_cast<std::uint32_t>(static_cast<std::uint8_t>(data[1])) << 8) |
                                    static_cast<std::uint8_t>(data[2]);
                    if (us > 0) piece.tempo.changes.push_back(TempoChange{ tick, static_cast<double>(us) });
                } else if (type == 0x58 && mlen >= 2 && !meter) {
                    const int den_pow = static_cast<std::uint8_t>(data[1]);
                    if (den_pow <= 6) meter = TimeSignature{ static_cast<std::uint8_t>(data[0]), 1 << den_pow };
                } else if (type == 0x03 && track_name.empty()) {
                    track_name = data;
                } else if (type == 0x2F) {
                    ended = true;
                }
                continue;
            }
            if (status == 0xF0 || status == 0xF7) {
                t.raw(detail::read_vlq(t, where));
                continue;
            }
            if (status > 0xF0) throw FormatError(where + ": unexpected system message " + std::to_string(status) + " at tick " + std::to_string(tick));

            const int kind = status & 0xF0;
            const int ch = status & 0x0F;
            if (kind == 0xC0 || kind == 0xD0) {
                if (kind == 0xC0 && !program_of_channel.contains(ch)) program_of_channel[ch] = data1;
                continue;
            }
            const std::uint8_t data2 = t.u8();
            if (kind == 0x90 && data2 > 0) {
                sounding[{ ch, data1 }].emplace_back(tick, data2);
                source_for(ch);
            } else if (kind == 0x80 || kind == 0x90) {
                auto it = sounding.find({ ch, data1 });
                if (it == sounding.end() || it->second.empty()) continue;
                const auto [onset, velocity] = it->second.front();
                it->second.pop_front();
                if (tick > onset) {
                    source_for(ch).notes.push_back(NoteEvent{ onset, tick - onset, data1, velocity });
                }
            }
        }
        for (auto &[key, queue] : sounding) {
            if (queue.empty()) continue;
            if (!options.close_dangling_notes) {
                throw FormatError("dangling note-on: pitch " + std::to_string(key.second) + " at tick " +
                                  std::to_string(queue.front().first) + " on track " + std::to_string(track) +
                                  " never released");
            }
            for (const auto &[onset, velocity] : queue) {
                if (tick > onset) source_for(key.first).notes.push_back(NoteEvent{ onset, tick - onset, key.second, velocity });
            }
        }
        for (auto &[ch, idx] : source_of_channel) {
            sources[idx].name = track_name;
            if (auto p = program_of_channel.find(ch); p != program_of_channel.end()) sources[idx].program = p->second;
        }
        piece.length_ticks = std::max(piece.length_ticks, tick);
        ++track;
    }
    if (track < static_cast<int>(ntracks)) {
        throw FormatError("truncated file: header declares " + std::to_string(ntracks) + " tracks, found " +
                          std::to_string(track));
    }
    piece.tempo.canonicalize();
    if (meter) piece.meter = *meter;

    // voice assignment
    const auto &m = options.mapping;
    std::vector<std::optional<ChannelKind>> assigned(sources.size());
    std::array<bool, 4> taken{};
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const auto &s = sources[i];
        if (s.notes.empty()) continue;
        if (auto it = m.tracks.find(s.track); it != m.tracks.end()) {
            assigned[i] = it->second;
        } else if (auto c = m.midi_channels.find(s.midi_channel); format == 0 && c != m.midi_channels.end()) {
            assigned[i] = c->second;
        } else if (auto n = m.names.find(detail::to_lower_ascii(detail::trim(s.name))); n != m.names.end()) {
            assigned[i] = n->second;
        } else if (auto p = s.program ? m.programs.find(*s.program) : m.programs.end(); p != m.programs.end()) {
            assigned[i] = p->second;
        } else if (m.use_default_rule) {
            if (auto k = parse_channel_kind(s.name)) assigned[i] = *k;
        }
        if (assigned[i]) taken[channel_index(*assigned[i])] = true;
    }
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const auto &s = sources[i];
        if (s.notes.empty() || assigned[i]) continue;
        const std::string label = "track " + std::to_string(s.track) + " channel " + std::to_string(s.midi_channel) +
                                  (s.name.empty() ? "" : " ('" + s.name + "')");
        if (!m.use_default_rule) throw FormatError(label + " is not mapped to any NES voice");
        const auto free = std::find(taken.begin(), taken.end(), false);
        if (free == taken.end()) {
            throw FormatError("more than four voices without a mapping rule: " + label + " has no free NES voice");
        }
        *free = true;
        assigned[i] = all_channel_kinds[static_cast<std::size_t>(free - taken.begin())];
    }
    for (std::size_t i = 0; i < sources.size(); ++i) {
        if (!assigned[i]) continue;
        auto &dst = piece.channel(*assigned[i]).notes;
        dst.insert(dst.end(), sources[i].notes.begin(), sources[i].notes.end());
    }
    for (auto &ch : piece.channels) ch.sort_notes();
    piece.length_ticks = std::max(piece.length_ticks, piece.last_note_off());
    return piece;
}

[[nodiscard]] inline SymbolicPiece read_midi_file(const std::filesystem::path &path, const MidiParseOptions &options = {}) {
    const auto bytes = detail::read_file_bytes(path);
    try {
        return parse_midi(bytes, options);
    } catch (const FormatError &e) {
        throw FormatError(path.filename().string() + ": " + e.what());
    }
}

/// Serializes as format-1 SMF: a conductor track (meter, tempo) and one track per voice
/// named p1/p2/tr/no on MIDI channels 0-3. Tempo values are rounded to whole microseconds.
[[nodiscard]] inline std::vector<std::uint8_t> write_midi(const SymbolicPiece &piece) {
    detail::ByteWriter out;
    out.raw("MThd");
    detail::write_be(out, 6, 4);
    detail::write_be(out, 1, 2);
    detail::write_be(out, 5, 2);
    detail::write_be(out, static_cast<std::uint32_t>(piece.tempo.ticks_per_quarter), 2);

    const Tick end = std::max(piece.length_ticks, piece.last_note_off());
    const auto emit_track = [&](const std::vector<std::pair<Tick, std::vector<std::uint8_t>>> &events) {
        detail::ByteWriter trk;
        Tick now = 0;
        for (const auto &[tick, data] : events) {
            detail::write_vlq(trk, static_cast<std::uint32_t>(tick - now));
            now = tick;
            for (auto b : data) trk.u8(b);
        }
        detail::write_vlq(trk, static_cast<std::uint32_t>(std::max<Tick>(0, end - now)));
        for (std::uint8_t b : { std::uint8_t{ 0xFF }, std::uint8_t{ 0x2F }, std::uint8_t{ 0x00 } }) trk.u8(b);
        out.raw("MTrk");
        detail::write_be(out, static_cast<std::uint32_t>(trk.bytes().size()), 4);
        for (auto b : trk.bytes()) out.u8(b);
    };

    std::vector<std::pair<Tick, std::vector<std::uint8_t>>> conductor;
    int den_pow = 0;
    while ((1 << den_pow) < piece.meter.denominator) ++den_pow;
    conductor.push_back({ 0, { 0xFF, 0x58, 0x04, static_cast<std::uint8_t>(piece.meter.numerator),
                               static_cast<std::uint8_t>(den_pow), 24, 8 } });
    for (const auto &c : piece.tempo.changes) {
        const auto us = static_cast<std::uint32_t>(std::clamp<long>(std::lround(c.microseconds_per_quarter), 1, 0xFFFFFF));
        conductor.push_back({ c.tick, { 0xFF, 0x51, 0x03, static_cast<std::uint8_t>(us >> 16),
                                        static_cast<std::uint8_t>(us >> 8), static_cast<std::uint8_t>(us) } });
    }
    emit_track(conductor);

    for (const auto &ch : piece.channels) {
        const auto midi_ch = static_cast<std::uint8_t>(channel_index(ch.kind));
        std::vector<std::pair<Tick, std::vector<std::uint8_t>>> events;
        std::string name = detail::to_lower_ascii(channel_name(ch.kind));
        std::vector<std::uint8_t> name_event{ 0xFF, 0x03, static_cast<std::uint8_t>(name.size()) };
        name_event.insert(name_event.end(), name.begin(), name.end());
        events.push_back({ 0, name_event });
        // (tick, order, bytes): note-offs sort before note-ons at the same tick
        std::vector<std::tuple<Tick, int, std::vector<std::uint8_t>>> notes;
        for (const auto &n : ch.notes) {
            const auto p = static_cast<std::uint8_t>(n.pitch);
            notes.emplace_back(n.onset, 1, std::vector<std::uint8_t>{ static_cast<std::uint8_t>(0x90 | midi_ch), p,
                                                                      static_cast<std::uint8_t>(std::clamp(n.velocity, 1, 127)) });
            notes.emplace_back(n.end(), 0, std::vector<std::uint8_t>{ static_cast<std::uint8_t>(0x80 | midi_ch), p, 0 });
        }
        std::stable_sort(notes.begin(), notes.end(), [](const auto &a, const auto &b) {
            return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
        });
        for (auto &[tick, order, data] : notes) events.push_back({ tick, std::move(data) });
        emit_track(events);
    }
    return out.take();
}

inline void write_midi_file(const SymbolicPiece &piece, const std::filesystem::path &path) {
    detail::write_file_bytes(path, write_midi(piece));
}

}  // namespace nesvmdb

#pragma once

// A second, deliberately simple SMF reader used only to cross-check the library parser.
// Works on absolute byte offsets and keeps notes per track without any voice mapping.

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace nesvmdb::testing {

struct OracleNote {
    long onset;
    long duration;
    int pitch;
    int velocity;
    bool operator<(const OracleNote &o) const {
        if (onset != o.onset) return onset < o.onset;
        if (pitch != o.pitch) return pitch < o.pitch;
        return duration < o.duration;
    }
    bool operator==(const OracleNote &) const = default;
};

struct OracleTrack {
    std::string name;
    std::vector<OracleNote> notes;
};

struct OracleFile {
    int format = 0;
    int division = 0;
    std::vector<std::pair<long, long>> tempos;  // (tick, us per quarter)
    std::vector<OracleTrack> tracks;
};

inline OracleFile oracle_read_smf(const std::vector<std::uint8_t> &b) {
    auto u8 = [&](std::size_t at) -> unsigned {
        if (at >= b.size()) throw std::runtime_error("oracle: out of range");
        return b[at];
    };
    auto be = [&](std::size_t at, int n) {
        unsigned long v = 0;
        for (int i = 0; i < n; ++i) v = (v << 8) | u8(at + static_cast<std::size_t>(i));
        return v;
    };
    if (b.size() < 14 || b[0] != 'M' || b[1] != 'T' || b[2] != 'h' || b[3] != 'd') throw std::runtime_error("oracle: header");
    OracleFile f;
    const auto hlen = be(4, 4);
    f.format = static_cast<int>(be(8, 2));
    const auto ntracks = be(10, 2);
    f.division = static_cast<int>(be(12, 2));
    std::size_t pos = 8 + hlen;
    for (unsigned long t = 0; t < ntracks; ++t) {
        const auto len = be(pos + 4, 4);
        const bool is_track = b[pos] == 'M' && b[pos + 1] == 'T' && b[pos + 2] == 'r' && b[pos + 3] == 'k';
        std::size_t p = pos + 8;
        const std::size_t end = p + len;
        pos = end;
        if (!is_track) {
            --t;
            continue;
        }
        OracleTrack track;
        std::map<int, std::vector<std::pair<long, int>>> open;  // key = channel*128+pitch
        long now = 0;
        unsigned status = 0;
        while (p < end) {
            unsigned long delta = 0;
            unsigned c;
            do {
                c = u8(p++);
                delta = (delta << 7) | (c & 0x7F);
            } while (c & 0x80);
            now += static_cast<long>(delta);
            unsigned s = u8(p);
            if (s & 0x80) {
                ++p;
                if (s < 0xF0) status = s;
            } else {
                s = status;
            }
            if (s == 0xFF) {
                const unsigned type = u8(p++);
                unsigned long mlen = 0;
                do {
                    c = u8(p++);
                    mlen = (mlen << 7) | (c & 0x7F);
                } while (c & 0x80);
                if (type == 0x51) f.tempos.emplace_back(now, static_cast<long>(be(p, 3)));
                if (type == 0x03 && track.name.empty()) track.name.assign(b.begin() + static_cast<long>(p), b.begin() + static_cast<long>(p + mlen));
                p += mlen;
                if (type == 0x2F) break;
                continue;
            }
            if (s == 0xF0 || s == 0xF7) {
                unsigned long slen = 0;
                do {
                    c = u8(p++);
                    slen = (slen << 7) | (c & 0x7F);
                } while (c & 0x80);
                p += slen;
                continue;
            }
            const unsigned hi = s & 0xF0;
            const int ch = static_cast<int>(s & 0x0F);
            if (hi == 0xC0 || hi == 0xD0) {
                p += 1;
                continue;
            }
            const int d1 = static_cast<int>(u8(p));
            const int d2 = static_cast<int>(u8(p + 1));
            p += 2;
            const int key = ch * 128 + d1;
            if (hi == 0x90 && d2 > 0) {
                open[key].emplace_back(now, d2);
            } else if (hi == 0x80 || hi == 0x90) {
                auto &q = open[key];
                if (!q.empty()) {
                    if (now > q.front().first) track.notes.push_back({ q.front().first, now - q.front().first, d1, q.front().second });
                    q.erase(q.begin());
                }
            }
        }
        std::sort(track.notes.begin(), track.notes.end());
        f.tracks.push_back(std::move(track));
    }
    return f;
}

}  // namespace nesvmdb::testing

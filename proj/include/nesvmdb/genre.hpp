#pragma once

// Wikipedia-to-store genre mapping table and genre distribution statistics.

#include "nesvmdb/common.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace nesvmdb {

enum class Genre { Shooters, Sports, Platformers, RPG, Puzzle, Action, Fighting, Strategy, Simulation, Adventure, Racing };

inline constexpr std::array<Genre, 11> all_genres{ Genre::Shooters, Genre::Sports,   Genre::Platformers, Genre::RPG,
                                                   Genre::Puzzle,   Genre::Action,   Genre::Fighting,    Genre::Strategy,
                                                   Genre::Simulation, Genre::Adventure, Genre::Racing };

inline constexpr double random_guess_baseline = 1.0 / 11.0;

[[nodiscard]] constexpr std::string_view genre_name(Genre g) noexcept {
    switch (g) {
        case Genre::Shooters: return "Shooters";
        case Genre::Sports: return "Sports";
        case Genre::Platformers: return "Platformers";
        case Genre::RPG: return "RPG";
        case Genre::Puzzle: return "Puzzle";
        case Genre::Action: return "Action";
        case Genre::Fighting: return "Fighting";
        case Genre::Strategy: return "Strategy";
        case Genre::Simulation: return "Simulation";
        case Genre::Adventure: return "Adventure";
        case Genre::Racing: return "Racing";
    }
    return "?";
}

struct GenreMapping {
    std::string_view specific;
    std::string_view store_label;  // as printed in the source table
    Genre genre;
};

/// The 40 rows of the mapping table, in source order (duplicates included).
inline constexpr std::array<GenreMapping, 40> genre_table{ {
    { "Scrolling shooter", "Shooters", Genre::Shooters },
    { "Rail shooter", "Shooters", Genre::Shooters },
    { "2D action platformer", "Platform", Genre::Platformers },
    { "Run and gun", "Shooters", Genre::Shooters },
    { "Block breaker", "Puzzle", Genre::Puzzle },
    { "Puzzle-platform", "Puzzle", Genre::Puzzle },
    { "Beat 'em up", "Fighting", Genre::Fighting },
    { "Multi-directional shooter", "Shooters", Genre::Shooters },
    { "Turn-based strategy", "Strategy", Genre::Strategy },
    { "Run-and-gun", "Shooters", Genre::Shooters },
    { "Maze", "Puzzle", Genre::Puzzle },
    { "Casino", "Simulation", Genre::Simulation },
    { "Action-adventure", "Adventure", Genre::Adventure },
    { "Platform-adventure", "Adventure", Genre::Adventure },
    { "Science fiction", "Adventure", Genre::Adventure },
    { "Side-scrolling action", "Action", Genre::Action },
    { "Shoot 'em up", "Shooters", Genre::Shooters },
    { "Light gun shooter", "Shooters", Genre::Shooters },
    { "Fixed shooter", "Shooters", Genre::Shooters },
    { "Action RPG", "RPG", Genre::RPG },
    { "First-person rail shooter", "Shooters", Genre::Shooters },
    { "Vehicular combat", "Action", Genre::Action },
    { "Graphic adventure", "Adventure", Genre::Adventure },
    { "Hack and slash", "Action", Genre::Action },
    { "Action adventure", "Adventure", Genre::Adventure },
    { "Tactical role-playing", "RPG", Genre::RPG },
    { "Pinball", "Simulation", Genre::Simulation },
    { "Baseball", "Sports", Genre::Sports },
    { "Arcade style racing", "Racing", Genre::Racing },
    { "Side-scrolling", "Action", Genre::Action },
    { "Rail shooter", "Shooters", Genre::Shooters },
    { "Carnival", "Simulation", Genre::Simulation },
    { "Modern first-person adventure", "Adventure", Genre::Adventure },
    { "Educational", "Simulation", Genre::Simulation },
    { "Tile-matching", "Puzzle", Genre::Puzzle },
    { "Action platformer", "Platform", Genre::Platformers },
    { "Children's book", "Adventure", Genre::Adventure },
    { "Shooting gallery", "Shooters", Genre::Shooters },
    { "Multidirectional shooter", "Shooters", Genre::Shooters },
    { "Business simulation", "Simulation", Genre::Simulation },
} };

/// Lowercase, hyphens and underscores as spaces, whitespace runs collapsed, trimmed.
[[nodiscard]] inline std::string normalize_genre_key(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : detail::trim(s)) {
        if (c == '-' || c == '_' || c == ' ' || c == '\t') {
            space = true;
            continue;
        }
        if (space && !out.empty()) out += ' ';
        space = false;
        out += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
    }
    return out;
}

class UnmappedGenre : public InvalidArgument {
public:
    explicit UnmappedGenre(const std::string &name) : InvalidArgument("unmapped genre '" + name + "'") {}
};

[[nodiscard]] inline std::optional<Genre> find_genre(std::string_view specific) {
    const auto key = normalize_genre_key(specific);
    for (const auto &row : genre_table) {
        if (normalize_genre_key(row.specific) == key) return row.genre;
    }
    return std::nullopt;
}

/// Broad store genre for a specific genre; throws UnmappedGenre for anything outside the table.
[[nodiscard]] inline Genre map_genre(std::string_view specific) {
    if (auto g = find_genre(specific)) return *g;
    throw UnmappedGenre(std::string(specific));
}

/// Distinct specific genres after normalization, in first-appearance order.
[[nodiscard]] inline std::vector<GenreMapping> distinct_genre_rows() {
    std::vector<GenreMapping> rows;
    std::vector<std::string> keys;
    for (const auto &row : genre_table) {
        auto key = normalize_genre_key(row.specific);
        if (std::find(keys.begin(), keys.end(), key) != keys.end()) continue;
        keys.push_back(std::move(key));
        rows.push_back(row);
    }
    return rows;
}

/// Parses a broad genre label (case-insensitive). The table's "Platform" and singular forms are
/// accepted as aliases.
[[nodiscard]] inline std::optional<Genre> parse_genre(std::string_view label) {
    const auto key = normalize_genre_key(label);
    for (auto g : all_genres) {
        const auto name = normalize_genre_key(genre_name(g));
        if (key == name || (name.size() > 1 && name.back() == 's' && key == name.substr(0, name.size() - 1))) return g;
    }
    if (key == "platform") return Genre::Platformers;
    return std::nullopt;
}

struct GenreHistogram {
    std::array<std::size_t, 11> counts{};
    [[nodiscard]] std::size_t total() const noexcept {
        std::size_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }
    [[nodiscard]] std::size_t count(Genre g) const noexcept { return counts[static_cast<std::size_t>(g)]; }
    [[nodiscard]] double fraction(Genre g) const noexcept {
        const auto t = total();
        return t == 0 ? 0.0 : static_cast<double>(count(g)) / static_cast<double>(t);
    }
};

[[nodiscard]] inline GenreHistogram genre_histogram(const std::vector<Genre> &labels) {
    GenreHistogram h;
    for (auto g : labels) ++h.counts[static_cast<std::size_t>(g)];
    return h;
}

/// Label strings must name one of the 11 broad genres.
[[nodiscard]] inline GenreHistogram genre_histogram(const std::vector<std::string> &labels) {
    std::vector<Genre> parsed;
    parsed.reserve(labels.size());
    for (const auto &l : labels) {
        auto g = parse_genre(l);
        if (!g) throw InvalidArgument("label '" + l + "' is not one of the 11 store genres");
        parsed.push_back(*g);
    }
    return genre_histogram(parsed);
}

/// Text bar chart, one row per genre in canonical order, bars scaled to `width` characters.
[[nodiscard]] inline std::string render_histogram(const GenreHistogram &h, int width = 50) {
    std::size_t peak = 0;
    for (auto c : h.counts) peak = std::max(peak, c);
    std::string out;
    for (auto g : all_genres) {
        const auto c = h.count(g);
        const int bar = peak == 0 ? 0 : static_cast<int>(std::lround(static_cast<double>(c) * width / static_cast<double>(peak)));
        char line[160];
        std::snprintf(line, sizeof line, "%-12s %5zu %6.1f%% ", std::string(genre_name(g)).c_str(), c, 100.0 * h.fraction(g));
        out += line + std::string(static_cast<std::size_t>(bar), '#') + "\n";
    }
    char total[64];
    std::snprintf(total, sizeof total, "%-12s %5zu\n", "total", h.total());
    return out + total;
}

/// Reads a label file: one label per line, optionally `game,label` CSV with a header. A label
/// may be a broad genre or a specific genre from the table.
[[nodiscard]] inline std::vector<Genre> read_genre_labels(std::string_view text) {
    std::vector<Genre> out;
    std::istringstream in{ std::string(text) };
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        auto field = std::string(detail::trim(line));
        if (field.empty()) continue;
        if (const auto comma = field.rfind(','); comma != std::string::npos) field = std::string(detail::trim(field.substr(comma + 1)));
        if (field.size() >= 2 && field.front() == '"' && field.back() == '"') field = field.substr(1, field.size() - 2);
        if (auto g = parse_genre(field)) {
            out.push_back(*g);
        } else if (auto m = find_genre(field)) {
            out.push_back(*m);
        } else if (lineno == 1 && (normalize_genre_key(field) == "genre" || normalize_genre_key(field) == "label")) {
            continue;
        } else {
            throw InvalidArgument("line " + std::to_string(lineno) + ": unmapped genre '" + field + "'");
        }
    }
    return out;
}

[[nodiscard]] inline std::string genre_table_csv() {
    std::string out = "specific_genre,store_genre\n";
    for (const auto &row : genre_table) {
        const std::string s(row.specific);
        out += (s.find(',') != std::string::npos ? "\"" + s + "\"" : s) + "," + std::string(genre_name(row.genre)) + "\n";
    }
    return out;
}

}  // namespace nesvmdb

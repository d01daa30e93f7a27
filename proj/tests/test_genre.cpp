#include "nesvmdb/genre.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace nesvmdb;

TEST(Genre, TableHasFortyRowsAndElevenGenres) {
    EXPECT_EQ(genre_table.size(), 40u);
    std::set<Genre> codomain;
    for (const auto &row : genre_table) codomain.insert(row.genre);
    EXPECT_EQ(codomain.size(), 11u);
    EXPECT_EQ(all_genres.size(), 11u);
    EXPECT_DOUBLE_EQ(random_guess_baseline, 1.0 / 11.0);
    EXPECT_NEAR(random_guess_baseline, 0.0909, 5e-5);
}

TEST(Genre, SpotChecks) {
    const std::vector<std::pair<const char *, Genre>> cases{
        { "Scrolling shooter", Genre::Shooters },  { "2D action platformer", Genre::Platformers },
        { "Block breaker", Genre::Puzzle },        { "Beat 'em up", Genre::Fighting },
        { "Turn-based strategy", Genre::Strategy }, { "Casino", Genre::Simulation },
        { "Science fiction", Genre::Adventure },   { "Action RPG", Genre::RPG },
        { "Baseball", Genre::Sports },             { "Arcade style racing", Genre::Racing },
        { "Vehicular combat", Genre::Action },     { "Children's book", Genre::Adventure },
        { "Puzzle-platform", Genre::Puzzle },      { "Platform-adventure", Genre::Adventure },
    };
    for (auto [name, g] : cases) EXPECT_EQ(map_genre(name), g) << name;
}

TEST(Genre, DuplicatesAndSpellingVariantsAgree) {
    EXPECT_EQ(map_genre("Run and gun"), map_genre("Run-and-gun"));
    EXPECT_EQ(map_genre("Action-adventure"), map_genre("Action adventure"));
    EXPECT_EQ(map_genre("Multi-directional shooter"), map_genre("Multidirectional shooter"));
    int rail = 0;
    for (const auto &row : genre_table) rail += row.specific == "Rail shooter";
    EXPECT_EQ(rail, 2);
    // normalized duplicates collapse; every normalized key maps to a single genre
    const auto distinct = distinct_genre_rows();
    EXPECT_EQ(distinct.size(), 37u);
    for (const auto &row : genre_table) EXPECT_EQ(map_genre(row.specific), row.genre);
}

TEST(Genre, NormalizationIsCaseAndSeparatorInsensitive) {
    EXPECT_EQ(normalize_genre_key("  Run_and--GUN "), "run and gun");
    EXPECT_EQ(map_genre("SHOOT 'EM UP"), Genre::Shooters);
    EXPECT_EQ(map_genre("tile matching"), Genre::Puzzle);
}

TEST(Genre, UnmappedGenreIsAnError) {
    try {
        (void)map_genre("Roguelike");
        FAIL();
    } catch (const UnmappedGenre &e) {
        EXPECT_EQ(std::string(e.what()), "unmapped genre 'Roguelike'");
    }
    EXPECT_FALSE(find_genre(""));
    EXPECT_THROW((void)map_genre("Platform"), InvalidArgument);
}

TEST(Genre, StoreLabelsParse) {
    for (auto g : all_genres) EXPECT_EQ(parse_genre(genre_name(g)), g);
    EXPECT_EQ(parse_genre("shooter"), Genre::Shooters);
    EXPECT_EQ(parse_genre("platform"), Genre::Platformers);
    EXPECT_EQ(parse_genre("rpg"), Genre::RPG);
    EXPECT_FALSE(parse_genre("Music"));
    for (const auto &row : genre_table) EXPECT_EQ(parse_genre(row.store_label), row.genre) << row.store_label;
}

TEST(Genre, HistogramExamples) {
    const auto h = genre_histogram(std::vector<std::string>{ "Shooters", "Shooters", "RPG" });
    EXPECT_EQ(h.total(), 3u);
    EXPECT_EQ(h.count(Genre::Shooters), 2u);
    EXPECT_EQ(h.count(Genre::RPG), 1u);
    EXPECT_EQ(h.count(Genre::Racing), 0u);
    EXPECT_NEAR(h.fraction(Genre::Shooters), 2.0 / 3.0, 1e-12);
    EXPECT_EQ(genre_histogram(std::vector<Genre>{}).total(), 0u);
    EXPECT_EQ(genre_histogram(std::vector<Genre>{}).fraction(Genre::RPG), 0.0);
    EXPECT_THROW((void)genre_histogram(std::vector<std::string>{ "Music" }), InvalidArgument);
    double sum = 0;
    for (auto g : all_genres) sum += h.fraction(g);
    EXPECT_NEAR(sum, 1.0, 1e-12);
    const auto text = render_histogram(h, 10);
    EXPECT_NE(text.find("Shooters"), std::string::npos);
    EXPECT_NE(text.find("##########"), std::string::npos);
    EXPECT_NE(text.find("total"), std::string::npos);
}

TEST(Genre, LabelFileReader) {
    const auto labels = read_genre_labels("game,genre\ncontra,Run and gun\nzelda,\"Action-adventure\"\ntetris,Puzzle\n\n");
    EXPECT_EQ(labels, (std::vector<Genre>{ Genre::Shooters, Genre::Adventure, Genre::Puzzle }));
    EXPECT_EQ(read_genre_labels("Sports\nracing\n").size(), 2u);
    try {
        (void)read_genre_labels("Sports\nRoguelike\n");
        FAIL();
    } catch (const InvalidArgument &e) {
        EXPECT_EQ(std::string(e.what()), "line 2: unmapped genre 'Roguelike'");
    }
}

TEST(Genre, TableCsvExport) {
    const auto csv = genre_table_csv();
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 41);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "specific_genre,store_genre");
    EXPECT_NE(csv.find("2D action platformer,Platformers\n"), std::string::npos);
}

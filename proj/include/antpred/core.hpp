#pragma once

// Shared value types: grid cells, the 9-move set, arena bounds, influence
// categories, exceptions and the seeded RNG helpers used everywhere else.

#include <array>
#include <compare>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace antpred {

// Errors. DataError maps to CLI exit code 2, ConfigError to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class MissingArtifact : public DataError {
public:
    explicit MissingArtifact(std::string path)
        : DataError("missing artifact: " + path), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

struct Cell {
    int x = 0;
    int y = 0;

    friend constexpr bool operator==(const Cell&, const Cell&) = default;
    // Row-major order (y first) so sorted cell lists read like a raster scan.
    friend constexpr std::strong_ordering operator<=>(const Cell& a, const Cell& b) {
        if (auto c = a.y <=> b.y; c != 0) return c;
        return a.x <=> b.x;
    }
};

constexpr long dist2(Cell a, Cell b) {
    const long dx = a.x - b.x;
    const long dy = a.y - b.y;
    return dx * dx + dy * dy;
}

constexpr int chebyshev(Cell a, Cell b) {
    const int dx = a.x > b.x ? a.x - b.x : b.x - a.x;
    const int dy = a.y > b.y ? a.y - b.y : b.y - a.y;
    return dx > dy ? dx : dy;
}

struct ArenaDims {
    int width = 0;
    int height = 0;

    constexpr bool contains(Cell c) const {
        return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height;
    }
    constexpr std::size_t index(Cell c) const {
        return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(c.x);
    }
    constexpr std::size_t area() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    friend constexpr bool operator==(const ArenaDims&, const ArenaDims&) = default;
};

// y grows downwards (image convention), so N is (0,-1).
enum class Move : std::uint8_t { stay, N, NE, E, SE, S, SW, W, NW };

inline constexpr std::size_t kMoveCount = 9;

inline constexpr std::array<Move, kMoveCount> kAllMoves = {
    Move::stay, Move::N, Move::NE, Move::E, Move::SE, Move::S, Move::SW, Move::W, Move::NW};

constexpr Cell offset(Move m) {
    constexpr std::array<Cell, kMoveCount> table = {
        Cell{0, 0}, Cell{0, -1}, Cell{1, -1}, Cell{1, 0}, Cell{1, 1},
        Cell{0, 1}, Cell{-1, 1}, Cell{-1, 0}, Cell{-1, -1}};
    return table[static_cast<std::size_t>(m)];
}

constexpr Cell apply(Cell c, Move m) {
    const Cell d = offset(m);
    return {c.x + d.x, c.y + d.y};
}

inline std::string_view move_name(Move m) {
    constexpr std::array<std::string_view, kMoveCount> names = {
        "stay", "N", "NE", "E", "SE", "S", "SW", "W", "NW"};
    return names[static_cast<std::size_t>(m)];
}

inline std::optional<Move> parse_move(std::string_view s) {
    for (Move m : kAllMoves)
        if (move_name(m) == s) return m;
    return std::nullopt;
}

inline std::optional<Move> move_between(Cell from, Cell to) {
    for (Move m : kAllMoves)
        if (apply(from, m) == to) return m;
    return std::nullopt;
}

// Red / green / blue in the colour legend.
enum class InfluenceCategory : std::uint8_t { ant = 0, entity = 1, other = 2 };

inline constexpr std::array<InfluenceCategory, 3> kAllCategories = {
    InfluenceCategory::ant, InfluenceCategory::entity, InfluenceCategory::other};

inline std::string_view category_name(InfluenceCategory c) {
    switch (c) {
    case InfluenceCategory::ant: return "ant";
    case InfluenceCategory::entity: return "entity";
    case InfluenceCategory::other: return "other";
    }
    return "other";
}

inline InfluenceCategory parse_category(std::string_view s) {
    for (auto c : kAllCategories)
        if (category_name(c) == s) return c;
    throw DataError("unknown influence category '" + std::string(s) + "'");
}

// Seeded RNG. std distributions are implementation-defined, so the helpers
// below are written out to keep streams bit-identical across toolchains.
using Rng = std::mt19937_64;

inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = Rng::max() - (Rng::max() % n);
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % n;
}

inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

} // namespace antpred

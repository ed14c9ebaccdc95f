#pragma once

// Zones of interest: stationary, above-floor regions found in both the
// regular and the extruded frames, merged summatively and labelled by KNN.

#include "antpred/core.hpp"
#include "antpred/extrusion.hpp"
#include "antpred/frame_store.hpp"

#include "json.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <span>
#include <vector>

namespace antpred {

enum class ZoneLabel : std::uint8_t { larva, ant, unknown };
enum class ZoneSource : std::uint8_t { regular, extruded, merged };

inline std::string_view zone_label_name(ZoneLabel l) {
    switch (l) {
    case ZoneLabel::larva: return "larva";
    case ZoneLabel::ant: return "ant";
    case ZoneLabel::unknown: return "unknown";
    }
    return "unknown";
}

inline ZoneLabel parse_zone_label(std::string_view s) {
    if (s == "larva") return ZoneLabel::larva;
    if (s == "ant") return ZoneLabel::ant;
    if (s == "unknown") return ZoneLabel::unknown;
    throw DataError("unknown zone label '" + std::string(s) + "'");
}

inline std::string_view zone_source_name(ZoneSource s) {
    switch (s) {
    case ZoneSource::regular: return "regular";
    case ZoneSource::extruded: return "extruded";
    case ZoneSource::merged: return "merged";
    }
    return "merged";
}

inline ZoneSource parse_zone_source(std::string_view s) {
    if (s == "regular") return ZoneSource::regular;
    if (s == "extruded") return ZoneSource::extruded;
    if (s == "merged") return ZoneSource::merged;
    throw DataError("unknown zone source '" + std::string(s) + "'");
}

// Lower value wins vote ties: larva > ant > unknown.
constexpr int label_priority(ZoneLabel l) { return static_cast<int>(l); }

struct EntityZone {
    int zone_id = 0;
    Cell centroid;
    std::vector<Cell> cells; // sorted, unique
    ZoneLabel label = ZoneLabel::unknown;
    ZoneSource source = ZoneSource::extruded;

    friend bool operator==(const EntityZone&, const EntityZone&) = default;
};

// Mean of the member cells, rounded half-up per axis.
inline Cell centroid_half_up(std::span<const Cell> cells) {
    long sx = 0, sy = 0;
    for (Cell c : cells) {
        sx += c.x;
        sy += c.y;
    }
    const long n = static_cast<long>(cells.size());
    auto round_half_up = [n](long s) {
        // floor(s/n + 1/2) == floor((2s + n) / 2n)
        const long num = 2 * s + n;
        const long den = 2 * n;
        return static_cast<int>(num >= 0 ? num / den : -((-num + den - 1) / den));
    };
    return {round_half_up(sx), round_half_up(sy)};
}

// 8-connected components of the cells where mask is set, in raster order of
// their first cell. Cells within each component are sorted.
inline std::vector<std::vector<Cell>> connected_components(ArenaDims dims, std::span<const std::uint8_t> mask) {
    std::vector<std::vector<Cell>> out;
    std::vector<char> seen(dims.area(), 0);
    std::vector<Cell> stack;
    for (int y = 0; y < dims.height; ++y)
        for (int x = 0; x < dims.width; ++x) {
            const std::size_t start = dims.index({x, y});
            if (!mask[start] || seen[start]) continue;
            std::vector<Cell> comp;
            seen[start] = 1;
            stack.push_back({x, y});
            while (!stack.empty()) {
                const Cell c = stack.back();
                stack.pop_back();
                comp.push_back(c);
                for (Move m : kAllMoves) {
                    const Cell n = apply(c, m);
                    if (!dims.contains(n)) continue;
                    const std::size_t i = dims.index(n);
                    if (mask[i] && !seen[i]) {
                        seen[i] = 1;
                        stack.push_back(n);
                    }
                }
            }
            std::sort(comp.begin(), comp.end());
            out.push_back(std::move(comp));
        }
    return out;
}

struct DetectParams {
    double epsilon_motion = kDefaultMotionEpsilon;
    double min_height = 80.0;
    std::size_t min_cells = 3;
};

namespace detail {

inline std::vector<EntityZone> zones_from_mask(ArenaDims dims, std::span<const std::uint8_t> mask,
                                               std::size_t min_cells, ZoneSource source) {
    std::vector<EntityZone> zones;
    for (auto& comp : connected_components(dims, mask)) {
        if (comp.size() < min_cells) continue;
        EntityZone z;
        z.zone_id = static_cast<int>(zones.size());
        z.centroid = centroid_half_up(comp);
        z.cells = std::move(comp);
        z.label = ZoneLabel::unknown;
        z.source = source;
        zones.push_back(std::move(z));
    }
    return zones;
}

inline void check_windows(std::span<const Frame> frames, std::span<const ExtrudedFrame> extruded) {
    if (frames.size() != extruded.size())
        throw DataError("detect_zones: window lengths differ (" + std::to_string(frames.size()) + " vs " +
                        std::to_string(extruded.size()) + ")");
    if (frames.size() < 2) throw DataError("detect_zones: window needs at least 2 frames");
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].index != extruded[i].index)
            throw DataError("detect_zones: windows misaligned at position " + std::to_string(i));
        if (frames[i].width != extruded[i].width || frames[i].height != extruded[i].height)
            throw DataError("detect_zones: frame and extruded frame sizes differ at position " + std::to_string(i));
    }
}

} // namespace detail

// Extruded-source zones: cells static for the whole window and at least
// min_height above the floor in every frame of it.
inline std::vector<EntityZone> detect_zones(std::span<const Frame> frames_window,
                                            std::span<const ExtrudedFrame> extruded_window,
                                            const DetectParams& params = {}) {
    detail::check_windows(frames_window, extruded_window);
    const ArenaDims dims{extruded_window.front().width, extruded_window.front().height};
    const MotionMask motion = motion_mask(extruded_window, params.epsilon_motion);
    std::vector<std::uint8_t> mask(dims.area(), 0);
    for (std::size_t p = 0; p < mask.size(); ++p) {
        if (motion.moving[p]) continue;
        bool dense = true;
        for (const auto& e : extruded_window)
            if (e.heights[p] < params.min_height) {
                dense = false;
                break;
            }
        mask[p] = dense ? 1 : 0;
    }
    return detail::zones_from_mask(dims, mask, params.min_cells, ZoneSource::extruded);
}

// Regular-source zones straight from intensities: the floor is each frame's
// (lower) median intensity.
inline std::vector<EntityZone> detect_zones_regular(std::span<const Frame> frames_window,
                                                    const DetectParams& params = {}) {
    if (frames_window.size() < 2) throw DataError("detect_zones_regular: window needs at least 2 frames");
    const ArenaDims dims = frames_window.front().dims();
    std::vector<int> floors;
    for (const Frame& f : frames_window) {
        if (f.dims() != dims) throw DataError("detect_zones_regular: window frames differ in size");
        std::vector<std::uint8_t> px = f.pixels;
        const auto mid = px.begin() + static_cast<std::ptrdiff_t>((px.size() - 1) / 2);
        std::nth_element(px.begin(), mid, px.end());
        floors.push_back(*mid);
    }
    std::vector<std::uint8_t> mask(dims.area(), 0);
    for (std::size_t p = 0; p < mask.size(); ++p) {
        bool keep = true;
        for (std::size_t t = 0; t < frames_window.size() && keep; ++t) {
            const int v = frames_window[t].pixels[p];
            if (v - floors[t] < params.min_height) keep = false;
            if (t > 0 && std::abs(v - static_cast<int>(frames_window[t - 1].pixels[p])) > params.epsilon_motion)
                keep = false;
        }
        mask[p] = keep ? 1 : 0;
    }
    return detail::zones_from_mask(dims, mask, params.min_cells, ZoneSource::regular);
}

// Summative union: zones sharing a cell (transitively) fuse into one zone with
// the union of their cells. Nothing is ever subtracted.
inline std::vector<EntityZone> merge_summative(std::span<const EntityZone> zones_a,
                                               std::span<const EntityZone> zones_b) {
    std::vector<const EntityZone*> all;
    for (const auto& z : zones_a) all.push_back(&z);
    for (const auto& z : zones_b) all.push_back(&z);

    std::vector<std::size_t> parent(all.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    std::map<Cell, std::size_t> owner;
    for (std::size_t i = 0; i < all.size(); ++i)
        for (Cell c : all[i]->cells) {
            auto [it, fresh] = owner.emplace(c, i);
            if (!fresh) parent[find(i)] = find(it->second);
        }

    struct Group {
        std::vector<Cell> cells;
        std::size_t members = 0;
        ZoneSource source = ZoneSource::merged;
        ZoneLabel label = ZoneLabel::unknown;
    };
    std::map<std::size_t, Group> groups;
    for (std::size_t i = 0; i < all.size(); ++i) {
        Group& g = groups[find(i)];
        g.cells.insert(g.cells.end(), all[i]->cells.begin(), all[i]->cells.end());
        g.source = g.members == 0 ? all[i]->source : ZoneSource::merged;
        if (g.members == 0 || label_priority(all[i]->label) < label_priority(g.label)) g.label = all[i]->label;
        ++g.members;
    }

    std::vector<EntityZone> out;
    for (auto& [root, g] : groups) {
        std::sort(g.cells.begin(), g.cells.end());
        g.cells.erase(std::unique(g.cells.begin(), g.cells.end()), g.cells.end());
        if (g.cells.empty()) continue;
        EntityZone z;
        z.centroid = centroid_half_up(g.cells);
        z.cells = std::move(g.cells);
        z.label = g.label;
        z.source = g.source;
        out.push_back(std::move(z));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.cells.front() < b.cells.front(); });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].zone_id = static_cast<int>(i);
    return out;
}

struct LabeledPoint {
    int id = 0;
    Cell cell;
    ZoneLabel label = ZoneLabel::unknown;
};

// Majority vote over the k nearest references (Euclidean). Distance ties go to
// the lower reference id, vote ties to larva > ant > unknown.
inline std::vector<ZoneLabel> knn_label(std::span<const Cell> queries, std::size_t k,
                                        std::span<const LabeledPoint> references) {
    if (k < 1) throw Error("knn_label: k must be >= 1");
    if (references.empty()) throw Error("knn_label: no reference points");
    if (k > references.size())
        throw Error("knn_label: k=" + std::to_string(k) + " exceeds reference count " +
                    std::to_string(references.size()));
    std::vector<ZoneLabel> out;
    out.reserve(queries.size());
    std::vector<std::pair<long, int>> ranked(references.size()); // (dist2, position)
    for (Cell q : queries) {
        for (std::size_t i = 0; i < references.size(); ++i)
            ranked[i] = {dist2(q, references[i].cell), static_cast<int>(i)};
        std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end(),
                          [&](const auto& a, const auto& b) {
                              if (a.first != b.first) return a.first < b.first;
                              return references[static_cast<std::size_t>(a.second)].id <
                                     references[static_cast<std::size_t>(b.second)].id;
                          });
        std::array<int, 3> votes{};
        for (std::size_t i = 0; i < k; ++i)
            ++votes[static_cast<std::size_t>(references[static_cast<std::size_t>(ranked[i].second)].label)];
        std::size_t best = 0;
        for (std::size_t l = 1; l < votes.size(); ++l)
            if (votes[l] > votes[best]) best = l;
        out.push_back(static_cast<ZoneLabel>(best));
    }
    return out;
}

// Per-frame blob centroids for tracking: components of cells at or above
// min_height, optionally ignoring cells flagged in `exclude`.
inline std::vector<Cell> blob_centroids(const ExtrudedFrame& frame, double min_height, std::size_t min_cells = 1,
                                        std::span<const std::uint8_t> exclude = {}) {
    const ArenaDims dims{frame.width, frame.height};
    std::vector<std::uint8_t> mask(dims.area(), 0);
    for (std::size_t p = 0; p < mask.size(); ++p)
        mask[p] = frame.heights[p] >= min_height && (exclude.empty() || !exclude[p]) ? 1 : 0;
    std::vector<Cell> out;
    for (const auto& comp : connected_components(dims, mask))
        if (comp.size() >= min_cells) out.push_back(centroid_half_up(comp));
    return out;
}

struct SequenceDetectParams {
    DetectParams zone;
    std::size_t window = 10;
    double persistence = 0.5;       // fraction of windows a cell must be in a zone
    double larva_persistence = 0.8; // window zones this persistent vote "larva"
    std::size_t knn_k = 3;
};

// Whole-sequence zones: per-window regular+extruded detections merged
// summatively, kept where persistent, then KNN-labelled against the window
// zones (persistent ones as larva references, transient ones as stationary ants).
inline std::vector<EntityZone> detect_sequence(std::span<const Frame> frames, std::span<const ExtrudedFrame> extruded,
                                               const SequenceDetectParams& params = {}) {
    detail::check_windows(frames, extruded);
    const ArenaDims dims{extruded.front().width, extruded.front().height};
    const std::size_t window = std::max<std::size_t>(2, std::min(params.window, frames.size()));
    const std::size_t n_windows = frames.size() / window;

    std::vector<std::vector<EntityZone>> per_window;
    std::vector<int> hits(dims.area(), 0);
    std::vector<std::uint8_t> src_bits(dims.area(), 0); // bit0 regular, bit1 extruded
    for (std::size_t w = 0; w < n_windows; ++w) {
        const auto fw = frames.subspan(w * window, window);
        const auto ew = extruded.subspan(w * window, window);
        auto zones = merge_summative(detect_zones_regular(fw, params.zone), detect_zones(fw, ew, params.zone));
        for (const auto& z : zones)
            for (Cell c : z.cells) {
                ++hits[dims.index(c)];
                src_bits[dims.index(c)] |= z.source == ZoneSource::regular    ? 1
                                           : z.source == ZoneSource::extruded ? 2
                                                                              : 3;
            }
        per_window.push_back(std::move(zones));
    }

    std::vector<std::uint8_t> persistent(dims.area(), 0);
    for (std::size_t p = 0; p < persistent.size(); ++p)
        persistent[p] = n_windows > 0 && static_cast<double>(hits[p]) >= params.persistence * n_windows ? 1 : 0;

    std::vector<EntityZone> zones;
    for (auto& comp : connected_components(dims, persistent)) {
        if (comp.size() < params.zone.min_cells) continue;
        std::uint8_t bits = 0;
        for (Cell c : comp) bits |= src_bits[dims.index(c)];
        EntityZone z;
        z.zone_id = static_cast<int>(zones.size());
        z.centroid = centroid_half_up(comp);
        z.cells = std::move(comp);
        z.source = bits == 1 ? ZoneSource::regular : bits == 2 ? ZoneSource::extruded : ZoneSource::merged;
        zones.push_back(std::move(z));
    }

    std::vector<LabeledPoint> refs;
    for (const auto& window_zones : per_window)
        for (const auto& z : window_zones) {
            double mean = 0.0;
            for (Cell c : z.cells) mean += static_cast<double>(hits[dims.index(c)]) / n_windows;
            mean /= static_cast<double>(z.cells.size());
            refs.push_back({static_cast<int>(refs.size()), z.centroid,
                            mean >= params.larva_persistence ? ZoneLabel::larva : ZoneLabel::ant});
        }
    if (!refs.empty() && !zones.empty()) {
        std::vector<Cell> queries;
        for (const auto& z : zones) queries.push_back(z.centroid);
        const auto labels = knn_label(queries, std::min(params.knn_k, refs.size()), refs);
        for (std::size_t i = 0; i < zones.size(); ++i) zones[i].label = labels[i];
    }
    return zones;
}

inline nlohmann::ordered_json zone_to_json(const EntityZone& z) {
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (Cell c : z.cells) cells.push_back({c.x, c.y});
    return {{"zone_id", z.zone_id},
            {"centroid", {z.centroid.x, z.centroid.y}},
            {"cells", cells},
            {"label", zone_label_name(z.label)},
            {"source", zone_source_name(z.source)}};
}

inline EntityZone zone_from_json(const nlohmann::json& j) {
    EntityZone z;
    z.zone_id = j.at("zone_id").get<int>();
    z.centroid = {j.at("centroid").at(0).get<int>(), j.at("centroid").at(1).get<int>()};
    for (const auto& c : j.at("cells")) z.cells.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
    z.label = parse_zone_label(j.at("label").get<std::string>());
    z.source = parse_zone_source(j.at("source").get<std::string>());
    return z;
}

inline std::string zones_to_json_text(std::span<const EntityZone> zones) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& z : zones) arr.push_back(zone_to_json(z));
    nlohmann::ordered_json doc = {{"version", 1}, {"zones", arr}};
    return doc.dump() + "\n";
}

inline std::vector<EntityZone> zones_from_json_text(std::string_view text) {
    try {
        const auto doc = nlohmann::json::parse(text);
        std::vector<EntityZone> zones;
        for (const auto& j : doc.at("zones")) zones.push_back(zone_from_json(j));
        return zones;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid zones file: ") + e.what());
    }
}

} // namespace antpred

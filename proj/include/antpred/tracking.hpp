#pragma once

// Greedy nearest-neighbour trail generation and stationary-run extraction.

#include "antpred/core.hpp"

#include "json.hpp"

#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace antpred {

struct TrackPoint {
    int frame = 0;
    Cell cell;
    bool interpolated = false;

    friend bool operator==(const TrackPoint&, const TrackPoint&) = default;
};

struct Track {
    int track_id = 0;
    std::vector<TrackPoint> points; // frames strictly increasing

    friend bool operator==(const Track&, const Track&) = default;
};

struct StationarySegment {
    int track_id = 0;
    int start_frame = 0;
    int end_frame = 0; // exclusive
    Cell anchor_cell;

    friend bool operator==(const StationarySegment&, const StationarySegment&) = default;
};

inline constexpr int kDefaultMaxStep = 3;

// Frame f of the result corresponds to blobs[f]. Track i starts at blob i of
// frame 0; afterwards each track, in ascending id, claims the nearest unclaimed
// blob within max_step (Chebyshev). Distance ties go to the earlier blob. A
// track with nothing admissible repeats its last cell, marked interpolated.
inline std::vector<Track> track_entities(std::span<const std::vector<Cell>> blobs, int n_tracks,
                                         int max_step = kDefaultMaxStep) {
    if (n_tracks < 1) throw Error("track_entities: n_tracks must be >= 1");
    if (blobs.empty() || blobs.front().size() < static_cast<std::size_t>(n_tracks))
        throw DataError("track_entities: frame 0 has " + std::to_string(blobs.empty() ? 0 : blobs.front().size()) +
                        " blobs, need " + std::to_string(n_tracks));
    std::vector<Track> tracks(static_cast<std::size_t>(n_tracks));
    for (int i = 0; i < n_tracks; ++i) {
        tracks[static_cast<std::size_t>(i)].track_id = i;
        tracks[static_cast<std::size_t>(i)].points.push_back({0, blobs.front()[static_cast<std::size_t>(i)], false});
    }
    for (std::size_t f = 1; f < blobs.size(); ++f) {
        const auto& frame_blobs = blobs[f];
        std::vector<char> claimed(frame_blobs.size(), 0);
        for (auto& track : tracks) {
            const Cell last = track.points.back().cell;
            std::size_t best = frame_blobs.size();
            long best_d = std::numeric_limits<long>::max();
            for (std::size_t b = 0; b < frame_blobs.size(); ++b) {
                if (claimed[b] || chebyshev(last, frame_blobs[b]) > max_step) continue;
                const long d = dist2(last, frame_blobs[b]);
                if (d < best_d) {
                    best_d = d;
                    best = b;
                }
            }
            if (best < frame_blobs.size()) {
                claimed[best] = 1;
                track.points.push_back({static_cast<int>(f), frame_blobs[best], false});
            } else {
                track.points.push_back({static_cast<int>(f), last, true});
            }
        }
    }
    return tracks;
}

// Left-to-right scan: a run is anchored at its first point and extends while
// points stay within Chebyshev eps of the anchor. Runs of at least min_len
// points are emitted and the scan resumes after them; otherwise the anchor
// advances by one.
inline std::vector<StationarySegment> stationary_segments(const Track& track, int eps, std::size_t min_len) {
    std::vector<StationarySegment> out;
    const auto& pts = track.points;
    std::size_t i = 0;
    while (i < pts.size()) {
        std::size_t j = i + 1;
        while (j < pts.size() && chebyshev(pts[j].cell, pts[i].cell) <= eps) ++j;
        if (j - i >= min_len && min_len > 0) {
            out.push_back({track.track_id, pts[i].frame, pts[j - 1].frame + 1, pts[i].cell});
            i = j;
        } else {
            ++i;
        }
    }
    return out;
}

// {"track":int,"frame":int,"x":int,"y":int,"interpolated":bool} per line.
inline std::string tracks_to_jsonl(std::span<const Track> tracks) {
    std::string out;
    for (const auto& t : tracks)
        for (const auto& p : t.points) {
            nlohmann::ordered_json j = {{"track", t.track_id},
                                        {"frame", p.frame},
                                        {"x", p.cell.x},
                                        {"y", p.cell.y},
                                        {"interpolated", p.interpolated}};
            out += j.dump();
            out += '\n';
        }
    return out;
}

inline std::vector<Track> tracks_from_jsonl(std::string_view text) {
    std::map<int, Track> by_id;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        const auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            Track& t = by_id[j.at("track").get<int>()];
            t.track_id = j.at("track").get<int>();
            TrackPoint p{j.at("frame").get<int>(), {j.at("x").get<int>(), j.at("y").get<int>()},
                         j.at("interpolated").get<bool>()};
            if (!t.points.empty() && p.frame <= t.points.back().frame)
                throw DataError("tracks line " + std::to_string(line_no) + ": frames must increase per track");
            t.points.push_back(p);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("tracks line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    std::vector<Track> out;
    for (auto& [id, t] : by_id) out.push_back(std::move(t));
    return out;
}

} // namespace antpred

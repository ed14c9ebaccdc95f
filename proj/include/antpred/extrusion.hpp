#pragma once

// Extrusion: flat intensity frames become height fields rising from the
// background floor. One grid cell per pixel, no smoothing.

#include "antpred/core.hpp"
#include "antpred/frame_store.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <span>
#include <vector>

namespace antpred {

struct BackgroundModel {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> intensity;

    std::uint8_t at(int x, int y) const { return intensity[static_cast<std::size_t>(y) * width + x]; }
    Frame as_frame() const {
        Frame f(width, height);
        f.pixels = intensity;
        return f;
    }
};

struct ExtrudedFrame {
    int width = 0;
    int height = 0;
    std::vector<double> heights; // >= 0
    int index = 0;

    double at(int x, int y) const { return heights[static_cast<std::size_t>(y) * width + x]; }
    double max_height() const {
        return heights.empty() ? 0.0 : *std::max_element(heights.begin(), heights.end());
    }
    friend bool operator==(const ExtrudedFrame&, const ExtrudedFrame&) = default;
};

// Per-pixel median. For an even frame count the lower median is used so the
// background stays an exact intensity value.
inline BackgroundModel estimate_background(std::span<const Frame> frames) {
    if (frames.empty()) throw DataError("estimate_background: empty sequence");
    const int w = frames.front().width;
    const int h = frames.front().height;
    BackgroundModel bg{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h)};
    std::vector<std::uint8_t> column(frames.size());
    for (std::size_t p = 0; p < bg.intensity.size(); ++p) {
        for (std::size_t t = 0; t < frames.size(); ++t) {
            if (frames[t].width != w || frames[t].height != h)
                throw DataError("estimate_background: frame " + std::to_string(t) + " has mismatched dimensions");
            column[t] = frames[t].pixels[p];
        }
        const auto mid = column.begin() + static_cast<std::ptrdiff_t>((column.size() - 1) / 2);
        std::nth_element(column.begin(), mid, column.end());
        bg.intensity[p] = *mid;
    }
    return bg;
}

inline ExtrudedFrame extrude(const Frame& frame, const BackgroundModel& background) {
    if (frame.width != background.width || frame.height != background.height)
        throw DataError("extrude: frame " + std::to_string(frame.index) + " does not match background dimensions");
    ExtrudedFrame out{frame.width, frame.height, std::vector<double>(frame.pixels.size()), frame.index};
    for (std::size_t p = 0; p < frame.pixels.size(); ++p) {
        const int diff = static_cast<int>(frame.pixels[p]) - static_cast<int>(background.intensity[p]);
        out.heights[p] = diff > 0 ? static_cast<double>(diff) : 0.0;
    }
    return out;
}

struct MotionMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> moving; // 1 = moving

    bool is_moving(int x, int y) const { return moving[static_cast<std::size_t>(y) * width + x] != 0; }
};

inline constexpr double kDefaultMotionEpsilon = 2.0;

// A cell moves iff some consecutive pair differs by more than epsilon.
inline MotionMask motion_mask(std::span<const ExtrudedFrame> window, double epsilon = kDefaultMotionEpsilon) {
    if (window.size() < 2) throw DataError("motion_mask: window needs at least 2 frames");
    const int w = window.front().width;
    const int h = window.front().height;
    for (const auto& f : window)
        if (f.width != w || f.height != h) throw DataError("motion_mask: window frames differ in size");
    MotionMask mask{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 0)};
    for (std::size_t t = 1; t < window.size(); ++t)
        for (std::size_t p = 0; p < mask.moving.size(); ++p)
            if (std::abs(window[t].heights[p] - window[t - 1].heights[p]) > epsilon) mask.moving[p] = 1;
    return mask;
}

// Persisted as a PGM of the clamped heights plus a "<name>.json" sidecar
// carrying max_height. Heights from 8-bit input never exceed 255, so the
// clamp is lossless in practice; the sidecar lets readers detect otherwise.
inline Frame extruded_to_pgm(const ExtrudedFrame& e) {
    Frame f(e.width, e.height, 0, e.index);
    for (std::size_t p = 0; p < e.heights.size(); ++p)
        f.pixels[p] = static_cast<std::uint8_t>(std::clamp(std::lround(e.heights[p]), 0L, 255L));
    return f;
}

inline void write_extruded(const std::filesystem::path& pgm_path, const ExtrudedFrame& e) {
    write_pgm(pgm_path, extruded_to_pgm(e));
    nlohmann::json sidecar = {{"max_height", e.max_height()}};
    write_file_bytes(pgm_path.string() + ".json", sidecar.dump() + "\n");
}

inline ExtrudedFrame read_extruded(const std::filesystem::path& pgm_path) {
    const Frame f = read_pgm(pgm_path);
    ExtrudedFrame e{f.width, f.height, std::vector<double>(f.pixels.begin(), f.pixels.end()), f.index};
    const auto sidecar_path = pgm_path.string() + ".json";
    if (std::filesystem::exists(sidecar_path)) {
        const double max_h = nlohmann::json::parse(read_file_bytes(sidecar_path)).at("max_height").get<double>();
        if (max_h > 255.0)
            throw DataError(pgm_path.string() + ": heights exceed the 8-bit range (max " + std::to_string(max_h) + ")");
    }
    return e;
}

} // namespace antpred

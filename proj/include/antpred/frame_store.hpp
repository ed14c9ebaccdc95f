#pragma once

// Frames on disk: binary PGM (P5, maxval 255) plus a JSON manifest
// {"fps","width","height","frames":[relative paths]}.

#include "antpred/core.hpp"

#include "json.hpp"

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <span>
#include <string>
#include <vector>

namespace antpred {

struct Frame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels; // row-major
    int index = 0;

    Frame() = default;
    Frame(int w, int h, std::uint8_t fill = 0, int idx = 0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill), index(idx) {}

    ArenaDims dims() const { return {width, height}; }
    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

    friend bool operator==(const Frame&, const Frame&) = default;
};

struct SequenceManifest {
    int fps = 0;
    int width = 0;
    int height = 0;
    std::vector<std::string> frame_paths;
};

inline std::string encode_pgm(const Frame& f) {
    std::string out = "P5\n" + std::to_string(f.width) + " " + std::to_string(f.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(f.pixels.data()), f.pixels.size());
    return out;
}

inline Frame decode_pgm(std::string_view bytes, const std::string& what = "<memory>") {
    std::size_t pos = 0;
    auto skip_ws_and_comments = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&]() -> int {
        skip_ws_and_comments();
        const std::size_t start = pos;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (start == pos) throw DataError(what + ": malformed PGM header");
        return std::stoi(std::string(bytes.substr(start, pos - start)));
    };
    if (bytes.size() < 2 || bytes.substr(0, 2) != "P5")
        throw DataError(what + ": not a binary PGM (P5) file");
    pos = 2;
    const int w = read_int();
    const int h = read_int();
    const int maxval = read_int();
    if (maxval != 255) throw DataError(what + ": only maxval 255 is supported");
    ++pos; // exactly one whitespace byte before the raster
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (bytes.size() - pos < n) throw DataError(what + ": truncated PGM raster");
    Frame f(w, h);
    std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
              bytes.begin() + static_cast<std::ptrdiff_t>(pos + n), f.pixels.begin());
    return f;
}

inline std::string read_file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw MissingArtifact(p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file_bytes(const std::filesystem::path& p, std::string_view bytes) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + p.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline Frame read_pgm(const std::filesystem::path& p) {
    return decode_pgm(read_file_bytes(p), p.string());
}

inline void write_pgm(const std::filesystem::path& p, const Frame& f) {
    write_file_bytes(p, encode_pgm(f));
}

inline SequenceManifest read_manifest(const std::filesystem::path& p) {
    const std::string text = read_file_bytes(p);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        SequenceManifest m;
        m.fps = j.at("fps").get<int>();
        m.width = j.at("width").get<int>();
        m.height = j.at("height").get<int>();
        m.frame_paths = j.at("frames").get<std::vector<std::string>>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(p.string() + ": invalid manifest: " + e.what());
    }
}

inline void write_manifest(const std::filesystem::path& p, const SequenceManifest& m) {
    nlohmann::json j = {
        {"fps", m.fps}, {"width", m.width}, {"height", m.height}, {"frames", m.frame_paths}};
    write_file_bytes(p, j.dump(2) + "\n");
}

// Frame paths in the manifest are resolved relative to the manifest's directory.
inline std::vector<Frame> load_sequence(const std::filesystem::path& manifest_path) {
    const SequenceManifest m = read_manifest(manifest_path);
    const auto base = manifest_path.parent_path();
    std::vector<Frame> frames;
    frames.reserve(m.frame_paths.size());
    for (std::size_t i = 0; i < m.frame_paths.size(); ++i) {
        const auto path = base / m.frame_paths[i];
        if (!std::filesystem::exists(path))
            throw DataError("frame " + std::to_string(i) + " (" + m.frame_paths[i] + "): file not found");
        Frame f = read_pgm(path);
        if (f.width != m.width || f.height != m.height)
            throw DataError("frame " + std::to_string(i) + " (" + m.frame_paths[i] +
                            "): dimension mismatch, expected " + std::to_string(m.width) + "x" +
                            std::to_string(m.height) + ", got " + std::to_string(f.width) + "x" +
                            std::to_string(f.height));
        f.index = static_cast<int>(i);
        frames.push_back(std::move(f));
    }
    return frames;
}

// Writes <dir>/frame_NNNNNN.pgm for every frame and <dir>/manifest.json.
inline SequenceManifest save_sequence(const std::filesystem::path& dir, std::span<const Frame> frames,
                                      int fps) {
    std::filesystem::create_directories(dir);
    SequenceManifest m;
    m.fps = fps;
    if (!frames.empty()) {
        m.width = frames.front().width;
        m.height = frames.front().height;
    }
    for (std::size_t i = 0; i < frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%06zu.pgm", i);
        write_pgm(dir / name, frames[i]);
        m.frame_paths.emplace_back(name);
    }
    write_manifest(dir / "manifest.json", m);
    return m;
}

// Drop-1-keep-2: input positions 2, 5, 8, ... are removed.
inline std::vector<Frame> skip_frames(std::span<const Frame> frames) {
    std::vector<Frame> out;
    out.reserve(frames.size() - frames.size() / 3);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (i % 3 == 2) continue;
        Frame f = frames[i];
        f.index = static_cast<int>(out.size());
        out.push_back(std::move(f));
    }
    return out;
}

// Decimation only; keeps every (source/target)-th frame starting at 0.
inline std::vector<Frame> standardize_rate(std::span<const Frame> frames, int source_fps, int target_fps) {
    if (source_fps <= 0 || target_fps <= 0)
        throw ConfigError("frame rates must be positive");
    if (target_fps > source_fps)
        throw ConfigError("target fps " + std::to_string(target_fps) + " exceeds source fps " +
                          std::to_string(source_fps));
    if (source_fps % target_fps != 0)
        throw ConfigError("source fps " + std::to_string(source_fps) + " is not divisible by target fps " +
                          std::to_string(target_fps));
    const std::size_t stride = static_cast<std::size_t>(source_fps / target_fps);
    std::vector<Frame> out;
    for (std::size_t i = 0; i < frames.size(); i += stride) {
        Frame f = frames[i];
        f.index = static_cast<int>(out.size());
        out.push_back(std::move(f));
    }
    return out;
}

} // namespace antpred

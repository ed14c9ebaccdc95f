#include "antpred/frame_store.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>

using namespace antpred;
namespace fs = std::filesystem;

namespace {

std::vector<Frame> numbered(std::size_t n, int w = 4, int h = 3) {
    std::vector<Frame> out;
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(w, h, static_cast<std::uint8_t>(i % 256), static_cast<int>(i));
    return out;
}

fs::path temp_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("antpred_fs_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace

TEST(Pgm, EncodeDecodeRoundTrip) {
    Frame f(5, 3);
    for (std::size_t i = 0; i < f.pixels.size(); ++i) f.pixels[i] = static_cast<std::uint8_t>(i * 17);
    const auto bytes = encode_pgm(f);
    EXPECT_EQ(bytes.substr(0, 2), "P5");
    EXPECT_EQ(decode_pgm(bytes), f);
}

TEST(Pgm, DecodeSkipsComments) {
    const std::string bytes = std::string("P5\n# a comment\n2 1\n255\n") + '\x07' + '\x08';
    const Frame f = decode_pgm(bytes);
    EXPECT_EQ(f.width, 2);
    EXPECT_EQ(f.at(1, 0), 8);
}

TEST(Pgm, RejectsTruncatedAndForeignFormats) {
    EXPECT_THROW(decode_pgm("P5\n2 2\n255\n\x01"), DataError);
    EXPECT_THROW(decode_pgm("P2\n1 1\n255\n1"), DataError);
    EXPECT_THROW(decode_pgm("P5\n1 1\n65535\n\x01\x01"), DataError);
}

TEST(Sequence, LoadsThreeFramesWithIndices) {
    const auto dir = temp_dir("three");
    save_sequence(dir, numbered(3), 30);
    const auto frames = load_sequence(dir / "manifest.json");
    ASSERT_EQ(frames.size(), 3u);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(frames[static_cast<std::size_t>(i)].index, i);
}

TEST(Sequence, DimensionMismatchNamesTheFrame) {
    const auto dir = temp_dir("mismatch");
    std::vector<Frame> frames = {Frame(20, 20), Frame(10, 10), Frame(20, 20)};
    save_sequence(dir, frames, 30);
    SequenceManifest m = read_manifest(dir / "manifest.json");
    m.width = 20;
    m.height = 20;
    write_manifest(dir / "manifest.json", m);
    try {
        load_sequence(dir / "manifest.json");
        FAIL() << "expected a dimension mismatch";
    } catch (const DataError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("frame 1"), std::string::npos) << msg;
        EXPECT_NE(msg.find("dimension mismatch"), std::string::npos) << msg;
    }
}

TEST(Sequence, MissingFrameFileIsAnError) {
    const auto dir = temp_dir("missing");
    save_sequence(dir, numbered(2), 30);
    fs::remove(dir / "frame_000001.pgm");
    EXPECT_THROW(load_sequence(dir / "manifest.json"), DataError);
}

TEST(Sequence, MissingManifestIsMissingArtifact) {
    const auto dir = temp_dir("nomanifest");
    EXPECT_THROW(load_sequence(dir / "manifest.json"), MissingArtifact);
}

TEST(Sequence, EmptyListLoadsEmpty) {
    const auto dir = temp_dir("empty");
    save_sequence(dir, std::vector<Frame>{}, 30);
    EXPECT_TRUE(load_sequence(dir / "manifest.json").empty());
}

TEST(Sequence, SaveLoadSaveIsBitExact) {
    const auto a = temp_dir("rt_a");
    const auto b = temp_dir("rt_b");
    auto frames = numbered(7, 9, 5);
    frames[3].at(2, 2) = 255;
    save_sequence(a, frames, 30);
    const auto loaded = load_sequence(a / "manifest.json");
    EXPECT_EQ(loaded, frames);
    save_sequence(b, loaded, 30);
    for (const auto& entry : fs::directory_iterator(a))
        EXPECT_EQ(read_file_bytes(entry.path()), read_file_bytes(b / entry.path().filename()));
}

TEST(Skip, FiftyFourHundredBecomeThirtySixHundred) {
    const auto frames = numbered(5400, 2, 2);
    const auto t0 = std::chrono::steady_clock::now();
    const auto kept = skip_frames(frames);
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_EQ(kept.size(), 3600u);
    EXPECT_LT(elapsed, 1.0);
}

TEST(Skip, ThreeFramesKeepTheFirstTwo) {
    const auto kept = skip_frames(numbered(3));
    ASSERT_EQ(kept.size(), 2u);
    EXPECT_EQ(kept[0].pixels[0], 0);
    EXPECT_EQ(kept[1].pixels[0], 1);
}

TEST(Skip, EmptyStaysEmpty) { EXPECT_TRUE(skip_frames(std::vector<Frame>{}).empty()); }

TEST(Skip, RemovesFloorThirdAndKeepsOrder) {
    for (std::size_t n = 0; n < 50; ++n) {
        const auto kept = skip_frames(numbered(n));
        EXPECT_EQ(kept.size(), n - n / 3);
        for (std::size_t i = 0; i < kept.size(); ++i) {
            EXPECT_EQ(kept[i].index, static_cast<int>(i));
            if (i > 0) EXPECT_LT(kept[i - 1].pixels[0], kept[i].pixels[0]);
            EXPECT_NE(kept[i].pixels[0] % 3, 2);
        }
    }
}

TEST(Standardize, SameRateIsIdentity) {
    const auto frames = numbered(10);
    EXPECT_EQ(standardize_rate(frames, 30, 30), frames);
}

TEST(Standardize, ThirtyToTenKeepsEveryThird) {
    const auto kept = standardize_rate(numbered(9), 30, 10);
    ASSERT_EQ(kept.size(), 3u);
    EXPECT_EQ(kept[0].pixels[0], 0);
    EXPECT_EQ(kept[1].pixels[0], 3);
    EXPECT_EQ(kept[2].pixels[0], 6);
}

TEST(Standardize, NonDivisibleRateIsAnError) {
    EXPECT_THROW(standardize_rate(numbered(9), 30, 7), ConfigError);
    EXPECT_THROW(standardize_rate(numbered(9), 30, 60), ConfigError);
}

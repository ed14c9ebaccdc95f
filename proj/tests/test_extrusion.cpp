#include "antpred/extrusion.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace antpred;

namespace {

Frame filled(int w, int h, std::uint8_t v, int idx = 0) { return Frame(w, h, v, idx); }

ExtrudedFrame heights(int w, int h, std::vector<double> v, int idx = 0) { return {w, h, std::move(v), idx}; }

} // namespace

TEST(Extrusion, MedianOfThreeIgnoresTheOutlier) {
    const std::vector<Frame> frames = {filled(2, 2, 40), filled(2, 2, 40), filled(2, 2, 200)};
    const auto bg = estimate_background(frames);
    for (auto v : bg.intensity) EXPECT_EQ(v, 40);
}

TEST(Extrusion, EvenCountsUseTheLowerMedian) {
    const std::vector<Frame> frames = {filled(1, 1, 10), filled(1, 1, 20), filled(1, 1, 30), filled(1, 1, 40)};
    EXPECT_EQ(estimate_background(frames).intensity[0], 20);
}

TEST(Extrusion, BackgroundMatchesSortOracle) {
    Rng rng(4);
    std::vector<Frame> frames;
    for (int t = 0; t < 11; ++t) {
        Frame f(7, 5, 0, t);
        for (auto& px : f.pixels) px = static_cast<std::uint8_t>(uniform_below(rng, 256));
        frames.push_back(f);
    }
    const auto bg = estimate_background(frames);
    for (std::size_t p = 0; p < bg.intensity.size(); ++p) {
        std::vector<std::uint8_t> col;
        for (const auto& f : frames) col.push_back(f.pixels[p]);
        EXPECT_EQ(bg.intensity[p], oracle::median(col));
    }
}

TEST(Extrusion, EmptyOrMismatchedInputIsAnError) {
    EXPECT_THROW(estimate_background(std::vector<Frame>{}), DataError);
    const std::vector<Frame> frames = {filled(2, 2, 1), filled(3, 2, 1)};
    EXPECT_THROW(estimate_background(frames), DataError);
    const auto bg = estimate_background(std::vector<Frame>{filled(2, 2, 1)});
    EXPECT_THROW(extrude(filled(3, 3, 1), bg), DataError);
}

TEST(Extrusion, HeightsAreClampedDifferencesAndSumMatchesOracle) {
    Rng rng(8);
    Frame bgf(9, 9), f(9, 9);
    for (auto& px : bgf.pixels) px = static_cast<std::uint8_t>(uniform_below(rng, 256));
    for (auto& px : f.pixels) px = static_cast<std::uint8_t>(uniform_below(rng, 256));
    const auto bg = estimate_background(std::vector<Frame>{bgf});
    const auto e = extrude(f, bg);
    double sum = 0;
    for (double h : e.heights) {
        EXPECT_GE(h, 0.0);
        sum += h;
    }
    EXPECT_EQ(static_cast<long long>(sum), oracle::extrusion_sum(f.pixels, bgf.pixels));
}

TEST(Extrusion, BackgroundFrameExtrudesToZero) {
    const std::vector<Frame> frames = {filled(4, 4, 40), filled(4, 4, 40), filled(4, 4, 40)};
    const auto bg = estimate_background(frames);
    for (double h : extrude(frames[0], bg).heights) EXPECT_EQ(h, 0.0);
}

TEST(Motion, MatchesPairwiseOracleOnRandomWindows) {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<ExtrudedFrame> window;
        std::vector<std::vector<double>> raw;
        for (int t = 0; t < 10; ++t) {
            std::vector<double> h(16 * 16);
            for (auto& v : h) v = uniform_below(rng, 4) == 0 ? static_cast<double>(uniform_below(rng, 6)) : 0.0;
            raw.push_back(h);
            window.push_back(heights(16, 16, h, t));
        }
        const auto mask = motion_mask(window, 2.0);
        EXPECT_EQ(mask.moving, oracle::motion(raw, 2.0));
    }
}

TEST(Motion, DifferenceEqualToEpsilonIsNotMotion) {
    const std::vector<ExtrudedFrame> w = {heights(1, 1, {0.0}), heights(1, 1, {2.0}), heights(1, 1, {4.5})};
    EXPECT_FALSE(motion_mask(std::span(w).first(2), 2.0).is_moving(0, 0));
    EXPECT_TRUE(motion_mask(w, 2.0).is_moving(0, 0));
}

TEST(Motion, ShortOrMismatchedWindowsAreErrors) {
    const std::vector<ExtrudedFrame> one = {heights(1, 1, {0.0})};
    EXPECT_THROW(motion_mask(one), DataError);
    const std::vector<ExtrudedFrame> bad = {heights(1, 1, {0.0}), heights(2, 1, {0.0, 0.0})};
    EXPECT_THROW(motion_mask(bad), DataError);
}

TEST(Extrusion, PersistedHeightsRoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "antpred_extrusion_rt";
    std::filesystem::create_directories(dir);
    const auto e = heights(3, 2, {0, 1, 2, 160, 255, 7}, 4);
    write_extruded(dir / "e.pgm", e);
    auto back = read_extruded(dir / "e.pgm");
    back.index = 4;
    EXPECT_EQ(back, e);
}

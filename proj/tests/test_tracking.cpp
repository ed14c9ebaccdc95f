#include "antpred/colony_sim.hpp"
#include "antpred/detection.hpp"
#include "antpred/extrusion.hpp"
#include "antpred/tracking.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace antpred;

TEST(Tracking, LinearBlobIsFollowedExactly) {
    std::vector<std::vector<Cell>> blobs;
    for (int t = 0; t < 30; ++t) blobs.push_back({{2 + t, 7}});
    const auto tracks = track_entities(blobs, 1);
    ASSERT_EQ(tracks.size(), 1u);
    ASSERT_EQ(tracks[0].points.size(), 30u);
    for (int t = 0; t < 30; ++t) {
        EXPECT_EQ(tracks[0].points[static_cast<std::size_t>(t)].cell, (Cell{2 + t, 7}));
        EXPECT_FALSE(tracks[0].points[static_cast<std::size_t>(t)].interpolated);
    }
}

TEST(Tracking, CrossingBlobsKeepTheirIdentities) {
    // A runs right along y = 0, B runs left along y = 5; the list order flips halfway.
    std::vector<std::vector<Cell>> blobs;
    for (int t = 0; t < 20; ++t) {
        const Cell a{t, 0}, b{19 - t, 5};
        blobs.push_back(t < 10 ? std::vector<Cell>{a, b} : std::vector<Cell>{b, a});
    }
    const auto tracks = track_entities(blobs, 2);
    for (int t = 0; t < 20; ++t) {
        EXPECT_EQ(tracks[0].points[static_cast<std::size_t>(t)].cell, (Cell{t, 0}));
        EXPECT_EQ(tracks[1].points[static_cast<std::size_t>(t)].cell, (Cell{19 - t, 5}));
    }
}

TEST(Tracking, VanishingBlobCoastsThenReattaches) {
    const std::vector<std::vector<Cell>> blobs = {{{5, 5}}, {{6, 5}}, {}, {{7, 6}}};
    const auto t = track_entities(blobs, 1).front();
    ASSERT_EQ(t.points.size(), 4u);
    EXPECT_TRUE(t.points[2].interpolated);
    EXPECT_EQ(t.points[2].cell, (Cell{6, 5}));
    EXPECT_EQ(t.points[3].cell, (Cell{7, 6}));
    EXPECT_FALSE(t.points[3].interpolated);
}

TEST(Tracking, FarJumpsAreNotClaimed) {
    const std::vector<std::vector<Cell>> blobs = {{{0, 0}}, {{4, 0}}};
    const auto t = track_entities(blobs, 1, 3).front();
    EXPECT_TRUE(t.points[1].interpolated);
    EXPECT_EQ(track_entities(blobs, 1, 4).front().points[1].cell, (Cell{4, 0}));
}

TEST(Tracking, TooFewBlobsInFrameZeroIsAnError) {
    const std::vector<std::vector<Cell>> blobs = {{{0, 0}}};
    EXPECT_THROW(track_entities(blobs, 2), DataError);
    EXPECT_THROW(track_entities(std::vector<std::vector<Cell>>{}, 1), DataError);
    EXPECT_THROW(track_entities(blobs, 0), Error);
}

TEST(Tracking, StepBoundHoldsOnRandomInput) {
    Rng rng(17);
    std::vector<std::vector<Cell>> blobs(60);
    for (auto& f : blobs)
        for (int i = 0; i < 5; ++i)
            f.push_back({static_cast<int>(uniform_below(rng, 12)), static_cast<int>(uniform_below(rng, 12))});
    const auto a = track_entities(blobs, 3);
    for (const auto& t : a)
        for (std::size_t i = 1; i < t.points.size(); ++i) {
            EXPECT_EQ(t.points[i].frame, t.points[i - 1].frame + 1);
            EXPECT_LE(chebyshev(t.points[i].cell, t.points[i - 1].cell), kDefaultMaxStep);
        }
    const auto b = track_entities(blobs, 3);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].points, b[i].points);
}

TEST(Stationary, ConstantTrackIsOneSegment) {
    Track t;
    for (int f = 0; f < 20; ++f) t.points.push_back({f, {3, 3}, false});
    const auto segs = stationary_segments(t, 1, 10);
    ASSERT_EQ(segs.size(), 1u);
    EXPECT_EQ(segs[0].start_frame, 0);
    EXPECT_EQ(segs[0].end_frame, 20);
    EXPECT_EQ(segs[0].anchor_cell, (Cell{3, 3}));
}

TEST(Stationary, MovingTrackHasNoSegments) {
    Track t;
    for (int f = 0; f < 40; ++f) t.points.push_back({f, {2 * f, 0}, false});
    EXPECT_TRUE(stationary_segments(t, 1, 10).empty());
}

TEST(Stationary, MatchesRunEnumerationOracle) {
    Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        Track t;
        std::vector<Cell> pts;
        Cell c{10, 10};
        const int n = 5 + static_cast<int>(uniform_below(rng, 60));
        for (int f = 0; f < n; ++f) {
            if (uniform_below(rng, 4) == 0) c = apply(c, kAllMoves[uniform_below(rng, kMoveCount)]);
            pts.push_back(c);
            t.points.push_back({f, c, false});
        }
        const int eps = static_cast<int>(uniform_below(rng, 3));
        const std::size_t min_len = 2 + uniform_below(rng, 8);
        const auto segs = stationary_segments(t, eps, min_len);
        const auto runs = oracle::stationary_runs(pts, eps, min_len);
        ASSERT_EQ(segs.size(), runs.size());
        for (std::size_t i = 0; i < runs.size(); ++i) {
            EXPECT_EQ(segs[i].start_frame, static_cast<int>(runs[i].begin));
            EXPECT_EQ(segs[i].end_frame, static_cast<int>(runs[i].end));
            EXPECT_EQ(segs[i].anchor_cell, pts[runs[i].begin]);
        }
    }
}

TEST(Tracking, JsonlRoundTrips) {
    const std::vector<std::vector<Cell>> blobs = {{{5, 5}, {1, 1}}, {{6, 5}}, {{7, 6}, {1, 2}}};
    const auto tracks = track_entities(blobs, 2);
    const auto back = tracks_from_jsonl(tracks_to_jsonl(tracks));
    ASSERT_EQ(back.size(), tracks.size());
    for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(back[i].points, tracks[i].points);
}

// Two ants in opposite corners of a large arena never come close, so every
// frame has two clean blobs.
TEST(Tracking, WellSeparatedAntsTrackWithinOneCell) {
    ScenarioConfig c;
    c.arena_width = 96;
    c.arena_height = 96;
    c.n_ants = 0;
    c.n_frames = 150;
    c.attraction_strength = 0.0;
    SimState s;
    s.rng.seed(4);
    s.agents = {{0, AgentKind::ant, {20, 20}, true}, {1, AgentKind::ant, {75, 75}, true}};
    std::vector<Frame> frames;
    std::vector<std::vector<Cell>> truth;
    for (int t = 0; t < c.n_frames; ++t) {
        frames.push_back(render_frame(s, c));
        truth.push_back({s.agents[0].position, s.agents[1].position});
        if (t + 1 < c.n_frames) s = step(s, c);
    }
    for (const auto& pos : truth) ASSERT_GT(chebyshev(pos[0], pos[1]), 6);
    const auto bg = estimate_background(frames);
    std::vector<std::vector<Cell>> blobs;
    for (const auto& f : frames) blobs.push_back(blob_centroids(extrude(f, bg), 80.0, 3));
    const auto tracks = track_entities(blobs, 2);
    double total = 0;
    std::size_t n = 0;
    for (const auto& tr : tracks) {
        const std::size_t ant = chebyshev(tr.points[0].cell, truth[0][0]) <= 1 ? 0 : 1;
        for (const auto& p : tr.points) {
            const Cell g = truth[static_cast<std::size_t>(p.frame)][ant];
            total += std::sqrt(static_cast<double>(dist2(p.cell, g)));
            ++n;
        }
    }
    EXPECT_LE(total / static_cast<double>(n), 1.0);
}

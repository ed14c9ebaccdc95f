#include "antpred/colony_sim.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include <set>

using namespace antpred;

namespace {

ScenarioConfig lone_ant(double strength = 0.5) {
    ScenarioConfig c;
    c.arena_width = 200;
    c.arena_height = 200;
    c.n_ants = 1;
    c.attraction_strength = strength;
    c.n_frames = 1'000'000;
    c.rng_seed = 11;
    return c;
}

} // namespace

TEST(ColonySim, ScenarioNamesRoundTrip) {
    for (auto k : {ScenarioKind::foreign_entity, ScenarioKind::larval_foreign, ScenarioKind::larval_local,
                   ScenarioKind::mature_foreign, ScenarioKind::combined})
        EXPECT_EQ(parse_scenario(scenario_name(k)), k);
    EXPECT_EQ(parse_scenario("1"), ScenarioKind::foreign_entity);
    EXPECT_THROW(parse_scenario("martian"), ConfigError);
}

TEST(ColonySim, ScenarioOneHasOneForeignAgentAndNoLarvae) {
    auto c = ScenarioConfig::preset(ScenarioKind::foreign_entity);
    const auto s = init_scenario(c);
    int foreign = 0, larvae = 0;
    for (const auto& a : s.agents) {
        foreign += a.kind == AgentKind::foreign;
        larvae += a.kind == AgentKind::larva;
    }
    EXPECT_EQ(foreign, 1);
    EXPECT_EQ(larvae, 0);
}

TEST(ColonySim, InitPlacesAgentsOnDistinctCellsInsideTheArena) {
    auto c = ScenarioConfig::preset(ScenarioKind::combined);
    c.n_larvae = 12;
    const auto s = init_scenario(c);
    ASSERT_EQ(static_cast<int>(s.agents.size()), c.agent_count());
    std::set<std::pair<int, int>> cells;
    for (std::size_t i = 0; i < s.agents.size(); ++i) {
        EXPECT_EQ(s.agents[i].id, static_cast<int>(i));
        EXPECT_TRUE(c.dims().contains(s.agents[i].position));
        cells.insert({s.agents[i].position.x, s.agents[i].position.y});
        EXPECT_EQ(s.agents[i].mobile, s.agents[i].kind != AgentKind::larva);
    }
    EXPECT_EQ(cells.size(), s.agents.size());
}

TEST(ColonySim, TooManyAgentsIsAConfigError) {
    ScenarioConfig c;
    c.arena_width = 8;
    c.arena_height = 8;
    c.n_ants = 65;
    EXPECT_THROW(init_scenario(c), ConfigError);
}

TEST(ColonySim, InvalidConfigsAreRejected) {
    ScenarioConfig c;
    c.attraction_strength = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = ScenarioConfig{};
    c.blob_intensity = 30;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ColonySim, EmptyColonyRendersBackgroundOnly) {
    ScenarioConfig c;
    c.n_ants = 0;
    c.n_frames = 3;
    const auto run = simulate(c);
    ASSERT_EQ(run.frames.size(), 3u);
    for (const auto& f : run.frames)
        for (auto px : f.pixels) EXPECT_EQ(px, c.background_intensity);
}

TEST(ColonySim, SingleAgentRendersNinePixels) {
    ScenarioConfig c;
    c.n_ants = 1;
    const auto s = init_scenario(c);
    const auto f = render_frame(s, c);
    int bright = 0;
    for (auto px : f.pixels) bright += px == c.blob_intensity;
    const Cell p = s.agents[0].position;
    const bool interior = p.x > 0 && p.y > 0 && p.x < c.arena_width - 1 && p.y < c.arena_height - 1;
    if (interior) EXPECT_EQ(bright, 9);
    EXPECT_EQ(f.at(p.x, p.y), c.blob_intensity);
}

TEST(ColonySim, SameCellAgentsRenderAsOneBlob) {
    ScenarioConfig c;
    SimState s;
    s.agents = {{0, AgentKind::ant, {10, 10}, true}, {1, AgentKind::ant, {10, 10}, true}};
    const auto f = render_frame(s, c);
    int bright = 0;
    for (auto px : f.pixels) bright += px == c.blob_intensity;
    EXPECT_EQ(bright, 9);
}

TEST(ColonySim, BorderStampIsClipped) {
    ScenarioConfig c;
    SimState s;
    s.agents = {{0, AgentKind::ant, {0, 0}, true}};
    const auto f = render_frame(s, c);
    int bright = 0;
    for (auto px : f.pixels) bright += px == c.blob_intensity;
    EXPECT_EQ(bright, 4);
}

TEST(ColonySim, SameSeedSameRun) {
    auto c = ScenarioConfig::preset(ScenarioKind::combined);
    c.n_frames = 60;
    const auto a = simulate(c);
    const auto b = simulate(c);
    EXPECT_EQ(a.truth, b.truth);
    EXPECT_EQ(a.frames, b.frames);
    c.rng_seed = 2;
    EXPECT_NE(simulate(c).truth, a.truth);
}

TEST(ColonySim, MovesAreSingleStepsAndLarvaeStayPut) {
    auto c = ScenarioConfig::preset(ScenarioKind::combined);
    c.n_frames = 300;
    const auto run = simulate(c);
    for (std::size_t t = 1; t < run.truth.frames.size(); ++t)
        for (std::size_t i = 0; i < run.truth.frames[t].size(); ++i) {
            const auto& a = run.truth.frames[t - 1][i];
            const auto& b = run.truth.frames[t][i];
            EXPECT_LE(chebyshev(a.position, b.position), 1);
            EXPECT_TRUE(c.dims().contains(b.position));
            if (a.kind == AgentKind::larva) EXPECT_EQ(a.position, b.position);
        }
}

TEST(ColonySim, StepPastTheEndThrows) {
    ScenarioConfig c;
    c.n_frames = 1;
    EXPECT_THROW(step(init_scenario(c), c), Error);
}

// An isolated ant far from the walls moves uniformly over the 9 moves.
TEST(ColonySim, IsolatedAntMovesUniformly) {
    auto c = lone_ant();
    SimState s;
    s.rng.seed(3);
    std::array<double, kMoveCount> counts{};
    const int n = 90'000;
    for (int i = 0; i < n; ++i) {
        s.agents = {{0, AgentKind::ant, {100, 100}, true}};
        s.frame_index = 0;
        s = step(s, c);
        ++counts[static_cast<std::size_t>(*move_between({100, 100}, s.agents[0].position))];
    }
    double chi2 = 0;
    const double expected = n / 9.0;
    for (double k : counts) chi2 += (k - expected) * (k - expected) / expected;
    boost::math::chi_squared dist(8);
    EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 0.01) << "chi2 = " << chi2;
}

TEST(ColonySim, ZeroStrengthIsUniformEvenNextToALarva) {
    auto c = lone_ant(0.0);
    SimState s;
    s.rng.seed(5);
    std::array<double, kMoveCount> counts{};
    const int n = 90'000;
    for (int i = 0; i < n; ++i) {
        s.agents = {{0, AgentKind::ant, {100, 100}, true}, {1, AgentKind::larva, {103, 100}, false}};
        s.frame_index = 0;
        s = step(s, c);
        ++counts[static_cast<std::size_t>(*move_between({100, 100}, s.agents[0].position))];
    }
    double chi2 = 0;
    for (double k : counts) chi2 += (k - n / 9.0) * (k - n / 9.0) / (n / 9.0);
    boost::math::chi_squared dist(8);
    EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 0.01) << "chi2 = " << chi2;
}

TEST(ColonySim, AntsDriftTowardANearbyLarva) {
    auto c = lone_ant(0.5);
    SimState s;
    s.rng.seed(9);
    int toward = 0, away = 0;
    for (int i = 0; i < 10'000; ++i) {
        s.agents = {{0, AgentKind::ant, {100, 100}, true}, {1, AgentKind::larva, {104, 100}, false}};
        s.frame_index = 0;
        std::vector<InfluenceEvent> ev;
        s = step(s, c, &ev);
        ASSERT_EQ(ev.size(), 1u);
        EXPECT_EQ(ev[0].category, InfluenceCategory::entity);
        const int dx = s.agents[0].position.x - 100;
        toward += dx > 0;
        away += dx < 0;
    }
    ASSERT_GT(away, 0);
    EXPECT_GE(static_cast<double>(toward) / away, 1.5);
}

TEST(ColonySim, MoveDistributionMatchesTheMixture) {
    auto c = lone_ant(0.5);
    SimState s;
    s.agents = {{0, AgentKind::ant, {100, 100}, true}, {1, AgentKind::ant, {104, 100}, true}};
    const auto p = move_distribution(s, 0, c);
    double total = 0;
    for (double v : p) total += v;
    EXPECT_NEAR(total, 1.0, 1e-12);
    // NE, E, SE strictly reduce the distance.
    EXPECT_NEAR(p[static_cast<std::size_t>(Move::E)], 0.5 / 9 + 0.5 / 3, 1e-12);
    EXPECT_NEAR(p[static_cast<std::size_t>(Move::W)], 0.5 / 9, 1e-12);
    s.agents[1].position = {150, 150};
    for (double v : move_distribution(s, 0, c)) EXPECT_NEAR(v, 1.0 / 9, 1e-12);
}

TEST(ColonySim, MoveDistributionExcludesOffArenaMoves) {
    auto c = lone_ant(0.5);
    SimState s;
    s.agents = {{0, AgentKind::ant, {0, 0}, true}};
    const auto p = move_distribution(s, 0, c);
    for (std::size_t k = 0; k < kMoveCount; ++k) {
        const bool inside = c.dims().contains(apply({0, 0}, kAllMoves[k]));
        EXPECT_NEAR(p[k], inside ? 0.25 : 0.0, 1e-12);
    }
}

TEST(ColonySim, EventsNameTheNearestTargetCategory) {
    auto c = lone_ant(0.5);
    SimState s;
    s.agents = {{0, AgentKind::ant, {50, 50}, true}, {1, AgentKind::ant, {52, 50}, true},
                {2, AgentKind::foreign, {54, 50}, true}};
    std::vector<InfluenceEvent> ev;
    step(s, c, &ev);
    ASSERT_EQ(ev.size(), 3u);
    EXPECT_EQ(ev[0].category, InfluenceCategory::ant);
    EXPECT_EQ(ev[2].category, InfluenceCategory::ant);
}

TEST(ColonySim, GroundTruthJsonlRoundTrips) {
    auto c = ScenarioConfig::preset(ScenarioKind::combined);
    c.n_frames = 20;
    const auto run = simulate(c);
    const auto parsed = parse_ground_truth(ground_truth_jsonl(run.truth));
    EXPECT_EQ(parsed.frames, run.truth.frames);
}

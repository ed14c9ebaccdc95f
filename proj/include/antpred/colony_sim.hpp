#pragma once

// Seeded synthetic colony: ants, larvae and foreign entities on a grid,
// rendered as grayscale frames, with per-frame ground truth.

#include "antpred/core.hpp"
#include "antpred/frame_store.hpp"

#include "json.hpp"

#include <algorithm>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace antpred {

enum class ScenarioKind { foreign_entity, larval_foreign, larval_local, mature_foreign, combined };

inline std::string_view scenario_name(ScenarioKind k) {
    switch (k) {
    case ScenarioKind::foreign_entity: return "foreign-entity";
    case ScenarioKind::larval_foreign: return "larval-foreign";
    case ScenarioKind::larval_local: return "larval-local";
    case ScenarioKind::mature_foreign: return "mature-foreign";
    case ScenarioKind::combined: return "combined";
    }
    return "combined";
}

inline ScenarioKind parse_scenario(std::string_view s) {
    for (auto k : {ScenarioKind::foreign_entity, ScenarioKind::larval_foreign, ScenarioKind::larval_local,
                   ScenarioKind::mature_foreign, ScenarioKind::combined})
        if (scenario_name(k) == s) return k;
    // Numbered aliases 1..5 follow the order of the scenario list.
    if (s.size() == 1 && s[0] >= '1' && s[0] <= '5') return static_cast<ScenarioKind>(s[0] - '1');
    throw ConfigError("unknown scenario kind '" + std::string(s) + "'");
}

struct ScenarioConfig {
    ScenarioKind scenario_kind = ScenarioKind::larval_local;
    int arena_width = 64;
    int arena_height = 64;
    int n_ants = 6;
    int n_larvae = 0;
    int n_foreign = 0;
    int n_larva_clusters = 1;
    int influence_radius = 5;
    double attraction_strength = 0.5;
    int blob_intensity = 200;
    int background_intensity = 40;
    std::uint64_t rng_seed = 1;
    int n_frames = 5400;
    int fps = 30;

    ArenaDims dims() const { return {arena_width, arena_height}; }
    int agent_count() const { return n_ants + n_larvae + n_foreign; }

    void validate() const {
        if (arena_width < 8 || arena_height < 8) throw ConfigError("arena must be at least 8x8");
        if (n_ants < 0 || n_larvae < 0 || n_foreign < 0) throw ConfigError("agent counts must be >= 0");
        if (n_larvae > 0 && n_larva_clusters < 1) throw ConfigError("n_larva_clusters must be >= 1");
        if (influence_radius < 0) throw ConfigError("influence_radius must be >= 0");
        if (!(attraction_strength >= 0.0 && attraction_strength < 1.0))
            throw ConfigError("attraction_strength must lie in [0, 1)");
        if (background_intensity < 0 || blob_intensity > 255)
            throw ConfigError("intensities must lie in [0, 255]");
        if (blob_intensity <= background_intensity)
            throw ConfigError("blob_intensity must exceed background_intensity");
        if (n_frames < 1) throw ConfigError("n_frames must be >= 1");
        if (fps < 1) throw ConfigError("fps must be >= 1");
    }

    // Default agent mix per scenario; everything stays overridable.
    static ScenarioConfig preset(ScenarioKind kind) {
        ScenarioConfig c;
        c.scenario_kind = kind;
        switch (kind) {
        case ScenarioKind::foreign_entity: c.n_foreign = 1; break;
        case ScenarioKind::larval_foreign: c.n_larvae = 1; break;
        case ScenarioKind::larval_local:
            c.n_larvae = 3;
            c.n_larva_clusters = 3;
            break;
        case ScenarioKind::mature_foreign: c.n_foreign = 1; break;
        case ScenarioKind::combined:
            c.n_larvae = 3;
            c.n_larva_clusters = 3;
            c.n_foreign = 1;
            break;
        }
        return c;
    }
};

enum class AgentKind { ant, larva, foreign };

inline std::string_view agent_kind_name(AgentKind k) {
    switch (k) {
    case AgentKind::ant: return "ant";
    case AgentKind::larva: return "larva";
    case AgentKind::foreign: return "foreign";
    }
    return "ant";
}

inline AgentKind parse_agent_kind(std::string_view s) {
    if (s == "ant") return AgentKind::ant;
    if (s == "larva") return AgentKind::larva;
    if (s == "foreign") return AgentKind::foreign;
    throw DataError("unknown agent kind '" + std::string(s) + "'");
}

struct Agent {
    int id = 0;
    AgentKind kind = AgentKind::ant;
    Cell position;
    bool mobile = true;

    friend bool operator==(const Agent&, const Agent&) = default;
};

struct SimState {
    int frame_index = 0;
    std::vector<Agent> agents; // sorted by id
    Rng rng;

    friend bool operator==(const SimState&, const SimState&) = default;
};

struct InfluenceEvent {
    int agent_id = 0;
    InfluenceCategory category = InfluenceCategory::other;

    friend bool operator==(const InfluenceEvent&, const InfluenceEvent&) = default;
};

struct AgentRecord {
    int id = 0;
    AgentKind kind = AgentKind::ant;
    Cell position;

    friend bool operator==(const AgentRecord&, const AgentRecord&) = default;
};

struct GroundTruth {
    std::vector<std::vector<AgentRecord>> frames;      // every agent, every frame
    std::vector<std::vector<InfluenceEvent>> events;   // events[t]: influence acting on the move t -> t+1

    friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

inline SimState init_scenario(const ScenarioConfig& config) {
    config.validate();
    const ArenaDims dims = config.dims();
    if (static_cast<std::size_t>(config.agent_count()) > dims.area())
        throw ConfigError("total agent count " + std::to_string(config.agent_count()) +
                          " exceeds arena cell count " + std::to_string(dims.area()));

    SimState state;
    state.rng.seed(config.rng_seed);
    std::vector<char> occupied(dims.area(), 0);

    // Larvae: cluster centres keep a 3-cell margin so the whole disc fits.
    std::vector<Cell> larva_cells;
    if (config.n_larvae > 0) {
        std::vector<Cell> centres;
        for (int c = 0; c < config.n_larva_clusters; ++c) {
            const int cx = 3 + static_cast<int>(uniform_below(state.rng, static_cast<std::uint64_t>(dims.width - 6)));
            const int cy = 3 + static_cast<int>(uniform_below(state.rng, static_cast<std::uint64_t>(dims.height - 6)));
            centres.push_back({cx, cy});
        }
        for (int i = 0; i < config.n_larvae; ++i) {
            const Cell centre = centres[static_cast<std::size_t>(i % config.n_larva_clusters)];
            std::vector<Cell> free;
            for (int dy = -3; dy <= 3; ++dy)
                for (int dx = -3; dx <= 3; ++dx) {
                    const Cell c{centre.x + dx, centre.y + dy};
                    if (dx * dx + dy * dy <= 9 && !occupied[dims.index(c)]) free.push_back(c);
                }
            if (free.empty()) throw ConfigError("larva cluster disc (radius 3) is full");
            // The first larva of a cluster sits on its centre when possible.
            Cell pick = free[uniform_below(state.rng, free.size())];
            if (i < config.n_larva_clusters && !occupied[dims.index(centre)]) pick = centre;
            occupied[dims.index(pick)] = 1;
            larva_cells.push_back(pick);
        }
    }

    auto place_free = [&]() -> Cell {
        std::vector<Cell> free;
        for (int y = 0; y < dims.height; ++y)
            for (int x = 0; x < dims.width; ++x)
                if (!occupied[dims.index({x, y})]) free.push_back({x, y});
        const Cell c = free[uniform_below(state.rng, free.size())];
        occupied[dims.index(c)] = 1;
        return c;
    };

    int next_id = 0;
    for (int i = 0; i < config.n_ants; ++i)
        state.agents.push_back({next_id++, AgentKind::ant, place_free(), true});
    for (const Cell c : larva_cells)
        state.agents.push_back({next_id++, AgentKind::larva, c, false});
    for (int i = 0; i < config.n_foreign; ++i)
        state.agents.push_back({next_id++, AgentKind::foreign, place_free(), true});
    return state;
}

namespace detail {

inline InfluenceCategory category_of_target(AgentKind k) {
    return k == AgentKind::ant ? InfluenceCategory::ant : InfluenceCategory::entity;
}

struct Attraction {
    const Agent* target = nullptr;
    std::vector<Move> closer; // moves that strictly reduce the distance to target
};

// Nearest other agent within the influence radius (Euclidean, ties to the
// lower id), looked up on the start-of-step positions.
inline Attraction attraction_for(const SimState& state, std::size_t i, const ScenarioConfig& config) {
    const long r2 = static_cast<long>(config.influence_radius) * config.influence_radius;
    const Agent& self = state.agents[i];
    Attraction a;
    long best = std::numeric_limits<long>::max();
    for (std::size_t j = 0; j < state.agents.size(); ++j) {
        if (j == i) continue;
        const long d = dist2(self.position, state.agents[j].position);
        if (d <= r2 && (d < best || (d == best && state.agents[j].id < a.target->id))) {
            best = d;
            a.target = &state.agents[j];
        }
    }
    if (a.target)
        for (Move m : kAllMoves)
            if (dist2(apply(self.position, m), a.target->position) < best) a.closer.push_back(m);
    return a;
}

} // namespace detail

// Exact distribution of agent i's next move (indexed like kAllMoves): the
// attraction/uniform mixture conditioned on staying inside the arena, which
// is what step()'s resampling draws from.
inline std::array<double, kMoveCount> move_distribution(const SimState& state, std::size_t i,
                                                        const ScenarioConfig& config) {
    std::array<double, kMoveCount> p{};
    const Agent& self = state.agents[i];
    if (!self.mobile) {
        p[0] = 1.0;
        return p;
    }
    const auto a = detail::attraction_for(state, i, config);
    const double s = a.closer.empty() ? 0.0 : config.attraction_strength;
    for (std::size_t k = 0; k < kMoveCount; ++k) p[k] = (1.0 - s) / static_cast<double>(kMoveCount);
    for (Move m : a.closer) p[static_cast<std::size_t>(m)] += s / static_cast<double>(a.closer.size());
    double total = 0.0;
    for (std::size_t k = 0; k < kMoveCount; ++k) {
        if (!config.dims().contains(apply(self.position, kAllMoves[k]))) p[k] = 0.0;
        total += p[k];
    }
    for (double& v : p) v /= total;
    return p;
}

// One synchronous move for every mobile agent. Targets are looked up on the
// positions at the start of the step.
inline SimState step(const SimState& state, const ScenarioConfig& config,
                     std::vector<InfluenceEvent>* events = nullptr) {
    if (state.frame_index + 1 >= config.n_frames)
        throw Error("step past n_frames (" + std::to_string(config.n_frames) + ")");
    const ArenaDims dims = config.dims();

    SimState next = state;
    for (std::size_t i = 0; i < state.agents.size(); ++i) {
        const Agent& self = state.agents[i];
        if (!self.mobile) continue;

        const auto a = detail::attraction_for(state, i, config);
        if (a.target && events) events->push_back({self.id, detail::category_of_target(a.target->kind)});

        Move chosen;
        do {
            if (!a.closer.empty() && uniform01(next.rng) < config.attraction_strength)
                chosen = a.closer[uniform_below(next.rng, a.closer.size())];
            else
                chosen = kAllMoves[uniform_below(next.rng, kMoveCount)];
        } while (!dims.contains(apply(self.position, chosen)));
        next.agents[i].position = apply(self.position, chosen);
    }
    ++next.frame_index;
    return next;
}

// 3x3 constant stamp per agent, clipped at the borders, max on overlap.
inline Frame render_frame(const SimState& state, const ScenarioConfig& config) {
    Frame f(config.arena_width, config.arena_height, static_cast<std::uint8_t>(config.background_intensity),
            state.frame_index);
    const auto blob = static_cast<std::uint8_t>(config.blob_intensity);
    for (const Agent& a : state.agents)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const Cell c{a.position.x + dx, a.position.y + dy};
                if (f.dims().contains(c)) f.at(c.x, c.y) = std::max(f.at(c.x, c.y), blob);
            }
    return f;
}

inline std::vector<AgentRecord> snapshot(const SimState& state) {
    std::vector<AgentRecord> out;
    out.reserve(state.agents.size());
    for (const Agent& a : state.agents) out.push_back({a.id, a.kind, a.position});
    return out;
}

struct SimulationRun {
    std::vector<Frame> frames;
    GroundTruth truth;
};

inline SimulationRun simulate(const ScenarioConfig& config) {
    SimulationRun run;
    SimState state = init_scenario(config);
    for (int t = 0; t < config.n_frames; ++t) {
        run.frames.push_back(render_frame(state, config));
        run.truth.frames.push_back(snapshot(state));
        if (t + 1 < config.n_frames) {
            std::vector<InfluenceEvent> events;
            state = step(state, config, &events);
            run.truth.events.push_back(std::move(events));
        }
    }
    return run;
}

// {"frame":int,"id":int,"kind":"ant|larva|foreign","x":int,"y":int} per line.
inline std::string ground_truth_jsonl(const GroundTruth& truth) {
    std::string out;
    for (std::size_t t = 0; t < truth.frames.size(); ++t)
        for (const AgentRecord& r : truth.frames[t]) {
            nlohmann::ordered_json j = {{"frame", t},
                                        {"id", r.id},
                                        {"kind", agent_kind_name(r.kind)},
                                        {"x", r.position.x},
                                        {"y", r.position.y}};
            out += j.dump();
            out += '\n';
        }
    return out;
}

inline std::string influence_events_jsonl(const GroundTruth& truth) {
    std::string out;
    for (std::size_t t = 0; t < truth.events.size(); ++t)
        for (const InfluenceEvent& e : truth.events[t]) {
            nlohmann::ordered_json j = {
                {"frame", t}, {"id", e.agent_id}, {"category", category_name(e.category)}};
            out += j.dump();
            out += '\n';
        }
    return out;
}

inline GroundTruth parse_ground_truth(std::string_view text) {
    GroundTruth truth;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        const std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto frame = j.at("frame").get<std::size_t>();
            if (truth.frames.size() <= frame) truth.frames.resize(frame + 1);
            truth.frames[frame].push_back({j.at("id").get<int>(),
                                           parse_agent_kind(j.at("kind").get<std::string>()),
                                           {j.at("x").get<int>(), j.at("y").get<int>()}});
        } catch (const nlohmann::json::exception& e) {
            throw DataError("ground truth line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return truth;
}

} // namespace antpred

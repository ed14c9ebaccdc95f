#pragma once

// Walk trees over future movement states, threshold pruning with
// backtracking, operator corrections, cross-frame refinement and live
// per-ant prediction.

#include "antpred/classifier.hpp"
#include "antpred/core.hpp"
#include "antpred/detection.hpp"
#include "antpred/state_model.hpp"

#include "json.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace antpred {

inline constexpr double kDefaultWalkThreshold = 1e-4;
inline constexpr int kDefaultDepthLimit = 6;

// Triple estimation + classification per state, memoised. Not thread-safe:
// give each thread its own tagger.
class StateTagger {
public:
    struct Tag {
        StateTriple triple;
        Classification classification;
    };

    StateTagger(const ObservationIndex* observations, WeightTable weights)
        : observations_(observations), weights_(std::move(weights)) {}

    const Tag& tag(const MovementState& s) const {
        const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s.cell.x)) << 36) |
                                  (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s.cell.y)) << 8) |
                                  static_cast<std::uint64_t>(s.move);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        Tag t;
        t.triple = observations_ ? observations_->estimate(s) : StateTriple{};
        t.classification = classify(t.triple, weights_);
        return cache_.emplace(key, t).first->second;
    }

    const WeightTable& weights() const { return weights_; }

private:
    const ObservationIndex* observations_;
    WeightTable weights_;
    mutable std::unordered_map<std::uint64_t, Tag> cache_;
};

enum class WalkMode { system, user };

inline std::string_view walk_mode_name(WalkMode m) { return m == WalkMode::system ? "system" : "user"; }

inline WalkMode parse_walk_mode(std::string_view s) {
    if (s == "system") return WalkMode::system;
    if (s == "user") return WalkMode::user;
    throw Error("unknown walk mode '" + std::string(s) + "'");
}

struct WalkNode {
    int id = 0;
    int parent = -1;
    MovementState state;
    double transition_probability = 1.0;
    double path_probability = 1.0;
    InfluenceCategory category = InfluenceCategory::other;
    Scores scores{};
    int depth = 0;
    std::vector<int> children;

    friend bool operator==(const WalkNode&, const WalkNode&) = default;
};

// nodes[0] is the root; nodes stay sorted by id (breadth-first order) and keep
// their ids through pruning. With `entry_root` the root stands for a position
// rather than a movement state: its state is (position, stay) and its children
// come from the model's entry distribution at that cell.
struct WalkTree {
    std::vector<WalkNode> nodes;
    double threshold = kDefaultWalkThreshold;
    WalkMode mode = WalkMode::system;
    bool entry_root = false;

    const WalkNode& root() const { return nodes.front(); }

    const WalkNode* find(int id) const {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), id, [](const WalkNode& n, int v) { return n.id < v; });
        return it != nodes.end() && it->id == id ? &*it : nullptr;
    }

    std::vector<const WalkNode*> leaves() const {
        std::vector<const WalkNode*> out;
        for (const auto& n : nodes)
            if (n.children.empty()) out.push_back(&n);
        return out;
    }

    // Node ids from the root down to `id`.
    std::vector<int> path_to(int id) const {
        std::vector<int> path;
        for (const WalkNode* n = find(id); n; n = n->parent < 0 ? nullptr : find(n->parent)) path.push_back(n->id);
        std::reverse(path.begin(), path.end());
        return path;
    }

    friend bool operator==(const WalkTree&, const WalkTree&) = default;
};

namespace detail {

inline WalkNode make_node(int id, int parent, const MovementState& s, double transition, double path, int depth,
                          const StateTagger& tagger) {
    const auto& tag = tagger.tag(s);
    return {id, parent, s, transition, path, tag.classification.category, tag.classification.scores, depth, {}};
}

// Breadth-first; nodes below threshold are kept as leaves (shoots) but never
// expanded.
inline WalkTree expand_user(const MovementState& root_state, bool entry_root, const TransitionModel& model,
                            const StateTagger& tagger, int depth_limit, double threshold) {
    WalkTree tree;
    tree.threshold = threshold;
    tree.mode = WalkMode::user;
    tree.entry_root = entry_root;
    tree.nodes.push_back(make_node(0, -1, root_state, 1.0, 1.0, 0, tagger));
    std::size_t head = 0;
    while (head < tree.nodes.size()) {
        const WalkNode current = tree.nodes[head];
        const std::size_t current_pos = head++;
        if (current.depth >= depth_limit || current.path_probability < threshold) continue;
        const auto successors = (entry_root && current.id == 0) ? model.entry_distribution(current.state.cell)
                                                                 : model.row(current.state);
        for (const auto& [next, p] : successors) {
            const int id = static_cast<int>(tree.nodes.size());
            tree.nodes.push_back(
                make_node(id, current.id, next, p, current.path_probability * p, current.depth + 1, tagger));
            tree.nodes[current_pos].children.push_back(id);
        }
    }
    return tree;
}

} // namespace detail

// Removes every node below threshold (with its subtree), then backtracks:
// a node whose children were all removed existed only to reach pruned states
// and goes too. The root is always retained.
inline WalkTree prune_walk(const WalkTree& tree, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw Error("prune_walk: threshold must lie in (0, 1]");
    std::unordered_map<int, std::size_t> pos;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) pos[tree.nodes[i].id] = i;
    std::vector<char> removed(tree.nodes.size(), 0);
    for (std::size_t i = 1; i < tree.nodes.size(); ++i) {
        const auto& n = tree.nodes[i];
        const bool parent_removed = n.parent >= 0 && removed[pos.at(n.parent)];
        removed[i] = parent_removed || n.path_probability < threshold;
    }
    // Children always have larger ids than parents, so one reverse sweep
    // settles whole chains.
    for (std::size_t i = tree.nodes.size(); i-- > 1;) {
        const auto& n = tree.nodes[i];
        if (removed[i] || n.children.empty()) continue;
        bool any_kept = false;
        for (int c : n.children) any_kept = any_kept || !removed[pos.at(c)];
        if (!any_kept) removed[i] = 1;
    }
    WalkTree out;
    out.threshold = threshold;
    out.mode = tree.mode;
    out.entry_root = tree.entry_root;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        if (removed[i]) continue;
        WalkNode n = tree.nodes[i];
        std::erase_if(n.children, [&](int c) { return removed[pos.at(c)] != 0; });
        out.nodes.push_back(std::move(n));
    }
    return out;
}

// System mode returns the pruned tree; user mode returns the unpruned
// expansion (shoots below threshold included) for the operator to edit.
inline WalkTree expand_walk(const MovementState& start, const TransitionModel& model, const StateTagger& tagger,
                            int depth_limit = kDefaultDepthLimit, double threshold = kDefaultWalkThreshold,
                            WalkMode mode = WalkMode::system) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw Error("expand_walk: threshold must lie in (0, 1]");
    if (depth_limit < 0) throw Error("expand_walk: depth_limit must be >= 0");
    if (!model.knows(start) && model.row(start).empty())
        throw Error("expand_walk: start state is outside the model support and has no admissible successors");
    WalkTree tree = detail::expand_user(start, false, model, tagger, depth_limit, threshold);
    if (mode == WalkMode::system) {
        tree = prune_walk(tree, threshold);
        tree.mode = WalkMode::system;
    }
    return tree;
}

// Walk from a bare position: the first layer is the model's entry
// distribution over the states located at `cell`.
inline WalkTree expand_walk_from_cell(Cell cell, const TransitionModel& model, const StateTagger& tagger,
                                      int depth_limit = kDefaultDepthLimit, double threshold = kDefaultWalkThreshold,
                                      WalkMode mode = WalkMode::system) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw Error("expand_walk: threshold must lie in (0, 1]");
    if (depth_limit < 0) throw Error("expand_walk: depth_limit must be >= 0");
    if (!model.dims().contains(cell)) throw Error("expand_walk: position outside the arena");
    WalkTree tree = detail::expand_user({cell, Move::stay}, true, model, tagger, depth_limit, threshold);
    if (mode == WalkMode::system) {
        tree = prune_walk(tree, threshold);
        tree.mode = WalkMode::system;
    }
    return tree;
}

enum class CorrectionAction { prune, boost };

inline CorrectionAction parse_correction_action(std::string_view s) {
    if (s == "prune") return CorrectionAction::prune;
    if (s == "boost") return CorrectionAction::boost;
    throw Error("unknown correction action '" + std::string(s) + "'");
}

// The edge a tree node hangs from: parent state -> node state, or an entry
// edge when the parent is a position root.
struct BranchEdge {
    std::optional<MovementState> from;
    MovementState to;
};

inline BranchEdge branch_edge(const WalkTree& tree, int node_id) {
    const WalkNode* n = tree.find(node_id);
    if (!n) throw Error("unknown branch: node " + std::to_string(node_id) + " is not in the tree");
    if (n->parent < 0) throw Error("unknown branch: the root has no incoming transition");
    const WalkNode* parent = tree.find(n->parent);
    if (tree.entry_root && parent->parent < 0) return {std::nullopt, n->state};
    return {parent->state, n->state};
}

// prune multiplies the edge by 0, boost by factor (>= 1; 1 is a no-op).
// Rows renormalise on the next lookup.
inline TransitionModel apply_correction(const TransitionModel& model, const BranchEdge& edge, CorrectionAction action,
                                        double factor = 1.0) {
    if (action == CorrectionAction::boost && !(factor >= 1.0))
        throw Error("boost factor must be >= 1");
    const double f = action == CorrectionAction::prune ? 0.0 : factor;
    TransitionModel out = model;
    if (edge.from) {
        if (!model.admissible(*edge.from, edge.to)) throw Error("unknown branch: transition is not admissible");
        out.scale_edge(*edge.from, edge.to, f);
    } else {
        if (!model.valid_state(edge.to)) throw Error("unknown branch: entry state is not valid");
        out.scale_entry(edge.to, f);
    }
    return out;
}

inline TransitionModel apply_correction(const TransitionModel& model, const WalkTree& tree, int node_id,
                                        CorrectionAction action, double factor = 1.0) {
    return apply_correction(model, branch_edge(tree, node_id), action, factor);
}

struct StateEstimate {
    MovementState state;
    StateTriple triple;
};

using FrameEstimates = std::vector<std::vector<StateEstimate>>;

inline double total_other_mass(const FrameEstimates& estimates) {
    double total = 0.0;
    for (const auto& frame : estimates)
        for (const auto& e : frame) total += e.triple.p_other;
    return total;
}

// Moves p_other below the floor onto p_ant / p_entity in proportion.
inline StateTriple apply_other_floor(StateTriple t, double floor_epsilon) {
    if (t.p_other >= floor_epsilon || t.p_other <= 0.0) return t;
    const double rest = t.p_ant + t.p_entity;
    if (rest > 0.0) {
        t.p_ant += t.p_other * (t.p_ant / rest);
        t.p_entity += t.p_other * (t.p_entity / rest);
    } else {
        t.p_ant += t.p_other / 2.0;
        t.p_entity += t.p_other / 2.0;
    }
    t.p_other = 0.0;
    return t;
}

// Each round, every state's triple moves towards the triples of its
// admissible neighbours in the adjacent frames:
//   T_s <- T_s + eta * sum_j w_sj (T_j - T_s)
// with symmetric weights w_sj = P(later | earlier) from `model` (1 without a
// model) and eta = 1 / (1 + max_s sum_j w_sj), which keeps every update a
// convex combination and leaves the total mass of each component unchanged.
// Triples are then renormalised and the p_other floor is applied, so total
// p_other never increases.
inline FrameEstimates refine_across_frames(FrameEstimates estimates, int rounds, const TransitionModel* model = nullptr,
                                           double floor_epsilon = 0.05,
                                           std::vector<double>* other_mass_history = nullptr) {
    if (rounds < 0) throw Error("refine_across_frames: rounds must be >= 0");
    if (other_mass_history) other_mass_history->push_back(total_other_mass(estimates));
    if (rounds == 0) return estimates;

    struct Edge {
        std::size_t f, i, j; // estimates[f][i] -> estimates[f+1][j]
        double w;
    };
    std::vector<Edge> edges;
    std::vector<std::vector<double>> degree(estimates.size());
    for (std::size_t f = 0; f < estimates.size(); ++f) degree[f].assign(estimates[f].size(), 0.0);
    for (std::size_t f = 0; f + 1 < estimates.size(); ++f)
        for (std::size_t i = 0; i < estimates[f].size(); ++i)
            for (std::size_t j = 0; j < estimates[f + 1].size(); ++j) {
                const auto& a = estimates[f][i].state;
                const auto& b = estimates[f + 1][j].state;
                if (b.cell != destination(a)) continue;
                const double w = model ? model->probability(a, b) : 1.0;
                if (w <= 0.0) continue;
                edges.push_back({f, i, j, w});
                degree[f][i] += w;
                degree[f + 1][j] += w;
            }
    double max_degree = 0.0;
    for (const auto& d : degree)
        for (double v : d) max_degree = std::max(max_degree, v);
    const double eta = 1.0 / (1.0 + max_degree);

    for (int round = 0; round < rounds; ++round) {
        FrameEstimates next = estimates;
        for (const auto& e : edges) {
            const auto a = estimates[e.f][e.i].triple.as_array();
            const auto b = estimates[e.f + 1][e.j].triple.as_array();
            auto& ta = next[e.f][e.i].triple;
            auto& tb = next[e.f + 1][e.j].triple;
            const double k = eta * e.w;
            ta.p_ant += k * (b[0] - a[0]);
            ta.p_entity += k * (b[1] - a[1]);
            ta.p_other += k * (b[2] - a[2]);
            tb.p_ant += k * (a[0] - b[0]);
            tb.p_entity += k * (a[1] - b[1]);
            tb.p_other += k * (a[2] - b[2]);
        }
        for (auto& frame : next)
            for (auto& est : frame) {
                const double s = est.triple.sum();
                est.triple = {est.triple.p_ant / s, est.triple.p_entity / s, est.triple.p_other / s};
                est.triple = apply_other_floor(est.triple, floor_epsilon);
            }
        estimates = std::move(next);
        if (other_mass_history) other_mass_history->push_back(total_other_mass(estimates));
    }
    return estimates;
}

// Rendered black (entity), white (non-entity) or blue (other).
enum class PredictionTag { entity_induced, non_entity, other };

inline std::string_view prediction_tag_name(PredictionTag t) {
    switch (t) {
    case PredictionTag::entity_induced: return "entity";
    case PredictionTag::non_entity: return "ant";
    case PredictionTag::other: return "other";
    }
    return "other";
}

inline PredictionTag parse_prediction_tag(std::string_view s) {
    if (s == "entity") return PredictionTag::entity_induced;
    if (s == "ant") return PredictionTag::non_entity;
    if (s == "other") return PredictionTag::other;
    throw DataError("unknown prediction tag '" + std::string(s) + "'");
}

inline PredictionTag tag_for(InfluenceCategory c) {
    switch (c) {
    case InfluenceCategory::entity: return PredictionTag::entity_induced;
    case InfluenceCategory::ant: return PredictionTag::non_entity;
    case InfluenceCategory::other: return PredictionTag::other;
    }
    return PredictionTag::other;
}

struct FutureState {
    Cell cell;
    double probability = 1.0;
    PredictionTag tag = PredictionTag::other;
    int depth = 0;

    friend bool operator==(const FutureState&, const FutureState&) = default;
};

struct Prediction {
    int ant_id = 0;
    int frame_index = 0;
    Cell position;
    std::vector<FutureState> future_states;
    std::vector<int> influencing_zones; // larva zones within reach of an entity-induced state

    std::size_t count(PredictionTag t) const {
        return static_cast<std::size_t>(
            std::count_if(future_states.begin(), future_states.end(), [t](const auto& s) { return s.tag == t; }));
    }
    friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct PredictParams {
    int depth_limit = kDefaultDepthLimit;
    double threshold = kDefaultWalkThreshold;
    double influence_radius = kDefaultInfluenceRadius;
};

// One future state per surviving walk node: the cell the ant reaches by
// taking that node's move. The root contributes the current position.
inline Prediction prediction_from_tree(const WalkTree& tree, int ant_id, int frame_index,
                                       std::span<const EntityZone> zones, double influence_radius) {
    Prediction pred;
    pred.ant_id = ant_id;
    pred.frame_index = frame_index;
    pred.position = tree.root().state.cell;
    const double r2 = influence_radius * influence_radius;
    std::vector<char> influencing(zones.size(), 0);
    for (const auto& n : tree.nodes) {
        const bool is_root = n.parent < 0;
        const Cell cell = is_root && tree.entry_root ? n.state.cell : destination(n.state);
        const PredictionTag tag = tag_for(n.category);
        pred.future_states.push_back({cell, n.path_probability, tag, n.depth});
        if (tag != PredictionTag::entity_induced) continue;
        for (std::size_t z = 0; z < zones.size(); ++z)
            if (zones[z].label == ZoneLabel::larva && static_cast<double>(dist2(cell, zones[z].centroid)) <= r2)
                influencing[z] = 1;
    }
    for (std::size_t z = 0; z < zones.size(); ++z)
        if (influencing[z]) pred.influencing_zones.push_back(zones[z].zone_id);
    return pred;
}

inline Prediction live_predict(int ant_id, Cell position, int frame_index, std::span<const EntityZone> zones,
                               const TransitionModel& model, const StateTagger& tagger,
                               const PredictParams& params = {}) {
    if (model.empty() || !tagger.weights().trained()) throw Error("live_predict: model is not trained");
    if (!model.dims().contains(position)) throw Error("live_predict: position outside the arena");
    const WalkTree tree =
        expand_walk_from_cell(position, model, tagger, params.depth_limit, params.threshold, WalkMode::system);
    return prediction_from_tree(tree, ant_id, frame_index, zones, params.influence_radius);
}

// Collapses future states that land on the same cell at the same depth:
// probabilities add up, the tag is the one carrying the most mass.
inline std::vector<FutureState> aggregate_by_cell(std::span<const FutureState> states) {
    struct Acc {
        double total = 0.0;
        std::array<double, 3> by_tag{};
    };
    std::map<std::pair<int, Cell>, Acc> acc;
    for (const auto& s : states) {
        auto& a = acc[{s.depth, s.cell}];
        a.total += s.probability;
        a.by_tag[static_cast<std::size_t>(s.tag)] += s.probability;
    }
    std::vector<FutureState> out;
    for (const auto& [key, a] : acc) {
        std::size_t best = 0;
        for (std::size_t t = 1; t < 3; ++t)
            if (a.by_tag[t] > a.by_tag[best]) best = t;
        out.push_back({key.second, std::min(a.total, 1.0), static_cast<PredictionTag>(best), key.first});
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.probability > b.probability;
    });
    return out;
}

// {"ant","frame","states":[{"x","y","p","tag","depth"}]}
inline nlohmann::ordered_json prediction_to_json(const Prediction& p, bool aggregate = true) {
    nlohmann::ordered_json states = nlohmann::ordered_json::array();
    const auto list = aggregate ? aggregate_by_cell(p.future_states) : p.future_states;
    for (const auto& s : list)
        states.push_back({{"x", s.cell.x},
                          {"y", s.cell.y},
                          {"p", s.probability},
                          {"tag", prediction_tag_name(s.tag)},
                          {"depth", s.depth}});
    return {{"ant", p.ant_id},
            {"frame", p.frame_index},
            {"states", states},
            {"influencing_zones", p.influencing_zones}};
}

inline Prediction prediction_from_json(const nlohmann::json& j) {
    Prediction p;
    p.ant_id = j.at("ant").get<int>();
    p.frame_index = j.at("frame").get<int>();
    for (const auto& s : j.at("states"))
        p.future_states.push_back({{s.at("x").get<int>(), s.at("y").get<int>()},
                                   s.at("p").get<double>(),
                                   parse_prediction_tag(s.at("tag").get<std::string>()),
                                   s.value("depth", 0)});
    if (j.contains("influencing_zones")) p.influencing_zones = j.at("influencing_zones").get<std::vector<int>>();
    for (const auto& s : p.future_states)
        if (s.depth == 0) p.position = s.cell;
    return p;
}

} // namespace antpred

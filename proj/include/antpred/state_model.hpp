#pragma once

// Movement states, influence categories, per-state P(ant)/P(entity)/P(other)
// estimation and the smoothed Markov transition model over states.

#include "antpred/core.hpp"
#include "antpred/detection.hpp"
#include "antpred/tracking.hpp"

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <span>
#include <unordered_map>
#include <vector>

namespace antpred {

struct MovementState {
    Cell cell;
    Move move = Move::stay;

    friend constexpr bool operator==(const MovementState&, const MovementState&) = default;
    friend constexpr std::strong_ordering operator<=>(const MovementState& a, const MovementState& b) {
        if (auto c = a.cell <=> b.cell; c != 0) return c;
        return a.move <=> b.move;
    }
};

constexpr Cell destination(const MovementState& s) { return apply(s.cell, s.move); }

struct StateTriple {
    double p_ant = 1.0 / 3.0;
    double p_entity = 1.0 / 3.0;
    double p_other = 1.0 / 3.0;

    double operator[](InfluenceCategory c) const {
        switch (c) {
        case InfluenceCategory::ant: return p_ant;
        case InfluenceCategory::entity: return p_entity;
        case InfluenceCategory::other: return p_other;
        }
        return p_other;
    }
    std::array<double, 3> as_array() const { return {p_ant, p_entity, p_other}; }
    double sum() const { return p_ant + p_entity + p_other; }

    friend bool operator==(const StateTriple&, const StateTriple&) = default;
};

// Angle-nearest of the 8 compass directions; exact angular ties resolve to the
// first direction in clockwise order from N. Zero displacement is `stay`.
inline Move direction_of(int dx, int dy) {
    if (dx == 0 && dy == 0) return Move::stay;
    constexpr std::array<Move, 8> clockwise = {Move::N, Move::NE, Move::E, Move::SE,
                                               Move::S, Move::SW, Move::W, Move::NW};
    const double angle = std::atan2(static_cast<double>(-dy), static_cast<double>(dx));
    Move best = Move::N;
    double best_gap = 10.0;
    for (Move m : clockwise) {
        const Cell d = offset(m);
        const double target = std::atan2(static_cast<double>(-d.y), static_cast<double>(d.x));
        double gap = std::fabs(angle - target);
        if (gap > std::numbers::pi) gap = 2.0 * std::numbers::pi - gap;
        if (gap < best_gap - 1e-12) {
            best_gap = gap;
            best = m;
        }
    }
    return best;
}

// State i pairs cell i with the direction towards cell i+1; the last point
// gets `stay`.
inline std::vector<MovementState> discretize(std::span<const Cell> cells) {
    std::vector<MovementState> out;
    out.reserve(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        Move m = Move::stay;
        if (i + 1 < cells.size()) m = direction_of(cells[i + 1].x - cells[i].x, cells[i + 1].y - cells[i].y);
        out.push_back({cells[i], m});
    }
    return out;
}

inline std::vector<MovementState> discretize(const Track& track) {
    std::vector<Cell> cells;
    cells.reserve(track.points.size());
    for (const auto& p : track.points) cells.push_back(p.cell);
    return discretize(cells);
}

inline constexpr double kDefaultInfluenceRadius = 5.0;
inline constexpr double kDefaultSimilarityRadius = 5.0;

// entity > ant > other. `other_ants` must not contain the ant itself.
inline InfluenceCategory influence_category(Cell cell, std::span<const EntityZone> zones,
                                            std::span<const Cell> other_ants,
                                            double radius = kDefaultInfluenceRadius) {
    if (!(radius > 0.0)) throw Error("influence_category: radius must be positive");
    const double r2 = radius * radius;
    for (const auto& z : zones)
        if (z.label == ZoneLabel::larva && static_cast<double>(dist2(cell, z.centroid)) <= r2)
            return InfluenceCategory::entity;
    for (Cell a : other_ants)
        if (static_cast<double>(dist2(cell, a)) <= r2) return InfluenceCategory::ant;
    return InfluenceCategory::other;
}

inline std::vector<MovementState> sample_random_states(ArenaDims dims, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<MovementState> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int x = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(dims.width)));
        const int y = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(dims.height)));
        const Move m = kAllMoves[uniform_below(rng, kMoveCount)];
        out.push_back({{x, y}, m});
    }
    return out;
}

struct Observation {
    MovementState state;
    InfluenceCategory category = InfluenceCategory::other;
    int frame = 0;
    int track_id = 0;

    friend bool operator==(const Observation&, const Observation&) = default;
};

using CategoryCounts = std::array<std::size_t, 3>; // indexed by InfluenceCategory

// Laplace add-one over the three categories; no data gives (1/3,1/3,1/3).
inline StateTriple triple_from_counts(const CategoryCounts& c) {
    const double n = static_cast<double>(c[0] + c[1] + c[2]);
    return {(static_cast<double>(c[0]) + 1.0) / (n + 3.0), (static_cast<double>(c[1]) + 1.0) / (n + 3.0),
            (static_cast<double>(c[2]) + 1.0) / (n + 3.0)};
}

// Similar = same move and cell within similarity_radius (Euclidean).
inline StateTriple estimate_probabilities(const MovementState& query, std::span<const Observation> observations,
                                          double similarity_radius = kDefaultSimilarityRadius) {
    const double r2 = similarity_radius * similarity_radius;
    CategoryCounts counts{};
    for (const auto& o : observations)
        if (o.state.move == query.move && static_cast<double>(dist2(o.state.cell, query.cell)) <= r2)
            ++counts[static_cast<std::size_t>(o.category)];
    return triple_from_counts(counts);
}

// Grid-bucketed counts so neighbourhood queries cost O(radius^2) instead of
// O(database).
class ObservationIndex {
public:
    ObservationIndex() = default;
    ObservationIndex(ArenaDims dims, std::span<const Observation> observations, double similarity_radius)
        : dims_(dims), radius_(similarity_radius), buckets_(dims.area() * kMoveCount) {
        for (const auto& o : observations) {
            if (!dims.contains(o.state.cell)) continue;
            ++buckets_[slot(o.state.cell, o.state.move)][static_cast<std::size_t>(o.category)];
        }
    }

    CategoryCounts counts_near(const MovementState& q) const {
        CategoryCounts out{};
        const int r = static_cast<int>(std::floor(radius_));
        const double r2 = radius_ * radius_;
        for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
                const Cell c{q.cell.x + dx, q.cell.y + dy};
                if (!dims_.contains(c) || static_cast<double>(dx * dx + dy * dy) > r2) continue;
                const auto& b = buckets_[slot(c, q.move)];
                for (std::size_t k = 0; k < 3; ++k) out[k] += b[k];
            }
        return out;
    }

    StateTriple estimate(const MovementState& q) const { return triple_from_counts(counts_near(q)); }
    double similarity_radius() const { return radius_; }

private:
    std::size_t slot(Cell c, Move m) const { return dims_.index(c) * kMoveCount + static_cast<std::size_t>(m); }

    ArenaDims dims_;
    double radius_ = kDefaultSimilarityRadius;
    std::vector<CategoryCounts> buckets_;
};

// Counts over admissible state pairs, with additive smoothing over each row's
// admissible support and optional multiplicative corrections per edge.
class TransitionModel {
public:
    using Row = std::map<MovementState, double>;

    TransitionModel() = default;
    TransitionModel(ArenaDims dims, double smoothing_alpha) : dims_(dims), alpha_(smoothing_alpha) {
        if (smoothing_alpha < 0.0) throw Error("smoothing_alpha must be >= 0");
    }

    ArenaDims dims() const { return dims_; }
    double smoothing_alpha() const { return alpha_; }
    bool empty() const { return counts_.empty(); }

    // A state is valid when both its cell and its destination are in the arena.
    bool valid_state(const MovementState& s) const {
        return dims_.contains(s.cell) && dims_.contains(destination(s));
    }

    // Up to 9 successors: every valid state located at from's destination.
    std::vector<MovementState> support(const MovementState& from) const {
        std::vector<MovementState> out;
        if (!valid_state(from)) return out;
        const Cell next = destination(from);
        for (Move m : kAllMoves)
            if (dims_.contains(apply(next, m))) out.push_back({next, m});
        return out;
    }

    bool admissible(const MovementState& from, const MovementState& to) const {
        return valid_state(from) && valid_state(to) && to.cell == destination(from);
    }

    // Returns false (and records nothing) for inadmissible pairs.
    bool add_transition(const MovementState& from, const MovementState& to, double count = 1.0) {
        if (!admissible(from, to)) return false;
        counts_[from][to] += count;
        return true;
    }

    double count(const MovementState& from, const MovementState& to) const {
        const auto r = counts_.find(from);
        if (r == counts_.end()) return 0.0;
        const auto c = r->second.find(to);
        return c == r->second.end() ? 0.0 : c->second;
    }

    double row_total(const MovementState& from) const {
        const auto r = counts_.find(from);
        if (r == counts_.end()) return 0.0;
        double total = 0.0;
        for (const auto& [to, c] : r->second) total += c;
        return total;
    }

    // True if the state appears anywhere in the counts.
    bool knows(const MovementState& s) const {
        if (counts_.contains(s)) return true;
        for (const auto& [from, row] : counts_)
            if (row.contains(s)) return true;
        return false;
    }

    // Nonzero-probability successors in support order.
    std::vector<std::pair<MovementState, double>> row(const MovementState& from) const {
        std::vector<std::pair<MovementState, double>> out;
        const auto sup = support(from);
        if (sup.empty()) return out;
        const auto scales = edge_scale_.find(from);
        if (scales == edge_scale_.end()) {
            const double denom = row_total(from) + alpha_ * static_cast<double>(sup.size());
            if (denom <= 0.0) return out;
            for (const auto& to : sup) {
                const double p = (count(from, to) + alpha_) / denom;
                if (p > 0.0) out.emplace_back(to, p);
            }
            return out;
        }
        std::vector<double> w(sup.size());
        double total = 0.0;
        for (std::size_t i = 0; i < sup.size(); ++i) {
            const auto s = scales->second.find(sup[i]);
            w[i] = (s == scales->second.end() ? 1.0 : s->second) * (count(from, sup[i]) + alpha_);
            total += w[i];
        }
        if (total <= 0.0) return out;
        for (std::size_t i = 0; i < sup.size(); ++i)
            if (w[i] > 0.0) out.emplace_back(sup[i], w[i] / total);
        return out;
    }

    double probability(const MovementState& from, const MovementState& to) const {
        for (const auto& [s, p] : row(from))
            if (s == to) return p;
        return 0.0;
    }

    // Distribution over the valid states located at `cell`, weighted by how
    // often each was observed (row totals) plus smoothing; uniform when the
    // cell carries no evidence at all.
    std::vector<std::pair<MovementState, double>> entry_distribution(Cell cell) const {
        std::vector<std::pair<MovementState, double>> out;
        std::vector<MovementState> states;
        std::vector<double> base;
        for (Move m : kAllMoves) {
            const MovementState s{cell, m};
            if (!valid_state(s)) continue;
            states.push_back(s);
            base.push_back(row_total(s) + alpha_);
        }
        double base_total = 0.0;
        for (double b : base) base_total += b;
        if (base_total <= 0.0) std::fill(base.begin(), base.end(), 1.0);
        double total = 0.0;
        for (std::size_t i = 0; i < states.size(); ++i) {
            const auto s = entry_scale_.find(states[i]);
            base[i] *= s == entry_scale_.end() ? 1.0 : s->second;
            total += base[i];
        }
        if (total <= 0.0) return out;
        for (std::size_t i = 0; i < states.size(); ++i)
            if (base[i] > 0.0) out.emplace_back(states[i], base[i] / total);
        return out;
    }

    // Corrections multiply the smoothed weight of one edge; 0 removes it.
    void scale_edge(const MovementState& from, const MovementState& to, double factor) {
        if (factor == 1.0) return;
        edge_scale_[from][to] = edge_scale(from, to) * factor;
    }
    void scale_entry(const MovementState& to, double factor) {
        if (factor == 1.0) return;
        entry_scale_[to] = entry_scale(to) * factor;
    }
    double edge_scale(const MovementState& from, const MovementState& to) const {
        const auto r = edge_scale_.find(from);
        if (r == edge_scale_.end()) return 1.0;
        const auto s = r->second.find(to);
        return s == r->second.end() ? 1.0 : s->second;
    }
    double entry_scale(const MovementState& to) const {
        const auto s = entry_scale_.find(to);
        return s == entry_scale_.end() ? 1.0 : s->second;
    }

    const std::map<MovementState, Row>& counts() const { return counts_; }
    const std::map<MovementState, Row>& edge_scales() const { return edge_scale_; }
    const std::map<MovementState, double>& entry_scales() const { return entry_scale_; }

    friend bool operator==(const TransitionModel&, const TransitionModel&) = default;

private:
    ArenaDims dims_;
    double alpha_ = 0.0;
    std::map<MovementState, Row> counts_;
    std::map<MovementState, Row> edge_scale_;
    std::map<MovementState, double> entry_scale_;
};

// Consecutive pairs that are not one-move admissible (multi-cell jumps,
// off-arena destinations) are skipped.
inline TransitionModel build_transition_model(std::span<const std::vector<MovementState>> sequences,
                                              double smoothing_alpha, ArenaDims dims) {
    TransitionModel model(dims, smoothing_alpha);
    for (const auto& seq : sequences)
        for (std::size_t i = 0; i + 1 < seq.size(); ++i) model.add_transition(seq[i], seq[i + 1]);
    return model;
}

} // namespace antpred

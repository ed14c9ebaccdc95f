#pragma once

// Top-k next-cell hit rate of predictions against true positions.

#include "antpred/core.hpp"
#include "antpred/prediction.hpp"

#include <algorithm>
#include <span>
#include <vector>

namespace antpred {

// The k most probable depth-1 cells; equal probabilities resolve by cell order.
inline std::vector<Cell> top_k_cells(std::span<const FutureState> states, std::size_t k) {
    std::vector<FutureState> next;
    for (const auto& s : aggregate_by_cell(states))
        if (s.depth == 1) next.push_back(s);
    std::sort(next.begin(), next.end(), [](const auto& a, const auto& b) {
        if (a.probability != b.probability) return a.probability > b.probability;
        return a.cell < b.cell;
    });
    std::vector<Cell> out;
    for (std::size_t i = 0; i < next.size() && i < k; ++i) out.push_back(next[i].cell);
    return out;
}

struct EvalCase {
    std::vector<FutureState> states;
    Cell truth;
};

struct EvalReport {
    std::size_t k = 3;
    std::size_t cases = 0;
    std::size_t hits = 0;

    double hit_rate() const { return cases == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(cases); }
    // Guessing k of the 9 one-move cells uniformly.
    double baseline() const { return static_cast<double>(k) / static_cast<double>(kMoveCount); }
    double skill_ratio() const { return hit_rate() / baseline(); }
};

inline EvalReport evaluate_top_k(std::span<const EvalCase> cases, std::size_t k) {
    if (k < 1 || k > kMoveCount) throw Error("evaluate_top_k: k must lie in [1, 9]");
    EvalReport r;
    r.k = k;
    for (const auto& c : cases) {
        const auto top = top_k_cells(c.states, k);
        ++r.cases;
        if (std::find(top.begin(), top.end(), c.truth) != top.end()) ++r.hits;
    }
    return r;
}

} // namespace antpred

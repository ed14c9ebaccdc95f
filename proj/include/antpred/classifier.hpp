#pragma once

// Single-layer softmax classifier (3 probability features -> 3 influence
// categories) trained by full-batch gradient descent on cross-entropy. The
// weight table is shared across states; a state's StateTriple is its feature.

#include "antpred/core.hpp"
#include "antpred/state_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace antpred {

using Features = std::array<double, 3>;
using Scores = std::array<double, 3>; // indexed by InfluenceCategory

enum class StopReason { not_trained, converged, trivial_weights, max_epochs };

inline std::string_view stop_reason_name(StopReason r) {
    switch (r) {
    case StopReason::not_trained: return "not_trained";
    case StopReason::converged: return "converged";
    case StopReason::trivial_weights: return "trivial_weights";
    case StopReason::max_epochs: return "max_epochs";
    }
    return "not_trained";
}

inline StopReason parse_stop_reason(std::string_view s) {
    for (auto r : {StopReason::not_trained, StopReason::converged, StopReason::trivial_weights, StopReason::max_epochs})
        if (stop_reason_name(r) == s) return r;
    throw DataError("unknown stop reason '" + std::string(s) + "'");
}

// Row k holds (w0, w1, w2) for output category k; bias[k] is its offset.
struct WeightTable {
    std::array<std::array<double, 3>, 3> w{};
    std::array<double, 3> bias{};
    StopReason stop_reason = StopReason::not_trained;
    int epochs = 0;
    double final_loss = 0.0;

    bool trained() const { return stop_reason != StopReason::not_trained; }
    bool finite() const {
        for (const auto& row : w)
            for (double v : row)
                if (!std::isfinite(v)) return false;
        for (double b : bias)
            if (!std::isfinite(b)) return false;
        return true;
    }
    friend bool operator==(const WeightTable&, const WeightTable&) = default;
};

struct TrainConfig {
    double learning_rate = 0.5;
    int max_epochs = 2000;
    double convergence_tol = 1e-7;
    double triviality_tol = 1e-6;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
        if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
        if (!(convergence_tol > 0.0) || !(triviality_tol > 0.0)) throw ConfigError("tolerances must be > 0");
    }
};

struct Sample {
    Features features{};
    InfluenceCategory label = InfluenceCategory::other;
};

inline Features features_of(const StateTriple& t) { return {t.p_ant, t.p_entity, t.p_other}; }

inline std::array<double, 3> logits(const Features& x, const WeightTable& wt) {
    std::array<double, 3> z{};
    for (std::size_t k = 0; k < 3; ++k) z[k] = wt.bias[k] + wt.w[k][0] * x[0] + wt.w[k][1] * x[1] + wt.w[k][2] * x[2];
    return z;
}

inline Scores softmax(const std::array<double, 3>& z) {
    const double m = std::max({z[0], z[1], z[2]});
    Scores s{std::exp(z[0] - m), std::exp(z[1] - m), std::exp(z[2] - m)};
    const double total = s[0] + s[1] + s[2];
    for (double& v : s) v /= total;
    return s;
}

// Ties resolve entity > ant > other.
inline InfluenceCategory argmax_category(const std::array<double, 3>& v) {
    constexpr std::array<InfluenceCategory, 3> order = {InfluenceCategory::entity, InfluenceCategory::ant,
                                                        InfluenceCategory::other};
    InfluenceCategory best = order[0];
    for (auto c : order)
        if (v[static_cast<std::size_t>(c)] > v[static_cast<std::size_t>(best)]) best = c;
    return best;
}

struct Classification {
    Scores scores{};
    InfluenceCategory category = InfluenceCategory::other;
};

inline Classification classify(const Features& x, const WeightTable& wt) {
    const Scores s = softmax(logits(x, wt));
    return {s, argmax_category(s)};
}

inline Classification classify(const StateTriple& t, const WeightTable& wt) { return classify(features_of(t), wt); }

// Mean cross-entropy over the batch.
inline double loss(std::span<const Sample> samples, const WeightTable& wt) {
    double total = 0.0;
    for (const auto& s : samples) {
        const auto z = logits(s.features, wt);
        const double m = std::max({z[0], z[1], z[2]});
        const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m) + std::exp(z[2] - m));
        total += lse - z[static_cast<std::size_t>(s.label)];
    }
    return total / static_cast<double>(samples.size());
}

struct Gradient {
    std::array<std::array<double, 3>, 3> w{};
    std::array<double, 3> bias{};
};

// d loss / d w[k][j] = mean((softmax_k - [k == label]) * x_j)
inline Gradient gradient(std::span<const Sample> samples, const WeightTable& wt) {
    Gradient g;
    for (const auto& s : samples) {
        const Scores p = softmax(logits(s.features, wt));
        for (std::size_t k = 0; k < 3; ++k) {
            const double delta = p[k] - (static_cast<std::size_t>(s.label) == k ? 1.0 : 0.0);
            for (std::size_t j = 0; j < 3; ++j) g.w[k][j] += delta * s.features[j];
            g.bias[k] += delta;
        }
    }
    const double n = static_cast<double>(samples.size());
    for (auto& row : g.w)
        for (double& v : row) v /= n;
    for (double& v : g.bias) v /= n;
    return g;
}

inline WeightTable initial_weights(std::uint64_t seed) {
    Rng rng(seed);
    WeightTable wt;
    for (auto& row : wt.w)
        for (double& v : row) v = uniform_real(rng, -0.01, 0.01);
    for (double& b : wt.bias) b = uniform_real(rng, -0.01, 0.01);
    return wt;
}

// Stops on the first of: largest per-epoch weight change below
// convergence_tol; some |weight| below triviality_tol while the loss has
// stalled; max_epochs.
inline WeightTable train(std::span<const Sample> samples, const TrainConfig& config = {},
                         std::vector<double>* loss_history = nullptr) {
    if (samples.empty()) throw DataError("train: no samples");
    config.validate();
    WeightTable wt = initial_weights(config.seed);
    double prev_loss = loss(samples, wt);
    if (loss_history) loss_history->push_back(prev_loss);
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const Gradient g = gradient(samples, wt);
        double max_change = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            for (std::size_t j = 0; j < 3; ++j) {
                const double step = config.learning_rate * g.w[k][j];
                wt.w[k][j] -= step;
                max_change = std::max(max_change, std::fabs(step));
            }
            const double step = config.learning_rate * g.bias[k];
            wt.bias[k] -= step;
            max_change = std::max(max_change, std::fabs(step));
        }
        const double current = loss(samples, wt);
        if (loss_history) loss_history->push_back(current);
        wt.epochs = epoch;
        wt.final_loss = current;
        if (max_change < config.convergence_tol) {
            wt.stop_reason = StopReason::converged;
            return wt;
        }
        bool trivial = false;
        for (const auto& row : wt.w)
            for (double v : row) trivial = trivial || std::fabs(v) < config.triviality_tol;
        if (trivial && prev_loss - current < config.convergence_tol) {
            wt.stop_reason = StopReason::trivial_weights;
            return wt;
        }
        prev_loss = current;
    }
    wt.stop_reason = StopReason::max_epochs;
    return wt;
}

inline double accuracy(std::span<const Sample> samples, const WeightTable& wt) {
    if (samples.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& s : samples) hits += classify(s.features, wt).category == s.label ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

} // namespace antpred

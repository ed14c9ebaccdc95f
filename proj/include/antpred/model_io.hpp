#pragma once

// The trained model file: transition counts (+ corrections), the observation
// database and the classifier weights in one versioned JSON document.

#include "antpred/classifier.hpp"
#include "antpred/core.hpp"
#include "antpred/frame_store.hpp"
#include "antpred/state_model.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace antpred {

inline constexpr int kModelVersion = 1;

struct TrainedModel {
    TransitionModel transitions;
    std::vector<Observation> observations;
    WeightTable weights;
    double similarity_radius = kDefaultSimilarityRadius;
    double influence_radius = kDefaultInfluenceRadius;

    ObservationIndex index() const { return {transitions.dims(), observations, similarity_radius}; }
    friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

namespace detail {

inline nlohmann::ordered_json state_json(const MovementState& s) {
    return nlohmann::ordered_json::array({s.cell.x, s.cell.y, move_name(s.move)});
}

inline MovementState state_from_json(const nlohmann::json& j) {
    const auto m = parse_move(j.at(2).get<std::string>());
    if (!m) throw DataError("model: unknown move '" + j.at(2).get<std::string>() + "'");
    return {{j.at(0).get<int>(), j.at(1).get<int>()}, *m};
}

} // namespace detail

inline nlohmann::ordered_json model_to_json(const TrainedModel& m) {
    using nlohmann::ordered_json;
    const auto& t = m.transitions;
    ordered_json counts = ordered_json::array();
    for (const auto& [from, row] : t.counts())
        for (const auto& [to, c] : row) counts.push_back({detail::state_json(from), detail::state_json(to), c});
    ordered_json edge_scales = ordered_json::array();
    for (const auto& [from, row] : t.edge_scales())
        for (const auto& [to, f] : row) edge_scales.push_back({detail::state_json(from), detail::state_json(to), f});
    ordered_json entry_scales = ordered_json::array();
    for (const auto& [to, f] : t.entry_scales()) entry_scales.push_back({detail::state_json(to), f});
    ordered_json observations = ordered_json::array();
    for (const auto& o : m.observations)
        observations.push_back({o.state.cell.x, o.state.cell.y, move_name(o.state.move), category_name(o.category),
                                o.frame, o.track_id});
    const auto& w = m.weights;
    ordered_json weights = {{"w", w.w},
                            {"bias", w.bias},
                            {"stop_reason", stop_reason_name(w.stop_reason)},
                            {"epochs", w.epochs},
                            {"final_loss", w.final_loss}};
    return {{"version", kModelVersion},
            {"arena", {{"width", t.dims().width}, {"height", t.dims().height}}},
            {"smoothing_alpha", t.smoothing_alpha()},
            {"similarity_radius", m.similarity_radius},
            {"influence_radius", m.influence_radius},
            {"transitions", counts},
            {"edge_scales", edge_scales},
            {"entry_scales", entry_scales},
            {"observations", observations},
            {"weights", weights}};
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
    try {
        const int version = j.at("version").get<int>();
        if (version != kModelVersion) throw DataError("model: unsupported version " + std::to_string(version));
        TrainedModel m;
        const ArenaDims dims{j.at("arena").at("width").get<int>(), j.at("arena").at("height").get<int>()};
        m.transitions = TransitionModel(dims, j.at("smoothing_alpha").get<double>());
        m.similarity_radius = j.at("similarity_radius").get<double>();
        m.influence_radius = j.at("influence_radius").get<double>();
        for (const auto& e : j.at("transitions"))
            if (!m.transitions.add_transition(detail::state_from_json(e.at(0)), detail::state_from_json(e.at(1)),
                                              e.at(2).get<double>()))
                throw DataError("model: inadmissible transition " + e.dump());
        for (const auto& e : j.at("edge_scales"))
            m.transitions.scale_edge(detail::state_from_json(e.at(0)), detail::state_from_json(e.at(1)),
                                     e.at(2).get<double>());
        for (const auto& e : j.at("entry_scales"))
            m.transitions.scale_entry(detail::state_from_json(e.at(0)), e.at(1).get<double>());
        for (const auto& o : j.at("observations")) {
            const auto move = parse_move(o.at(2).get<std::string>());
            if (!move) throw DataError("model: unknown move in observation " + o.dump());
            m.observations.push_back({{{o.at(0).get<int>(), o.at(1).get<int>()}, *move},
                                      parse_category(o.at(3).get<std::string>()),
                                      o.at(4).get<int>(),
                                      o.at(5).get<int>()});
        }
        const auto& w = j.at("weights");
        m.weights.w = w.at("w").get<std::array<std::array<double, 3>, 3>>();
        m.weights.bias = w.at("bias").get<std::array<double, 3>>();
        m.weights.stop_reason = parse_stop_reason(w.at("stop_reason").get<std::string>());
        m.weights.epochs = w.at("epochs").get<int>();
        m.weights.final_loss = w.at("final_loss").get<double>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model: ") + e.what());
    }
}

inline std::string model_to_text(const TrainedModel& m) { return model_to_json(m).dump() + "\n"; }

inline TrainedModel model_from_text(std::string_view text) {
    try {
        return model_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("model: ") + e.what());
    }
}

inline void write_model(const std::filesystem::path& p, const TrainedModel& m) { write_file_bytes(p, model_to_text(m)); }

inline TrainedModel read_model(const std::filesystem::path& p) { return model_from_text(read_file_bytes(p)); }

// FNV-1a 64 of the serialized model, hex.
inline std::string model_digest(const TrainedModel& m) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : model_to_text(m)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xf];
    return out;
}

} // namespace antpred

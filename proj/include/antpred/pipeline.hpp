#pragma once

// File-based pipeline stages. Each stage reads the artifacts of earlier
// stages from the output directory and writes its own there.

#include "antpred/classifier.hpp"
#include "antpred/colony_sim.hpp"
#include "antpred/config.hpp"
#include "antpred/detection.hpp"
#include "antpred/eval.hpp"
#include "antpred/extrusion.hpp"
#include "antpred/frame_store.hpp"
#include "antpred/model_io.hpp"
#include "antpred/prediction.hpp"
#include "antpred/state_model.hpp"
#include "antpred/tracking.hpp"

#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace antpred {

namespace fs = std::filesystem;

struct ArtifactPaths {
    fs::path root;

    fs::path frames_dir() const { return root / "frames"; }
    fs::path frames_manifest() const { return frames_dir() / "manifest.json"; }
    fs::path ground_truth() const { return root / "ground_truth.jsonl"; }
    fs::path influence_events() const { return root / "influence_events.jsonl"; }
    fs::path processed_dir() const { return root / "processed"; }
    fs::path processed_manifest() const { return processed_dir() / "manifest.json"; }
    fs::path index_map() const { return processed_dir() / "index_map.json"; }
    fs::path extruded_dir() const { return root / "extruded"; }
    fs::path extruded_manifest() const { return extruded_dir() / "manifest.json"; }
    fs::path background() const { return root / "background.pgm"; }
    fs::path zones() const { return root / "zones.json"; }
    fs::path tracks() const { return root / "tracks.jsonl"; }
    fs::path stationary() const { return root / "stationary.json"; }
    fs::path model() const { return root / "model.json"; }
    fs::path predictions() const { return root / "predictions.jsonl"; }
    fs::path refinement() const { return root / "refinement.json"; }
    fs::path eval() const { return root / "eval.json"; }
};

inline void require_artifact(const fs::path& p) {
    if (!fs::exists(p)) throw MissingArtifact(p.string());
}

inline std::vector<int> read_index_map(const ArtifactPaths& paths) {
    require_artifact(paths.index_map());
    try {
        return nlohmann::json::parse(read_file_bytes(paths.index_map())).at("source_frames").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(paths.index_map().string() + ": " + e.what());
    }
}

inline std::vector<ExtrudedFrame> load_extruded(const ArtifactPaths& paths) {
    require_artifact(paths.extruded_manifest());
    const auto m = read_manifest(paths.extruded_manifest());
    std::vector<ExtrudedFrame> out;
    out.reserve(m.frame_paths.size());
    for (std::size_t i = 0; i < m.frame_paths.size(); ++i) {
        const auto p = paths.extruded_dir() / m.frame_paths[i];
        if (!fs::exists(p)) throw MissingArtifact(p.string());
        auto e = read_extruded(p);
        e.index = static_cast<int>(i);
        out.push_back(std::move(e));
    }
    return out;
}

inline std::vector<EntityZone> load_zones(const ArtifactPaths& paths) {
    require_artifact(paths.zones());
    return zones_from_json_text(read_file_bytes(paths.zones()));
}

inline std::vector<Track> load_tracks(const ArtifactPaths& paths) {
    require_artifact(paths.tracks());
    return tracks_from_jsonl(read_file_bytes(paths.tracks()));
}

inline TrainedModel load_model(const ArtifactPaths& paths) {
    require_artifact(paths.model());
    return read_model(paths.model());
}

// simulate: frames/ + ground truth + influence events.
inline std::string run_simulate(const PipelineConfig& cfg) {
    const ArtifactPaths paths{cfg.output_dir};
    const auto run = simulate(cfg.scenario);
    save_sequence(paths.frames_dir(), run.frames, cfg.scenario.fps);
    write_file_bytes(paths.ground_truth(), ground_truth_jsonl(run.truth));
    write_file_bytes(paths.influence_events(), influence_events_jsonl(run.truth));
    return "simulated " + std::to_string(run.frames.size()) + " frames";
}

// extrude: rate standardisation, optional skipping, background, height fields.
inline std::string run_extrude(const PipelineConfig& cfg) {
    const ArtifactPaths paths{cfg.output_dir};
    require_artifact(paths.frames_manifest());
    const auto manifest = read_manifest(paths.frames_manifest());
    auto frames = load_sequence(paths.frames_manifest());

    std::vector<int> source(frames.size());
    for (std::size_t i = 0; i < source.size(); ++i) source[i] = static_cast<int>(i);
    frames = standardize_rate(frames, manifest.fps, cfg.frames.target_fps);
    {
        const std::size_t stride = static_cast<std::size_t>(manifest.fps / cfg.frames.target_fps);
        std::vector<int> kept;
        for (std::size_t i = 0; i < source.size(); i += stride) kept.push_back(source[i]);
        source = std::move(kept);
    }
    if (cfg.frames.skip) {
        frames = skip_frames(frames);
        std::vector<int> kept;
        for (std::size_t i = 0; i < source.size(); ++i)
            if (i % 3 != 2) kept.push_back(source[i]);
        source = std::move(kept);
    }
    if (frames.empty()) throw DataError("extrude: no frames left after standardisation");
    save_sequence(paths.processed_dir(), frames, cfg.frames.target_fps);
    write_file_bytes(paths.index_map(), nlohmann::json{{"version", 1}, {"source_frames", source}}.dump() + "\n");

    const auto bg = estimate_background(frames);
    write_pgm(paths.background(), bg.as_frame());
    SequenceManifest em;
    em.fps = cfg.frames.target_fps;
    em.width = bg.width;
    em.height = bg.height;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%06zu.pgm", i);
        write_extruded(paths.extruded_dir() / name, extrude(frames[i], bg));
        em.frame_paths.emplace_back(name);
    }
    write_manifest(paths.extruded_manifest(), em);
    return "extruded " + std::to_string(frames.size()) + " frames";
}

inline SequenceDetectParams detect_params(const PipelineConfig& cfg) {
    SequenceDetectParams p;
    p.zone.epsilon_motion = cfg.detection.epsilon_motion;
    p.zone.min_height = cfg.effective_min_height();
    p.zone.min_cells = cfg.detection.min_cells;
    p.window = cfg.detection.window;
    p.persistence = cfg.detection.persistence;
    p.larva_persistence = cfg.detection.larva_persistence;
    p.knn_k = cfg.detection.knn_k;
    return p;
}

inline std::string run_detect(const PipelineConfig& cfg) {
    const ArtifactPaths paths{cfg.output_dir};
    require_artifact(paths.processed_manifest());
    const auto frames = load_sequence(paths.processed_manifest());
    const auto extruded = load_extruded(paths);
    const auto zones = detect_sequence(frames, extruded, detect_params(cfg));
    write_file_bytes(paths.zones(), zones_to_json_text(zones));
    std::size_t larva = 0;
    for (const auto& z : zones) larva += z.label == ZoneLabel::larva ? 1 : 0;
    return "detected " + std::to_string(zones.size()) + " zones (" + std::to_string(larva) + " larva)";
}

// Blob centroids per extruded frame, with larva zones masked out.
inline std::vector<std::vector<Cell>> frame_blobs(const PipelineConfig& cfg, std::span<const ExtrudedFrame> extruded,
                                                  std::span<const EntityZone> zones) {
    if (extruded.empty()) return {};
    const ArenaDims dims{extruded.front().width, extruded.front().height};
    std::vector<std::uint8_t> exclude(dims.area(), 0);
    for (const auto& z : zones)
        if (z.label == ZoneLabel::larva)
            for (Cell c : z.cells)
                if (dims.contains(c)) exclude[dims.index(c)] = 1;
    std::vector<std::vector<Cell>> blobs;
    blobs.reserve(extruded.size());
    for (const auto& e : extruded)
        blobs.push_back(blob_centroids(e, cfg.effective_min_height(), cfg.tracking.blob_min_cells, exclude));
    return blobs;
}

inline std::string run_track(const PipelineConfig& cfg) {
    const ArtifactPaths paths{cfg.output_dir};
    const auto extruded = load_extruded(paths);
    const auto zones = load_zones(paths);
    const auto blobs = frame_blobs(cfg, extruded, zones);
    // Ants touching each other merge into one blob, so tracking starts at the
    // first frame where every track can claim its own.
    const auto need = static_cast<std::size_t>(cfg.tracking.n_tracks);
    const auto first = std::find_if(blobs.begin(), blobs.end(), [&](const auto& b) { return b.size() >= need; });
    if (first == blobs.end())
        throw DataError("track: no frame has " + std::to_string(need) + " separate blobs");
    const int offset = static_cast<int>(first - blobs.begin());
    auto tracks = track_entities(std::span(first, blobs.end()), cfg.tracking.n_tracks, cfg.tracking.max_step);
    for (auto& t : tracks)
        for (auto& p : t.points) p.frame += offset;
    write_file_bytes(paths.tracks(), tracks_to_jsonl(tracks));
    nlohmann::ordered_json segs = nlohmann::ordered_json::array();
    for (const auto& t : tracks)
        for (const auto& s : stationary_segments(t, cfg.tracking.stationary_eps, cfg.tracking.stationary_min_len))
            segs.push_back({{"track", s.track_id},
                            {"start_frame", s.start_frame},
                            {"end_frame", s.end_frame},
                            {"anchor", {s.anchor_cell.x, s.anchor_cell.y}}});
    write_file_bytes(paths.stationary(), nlohmann::ordered_json{{"version", 1}, {"segments", segs}}.dump() + "\n");
    return "tracked " + std::to_string(tracks.size()) + " ants over " + std::to_string(blobs.size()) + " frames";
}

struct TrainingData {
    std::vector<std::vector<MovementState>> sequences;
    std::vector<Observation> observations;
};

// Observations label every tracked state by its influence category, with the
// other tracks at the same frame as neighbouring ants. Frames at or beyond
// `train_frames` (when > 0) are dropped.
inline TrainingData training_data(std::span<const Track> tracks, std::span<const EntityZone> zones,
                                  double influence_radius, int train_frames) {
    std::vector<Track> kept(tracks.begin(), tracks.end());
    if (train_frames > 0)
        for (auto& t : kept) std::erase_if(t.points, [&](const TrackPoint& p) { return p.frame >= train_frames; });
    std::map<int, std::vector<std::pair<int, Cell>>> by_frame; // frame -> (track, cell)
    for (const auto& t : kept)
        for (const auto& p : t.points) by_frame[p.frame].emplace_back(t.track_id, p.cell);
    TrainingData data;
    for (const auto& t : kept) {
        if (t.points.empty()) continue;
        auto states = discretize(t);
        for (std::size_t i = 0; i < states.size(); ++i) {
            const int frame = t.points[i].frame;
            std::vector<Cell> others;
            for (const auto& [id, cell] : by_frame[frame])
                if (id != t.track_id) others.push_back(cell);
            data.observations.push_back(
                {states[i], influence_category(states[i].cell, zones, others, influence_radius), frame, t.track_id});
        }
        data.sequences.push_back(std::move(states));
    }
    return data;
}

// Each sample's features exclude its own observation, so the classifier
// learns from the neighbourhood rather than from the label itself.
inline std::vector<Sample> training_samples(ArenaDims dims, std::span<const Observation> observations,
                                            double similarity_radius) {
    const ObservationIndex index(dims, observations, similarity_radius);
    std::vector<Sample> samples;
    samples.reserve(observations.size());
    for (const auto& o : observations) {
        auto counts = index.counts_near(o.state);
        if (dims.contains(o.state.cell)) --counts[static_cast<std::size_t>(o.category)];
        samples.push_back({features_of(triple_from_counts(counts)), o.category});
    }
    return samples;
}

inline TrainedModel train_model(const PipelineConfig& cfg, ArenaDims dims, std::span<const Track> tracks,
                                std::span<const EntityZone> zones) {
    auto data = training_data(tracks, zones, cfg.model.influence_radius, cfg.model.train_frames);
    if (data.observations.empty()) throw DataError("train: tracks contain no observations");
    TrainedModel m;
    m.transitions = build_transition_model(data.sequences, cfg.model.smoothing_alpha, dims);
    m.similarity_radius = cfg.model.similarity_radius;
    m.influence_radius = cfg.model.influence_radius;
    const auto samples = training_samples(dims, data.observations, cfg.model.similarity_radius);
    m.weights = train(samples, cfg.model.train);
    m.observations = std::move(data.observations);
    return m;
}

inline std::string run_train(const PipelineConfig& cfg) {
    const ArtifactPaths paths{cfg.output_dir};
    require_artifact(paths.processed_manifest());
    const auto manifest = read_manifest(paths.processed_manifest());
    const auto tracks = load_tracks(paths);
    const auto zones = load_zones(paths);
    const auto model = train_model(cfg, {manifest.width, manifest.height}, tracks, zones);
    write_model(paths.model(), model);
    return "trained on " + std::to_string(model.observations.size()) + " observations (" +
           std::string(stop_reason_name(model.weights.stop_reason)) + " after " +
           std::to_string(model.weights.epochs) + " epochs)";
}

// Ant positions per processed frame, keyed by ant id: ground truth when the
// simulator's record is present, tracks otherwise.
inline std::vector<std::map<int, Cell>> ant_positions(const ArtifactPaths& paths) {
    const auto index_map = read_index_map(paths);
    std::vector<std::map<int, Cell>> out(index_map.size());
    if (fs::exists(paths.ground_truth())) {
        const auto truth = parse_ground_truth(read_file_bytes(paths.ground_truth()));
        for (std::size_t f = 0; f < index_map.size(); ++f) {
            const auto src = static_cast<std::size_t>(index_map[f]);
            if (src >= truth.frames.size()) throw DataError("ground truth is shorter than the processed sequence");
            for (const auto& r : truth.frames[src])
                if (r.kind == AgentKind::ant) out[f][r.id] = r.position;
        }
        return out;
    }
    for (const auto& t : load_tracks(paths))
        for (const auto& p : t.points)
            if (p.frame >= 0 && static_cast<std::size_t>(p.frame) < out.size()) out[p.frame][t.track_id] = p.cell;
    return out;
}

inline std::string run_predict(const PipelineConfig& cfg) {
    const ArtifactPaths paths{cfg.output_dir};
    const auto model = load_model(paths);
    const auto zones = load_zones(paths);
    const auto positions = ant_positions(paths);
    const auto index = model.index();
    const StateTagger tagger(&index, model.weights);
    const PredictParams params{cfg.prediction.depth_limit, cfg.prediction.threshold, model.influence_radius};

    // A prediction depends only on the cell, so trees are shared between ants
    // and frames that stand on the same cell.
    std::map<Cell, Prediction> by_cell;
    std::string out;
    std::size_t count = 0;
    for (std::size_t f = static_cast<std::size_t>(cfg.eval.from_frame); f < positions.size(); ++f)
        for (const auto& [id, cell] : positions[f]) {
            auto it = by_cell.find(cell);
            if (it == by_cell.end())
                it = by_cell.emplace(cell, live_predict(0, cell, 0, zones, model.transitions, tagger, params)).first;
            Prediction p = it->second;
            p.ant_id = id;
            p.frame_index = static_cast<int>(f);
            out += prediction_to_json(p).dump();
            out += '\n';
            ++count;
        }
    write_file_bytes(paths.predictions(), out);

    // Cross-frame refinement over the observed ant states.
    FrameEstimates estimates(positions.size());
    for (std::size_t f = 0; f < positions.size(); ++f)
        for (const auto& [id, cell] : positions[f]) {
            Move m = Move::stay;
            if (f + 1 < positions.size())
                if (auto next = positions[f + 1].find(id); next != positions[f + 1].end())
                    m = direction_of(next->second.x - cell.x, next->second.y - cell.y);
            const MovementState s{cell, m};
            estimates[f].push_back({s, index.estimate(s)});
        }
    std::vector<double> other_mass;
    refine_across_frames(std::move(estimates), cfg.prediction.refine_rounds, &model.transitions,
                         cfg.prediction.floor_epsilon, &other_mass);
    write_file_bytes(paths.refinement(), nlohmann::ordered_json{{"version", 1},
                                                                {"rounds", cfg.prediction.refine_rounds},
                                                                {"floor_epsilon", cfg.prediction.floor_epsilon},
                                                                {"other_mass", other_mass}}
                                                 .dump() +
                                             "\n");
    return "wrote " + std::to_string(count) + " predictions";
}

inline std::vector<Prediction> read_predictions(const fs::path& p) {
    require_artifact(p);
    const std::string text = read_file_bytes(p);
    std::vector<Prediction> out;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        const auto line = std::string_view(text).substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(prediction_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(p.string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

inline EvalReport evaluate_predictions(const ArtifactPaths& paths, std::size_t k) {
    const auto predictions = read_predictions(paths.predictions());
    require_artifact(paths.ground_truth());
    const auto positions = ant_positions(paths);
    std::vector<EvalCase> cases;
    for (const auto& p : predictions) {
        const auto next = static_cast<std::size_t>(p.frame_index) + 1;
        if (next >= positions.size()) continue;
        const auto it = positions[next].find(p.ant_id);
        if (it == positions[next].end()) continue;
        cases.push_back({p.future_states, it->second});
    }
    return evaluate_top_k(cases, k);
}

inline std::string run_eval(const PipelineConfig& cfg) {
    const ArtifactPaths paths{cfg.output_dir};
    const auto r = evaluate_predictions(paths, cfg.eval.k);
    write_file_bytes(paths.eval(), nlohmann::ordered_json{{"version", 1},
                                                          {"k", r.k},
                                                          {"cases", r.cases},
                                                          {"hits", r.hits},
                                                          {"hit_rate", r.hit_rate()},
                                                          {"baseline", r.baseline()},
                                                          {"skill_ratio", r.skill_ratio()}}
                                           .dump(2) +
                                       "\n");
    return "top-" + std::to_string(r.k) + " hit rate " + std::to_string(r.hit_rate()) + " over " +
           std::to_string(r.cases) + " cases (baseline " + std::to_string(r.baseline()) + ")";
}

// simulate through eval, in order.
inline void run_all(const PipelineConfig& cfg) {
    run_simulate(cfg);
    run_extrude(cfg);
    run_detect(cfg);
    run_track(cfg);
    run_train(cfg);
    run_predict(cfg);
    run_eval(cfg);
}

} // namespace antpred

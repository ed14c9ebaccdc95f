#pragma once

// Pipeline configuration: one YAML document with a section per stage.
// Errors carry the line of the offending key.

#include "antpred/classifier.hpp"
#include "antpred/colony_sim.hpp"
#include "antpred/core.hpp"
#include "antpred/detection.hpp"
#include "antpred/prediction.hpp"

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <initializer_list>
#include <string>

namespace antpred {

struct FramesConfig {
    bool skip = true;
    int target_fps = 30;
};

struct DetectionConfig {
    double epsilon_motion = kDefaultMotionEpsilon;
    double min_height = 0.0; // <= 0: half the blob contrast
    std::size_t min_cells = 3;
    std::size_t window = 10;
    double persistence = 0.5;
    double larva_persistence = 0.8;
    std::size_t knn_k = 3;
};

struct TrackingConfig {
    int n_tracks = 2;
    int max_step = kDefaultMaxStep;
    std::size_t blob_min_cells = 3;
    int stationary_eps = 1;
    std::size_t stationary_min_len = 10;
};

struct ModelConfig {
    double influence_radius = kDefaultInfluenceRadius;
    double similarity_radius = kDefaultSimilarityRadius;
    double smoothing_alpha = 1.0;
    int train_frames = 0; // 0: every processed frame
    TrainConfig train;
};

struct PredictionConfig {
    int depth_limit = kDefaultDepthLimit;
    double threshold = kDefaultWalkThreshold;
    int refine_rounds = 5;
    double floor_epsilon = 0.05;
};

struct EvalConfig {
    std::size_t k = 3;
    int from_frame = 0;
};

struct PipelineConfig {
    ScenarioConfig scenario;
    FramesConfig frames;
    DetectionConfig detection;
    TrackingConfig tracking;
    ModelConfig model;
    PredictionConfig prediction;
    EvalConfig eval;
    std::filesystem::path output_dir = "out";

    double effective_min_height() const {
        return detection.min_height > 0.0
                   ? detection.min_height
                   : (scenario.blob_intensity - scenario.background_intensity) / 2.0;
    }

    void validate() const {
        scenario.validate();
        if (frames.target_fps < 1) throw ConfigError("frames.target_fps must be >= 1");
        if (scenario.fps % frames.target_fps != 0 || frames.target_fps > scenario.fps)
            throw ConfigError("frames.target_fps must divide scenario.fps");
        if (detection.min_cells < 1) throw ConfigError("detection.min_cells must be >= 1");
        if (detection.window < 2) throw ConfigError("detection.window must be >= 2");
        if (detection.knn_k < 1) throw ConfigError("detection.knn_k must be >= 1");
        if (tracking.n_tracks < 1) throw ConfigError("tracking.n_tracks must be >= 1");
        if (tracking.max_step < 1) throw ConfigError("tracking.max_step must be >= 1");
        if (!(model.influence_radius > 0.0) || !(model.similarity_radius >= 0.0))
            throw ConfigError("model radii must be positive");
        if (model.smoothing_alpha < 0.0) throw ConfigError("model.smoothing_alpha must be >= 0");
        if (model.train_frames < 0) throw ConfigError("model.train_frames must be >= 0");
        model.train.validate();
        if (prediction.depth_limit < 0) throw ConfigError("prediction.depth_limit must be >= 0");
        if (!(prediction.threshold > 0.0 && prediction.threshold <= 1.0))
            throw ConfigError("prediction.threshold must lie in (0, 1]");
        if (prediction.refine_rounds < 0) throw ConfigError("prediction.refine_rounds must be >= 0");
        if (eval.k < 1 || eval.k > kMoveCount) throw ConfigError("eval.k must lie in [1, 9]");
        if (eval.from_frame < 0) throw ConfigError("eval.from_frame must be >= 0");
    }
};

namespace detail {

inline std::string at_line(const YAML::Node& n) {
    const auto mark = n.Mark();
    return mark.is_null() ? std::string("config") : "config line " + std::to_string(mark.line + 1);
}

inline void check_keys(const YAML::Node& map, std::initializer_list<const char*> allowed, const std::string& section) {
    if (!map.IsMap()) throw ConfigError(at_line(map) + ": '" + section + "' must be a mapping");
    for (const auto& kv : map) {
        const auto key = kv.first.as<std::string>();
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError(at_line(kv.first) + ": unknown key '" + section + "." + key + "'");
    }
}

template <class T>
void read_key(const YAML::Node& map, const char* key, T& out) {
    const YAML::Node n = map[key];
    if (!n) return;
    try {
        out = n.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(at_line(n) + ": invalid value for '" + key + "'");
    }
}

// Reads a key and applies `check` with the key's line attached on failure.
template <class T, class Check>
void read_checked(const YAML::Node& map, const char* key, T& out, Check check) {
    read_key(map, key, out);
    const YAML::Node n = map[key];
    if (!n) return;
    try {
        check(out);
    } catch (const ConfigError& e) {
        throw ConfigError(at_line(n) + ": " + key + ": " + e.what());
    }
}

inline void require(bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
}

} // namespace detail

inline PipelineConfig parse_config(const std::string& text) {
    using detail::read_checked;
    using detail::read_key;
    using detail::require;
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError("config line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    PipelineConfig cfg;
    if (!root || root.IsNull()) return cfg;
    detail::check_keys(root,
                       {"scenario", "frames", "detection", "tracking", "model", "prediction", "eval", "output_dir"},
                       "");

    if (const auto s = root["scenario"]) {
        detail::check_keys(s,
                           {"kind", "arena_width", "arena_height", "n_ants", "n_larvae", "n_foreign",
                            "n_larva_clusters", "influence_radius", "attraction_strength", "blob_intensity",
                            "background_intensity", "seed", "n_frames", "fps"},
                           "scenario");
        if (const auto k = s["kind"]) {
            try {
                cfg.scenario = ScenarioConfig::preset(parse_scenario(k.as<std::string>()));
            } catch (const ConfigError& e) {
                throw ConfigError(detail::at_line(k) + ": " + e.what());
            }
        }
        auto& sc = cfg.scenario;
        read_checked(s, "arena_width", sc.arena_width, [](int v) { require(v >= 8, "must be >= 8"); });
        read_checked(s, "arena_height", sc.arena_height, [](int v) { require(v >= 8, "must be >= 8"); });
        const auto nonneg = [](int v) { require(v >= 0, "must be >= 0"); };
        read_checked(s, "n_ants", sc.n_ants, nonneg);
        read_checked(s, "n_larvae", sc.n_larvae, nonneg);
        read_checked(s, "n_foreign", sc.n_foreign, nonneg);
        read_checked(s, "n_larva_clusters", sc.n_larva_clusters, [](int v) { require(v >= 1, "must be >= 1"); });
        read_checked(s, "influence_radius", sc.influence_radius, nonneg);
        read_checked(s, "attraction_strength", sc.attraction_strength,
                     [](double v) { require(v >= 0.0 && v < 1.0, "must lie in [0, 1)"); });
        const auto byte = [](int v) { require(v >= 0 && v <= 255, "must lie in [0, 255]"); };
        read_checked(s, "blob_intensity", sc.blob_intensity, byte);
        read_checked(s, "background_intensity", sc.background_intensity, byte);
        read_key(s, "seed", sc.rng_seed);
        read_checked(s, "n_frames", sc.n_frames, [](int v) { require(v >= 1, "must be >= 1"); });
        read_checked(s, "fps", sc.fps, [](int v) { require(v >= 1, "must be >= 1"); });
        if (sc.blob_intensity <= sc.background_intensity)
            throw ConfigError(detail::at_line(s) + ": scenario: blob_intensity must exceed background_intensity");
    }
    if (const auto f = root["frames"]) {
        detail::check_keys(f, {"skip", "target_fps"}, "frames");
        read_key(f, "skip", cfg.frames.skip);
        read_checked(f, "target_fps", cfg.frames.target_fps, [](int v) { require(v >= 1, "must be >= 1"); });
    }
    // Without an explicit target the sequence keeps its native rate.
    if (!root["frames"] || !root["frames"]["target_fps"]) cfg.frames.target_fps = cfg.scenario.fps;
    if (const auto d = root["detection"]) {
        detail::check_keys(d,
                           {"epsilon_motion", "min_height", "min_cells", "window", "persistence",
                            "larva_persistence", "knn_k"},
                           "detection");
        auto& dc = cfg.detection;
        read_checked(d, "epsilon_motion", dc.epsilon_motion, [](double v) { require(v >= 0.0, "must be >= 0"); });
        read_key(d, "min_height", dc.min_height);
        read_checked(d, "min_cells", dc.min_cells, [](std::size_t v) { require(v >= 1, "must be >= 1"); });
        read_checked(d, "window", dc.window, [](std::size_t v) { require(v >= 2, "must be >= 2"); });
        const auto fraction = [](double v) { require(v > 0.0 && v <= 1.0, "must lie in (0, 1]"); };
        read_checked(d, "persistence", dc.persistence, fraction);
        read_checked(d, "larva_persistence", dc.larva_persistence, fraction);
        read_checked(d, "knn_k", dc.knn_k, [](std::size_t v) { require(v >= 1, "must be >= 1"); });
    }
    if (const auto t = root["tracking"]) {
        detail::check_keys(t, {"n_tracks", "max_step", "blob_min_cells", "stationary_eps", "stationary_min_len"},
                           "tracking");
        auto& tc = cfg.tracking;
        read_checked(t, "n_tracks", tc.n_tracks, [](int v) { require(v >= 1, "must be >= 1"); });
        read_checked(t, "max_step", tc.max_step, [](int v) { require(v >= 1, "must be >= 1"); });
        read_key(t, "blob_min_cells", tc.blob_min_cells);
        read_checked(t, "stationary_eps", tc.stationary_eps, [](int v) { require(v >= 0, "must be >= 0"); });
        read_key(t, "stationary_min_len", tc.stationary_min_len);
    }
    if (const auto m = root["model"]) {
        detail::check_keys(m, {"influence_radius", "similarity_radius", "smoothing_alpha", "train_frames", "train"},
                           "model");
        auto& mc = cfg.model;
        read_checked(m, "influence_radius", mc.influence_radius, [](double v) { require(v > 0.0, "must be > 0"); });
        read_checked(m, "similarity_radius", mc.similarity_radius,
                     [](double v) { require(v >= 0.0, "must be >= 0"); });
        read_checked(m, "smoothing_alpha", mc.smoothing_alpha, [](double v) { require(v >= 0.0, "must be >= 0"); });
        read_checked(m, "train_frames", mc.train_frames, [](int v) { require(v >= 0, "must be >= 0"); });
        if (const auto tr = m["train"]) {
            detail::check_keys(tr, {"learning_rate", "max_epochs", "convergence_tol", "triviality_tol", "seed"},
                               "model.train");
            auto& tcfg = mc.train;
            read_checked(tr, "learning_rate", tcfg.learning_rate,
                         [](double v) { require(v >= 0.0, "must be >= 0"); });
            read_checked(tr, "max_epochs", tcfg.max_epochs, [](int v) { require(v >= 1, "must be >= 1"); });
            const auto positive = [](double v) { require(v > 0.0, "must be > 0"); };
            read_checked(tr, "convergence_tol", tcfg.convergence_tol, positive);
            read_checked(tr, "triviality_tol", tcfg.triviality_tol, positive);
            read_key(tr, "seed", tcfg.seed);
        }
    }
    if (const auto p = root["prediction"]) {
        detail::check_keys(p, {"depth_limit", "threshold", "refine_rounds", "floor_epsilon"}, "prediction");
        auto& pc = cfg.prediction;
        read_checked(p, "depth_limit", pc.depth_limit, [](int v) { require(v >= 0, "must be >= 0"); });
        read_checked(p, "threshold", pc.threshold, [](double v) { require(v > 0.0 && v <= 1.0, "must lie in (0, 1]"); });
        read_checked(p, "refine_rounds", pc.refine_rounds, [](int v) { require(v >= 0, "must be >= 0"); });
        read_checked(p, "floor_epsilon", pc.floor_epsilon, [](double v) { require(v >= 0.0, "must be >= 0"); });
    }
    if (const auto e = root["eval"]) {
        detail::check_keys(e, {"k", "from_frame"}, "eval");
        read_checked(e, "k", cfg.eval.k, [](std::size_t v) { require(v >= 1 && v <= kMoveCount, "must lie in [1, 9]"); });
        read_checked(e, "from_frame", cfg.eval.from_frame, [](int v) { require(v >= 0, "must be >= 0"); });
    }
    if (const auto o = root["output_dir"]) {
        try {
            cfg.output_dir = o.as<std::string>();
        } catch (const YAML::Exception&) {
            throw ConfigError(detail::at_line(o) + ": invalid value for 'output_dir'");
        }
    }
    cfg.validate();
    return cfg;
}

inline PipelineConfig load_config(const std::filesystem::path& p) {
    std::string text;
    try {
        text = read_file_bytes(p);
    } catch (const MissingArtifact&) {
        throw ConfigError("config file not found: " + p.string());
    }
    try {
        return parse_config(text);
    } catch (const ConfigError& e) {
        throw ConfigError(p.string() + ": " + e.what());
    }
}

} // namespace antpred

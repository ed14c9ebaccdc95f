#pragma once

// Session-scoped HTTP service for the operator UI: frames, overlays, walk
// trees, live predictions and the correction loop. SessionManager holds the
// logic as plain request -> Response functions; mount_routes wires them to an
// httplib server.

#include "antpred/core.hpp"
#include "antpred/frame_store.hpp"
#include "antpred/model_io.hpp"
#include "antpred/pipeline.hpp"
#include "antpred/prediction.hpp"

#include "httplib.h"
#include "json.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace antpred {

inline constexpr int kApiVersion = 1;

struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

inline Response json_response(int status, nlohmann::ordered_json body) {
    nlohmann::ordered_json out = {{"version", kApiVersion}};
    for (auto& [k, v] : body.items()) out[k] = std::move(v);
    return {status, "application/json", out.dump()};
}

inline Response error_response(int status, std::string_view kind, const std::string& message) {
    return json_response(status, {{"error", {{"kind", kind}, {"message", message}}}});
}

struct CorrectionRecord {
    int tree_id = 0;
    int node = 0;
    CorrectionAction action = CorrectionAction::prune;
    double factor = 1.0;
    std::string digest_before;
    std::string digest_after;
};

inline nlohmann::ordered_json state_to_json(const MovementState& s) {
    return {{"x", s.cell.x}, {"y", s.cell.y}, {"move", move_name(s.move)}};
}

inline nlohmann::ordered_json walk_tree_to_json(const WalkTree& tree, int tree_id, int depth_limit) {
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& n : tree.nodes) {
        const bool position_root = tree.entry_root && n.parent < 0;
        const Cell dest = position_root ? n.state.cell : destination(n.state);
        nodes.push_back({{"id", n.id},
                         {"parent", n.parent},
                         {"state", state_to_json(n.state)},
                         {"cell", {dest.x, dest.y}},
                         {"transition_p", n.transition_probability},
                         {"p", n.path_probability},
                         {"depth", n.depth},
                         {"category", category_name(n.category)},
                         {"tag", prediction_tag_name(tag_for(n.category))},
                         {"scores", n.scores},
                         {"children", n.children}});
    }
    return {{"tree_id", tree_id},
            {"mode", walk_mode_name(tree.mode)},
            {"threshold", tree.threshold},
            {"depth_limit", depth_limit},
            {"root", 0},
            {"nodes", nodes}};
}

class Session {
public:
    Session(std::string id, const std::filesystem::path& dir) : id_(std::move(id)), paths_{dir} {
        require_artifact(paths_.processed_manifest());
        require_artifact(paths_.model());
        manifest_ = read_manifest(paths_.processed_manifest());
        if (std::filesystem::exists(paths_.extruded_manifest())) extruded_ = read_manifest(paths_.extruded_manifest());
        model_ = read_model(paths_.model());
        index_ = model_.index();
        if (std::filesystem::exists(paths_.zones())) zones_ = zones_from_json_text(read_file_bytes(paths_.zones()));
        if (std::filesystem::exists(paths_.index_map()) &&
            (std::filesystem::exists(paths_.ground_truth()) || std::filesystem::exists(paths_.tracks())))
            positions_ = ant_positions(paths_);
        if (std::filesystem::exists(paths_.tracks())) tracks_ = tracks_from_jsonl(read_file_bytes(paths_.tracks()));
    }

    const std::string& id() const { return id_; }
    std::size_t frame_count() const { return manifest_.frame_paths.size(); }

    Response summary() const {
        std::shared_lock lock(mutex_);
        return json_response(200, {{"session_id", id_},
                                   {"artifact_dir", paths_.root.string()},
                                   {"cursor", cursor_},
                                   {"n_frames", frame_count()},
                                   {"width", manifest_.width},
                                   {"height", manifest_.height},
                                   {"model_digest", model_digest(model_)},
                                   {"corrections", log_.size()}});
    }

    Response get_frame(long index, std::string_view variant) {
        std::unique_lock lock(mutex_);
        if (auto err = check_index(index)) return *err;
        std::filesystem::path p;
        if (variant.empty() || variant == "regular") {
            p = paths_.processed_dir() / manifest_.frame_paths[static_cast<std::size_t>(index)];
        } else if (variant == "extruded") {
            if (!extruded_) return error_response(404, "not_found", "missing artifact: extruded frames");
            p = paths_.extruded_dir() / extruded_->frame_paths[static_cast<std::size_t>(index)];
        } else {
            return error_response(400, "bad_request", "variant must be 'regular' or 'extruded'");
        }
        if (!std::filesystem::exists(p)) return error_response(404, "not_found", "missing artifact: " + p.string());
        cursor_ = static_cast<int>(index);
        return {200, "application/octet-stream", read_file_bytes(p)};
    }

    Response get_overlays(long index) const {
        std::shared_lock lock(mutex_);
        if (auto err = check_index(index)) return *err;
        nlohmann::ordered_json zones = nlohmann::ordered_json::array();
        for (const auto& z : zones_) zones.push_back(zone_to_json(z));
        nlohmann::ordered_json tracks = nlohmann::ordered_json::array();
        for (const auto& t : tracks_)
            for (const auto& p : t.points)
                if (p.frame == index)
                    tracks.push_back({{"track", t.track_id}, {"x", p.cell.x}, {"y", p.cell.y},
                                      {"interpolated", p.interpolated}});
        return json_response(200, {{"frame", index},
                                   {"zones", zones},
                                   {"tracks", tracks},
                                   {"predictions", predictions_at(static_cast<std::size_t>(index))}});
    }

    Response get_predictions(long index) const {
        std::shared_lock lock(mutex_);
        if (auto err = check_index(index)) return *err;
        if (!trained()) return error_response(409, "conflict", "model is not trained");
        return json_response(200, {{"frame", index}, {"predictions", predictions_at(static_cast<std::size_t>(index))}});
    }

    // Body: {"x","y"[,"move"],"mode","depth","threshold"}. Without "move" the
    // walk starts from the position and branches over the states there.
    Response post_walk(const nlohmann::json& body) {
        std::unique_lock lock(mutex_);
        if (!trained()) return error_response(409, "conflict", "model is not trained");
        try {
            const Cell cell{body.at("x").get<int>(), body.at("y").get<int>()};
            const WalkMode mode = parse_walk_mode(body.value("mode", std::string("system")));
            const int depth = body.value("depth", kDefaultDepthLimit);
            const double threshold = body.value("threshold", kDefaultWalkThreshold);
            const StateTagger tagger(&index_, model_.weights);
            WalkTree tree;
            if (body.contains("move")) {
                const auto m = parse_move(body.at("move").get<std::string>());
                if (!m) return error_response(400, "bad_request", "unknown move");
                tree = expand_walk({cell, *m}, model_.transitions, tagger, depth, threshold, mode);
            } else {
                tree = expand_walk_from_cell(cell, model_.transitions, tagger, depth, threshold, mode);
            }
            last_tree_ = std::move(tree);
            last_tree_id_ = ++tree_counter_;
            return json_response(200, walk_tree_to_json(*last_tree_, last_tree_id_, depth));
        } catch (const nlohmann::json::exception& e) {
            return error_response(400, "bad_request", e.what());
        } catch (const Error& e) {
            return error_response(400, "bad_request", e.what());
        }
    }

    // Body: {"tree_id","node","action":"prune|boost","factor"[,"persist"]}.
    Response post_correction(const nlohmann::json& body) {
        std::unique_lock lock(mutex_);
        int tree_id = 0;
        int node = 0;
        CorrectionAction action{};
        double factor = 1.0;
        bool persist = false;
        try {
            tree_id = body.at("tree_id").get<int>();
            node = body.at("node").get<int>();
            action = parse_correction_action(body.at("action").get<std::string>());
            factor = body.value("factor", 1.0);
            persist = body.value("persist", false);
        } catch (const nlohmann::json::exception& e) {
            return error_response(400, "bad_request", e.what());
        } catch (const Error& e) {
            return error_response(400, "bad_request", e.what());
        }
        if (!last_tree_ || tree_id != last_tree_id_)
            return error_response(409, "conflict", "tree " + std::to_string(tree_id) +
                                                       " is stale or unknown; re-fetch the walk");
        if (!last_tree_->find(node) || node == last_tree_->root().id)
            return error_response(409, "conflict", "branch " + std::to_string(node) +
                                                       " is not in the current tree; re-fetch the walk");
        if (action == CorrectionAction::boost && !(factor >= 1.0))
            return error_response(400, "bad_request", "boost factor must be >= 1");

        const BranchEdge edge = branch_edge(*last_tree_, node);
        const std::string before = model_digest(model_);
        model_.transitions = apply_correction(model_.transitions, edge, action, factor);
        const std::string after = model_digest(model_);
        const bool changed = before != after;
        log_.push_back({tree_id, node, action, factor, before, after});
        // The tree no longer reflects the model once it changed.
        if (changed) last_tree_.reset();

        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        const auto dist = edge.from ? model_.transitions.row(*edge.from)
                                    : model_.transitions.entry_distribution(edge.to.cell);
        for (const auto& [s, p] : dist) row.push_back({{"state", state_to_json(s)}, {"p", p}});
        if (persist) write_model(paths_.model(), model_);
        return json_response(200, {{"summary", !changed                              ? "no-op"
                                               : action == CorrectionAction::prune ? "pruned"
                                                                                   : "boosted"},
                                   {"from", edge.from ? state_to_json(*edge.from) : nlohmann::ordered_json(nullptr)},
                                   {"to", state_to_json(edge.to)},
                                   {"row", row},
                                   {"digest_before", before},
                                   {"model_digest", after},
                                   {"log_size", log_.size()},
                                   {"persisted", persist}});
    }

    Response persist() {
        std::unique_lock lock(mutex_);
        write_model(paths_.model(), model_);
        return json_response(200, {{"persisted", paths_.model().string()},
                                   {"model_digest", model_digest(model_)},
                                   {"corrections", log_.size()}});
    }

    std::vector<CorrectionRecord> log() const {
        std::shared_lock lock(mutex_);
        return log_;
    }

    std::string digest() const {
        std::shared_lock lock(mutex_);
        return model_digest(model_);
    }

    int cursor() const {
        std::shared_lock lock(mutex_);
        return cursor_;
    }

private:
    bool trained() const { return !model_.transitions.empty() && model_.weights.trained(); }

    std::optional<Response> check_index(long index) const {
        if (index < 0 || static_cast<std::size_t>(index) >= frame_count())
            return error_response(416, "range", "frame " + std::to_string(index) + " outside [0, " +
                                                    std::to_string(frame_count()) + ")");
        return std::nullopt;
    }

    nlohmann::ordered_json predictions_at(std::size_t index) const {
        nlohmann::ordered_json out = nlohmann::ordered_json::array();
        if (!trained() || index >= positions_.size()) return out;
        const StateTagger tagger(&index_, model_.weights);
        const PredictParams params{kDefaultDepthLimit, kDefaultWalkThreshold, model_.influence_radius};
        for (const auto& [id, cell] : positions_[index])
            out.push_back(prediction_to_json(
                live_predict(id, cell, static_cast<int>(index), zones_, model_.transitions, tagger, params)));
        return out;
    }

    std::string id_;
    ArtifactPaths paths_;
    SequenceManifest manifest_;
    std::optional<SequenceManifest> extruded_;
    TrainedModel model_;
    ObservationIndex index_;
    std::vector<EntityZone> zones_;
    std::vector<Track> tracks_;
    std::vector<std::map<int, Cell>> positions_;

    int cursor_ = 0;
    std::optional<WalkTree> last_tree_;
    int last_tree_id_ = 0;
    int tree_counter_ = 0;
    std::vector<CorrectionRecord> log_;
    mutable std::shared_mutex mutex_;
};

class SessionManager {
public:
    explicit SessionManager(std::filesystem::path default_dir = {}) : default_dir_(std::move(default_dir)) {}

    // Body (optional): {"artifact_dir": path}.
    Response create_session(const std::string& body) {
        std::filesystem::path dir = default_dir_;
        if (!body.empty()) {
            try {
                const auto j = nlohmann::json::parse(body);
                if (j.contains("artifact_dir")) dir = j.at("artifact_dir").get<std::string>();
            } catch (const nlohmann::json::exception& e) {
                return error_response(400, "bad_request", e.what());
            }
        }
        std::shared_ptr<Session> session;
        try {
            std::lock_guard lock(mutex_);
            session = std::make_shared<Session>("s" + std::to_string(++counter_), dir);
            sessions_[session->id()] = session;
        } catch (const MissingArtifact& e) {
            const auto name = std::filesystem::path(e.path()).filename() == "model.json" ? "model" : "manifest";
            return error_response(404, "not_found", std::string(name) + " not found: " + e.path());
        } catch (const Error& e) {
            return error_response(422, "invalid_artifact", e.what());
        }
        Response r = session->summary();
        r.status = 201;
        return r;
    }

    std::shared_ptr<Session> find(const std::string& id) const {
        std::lock_guard lock(mutex_);
        auto it = sessions_.find(id);
        return it == sessions_.end() ? nullptr : it->second;
    }

    template <class F>
    Response with_session(const std::string& id, F&& f) const {
        auto s = find(id);
        if (!s) return error_response(404, "not_found", "unknown session '" + id + "'");
        try {
            return f(*s);
        } catch (const Error& e) {
            return error_response(422, "invalid_artifact", e.what());
        }
    }

    Response get_frame(const std::string& id, long index, std::string_view variant) {
        return with_session(id, [&](Session& s) { return s.get_frame(index, variant); });
    }
    Response get_overlays(const std::string& id, long index) {
        return with_session(id, [&](Session& s) { return s.get_overlays(index); });
    }
    Response get_predictions(const std::string& id, long index) {
        return with_session(id, [&](Session& s) { return s.get_predictions(index); });
    }
    Response post_walk(const std::string& id, const std::string& body) {
        return with_session(id, [&](Session& s) {
            try {
                return s.post_walk(nlohmann::json::parse(body));
            } catch (const nlohmann::json::parse_error& e) {
                return error_response(400, "bad_request", e.what());
            }
        });
    }
    Response post_correction(const std::string& id, const std::string& body) {
        return with_session(id, [&](Session& s) {
            try {
                return s.post_correction(nlohmann::json::parse(body));
            } catch (const nlohmann::json::parse_error& e) {
                return error_response(400, "bad_request", e.what());
            }
        });
    }
    Response persist(const std::string& id) {
        return with_session(id, [&](Session& s) { return s.persist(); });
    }
    Response get_session(const std::string& id) {
        return with_session(id, [&](Session& s) { return s.summary(); });
    }

private:
    std::filesystem::path default_dir_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    int counter_ = 0;
};

inline void mount_routes(httplib::Server& server, SessionManager& sessions) {
    const auto send = [](httplib::Response& res, const Response& r) {
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    server.Post("/sessions", [&sessions, send](const httplib::Request& req, httplib::Response& res) {
        send(res, sessions.create_session(req.body));
    });
    server.Get(R"(/sessions/([^/]+))", [&sessions, send](const httplib::Request& req, httplib::Response& res) {
        send(res, sessions.get_session(req.matches[1]));
    });
    server.Get(R"(/sessions/([^/]+)/frames/(-?\d+))",
               [&sessions, send](const httplib::Request& req, httplib::Response& res) {
                   const std::string variant = req.has_param("variant") ? req.get_param_value("variant") : "regular";
                   send(res, sessions.get_frame(req.matches[1], std::stol(req.matches[2]), variant));
               });
    server.Get(R"(/sessions/([^/]+)/frames/(-?\d+)/overlays)",
               [&sessions, send](const httplib::Request& req, httplib::Response& res) {
                   send(res, sessions.get_overlays(req.matches[1], std::stol(req.matches[2])));
               });
    server.Get(R"(/sessions/([^/]+)/predictions/(-?\d+))",
               [&sessions, send](const httplib::Request& req, httplib::Response& res) {
                   send(res, sessions.get_predictions(req.matches[1], std::stol(req.matches[2])));
               });
    server.Post(R"(/sessions/([^/]+)/walks)", [&sessions, send](const httplib::Request& req, httplib::Response& res) {
        send(res, sessions.post_walk(req.matches[1], req.body));
    });
    server.Post(R"(/sessions/([^/]+)/corrections)",
                [&sessions, send](const httplib::Request& req, httplib::Response& res) {
                    send(res, sessions.post_correction(req.matches[1], req.body));
                });
    server.Post(R"(/sessions/([^/]+)/persist)", [&sessions, send](const httplib::Request& req, httplib::Response& res) {
        send(res, sessions.persist(req.matches[1]));
    });
}

} // namespace antpred

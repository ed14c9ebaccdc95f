#include "antpred/service.hpp"

#include <gtest/gtest.h>

#include <thread>

#include <unistd.h>

using namespace antpred;
using nlohmann::json;

namespace {

// One trained artifact directory shared by every test; sessions never
// persist unless a test asks, and those tests use a private copy.
const fs::path& fixture_dir() {
    static const fs::path dir = [] {
        const auto d = fs::temp_directory_path() / ("antpred_service_fixture_" + std::to_string(::getpid()));
        fs::remove_all(d);
        auto cfg = parse_config(R"(scenario:
  kind: larval-local
  arena_width: 32
  arena_height: 32
  n_ants: 4
  n_larvae: 2
  n_larva_clusters: 2
  seed: 9
  n_frames: 80
frames:
  skip: false
tracking:
  n_tracks: 4
prediction:
  depth_limit: 3
)");
        cfg.output_dir = d;
        run_all(cfg);
        return d;
    }();
    return dir;
}

fs::path private_copy(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("antpred_service_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::copy(fixture_dir(), d, fs::copy_options::recursive);
    return d;
}

json body_of(const Response& r) { return json::parse(r.body); }

std::string open(SessionManager& m, const fs::path& dir) {
    const auto r = m.create_session(json{{"artifact_dir", dir.string()}}.dump());
    EXPECT_EQ(r.status, 201) << r.body;
    return body_of(r).at("session_id").get<std::string>();
}

// A cell some ant actually visits, so the model has evidence there.
Cell busy_cell() {
    const auto tracks = load_tracks({fixture_dir()});
    return tracks.front().points[5].cell;
}

std::string walk_body(Cell c, const std::string& mode, int depth = 3) {
    return json{{"x", c.x}, {"y", c.y}, {"mode", mode}, {"depth", depth}, {"threshold", 1e-3}}.dump();
}

} // namespace

TEST(Service, CreateSessionReportsTheArtifactSummary) {
    SessionManager m;
    const auto r = m.create_session(json{{"artifact_dir", fixture_dir().string()}}.dump());
    ASSERT_EQ(r.status, 201);
    const auto j = body_of(r);
    EXPECT_EQ(j.at("version"), kApiVersion);
    EXPECT_EQ(j.at("session_id"), "s1");
    EXPECT_EQ(j.at("n_frames"), 80);
    EXPECT_EQ(j.at("model_digest").get<std::string>().size(), 16u);
    EXPECT_EQ(body_of(m.create_session(json{{"artifact_dir", fixture_dir().string()}}.dump())).at("session_id"), "s2");
}

TEST(Service, MissingModelIs404NamingTheModel) {
    const auto d = private_copy("nomodel");
    fs::remove(d / "model.json");
    SessionManager m;
    const auto r = m.create_session(json{{"artifact_dir", d.string()}}.dump());
    EXPECT_EQ(r.status, 404);
    EXPECT_NE(body_of(r).at("error").at("message").get<std::string>().find("model"), std::string::npos);
    EXPECT_EQ(m.create_session("{oops").status, 400);
}

TEST(Service, UnknownSessionIs404) {
    SessionManager m;
    EXPECT_EQ(m.get_session("s99").status, 404);
    EXPECT_EQ(m.post_walk("s99", "{}").status, 404);
}

TEST(Service, FramesServeRawBytesAndMoveTheCursor) {
    SessionManager m;
    const auto id = open(m, fixture_dir());
    const auto r = m.get_frame(id, 7, "regular");
    ASSERT_EQ(r.status, 200);
    EXPECT_EQ(r.content_type, "application/octet-stream");
    EXPECT_EQ(decode_pgm(r.body).width, 32);
    EXPECT_EQ(m.find(id)->cursor(), 7);
    EXPECT_EQ(m.get_frame(id, 7, "extruded").status, 200);
    EXPECT_EQ(m.get_frame(id, 7, "sepia").status, 400);
}

TEST(Service, OutOfRangeFramesAre416) {
    SessionManager m;
    const auto id = open(m, fixture_dir());
    for (long i : {-1L, 80L, 1000L}) {
        const auto r = m.get_frame(id, i, "regular");
        EXPECT_EQ(r.status, 416);
        EXPECT_EQ(body_of(r).at("error").at("kind"), "range");
    }
    EXPECT_EQ(m.get_overlays(id, 80).status, 416);
    EXPECT_EQ(m.get_predictions(id, -3).status, 416);
}

TEST(Service, OverlaysAndPredictionsCoverEveryAnt) {
    SessionManager m;
    const auto id = open(m, fixture_dir());
    // Tracking starts at the first frame where all four ants are separate.
    const int f = load_tracks({fixture_dir()}).front().points.front().frame + 10;
    const auto o = body_of(m.get_overlays(id, f));
    EXPECT_EQ(o.at("tracks").size(), 4u);
    EXPECT_TRUE(o.at("zones").is_array());
    const auto p = body_of(m.get_predictions(id, f));
    ASSERT_EQ(p.at("predictions").size(), 4u);
    for (const auto& pred : p.at("predictions")) {
        EXPECT_EQ(pred.at("frame"), f);
        for (const auto& s : pred.at("states")) {
            EXPECT_GT(s.at("p").get<double>(), 0.0);
            EXPECT_LE(s.at("p").get<double>(), 1.0);
        }
    }
}

TEST(Service, UserTreeContainsTheSystemTree) {
    SessionManager m;
    const auto id = open(m, fixture_dir());
    const auto user = body_of(m.post_walk(id, walk_body(busy_cell(), "user")));
    const auto sys = body_of(m.post_walk(id, walk_body(busy_cell(), "system")));
    EXPECT_EQ(user.at("mode"), "user");
    EXPECT_EQ(sys.at("mode"), "system");
    EXPECT_GT(sys.at("tree_id").get<int>(), user.at("tree_id").get<int>());
    std::map<int, json> by_id;
    for (const auto& n : user.at("nodes")) by_id[n.at("id").get<int>()] = n;
    for (const auto& n : sys.at("nodes")) {
        ASSERT_TRUE(by_id.count(n.at("id").get<int>()));
        EXPECT_EQ(by_id[n.at("id").get<int>()].at("state"), n.at("state"));
        EXPECT_GE(n.at("p").get<double>(), 1e-3);
    }
    EXPECT_GE(user.at("nodes").size(), sys.at("nodes").size());
}

TEST(Service, WalkInputErrors) {
    SessionManager m;
    const auto id = open(m, fixture_dir());
    EXPECT_EQ(m.post_walk(id, R"({"y": 1})").status, 400);
    EXPECT_EQ(m.post_walk(id, R"({"x": 1, "y": 1, "mode": "sideways"})").status, 400);
    EXPECT_EQ(m.post_walk(id, R"({"x": 500, "y": 1})").status, 400);
    EXPECT_EQ(m.post_walk(id, "not json").status, 400);
}

TEST(Service, PruneRemovesTheBranchAndChangesTheDigest) {
    SessionManager m;
    const auto id = open(m, fixture_dir());
    const Cell c = busy_cell();
    const auto tree = body_of(m.post_walk(id, walk_body(c, "system", 2)));
    // Take a depth-2 node so the pruned edge is a real transition.
    json target;
    for (const auto& n : tree.at("nodes"))
        if (n.at("depth") == 2) {
            target = n;
            break;
        }
    ASSERT_FALSE(target.is_null());
    json parent;
    for (const auto& n : tree.at("nodes"))
        if (n.at("id") == target.at("parent")) parent = n;

    const auto r = m.post_correction(
        id, json{{"tree_id", tree.at("tree_id")}, {"node", target.at("id")}, {"action", "prune"}}.dump());
    ASSERT_EQ(r.status, 200) << r.body;
    const auto j = body_of(r);
    EXPECT_EQ(j.at("summary"), "pruned");
    EXPECT_NE(j.at("digest_before"), j.at("model_digest"));
    for (const auto& e : j.at("row")) EXPECT_NE(e.at("state"), target.at("state"));

    const auto again = body_of(m.post_walk(id, walk_body(c, "user", 2)));
    std::map<int, json> by_id;
    for (const auto& n : again.at("nodes")) by_id[n.at("id").get<int>()] = n;
    // Edges out of the root come from the entry distribution, not a state row.
    for (const auto& n : again.at("nodes"))
        if (n.at("parent").get<int>() >= 0 && by_id[n.at("parent").get<int>()].at("parent").get<int>() >= 0)
            EXPECT_FALSE(by_id[n.at("parent").get<int>()].at("state") == parent.at("state") &&
                         n.at("state") == target.at("state"));
    EXPECT_EQ(m.find(id)->log().size(), 1u);
}

TEST(Service, BoostByOneIsANoOp) {
    SessionManager m;
    const auto id = open(m, fixture_dir());
    const auto before = m.find(id)->digest();
    const auto tree = body_of(m.post_walk(id, walk_body(busy_cell(), "system")));
    const int node = tree.at("nodes").at(1).at("id").get<int>();
    const auto j = body_of(m.post_correction(
        id, json{{"tree_id", tree.at("tree_id")}, {"node", node}, {"action", "boost"}, {"factor", 1.0}}.dump()));
    EXPECT_EQ(j.at("summary"), "no-op");
    EXPECT_EQ(j.at("model_digest"), before);
    EXPECT_EQ(m.find(id)->log().size(), 1u);
    // The tree is still current after a no-op.
    const auto boost = body_of(m.post_correction(
        id, json{{"tree_id", tree.at("tree_id")}, {"node", node}, {"action", "boost"}, {"factor", 3.0}}.dump()));
    EXPECT_EQ(boost.at("summary"), "boosted");
    EXPECT_NE(boost.at("model_digest"), before);
}

TEST(Service, StaleTreesAndUnknownNodesConflict) {
    SessionManager m;
    const auto id = open(m, fixture_dir());
    EXPECT_EQ(m.post_correction(id, R"({"tree_id": 1, "node": 1, "action": "prune"})").status, 409);
    const auto first = body_of(m.post_walk(id, walk_body(busy_cell(), "system")));
    m.post_walk(id, walk_body(busy_cell(), "system"));
    const auto stale = m.post_correction(
        id, json{{"tree_id", first.at("tree_id")}, {"node", 1}, {"action", "prune"}}.dump());
    EXPECT_EQ(stale.status, 409);
    EXPECT_EQ(body_of(stale).at("error").at("kind"), "conflict");
    const int current = first.at("tree_id").get<int>() + 1;
    EXPECT_EQ(m.post_correction(id, json{{"tree_id", current}, {"node", 99999}, {"action", "prune"}}.dump()).status,
              409);
    EXPECT_EQ(m.post_correction(id, json{{"tree_id", current}, {"node", 0}, {"action", "prune"}}.dump()).status, 409);
    EXPECT_EQ(m.post_correction(id, json{{"tree_id", current}, {"node", 1}, {"action", "graft"}}.dump()).status, 400);
    EXPECT_EQ(
        m.post_correction(id, json{{"tree_id", current}, {"node", 1}, {"action", "boost"}, {"factor", 0.5}}.dump())
            .status,
        400);
}

TEST(Service, PersistWritesTheCorrectedModel) {
    const auto d = private_copy("persist");
    SessionManager m;
    const auto id = open(m, d);
    const auto tree = body_of(m.post_walk(id, walk_body(busy_cell(), "system")));
    const auto r = body_of(m.post_correction(
        id, json{{"tree_id", tree.at("tree_id")}, {"node", 1}, {"action", "prune"}, {"persist", true}}.dump()));
    EXPECT_EQ(model_digest(read_model(d / "model.json")), r.at("model_digest").get<std::string>());
    EXPECT_EQ(body_of(m.persist(id)).at("model_digest"), r.at("model_digest"));
    // A fresh session sees the persisted model.
    EXPECT_EQ(body_of(m.get_session(open(m, d))).at("model_digest"), r.at("model_digest"));
}

TEST(Service, HttpRoundTrip) {
    SessionManager m(fixture_dir());
    httplib::Server server;
    mount_routes(server, m);
    const int port = server.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client client("127.0.0.1", port);

    const auto created = client.Post("/sessions", "", "application/json");
    ASSERT_TRUE(created);
    EXPECT_EQ(created->status, 201);
    const auto sid = json::parse(created->body).at("session_id").get<std::string>();

    const auto frame = client.Get("/sessions/" + sid + "/frames/3?variant=extruded");
    ASSERT_TRUE(frame);
    EXPECT_EQ(frame->status, 200);
    EXPECT_EQ(frame->body.substr(0, 2), "P5");
    EXPECT_EQ(client.Get("/sessions/" + sid + "/frames/999")->status, 416);
    EXPECT_EQ(client.Get("/sessions/" + sid + "/frames/3/overlays")->status, 200);
    EXPECT_EQ(client.Get("/sessions/" + sid + "/predictions/3")->status, 200);

    const auto walk = client.Post("/sessions/" + sid + "/walks", walk_body(busy_cell(), "system"), "application/json");
    ASSERT_TRUE(walk);
    ASSERT_EQ(walk->status, 200);
    const auto tree = json::parse(walk->body);
    const auto corr = client.Post("/sessions/" + sid + "/corrections",
                                  json{{"tree_id", tree.at("tree_id")}, {"node", 1}, {"action", "prune"}}.dump(),
                                  "application/json");
    ASSERT_TRUE(corr);
    EXPECT_EQ(corr->status, 200);
    EXPECT_EQ(json::parse(corr->body).at("summary"), "pruned");

    server.stop();
    t.join();
}

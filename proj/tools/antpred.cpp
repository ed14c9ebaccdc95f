// antpred: run pipeline stages from a YAML config.
//
//   antpred simulate --config configs/scenario1.yaml --output-dir out
//   antpred extrude|detect|track|train|predict|eval --config ...
//   antpred run --config ...            (every stage in order)
//   antpred serve --output-dir out --port 8080
//
// Exit codes: 0 success, 1 usage or config error, 2 data error.

#include "antpred/config.hpp"
#include "antpred/pipeline.hpp"
#include "antpred/service.hpp"

#include "CLI11.hpp"

#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace {

struct Overrides {
    std::string config_path;
    std::string output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> n_frames;
    std::optional<int> depth;
    std::optional<double> threshold;
    std::optional<std::size_t> k;
    std::optional<int> train_frames;
    std::optional<int> from_frame;
};

antpred::PipelineConfig resolve(const Overrides& o) {
    antpred::PipelineConfig cfg =
        o.config_path.empty() ? antpred::parse_config("") : antpred::load_config(o.config_path);
    if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
    if (o.seed) cfg.scenario.rng_seed = *o.seed;
    if (o.n_frames) cfg.scenario.n_frames = *o.n_frames;
    if (o.depth) cfg.prediction.depth_limit = *o.depth;
    if (o.threshold) cfg.prediction.threshold = *o.threshold;
    if (o.k) cfg.eval.k = *o.k;
    if (o.train_frames) cfg.model.train_frames = *o.train_frames;
    if (o.from_frame) cfg.eval.from_frame = *o.from_frame;
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic ant colony simulation and movement prediction pipeline"};
    app.require_subcommand(1);

    Overrides o;
    std::string host = "127.0.0.1";
    int port = 8080;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", o.config_path, "YAML pipeline config");
        sub->add_option("-o,--output-dir", o.output_dir, "artifact directory (overrides config)");
        sub->add_option("--seed", o.seed, "simulator seed (overrides config)");
    };

    using Stage = std::function<std::string(const antpred::PipelineConfig&)>;
    const std::vector<std::pair<std::string, Stage>> stages = {
        {"simulate", antpred::run_simulate}, {"extrude", antpred::run_extrude}, {"detect", antpred::run_detect},
        {"track", antpred::run_track},       {"train", antpred::run_train},     {"predict", antpred::run_predict},
        {"eval", antpred::run_eval},
    };
    const std::map<std::string, std::string> help = {
        {"simulate", "simulate the colony: frames + ground truth"},
        {"extrude", "standardise, skip and extrude frames"},
        {"detect", "detect zones of interest"},
        {"track", "track ants across frames"},
        {"train", "build the transition model and train the classifier"},
        {"predict", "live predictions for every ant and frame"},
        {"eval", "top-k next-cell hit rate against ground truth"},
    };
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, stage] : stages) {
        auto* sub = app.add_subcommand(name, help.at(name));
        add_common(sub);
        subs[name] = sub;
    }
    subs["simulate"]->add_option("--n-frames", o.n_frames, "number of frames to simulate");
    subs["train"]->add_option("--train-frames", o.train_frames, "train on this many leading frames (0 = all)");
    subs["predict"]->add_option("--depth", o.depth, "walk depth limit");
    subs["predict"]->add_option("--threshold", o.threshold, "walk path-probability threshold");
    subs["predict"]->add_option("--from-frame", o.from_frame, "first frame to predict from");
    subs["eval"]->add_option("-k", o.k, "top-k cells counted as a hit");

    auto* run = app.add_subcommand("run", "every stage from simulate to eval");
    add_common(run);
    run->add_option("--n-frames", o.n_frames, "number of frames to simulate");

    auto* serve = app.add_subcommand("serve", "HTTP service over an artifact directory");
    add_common(serve);
    serve->add_option("--host", host, "bind address");
    serve->add_option("--port", port, "port");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const auto cfg = resolve(o);
        if (*serve) {
            antpred::SessionManager sessions(cfg.output_dir);
            httplib::Server server;
            antpred::mount_routes(server, sessions);
            std::cout << "serving " << cfg.output_dir.string() << " on http://" << host << ":" << port << "\n";
            if (!server.listen(host, port)) {
                std::cerr << "error: cannot bind " << host << ":" << port << "\n";
                return 1;
            }
            return 0;
        }
        for (const auto& [name, stage] : stages) {
            if (*run || *subs[name]) std::cout << name << ": " << stage(cfg) << "\n";
        }
        return 0;
    } catch (const antpred::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const antpred::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

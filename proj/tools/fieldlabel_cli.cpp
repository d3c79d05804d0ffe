#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fieldlabel/pipeline/stages.hpp"
#include "fieldlabel/review/service.hpp"

namespace fl = fieldlabel;
namespace pl = fieldlabel::pipeline;

namespace {

struct Flags {
    std::string config;
    std::string manifest;
    std::string out;
    std::vector<std::string> strategies;
    double t_bnd = 0;
    double t_ext = 0;
    int workers = 0;
    std::uint64_t seed = 0;
    bool strict = false;
    double train_fraction = 0;
    int port = 8080;
    std::string host = "127.0.0.1";
    std::string store;
    std::string images;
};

void report(const pl::StageResult& r) {
    std::printf("%s: %zu ok, %zu skipped, %zu failed\n", pl::to_string(r.stage).c_str(), r.count(pl::SiteOutcome::Status::ok),
                r.count(pl::SiteOutcome::Status::skipped), r.count(pl::SiteOutcome::Status::failed));
    for (const auto& s : r.sites)
        if (s.status == pl::SiteOutcome::Status::failed) std::fprintf(stderr, "  %s: %s\n", s.site_id.c_str(), s.error.c_str());
    if (!r.global_error.empty()) std::fprintf(stderr, "error: %s\n", r.global_error.c_str());
}

int serve(const pl::PipelineConfig& cfg, const std::map<std::string, std::string>& extra, const Flags& f,
          const CLI::App& sub) {
    const int port = sub.count("--port") ? f.port : extra.contains("port") ? std::stoi(extra.at("port")) : f.port;
    const std::string host = sub.count("--host") ? f.host : extra.contains("host") ? extra.at("host") : f.host;
    std::string store_dir = sub.count("--store") ? f.store : extra.contains("store") ? extra.at("store") : "";
    if (store_dir.empty()) store_dir = (cfg.output_dir / "review").string();
    const std::string images = sub.count("--images") ? f.images : extra.contains("images") ? extra.at("images") : "";
    if (cfg.manifest_path.empty()) throw fl::UsageError("no manifest given (--manifest)");

    const auto sites = fl::read_manifest(cfg.manifest_path);
    fl::review::ReviewStore store(store_dir, fl::review::load_candidates(pl::Layout{cfg.output_dir}.stage_dir(pl::Stage::select), sites));
    httplib::Server server;
    fl::review::install_routes(server, store, images);
    std::printf("review service on http://%s:%d (store %s)\n", host.c_str(), port, store_dir.c_str());
    std::fflush(stdout);
    if (!server.listen(host, port)) throw fl::DataError("cannot listen on " + host + ":" + std::to_string(port));
    return pl::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pseudo-label pipeline for field boundary delineation"};
    app.require_subcommand(1);
    app.fallthrough();
    Flags f;
    app.add_option("--config", f.config, "key = value configuration file; command-line flags win");
    auto* o_manifest = app.add_option("--manifest", f.manifest, "Site manifest (JSON lines)");
    auto* o_out = app.add_option("--out", f.out, "Output directory");
    auto* o_strategy = app.add_option("--strategy", f.strategies, "Strategy ids (comma-separated or repeated)")->delimiter(',');
    auto* o_tbnd = app.add_option("--t-bnd", f.t_bnd, "Boundary threshold for seeds");
    auto* o_text = app.add_option("--t-ext", f.t_ext, "Extent threshold for the field mask");
    auto* o_workers = app.add_option("--workers", f.workers, "Parallel site workers");
    auto* o_seed = app.add_option("--seed", f.seed, "Seed for site split and permutation tests");
    auto* o_strict = app.add_flag("--strict", f.strict, "Abort on the first site failure");
    auto* o_frac = app.add_option("--train-fraction", f.train_fraction, "Share of non-test sites used for training");

    std::map<std::string, CLI::App*> stages;
    for (const char* name : {"segment", "score", "select", "labels", "eval-object", "eval-site", "summarize"}) {
        stages[name] = app.add_subcommand(name, std::string("Run the ") + name + " stage");
    }
    auto* sub_serve = app.add_subcommand("serve", "Run the review service");
    sub_serve->add_option("--port", f.port, "Listen port");
    sub_serve->add_option("--host", f.host, "Listen address");
    sub_serve->add_option("--store", f.store, "Review store directory (default <out>/review)");
    sub_serve->add_option("--images", f.images, "Directory of <site_id>.png images");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? pl::kExitOk : pl::kExitUsage;
    }

    try {
        pl::PipelineConfig cfg;
        std::map<std::string, std::string> extra;
        if (!f.config.empty()) pl::apply_config(cfg, pl::parse_config_text(fl::read_text_file(f.config)), &extra);
        if (o_manifest->count()) cfg.manifest_path = f.manifest;
        if (o_out->count()) cfg.output_dir = f.out;
        if (o_strategy->count()) cfg.strategies = f.strategies;
        if (o_tbnd->count()) cfg.segmentation.t_bnd = f.t_bnd;
        if (o_text->count()) cfg.segmentation.t_ext = f.t_ext;
        if (o_workers->count()) cfg.workers = f.workers;
        if (o_seed->count()) cfg.seed = f.seed;
        if (o_strict->count()) cfg.strict = f.strict;
        if (o_frac->count()) cfg.train_fraction = f.train_fraction;

        if (sub_serve->parsed()) return serve(cfg, extra, f, *sub_serve);
        for (const auto& [name, sub] : stages) {
            if (!sub->parsed()) continue;
            const auto r = pl::run_stage(pl::parse_stage(name), cfg);
            report(r);
            return r.exit_code;
        }
    } catch (const fl::UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return pl::kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return pl::kExitData;
    }
    return pl::kExitUsage;
}

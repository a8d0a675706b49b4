#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <pthread.h>

#include "CLI11.hpp"
#include "lightmem/bench.hpp"
#include "lightmem/lightmem.hpp"

using namespace lightmem;
namespace fs = std::filesystem;

namespace {

EngineConfig config_from(const std::string& path) { return path.empty() ? EngineConfig{} : load_config(path); }

bool has_snapshot(const fs::path& dir) { return fs::exists(dir / kItemsFile); }

void emit(const json& j, const std::string& out) {
    if (out.empty()) {
        std::cout << j.dump(2) << "\n";
        return;
    }
    std::ofstream f(out);
    if (!f) throw Error("io", "cannot write " + out);
    f << j.dump(2) << "\n";
    std::cerr << "wrote " << out << "\n";
}

json store_stats(Engine& e) {
    auto g = e.ltm().snapshot();
    json users = json::object();
    for (const auto& u : e.mtm().users()) users[u] = e.mtm().size(u);
    return {{"mtm_items", e.mtm().total_size()},
            {"mtm_users", users},
            {"pending", e.mtm().pending_size()},
            {"ltm_nodes", g->node_count()},
            {"ltm_edges", g->edge_count()}};
}

int serve(const std::string& host, int port, const std::string& config) {
    auto cfg = config_from(config);
    // signals go to a dedicated waiter thread
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    Engine engine(cfg);
    if (!cfg.data_dir.empty() && has_snapshot(cfg.data_dir)) {
        engine.load(cfg.data_dir);
        std::cerr << "loaded " << cfg.data_dir << ": " << store_stats(engine).dump() << "\n";
    }
    Service svc(engine);
    int bound = svc.bind(host, port);
    std::cerr << "listening on " << host << ":" << bound << "\n";
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        svc.stop();
    });
    bool ok = svc.listen_after_bind();
    if (waiter.joinable()) {
        pthread_kill(waiter.native_handle(), SIGTERM);
        waiter.join();
    }
    if (!cfg.data_dir.empty()) {
        engine.snapshot(cfg.data_dir);
        std::cerr << "saved " << cfg.data_dir << "\n";
    }
    return ok ? 0 : 1;
}

// transcript lines: {"user_id":..,"input":..,"response":..}
void replay(Engine& e, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (text::normalize_space(line).empty()) continue;
        try {
            auto j = json::parse(line);
            e.observe_turn(j.at("user_id").get<std::string>(), j.at("input").get<std::string>(),
                           j.at("response").get<std::string>());
        } catch (const json::exception& ex) {
            throw Error("io", path + ":" + std::to_string(n) + ": " + ex.what());
        }
    }
}

std::vector<std::size_t> parse_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = text::normalize_space(tok);
        if (tok.empty()) continue;
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(tok, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != tok.size()) throw PreconditionError("bad checkpoint: " + tok);
        out.push_back(v);
    }
    if (out.empty()) throw PreconditionError("no checkpoints given");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lightmem: tiered conversational memory service"};
    app.require_subcommand(1);

    std::string host = "127.0.0.1", config;
    int port = 8080;
    auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
    serve_cmd->add_option("--port", port, "port (0 picks a free one)");
    serve_cmd->add_option("--host", host, "bind address");
    serve_cmd->add_option("--config", config, "key=value config file")->check(CLI::ExistingFile);

    std::string out_dir, transcript;
    bool consolidate = false;
    auto* snap_cmd = app.add_subcommand("snapshot", "write the stores as a JSONL snapshot");
    snap_cmd->add_option("--out", out_dir, "snapshot directory")->required();
    snap_cmd->add_option("--config", config, "config file; its data_dir is the source state")->check(CLI::ExistingFile);
    snap_cmd->add_option("--transcript", transcript, "JSONL turns to replay before saving")->check(CLI::ExistingFile);
    snap_cmd->add_flag("--consolidate", consolidate, "run one consolidation cycle before saving");

    std::string in_dir;
    auto* load_cmd = app.add_subcommand("load", "validate a snapshot and install it as the service state");
    load_cmd->add_option("--in", in_dir, "snapshot directory")->required()->check(CLI::ExistingDirectory);
    load_cmd->add_option("--config", config, "config file; the snapshot is copied to its data_dir")->check(CLI::ExistingFile);

    auto* bench_cmd = app.add_subcommand("bench", "run a seeded benchmark");
    bench_cmd->require_subcommand(1);
    std::uint64_t seed = 0;
    std::size_t k = 5, n = 200, items = 10000;
    double noise = 0.5;
    std::string out, checkpoints = "100,1000,5000,10000", mode = "all";

    auto* ei = bench_cmd->add_subcommand("error-injection", "noise-injection groups A-E");
    ei->add_option("--seed", seed);
    ei->add_option("--k", k);
    ei->add_option("--noise", noise, "noise rate for perturbed groups");
    ei->add_option("--out", out, "report path (stdout if omitted)");

    auto* gr = bench_cmd->add_subcommand("growth", "MTM growth stress");
    gr->add_option("--checkpoints", checkpoints, "comma-separated MTM sizes");
    gr->add_option("--seed", seed);
    gr->add_option("--k", k);
    gr->add_option("--out", out);

    auto* ug = bench_cmd->add_subcommand("update-gap", "MTM/LTM routing ablation");
    ug->add_option("--mode", mode, "full|ltm_only|mtm_only|mtm_noise|all");
    ug->add_option("--seed", seed);
    ug->add_option("--k", k);
    ug->add_option("--out", out);

    auto* la = bench_cmd->add_subcommand("latency", "retrieval latency");
    la->add_option("--n", n, "number of queries");
    la->add_option("--items", items, "MTM items");
    la->add_option("--seed", seed);
    la->add_option("--out", out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve_cmd) return serve(host, port, config);

        if (*snap_cmd) {
            auto cfg = config_from(config);
            cfg.write_behind = false;
            Engine e(cfg);
            if (!cfg.data_dir.empty() && has_snapshot(cfg.data_dir)) e.load(cfg.data_dir);
            if (!transcript.empty()) replay(e, transcript);
            if (consolidate) e.consolidate();
            auto s = e.snapshot(out_dir);
            auto stats = store_stats(e);
            stats["digest"] = s.digest();
            stats["out"] = out_dir;
            std::cout << stats.dump(2) << "\n";
            return 0;
        }

        if (*load_cmd) {
            auto cfg = config_from(config);
            cfg.write_behind = false;
            Engine e(cfg);
            e.load(in_dir);
            auto stats = store_stats(e);
            if (!cfg.data_dir.empty()) {
                e.snapshot(cfg.data_dir);
                stats["installed"] = cfg.data_dir;
            }
            std::cout << stats.dump(2) << "\n";
            return 0;
        }

        if (*ei) {
            emit(bench::to_json(bench::run_error_injection_suite(seed, k, noise)), out);
        } else if (*gr) {
            bench::GrowthConfig g;
            g.checkpoints = parse_list(checkpoints);
            g.seed = seed;
            g.k = k;
            emit(bench::to_json(bench::run_growth_stress(g)), out);
        } else if (*ug) {
            auto corpus = bench::make_gap_corpus(seed);
            std::vector<bench::GapMode> modes =
                mode == "all" ? bench::all_gap_modes() : std::vector{bench::gap_mode_from_string(mode)};
            json runs = json::array();
            for (auto m : modes) runs.push_back(bench::to_json(bench::run_update_gap(corpus, m, k), seed));
            emit(runs.size() == 1 ? runs[0]
                                  : json{{"schema_version", bench::kSchemaVersion}, {"bench", "update-gap"}, {"runs", runs}},
                 out);
        } else if (*la) {
            bench::LatencyConfig lc;
            lc.n_queries = n;
            lc.mtm_items = items;
            lc.seed = seed;
            emit(bench::to_json(bench::run_latency(lc)), out);
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

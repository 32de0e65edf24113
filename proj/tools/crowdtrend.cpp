// Command-line front end. Talks to the core only through the C API.
#include "crowdtrend.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using json = nlohmann::json;

namespace {

struct ServiceConfig {
    std::string listen = "127.0.0.1:8080";
    std::string data_dir = "data";
    std::vector<std::string> projects;
    unsigned workers = 1;
    std::string clock = "real";
    std::string clock_start;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ServiceConfig load_config(const std::string& path) {
    ServiceConfig cfg;
    if (!path.empty()) {
        json j = json::parse(read_file(path));
        cfg.listen = j.value("listen", cfg.listen);
        cfg.data_dir = j.value("data_dir", cfg.data_dir);
        cfg.projects = j.value("projects", cfg.projects);
        cfg.workers = j.value("workers", cfg.workers);
        cfg.clock = j.value("clock", cfg.clock);
        cfg.clock_start = j.value("clock_start", cfg.clock_start);
    }
    if (const char* v = std::getenv("CROWDTREND_LISTEN")) cfg.listen = v;
    if (const char* v = std::getenv("CROWDTREND_DATA_DIR")) cfg.data_dir = v;
    return cfg;
}

[[noreturn]] void die(const std::string& what) {
    std::cerr << "crowdtrend: " << what;
    const std::string detail = ct_last_error();
    if (!detail.empty()) std::cerr << ": " << detail;
    if (ct_last_error_offset() >= 0) std::cerr << " (offset " << ct_last_error_offset() << ")";
    std::cerr << '\n';
    std::exit(1);
}

void check(ct_status s, const std::string& what) {
    if (s != CT_OK) die(what);
}

std::string take(char* s) {
    std::string out = s ? s : "";
    ct_string_free(s);
    return out;
}

ct_platform* open_platform(const ServiceConfig& cfg) {
    if (cfg.workers == 0) die("worker count must be at least 1");
    if (cfg.clock != "real" && cfg.clock != "simulated") die("clock must be real or simulated");
    ct_platform_options opts{};
    opts.data_dir = cfg.data_dir.c_str();
    opts.workers = cfg.workers;
    opts.simulated_clock = cfg.clock == "simulated";
    opts.clock_start = cfg.clock_start.empty() ? nullptr : cfg.clock_start.c_str();
    opts.sync = CT_SYNC_FSYNC;
    ct_platform* p = nullptr;
    check(ct_platform_open(&opts, &p), "cannot open data directory " + cfg.data_dir);
    return p;
}

// Registers a project config unless a project with that id already exists.
std::string ensure_project(ct_platform* p, const std::string& config_path) {
    const std::string text = read_file(config_path);
    const std::string id = json::parse(text).value("id", "");
    char* described = nullptr;
    if (!id.empty() && ct_project_describe(p, id.c_str(), &described) == CT_OK) {
        ct_string_free(described);
        return id;
    }
    char* created = nullptr;
    check(ct_project_create(p, text.c_str(), &created), "invalid project config " + config_path);
    return take(created);
}

std::pair<std::string, int> split_listen(const std::string& listen) {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) return {listen, 8080};
    return {colon == 0 ? "127.0.0.1" : listen.substr(0, colon), std::stoi(listen.substr(colon + 1))};
}

int cmd_serve(ServiceConfig cfg) {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGTERM);
    sigaddset(&set, SIGINT);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);  // before any thread starts

    ct_platform* p = open_platform(cfg);
    for (const auto& path : cfg.projects) ensure_project(p, path);
    const auto [host, port] = split_listen(cfg.listen);
    int bound = 0;
    check(ct_serve_start(p, host.c_str(), port, &bound), "cannot start HTTP service");
    std::cout << "listening on " << host << ":" << bound << std::endl;

    timespec period{1, 0};
    for (;;) {
        const int sig = sigtimedwait(&set, nullptr, &period);
        if (sig == SIGTERM || sig == SIGINT) break;
        if (cfg.clock == "real") ct_tick(p, 1, nullptr);
    }
    std::cout << "shutting down" << std::endl;
    ct_serve_stop(p);
    ct_platform_close(p);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crowdtrend: stream filtering, crowd labelling and trend indices"};
    app.require_subcommand(1);
    std::string config_path, data_dir;
    app.add_option("--config", config_path, "Service config file (JSON)");
    app.add_option("--data-dir", data_dir, "Data directory (overrides config and CROWDTREND_DATA_DIR)");

    auto resolve = [&] {
        ServiceConfig cfg = load_config(config_path);
        if (!data_dir.empty()) cfg.data_dir = data_dir;
        return cfg;
    };

    // serve
    auto* serve = app.add_subcommand("serve", "Run the HTTP API and pipeline until SIGTERM");
    std::string listen;
    std::vector<std::string> serve_projects;
    unsigned serve_workers = 0;
    serve->add_option("--listen", listen, "host:port");
    serve->add_option("--project", serve_projects, "Project config file (repeatable)");
    serve->add_option("--workers", serve_workers, "Pipeline workers");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Replay an NDJSON file into a project");
    std::string source, project, project_config, clock = "real", clock_start;
    double speedup = 0;
    unsigned annotators = 0, round_every = 200, labels_per_round = 10, max_retrains = 2, ingest_workers = 0;
    ingest->add_option("--source", source, "NDJSON document file")->required();
    ingest->add_option("--speedup", speedup, "Replay speed: 0 = unpaced, 1 = real time")->check(CLI::NonNegativeNumber);
    ingest->add_option("--project", project, "Project id, or a project config file to register")->required();
    ingest->add_option("--clock", clock, "real or simulated")->check(CLI::IsMember({"real", "simulated"}));
    ingest->add_option("--clock-start", clock_start, "Simulated clock start (RFC 3339)");
    ingest->add_option("--annotators", annotators, "Scripted annotators answering from recorded truth (0 = none)");
    ingest->add_option("--round-every", round_every, "Documents between annotation rounds");
    ingest->add_option("--labels-per-round", labels_per_round, "Sessions per annotator per round");
    ingest->add_option("--max-retrains", max_retrains, "Retrain cap for scripted runs");
    ingest->add_option("--workers", ingest_workers, "Pipeline workers");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Active-learning simulation; CSV on stdout");
    unsigned seeds = 20;
    std::string strategy = "uncertainty";
    simulate->add_option("--seeds", seeds, "Number of seeds (1..N)")->check(CLI::PositiveNumber);
    simulate->add_option("--strategy", strategy, "uncertainty, random or both")
        ->check(CLI::IsMember({"uncertainty", "random", "both"}));

    // trends export
    auto* trends = app.add_subcommand("trends", "Trend maintenance");
    trends->require_subcommand(1);
    auto* trends_export = trends->add_subcommand("export", "Write the trend series as CSV");
    std::string trends_project, out_path;
    bool recompute = false;
    trends_export->add_option("--project", trends_project, "Project id")->required();
    trends_export->add_option("--out", out_path, "Output file (default stdout)");
    trends_export->add_flag("--recompute", recompute, "Re-predict stored documents with the latest model");

    // model retrain
    auto* model = app.add_subcommand("model", "Model maintenance");
    model->require_subcommand(1);
    auto* retrain = model->add_subcommand("retrain", "Train and publish a new model now");
    std::string retrain_project;
    retrain->add_option("--project", retrain_project, "Project id")->required();

    // replay-check
    auto* replay = app.add_subcommand("replay-check", "Verify the event log against rebuilt state and snapshots");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*serve) {
            ServiceConfig cfg = resolve();
            if (!listen.empty()) cfg.listen = listen;
            if (serve_workers) cfg.workers = serve_workers;
            for (const auto& p : serve_projects) cfg.projects.push_back(p);
            return cmd_serve(cfg);
        }
        if (*ingest) {
            ServiceConfig cfg = resolve();
            cfg.clock = clock;
            if (!clock_start.empty()) cfg.clock_start = clock_start;
            if (ingest_workers) cfg.workers = ingest_workers;
            ct_platform* p = open_platform(cfg);
            std::string id = project;
            if (project.size() > 5 && project.ends_with(".json")) id = ensure_project(p, project);
            char* report = nullptr;
            if (annotators > 0) {
                ct_scripted_options so{};
                so.project_id = id.c_str();
                so.source_path = source.c_str();
                so.speedup = speedup;
                so.annotators = annotators;
                so.round_every = round_every;
                so.labels_per_round = labels_per_round;
                so.max_retrains = max_retrains;
                check(ct_run_scripted(p, &so, &report), "ingest failed");
            } else {
                check(ct_ingest_file(p, id.c_str(), source.c_str(), speedup, &report), "ingest failed");
            }
            std::cout << take(report) << std::endl;
            ct_platform_close(p);
            return 0;
        }
        if (*simulate) {
            char* csv = nullptr;
            check(ct_simulate(seeds, strategy.c_str(), &csv), "simulation failed");
            std::cout << take(csv);
            return 0;
        }
        if (*trends_export) {
            ct_platform* p = open_platform(resolve());
            char* csv = nullptr;
            check(ct_trends_csv(p, trends_project.c_str(), recompute ? 1 : 0, &csv), "trend export failed");
            const std::string text = take(csv);
            ct_platform_close(p);
            if (out_path.empty()) {
                std::cout << text;
            } else {
                std::ofstream out(out_path, std::ios::binary);
                out << text;
                if (!out) die("cannot write " + out_path);
            }
            return 0;
        }
        if (*retrain) {
            ct_platform* p = open_platform(resolve());
            uint64_t version = 0;
            check(ct_retrain(p, retrain_project.c_str(), &version), "retrain failed");
            std::cout << "model version " << version << std::endl;
            ct_platform_close(p);
            return 0;
        }
        if (*replay) {
            const ServiceConfig cfg = resolve();
            uint64_t events = 0;
            char* report = nullptr;
            const ct_status s = ct_replay_check(cfg.data_dir.c_str(), &events, &report);
            std::cout << take(report) << std::endl;
            return s == CT_OK ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "crowdtrend: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

// Command-line front end over the C API.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ecodqn/c_api.h"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct Failure {
    int code;
    std::string message;
};

int exit_code(ecodqn_status s) {
    switch (s) {
    case ECODQN_OK: return kExitOk;
    case ECODQN_ERR_CONFIG:
    case ECODQN_ERR_ARGUMENT: return kExitConfig;
    case ECODQN_ERR_DATA: return kExitData;
    case ECODQN_ERR_NUMERIC: return kExitNumeric;
    default: return kExitInternal;
    }
}

void check(ecodqn_status s) {
    if (s != ECODQN_OK) throw Failure{exit_code(s), ecodqn_last_error()};
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct Common {
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out;
    std::string config;
    bool force = false;
    std::size_t threads = 1;
    bool threads_given = false;
};

/// Refuses to reuse a non-empty artifact directory unless forced.
void prepare_out_dir(const Common &c) {
    if (c.out.empty()) throw Failure{kExitConfig, "--out is required"};
    std::error_code ec;
    if (fs::exists(c.out, ec)) {
        if (!fs::is_directory(c.out, ec)) throw Failure{kExitConfig, c.out + " exists and is not a directory"};
        if (!fs::is_empty(c.out, ec) && !c.force)
            throw Failure{kExitConfig, "output directory " + c.out + " is not empty (use --force to overwrite)"};
    }
    fs::create_directories(c.out, ec);
    if (ec) throw Failure{kExitData, "cannot create " + c.out + ": " + ec.message()};
}

class Manifest {
public:
    Manifest(std::string command, int argc, char **argv) : started_(utc_now()) {
        j_["command"] = std::move(command);
        j_["argv"] = std::vector<std::string>(argv, argv + argc);
        j_["code_version"] = ecodqn_version();
        j_["inputs"] = json::object();
        j_["outputs"] = json::array();
        j_["seeds"] = json::object();
    }
    json &operator[](const char *key) { return j_[key]; }
    void output(const fs::path &p) { j_["outputs"].push_back(p.filename().string()); }

    void write(const std::string &dir) {
        j_["started_at"] = started_;
        j_["finished_at"] = utc_now();
        std::ofstream out(fs::path(dir) / "manifest.json");
        out << j_.dump(2) << '\n';
        if (!out) throw Failure{kExitData, "cannot write manifest in " + dir};
    }

private:
    json j_;
    std::string started_;
};

void add_common(CLI::App *sub, Common &c) {
    sub->add_option_function<std::uint64_t>(
           "--seed", [&c](const std::uint64_t &s) { c.seed = s, c.seed_given = true; }, "master seed")
        ->type_name("UINT");
    sub->add_option("--out", c.out, "artifact directory")->required();
    sub->add_option("--config", c.config, "flat key = value file (train: training config; others: option defaults)");
    sub->add_flag("--force", c.force, "reuse a non-empty output directory");
    sub->add_option_function<std::size_t>(
           "--threads", [&c](const std::size_t &t) { c.threads = t, c.threads_given = true; }, "worker threads")
        ->check(CLI::PositiveNumber);
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
    std::string family = "er";
    std::size_t vertices = 20;
    std::size_t count = 100;
    double er_p = 0.15;
    std::size_t ba_attach = 2;
    bool unsigned_weights = false;
};

int cmd_generate(const Common &c, const GenerateArgs &a, Manifest &m) {
    prepare_out_dir(c);
    check(ecodqn_corpus_generate(c.out.c_str(), a.family.c_str(), a.vertices, a.er_p, a.ba_attach,
                                 a.unsigned_weights ? 0 : 1, a.count, c.seed));
    m["config"] = {{"family", a.family},   {"vertices", a.vertices},   {"count", a.count},
                   {"er_p", a.er_p},       {"ba_attach", a.ba_attach}, {"signed_weights", !a.unsigned_weights}};
    m["seeds"] = {{"master", c.seed}};
    m["outputs"] = json::array({"index.tsv"});
    m.write(c.out);
    std::cout << "wrote " << a.count << " graphs to " << c.out << "\n";
    return kExitOk;
}

struct TrainArgs {
    std::string resume;
};

int progress(size_t steps, size_t total, double ratio, void *) {
    std::cerr << "  step " << steps << "/" << total << "  holdout ratio " << ratio << "\n";
    return 0;
}

int cmd_train(const Common &c, const TrainArgs &a, Manifest &m) {
    if (c.config.empty() && a.resume.empty()) throw Failure{kExitConfig, "train needs --config (or --resume)"};
    prepare_out_dir(c);
    std::unique_ptr<ecodqn_config, decltype(&ecodqn_config_free)> owned(nullptr, ecodqn_config_free);
    if (!c.config.empty()) {
        ecodqn_config *loaded = nullptr;
        check(ecodqn_config_load(c.config.c_str(), &loaded));
        owned.reset(loaded);
        if (c.seed_given) check(ecodqn_config_set(loaded, "seed", std::to_string(c.seed).c_str()));
        if (c.threads_given) check(ecodqn_config_set(loaded, "threads", std::to_string(c.threads).c_str()));
    }
    ecodqn_config *cfg = owned.get();

    const fs::path ckpt = fs::path(c.out) / "checkpoint.bin";
    const fs::path curve = fs::path(c.out) / "curve.csv";
    if (cfg) {
        const fs::path resolved = fs::path(c.out) / "config.txt";
        std::ofstream(resolved) << ecodqn_config_text(cfg);
        m["config"] = ecodqn_config_text(cfg);
        m.output(resolved);
        m["inputs"]["config"] = c.config;
    }
    if (!a.resume.empty()) m["inputs"]["resume"] = a.resume;
    m["seeds"] = {{"master", c.seed_given ? json(c.seed) : json("from config")}};
    check(ecodqn_train(cfg, a.resume.empty() ? nullptr : a.resume.c_str(), ckpt.string().c_str(),
                       curve.string().c_str(), progress, nullptr));
    m.output(ckpt);
    m.output(curve);
    m.write(c.out);
    std::cout << "checkpoint " << ckpt.string() << "\n";
    return kExitOk;
}

struct EvalArgs {
    std::string checkpoint;
    std::string method = "eco";
    std::string corpus;
    std::size_t episodes = 50;
    std::string registry;
    std::string label;
};

int cmd_eval(const Common &c, const EvalArgs &a, Manifest &m) {
    if (a.method == "eco" && a.checkpoint.empty()) throw Failure{kExitConfig, "eval with method eco needs --checkpoint"};
    prepare_out_dir(c);
    ecodqn_corpus *corpus = nullptr;
    check(ecodqn_corpus_open(a.corpus.c_str(), &corpus));
    std::unique_ptr<ecodqn_corpus, decltype(&ecodqn_corpus_free)> cg(corpus, ecodqn_corpus_free);

    const std::string registry = a.registry.empty() ? (fs::path(c.out) / "registry.jsonl").string() : a.registry;
    const std::string agent = a.label.empty() ? a.method : a.label;
    const std::string set = fs::path(a.corpus).filename().string();
    ecodqn_eval_options opts{a.episodes, c.seed, c.threads, agent.c_str(), set.c_str(), registry.c_str()};
    ecodqn_report *report = nullptr;
    check(ecodqn_evaluate(a.method.c_str(), a.checkpoint.empty() ? nullptr : a.checkpoint.c_str(), corpus, &opts,
                          &report));
    std::unique_ptr<ecodqn_report, decltype(&ecodqn_report_free)> rg(report, ecodqn_report_free);

    const fs::path episodes = fs::path(c.out) / "episodes.csv";
    const fs::path graphs = fs::path(c.out) / "graphs.jsonl";
    const fs::path summary = fs::path(c.out) / "summary.csv";
    check(ecodqn_report_write(report, episodes.string().c_str(), graphs.string().c_str(), summary.string().c_str()));

    m["config"] = {{"method", a.method}, {"episodes", a.episodes}, {"threads", c.threads}};
    m["seeds"] = {{"master", c.seed}};
    m["inputs"] = {{"corpus", a.corpus}, {"checkpoint", a.checkpoint}, {"registry", registry}};
    for (const auto &p : {episodes, graphs, summary}) m.output(p);
    m.write(c.out);

    std::printf("%s on %zu graphs x %zu episodes: mean ratio %.4f (quartiles %.4f, %.4f), single-try %.4f, "
                "%.3g s/action\n",
                agent.c_str(), ecodqn_corpus_size(corpus), a.episodes, ecodqn_report_mean_ratio(report),
                ecodqn_report_lower_quartile(report), ecodqn_report_upper_quartile(report),
                ecodqn_report_single_try_ratio(report), ecodqn_report_seconds_per_action(report));
    return kExitOk;
}

struct SolveArgs {
    std::string graph;
    std::string method = "mca-rev";
    std::string checkpoint;
    std::size_t episodes = 50;
};

int cmd_solve(const Common &c, const SolveArgs &a, Manifest &m) {
    prepare_out_dir(c);
    ecodqn_graph *g = nullptr;
    check(ecodqn_graph_read(a.graph.c_str(), &g));
    std::unique_ptr<ecodqn_graph, decltype(&ecodqn_graph_free)> gg(g, ecodqn_graph_free);
    ecodqn_solution *sol = nullptr;
    check(ecodqn_solve(g, a.method.c_str(), a.checkpoint.empty() ? nullptr : a.checkpoint.c_str(), a.episodes,
                       c.seed, c.threads, &sol));
    std::unique_ptr<ecodqn_solution, decltype(&ecodqn_solution_free)> sg(sol, ecodqn_solution_free);
    const fs::path out = fs::path(c.out) / "solution.json";
    check(ecodqn_solution_write(sol, out.string().c_str()));

    m["config"] = {{"method", a.method}, {"episodes", a.episodes}};
    m["seeds"] = {{"master", c.seed}};
    m["inputs"] = {{"graph", a.graph}, {"checkpoint", a.checkpoint}};
    m.output(out);
    m.write(c.out);
    std::printf("%s: cut %.17g on %zu vertices\n", a.method.c_str(), ecodqn_solution_cut(sol),
                ecodqn_solution_vertices(sol));
    return kExitOk;
}

struct BehaviorArgs {
    std::string checkpoint;
    std::string corpus;
    std::size_t window = 10;
};

int cmd_behavior(const Common &c, const BehaviorArgs &a, Manifest &m) {
    prepare_out_dir(c);
    ecodqn_corpus *corpus = nullptr;
    check(ecodqn_corpus_open(a.corpus.c_str(), &corpus));
    std::unique_ptr<ecodqn_corpus, decltype(&ecodqn_corpus_free)> cg(corpus, ecodqn_corpus_free);
    const fs::path out = fs::path(c.out) / "behavior.csv";
    std::size_t steps = 0;
    check(ecodqn_behavior(a.checkpoint.c_str(), corpus, c.seed, a.window, c.threads, out.string().c_str(), &steps));

    m["config"] = {{"window", a.window}};
    m["seeds"] = {{"master", c.seed}};
    m["inputs"] = {{"corpus", a.corpus}, {"checkpoint", a.checkpoint}};
    m.output(out);
    m.write(c.out);
    std::cout << "wrote " << steps << " steps to " << out.string() << "\n";
    return kExitOk;
}


/// For every subcommand except train, `--config FILE` supplies option defaults:
/// each `key = value` line becomes `--key value` ahead of the explicit
/// arguments, which therefore take precedence. Unknown keys are rejected.
std::vector<std::string> expand_config(CLI::App &app, int argc, char **argv) {
    std::vector<std::string> rest(argv + 1, argv + argc);
    if (rest.empty() || rest[0] == "train") {
        std::reverse(rest.begin(), rest.end()); // CLI11 consumes from the back
        return rest;
    }
    CLI::App *sub = app.get_subcommand_no_throw(rest[0]);
    std::string path;
    for (std::size_t i = 1; i < rest.size(); ++i) {
        if (rest[i] == "--config" && i + 1 < rest.size()) path = rest[i + 1];
        else if (rest[i].rfind("--config=", 0) == 0) path = rest[i].substr(9);
    }
    std::vector<std::string> injected;
    if (sub && !path.empty()) {
        std::ifstream in(path);
        if (!in) throw Failure{kExitConfig, "cannot open config file " + path};
        std::string line;
        std::size_t number = 0;
        std::set<std::string> seen;
        while (std::getline(in, line)) {
            ++number;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const auto eq = line.find('=');
            auto trim = [](std::string x) {
                x.erase(0, x.find_first_not_of(" \t\r"));
                x.erase(x.find_last_not_of(" \t\r") + 1);
                return x;
            };
            if (trim(line).empty()) continue;
            if (eq == std::string::npos)
                throw Failure{kExitConfig, path + ": line " + std::to_string(number) + ": expected 'key = value'"};
            std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            std::replace(key.begin(), key.end(), '_', '-');
            if (!seen.insert(key).second) throw Failure{kExitConfig, path + ": duplicate key '" + key + "'"};
            const CLI::Option *opt = sub->get_option_no_throw("--" + key);
            if (opt == nullptr || key == "config" || key == "out")
                throw Failure{kExitConfig, path + ": unknown config key '" + key + "' for " + rest[0]};
            if (opt->get_expected_max() == 0) {
                if (value == "true" || value == "1") injected.push_back("--" + key);
                else if (value != "false" && value != "0")
                    throw Failure{kExitConfig, path + ": flag '" + key + "' takes true or false"};
            } else {
                injected.push_back("--" + key);
                injected.push_back(value);
            }
        }
    }
    std::vector<std::string> args{rest[0]};
    args.insert(args.end(), injected.begin(), injected.end());
    args.insert(args.end(), rest.begin() + 1, rest.end());
    std::reverse(args.begin(), args.end());
    return args;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"ECO-DQN for weighted Max-Cut", "ecodqn"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.set_version_flag("--version", ecodqn_version());

    Common gen_c, train_c, eval_c, solve_c, beh_c;
    GenerateArgs gen;
    TrainArgs tr;
    EvalArgs ev;
    SolveArgs so;
    BehaviorArgs be;

    auto *generate = app.add_subcommand("generate", "write a corpus of random graphs");
    add_common(generate, gen_c);
    generate->add_option("--family", gen.family, "er or ba")->check(CLI::IsMember({"er", "ba"}));
    generate->add_option("--vertices", gen.vertices)->check(CLI::PositiveNumber);
    generate->add_option("--count", gen.count)->check(CLI::PositiveNumber);
    generate->add_option("--er-p", gen.er_p)->check(CLI::Range(0.0, 1.0));
    generate->add_option("--ba-attach", gen.ba_attach)->check(CLI::PositiveNumber);
    generate->add_flag("--unsigned", gen.unsigned_weights, "all weights +1");

    auto *train = app.add_subcommand("train", "train a Q-network");
    add_common(train, train_c);
    train->add_option("--resume", tr.resume, "continue from a checkpoint");

    auto *eval = app.add_subcommand("eval", "evaluate an agent or baseline on a corpus");
    add_common(eval, eval_c);
    eval->add_option("--checkpoint", ev.checkpoint);
    eval->add_option("--method", ev.method)->check(CLI::IsMember({"eco", "mca-rev", "mca-irrev"}));
    eval->add_option("--corpus", ev.corpus, "corpus directory or graph file")->required();
    eval->add_option("--episodes", ev.episodes)->check(CLI::PositiveNumber);
    eval->add_option("--registry", ev.registry, "best-known cut ledger (default: <out>/registry.jsonl)");
    eval->add_option("--label", ev.label, "agent name in reports");

    auto *solve = app.add_subcommand("solve", "solve a single graph");
    add_common(solve, solve_c);
    solve->add_option("--graph", so.graph)->required();
    solve->add_option("--method", so.method)->check(CLI::IsMember({"eco", "mca-rev", "mca-irrev", "exact"}));
    solve->add_option("--checkpoint", so.checkpoint);
    solve->add_option("--episodes", so.episodes)->check(CLI::PositiveNumber);

    auto *behavior = app.add_subcommand("behavior", "per-step behaviour series of a reversible agent");
    add_common(behavior, beh_c);
    behavior->add_option("--checkpoint", be.checkpoint)->required();
    behavior->add_option("--corpus", be.corpus)->required();
    behavior->add_option("--window", be.window, "moving-average window")->check(CLI::PositiveNumber);

    std::vector<std::string> args;
    try {
        args = expand_config(app, argc, argv);
    } catch (const Failure &f) {
        std::cerr << "error: " << f.message << "\n";
        return f.code;
    }

    try {
        app.parse(args);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*generate) {
            Manifest m("generate", argc, argv);
            return cmd_generate(gen_c, gen, m);
        }
        if (*train) {
            Manifest m("train", argc, argv);
            return cmd_train(train_c, tr, m);
        }
        if (*eval) {
            Manifest m("eval", argc, argv);
            return cmd_eval(eval_c, ev, m);
        }
        if (*solve) {
            Manifest m("solve", argc, argv);
            return cmd_solve(solve_c, so, m);
        }
        if (*behavior) {
            Manifest m("behavior", argc, argv);
            return cmd_behavior(beh_c, be, m);
        }
    } catch (const Failure &f) {
        std::cerr << "error: " << f.message << "\n";
        return f.code;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}

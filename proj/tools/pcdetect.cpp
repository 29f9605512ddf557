#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pcdetect/pcdetect.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pcdetect;

namespace {

struct Globals {
    std::uint64_t seed = 7;
    unsigned threads = 1;
    std::string out;
};

void warn(const std::string& msg) { std::cerr << json{{"warning", msg}}.dump() << '\n'; }

std::string require_out(const Globals& g, const char* what)
{
    if (g.out.empty())
        throw Error(ErrorCode::InvalidArgument, std::string("--out is required for ") + what);
    return g.out;
}

std::string read_text(const std::string& path) { return pcdetect::detail::read_file(path); }

void write_text(const std::string& path, const std::string& text) { pcdetect::detail::write_file(path, text); }

PCMatrix read_matrix(const std::string& path)
{
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, "'" + path + "' is not valid JSON: " + e.what());
    }
    if (j.is_array())
        return build_matrix(j.get<std::vector<std::vector<double>>>());
    return matrix_from_json(j);
}

std::vector<LabeledSample> pick_split(const Dataset& ds, const std::string& which, double fraction,
                                      std::uint64_t seed)
{
    if (which == "all")
        return ds.samples;
    auto [train, test] = split_dataset(ds.samples, SplitSpec{fraction, seed});
    return which == "train" ? train : test;
}

// A plan file is either plan JSON or a markdown report with the plan embedded
// in its ```json block.
ExperimentPlan read_plan(const std::string& path)
{
    const auto text = read_text(path);
    const auto fence = text.find("```json");
    try {
        if (fence == std::string::npos)
            return plan_from_json(json::parse(text));
        const auto start = text.find('\n', fence) + 1;
        const auto end = text.find("```", start);
        return plan_from_json(json::parse(text.substr(start, end - start)));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, "cannot read plan from '" + path + "': " + e.what());
    }
}

int cmd_generate(const Globals& g, const GenerateOptions& base, const std::string& algo, const std::string& stop)
{
    GenerateOptions opt = base;
    opt.algorithm = parse_attack_algorithm(algo);
    opt.stop_method = parse_priority_method(stop);
    opt.seed = g.seed;
    opt.threads = g.threads;
    const auto path = require_out(g, "generate");
    const auto ds = generate_dataset(opt);
    save_dataset(path, ds);
    if (ds.alpha_warnings > 0)
        warn(std::to_string(ds.alpha_warnings) + " naive attacks used alpha <= the largest clean entry");
    std::cout << json{{"path", path},
                      {"samples", ds.samples.size()},
                      {"pairs", ds.manifest.count_pairs},
                      {"digest", ds.manifest.digest}}
                     .dump()
              << '\n';
    return 0;
}

struct AttackArgs {
    std::string matrix;
    std::string algo = "basic";
    std::optional<std::size_t> p, r;
    std::optional<double> alpha;
    std::string method = "gmm";
};

int cmd_attack(const Globals& g, const AttackArgs& a)
{
    const auto c = read_matrix(a.matrix);
    const auto algo = parse_attack_algorithm(a.algo);
    RngStream rng({g.seed, 0xa77ac4u});
    const auto targets = select_targets(c, rng);

    AttackConfig cfg;
    cfg.p = a.p.value_or(targets.p);
    cfg.r = a.r.value_or(targets.r);
    cfg.method = parse_priority_method(a.method);
    cfg.alpha = a.alpha ? *a.alpha
                        : (algo == AttackAlgorithm::Naive ? static_cast<double>(c.order()) : rng.uniform(1.1, 5.0));

    const auto out = run_attack(algo, c, cfg);
    if (out.alpha_not_above_max)
        warn("alpha " + std::to_string(cfg.alpha) + " does not exceed the largest entry " +
             std::to_string(c.max_entry()) + "; the naive attack may not promote p");
    json pairs = json::array();
    for (auto [i, j] : out.modified_pairs)
        pairs.push_back({i, j});
    const json result{{"attacked", matrix_to_json(out.attacked)},
                      {"provenance", provenance_to_json(provenance_of(out))},
                      {"modified_pairs", pairs}};
    if (!g.out.empty())
        write_text(g.out, result.dump(2) + "\n");
    std::cout << result.dump() << '\n';
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string split = "train";
    double fraction = 0.8;
    std::optional<std::uint64_t> split_seed;
    std::string kind = "det3d";
    std::size_t channels = 8, hidden = 32, conv_layers = 2;
    std::string history;
    nn::TrainConfig cfg;
};

int cmd_train(const Globals& g, TrainArgs a)
{
    const auto path = require_out(g, "train");
    const auto ds = load_dataset(a.data);
    const auto kind = parse_feature_kind(a.kind);
    const auto samples = pick_split(ds, a.split, a.fraction, a.split_seed.value_or(g.seed));
    const auto batch = to_batch(samples, kind);

    a.cfg.seed = g.seed;
    nn::Model<float> model(nn::default_spec(kind, ds.manifest.n, a.channels, a.hidden, a.conv_layers), g.seed);
    const auto history = nn::train(model, batch, a.cfg);
    nn::save_model(path, model);
    const auto hist_path = a.history.empty() ? path + ".history.csv" : a.history;
    write_text(hist_path, nn::history_csv(history));
    std::cout << json{{"model", path},
                      {"history", hist_path},
                      {"samples", samples.size()},
                      {"final_loss", history.empty() ? 0.0 : history.back().loss},
                      {"train", nn::train_config_to_json(a.cfg)}}
                     .dump()
              << '\n';
    return 0;
}

struct EvalArgs {
    std::string model;
    std::string data;
    std::string split = "test";
    double fraction = 0.8;
    std::optional<std::uint64_t> split_seed;
    double threshold = 0.5;
};

int cmd_eval(const Globals& g, const EvalArgs& a)
{
    const auto ds = load_dataset(a.data);
    auto peek = nn::load_model(a.model);
    const auto kind = peek.spec().input_kind;
    nn::require_input(peek.spec(), kind, ds.manifest.n);
    const auto samples = pick_split(ds, a.split, a.fraction, a.split_seed.value_or(g.seed));
    const auto metrics = nn::evaluate(peek, to_batch(samples, kind), a.threshold);
    const auto text = nn::metrics_to_json(metrics).dump();
    if (!g.out.empty())
        write_text(g.out, text + "\n");
    std::cout << text << '\n';
    return 0;
}

struct ReproduceArgs {
    int table = 1;
    std::size_t scale = kDefaultPairsPerCell;
    std::string plan;
    std::vector<std::size_t> sizes;
    std::vector<std::string> algorithms;
    std::optional<std::size_t> epochs;
};

int cmd_reproduce(const Globals& g, const ReproduceArgs& a)
{
    ExperimentPlan plan = a.plan.empty() ? plan_for_table(a.table, a.scale, g.seed) : read_plan(a.plan);
    if (!a.sizes.empty())
        plan.sizes = a.sizes;
    if (!a.algorithms.empty()) {
        plan.algorithms.clear();
        for (const auto& s : a.algorithms)
            plan.algorithms.push_back(parse_attack_algorithm(s));
    }
    if (a.epochs)
        plan.train.epochs = *a.epochs;

    const fs::path dir = g.out.empty() ? fs::path("report") : fs::path(g.out);
    fs::create_directories(dir);
    const auto stem = "table" + std::to_string(plan.table);

    // Cells are appended as they finish so an interrupted run keeps its results.
    std::ofstream partial(dir / (stem + ".partial.jsonl"), std::ios::binary | std::ios::trunc);
    auto on_cell = [&](const CellResult& c) {
        const json row{{"n", c.n},
                       {"algorithm", to_string(c.algorithm)},
                       {"accuracy", c.metrics.accuracy},
                       {"reference", c.reference ? json(*c.reference) : json(nullptr)},
                       {"loss", c.metrics.loss}};
        partial << row.dump() << '\n';
        partial.flush();
        std::cerr << "cell N=" << c.n << ' ' << to_string(c.algorithm) << ": " << c.metrics.accuracy << "%\n";
    };
    const auto rep = run_plan(plan, g.threads, on_cell);
    for (const auto& w : rep.warnings)
        warn(w);
    const auto md = render_markdown(rep);
    write_text((dir / (stem + ".md")).string(), md);
    write_text((dir / (stem + ".csv")).string(), render_csv(rep));
    std::cout << md;
    return 0;
}

int cmd_ri(const Globals& g, std::size_t max_n, std::size_t samples)
{
    const auto builtin = RandomIndexTable::builtin();
    const auto mc = RandomIndexTable::monte_carlo(max_n, samples, g.seed);
    json rows = json::array();
    for (const auto& [n, v] : mc.values())
        rows.push_back({{"n", n},
                        {"monte_carlo", v},
                        {"builtin", builtin.contains(n) ? json(builtin.at(n)) : json(nullptr)}});
    const json out{{"samples", samples}, {"seed", g.seed}, {"values", rows}};
    if (!g.out.empty())
        write_text(g.out, out.dump(2) + "\n");
    std::cout << out.dump(2) << '\n';
    return 0;
}

void print_error(const Error& e)
{
    json j{{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
    if (e.location())
        j["location"] = {e.location()->first, e.location()->second};
    std::cerr << j.dump() << '\n';
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Pairwise-comparison manipulation detection toolkit"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "Output file (directory for reproduce)");

    GenerateOptions gen;
    std::string gen_algo = "naive", gen_stop = "gmm";
    auto* generate = app.add_subcommand("generate", "Generate a labelled JSONL dataset")->fallthrough();
    generate->add_option("--n", gen.n, "Matrix order")->required()->check(CLI::Range(3, 64));
    generate->add_option("--pairs", gen.pairs, "Clean/attacked pairs")->required()->check(CLI::PositiveNumber);
    generate->add_option("--algo", gen_algo, "naive | basic | advanced")->capture_default_str();
    generate->add_option("--gamma", gen.gamma, "Perturbation bound (> 1)")->capture_default_str();
    generate->add_option("--stop-method", gen_stop, "Ranking used by the advanced stop check: gmm | evm")
        ->capture_default_str();

    AttackArgs atk;
    auto* attack = app.add_subcommand("attack", "Attack one matrix read from a JSON file")->fallthrough();
    attack->add_option("--matrix", atk.matrix, "JSON file: {\"n\", \"rows\"} or a bare array of rows")
        ->required();
    attack->add_option("--algo", atk.algo, "naive | basic | advanced")->capture_default_str();
    attack->add_option("--p", atk.p, "Promoted alternative (0-based); default random non-top");
    attack->add_option("--r", atk.r, "Reference alternative (0-based); default EVM top");
    attack->add_option("--alpha", atk.alpha, "Scale; default n for naive, U[1.1, 5) otherwise");
    attack->add_option("--method", atk.method, "Ranking for the advanced stop check: gmm | evm")
        ->capture_default_str();

    TrainArgs tr;
    auto* train = app.add_subcommand("train", "Train a detector on a dataset split")->fallthrough();
    train->add_option("--data", tr.data, "Dataset JSONL")->required();
    train->add_option("--split", tr.split, "train | test | all")->capture_default_str()
        ->check(CLI::IsMember({"train", "test", "all"}));
    train->add_option("--train-fraction", tr.fraction)->capture_default_str();
    train->add_option("--split-seed", tr.split_seed, "Default: --seed");
    train->add_option("--kind", tr.kind, "det3d | error2d | raw2d")->capture_default_str();
    train->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
    train->add_option("--batch", tr.cfg.batch_size)->capture_default_str();
    train->add_option("--lr", tr.cfg.learning_rate)->capture_default_str();
    train->add_option("--channels", tr.channels)->capture_default_str();
    train->add_option("--hidden", tr.hidden)->capture_default_str();
    train->add_option("--conv-layers", tr.conv_layers)->capture_default_str();
    train->add_option("--history", tr.history, "Per-epoch CSV; default <out>.history.csv");

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Evaluate a trained detector; prints Metrics JSON")->fallthrough();
    eval->add_option("--model", ev.model, "Checkpoint")->required();
    eval->add_option("--data", ev.data, "Dataset JSONL")->required();
    eval->add_option("--split", ev.split, "train | test | all")->capture_default_str()
        ->check(CLI::IsMember({"train", "test", "all"}));
    eval->add_option("--train-fraction", ev.fraction)->capture_default_str();
    eval->add_option("--split-seed", ev.split_seed, "Default: --seed");
    eval->add_option("--threshold", ev.threshold)->capture_default_str();

    ReproduceArgs rp;
    auto* reproduce = app.add_subcommand("reproduce", "Run a detection-rate table and write reports")->fallthrough();
    reproduce->add_option("--table", rp.table, "1 (det3d) or 2 (error2d)")->capture_default_str()
        ->check(CLI::IsMember({1, 2}));
    reproduce->add_option("--scale", rp.scale, "Pairs per cell")->capture_default_str();
    reproduce->add_option("--plan", rp.plan, "Plan JSON or an earlier markdown report");
    reproduce->add_option("--sizes", rp.sizes, "Override matrix orders");
    reproduce->add_option("--algos", rp.algorithms, "Override attack algorithms");
    reproduce->add_option("--epochs", rp.epochs, "Override training epochs");

    std::size_t ri_n = 15, ri_samples = 100000;
    auto* ri = app.add_subcommand("ri", "Monte Carlo random index table")->fallthrough();
    ri->add_option("--n", ri_n, "Largest order")->capture_default_str()->check(CLI::Range(3, 64));
    ri->add_option("--samples", ri_samples)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return e.get_exit_code() ? e.get_exit_code() : 1;
    }

    try {
        if (*generate)
            return cmd_generate(g, gen, gen_algo, gen_stop);
        if (*attack)
            return cmd_attack(g, atk);
        if (*train)
            return cmd_train(g, tr);
        if (*eval)
            return cmd_eval(g, ev);
        if (*reproduce)
            return cmd_reproduce(g, rp);
        if (*ri)
            return cmd_ri(g, ri_n, ri_samples);
    } catch (const Error& e) {
        print_error(e);
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << json{{"error", "Io"}, {"message", e.what()}}.dump() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "Unexpected"}, {"message", e.what()}}.dump() << '\n';
        return 2;
    }
    return 1;
}

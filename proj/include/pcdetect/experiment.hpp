#pragma once

#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcdetect/dataset.hpp"
#include "pcdetect/features.hpp"
#include "pcdetect/nn/model.hpp"
#include "pcdetect/nn/spec.hpp"
#include "pcdetect/nn/train.hpp"

namespace pcdetect {

inline constexpr std::size_t kDefaultPairsPerCell = 2000;
inline constexpr std::size_t kRecommendedMinPairs = 500;

/// One experiment grid: every (size, algorithm) cell is generated, split,
/// preprocessed, trained and evaluated independently.
struct ExperimentPlan {
    int table = 1;
    std::vector<std::size_t> sizes{5, 6, 7, 8, 9};
    std::vector<AttackAlgorithm> algorithms{AttackAlgorithm::Naive, AttackAlgorithm::Basic,
                                            AttackAlgorithm::Advanced};
    std::size_t pairs = kDefaultPairsPerCell;
    FeatureKind preprocessing = FeatureKind::Det3d;
    nn::TrainConfig train;
    std::size_t conv_channels = 8;
    std::size_t hidden_units = 32;
    std::size_t conv_layers = 2;
    std::uint64_t seed = 7;
    double gamma = kDefaultGamma;
    double train_fraction = 0.8;
};

inline ExperimentPlan plan_for_table(int table, std::size_t pairs, std::uint64_t seed)
{
    if (table != 1 && table != 2)
        throw Error(ErrorCode::InvalidArgument, "table must be 1 or 2");
    ExperimentPlan p;
    p.table = table;
    p.pairs = pairs;
    p.seed = seed;
    p.preprocessing = table == 1 ? FeatureKind::Det3d : FeatureKind::Error2d;
    return p;
}

inline nlohmann::json plan_to_json(const ExperimentPlan& p)
{
    std::vector<std::string> algos;
    for (auto a : p.algorithms)
        algos.push_back(to_string(a));
    return nlohmann::json{{"table", p.table},
                          {"sizes", p.sizes},
                          {"algorithms", algos},
                          {"pairs", p.pairs},
                          {"preprocessing", to_string(p.preprocessing)},
                          {"train", nn::train_config_to_json(p.train)},
                          {"conv_channels", p.conv_channels},
                          {"hidden_units", p.hidden_units},
                          {"conv_layers", p.conv_layers},
                          {"seed", p.seed},
                          {"gamma", p.gamma},
                          {"train_fraction", p.train_fraction}};
}

inline ExperimentPlan plan_from_json(const nlohmann::json& j)
{
    ExperimentPlan p;
    p.table = j.at("table").get<int>();
    p.sizes = j.at("sizes").get<std::vector<std::size_t>>();
    p.algorithms.clear();
    for (const auto& a : j.at("algorithms"))
        p.algorithms.push_back(parse_attack_algorithm(a.get<std::string>()));
    p.pairs = j.at("pairs").get<std::size_t>();
    p.preprocessing = parse_feature_kind(j.at("preprocessing").get<std::string>());
    p.train = nn::train_config_from_json(j.at("train"));
    p.conv_channels = j.at("conv_channels").get<std::size_t>();
    p.hidden_units = j.at("hidden_units").get<std::size_t>();
    p.conv_layers = j.value("conv_layers", p.conv_layers);
    p.seed = j.at("seed").get<std::uint64_t>();
    p.gamma = j.at("gamma").get<double>();
    p.train_fraction = j.at("train_fraction").get<double>();
    return p;
}

/// Reference detection rates (percent) the grid is compared against; "~100"
/// entries are recorded as 100.
inline std::optional<double> reference_rate(int table, std::size_t n, AttackAlgorithm algo)
{
    static const std::map<std::size_t, std::array<double, 3>> kTable1 = {
        {5, {89, 99, 93}}, {6, {96, 99, 93}}, {7, {98, 100, 92}}, {8, {99, 100, 92}}, {9, {100, 99, 90}}};
    static const std::map<std::size_t, std::array<double, 3>> kTable2 = {
        {5, {89, 86, 79}}, {6, {95, 77, 80}}, {7, {98, 68, 82}}, {8, {99, 67, 83}}, {9, {100, 58, 82}}};
    const auto& t = table == 1 ? kTable1 : kTable2;
    if (table != 1 && table != 2)
        return std::nullopt;
    auto it = t.find(n);
    if (it == t.end())
        return std::nullopt;
    return it->second[static_cast<std::size_t>(algo)];
}

struct CellSeeds {
    std::uint64_t data = 0;
    std::uint64_t split = 0;
    std::uint64_t train = 0;
};

inline CellSeeds cell_seeds(std::uint64_t seed, std::size_t n, AttackAlgorithm algo)
{
    const auto a = static_cast<std::uint64_t>(algo);
    return {RngStream({seed, n, a, 1}).next_u64(), RngStream({seed, n, a, 2}).next_u64(),
            RngStream({seed, n, a, 3}).next_u64()};
}

inline nn::LabeledBatch<float> to_batch(const std::vector<LabeledSample>& samples, FeatureKind kind)
{
    nn::LabeledBatch<float> b;
    if (samples.empty())
        return b;
    const std::size_t n = samples.front().matrix.order();
    const auto shape = feature_shape(kind, n);
    b.inputs = nn::Tensor<float>({samples.size(), shape[0], shape[1], shape[2]});
    b.labels.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].matrix.order() != n)
            throw Error(ErrorCode::DimensionMismatch, "mixed matrix orders in one batch");
        const auto x = network_input(make_feature(samples[i].matrix, kind));
        std::copy(x.begin(), x.end(), b.inputs.sample(i).begin());
        b.labels[i] = static_cast<float>(samples[i].label);
    }
    return b;
}

struct CellResult {
    std::size_t n = 0;
    AttackAlgorithm algorithm = AttackAlgorithm::Naive;
    CellSeeds seeds;
    std::size_t pairs = 0;
    std::size_t train_samples = 0;
    std::size_t test_samples = 0;
    double final_train_loss = 0.0;
    nn::Metrics metrics;
    std::optional<double> reference;
};

inline CellResult run_cell(const ExperimentPlan& plan, std::size_t n, AttackAlgorithm algo)
{
    CellResult cell;
    cell.n = n;
    cell.algorithm = algo;
    cell.seeds = cell_seeds(plan.seed, n, algo);
    cell.pairs = std::max<std::size_t>(plan.pairs, 2);
    cell.reference = reference_rate(plan.table, n, algo);

    GenerateOptions gen;
    gen.n = n;
    gen.pairs = cell.pairs;
    gen.algorithm = algo;
    gen.seed = cell.seeds.data;
    gen.gamma = plan.gamma;
    const auto ds = generate_dataset(gen);
    const auto [train_set, test_set] = split_dataset(ds.samples, SplitSpec{plan.train_fraction, cell.seeds.split});
    cell.train_samples = train_set.size();
    cell.test_samples = test_set.size();

    const auto train_batch = to_batch(train_set, plan.preprocessing);
    const auto test_batch = to_batch(test_set, plan.preprocessing);

    nn::TrainConfig cfg = plan.train;
    cfg.seed = cell.seeds.train;
    nn::Model<float> model(nn::default_spec(plan.preprocessing, n, plan.conv_channels, plan.hidden_units, plan.conv_layers), cfg.seed);
    const auto history = nn::train(model, train_batch, cfg);
    cell.final_train_loss = history.empty() ? 0.0 : history.back().loss;
    cell.metrics = nn::evaluate(model, test_batch);
    return cell;
}

struct ExperimentReport {
    ExperimentPlan plan;
    std::vector<CellResult> cells;
    std::vector<std::string> warnings;

    const CellResult* find(std::size_t n, AttackAlgorithm a) const
    {
        for (const auto& c : cells)
            if (c.n == n && c.algorithm == a)
                return &c;
        return nullptr;
    }
};

using CellCallback = std::function<void(const CellResult&)>;

/// Runs every cell; with threads > 1 cells run concurrently. Cell results do
/// not depend on the thread count and are reported in grid order.
inline ExperimentReport run_plan(const ExperimentPlan& plan, unsigned threads = 1, const CellCallback& on_cell = {})
{
    ExperimentReport rep;
    rep.plan = plan;
    if (plan.pairs < 2)
        rep.warnings.push_back("pairs per cell raised from " + std::to_string(plan.pairs) +
                               " to 2 so that both splits are non-empty");
    if (plan.pairs < kRecommendedMinPairs)
        rep.warnings.push_back("low data: " + std::to_string(plan.pairs) + " pairs per cell (recommended >= " +
                               std::to_string(kRecommendedMinPairs) + "); detection rates are not meaningful");

    std::vector<std::pair<std::size_t, AttackAlgorithm>> grid;
    for (auto n : plan.sizes)
        for (auto a : plan.algorithms)
            grid.emplace_back(n, a);
    rep.cells.resize(grid.size());

    std::mutex mu;
    std::optional<Error> failure;
    std::size_t next = 0;
    auto worker = [&] {
        for (;;) {
            std::size_t k;
            {
                std::lock_guard lock(mu);
                if (next >= grid.size() || failure)
                    return;
                k = next++;
            }
            try {
                auto cell = run_cell(plan, grid[k].first, grid[k].second);
                std::lock_guard lock(mu);
                rep.cells[k] = cell;
                if (on_cell)
                    on_cell(cell);
            } catch (const Error& e) {
                std::lock_guard lock(mu);
                if (!failure)
                    failure = e;
            }
        }
    };
    const unsigned t = std::max(1u, threads);
    if (t == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < t; ++i)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }
    if (failure)
        throw *failure;
    return rep;
}

namespace detail {

inline std::string fixed(double v, int digits)
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

} // namespace detail

inline std::string render_csv(const ExperimentReport& rep)
{
    std::ostringstream os;
    os << "table,n,algorithm,preprocessing,pairs,train_samples,test_samples,accuracy,reference,delta,loss,tp,fp,tn,fn,"
          "data_seed,split_seed,train_seed\n";
    for (const auto& c : rep.cells) {
        os << rep.plan.table << ',' << c.n << ',' << to_string(c.algorithm) << ','
           << to_string(rep.plan.preprocessing) << ',' << c.pairs << ',' << c.train_samples << ',' << c.test_samples
           << ',' << detail::fixed(c.metrics.accuracy, 2) << ','
           << (c.reference ? detail::fixed(*c.reference, 0) : std::string()) << ','
           << (c.reference ? detail::fixed(c.metrics.accuracy - *c.reference, 2) : std::string()) << ','
           << detail::fixed(c.metrics.loss, 6) << ',' << c.metrics.tp << ',' << c.metrics.fp << ',' << c.metrics.tn
           << ',' << c.metrics.fn << ',' << c.seeds.data << ',' << c.seeds.split << ',' << c.seeds.train << '\n';
    }
    return os.str();
}

inline std::string render_markdown(const ExperimentReport& rep)
{
    std::ostringstream os;
    os << "# Attack detection rate, table " << rep.plan.table << " (" << to_string(rep.plan.preprocessing)
       << " features)\n\n";
    for (const auto& w : rep.warnings)
        os << "> warning: " << w << "\n";
    if (!rep.warnings.empty())
        os << "\n";

    os << "| N |";
    for (auto a : rep.plan.algorithms)
        os << ' ' << to_string(a) << " | reference | delta |";
    os << "\n|---|";
    for (std::size_t i = 0; i < rep.plan.algorithms.size(); ++i)
        os << "---:|---:|---:|";
    os << "\n";
    for (auto n : rep.plan.sizes) {
        os << "| " << n << " |";
        for (auto a : rep.plan.algorithms) {
            const auto* c = rep.find(n, a);
            if (!c) {
                os << " | | |";
                continue;
            }
            os << ' ' << detail::fixed(c->metrics.accuracy, 2) << " | "
               << (c->reference ? detail::fixed(*c->reference, 0) : "-") << " | "
               << (c->reference ? detail::fixed(c->metrics.accuracy - *c->reference, 2) : "-") << " |";
        }
        os << "\n";
    }
    os << "\n## Plan\n\n```json\n" << plan_to_json(rep.plan).dump(2) << "\n```\n";
    return os.str();
}

} // namespace pcdetect

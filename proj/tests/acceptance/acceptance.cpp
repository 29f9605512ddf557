// Acceptance run: one [PASS]/[FAIL] line per criterion.
//
//   pcdetect_acceptance [--only 1,4,...] [--cli path/to/pcdetect] [--workdir dir]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "pcdetect/pcdetect.hpp"
#include "support/oracles.hpp"

using namespace pcdetect;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 7;
constexpr std::size_t kDeskPairs = 2000;
constexpr double kTableMinutes = 30.0;

struct Band {
    double lo = 0.0;
    double hi = 100.0;
};

// Detection-rate bands for the det3d table. Naive rises linearly from 85 at
// N=5 to 95 at N=9; every algorithm gets +/-5 around the reference rate where
// that rate is below 99.
Band table1_band(std::size_t n, AttackAlgorithm a)
{
    Band b;
    switch (a) {
    case AttackAlgorithm::Naive: b.lo = 85.0 + 2.5 * static_cast<double>(n - 5); break;
    case AttackAlgorithm::Basic: b.lo = 95.0; break;
    case AttackAlgorithm::Advanced: b.lo = 85.0; break;
    }
    const double ref = *reference_rate(1, n, a);
    if (ref < 99.0) {
        b.lo = std::max(b.lo, ref - 5.0);
        b.hi = std::min(100.0, ref + 5.0);
    }
    return b;
}

std::string fmt(double v, int digits = 2)
{
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

struct Outcome {
    bool pass = false;
    std::string summary;
};

void detail(const std::string& line) { std::cout << "    " << line << '\n' << std::flush; }

ExperimentReport run_table(int table, FeatureKind kind, std::vector<std::size_t> sizes,
                           std::vector<AttackAlgorithm> algos)
{
    auto plan = plan_for_table(table, kDeskPairs, kSeed);
    plan.preprocessing = kind;
    plan.sizes = std::move(sizes);
    plan.algorithms = std::move(algos);
    return run_plan(plan, 1, [](const CellResult& c) {
        detail("N=" + std::to_string(c.n) + " " + to_string(c.algorithm) + ": " + fmt(c.metrics.accuracy) + "%" +
               (c.reference ? " (reference " + fmt(*c.reference, 0) + ")" : ""));
    });
}

Outcome criterion1()
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto rep = run_table(1, FeatureKind::Det3d, {5, 6, 7, 8, 9},
                               {AttackAlgorithm::Naive, AttackAlgorithm::Basic, AttackAlgorithm::Advanced});
    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;

    std::vector<std::string> misses;
    for (const auto& c : rep.cells) {
        const auto b = table1_band(c.n, c.algorithm);
        if (c.metrics.accuracy < b.lo || c.metrics.accuracy > b.hi)
            misses.push_back(to_string(c.algorithm) + " N=" + std::to_string(c.n) + " " + fmt(c.metrics.accuracy) +
                             " not in [" + fmt(b.lo, 1) + ", " + fmt(b.hi, 1) + "]");
    }
    for (const auto& m : misses)
        detail("outside band: " + m);
    detail("runtime " + fmt(minutes, 1) + " min (limit " + fmt(kTableMinutes, 0) + ")");
    const bool fast = minutes <= kTableMinutes;
    return {misses.empty() && fast, std::to_string(rep.cells.size() - misses.size()) + "/" +
                                        std::to_string(rep.cells.size()) + " cells in band, " + fmt(minutes, 1) +
                                        " min"};
}

Outcome criterion2()
{
    const auto rep = run_table(2, FeatureKind::Error2d, {5, 6, 7, 8, 9},
                               {AttackAlgorithm::Naive, AttackAlgorithm::Basic});
    detail("det3d reference cell:");
    const auto det = run_table(1, FeatureKind::Det3d, {9}, {AttackAlgorithm::Basic});
    const double det9 = det.cells.front().metrics.accuracy;

    bool decreasing = true;
    double prev = 101.0;
    std::string trend;
    for (auto n : rep.plan.sizes) {
        const double acc = rep.find(n, AttackAlgorithm::Basic)->metrics.accuracy;
        decreasing = decreasing && acc <= prev;
        prev = acc;
        trend += (trend.empty() ? "" : " > ") + fmt(acc, 1);
    }
    const double b9 = rep.find(9, AttackAlgorithm::Basic)->metrics.accuracy;
    const bool gap = det9 - b9 >= 20.0;

    double naive_min = 100.0;
    for (auto n : rep.plan.sizes)
        naive_min = std::min(naive_min, rep.find(n, AttackAlgorithm::Naive)->metrics.accuracy);
    const bool naive_ok = naive_min >= 85.0;

    detail("basic trend " + trend + (decreasing ? " (non-increasing)" : " (NOT non-increasing)"));
    detail("N=9 basic: error2d " + fmt(b9) + " vs det3d " + fmt(det9) + ", gap " + fmt(det9 - b9));
    detail("naive minimum " + fmt(naive_min));
    return {decreasing && gap && naive_ok, std::string("basic ") + (decreasing ? "decreasing" : "not decreasing") +
                                               ", N=9 gap " + fmt(det9 - b9, 1) + ", naive min " +
                                               fmt(naive_min, 1)};
}

Outcome criterion3()
{
    const auto rep = run_table(1, FeatureKind::Raw2d, {7}, {AttackAlgorithm::Basic});
    const double acc = rep.cells.front().metrics.accuracy;
    return {acc <= 75.0, "raw-matrix network, N=7 basic: " + fmt(acc) + "% (limit 75)"};
}

// Counts failures of each named property over hand-rolled random inputs.
class PropertyTally {
public:
    void check(const std::string& name, bool ok)
    {
        auto& e = tally_[name];
        ++e.first;
        e.second += ok ? 0 : 1;
    }
    bool all_pass() const
    {
        for (const auto& [name, e] : tally_)
            if (e.second)
                return false;
        return true;
    }
    void report() const
    {
        for (const auto& [name, e] : tally_)
            detail(name + ": " + std::to_string(e.first - e.second) + "/" + std::to_string(e.first));
    }
    std::size_t total() const
    {
        std::size_t t = 0;
        for (const auto& [name, e] : tally_)
            t += e.first;
        return t;
    }

private:
    std::map<std::string, std::pair<std::size_t, std::size_t>> tally_;
};

Outcome criterion4()
{
    PropertyTally t;
    oracle::Gen g(0xacce97);

    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = g.between(3, 9);
        const auto c = oracle::make(oracle::consistent_rows(g.weights(n)));
        const auto rep = consistency_report(c);
        t.check("consistent: CI = CR = GCI = 0",
                std::abs(rep.ci) <= 1e-9 && std::abs(rep.cr) <= 1e-9 && std::abs(rep.gci) <= 1e-9);
        const auto gmm = priority_gmm(c);
        const auto evm = priority_evm(c).priorities;
        bool same = true;
        for (std::size_t i = 0; i < n; ++i)
            same = same && std::abs(evm[i] - gmm[i]) <= 1e-6;
        t.check("consistent: EVM = GMM", same);
        bool ones = true;
        for (double e : error_matrix(c, gmm).values)
            ones = ones && std::abs(e - 1.0) <= 1e-9;
        t.check("consistent: E(C) = 1", ones);
        bool zeros = true;
        for (double d : det_tensor(c).values)
            zeros = zeros && std::abs(d) <= 1e-9;
        t.check("consistent: D(C) = 0", zeros);
    }

    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = g.between(3, 9);
        const auto c = oracle::random_perturbed(n, g, g.uniform(1.05, 3.0));
        AttackConfig cfg;
        cfg.p = g.index(n);
        cfg.r = (cfg.p + 1 + g.index(n - 1)) % n;
        cfg.alpha = g.uniform(1.1, 5.0);
        cfg.method = trial % 2 ? PriorityMethod::EVM : PriorityMethod::GMM;
        for (auto algo : {AttackAlgorithm::Naive, AttackAlgorithm::Basic, AttackAlgorithm::Advanced}) {
            const auto out = run_attack(algo, c, cfg);
            bool recip = true, local = true;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    recip = recip && std::abs(out.attacked(i, j) * out.attacked(j, i) - 1.0) <= 1e-12;
                    if (i != cfg.p && j != cfg.p)
                        local = local && out.attacked(i, j) == c(i, j);
                }
            t.check("attacks preserve reciprocity", recip);
            t.check("attacks touch only row/column p", local);
            if (algo == AttackAlgorithm::Advanced && out.success) {
                const auto w = cfg.method == PriorityMethod::GMM ? oracle::gmm(out.attacked)
                                                                  : oracle::perron_vector(out.attacked);
                t.check("advanced success => w'(p) > w'(r)", w[cfg.p] > w[cfg.r]);
            }
        }
        AttackConfig naive = cfg;
        naive.alpha = c.max_entry() * g.uniform(1.001, 2.0);
        t.check("naive alpha > max => GMM argmax = p",
                oracle::argmax(oracle::gmm(attack_naive(c, naive).attacked)) == cfg.p);
    }

    for (int trial = 0; trial < 80; ++trial) {
        const std::size_t n = g.between(3, 9);
        const auto c = trial % 2 ? oracle::make(oracle::saaty_rows(n, g)) : oracle::random_perturbed(n, g, 3.0);
        const auto f = det_tensor(c);
        bool closed = true, sym = true, nonneg = true;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = 0; k < n; ++k) {
                    const double d = f(i, j, k);
                    const double tol = 1e-9 * std::max(1.0, std::abs(d));
                    closed = closed && std::abs(d - oracle::det_closed_form(c, i, j, k)) <= tol;
                    for (double q : {f(j, i, k), f(i, k, j), f(k, j, i), f(j, k, i), f(k, i, j)})
                        sym = sym && std::abs(d - q) <= tol;
                    nonneg = nonneg && d >= -1e-9;
                }
        t.check("det tensor = closed form", closed);
        t.check("det tensor permutation symmetric", sym);
        t.check("det tensor non-negative", nonneg);
    }

    t.report();
    return {t.all_pass(), std::to_string(t.total()) + " property checks"};
}

Outcome criterion5()
{
    double worst_grad = 0.0;
    std::size_t checked = 0;
    struct Arch {
        FeatureKind kind;
        std::size_t n;
        std::size_t conv_layers;
    };
    for (const auto& a : {Arch{FeatureKind::Det3d, 5, 2}, Arch{FeatureKind::Det3d, 6, 1},
                          Arch{FeatureKind::Error2d, 7, 2}, Arch{FeatureKind::Raw2d, 5, 1}}) {
        nn::Model<double> m(nn::default_spec(a.kind, a.n, 4, 8, a.conv_layers), 100 + a.n);
        oracle::Gen g(a.n * 31 + a.conv_layers);
        std::vector<double> x(m.input_size());
        for (auto& v : x)
            v = g.uniform(-1.0, 1.0);
        for (double label : {0.0, 1.0}) {
            const auto r = nn::gradient_check(m, x, label);
            worst_grad = std::max(worst_grad, r.max_rel_error);
            checked += r.checked;
            detail(to_string(a.kind) + " N=" + std::to_string(a.n) + " conv x" + std::to_string(a.conv_layers) +
                   " label " + fmt(label, 0) + ": max rel error " + fmt(r.max_rel_error * 1e6, 3) + "e-6 over " +
                   std::to_string(r.checked) + " params (" + std::to_string(r.skipped_kinks) + " at kinks)");
        }
    }

    double worst_lambda = 0.0;
    oracle::Gen g(0x1a3bda);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 3 + static_cast<std::size_t>(trial % 7);
        const auto c = oracle::make(trial % 2 ? oracle::saaty_rows(n, g)
                                              : oracle::perturb_rows(oracle::consistent_rows(g.weights(n)), g, 3.0));
        worst_lambda = std::max(worst_lambda, std::abs(priority_evm(c).lambda_max - oracle::lambda_max(c)));
    }
    detail("power iteration vs dense eigensolver: max |dlambda| = " + fmt(worst_lambda * 1e12, 3) + "e-12");
    return {worst_grad <= 1e-3 && worst_lambda <= 1e-8,
            "gradients " + fmt(worst_grad * 1e6, 2) + "e-6 rel over " + std::to_string(checked) +
                " params, lambda_max " + fmt(worst_lambda * 1e12, 2) + "e-12 abs"};
}

std::string slurp(const fs::path& p)
{
    try {
        return pcdetect::detail::read_file(p.string());
    } catch (const Error&) {
        return {};
    }
}

Outcome criterion6(const std::string& cli, const fs::path& work)
{
    if (cli.empty()) {
        const auto plan = plan_for_table(1, 500, kSeed);
        const auto a = run_plan(plan), b = run_plan(plan);
        const bool same = render_markdown(a) == render_markdown(b) && render_csv(a) == render_csv(b);
        return {same, "in-process run_plan twice (no --cli given): " + std::string(same ? "identical" : "differ")};
    }
    std::vector<fs::path> dirs{work / "reproduce_a", work / "reproduce_b"};
    for (const auto& d : dirs) {
        fs::remove_all(d);
        const std::string cmd = "\"" + cli + "\" reproduce --table 1 --scale 500 --seed 7 --out \"" + d.string() +
                                "\" > \"" + (d.string() + ".stdout") + "\" 2> \"" + (d.string() + ".stderr") + "\"";
        if (std::system(cmd.c_str()) != 0)
            return {false, "reproduce run failed: " + cmd};
    }
    bool same = true;
    for (const char* f : {"table1.md", "table1.csv"}) {
        const auto a = slurp(dirs[0] / f), b = slurp(dirs[1] / f);
        const bool eq = !a.empty() && a == b;
        detail(std::string(f) + ": " + std::to_string(a.size()) + " bytes, " + (eq ? "identical" : "DIFFERENT"));
        same = same && eq;
    }
    const bool stdout_eq = slurp(dirs[0].string() + ".stdout") == slurp(dirs[1].string() + ".stdout");
    detail(std::string("stdout ") + (stdout_eq ? "identical" : "DIFFERENT"));
    return {same && stdout_eq, "two `reproduce --table 1 --scale 500 --seed 7` runs " +
                                   std::string(same && stdout_eq ? "byte-identical" : "differ")};
}

} // namespace

int main(int argc, char** argv)
{
    std::set<int> only;
    std::string cli;
    fs::path work = fs::temp_directory_path() / "pcdetect_acceptance";
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            for (std::string tok; std::getline(ss, tok, ',');)
                only.insert(std::stoi(tok));
        } else if (a == "--cli" && i + 1 < argc) {
            cli = argv[++i];
        } else if (a == "--workdir" && i + 1 < argc) {
            work = argv[++i];
        } else {
            std::cerr << "usage: pcdetect_acceptance [--only 1,2,...] [--cli path] [--workdir dir]\n";
            return 2;
        }
    }
    fs::create_directories(work);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"det3d table replication at 2000 pairs/cell", criterion1},
        {"error2d table: basic decays, far below det3d; naive >= 85", criterion2},
        {"raw-matrix baseline fails on basic at N=7", criterion3},
        {"property suite", criterion4},
        {"gradient and eigenvalue checks", criterion5},
        {"reproduce is byte-deterministic", [&] { return criterion6(cli, work); }},
    };

    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!only.empty() && !only.count(id))
            continue;
        std::cout << "criterion " << id << ": " << criteria[k].first << '\n' << std::flush;
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << id << " " << criteria[k].first << " -- " << o.summary
                  << '\n'
                  << std::flush;
    }
    return failures ? 1 : 0;
}

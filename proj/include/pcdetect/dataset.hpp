#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcdetect/attacks.hpp"
#include "pcdetect/consistency.hpp"
#include "pcdetect/matrix.hpp"
#include "pcdetect/rng.hpp"

namespace pcdetect {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr double kDefaultGamma = 2.0;
inline constexpr int kPerturbationAttempts = 10;
// A perturbed matrix with CR at or below this is treated as still consistent.
inline constexpr double kDegenerateCr = 1e-12;

struct LabeledSample {
    PCMatrix matrix;
    int label = 0; // 0 clean, 1 attacked
    std::optional<Provenance> provenance;
    std::uint64_t source_id = 0;

    friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

struct DatasetManifest {
    std::size_t n = 0;
    AttackAlgorithm algorithm = AttackAlgorithm::Naive;
    std::size_t count_pairs = 0;
    std::uint64_t seed = 0;
    double perturbation_gamma = kDefaultGamma;
    int format_version = kDatasetFormatVersion;
    std::string digest; // FNV-1a over all sample lines, hex

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<LabeledSample> samples;
    // Pairs whose naive alpha did not exceed the largest clean entry.
    std::size_t alpha_warnings = 0;
};

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t shuffle_seed = 0;
};

/// Uniform draw from the probability simplex (normalized exponentials).
inline PriorityVector random_weights(std::size_t n, RngStream& rng)
{
    if (n < 3)
        throw Error(ErrorCode::OrderTooSmall, "order " + std::to_string(n) + " < 3");
    std::vector<double> w(n);
    double total = 0.0;
    for (double& x : w) {
        x = rng.exponential();
        total += x;
    }
    for (double& x : w)
        x /= total;
    return {std::move(w), PriorityMethod::GMM};
}

/// Multiplies every upper-triangle entry by an independent log-uniform factor
/// in [1/gamma, gamma] and mirrors the lower triangle. Re-draws, at most
/// kPerturbationAttempts times, if the result is still consistent.
inline PCMatrix perturb_consistent(const PCMatrix& c, double gamma, RngStream& rng)
{
    if (!(gamma > 1.0) || !std::isfinite(gamma))
        throw Error(ErrorCode::InvalidArgument, "gamma must be > 1");
    const std::size_t n = c.order();
    const double log_gamma = std::log(gamma);
    std::vector<double> flat(c.data().begin(), c.data().end());
    for (int attempt = 0; attempt < kPerturbationAttempts; ++attempt) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                flat[i * n + j] = c(i, j) * std::exp(rng.uniform(-log_gamma, log_gamma));
        auto out = PCMatrix::from_upper(n, flat);
        if (consistency_report(out).cr > kDegenerateCr)
            return out;
    }
    throw Error(ErrorCode::DegeneratePerturbation,
                "perturbation stayed consistent after " + std::to_string(kPerturbationAttempts) + " attempts");
}

struct GenerateOptions {
    std::size_t n = 5;
    std::size_t pairs = 1;
    AttackAlgorithm algorithm = AttackAlgorithm::Naive;
    std::uint64_t seed = 0;
    double gamma = kDefaultGamma;
    PriorityMethod stop_method = PriorityMethod::GMM;
    unsigned threads = 1;
};

namespace detail {

struct GeneratedPair {
    LabeledSample clean;
    LabeledSample attacked;
    bool alpha_warning = false;
};

inline GeneratedPair generate_pair(const GenerateOptions& opt, std::uint64_t index)
{
    RngStream rng({opt.seed, index});
    const auto w = random_weights(opt.n, rng);
    const auto clean = perturb_consistent(consistent_from_weights(w), opt.gamma, rng);
    const auto targets = select_targets(clean, rng);

    AttackConfig cfg;
    cfg.p = targets.p;
    cfg.r = targets.r;
    cfg.method = opt.stop_method;
    cfg.alpha = opt.algorithm == AttackAlgorithm::Naive ? static_cast<double>(opt.n) : rng.uniform(1.1, 5.0);

    auto outcome = run_attack(opt.algorithm, clean, cfg);
    GeneratedPair pair;
    pair.clean = {clean, 0, std::nullopt, index};
    pair.attacked = {outcome.attacked, 1, provenance_of(outcome), index};
    pair.alpha_warning = outcome.alpha_not_above_max;
    return pair;
}

inline std::string hex64(std::uint64_t v)
{
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4)
        s[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
    return s;
}

} // namespace detail

inline nlohmann::json sample_to_json(const LabeledSample& s)
{
    return nlohmann::json{{"id", s.source_id},
                          {"label", s.label},
                          {"matrix", matrix_to_json(s.matrix)},
                          {"provenance", s.provenance ? provenance_to_json(*s.provenance) : nlohmann::json(nullptr)}};
}

inline LabeledSample sample_from_json(const nlohmann::json& j)
{
    LabeledSample s{matrix_from_json(j.at("matrix")), j.at("label").get<int>(), std::nullopt,
                    j.at("id").get<std::uint64_t>()};
    if (!j.at("provenance").is_null())
        s.provenance = provenance_from_json(j.at("provenance"));
    if ((s.label == 1) != s.provenance.has_value() || (s.label != 0 && s.label != 1))
        throw Error(ErrorCode::InvalidArgument, "label and provenance disagree");
    return s;
}

inline std::string dataset_digest(const std::vector<LabeledSample>& samples)
{
    Fnv1a h;
    for (const auto& s : samples) {
        const auto line = sample_to_json(s).dump();
        h.update(line.data(), line.size());
        h.update("\n", 1);
    }
    return detail::hex64(h.value());
}

/// Emits `pairs` perturbed clean matrices, each followed by its attacked twin.
/// Pair k draws from its own stream keyed by (seed, k), so the output does not
/// depend on `threads`.
inline Dataset generate_dataset(const GenerateOptions& opt)
{
    if (opt.n < 3)
        throw Error(ErrorCode::OrderTooSmall, "order " + std::to_string(opt.n) + " < 3");
    if (opt.pairs < 1)
        throw Error(ErrorCode::InvalidArgument, "pairs must be >= 1");

    std::vector<detail::GeneratedPair> pairs(opt.pairs);
    std::vector<std::optional<Error>> failures(opt.pairs);
    auto work = [&](std::size_t begin, std::size_t step) {
        for (std::size_t k = begin; k < opt.pairs; k += step) {
            try {
                pairs[k] = detail::generate_pair(opt, k);
            } catch (const Error& e) {
                failures[k] = Error(e.code(), "pair " + std::to_string(k) + ": " + e.what(),
                                    Error::Location{k, 0});
            }
        }
    };
    const unsigned threads = std::max(1u, opt.threads);
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back(work, t, threads);
        for (auto& th : pool)
            th.join();
    }
    for (auto& f : failures)
        if (f)
            throw *f;

    Dataset ds;
    ds.samples.reserve(2 * opt.pairs);
    for (auto& p : pairs) {
        ds.samples.push_back(std::move(p.clean));
        ds.samples.push_back(std::move(p.attacked));
        ds.alpha_warnings += p.alpha_warning ? 1 : 0;
    }
    ds.manifest = {opt.n, opt.algorithm, opt.pairs, opt.seed, opt.gamma, kDatasetFormatVersion,
                   dataset_digest(ds.samples)};
    return ds;
}

/// Shuffles whole clean/attacked pairs, then cuts at train_fraction, so twins
/// never land on opposite sides.
inline std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>>
split_dataset(const std::vector<LabeledSample>& samples, const SplitSpec& spec)
{
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw Error(ErrorCode::InvalidArgument, "train_fraction must lie in (0, 1)");

    std::map<std::uint64_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < samples.size(); ++i)
        groups[samples[i].source_id].push_back(i);
    if (groups.size() < 2)
        throw Error(ErrorCode::EmptySplit, "need at least two pairs to split, have " + std::to_string(groups.size()));

    std::vector<const std::vector<std::size_t>*> order;
    order.reserve(groups.size());
    for (const auto& [id, members] : groups)
        order.push_back(&members);

    RngStream rng({spec.shuffle_seed, 0x5311u});
    for (std::size_t i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[static_cast<std::size_t>(rng.below(i + 1))]);

    const auto total = static_cast<double>(order.size());
    auto cut = static_cast<std::size_t>(std::llround(total * spec.train_fraction));
    cut = std::clamp<std::size_t>(cut, 1, order.size() - 1);

    std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> out;
    for (std::size_t k = 0; k < order.size(); ++k) {
        auto& dst = k < cut ? out.first : out.second;
        for (std::size_t idx : *order[k])
            dst.push_back(samples[idx]);
    }
    return out;
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m)
{
    return nlohmann::json{{"format_version", m.format_version},
                          {"n", m.n},
                          {"algorithm", to_string(m.algorithm)},
                          {"count_pairs", m.count_pairs},
                          {"seed", m.seed},
                          {"perturbation_gamma", m.perturbation_gamma},
                          {"digest", m.digest}};
}

inline std::string serialize_dataset(const Dataset& ds)
{
    std::string out = nlohmann::json{{"manifest", manifest_to_json(ds.manifest)}}.dump();
    out += '\n';
    for (const auto& s : ds.samples) {
        out += sample_to_json(s).dump();
        out += '\n';
    }
    return out;
}

inline void save_dataset(const std::string& path, const Dataset& ds)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
    f << serialize_dataset(ds);
    if (!f)
        throw Error(ErrorCode::Io, "write to '" + path + "' failed");
}

/// Parses JSONL produced by serialize_dataset. Line numbers in errors are 1-based.
inline Dataset parse_dataset(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line))
        throw Error(ErrorCode::CorruptSample, "missing manifest line", Error::Location{1, 0});

    Dataset ds;
    try {
        const auto j = nlohmann::json::parse(line).at("manifest");
        ds.manifest.format_version = j.at("format_version").get<int>();
        if (ds.manifest.format_version != kDatasetFormatVersion)
            throw Error(ErrorCode::FormatVersionMismatch,
                        "format_version " + std::to_string(ds.manifest.format_version) + ", expected " +
                            std::to_string(kDatasetFormatVersion));
        ds.manifest.n = j.at("n").get<std::size_t>();
        ds.manifest.algorithm = parse_attack_algorithm(j.at("algorithm").get<std::string>());
        ds.manifest.count_pairs = j.at("count_pairs").get<std::size_t>();
        ds.manifest.seed = j.at("seed").get<std::uint64_t>();
        ds.manifest.perturbation_gamma = j.at("perturbation_gamma").get<double>();
        ds.manifest.digest = j.at("digest").get<std::string>();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::FormatVersionMismatch)
            throw;
        throw Error(ErrorCode::CorruptSample, std::string("manifest: ") + e.what(), Error::Location{1, 0});
    } catch (const std::exception& e) {
        throw Error(ErrorCode::CorruptSample, std::string("manifest: ") + e.what(), Error::Location{1, 0});
    }

    std::size_t lineno = 1;
    const std::size_t expected = 2 * ds.manifest.count_pairs;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() && in.peek() == std::char_traits<char>::eof())
            break;
        try {
            auto s = sample_from_json(nlohmann::json::parse(line));
            if (s.matrix.order() != ds.manifest.n)
                throw Error(ErrorCode::DimensionMismatch, "matrix order differs from manifest");
            ds.samples.push_back(std::move(s));
        } catch (const std::exception& e) {
            throw Error(ErrorCode::CorruptSample, "line " + std::to_string(lineno) + ": " + e.what(),
                        Error::Location{lineno, 0});
        }
    }
    if (ds.samples.size() != expected)
        throw Error(ErrorCode::CorruptSample,
                    "expected " + std::to_string(expected) + " samples, found " + std::to_string(ds.samples.size()),
                    Error::Location{ds.samples.size() + 2, 0});
    if (dataset_digest(ds.samples) != ds.manifest.digest)
        throw Error(ErrorCode::DigestMismatch, "sample content does not match the manifest digest");
    return ds;
}

inline Dataset load_dataset(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorCode::Io, "cannot open '" + path + "'");
    return parse_dataset(f);
}

} // namespace pcdetect

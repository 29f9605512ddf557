#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcdetect/matrix.hpp"
#include "pcdetect/priority.hpp"
#include "pcdetect/rng.hpp"

namespace pcdetect {

enum class AttackAlgorithm { Naive, Basic, Advanced };

inline std::string to_string(AttackAlgorithm a)
{
    switch (a) {
    case AttackAlgorithm::Naive: return "naive";
    case AttackAlgorithm::Basic: return "basic";
    case AttackAlgorithm::Advanced: return "advanced";
    }
    return "unknown";
}

inline AttackAlgorithm parse_attack_algorithm(const std::string& s)
{
    if (s == "naive")
        return AttackAlgorithm::Naive;
    if (s == "basic")
        return AttackAlgorithm::Basic;
    if (s == "advanced")
        return AttackAlgorithm::Advanced;
    throw Error(ErrorCode::InvalidArgument, "unknown attack algorithm '" + s + "'");
}

// Indices are zero-based throughout.
struct AttackConfig {
    std::size_t p = 0; // promoted alternative
    std::size_t r = 1; // reference alternative
    double alpha = 2.0;
    PriorityMethod method = PriorityMethod::GMM;
    bool stop_check = true; // advanced only
};

struct AttackOutcome {
    PCMatrix attacked;
    AttackAlgorithm algorithm = AttackAlgorithm::Naive;
    double alpha = 0.0;
    std::size_t p = 0;
    std::size_t r = 0;
    std::vector<std::pair<std::size_t, std::size_t>> modified_pairs;
    int steps_taken = 0;
    bool success = false;
    // Naive attack only: alpha did not exceed the largest input entry.
    bool alpha_not_above_max = false;
};

// Serialized alongside attacked samples.
struct Provenance {
    AttackAlgorithm algorithm = AttackAlgorithm::Naive;
    double alpha = 0.0;
    std::size_t p = 0;
    std::size_t r = 0;
    int steps = 0;
    bool success = false;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

inline Provenance provenance_of(const AttackOutcome& o)
{
    return {o.algorithm, o.alpha, o.p, o.r, o.steps_taken, o.success};
}

inline nlohmann::json provenance_to_json(const Provenance& p)
{
    return nlohmann::json{{"algo", to_string(p.algorithm)}, {"alpha", p.alpha}, {"p", p.p},
                          {"r", p.r},                       {"steps", p.steps}, {"success", p.success}};
}

inline Provenance provenance_from_json(const nlohmann::json& j)
{
    Provenance p;
    p.algorithm = parse_attack_algorithm(j.at("algo").get<std::string>());
    p.alpha = j.at("alpha").get<double>();
    p.p = j.at("p").get<std::size_t>();
    p.r = j.at("r").get<std::size_t>();
    p.steps = j.at("steps").get<int>();
    p.success = j.at("success").get<bool>();
    return p;
}

namespace detail {

inline void check_config(const PCMatrix& c, const AttackConfig& cfg)
{
    const std::size_t n = c.order();
    if (cfg.p >= n || cfg.r >= n)
        throw Error(ErrorCode::InvalidArgument, "p and r must be < " + std::to_string(n),
                    Error::Location{cfg.p, cfg.r});
    if (cfg.p == cfg.r)
        throw Error(ErrorCode::PromotedEqualsReference, "promoted and reference alternative coincide",
                    Error::Location{cfg.p, cfg.r});
    if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha))
        throw Error(ErrorCode::InvalidArgument, "alpha must be finite and > 0");
}

inline bool promoted_ahead(const PCMatrix& c, const AttackConfig& cfg)
{
    const auto w = priorities(c, cfg.method);
    return w[cfg.p] > w[cfg.r];
}

// Overwrites row p (and column p reciprocally) with alpha * row r, in
// ascending column order. With `stop` set, the ranking is re-derived after
// each update and the loop ends as soon as p overtakes r.
inline AttackOutcome scaled_reference_row(const PCMatrix& c, const AttackConfig& cfg, AttackAlgorithm algo,
                                          bool stop)
{
    check_config(c, cfg);
    AttackOutcome out{c, algo, cfg.alpha, cfg.p, cfg.r, {}, 0, false, false};
    for (std::size_t i = 0; i < c.order(); ++i) {
        if (i == cfg.p)
            continue;
        out.attacked.set_pair(cfg.p, i, cfg.alpha * out.attacked(cfg.r, i));
        out.modified_pairs.emplace_back(cfg.p, i);
        out.modified_pairs.emplace_back(i, cfg.p);
        ++out.steps_taken;
        if (stop && promoted_ahead(out.attacked, cfg)) {
            out.success = true;
            return out;
        }
    }
    out.success = promoted_ahead(out.attacked, cfg);
    return out;
}

} // namespace detail

/// Sets every off-diagonal entry of row p to alpha and of column p to 1/alpha.
inline AttackOutcome attack_naive(const PCMatrix& c, const AttackConfig& cfg)
{
    detail::check_config(c, cfg);
    AttackOutcome out{c, AttackAlgorithm::Naive, cfg.alpha, cfg.p, cfg.r, {}, 0, false, false};
    out.alpha_not_above_max = !(cfg.alpha > c.max_entry());
    for (std::size_t i = 0; i < c.order(); ++i) {
        if (i == cfg.p)
            continue;
        out.attacked.set_pair(cfg.p, i, cfg.alpha);
        out.modified_pairs.emplace_back(cfg.p, i);
        out.modified_pairs.emplace_back(i, cfg.p);
        ++out.steps_taken;
    }
    out.success = detail::promoted_ahead(out.attacked, cfg);
    return out;
}

/// Replaces row p by the reference row r scaled by alpha (c'_pi = alpha c_ri).
inline AttackOutcome attack_basic(const PCMatrix& c, const AttackConfig& cfg)
{
    return detail::scaled_reference_row(c, cfg, AttackAlgorithm::Basic, false);
}

/// The basic attack with an early exit once w'(p) > w'(r) under cfg.method.
inline AttackOutcome attack_advanced(const PCMatrix& c, const AttackConfig& cfg)
{
    return detail::scaled_reference_row(c, cfg, AttackAlgorithm::Advanced, cfg.stop_check);
}

inline AttackOutcome run_attack(AttackAlgorithm algo, const PCMatrix& c, const AttackConfig& cfg)
{
    switch (algo) {
    case AttackAlgorithm::Naive: return attack_naive(c, cfg);
    case AttackAlgorithm::Basic: return attack_basic(c, cfg);
    case AttackAlgorithm::Advanced: return attack_advanced(c, cfg);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown attack algorithm");
}

struct Targets {
    std::size_t r = 0;
    std::size_t p = 0;
};

/// r is the EVM top alternative (lowest index on ties); p is drawn uniformly
/// from the remaining indices.
inline Targets select_targets(const PCMatrix& c, RngStream& rng)
{
    const auto w = priority_evm(c).priorities;
    Targets t;
    for (std::size_t i = 1; i < w.size(); ++i)
        if (w[i] > w[t.r])
            t.r = i;
    t.p = static_cast<std::size_t>(rng.below(c.order() - 1));
    if (t.p >= t.r)
        ++t.p;
    return t;
}

} // namespace pcdetect

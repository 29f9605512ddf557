#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "pcdetect/nn/model.hpp"

namespace pcdetect::nn {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped_kinks = 0;
};

struct GradCheckOptions {
    double epsilon = 1e-3;
    // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
    double floor = 1e-6;
    // Check every `stride`-th parameter (1 = all).
    std::size_t stride = 1;
};

namespace detail {

// Sign pattern of every ReLU input; a probe that changes it crossed a kink.
inline std::vector<bool> relu_mask(const Model<double>& model, const Trace<double>& tr)
{
    std::vector<bool> mask;
    const auto& layers = model.spec().layers;
    for (std::size_t l = 0; l < layers.size(); ++l)
        if (layers[l].kind == LayerKind::Relu)
            for (double v : tr.acts[l])
                mask.push_back(v > 0.0);
    return mask;
}

} // namespace detail

/// Compares the analytic BCE gradient of one labelled sample against central
/// differences. Parameters whose +/- epsilon probe flips any ReLU input across
/// zero are excluded and counted in `skipped_kinks`.
inline GradCheckResult gradient_check(const Model<double>& model, std::span<const double> input, double label,
                                      const GradCheckOptions& opt = {})
{
    Model<double> probe = model;
    Trace<double> tr;
    probe.forward(input, tr);
    const auto base_mask = detail::relu_mask(probe, tr);

    std::vector<double> analytic(probe.parameter_count(), 0.0);
    std::vector<std::vector<double>> scratch;
    probe.backward(tr, tr.probability - label, analytic, scratch);

    GradCheckResult res;
    auto params = probe.parameters();
    const std::size_t stride = std::max<std::size_t>(1, opt.stride);
    for (std::size_t i = 0; i < params.size(); i += stride) {
        const double saved = params[i];

        params[i] = saved + opt.epsilon;
        probe.forward(input, tr);
        const double up = bce_from_logit(tr.logit, label);
        const bool kink_up = detail::relu_mask(probe, tr) != base_mask;

        params[i] = saved - opt.epsilon;
        probe.forward(input, tr);
        const double down = bce_from_logit(tr.logit, label);
        const bool kink_down = detail::relu_mask(probe, tr) != base_mask;

        params[i] = saved;
        if (kink_up || kink_down) {
            ++res.skipped_kinks;
            continue;
        }
        const double numeric = (up - down) / (2.0 * opt.epsilon);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), opt.floor});
        res.max_rel_error = std::max(res.max_rel_error, std::abs(analytic[i] - numeric) / denom);
        ++res.checked;
    }
    return res;
}

} // namespace pcdetect::nn

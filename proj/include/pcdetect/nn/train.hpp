#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcdetect/nn/model.hpp"
#include "pcdetect/rng.hpp"

namespace pcdetect::nn {

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline nlohmann::json train_config_to_json(const TrainConfig& c)
{
    return nlohmann::json{{"epochs", c.epochs},   {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
                          {"beta1", c.beta1},     {"beta2", c.beta2},           {"epsilon", c.epsilon},
                          {"seed", c.seed},       {"loss", "bce"}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j)
{
    TrainConfig c;
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

// Inputs (batch, d1, d2, d3) with one 0/1 label per sample.
template <class T>
struct LabeledBatch {
    Tensor<T> inputs;
    std::vector<T> labels;

    std::size_t size() const { return labels.size(); }
};

struct EpochStats {
    std::size_t epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0; // percent
};

inline std::string history_csv(const std::vector<EpochStats>& h)
{
    std::ostringstream os;
    os.precision(17);
    os << "epoch,loss,accuracy\n";
    for (const auto& e : h)
        os << e.epoch << ',' << e.loss << ',' << e.accuracy << '\n';
    return os.str();
}

struct Metrics {
    double accuracy = 0.0; // detection rate, percent
    double loss = 0.0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double threshold = 0.5;

    std::size_t total() const { return tp + fp + tn + fn; }
    friend bool operator==(const Metrics&, const Metrics&) = default;
};

inline nlohmann::json metrics_to_json(const Metrics& m)
{
    return nlohmann::json{{"accuracy", m.accuracy}, {"loss", m.loss}, {"tp", m.tp}, {"fp", m.fp},
                          {"tn", m.tn},             {"fn", m.fn},     {"threshold", m.threshold}};
}

/// Mini-batch Adam on mean binary cross-entropy. Sample order is reshuffled
/// every epoch from (cfg.seed, epoch); gradients are accumulated in sample
/// order, so the result is a pure function of (model, data, cfg).
/// The reported epoch loss and accuracy are running means over the epoch's
/// mini-batches, taken before each update.
template <class T>
std::vector<EpochStats> train(Model<T>& model, const LabeledBatch<T>& data, const TrainConfig& cfg)
{
    if (data.size() == 0)
        throw Error(ErrorCode::EmptySet, "training set is empty");
    if (cfg.batch_size == 0 || !(cfg.learning_rate > 0.0))
        throw Error(ErrorCode::InvalidArgument, "batch_size and learning_rate must be positive");
    if (data.inputs.sample_size() != model.input_size())
        throw Error(ErrorCode::ShapeMismatch, "training inputs do not match the model input shape");

    auto params = model.parameters();
    const std::size_t np = params.size();
    std::vector<T> m(np, T(0)), v(np, T(0)), grad(np);
    std::vector<std::size_t> order(data.size());
    std::vector<EpochStats> history;

    Trace<T> tr;
    std::vector<std::vector<T>> scratch;
    std::uint64_t step = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        RngStream rng({cfg.seed, 0xe90cu, epoch});
        for (std::size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[static_cast<std::size_t>(rng.below(i + 1))]);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const T inv = T(1) / static_cast<T>(end - start);
            std::fill(grad.begin(), grad.end(), T(0));
            for (std::size_t b = start; b < end; ++b) {
                const std::size_t idx = order[b];
                const T y = data.labels[idx];
                model.forward(data.inputs.sample(idx), tr);
                loss_sum += static_cast<double>(bce_from_logit(tr.logit, y));
                correct += ((tr.probability > T(0.5)) == (y > T(0.5))) ? 1 : 0;
                model.backward(tr, (tr.probability - y) * inv, grad, scratch);
            }

            ++step;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            const T lr_t = static_cast<T>(cfg.learning_rate * std::sqrt(bc2) / bc1);
            const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
            const T eps_hat = static_cast<T>(cfg.epsilon * std::sqrt(bc2));
            for (std::size_t i = 0; i < np; ++i) {
                m[i] = b1 * m[i] + (T(1) - b1) * grad[i];
                v[i] = b2 * v[i] + (T(1) - b2) * grad[i] * grad[i];
                params[i] -= lr_t * m[i] / (std::sqrt(v[i]) + eps_hat);
            }
        }

        EpochStats st{epoch + 1, loss_sum / static_cast<double>(data.size()),
                      100.0 * static_cast<double>(correct) / static_cast<double>(data.size())};
        if (!std::isfinite(st.loss))
            throw Error(ErrorCode::DivergedLoss, "loss diverged in epoch " + std::to_string(st.epoch),
                        Error::Location{st.epoch, 0});
        history.push_back(st);
    }
    return history;
}

/// Detection rate at `threshold`; a probability equal to the threshold counts
/// as a negative.
template <class T>
Metrics evaluate(const Model<T>& model, const LabeledBatch<T>& data, double threshold = 0.5)
{
    if (data.size() == 0)
        throw Error(ErrorCode::EmptySet, "evaluation set is empty");
    Metrics out;
    out.threshold = threshold;
    Trace<T> tr;
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        model.forward(data.inputs.sample(i), tr);
        loss_sum += static_cast<double>(bce_from_logit(tr.logit, data.labels[i]));
        const bool predicted = static_cast<double>(tr.probability) > threshold;
        const bool actual = data.labels[i] > T(0.5);
        if (predicted && actual)
            ++out.tp;
        else if (predicted)
            ++out.fp;
        else if (actual)
            ++out.fn;
        else
            ++out.tn;
    }
    out.loss = loss_sum / static_cast<double>(data.size());
    out.accuracy = 100.0 * static_cast<double>(out.tp + out.tn) / static_cast<double>(data.size());
    return out;
}

} // namespace pcdetect::nn

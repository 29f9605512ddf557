#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcdetect/error.hpp"
#include "pcdetect/features.hpp"

namespace pcdetect::nn {

enum class LayerKind { Conv3d, Conv2d, Relu, Flatten, Dense, Sigmoid };

inline std::string to_string(LayerKind k)
{
    switch (k) {
    case LayerKind::Conv3d: return "conv3d";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Relu: return "relu";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Dense: return "dense";
    case LayerKind::Sigmoid: return "sigmoid";
    }
    return "unknown";
}

inline LayerKind parse_layer_kind(const std::string& s)
{
    for (auto k : {LayerKind::Conv3d, LayerKind::Conv2d, LayerKind::Relu, LayerKind::Flatten, LayerKind::Dense,
                   LayerKind::Sigmoid})
        if (to_string(k) == s)
            return k;
    throw Error(ErrorCode::InvalidArgument, "unknown layer kind '" + s + "'");
}

struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    std::size_t kernel = 0; // conv only
    std::size_t units = 0;  // output channels (conv) or units (dense)

    static LayerSpec conv3d(std::size_t kernel, std::size_t channels) { return {LayerKind::Conv3d, kernel, channels}; }
    static LayerSpec conv2d(std::size_t kernel, std::size_t channels) { return {LayerKind::Conv2d, kernel, channels}; }
    static LayerSpec relu() { return {LayerKind::Relu, 0, 0}; }
    static LayerSpec flatten() { return {LayerKind::Flatten, 0, 0}; }
    static LayerSpec dense(std::size_t units) { return {LayerKind::Dense, 0, units}; }
    static LayerSpec sigmoid() { return {LayerKind::Sigmoid, 0, 0}; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Per-sample activation shape: channels x (x, y, z). A flat vector of length m
// is {m, 1, 1, 1} with `flat` set.
struct Shape {
    std::size_t c = 1, x = 1, y = 1, z = 1;
    bool flat = false;

    std::size_t size() const { return c * x * y * z; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

struct ModelSpec {
    FeatureKind input_kind = FeatureKind::Det3d;
    std::array<std::size_t, 3> input{}; // spatial dims of the single input channel
    std::vector<LayerSpec> layers;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;

    /// Shapes before the first layer and after every layer. Throws
    /// ShapeMismatch if consecutive layers are incompatible or the network
    /// does not end in dense(1) -> sigmoid.
    std::vector<Shape> shapes() const
    {
        std::vector<Shape> out{Shape{1, input[0], input[1], input[2], false}};
        auto fail = [](std::size_t l, const std::string& why) {
            throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(l) + ": " + why, Error::Location{l, 0});
        };
        if (input[0] == 0 || input[1] == 0 || input[2] == 0)
            fail(0, "empty input shape");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& L = layers[l];
            Shape s = out.back();
            switch (L.kind) {
            case LayerKind::Conv3d:
            case LayerKind::Conv2d: {
                const std::size_t kz = L.kind == LayerKind::Conv3d ? L.kernel : 1;
                if (s.flat)
                    fail(l, "convolution after flatten");
                if (L.kernel == 0 || L.units == 0)
                    fail(l, "convolution needs kernel and channels");
                if (s.x < L.kernel || s.y < L.kernel || s.z < kz)
                    fail(l, "kernel larger than input");
                s = {L.units, s.x - L.kernel + 1, s.y - L.kernel + 1, s.z - kz + 1, false};
                break;
            }
            case LayerKind::Relu: break;
            case LayerKind::Flatten: s = {s.size(), 1, 1, 1, true}; break;
            case LayerKind::Dense:
                if (!s.flat)
                    fail(l, "dense layer needs flattened input");
                if (L.units == 0)
                    fail(l, "dense layer needs units");
                s = {L.units, 1, 1, 1, true};
                break;
            case LayerKind::Sigmoid:
                if (l + 1 != layers.size())
                    fail(l, "sigmoid must be the last layer");
                if (!s.flat || s.size() != 1)
                    fail(l, "sigmoid needs a single input unit");
                break;
            }
            out.push_back(s);
        }
        if (layers.empty() || layers.back().kind != LayerKind::Sigmoid)
            fail(layers.size(), "network must end with sigmoid");
        return out;
    }
};

/// `conv_layers` x [conv(k=3, channels) -> relu] -> flatten -> dense(hidden)
/// -> relu -> dense(1) -> sigmoid, using conv3d for det3d input and conv2d for
/// the 2-D kinds.
inline ModelSpec default_spec(FeatureKind kind, std::size_t n, std::size_t channels = 8, std::size_t hidden = 32,
                              std::size_t conv_layers = 2)
{
    ModelSpec s;
    s.input_kind = kind;
    s.input = feature_shape(kind, n);
    for (std::size_t i = 0; i < conv_layers; ++i) {
        s.layers.push_back(kind == FeatureKind::Det3d ? LayerSpec::conv3d(3, channels) : LayerSpec::conv2d(3, channels));
        s.layers.push_back(LayerSpec::relu());
    }
    s.layers.insert(s.layers.end(), {LayerSpec::flatten(), LayerSpec::dense(hidden), LayerSpec::relu(),
                                     LayerSpec::dense(1), LayerSpec::sigmoid()});
    return s;
}

inline nlohmann::json spec_to_json(const ModelSpec& s)
{
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : s.layers) {
        nlohmann::json j{{"kind", to_string(l.kind)}};
        if (l.kind == LayerKind::Conv3d || l.kind == LayerKind::Conv2d) {
            j["kernel"] = l.kernel;
            j["channels"] = l.units;
        } else if (l.kind == LayerKind::Dense) {
            j["units"] = l.units;
        }
        layers.push_back(std::move(j));
    }
    return nlohmann::json{{"input_kind", to_string(s.input_kind)}, {"input", s.input}, {"layers", std::move(layers)}};
}

inline ModelSpec spec_from_json(const nlohmann::json& j)
{
    ModelSpec s;
    s.input_kind = parse_feature_kind(j.at("input_kind").get<std::string>());
    s.input = j.at("input").get<std::array<std::size_t, 3>>();
    for (const auto& l : j.at("layers")) {
        LayerSpec L;
        L.kind = parse_layer_kind(l.at("kind").get<std::string>());
        if (L.kind == LayerKind::Conv3d || L.kind == LayerKind::Conv2d) {
            L.kernel = l.at("kernel").get<std::size_t>();
            L.units = l.at("channels").get<std::size_t>();
        } else if (L.kind == LayerKind::Dense) {
            L.units = l.at("units").get<std::size_t>();
        }
        s.layers.push_back(L);
    }
    s.shapes();
    return s;
}

} // namespace pcdetect::nn

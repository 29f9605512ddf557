#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "pcdetect/nn/spec.hpp"
#include "pcdetect/rng.hpp"

namespace pcdetect::nn {

/// Dense row-major tensor, rank <= 4. Batches are (batch, d1, d2, d3).
template <class T>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> dims, T fill = T(0)) : shape(std::move(dims))
    {
        std::size_t total = 1;
        for (auto d : shape)
            total *= d;
        data.assign(total, fill);
    }

    std::size_t batch() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t sample_size() const { return batch() == 0 ? 0 : data.size() / batch(); }

    std::span<const T> sample(std::size_t i) const { return {data.data() + i * sample_size(), sample_size()}; }
    std::span<T> sample(std::size_t i) { return {data.data() + i * sample_size(), sample_size()}; }
};

template <class T>
inline T sigmoid(T z)
{
    if (z >= T(0))
        return T(1) / (T(1) + std::exp(-z));
    const T e = std::exp(z);
    return e / (T(1) + e);
}

// Binary cross-entropy of sigmoid(z) against label y, evaluated from the logit.
template <class T>
inline T bce_from_logit(T z, T y)
{
    return std::max(z, T(0)) - y * z + std::log1p(std::exp(-std::abs(z)));
}

/// Activations recorded by a forward pass; acts[0] is the input and acts[l+1]
/// the output of layer l. The sigmoid layer's entry holds the probability.
template <class T>
struct Trace {
    std::vector<std::vector<T>> acts;
    T logit = T(0);
    T probability = T(0);
};

template <class T>
class Model {
public:
    Model() = default;

    // Parameters are zero.
    explicit Model(ModelSpec spec) : spec_(std::move(spec)), shapes_(spec_.shapes())
    {
        std::size_t off = 0;
        for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
            offsets_.push_back(off);
            off += layer_weight_count(l) + layer_bias_count(l);
        }
        offsets_.push_back(off);
        params_.assign(off, T(0));
    }

    // He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
    Model(ModelSpec spec, std::uint64_t seed) : Model(std::move(spec))
    {
        RngStream rng({seed, 0x1417u});
        for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
            const std::size_t nw = layer_weight_count(l);
            if (nw == 0)
                continue;
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in(l)));
            T* w = params_.data() + offsets_[l];
            for (std::size_t i = 0; i < nw; ++i)
                w[i] = static_cast<T>(rng.uniform(-limit, limit));
        }
    }

    const ModelSpec& spec() const { return spec_; }
    const std::vector<Shape>& shapes() const { return shapes_; }
    std::span<T> parameters() { return params_; }
    std::span<const T> parameters() const { return params_; }
    std::size_t parameter_count() const { return params_.size(); }
    std::size_t input_size() const { return shapes_.front().size(); }

    // Offset of layer l's weights in the flat parameter vector; biases follow.
    std::size_t layer_offset(std::size_t l) const { return offsets_[l]; }
    std::size_t layer_weight_count(std::size_t l) const
    {
        const auto& L = spec_.layers[l];
        if (L.kind == LayerKind::Conv3d || L.kind == LayerKind::Conv2d)
            return L.units * fan_in(l);
        if (L.kind == LayerKind::Dense)
            return L.units * shapes_[l].size();
        return 0;
    }
    std::size_t layer_bias_count(std::size_t l) const
    {
        const auto k = spec_.layers[l].kind;
        return (k == LayerKind::Conv3d || k == LayerKind::Conv2d || k == LayerKind::Dense) ? spec_.layers[l].units : 0;
    }

    template <class U>
    Model<U> cast() const
    {
        Model<U> m(spec_);
        auto dst = m.parameters();
        for (std::size_t i = 0; i < params_.size(); ++i)
            dst[i] = static_cast<U>(params_[i]);
        return m;
    }

    void forward(std::span<const T> input, Trace<T>& tr) const
    {
        if (input.size() != input_size())
            throw Error(ErrorCode::ShapeMismatch, "input has " + std::to_string(input.size()) + " values, model expects " +
                                                      std::to_string(input_size()));
        tr.acts.resize(shapes_.size());
        tr.acts[0].assign(input.begin(), input.end());
        for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
            const auto& in = tr.acts[l];
            auto& out = tr.acts[l + 1];
            out.resize(shapes_[l + 1].size());
            switch (spec_.layers[l].kind) {
            case LayerKind::Conv3d:
            case LayerKind::Conv2d: conv_forward(l, in, out); break;
            case LayerKind::Relu:
                for (std::size_t i = 0; i < in.size(); ++i)
                    out[i] = in[i] > T(0) ? in[i] : T(0);
                break;
            case LayerKind::Flatten: std::copy(in.begin(), in.end(), out.begin()); break;
            case LayerKind::Dense: dense_forward(l, in, out); break;
            case LayerKind::Sigmoid:
                tr.logit = in[0];
                out[0] = sigmoid(in[0]);
                break;
            }
            for (T v : out)
                if (!std::isfinite(v))
                    throw Error(ErrorCode::NonFinite, "non-finite activation after layer " + std::to_string(l),
                                Error::Location{l, 0});
        }
        tr.probability = tr.acts.back()[0];
    }

    T predict(std::span<const T> input) const
    {
        Trace<T> tr;
        forward(input, tr);
        return tr.probability;
    }

    std::vector<T> forward(const Tensor<T>& batch) const
    {
        std::vector<T> out(batch.batch());
        Trace<T> tr;
        for (std::size_t i = 0; i < out.size(); ++i) {
            forward(batch.sample(i), tr);
            out[i] = tr.probability;
        }
        return out;
    }

    /// Adds d(loss)/d(params) to `grad` given d(loss)/d(logit) for a traced
    /// sample. `scratch` is reused between calls.
    void backward(const Trace<T>& tr, T dlogit, std::span<T> grad, std::vector<std::vector<T>>& scratch) const
    {
        const std::size_t L = spec_.layers.size();
        scratch.resize(shapes_.size());
        // Gradient w.r.t. the sigmoid's input.
        scratch[L - 1].assign(1, dlogit);
        for (std::size_t l = L - 1; l-- > 0;) {
            const auto& dout = scratch[l + 1];
            auto& din = scratch[l];
            const auto& in = tr.acts[l];
            const bool need_din = l > 0;
            if (need_din)
                din.assign(in.size(), T(0));
            switch (spec_.layers[l].kind) {
            case LayerKind::Conv3d:
            case LayerKind::Conv2d: conv_backward(l, in, dout, need_din ? &din : nullptr, grad); break;
            case LayerKind::Relu:
                if (need_din)
                    for (std::size_t i = 0; i < in.size(); ++i)
                        din[i] = in[i] > T(0) ? dout[i] : T(0);
                break;
            case LayerKind::Flatten:
                if (need_din)
                    std::copy(dout.begin(), dout.end(), din.begin());
                break;
            case LayerKind::Dense: dense_backward(l, in, dout, need_din ? &din : nullptr, grad); break;
            case LayerKind::Sigmoid: break;
            }
        }
    }

    struct LossAndGradient {
        T loss = T(0);
        std::vector<T> gradient;
    };

    /// Mean BCE over the batch and its gradient with respect to every parameter.
    LossAndGradient loss_and_gradient(const Tensor<T>& batch, std::span<const T> labels) const
    {
        if (labels.size() != batch.batch())
            throw Error(ErrorCode::ShapeMismatch, "label count differs from batch size");
        LossAndGradient out{T(0), std::vector<T>(params_.size(), T(0))};
        if (batch.batch() == 0)
            return out;
        Trace<T> tr;
        std::vector<std::vector<T>> scratch;
        const T inv = T(1) / static_cast<T>(batch.batch());
        for (std::size_t i = 0; i < batch.batch(); ++i) {
            forward(batch.sample(i), tr);
            out.loss += bce_from_logit(tr.logit, labels[i]) * inv;
            backward(tr, (tr.probability - labels[i]) * inv, out.gradient, scratch);
        }
        return out;
    }

    T loss(const Tensor<T>& batch, std::span<const T> labels) const
    {
        Trace<T> tr;
        T total = T(0);
        for (std::size_t i = 0; i < batch.batch(); ++i) {
            forward(batch.sample(i), tr);
            total += bce_from_logit(tr.logit, labels[i]);
        }
        return batch.batch() ? total / static_cast<T>(batch.batch()) : T(0);
    }

private:
    std::size_t kernel_depth(std::size_t l) const
    {
        const auto& L = spec_.layers[l];
        return L.kind == LayerKind::Conv3d ? L.kernel : 1;
    }

    std::size_t fan_in(std::size_t l) const
    {
        const auto& L = spec_.layers[l];
        if (L.kind == LayerKind::Dense)
            return shapes_[l].size();
        return shapes_[l].c * L.kernel * L.kernel * kernel_depth(l);
    }

    // Valid convolution, stride 1. Weights laid out [out][in][a][b][g].
    void conv_forward(std::size_t l, const std::vector<T>& in, std::vector<T>& out) const
    {
        const Shape& si = shapes_[l];
        const Shape& so = shapes_[l + 1];
        const std::size_t k = spec_.layers[l].kernel, kz = kernel_depth(l);
        const T* w = params_.data() + offsets_[l];
        const T* b = w + layer_weight_count(l);
        for (std::size_t o = 0; o < so.c; ++o)
            for (std::size_t x = 0; x < so.x; ++x)
                for (std::size_t y = 0; y < so.y; ++y)
                    for (std::size_t z = 0; z < so.z; ++z) {
                        T acc = b[o];
                        for (std::size_t c = 0; c < si.c; ++c)
                            for (std::size_t a = 0; a < k; ++a)
                                for (std::size_t bb = 0; bb < k; ++bb) {
                                    const T* src = in.data() + ((c * si.x + x + a) * si.y + y + bb) * si.z + z;
                                    const T* wk = w + (((o * si.c + c) * k + a) * k + bb) * kz;
                                    for (std::size_t g = 0; g < kz; ++g)
                                        acc += wk[g] * src[g];
                                }
                        out[((o * so.x + x) * so.y + y) * so.z + z] = acc;
                    }
    }

    void conv_backward(std::size_t l, const std::vector<T>& in, const std::vector<T>& dout, std::vector<T>* din,
                       std::span<T> grad) const
    {
        const Shape& si = shapes_[l];
        const Shape& so = shapes_[l + 1];
        const std::size_t k = spec_.layers[l].kernel, kz = kernel_depth(l);
        const T* w = params_.data() + offsets_[l];
        T* gw = grad.data() + offsets_[l];
        T* gb = gw + layer_weight_count(l);
        for (std::size_t o = 0; o < so.c; ++o)
            for (std::size_t x = 0; x < so.x; ++x)
                for (std::size_t y = 0; y < so.y; ++y)
                    for (std::size_t z = 0; z < so.z; ++z) {
                        const T g = dout[((o * so.x + x) * so.y + y) * so.z + z];
                        if (g == T(0))
                            continue;
                        gb[o] += g;
                        for (std::size_t c = 0; c < si.c; ++c)
                            for (std::size_t a = 0; a < k; ++a)
                                for (std::size_t bb = 0; bb < k; ++bb) {
                                    const std::size_t src = ((c * si.x + x + a) * si.y + y + bb) * si.z + z;
                                    const std::size_t wi = (((o * si.c + c) * k + a) * k + bb) * kz;
                                    for (std::size_t q = 0; q < kz; ++q)
                                        gw[wi + q] += g * in[src + q];
                                    if (din)
                                        for (std::size_t q = 0; q < kz; ++q)
                                            (*din)[src + q] += g * w[wi + q];
                                }
                    }
    }

    // Weights laid out [unit][input].
    void dense_forward(std::size_t l, const std::vector<T>& in, std::vector<T>& out) const
    {
        const std::size_t m = in.size();
        const T* w = params_.data() + offsets_[l];
        const T* b = w + layer_weight_count(l);
        for (std::size_t u = 0; u < out.size(); ++u) {
            const T* row = w + u * m;
            T acc = b[u];
            for (std::size_t i = 0; i < m; ++i)
                acc += row[i] * in[i];
            out[u] = acc;
        }
    }

    void dense_backward(std::size_t l, const std::vector<T>& in, const std::vector<T>& dout, std::vector<T>* din,
                        std::span<T> grad) const
    {
        const std::size_t m = in.size();
        const T* w = params_.data() + offsets_[l];
        T* gw = grad.data() + offsets_[l];
        T* gb = gw + layer_weight_count(l);
        for (std::size_t u = 0; u < dout.size(); ++u) {
            const T g = dout[u];
            if (g == T(0))
                continue;
            gb[u] += g;
            T* grow = gw + u * m;
            const T* row = w + u * m;
            for (std::size_t i = 0; i < m; ++i)
                grow[i] += g * in[i];
            if (din)
                for (std::size_t i = 0; i < m; ++i)
                    (*din)[i] += g * row[i];
        }
    }

    ModelSpec spec_;
    std::vector<Shape> shapes_;
    std::vector<std::size_t> offsets_;
    std::vector<T> params_;
};

} // namespace pcdetect::nn

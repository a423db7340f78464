#include "camfuse/nnet.hpp"

#include "camfuse/common.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

namespace camfuse {

std::string_view to_string(LayerKind kind)
{
    switch (kind) {
        case LayerKind::conv3x3: return "conv3x3";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool2: return "maxpool2";
        case LayerKind::fc: return "fc";
        case LayerKind::softmax: return "softmax";
        case LayerKind::sigmoid: return "sigmoid";
    }
    return "?";
}

std::string to_string(const Shape& s)
{
    return std::to_string(s.width) + "x" + std::to_string(s.height) + "x" + std::to_string(s.depth);
}

LayerSpec conv3x3(int channels, int stride) { return {LayerKind::conv3x3, channels, stride}; }
LayerSpec relu() { return {LayerKind::relu, 0, 1}; }
LayerSpec maxpool2() { return {LayerKind::maxpool2, 0, 1}; }
LayerSpec fc(int units) { return {LayerKind::fc, units, 1}; }
LayerSpec softmax() { return {LayerKind::softmax, 0, 1}; }
LayerSpec sigmoid() { return {LayerKind::sigmoid, 0, 1}; }

Tensor::Tensor(Shape s, std::vector<double> values) : shape(s), data(std::move(values))
{
    if (data.size() != shape.size()) {
        fail(Errc::shape, "tensor of shape " + to_string(shape) + " needs " + std::to_string(shape.size()) +
                              " values, got " + std::to_string(data.size()));
    }
}

namespace {

bool is_head(LayerKind k) { return k == LayerKind::softmax || k == LayerKind::sigmoid; }

std::string layer_name(std::size_t index, const LayerSpec& spec)
{
    return "layer " + std::to_string(index) + " (" + std::string(to_string(spec.kind)) + ")";
}

std::size_t param_size(const LayerSpec& spec, const Shape& in)
{
    switch (spec.kind) {
        case LayerKind::conv3x3: return static_cast<std::size_t>(spec.outputs) * (in.depth * 9 + 1);
        case LayerKind::fc: return static_cast<std::size_t>(spec.outputs) * (in.size() + 1);
        default: return 0;
    }
}

std::size_t fan_in(const LayerSpec& spec, const Shape& in)
{
    return spec.kind == LayerKind::conv3x3 ? static_cast<std::size_t>(in.depth) * 9 : in.size();
}

}  // namespace

std::vector<Shape> NetModel::shapes() const
{
    if (input.width < 1 || input.height < 1 || input.depth < 1) fail(Errc::shape, "empty input shape");
    if (layers.empty()) fail(Errc::shape, "network has no layers");
    std::vector<Shape> out;
    Shape s = input;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& L = layers[i];
        if (is_head(L.kind) && i + 1 != layers.size()) fail(Errc::shape, layer_name(i, L) + " must be the last layer");
        switch (L.kind) {
            case LayerKind::conv3x3:
                if (L.outputs < 1 || L.stride < 1) fail(Errc::shape, layer_name(i, L) + " needs channels and stride >= 1");
                s = Shape{(s.width - 1) / L.stride + 1, (s.height - 1) / L.stride + 1, L.outputs};
                break;
            case LayerKind::relu: break;
            case LayerKind::maxpool2:
                if (s.width < 2 || s.height < 2) fail(Errc::shape, layer_name(i, L) + " input " + to_string(s) + " too small");
                s = Shape{s.width / 2, s.height / 2, s.depth};
                break;
            case LayerKind::fc:
                if (L.outputs < 1) fail(Errc::shape, layer_name(i, L) + " needs units >= 1");
                s = Shape{1, 1, L.outputs};
                break;
            case LayerKind::softmax:
                if (s.size() < 2) fail(Errc::shape, layer_name(i, L) + " needs at least two classes");
                break;
            case LayerKind::sigmoid:
                if (s.size() != 1) fail(Errc::shape, layer_name(i, L) + " needs a single input");
                break;
        }
        out.push_back(s);
    }
    return out;
}

Shape NetModel::output_shape() const { return shapes().back(); }

std::size_t NetModel::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& p : params) n += p.size();
    return n;
}

namespace {

NetModel build(Shape input, std::vector<LayerSpec> layers)
{
    NetModel m;
    m.input = input;
    m.layers = std::move(layers);
    const auto shapes = m.shapes();
    m.params.resize(m.layers.size());
    Shape in = input;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        m.params[i].assign(param_size(m.layers[i], in), 0.0);
        in = shapes[i];
    }
    return m;
}

void check_params(const NetModel& m)
{
    const auto shapes = m.shapes();
    if (m.params.size() != m.layers.size()) fail(Errc::shape, "parameter list does not match layer count");
    Shape in = m.input;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        if (m.params[i].size() != param_size(m.layers[i], in)) {
            fail(Errc::shape, layer_name(i, m.layers[i]) + " has " + std::to_string(m.params[i].size()) +
                                  " parameters, expected " + std::to_string(param_size(m.layers[i], in)));
        }
        in = shapes[i];
    }
}

}  // namespace

NetModel make_model(Shape input, std::vector<LayerSpec> layers, std::uint64_t seed)
{
    NetModel m = build(input, std::move(layers));
    m.seed = seed;
    std::mt19937_64 rng(derive_seed(seed, "init"));
    Shape in = input;
    const auto shapes = m.shapes();
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const auto& L = m.layers[i];
        if (!m.params[i].empty()) {
            const std::size_t n_in = fan_in(L, in);
            std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 / static_cast<double>(n_in)));
            const std::size_t weights = static_cast<std::size_t>(L.outputs) * n_in;
            for (std::size_t k = 0; k < weights; ++k) m.params[i][k] = gauss(rng);
        }
        in = shapes[i];
    }
    return m;
}

NetModel zero_model(Shape input, std::vector<LayerSpec> layers) { return build(input, std::move(layers)); }

// --- engine -----------------------------------------------------------------

namespace {

// Aligned so Eigen kernels take the same code path on every run; with
// unaligned heap buffers the float summation order depends on the address.
template <class T>
using AVec = std::vector<T, Eigen::aligned_allocator<T>>;
template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<Mat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const Mat<T>>;

template <class T>
struct Workspace {
    std::vector<AVec<T>> acts;   // acts[0] input, acts[i+1] output of layer i
    std::vector<AVec<T>> cols;   // im2col buffers per conv layer
    std::vector<std::vector<int>> argmax;
    AVec<T> delta;
    AVec<T> delta_prev;
};

template <class T>
class Engine {
public:
    explicit Engine(const NetModel& model) : input_(model.input), layers_(model.layers), shapes_(model.shapes())
    {
        check_params(model);
        params_.resize(model.params.size());
        for (std::size_t i = 0; i < model.params.size(); ++i) {
            params_[i].assign(model.params[i].begin(), model.params[i].end());
        }
    }

    Workspace<T> workspace() const
    {
        Workspace<T> ws;
        ws.acts.resize(layers_.size() + 1);
        ws.acts[0].resize(input_.size());
        ws.cols.resize(layers_.size());
        ws.argmax.resize(layers_.size());
        Shape in = input_;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            ws.acts[i + 1].resize(shapes_[i].size());
            if (layers_[i].kind == LayerKind::conv3x3) {
                ws.cols[i].resize(static_cast<std::size_t>(in.depth) * 9 * shapes_[i].width * shapes_[i].height);
            } else if (layers_[i].kind == LayerKind::maxpool2) {
                ws.argmax[i].resize(shapes_[i].size());
            }
            in = shapes_[i];
        }
        return ws;
    }

    std::vector<AVec<T>> zero_grads() const
    {
        std::vector<AVec<T>> g(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) g[i].assign(params_[i].size(), T(0));
        return g;
    }

    std::vector<AVec<T>>& params() { return params_; }
    const std::vector<AVec<T>>& params() const { return params_; }
    const Shape& input() const { return input_; }
    const std::vector<LayerSpec>& layers() const { return layers_; }

    // Runs every layer; for a head the output slot holds probabilities and
    // `logits` points at the previous activation.
    void forward(Workspace<T>& ws) const
    {
        Shape in = input_;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto& L = layers_[i];
            const Shape& out = shapes_[i];
            const AVec<T>& x = ws.acts[i];
            AVec<T>& y = ws.acts[i + 1];
            switch (L.kind) {
                case LayerKind::conv3x3: conv_forward(in, out, L.stride, params_[i], x, ws.cols[i], y); break;
                case LayerKind::relu:
                    for (std::size_t k = 0; k < y.size(); ++k) y[k] = x[k] > T(0) ? x[k] : T(0);
                    break;
                case LayerKind::maxpool2: pool_forward(in, out, x, ws.argmax[i], y); break;
                case LayerKind::fc: {
                    const std::size_t n = in.size();
                    ConstMatMap<T> W(params_[i].data(), L.outputs, static_cast<Eigen::Index>(n));
                    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> xv(x.data(), static_cast<Eigen::Index>(n));
                    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(params_[i].data() + L.outputs * n, L.outputs);
                    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> yv(y.data(), L.outputs);
                    yv.noalias() = W * xv + b;
                    break;
                }
                case LayerKind::softmax: {
                    const T m = *std::max_element(x.begin(), x.end());
                    T sum = 0;
                    for (std::size_t k = 0; k < y.size(); ++k) sum += (y[k] = std::exp(x[k] - m));
                    for (auto& v : y) v /= sum;
                    break;
                }
                case LayerKind::sigmoid: y[0] = sigmoid_of(x[0]); break;
            }
            in = out;
        }
    }

    // Loss of the current forward pass; double accumulation from logits.
    double loss_of(const Workspace<T>& ws, int label) const
    {
        const auto& head = layers_.back();
        const AVec<T>& z = ws.acts[layers_.size() - 1];
        if (head.kind == LayerKind::softmax) {
            if (label < 0 || static_cast<std::size_t>(label) >= z.size()) fail(Errc::argument, "label out of range");
            double m = static_cast<double>(*std::max_element(z.begin(), z.end()));
            double sum = 0.0;
            for (T v : z) sum += std::exp(static_cast<double>(v) - m);
            return m + std::log(sum) - static_cast<double>(z[label]);
        }
        if (head.kind == LayerKind::sigmoid) {
            if (label != 0 && label != 1) fail(Errc::argument, "binary label must be 0 or 1");
            const double v = static_cast<double>(z[0]);
            // log(1+exp(v)) - label*v, computed stably
            const double softplus = v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
            return softplus - label * v;
        }
        fail(Errc::shape, "training needs a softmax or sigmoid output layer");
    }

    // Accumulates dLoss/dparams into grads. Requires a prior forward().
    void backward(Workspace<T>& ws, int label, std::vector<AVec<T>>& grads) const
    {
        const std::size_t last = layers_.size() - 1;
        const AVec<T>& p = ws.acts[last + 1];
        ws.delta.assign(p.begin(), p.end());
        if (layers_[last].kind == LayerKind::softmax) {
            ws.delta[label] -= T(1);
        } else {
            ws.delta[0] -= T(label);
        }
        for (std::size_t ii = last; ii-- > 0;) {
            const auto& L = layers_[ii];
            const Shape in = ii == 0 ? input_ : shapes_[ii - 1];
            const Shape& out = shapes_[ii];
            const AVec<T>& x = ws.acts[ii];
            const bool need_dx = ii > 0;
            switch (L.kind) {
                case LayerKind::conv3x3:
                    conv_backward(in, out, L.stride, params_[ii], ws.cols[ii], ws.delta, grads[ii], need_dx,
                                  ws.delta_prev);
                    break;
                case LayerKind::relu:
                    ws.delta_prev.resize(x.size());
                    for (std::size_t k = 0; k < x.size(); ++k) ws.delta_prev[k] = x[k] > T(0) ? ws.delta[k] : T(0);
                    break;
                case LayerKind::maxpool2:
                    ws.delta_prev.assign(in.size(), T(0));
                    for (std::size_t k = 0; k < out.size(); ++k) ws.delta_prev[ws.argmax[ii][k]] += ws.delta[k];
                    break;
                case LayerKind::fc: {
                    const std::size_t n = in.size();
                    ConstMatMap<T> W(params_[ii].data(), L.outputs, static_cast<Eigen::Index>(n));
                    MatMap<T> dW(grads[ii].data(), L.outputs, static_cast<Eigen::Index>(n));
                    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> d(ws.delta.data(), L.outputs);
                    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> xr(x.data(), static_cast<Eigen::Index>(n));
                    dW.noalias() += d * xr;
                    for (int o = 0; o < L.outputs; ++o) grads[ii][L.outputs * n + o] += ws.delta[o];
                    if (need_dx) {
                        ws.delta_prev.resize(n);
                        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dx(ws.delta_prev.data(),
                                                                           static_cast<Eigen::Index>(n));
                        dx.noalias() = W.transpose() * d;
                    }
                    break;
                }
                default: fail(Errc::shape, layer_name(ii, L) + " can only be the output layer");
            }
            if (need_dx) std::swap(ws.delta, ws.delta_prev);
        }
    }

private:
    static T sigmoid_of(T v)
    {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
    }

    static void conv_forward(const Shape& in, const Shape& out, int stride, const AVec<T>& params,
                             const AVec<T>& x, AVec<T>& col, AVec<T>& y)
    {
        const int P = out.width * out.height;
        const int K = in.depth * 9;
        for (int d = 0; d < in.depth; ++d) {
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    T* row = col.data() + static_cast<std::size_t>((d * 3 + ky) * 3 + kx) * P;
                    for (int oy = 0; oy < out.height; ++oy) {
                        const int iy = oy * stride + ky - 1;
                        T* dst = row + static_cast<std::size_t>(oy) * out.width;
                        if (iy < 0 || iy >= in.height) {
                            std::fill(dst, dst + out.width, T(0));
                            continue;
                        }
                        const T* src = x.data() + (static_cast<std::size_t>(d) * in.height + iy) * in.width;
                        for (int ox = 0; ox < out.width; ++ox) {
                            const int ix = ox * stride + kx - 1;
                            dst[ox] = (ix >= 0 && ix < in.width) ? src[ix] : T(0);
                        }
                    }
                }
            }
        }
        ConstMatMap<T> W(params.data(), out.depth, K);
        ConstMatMap<T> C(col.data(), K, P);
        MatMap<T> Y(y.data(), out.depth, P);
        Y.noalias() = W * C;
        const T* bias = params.data() + static_cast<std::size_t>(out.depth) * K;
        for (int o = 0; o < out.depth; ++o) Y.row(o).array() += bias[o];
    }

    static void conv_backward(const Shape& in, const Shape& out, int stride, const AVec<T>& params,
                              const AVec<T>& col, const AVec<T>& delta, AVec<T>& grad,
                              bool need_dx, AVec<T>& dx)
    {
        const int P = out.width * out.height;
        const int K = in.depth * 9;
        ConstMatMap<T> D(delta.data(), out.depth, P);
        ConstMatMap<T> C(col.data(), K, P);
        MatMap<T> dW(grad.data(), out.depth, K);
        dW.noalias() += D * C.transpose();
        T* db = grad.data() + static_cast<std::size_t>(out.depth) * K;
        for (int o = 0; o < out.depth; ++o) db[o] += D.row(o).sum();
        if (!need_dx) return;

        ConstMatMap<T> W(params.data(), out.depth, K);
        Mat<T> dcol = W.transpose() * D;
        dx.assign(in.size(), T(0));
        for (int d = 0; d < in.depth; ++d) {
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const T* row = dcol.data() + static_cast<std::size_t>((d * 3 + ky) * 3 + kx) * P;
                    for (int oy = 0; oy < out.height; ++oy) {
                        const int iy = oy * stride + ky - 1;
                        if (iy < 0 || iy >= in.height) continue;
                        T* dst = dx.data() + (static_cast<std::size_t>(d) * in.height + iy) * in.width;
                        const T* src = row + static_cast<std::size_t>(oy) * out.width;
                        for (int ox = 0; ox < out.width; ++ox) {
                            const int ix = ox * stride + kx - 1;
                            if (ix >= 0 && ix < in.width) dst[ix] += src[ox];
                        }
                    }
                }
            }
        }
    }

    static void pool_forward(const Shape& in, const Shape& out, const AVec<T>& x, std::vector<int>& argmax,
                             AVec<T>& y)
    {
        for (int d = 0; d < out.depth; ++d) {
            for (int oy = 0; oy < out.height; ++oy) {
                for (int ox = 0; ox < out.width; ++ox) {
                    int best = (d * in.height + 2 * oy) * in.width + 2 * ox;
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dxx = 0; dxx < 2; ++dxx) {
                            const int idx = (d * in.height + 2 * oy + dy) * in.width + 2 * ox + dxx;
                            if (x[idx] > x[best]) best = idx;
                        }
                    }
                    const int o = (d * out.height + oy) * out.width + ox;
                    argmax[o] = best;
                    y[o] = x[best];
                }
            }
        }
    }

    Shape input_;
    std::vector<LayerSpec> layers_;
    std::vector<Shape> shapes_;
    std::vector<AVec<T>> params_;
};

void check_input(const NetModel& model, const Tensor& input)
{
    if (input.shape.size() != model.input.size() ||
        (input.shape != model.input && !(input.shape.width == 1 && input.shape.height == 1))) {
        fail(Errc::shape, "layer 0 (" + std::string(to_string(model.layers.front().kind)) + ") expects input " +
                              to_string(model.input) + ", got " + to_string(input.shape));
    }
    if (input.data.size() != input.shape.size()) fail(Errc::shape, "tensor data does not match its shape");
}

}  // namespace

Tensor forward(const NetModel& model, const Tensor& input)
{
    check_input(model, input);
    Engine<double> eng(model);
    auto ws = eng.workspace();
    ws.acts[0].assign(input.data.begin(), input.data.end());
    eng.forward(ws);
    return Tensor(model.output_shape(), std::vector<double>(ws.acts.back().begin(), ws.acts.back().end()));
}

LossAndGradients backward(const NetModel& model, const Tensor& input, int label)
{
    check_input(model, input);
    if (!is_head(model.layers.back().kind)) fail(Errc::shape, "gradients need a softmax or sigmoid output layer");
    Engine<double> eng(model);
    auto ws = eng.workspace();
    ws.acts[0].assign(input.data.begin(), input.data.end());
    eng.forward(ws);
    LossAndGradients out;
    out.loss = eng.loss_of(ws, label);
    auto grads = eng.zero_grads();
    eng.backward(ws, label, grads);
    for (const auto& g : grads) out.grads.emplace_back(g.begin(), g.end());
    return out;
}

double loss(const NetModel& model, const Tensor& input, int label)
{
    check_input(model, input);
    Engine<double> eng(model);
    auto ws = eng.workspace();
    ws.acts[0].assign(input.data.begin(), input.data.end());
    eng.forward(ws);
    return eng.loss_of(ws, label);
}

GradientCheck check_gradients(const NetModel& model, const Tensor& input, int label, int samples, double h,
                              std::uint64_t seed, double floor)
{
    const auto analytic = backward(model, input, label);
    std::vector<std::pair<std::size_t, std::size_t>> slots;
    for (std::size_t l = 0; l < model.params.size(); ++l) {
        for (std::size_t k = 0; k < model.params[l].size(); ++k) slots.emplace_back(l, k);
    }
    if (slots.empty()) fail(Errc::argument, "model has no parameters");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, slots.size() - 1);
    GradientCheck result;
    NetModel probe = model;
    for (int s = 0; s < samples; ++s) {
        const auto [l, k] = slots[pick(rng)];
        const double w = model.params[l][k];
        probe.params[l][k] = w + h;
        const double up = loss(probe, input, label);
        probe.params[l][k] = w - h;
        const double down = loss(probe, input, label);
        probe.params[l][k] = w;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic.grads[l][k];
        const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
        result.max_relative_error = std::max(result.max_relative_error, err);
        ++result.checked;
    }
    return result;
}

void TensorSamples::add(Tensor t, int label)
{
    if (!tensors_.empty() && t.shape.size() != tensors_.front().shape.size()) {
        fail(Errc::shape, "sample shape " + to_string(t.shape) + " differs from " + to_string(tensors_.front().shape));
    }
    tensors_.push_back(std::move(t));
    labels_.push_back(label);
}

void TensorSamples::fill(std::size_t i, std::span<double> out) const
{
    const auto& d = tensors_.at(i).data;
    if (out.size() != d.size()) fail(Errc::shape, "sample buffer size mismatch");
    std::copy(d.begin(), d.end(), out.begin());
}

// --- training ---------------------------------------------------------------

namespace {

template <class T>
NetModel train_impl(NetModel model, const SampleSource& data, const TrainOptions& opt)
{
    Engine<T> eng(model);
    auto ws = eng.workspace();
    auto grads = eng.zero_grads();
    auto velocity = eng.zero_grads();
    auto& params = eng.params();

    const std::size_t n = data.size();
    const std::size_t batch = opt.batch <= 0 ? n : static_cast<std::size_t>(opt.batch);
    std::vector<std::size_t> order(n);
    std::vector<double> buffer(model.input.size());
    const T lr = static_cast<T>(opt.learning_rate);
    const T mu = static_cast<T>(opt.momentum);
    double last_loss = 0.0;

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(derive_seed(opt.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        // Fisher-Yates with an explicit draw so the order is library independent
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng() % i);
            std::swap(order[i - 1], order[j]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(n, start + batch);
            for (auto& g : grads) std::fill(g.begin(), g.end(), T(0));
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t idx = order[b];
                data.fill(idx, buffer);
                std::copy(buffer.begin(), buffer.end(), ws.acts[0].begin());
                eng.forward(ws);
                const int label = data.label(idx);
                epoch_loss += eng.loss_of(ws, label);
                eng.backward(ws, label, grads);
            }
            const T scale = lr / static_cast<T>(stop - start);
            for (std::size_t l = 0; l < params.size(); ++l) {
                for (std::size_t k = 0; k < params[l].size(); ++k) {
                    velocity[l][k] = mu * velocity[l][k] - scale * grads[l][k];
                    params[l][k] += velocity[l][k];
                }
            }
        }
        last_loss = epoch_loss / static_cast<double>(n);
        if (opt.on_epoch) opt.on_epoch(epoch, last_loss);
    }

    for (std::size_t l = 0; l < params.size(); ++l) {
        model.params[l].assign(params[l].begin(), params[l].end());
    }
    model.meta.epochs += opt.epochs;
    model.meta.learning_rate = opt.learning_rate;
    model.meta.momentum = opt.momentum;
    model.meta.batch = static_cast<int>(batch);
    model.meta.final_loss = last_loss;
    return model;
}

}  // namespace

NetModel sgd_train(NetModel model, const SampleSource& data, const TrainOptions& options)
{
    if (data.size() == 0) fail(Errc::argument, "training set is empty");
    if (options.epochs < 0) fail(Errc::argument, "epochs must be non-negative");
    check_params(model);
    if (!is_head(model.layers.back().kind)) fail(Errc::shape, "training needs a softmax or sigmoid output layer");
    if (options.precision == Precision::single) return train_impl<float>(std::move(model), data, options);
    return train_impl<double>(std::move(model), data, options);
}

double mean_loss(const NetModel& model, const SampleSource& data)
{
    if (data.size() == 0) fail(Errc::argument, "sample set is empty");
    Engine<double> eng(model);
    auto ws = eng.workspace();
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        data.fill(i, ws.acts[0]);
        eng.forward(ws);
        total += eng.loss_of(ws, data.label(i));
    }
    return total / static_cast<double>(data.size());
}

struct FastPredictor::Impl {
    explicit Impl(const NetModel& m) : engine(m) {}
    Engine<float> engine;
};

FastPredictor::FastPredictor(const NetModel& model) : impl_(std::make_unique<Impl>(model)) {}
FastPredictor::~FastPredictor() = default;
FastPredictor::FastPredictor(FastPredictor&&) noexcept = default;
FastPredictor& FastPredictor::operator=(FastPredictor&&) noexcept = default;

const Shape& FastPredictor::input_shape() const { return impl_->engine.input(); }

std::vector<double> FastPredictor::operator()(std::span<const double> input) const
{
    const auto& eng = impl_->engine;
    if (input.size() != eng.input().size()) {
        fail(Errc::shape, "predictor expects " + std::to_string(eng.input().size()) + " inputs, got " +
                              std::to_string(input.size()));
    }
    auto ws = eng.workspace();
    std::copy(input.begin(), input.end(), ws.acts[0].begin());
    eng.forward(ws);
    const auto kind = eng.layers().back().kind;
    if (!is_head(kind)) return {ws.acts.back().begin(), ws.acts.back().end()};
    const auto& z = ws.acts[eng.layers().size() - 1];
    if (kind == LayerKind::sigmoid) {
        const double v = z[0];
        return {v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v))};
    }
    std::vector<double> p(z.begin(), z.end());
    const double m = *std::max_element(p.begin(), p.end());
    double sum = 0.0;
    for (double& v : p) sum += (v = std::exp(v - m));
    for (double& v : p) v /= sum;
    return p;
}

// --- serialization ----------------------------------------------------------

namespace {

constexpr char kMagic[5] = {'N', 'N', 'E', 'T', '1'};

class Writer {
public:
    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
    std::uint8_t u8() { return need(1)[0]; }
    std::uint32_t u32()
    {
        const auto* p = need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64()
    {
        const auto* p = need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    std::size_t offset() const { return pos_; }

private:
    const std::uint8_t* need(std::size_t n)
    {
        if (pos_ + n > bytes_.size()) {
            fail(Errc::truncation, "model data truncated at byte " + std::to_string(pos_));
        }
        const auto* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_model(const NetModel& model)
{
    check_params(model);
    Writer w;
    for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u64(model.seed);
    w.u32(static_cast<std::uint32_t>(model.meta.epochs));
    w.f64(model.meta.learning_rate);
    w.f64(model.meta.momentum);
    w.u32(static_cast<std::uint32_t>(model.meta.batch));
    w.f64(model.meta.final_loss);
    w.u32(static_cast<std::uint32_t>(model.input.width));
    w.u32(static_cast<std::uint32_t>(model.input.height));
    w.u32(static_cast<std::uint32_t>(model.input.depth));
    w.u32(static_cast<std::uint32_t>(model.layers.size()));
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        w.u8(static_cast<std::uint8_t>(model.layers[i].kind));
        w.u32(static_cast<std::uint32_t>(model.layers[i].outputs));
        w.u32(static_cast<std::uint32_t>(model.layers[i].stride));
        w.u64(model.params[i].size());
    }
    for (const auto& p : model.params) {
        for (double v : p) w.f64(v);
    }
    return std::move(w.bytes);
}

NetModel decode_model(std::span<const std::uint8_t> bytes)
{
    Reader r(bytes);
    for (char c : kMagic) {
        if (r.u8() != static_cast<std::uint8_t>(c)) fail(Errc::format, "not an NNET1 model file");
    }
    NetModel m;
    m.seed = r.u64();
    m.meta.epochs = static_cast<int>(r.u32());
    m.meta.learning_rate = r.f64();
    m.meta.momentum = r.f64();
    m.meta.batch = static_cast<int>(r.u32());
    m.meta.final_loss = r.f64();
    m.input.width = static_cast<int>(r.u32());
    m.input.height = static_cast<int>(r.u32());
    m.input.depth = static_cast<int>(r.u32());
    const std::uint32_t count = r.u32();
    if (count == 0 || count > 4096) fail(Errc::format, "implausible layer count " + std::to_string(count));
    std::vector<std::uint64_t> sizes;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint8_t kind = r.u8();
        if (kind > static_cast<std::uint8_t>(LayerKind::sigmoid)) {
            fail(Errc::format, "unknown layer kind " + std::to_string(kind) + " at layer " + std::to_string(i));
        }
        LayerSpec spec;
        spec.kind = static_cast<LayerKind>(kind);
        spec.outputs = static_cast<int>(r.u32());
        spec.stride = static_cast<int>(r.u32());
        m.layers.push_back(spec);
        sizes.push_back(r.u64());
    }
    for (std::uint64_t s : sizes) {
        if (s > r.remaining() / 8) fail(Errc::truncation, "model weights truncated at byte " + std::to_string(r.offset()));
        std::vector<double> p(s);
        for (auto& v : p) v = r.f64();
        m.params.push_back(std::move(p));
    }
    if (r.remaining() != 0) fail(Errc::format, "trailing bytes after model weights");
    check_params(m);
    return m;
}

void save_model(const std::filesystem::path& path, const NetModel& model)
{
    const auto bytes = encode_model(model);
    write_file_atomic(path, [&](std::ostream& os) {
        os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    });
}

NetModel load_model(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::dependency, "cannot open model file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_model(bytes);
}

}  // namespace camfuse

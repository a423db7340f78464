#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace camfuse {

/// Layer kinds. `softmax` and `sigmoid` are output heads and must come last.
enum class LayerKind : std::uint8_t { conv3x3, relu, maxpool2, fc, softmax, sigmoid };

std::string_view to_string(LayerKind kind);

/// Activation shape; a flat vector of n values is (1, 1, n).
struct Shape {
    int width = 1;
    int height = 1;
    int depth = 1;

    std::size_t size() const { return static_cast<std::size_t>(width) * height * depth; }
    bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    /// Output channels (conv3x3) or units (fc); unused otherwise.
    int outputs = 0;
    /// Convolution stride; 3x3 kernels always use one pixel of zero padding.
    int stride = 1;

    bool operator==(const LayerSpec&) const = default;
};

LayerSpec conv3x3(int channels, int stride = 1);
LayerSpec relu();
LayerSpec maxpool2();
LayerSpec fc(int units);
LayerSpec softmax();
LayerSpec sigmoid();

/// Channel-major (depth, row, col) tensor.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0) : shape(s), data(s.size(), fill) {}
    Tensor(Shape s, std::vector<double> values);

    double& at(int d, int r, int c) { return data[(static_cast<std::size_t>(d) * shape.height + r) * shape.width + c]; }
    double at(int d, int r, int c) const
    {
        return data[(static_cast<std::size_t>(d) * shape.height + r) * shape.width + c];
    }
};

struct TrainingMeta {
    int epochs = 0;
    double learning_rate = 0.0;
    double momentum = 0.0;
    int batch = 0;
    double final_loss = 0.0;

    bool operator==(const TrainingMeta&) const = default;
};

/// Parameters per layer: conv weights [out][in][3][3] then biases [out];
/// fc weights [out][in] then biases [out]; parameter-free layers are empty.
struct NetModel {
    Shape input;
    std::vector<LayerSpec> layers;
    std::vector<std::vector<double>> params;
    std::uint64_t seed = 0;
    TrainingMeta meta;

    /// Shape after each layer; validates the stack.
    std::vector<Shape> shapes() const;
    Shape output_shape() const;
    std::size_t parameter_count() const;
    bool operator==(const NetModel&) const = default;
};

/// Validates the layer stack and draws He-normal weights (zero biases).
NetModel make_model(Shape input, std::vector<LayerSpec> layers, std::uint64_t seed);

/// Same stack with every parameter set to zero.
NetModel zero_model(Shape input, std::vector<LayerSpec> layers);

/// Output of the final layer (probabilities for softmax/sigmoid heads).
Tensor forward(const NetModel& model, const Tensor& input);

using Gradients = std::vector<std::vector<double>>;

struct LossAndGradients {
    double loss = 0.0;
    Gradients grads;
};

/// Cross-entropy for a softmax head (label = class index), binary
/// cross-entropy for a sigmoid head (label in {0,1}).
LossAndGradients backward(const NetModel& model, const Tensor& input, int label);

double loss(const NetModel& model, const Tensor& input, int label);

/// Central-difference check over `samples` randomly chosen parameters.
/// Relative error is |a - n| / max(|a|, |n|, floor).
struct GradientCheck {
    double max_relative_error = 0.0;
    int checked = 0;
};
GradientCheck check_gradients(const NetModel& model, const Tensor& input, int label, int samples, double h,
                              std::uint64_t seed, double floor = 1e-7);

/// Training samples are produced on demand so large block sets need not be
/// held in memory.
class SampleSource {
public:
    virtual ~SampleSource() = default;
    virtual std::size_t size() const = 0;
    virtual int label(std::size_t i) const = 0;
    virtual void fill(std::size_t i, std::span<double> out) const = 0;
};

/// In-memory samples.
class TensorSamples final : public SampleSource {
public:
    void add(Tensor t, int label);
    std::size_t size() const override { return labels_.size(); }
    int label(std::size_t i) const override { return labels_[i]; }
    void fill(std::size_t i, std::span<double> out) const override;

private:
    std::vector<Tensor> tensors_;
    std::vector<int> labels_;
};

enum class Precision { single, dual };

struct TrainOptions {
    int epochs = 50;
    double learning_rate = 0.01;
    double momentum = 0.9;
    /// 0 means full batch.
    int batch = 32;
    std::uint64_t seed = 0;
    Precision precision = Precision::single;
    /// Called after each epoch with (epoch index, mean training loss).
    std::function<void(int, double)> on_epoch;
};

/// Mini-batch SGD with momentum. Sample order is reshuffled each epoch from
/// the seed; the result is a pure function of (model, data, options).
NetModel sgd_train(NetModel model, const SampleSource& data, const TrainOptions& options);

/// Mean loss over a sample source.
double mean_loss(const NetModel& model, const SampleSource& data);

/// Single-precision inference for throughput. Head probabilities are
/// computed in double from the logits.
class FastPredictor {
public:
    explicit FastPredictor(const NetModel& model);
    ~FastPredictor();
    FastPredictor(FastPredictor&&) noexcept;
    FastPredictor& operator=(FastPredictor&&) noexcept;

    std::vector<double> operator()(std::span<const double> input) const;
    const Shape& input_shape() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::vector<std::uint8_t> encode_model(const NetModel& model);
NetModel decode_model(std::span<const std::uint8_t> bytes);
void save_model(const std::filesystem::path& path, const NetModel& model);
NetModel load_model(const std::filesystem::path& path);

}  // namespace camfuse

#pragma once

#include "camfuse/imaging.hpp"
#include "camfuse/nnet.hpp"

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace camfuse {

/// Class labels of the per-model classifier.
inline constexpr int kOtherModel = 0;   // H0
inline constexpr int kTargetModel = 1;  // H1

struct BlockSample {
    BlockRef ref;
    int label = kOtherModel;
};

struct SamplingCounts {
    int block = 96;
    int target = 500;
    int other = 50;
};

/// Random block positions for one target model. `image_models[i]` names the
/// camera model of images[i]; BlockRef::image indexes into `images`.
struct CmiDataset {
    std::string target_model;
    int block = 96;
    std::vector<BlockSample> entries;

    std::size_t count(int label) const;
};

CmiDataset sample_blocks(std::span<const RgbImage> images, std::span<const std::string> image_models,
                         const std::string& target_model, const SamplingCounts& counts, std::uint64_t seed);

/// Network input for a block, channel-major: each pixel minus the mean of its
/// 3x3 neighbourhood (clipped at the image border), scaled by 1/4. The
/// high-pass keeps demosaicing and compression traces and drops scene content.
Tensor block_tensor(const RgbImage& image, const BlockRef& ref);
void block_tensor(const RgbImage& image, const BlockRef& ref, std::span<double> out);

/// conv(w)+relu+pool, conv(2w)+relu+pool, conv(4w)+relu+pool, fc(fc_units)+relu,
/// fc(2), softmax.
std::vector<LayerSpec> default_cmi_architecture(int width = 16, int fc_units = 128);

struct CmiBundle {
    std::string model_id;
    NetModel net;
    double accuracy = -1.0;  // held-out block accuracy, negative if not measured
    int block = 96;

    /// Target-model probability for a prepared block tensor.
    double phi(std::span<const double> block_input) const;
    double phi(const RgbImage& image, const BlockRef& ref) const;
    /// Builds the fast inference path; called by train/load, otherwise lazily.
    void prepare() const;

private:
    mutable std::shared_ptr<const FastPredictor> predictor_;
};

/// Trains on blocks drawn from `images` as described by `dataset`.
CmiBundle train_cmi(std::span<const RgbImage> images, const CmiDataset& dataset, const std::vector<LayerSpec>& arch,
                    const TrainOptions& options);

/// Fraction of blocks whose arg-max class matches the label.
double block_accuracy(const CmiBundle& bundle, std::span<const RgbImage> images, const CmiDataset& dataset);

/// Writes <stem>.nnet and the plain-text sidecar <stem>.meta.
void save_bundle(const std::filesystem::path& stem, const CmiBundle& bundle);
CmiBundle load_bundle(const std::filesystem::path& stem);

}  // namespace camfuse

#pragma once

#include "camfuse/cmi.hpp"
#include "camfuse/nnet.hpp"
#include "camfuse/prnu.hpp"
#include "camfuse/wavelet.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace camfuse {

/// Block-level inputs of the fusion network.
struct ScorePair {
    double rho = 0.0;
    double phi = 0.5;
    /// True for blocks of the target device (H1), false otherwise (H0).
    bool target = false;
    BlockRef ref;
};

/// Scores blocks of one image. The noise residual is extracted from the whole
/// image once and then cropped at each block, never from the block alone.
std::vector<ScorePair> score_blocks(const RgbImage& image, std::span<const BlockRef> refs, const Fingerprint& fp,
                                    const CmiBundle& cmi, bool target, double sigma0 = kDefaultSigma0);

/// Same as score_blocks for a residual and gray image computed by the caller.
std::vector<ScorePair> score_blocks(const RgbImage& image, const GrayImage& gray, const NoiseResidual& residual,
                                    std::span<const BlockRef> refs, const Fingerprint& fp, const CmiBundle& cmi,
                                    bool target);

/// `blocks_per_image` random blocks from each image; matching[i] marks
/// images of the fingerprint's device.
std::vector<ScorePair> build_training_pairs(std::span<const RgbImage> images, std::span<const char> matching,
                                            int blocks_per_image, const Fingerprint& fp, const CmiBundle& cmi,
                                            std::uint64_t seed, double sigma0 = kDefaultSigma0);

/// 2 inputs, two hidden layers of 10 ReLU units, one sigmoid output.
std::vector<LayerSpec> fusion_architecture();

struct FusionModel {
    std::string model_id;
    NetModel net;
    double train_loss = 0.0;

    /// Rejects networks that do not have the 2-10-10-1 shape.
    static FusionModel from_net(std::string model_id, NetModel net);
};

struct FusionOptions {
    int epochs = 2000;
    double learning_rate = 0.05;
    double momentum = 0.9;
    int batch = 0;  // 0 = full batch
    std::uint64_t seed = 0;
};

/// Trains with H0 as the positive class so that theta reads as the
/// probability of tampering.
FusionModel train_fusion(std::span<const ScorePair> pairs, const FusionOptions& options, std::string model_id = {});

/// Copies the pairs with phi fixed at 0.5 (no CNN information).
std::vector<ScorePair> without_phi(std::span<const ScorePair> pairs);

/// Tamper probability. Out-of-range inputs are clamped (and reported through
/// `clamped` if given); non-finite inputs are an argument error.
double theta(const FusionModel& model, double rho, double phi, bool* clamped = nullptr);

void save_fusion(const std::filesystem::path& stem, const FusionModel& model);
FusionModel load_fusion(const std::filesystem::path& stem);

}  // namespace camfuse

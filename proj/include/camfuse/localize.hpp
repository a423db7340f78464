#pragma once

#include "camfuse/fusion.hpp"
#include "camfuse/imaging.hpp"

#include <span>
#include <string>
#include <vector>

namespace camfuse {

enum class Aggregation { mean, max };

/// Per-pixel tamper score built from overlapping window scores.
struct ProbabilityMap {
    int width = 0;
    int height = 0;
    int window = 0;
    int stride = 0;
    Aggregation aggregation = Aggregation::mean;
    /// True when pixels outside every window took the nearest covered score.
    bool border_filled = false;
    std::vector<double> scores;
    std::vector<int> coverage;

    double operator()(int row, int col) const { return scores[static_cast<std::size_t>(row) * width + col]; }
};

using BinaryMap = BinaryMask;

/// Top-left corners of all full windows on a regular grid starting at (0,0).
std::vector<BlockRef> window_grid(int width, int height, int window, int stride);

/// Combines one score per grid window (in window_grid order) into a map.
/// Uncovered border pixels inherit the nearest covered pixel's score.
ProbabilityMap accumulate_map(int width, int height, int window, int stride, std::span<const double> window_scores,
                              Aggregation aggregation = Aggregation::mean);

struct MapOptions {
    int window = 96;
    int stride = 32;
    double sigma0 = kDefaultSigma0;
    Aggregation aggregation = Aggregation::mean;
    /// Feed phi = 0.5 instead of the CNN output (PRNU-only baseline).
    bool prnu_only = false;
};

/// Fused tamper score of every grid window, from the whole-image residual
/// cropped at each window.
std::vector<double> window_scores(const RgbImage& image, const Fingerprint& fp, const CmiBundle& cmi,
                                  const FusionModel& fusion, const MapOptions& options);

ProbabilityMap sliding_map(const RgbImage& image, const Fingerprint& fp, const CmiBundle& cmi,
                           const FusionModel& fusion, const MapOptions& options);

/// Writes the map as P5 with scores scaled by 255 plus a key=value sidecar.
void write_map(const std::filesystem::path& raster, const std::filesystem::path& sidecar, const ProbabilityMap& map,
               double tau);

/// 20 px at 3000-pixel-wide originals, scaled to `width`, at least 1.
int opening_radius_for(int width);

BinaryMap threshold(const ProbabilityMap& map, double tau);
/// Erosion treats pixels outside the image as set; dilation ignores them.
BinaryMap erode_disc(const BinaryMap& in, int radius);
BinaryMap dilate_disc(const BinaryMap& in, int radius);
BinaryMap open_disc(const BinaryMap& in, int radius);
/// Threshold at tau (score >= tau is positive), then opening.
BinaryMap binarize(const ProbabilityMap& map, double tau, int radius);

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
};

struct FScore {
    ConfusionCounts counts;
    double value = 0.0;
};

/// 2TP / (2TP + FP + FN); 1 when prediction and truth are both empty.
double f_score(const ConfusionCounts& c);
FScore f_score(const BinaryMap& pred, const BinaryMask& truth);

struct ThresholdCalibration {
    std::string model_id;
    double tau = 0.0;
    std::vector<double> thresholds;
    std::vector<double> mean_f;

    std::size_t best_index() const;
};

inline constexpr int kCalibrationSteps = 100;

/// Sweeps `steps` thresholds i/(steps-1) and keeps the one with the best mean
/// F-score over all maps; ties go to the lower threshold.
ThresholdCalibration calibrate_threshold(std::span<const ProbabilityMap> maps, std::span<const BinaryMask> truths,
                                         int radius, int steps = kCalibrationSteps);

/// Probability that a random positive outscores a random negative, ties
/// counted one half. Labels are 1 for positive.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace camfuse

#pragma once

#include "camfuse/camsim.hpp"
#include "camfuse/cmi.hpp"
#include "camfuse/localize.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace camfuse {

/// Image sets of the evaluation protocol. Every image belongs to exactly one.
enum class ImageSet { flat, c_tr, c_ts, s_tr, s_ts, f };

std::string_view to_string(ImageSet s);
ImageSet parse_image_set(std::string_view s);
inline constexpr ImageSet kAllSets[] = {ImageSet::flat, ImageSet::c_tr, ImageSet::c_ts,
                                        ImageSet::s_tr, ImageSet::s_ts, ImageSet::f};

struct DevicePlan {
    std::string device_id;
    std::string model_id;
    /// Primary devices supply training data; the others only flat and S_ts
    /// images for the unseen-device experiment.
    bool primary = true;
    double sigma_f = 0.0025;
    double noise_std = 2.0;
};

/// Images per device and set.
struct SetSizes {
    int flat = 50;
    int c_tr = 32;
    int c_ts = 8;
    int s_tr = 16;
    int s_ts = 10;
    int f = 10;

    int of(ImageSet s) const;
};

struct ExperimentPlan {
    std::string profile = "desk";
    std::uint64_t seed = 2024;
    int width = 256;
    int height = 256;
    std::vector<CameraModelSpec> models;
    std::vector<DevicePlan> devices;
    SetSizes sets;

    SamplingCounts blocks{96, 50, 10};
    /// Random blocks per image for fusion training and AUC evaluation.
    int pair_blocks = 50;
    int eval_blocks = 30;

    std::vector<int> qualities{100, 90, 80, 75, 50};
    std::vector<int> forgery_sizes{96, 64, 32};

    int cnn_width = 8;
    int cnn_fc = 64;
    int cnn_epochs = 25;
    int cnn_batch = 32;
    double cnn_lr = 0.01;
    double cnn_momentum = 0.9;

    int fusion_epochs = 2000;
    int fusion_batch = 0;
    double fusion_lr = 0.05;

    int stride = 32;
    double sigma0 = 5.0;
    Aggregation aggregation = Aggregation::mean;
    double pce_gate = 50.0;

    /// Throws a plan error on duplicate ids, unknown models, empty sets, etc.
    void validate() const;
    const CameraModelSpec& model(const std::string& model_id) const;
    const DevicePlan& device(const std::string& device_id) const;
    /// First primary device of the model.
    const DevicePlan& primary_device(const std::string& model_id) const;
    std::vector<const DevicePlan*> secondary_devices(const std::string& model_id) const;
    /// Number of images of a set the device contributes.
    int set_size(const DevicePlan& dev, ImageSet set) const;
    std::uint64_t device_seed(const std::string& device_id) const;
};

/// Workstation-sized protocol: 3 models x 2 devices at 256x256.
ExperimentPlan desk_plan();
/// Paper-sized set and block counts on the same roster.
ExperimentPlan full_plan();
ExperimentPlan profile_plan(std::string_view profile);

/// key=value lines; '#' starts a comment. Unknown keys are a plan error. If
/// the text declares any model.* or device.* entry the default roster is
/// replaced.
ExperimentPlan parse_plan(std::string_view text, ExperimentPlan base);
ExperimentPlan load_plan(const std::filesystem::path& path, ExperimentPlan base);
std::string format_plan(const ExperimentPlan& plan);

}  // namespace camfuse

#pragma once

#include "camfuse/camsim.hpp"
#include "camfuse/cmi.hpp"
#include "camfuse/fusion.hpp"
#include "camfuse/localize.hpp"
#include "camfuse/plan.hpp"
#include "camfuse/prnu.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace camfuse {

struct ImageRecord {
    std::string device_id;
    std::string model_id;
    ImageSet set = ImageSet::flat;
    int index = 0;
    /// Relative to the dataset root; empty for simulated images.
    std::filesystem::path path;

    std::string id() const;
};

/// Labeled images grouped by device and set.
class ImageSource {
public:
    virtual ~ImageSource() = default;
    virtual const std::vector<ImageRecord>& records() const = 0;
    virtual RgbImage load(const ImageRecord& record) const = 0;

    /// Records of one device and set, ordered by index.
    std::vector<ImageRecord> select(const std::string& device_id, ImageSet set) const;
    std::vector<RgbImage> load_all(const std::vector<ImageRecord>& records) const;
};

/// Regenerates plan images on demand from the plan seed. Scenes of a set are
/// drawn from one pool shared by every device, so devices photograph the same
/// content and only the camera differs.
class SimulatedSource final : public ImageSource {
public:
    explicit SimulatedSource(ExperimentPlan plan);

    const std::vector<ImageRecord>& records() const override { return records_; }
    RgbImage load(const ImageRecord& record) const override;

    const ExperimentPlan& plan() const { return plan_; }
    const DeviceSpec& device(const std::string& device_id) const;
    SceneSpec scene(const ImageRecord& record) const;

private:
    ExperimentPlan plan_;
    std::vector<ImageRecord> records_;
    std::map<std::string, DeviceSpec> devices_;
};

/// Reads a dataset directory holding manifest.tsv with columns
/// path, device, model, set, index.
class ManifestSource final : public ImageSource {
public:
    explicit ManifestSource(std::filesystem::path root);

    const std::vector<ImageRecord>& records() const override { return records_; }
    RgbImage load(const ImageRecord& record) const override;

private:
    std::filesystem::path root_;
    std::vector<ImageRecord> records_;
};

/// Materializes every simulated image as P6 plus manifest.tsv.
void write_dataset(const SimulatedSource& source, const std::filesystem::path& root);

/// Directory layout for trained artifacts.
class ArtifactStore {
public:
    explicit ArtifactStore(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path fingerprint(const std::string& device_id) const;
    std::filesystem::path cmi(const std::string& model_id) const;
    std::filesystem::path fusion(const std::string& model_id) const;
    std::filesystem::path baseline(const std::string& model_id) const;
    std::filesystem::path calibration(const std::string& model_id, bool baseline = false) const;

    /// Dependency error listing every missing file.
    void require(const std::vector<std::filesystem::path>& files) const;

private:
    std::filesystem::path root_;
};

void save_calibration(const std::filesystem::path& path, const ThresholdCalibration& cal);
ThresholdCalibration load_calibration(const std::filesystem::path& path);

/// Progress messages; the default writes through the logger.
using Progress = std::function<void(const std::string&)>;

struct StageReport {
    std::map<std::string, double> values;
};

// Training stages. Each reads the plan's sets from the source and writes its
// artifacts into the store.
StageReport stage_fingerprints(const ExperimentPlan& plan, const ImageSource& source, const ArtifactStore& store);
StageReport stage_train_cmi(const ExperimentPlan& plan, const ImageSource& source, const ArtifactStore& store,
                            const Progress& progress = {});
StageReport stage_train_fusion(const ExperimentPlan& plan, const ImageSource& source, const ArtifactStore& store);
StageReport stage_calibrate(const ExperimentPlan& plan, const ImageSource& source, const ArtifactStore& store);

struct ResultRow {
    std::string model;
    std::string method;
    std::string condition;
    std::string metric;
    double value = 0.0;
    bool failed = false;
};

struct ResultTable {
    std::string name;
    std::vector<ResultRow> rows;

    std::optional<double> find(const std::string& model, const std::string& method, const std::string& condition,
                               const std::string& metric) const;
    std::string csv() const;
};

inline constexpr const char* kPrnu = "PRNU";
inline constexpr const char* kCnn = "CNN";
inline constexpr const char* kFusion = "Fusion";
inline constexpr const char* kPrnuOnly = "PRNU-only";

/// Block AUCs of rho, phi and theta on S_ts (H1: the model's primary device;
/// H0: primary devices of the other models).
ResultTable run_auc_experiment(const ExperimentPlan& plan, const ImageSource& source, const ArtifactStore& store);
/// Same blocks with every S_ts image recompressed at each plan quality.
ResultTable run_jpeg_experiment(const ExperimentPlan& plan, const ImageSource& source, const ArtifactStore& store);
/// Secondary devices scored with the primary device's CNN and fusion models
/// and their own fingerprint.
ResultTable run_cross_device_experiment(const ExperimentPlan& plan, const ImageSource& source,
                                        const ArtifactStore& store);
/// Mean F-score per model and forgery size on S_ts hosts, one row each, for the
/// fused detector or the PRNU-only baseline.
ResultTable run_forgery_benchmark(const ExperimentPlan& plan, const ImageSource& source, const ArtifactStore& store,
                                  bool prnu_only = false);

/// Forged images for a model: hosts from `set` of its primary device, donors
/// from the same set of other models' primary devices, one per size.
struct ForgeryCase {
    int size = 0;
    std::string host;
    Forgery forgery;
};
std::vector<ForgeryCase> make_forgery_cases(const ExperimentPlan& plan, const ImageSource& source,
                                            const std::string& model_id, ImageSet set);

/// Reference averages of the published localization table (forgery sizes
/// large, medium, small) for side-by-side reporting only.
struct ReferenceRow {
    const char* method;
    double large;
    double medium;
    double small;
};
const std::vector<ReferenceRow>& reference_forgery_scores();

std::string summary_report(const ExperimentPlan& plan, const std::vector<ResultTable>& tables);

/// Runs every missing stage and all experiments; writes CSVs and the summary
/// into `out`.
std::vector<ResultTable> run_bench(const ExperimentPlan& plan, const ImageSource& source, const ArtifactStore& store,
                                   const std::filesystem::path& out, const Progress& progress = {});

}  // namespace camfuse

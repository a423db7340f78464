#include "camfuse/cmi.hpp"

#include "camfuse/common.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace camfuse {

std::size_t CmiDataset::count(int label) const
{
    std::size_t n = 0;
    for (const auto& e : entries) n += e.label == label ? 1 : 0;
    return n;
}

CmiDataset sample_blocks(std::span<const RgbImage> images, std::span<const std::string> image_models,
                         const std::string& target_model, const SamplingCounts& counts, std::uint64_t seed)
{
    if (images.size() != image_models.size()) fail(Errc::argument, "every image needs a model label");
    if (counts.block < 1 || counts.target < 0 || counts.other < 0) fail(Errc::argument, "invalid sampling counts");
    CmiDataset ds;
    ds.target_model = target_model;
    ds.block = counts.block;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& img = images[i];
        if (img.width() < counts.block || img.height() < counts.block) {
            spdlog::warn("image {} ({}x{}) is smaller than the {} px block; skipped", i, img.width(), img.height(),
                         counts.block);
            continue;
        }
        const bool target = image_models[i] == target_model;
        const int n = target ? counts.target : counts.other;
        std::mt19937_64 rng(derive_seed(seed, "blocks:" + target_model, i));
        std::uniform_int_distribution<int> rows(0, img.height() - counts.block);
        std::uniform_int_distribution<int> cols(0, img.width() - counts.block);
        for (int k = 0; k < n; ++k) {
            const int r = rows(rng);
            const int c = cols(rng);
            ds.entries.push_back({BlockRef{r, c, static_cast<int>(i), counts.block}, target ? kTargetModel : kOtherModel});
        }
    }
    return ds;
}

void block_tensor(const RgbImage& image, const BlockRef& ref, std::span<double> out)
{
    check_block(ref, image.width(), image.height());
    const int n = ref.size;
    if (out.size() != static_cast<std::size_t>(n) * n * 3) fail(Errc::shape, "block buffer has the wrong size");
    for (int ch = 0; ch < 3; ++ch) {
        double* dst = out.data() + static_cast<std::size_t>(ch) * n * n;
        for (int r = 0; r < n; ++r) {
            const int y = ref.row + r;
            const int y0 = std::max(0, y - 1), y1 = std::min(image.height() - 1, y + 1);
            for (int c = 0; c < n; ++c) {
                const int x = ref.col + c;
                const int x0 = std::max(0, x - 1), x1 = std::min(image.width() - 1, x + 1);
                double sum = 0.0;
                for (int yy = y0; yy <= y1; ++yy) {
                    for (int xx = x0; xx <= x1; ++xx) sum += image(yy, xx, ch);
                }
                const double mean = sum / static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1));
                dst[r * n + c] = (image(y, x, ch) - mean) / 4.0;
            }
        }
    }
}

Tensor block_tensor(const RgbImage& image, const BlockRef& ref)
{
    Tensor t(Shape{ref.size, ref.size, 3});
    block_tensor(image, ref, t.data);
    return t;
}

std::vector<LayerSpec> default_cmi_architecture(int width, int fc_units)
{
    return {conv3x3(width),     relu(), maxpool2(), conv3x3(2 * width), relu(), maxpool2(),
            conv3x3(4 * width), relu(), maxpool2(), fc(fc_units),       relu(), fc(2),
            softmax()};
}

void CmiBundle::prepare() const
{
    if (!predictor_) predictor_ = std::make_shared<const FastPredictor>(net);
}

double CmiBundle::phi(std::span<const double> block_input) const
{
    prepare();
    return (*predictor_)(block_input)[kTargetModel];
}

double CmiBundle::phi(const RgbImage& image, const BlockRef& ref) const
{
    if (ref.size != block) {
        fail(Errc::shape, "bundle " + model_id + " expects " + std::to_string(block) + " px blocks, got " +
                              std::to_string(ref.size));
    }
    std::vector<double> buf(static_cast<std::size_t>(block) * block * 3);
    block_tensor(image, ref, buf);
    return phi(buf);
}

namespace {

class BlockSource final : public SampleSource {
public:
    BlockSource(std::span<const RgbImage> images, const CmiDataset& ds) : images_(images), ds_(ds) {}
    std::size_t size() const override { return ds_.entries.size(); }
    int label(std::size_t i) const override { return ds_.entries[i].label; }
    void fill(std::size_t i, std::span<double> out) const override
    {
        const auto& ref = ds_.entries[i].ref;
        block_tensor(images_[static_cast<std::size_t>(ref.image)], ref, out);
    }

private:
    std::span<const RgbImage> images_;
    const CmiDataset& ds_;
};

std::string arch_descriptor(const std::vector<LayerSpec>& layers)
{
    std::string s;
    for (const auto& L : layers) {
        if (!s.empty()) s += ',';
        s += to_string(L.kind);
        if (L.kind == LayerKind::conv3x3 || L.kind == LayerKind::fc) s += ':' + std::to_string(L.outputs);
    }
    return s;
}

}  // namespace

CmiBundle train_cmi(std::span<const RgbImage> images, const CmiDataset& dataset, const std::vector<LayerSpec>& arch,
                    const TrainOptions& options)
{
    if (dataset.entries.empty()) fail(Errc::argument, "CMI training set is empty");
    if (dataset.count(kTargetModel) == 0 || dataset.count(kOtherModel) == 0) {
        fail(Errc::argument, "CMI training for " + dataset.target_model + " needs blocks from both classes");
    }
    for (const auto& e : dataset.entries) {
        if (e.ref.image < 0 || static_cast<std::size_t>(e.ref.image) >= images.size()) {
            fail(Errc::bounds, "block refers to image " + std::to_string(e.ref.image) + " outside the set");
        }
    }
    CmiBundle bundle;
    bundle.model_id = dataset.target_model;
    bundle.block = dataset.block;
    NetModel net = make_model(Shape{dataset.block, dataset.block, 3}, arch, options.seed);
    bundle.net = sgd_train(std::move(net), BlockSource(images, dataset), options);
    bundle.prepare();
    return bundle;
}

double block_accuracy(const CmiBundle& bundle, std::span<const RgbImage> images, const CmiDataset& dataset)
{
    if (dataset.entries.empty()) fail(Errc::argument, "accuracy needs at least one block");
    std::vector<int> correct(dataset.entries.size());
    parallel_for(dataset.entries.size(), [&](std::size_t i) {
        const auto& e = dataset.entries[i];
        const double p = bundle.phi(images[static_cast<std::size_t>(e.ref.image)], e.ref);
        correct[i] = (p >= 0.5 ? kTargetModel : kOtherModel) == e.label ? 1 : 0;
    });
    double n = 0.0;
    for (int c : correct) n += c;
    return n / static_cast<double>(correct.size());
}

void save_bundle(const std::filesystem::path& stem, const CmiBundle& bundle)
{
    auto weights = stem;
    weights += ".nnet";
    auto meta = stem;
    meta += ".meta";
    save_model(weights, bundle.net);
    write_file_atomic(meta, [&](std::ostream& os) {
        os.precision(17);
        os << "model_id=" << bundle.model_id << "\naccuracy=" << bundle.accuracy << "\nseed=" << bundle.net.seed
           << "\nblock=" << bundle.block << "\narch=" << arch_descriptor(bundle.net.layers) << "\n";
    });
}

CmiBundle load_bundle(const std::filesystem::path& stem)
{
    auto weights = stem;
    weights += ".nnet";
    auto meta = stem;
    meta += ".meta";
    std::ifstream in(meta);
    if (!in) fail(Errc::dependency, "missing CMI metadata " + meta.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    CmiBundle bundle;
    bundle.net = load_model(weights);
    try {
        bundle.model_id = kv.at("model_id");
        bundle.accuracy = std::stod(kv.at("accuracy"));
        bundle.block = std::stoi(kv.at("block"));
    } catch (const std::exception&) {
        fail(Errc::format, "incomplete CMI metadata in " + meta.string());
    }
    if (bundle.net.input != Shape{bundle.block, bundle.block, 3}) {
        fail(Errc::format, "CMI weights in " + weights.string() + " do not take " + std::to_string(bundle.block) +
                               " px RGB blocks");
    }
    bundle.prepare();
    return bundle;
}

}  // namespace camfuse

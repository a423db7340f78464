#include "camfuse/fusion.hpp"

#include "camfuse/common.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>

namespace camfuse {

std::vector<ScorePair> score_blocks(const RgbImage& image, const GrayImage& gray, const NoiseResidual& residual,
                                    std::span<const BlockRef> refs, const Fingerprint& fp, const CmiBundle& cmi,
                                    bool target)
{
    if (!gray.same_shape(residual) || gray.width() != image.width() || gray.height() != image.height()) {
        fail(Errc::dimension, "residual does not match the image");
    }
    std::vector<ScorePair> out(refs.size());
    parallel_for(refs.size(), [&](std::size_t k) {
        const auto& ref = refs[k];
        check_block(ref, image.width(), image.height());
        check_block(ref, fp.width(), fp.height());
        ScorePair p;
        p.ref = ref;
        p.target = target;
        p.rho = correlate(crop(residual, ref), crop(gray, ref), crop(fp, ref)).rho;
        p.phi = cmi.phi(image, ref);
        out[k] = p;
    });
    return out;
}

std::vector<ScorePair> score_blocks(const RgbImage& image, std::span<const BlockRef> refs, const Fingerprint& fp,
                                    const CmiBundle& cmi, bool target, double sigma0)
{
    if (fp.width() != image.width() || fp.height() != image.height()) {
        fail(Errc::dimension, "fingerprint " + std::to_string(fp.width()) + "x" + std::to_string(fp.height()) +
                                  " is not aligned with image " + std::to_string(image.width()) + "x" +
                                  std::to_string(image.height()));
    }
    const GrayImage gray = to_gray(image);
    const NoiseResidual residual = extract_residual(gray, sigma0);
    return score_blocks(image, gray, residual, refs, fp, cmi, target);
}

std::vector<ScorePair> build_training_pairs(std::span<const RgbImage> images, std::span<const char> matching,
                                            int blocks_per_image, const Fingerprint& fp, const CmiBundle& cmi,
                                            std::uint64_t seed, double sigma0)
{
    if (images.size() != matching.size()) fail(Errc::argument, "every image needs a match flag");
    if (blocks_per_image < 1) fail(Errc::argument, "blocks per image must be positive");
    std::vector<ScorePair> out;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& img = images[i];
        if (img.width() < cmi.block || img.height() < cmi.block) fail(Errc::dimension, "image smaller than block");
        std::mt19937_64 rng(derive_seed(seed, "pairs", i));
        std::uniform_int_distribution<int> rows(0, img.height() - cmi.block);
        std::uniform_int_distribution<int> cols(0, img.width() - cmi.block);
        std::vector<BlockRef> refs;
        for (int k = 0; k < blocks_per_image; ++k) {
            const int r = rows(rng);
            const int c = cols(rng);
            refs.push_back({r, c, static_cast<int>(i), cmi.block});
        }
        auto scored = score_blocks(img, refs, fp, cmi, matching[i] != 0, sigma0);
        out.insert(out.end(), scored.begin(), scored.end());
    }
    return out;
}

std::vector<LayerSpec> fusion_architecture() { return {fc(10), relu(), fc(10), relu(), fc(1), sigmoid()}; }

FusionModel FusionModel::from_net(std::string model_id, NetModel net)
{
    if (net.input.size() != 2) {
        fail(Errc::shape, "fusion network must take exactly 2 inputs, got " + std::to_string(net.input.size()));
    }
    if (net.layers != fusion_architecture()) fail(Errc::shape, "fusion network must be 2-10-10-1 with a sigmoid output");
    net.shapes();
    FusionModel m;
    m.model_id = std::move(model_id);
    m.net = std::move(net);
    return m;
}

namespace {

// Input vector and training target (1 = H0, the tamper side).
class PairSource final : public SampleSource {
public:
    explicit PairSource(std::span<const ScorePair> pairs) : pairs_(pairs) {}
    std::size_t size() const override { return pairs_.size(); }
    int label(std::size_t i) const override { return pairs_[i].target ? 0 : 1; }
    void fill(std::size_t i, std::span<double> out) const override
    {
        out[0] = pairs_[i].rho;
        out[1] = pairs_[i].phi;
    }

private:
    std::span<const ScorePair> pairs_;
};

}  // namespace

FusionModel train_fusion(std::span<const ScorePair> pairs, const FusionOptions& options, std::string model_id)
{
    if (pairs.empty()) fail(Errc::argument, "fusion training set is empty");
    const bool has_target = std::any_of(pairs.begin(), pairs.end(), [](const ScorePair& p) { return p.target; });
    const bool has_other = std::any_of(pairs.begin(), pairs.end(), [](const ScorePair& p) { return !p.target; });
    if (!has_target || !has_other) fail(Errc::argument, "fusion training needs both H0 and H1 pairs");
    for (const auto& p : pairs) {
        if (!std::isfinite(p.rho) || !std::isfinite(p.phi)) fail(Errc::argument, "fusion input is not finite");
    }
    TrainOptions opt;
    opt.epochs = options.epochs;
    opt.learning_rate = options.learning_rate;
    opt.momentum = options.momentum;
    opt.batch = options.batch;
    opt.seed = options.seed;
    opt.precision = Precision::dual;
    NetModel net = make_model(Shape{1, 1, 2}, fusion_architecture(), options.seed);
    FusionModel model = FusionModel::from_net(std::move(model_id), sgd_train(std::move(net), PairSource(pairs), opt));
    model.train_loss = model.net.meta.final_loss;
    return model;
}

std::vector<ScorePair> without_phi(std::span<const ScorePair> pairs)
{
    std::vector<ScorePair> out(pairs.begin(), pairs.end());
    for (auto& p : out) p.phi = 0.5;
    return out;
}

namespace {

// theta is called for every block; a direct evaluation of the fixed 2-10-10-1
// stack avoids building a generic engine per call.
double evaluate(const NetModel& net, double rho, double phi)
{
    const auto& w1 = net.params[0];
    const auto& w2 = net.params[2];
    const auto& w3 = net.params[4];
    double h1[10];
    double h2[10];
    for (int o = 0; o < 10; ++o) {
        const double v = w1[o * 2] * rho + w1[o * 2 + 1] * phi + w1[20 + o];
        h1[o] = v > 0.0 ? v : 0.0;
    }
    for (int o = 0; o < 10; ++o) {
        double v = w2[100 + o];
        for (int k = 0; k < 10; ++k) v += w2[o * 10 + k] * h1[k];
        h2[o] = v > 0.0 ? v : 0.0;
    }
    double z = w3[10];
    for (int k = 0; k < 10; ++k) z += w3[k] * h2[k];
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace

double theta(const FusionModel& model, double rho, double phi, bool* clamped)
{
    if (!std::isfinite(rho) || !std::isfinite(phi)) fail(Errc::argument, "fusion input is not finite");
    const double r = std::clamp(rho, -1.0, 1.0);
    const double p = std::clamp(phi, 0.0, 1.0);
    if (clamped) *clamped = r != rho || p != phi;
    return evaluate(model.net, r, p);
}

void save_fusion(const std::filesystem::path& stem, const FusionModel& model)
{
    auto weights = stem;
    weights += ".nnet";
    auto meta = stem;
    meta += ".meta";
    save_model(weights, model.net);
    write_file_atomic(meta, [&](std::ostream& os) {
        os.precision(17);
        os << "model_id=" << model.model_id << "\ntrain_loss=" << model.train_loss << "\nseed=" << model.net.seed
           << "\nepochs=" << model.net.meta.epochs << "\nlearning_rate=" << model.net.meta.learning_rate << "\n";
    });
}

FusionModel load_fusion(const std::filesystem::path& stem)
{
    auto weights = stem;
    weights += ".nnet";
    auto meta = stem;
    meta += ".meta";
    std::ifstream in(meta);
    if (!in) fail(Errc::dependency, "missing fusion metadata " + meta.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (!kv.contains("model_id")) fail(Errc::format, "incomplete fusion metadata in " + meta.string());
    FusionModel m = FusionModel::from_net(kv["model_id"], load_model(weights));
    if (kv.contains("train_loss")) m.train_loss = std::stod(kv["train_loss"]);
    return m;
}

}  // namespace camfuse

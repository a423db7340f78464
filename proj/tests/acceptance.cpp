// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset; criteria 6-9 reuse the artifacts trained by 5.
#include "camfuse/bench.hpp"
#include "camfuse/common.hpp"
#include "support.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace camfuse;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

std::string num(double v, int digits = 4)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

double pearson_planes(const Plane& a, const Plane& b) { return testing::pearson_oracle(a.values(), b.values()); }

// --- 1 ----------------------------------------------------------------------

void gradients(Outcome& out)
{
    const ExperimentPlan plan = desk_plan();
    const NetModel cnn = make_model(Shape{96, 96, 3}, default_cmi_architecture(plan.cnn_width, plan.cnn_fc), 31);
    const DeviceSpec dev = make_device("G", plan.models[0].model_id, 128, 128, 5);
    const RgbImage img = capture(SceneSpec{SceneKind::natural, 128, 128, 6}, dev, plan.models[0]);
    const Tensor block = block_tensor(img, BlockRef{10, 20, 0, 96});
    const auto c = check_gradients(cnn, block, kTargetModel, 150, 1e-5, 32);

    const NetModel fusion = make_model(Shape{1, 1, 2}, fusion_architecture(), 33);
    const auto f = check_gradients(fusion, Tensor(Shape{1, 1, 2}, {0.035, 0.8}), 1, 150, 1e-5, 34);

    out.detail << "cnn max_rel=" << c.max_relative_error << " over " << c.checked << ", fusion max_rel="
               << f.max_relative_error << " over " << f.checked;
    out.require(c.checked >= 100 && f.checked >= 100, "at least 100 weights each");
    out.require(c.max_relative_error < 1e-4, "cnn relative error < 1e-4");
    out.require(f.max_relative_error < 1e-4, "fusion relative error < 1e-4");
}

// --- 2 ----------------------------------------------------------------------

void wavelet(Outcome& out)
{
    double worst_rec = 0.0;
    double worst_energy = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Plane x = testing::random_plane(64, 64, 1000 + seed);
        const auto pyr = dwt2(x);
        const Plane y = idwt2(pyr);
        std::vector<double> diff(x.size());
        double ex = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            diff[i] = x.values()[i] - y.values()[i];
            ex += x.values()[i] * x.values()[i];
        }
        worst_rec = std::max(worst_rec, testing::rms(diff) / testing::rms(x.values()));
        worst_energy = std::max(worst_energy, std::abs(pyr.energy() - ex) / ex);
    }
    out.detail << "worst rms ratio=" << worst_rec << ", worst energy rel=" << worst_energy;
    out.require(worst_rec < 1e-9, "reconstruction");
    out.require(worst_energy < 1e-6, "energy");
}

// --- 3 ----------------------------------------------------------------------

void oracles(Outcome& out)
{
    double corr_err = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Plane n = testing::random_plane(30, 30, 100 + seed, -3.0, 3.0);
        const Plane i = testing::random_plane(30, 30, 200 + seed);
        const Plane f = testing::random_plane(30, 30, 300 + seed, -0.05, 0.05);
        std::vector<double> prod(i.size());
        for (std::size_t k = 0; k < prod.size(); ++k) prod[k] = i.values()[k] * f.values()[k];
        corr_err = std::max(corr_err, std::abs(correlate(n, i, f).rho - testing::pearson_oracle(n.values(), prod)));
    }

    double fp_err = 0.0;
    std::vector<GrayImage> imgs;
    std::vector<NoiseResidual> res;
    for (std::uint64_t k = 0; k < 5; ++k) {
        const Plane p = testing::random_plane(30, 30, 400 + k, 1.0, 255.0);
        imgs.push_back(GrayImage(30, 30, std::vector<double>(p.values().begin(), p.values().end())));
        res.push_back(NoiseResidual(testing::random_plane(30, 30, 500 + k, -4.0, 4.0)));
    }
    const Fingerprint fp = estimate_fingerprint(imgs, res, "O", {false, false});
    for (int r = 0; r < 30; ++r) {
        for (int c = 0; c < 30; ++c) {
            double num = 0.0;
            double den = 0.0;
            for (std::size_t k = 0; k < imgs.size(); ++k) {
                num += res[k](r, c) * imgs[k](r, c);
                den += imgs[k](r, c) * imgs[k](r, c);
            }
            fp_err = std::max(fp_err, std::abs(fp(r, c) - num / den));
        }
    }

    double auc_err = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(600 + seed);
        std::uniform_int_distribution<int> level(0, 40);
        std::vector<double> scores(1000);
        std::vector<int> labels(1000);
        for (std::size_t k = 0; k < scores.size(); ++k) {
            labels[k] = static_cast<int>(rng() % 2);
            scores[k] = level(rng) / 40.0 + 0.1 * labels[k];
        }
        auc_err = std::max(auc_err, std::abs(roc_auc(scores, labels) - testing::auc_oracle(scores, labels)));
    }

    out.detail << "correlate err=" << corr_err << ", fingerprint err=" << fp_err << ", auc err=" << auc_err;
    out.require(corr_err <= 1e-12, "correlate");
    out.require(fp_err <= 1e-12, "estimate_fingerprint");
    out.require(auc_err <= 1e-12, "roc_auc");
}

// --- 4 ----------------------------------------------------------------------

void fingerprint_recovery(Outcome& out)
{
    const CameraModelSpec model = desk_plan().models[0];
    const int w = 256;
    auto fingerprint_of = [&](const DeviceSpec& dev, std::uint64_t base) {
        std::vector<GrayImage> grays(50);
        std::vector<NoiseResidual> res(50);
        parallel_for(50, [&](std::size_t k) {
            grays[k] = to_gray(capture(SceneSpec{SceneKind::flat, w, w, base + k}, dev, model));
            res[k] = extract_residual(grays[k]);
        });
        return estimate_fingerprint(grays, res, dev.device_id);
    };
    const DeviceSpec a = make_device("A", model.model_id, w, w, 41, 0.02);
    const DeviceSpec b = make_device("B", model.model_id, w, w, 42, 0.02);
    const Fingerprint fa = fingerprint_of(a, 1000);
    const Fingerprint fb = fingerprint_of(b, 2000);
    const double corr = pearson_planes(fa, a.prnu_pattern);

    std::vector<char> ok(100, 0);
    std::vector<double> match(100), other(100);
    parallel_for(100, [&](std::size_t k) {
        const GrayImage g = to_gray(capture(SceneSpec{SceneKind::natural, w, w, 5000 + k}, a, model));
        const NoiseResidual r = extract_residual(g);
        match[k] = pce(r, g, fa).pce;
        other[k] = pce(r, g, fb).pce;
        ok[k] = match[k] > 50.0 && std::abs(other[k]) < 50.0;
    });
    const auto passed = std::count(ok.begin(), ok.end(), 1);
    out.detail << "corr(F^,F)=" << num(corr) << ", images separated=" << passed << "/100, min matching PCE="
               << num(*std::min_element(match.begin(), match.end()), 1) << ", max non-matching |PCE|="
               << num(std::abs(*std::max_element(other.begin(), other.end(),
                                                 [](double x, double y) { return std::abs(x) < std::abs(y); })),
                      1);
    out.require(corr > 0.5, "fingerprint correlation > 0.5");
    out.require(passed >= 95, "PCE separation on >= 95 images");
}

// --- 5-9: desk pipeline -----------------------------------------------------

struct Pipeline {
    ExperimentPlan plan = desk_plan();
    SimulatedSource source{plan};
    testing::TempDir dir{"acceptance"};
    ArtifactStore store{dir.path()};
    bool trained = false;
    bool calibrated = false;

    void train()
    {
        if (trained) return;
        const auto fp = stage_fingerprints(plan, source, store);
        const auto cmi = stage_train_cmi(plan, source, store, [](const std::string& m) { spdlog::debug("{}", m); });
        const auto fusion = stage_train_fusion(plan, source, store);
        for (const auto* r : {&cmi, &fusion}) {
            for (const auto& [k, v] : r->values) std::printf("  train %s = %g\n", k.c_str(), v);
        }
        trained = true;
    }
    void calibrate()
    {
        train();
        if (calibrated) return;
        stage_calibrate(plan, source, store);
        calibrated = true;
    }
};

Pipeline& pipeline()
{
    static Pipeline p;
    return p;
}

double value(const ResultTable& t, const std::string& model, const char* method, const std::string& condition,
             const char* metric, Outcome& out)
{
    const auto v = t.find(model, method, condition, metric);
    out.require(v.has_value(), "row " + model + "/" + method + "/" + condition);
    return v.value_or(std::nan(""));
}

void auc_pattern(Outcome& out)
{
    auto& p = pipeline();
    p.train();
    const ResultTable t = run_auc_experiment(p.plan, p.source, p.store);
    for (const auto& m : p.plan.models) {
        const double prnu = value(t, m.model_id, kPrnu, "original", "auc", out);
        const double cnn = value(t, m.model_id, kCnn, "original", "auc", out);
        const double fused = value(t, m.model_id, kFusion, "original", "auc", out);
        out.detail << " " << m.model_id << ": PRNU=" << num(prnu) << " CNN=" << num(cnn) << " Fusion=" << num(fused)
                   << ";";
        out.require(fused >= std::max(prnu, cnn) - 0.01, m.model_id + " fusion dominance");
        out.require(cnn >= 0.90, m.model_id + " CNN >= 0.90");
        out.require(prnu >= 0.90, m.model_id + " PRNU >= 0.90");
    }
}

void jpeg_pattern(Outcome& out)
{
    auto& p = pipeline();
    p.train();
    const ResultTable t = run_jpeg_experiment(p.plan, p.source, p.store);
    std::vector<double> cnn, fused;
    const double n = static_cast<double>(p.plan.models.size());
    for (int q : p.plan.qualities) {
        const std::string cond = "q" + std::to_string(q);
        double c = 0.0, f = 0.0;
        for (const auto& m : p.plan.models) {
            const double mc = value(t, m.model_id, kCnn, cond, "auc", out);
            const double mf = value(t, m.model_id, kFusion, cond, "auc", out);
            std::printf("  %s %s CNN=%.4f Fusion=%.4f PRNU=%.4f\n", m.model_id.c_str(), cond.c_str(), mc, mf,
                        value(t, m.model_id, kPrnu, cond, "auc", out));
            c += mc / n;
            f += mf / n;
        }
        cnn.push_back(c);
        fused.push_back(f);
        out.detail << " " << cond << ": CNN=" << num(c) << " Fusion=" << num(f) << ";";
        out.require(f >= c, cond + " fusion >= CNN");
    }
    for (std::size_t i = 1; i < cnn.size(); ++i) out.require(cnn[i] < cnn[i - 1], "CNN AUC decreasing");
    const double gain = fused.back() / cnn.back() - 1.0;
    out.detail << " gain at q" << p.plan.qualities.back() << "=" << num(100.0 * gain, 1) << "%";
    out.require(gain >= 0.10, "fusion gain >= 10% at the lowest quality");
}

void cross_device(Outcome& out)
{
    auto& p = pipeline();
    p.train();
    const ResultTable t = run_cross_device_experiment(p.plan, p.source, p.store);
    int rows = 0;
    for (const auto& d : p.plan.devices) {
        if (d.primary) continue;
        const double prnu = value(t, d.model_id, kPrnu, d.device_id, "auc", out);
        const double cnn = value(t, d.model_id, kCnn, d.device_id, "auc", out);
        const double fused = value(t, d.model_id, kFusion, d.device_id, "auc", out);
        out.detail << " " << d.device_id << ": PRNU=" << num(prnu) << " CNN=" << num(cnn) << " Fusion=" << num(fused)
                   << ";";
        out.require(fused >= prnu && fused >= cnn, d.device_id + " fusion highest");
        ++rows;
    }
    out.require(rows > 0, "at least one secondary device");
}

void forgery_pattern(Outcome& out)
{
    auto& p = pipeline();
    p.calibrate();
    const ResultTable fused = run_forgery_benchmark(p.plan, p.source, p.store);
    const ResultTable base = run_forgery_benchmark(p.plan, p.source, p.store, true);
    const double n = static_cast<double>(p.plan.models.size());
    std::vector<double> f_means;
    double base_small = 0.0;
    for (int size : p.plan.forgery_sizes) {
        const std::string cond = "size=" + std::to_string(size);
        double f = 0.0, b = 0.0;
        for (const auto& m : p.plan.models) {
            f += value(fused, m.model_id, kFusion, cond, "f_score", out) / n;
            b += value(base, m.model_id, kPrnuOnly, cond, "f_score", out) / n;
        }
        f_means.push_back(f);
        base_small = b;
        out.detail << " " << cond << ": Fusion=" << num(f) << " PRNU-only=" << num(b) << ";";
    }
    for (std::size_t i = 1; i < f_means.size(); ++i) out.require(f_means[i] < f_means[i - 1], "F decreasing with size");
    out.require(f_means.back() > 0.05, "smallest-size Fusion F > 0.05");
    out.require(f_means.back() > base_small, "smallest-size Fusion F > PRNU-only");
}

void calibration(Outcome& out)
{
    auto& p = pipeline();
    p.calibrate();
    std::map<std::string, ThresholdCalibration> first;
    for (const auto& m : p.plan.models) {
        first[m.model_id] = load_calibration(p.store.calibration(m.model_id));
        const auto cases = make_forgery_cases(p.plan, p.source, m.model_id, ImageSet::f);
        out.require(cases.size() == 30, m.model_id + " uses 30 forged images");
    }
    stage_calibrate(p.plan, p.source, p.store);
    for (const auto& m : p.plan.models) {
        const auto again = load_calibration(p.store.calibration(m.model_id));
        const auto& a = first[m.model_id];
        const std::size_t best = a.best_index();
        out.detail << " " << m.model_id << ": tau=" << num(a.tau) << " F=" << num(a.mean_f.at(best)) << " steps="
                   << a.thresholds.size() << ";";
        out.require(a.thresholds.size() == 100, m.model_id + " 100 thresholds");
        out.require(again.tau == a.tau && again.mean_f == a.mean_f && again.thresholds == a.thresholds,
                    m.model_id + " deterministic");
        out.require(best > 0 && best + 1 < a.thresholds.size(), m.model_id + " interior argmax");
    }
}

// --- 10 ---------------------------------------------------------------------

void formulas(Outcome& out)
{
    out.require(f_score(ConfusionCounts{5, 5, 5, 0}) == 0.5, "F(5,5,5) = 0.5");

    BinaryMask truth(40, 30);
    for (int r = 5; r < 20; ++r) {
        for (int c = 8; c < 30; ++c) truth(r, c) = 1;
    }
    out.require(f_score(truth, truth).value == 1.0, "perfect F = 1");

    const NetModel zero = zero_model(Shape{96, 96, 3}, default_cmi_architecture());
    const Tensor probs = forward(zero, Tensor(Shape{96, 96, 3}, std::vector<double>(96 * 96 * 3, 0.7)));
    out.require(probs.data.size() == 2 && probs.data[kTargetModel] == 0.5, "phi = 0.5 at zero weights");

    std::mt19937_64 rng(7);
    bool idempotent = true;
    for (int trial = 0; trial < 20; ++trial) {
        BinaryMask m(64, 48);
        for (auto& b : m.bits()) b = rng() % 3 == 0 ? 1 : 0;
        for (int radius : {1, 2, 3}) {
            const BinaryMask once = open_disc(m, radius);
            idempotent = idempotent && open_disc(once, radius) == once;
        }
    }
    out.require(idempotent, "opening idempotent");
    out.detail << "F(5,5,5)=" << f_score(ConfusionCounts{5, 5, 5, 0}) << " F(perfect)=" << f_score(truth, truth).value
               << " phi0=" << probs.data[kTargetModel] << " opening idempotent=" << (idempotent ? "yes" : "no");
}

struct Criterion {
    int id;
    const char* name;
    double limit_seconds;  // 0: no stated limit beyond "seconds"
    std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv)
{
    spdlog::set_level(spdlog::level::warn);
    const std::vector<Criterion> all = {
        {1, "gradient correctness", 60, gradients},
        {2, "wavelet soundness", 60, wavelet},
        {3, "oracle equivalence", 60, oracles},
        {4, "fingerprint recovery", 300, fingerprint_recovery},
        {5, "AUC dominance", 1200, auc_pattern},
        {6, "JPEG robustness", 900, jpeg_pattern},
        {7, "cross-device", 600, cross_device},
        {8, "forgery localization", 1200, forgery_pattern},
        {9, "calibration", 600, calibration},
        {10, "formula spot checks", 60, formulas},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : all) {
        if (!wanted.empty() && !wanted.count(c.id)) continue;
        Outcome out;
        const auto start = std::chrono::steady_clock::now();
        try {
            c.run(out);
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail << " [exception: " << e.what() << "]";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.require(secs < c.limit_seconds, "runtime under " + num(c.limit_seconds, 0) + " s");
        if (!out.pass) ++failed;
        std::printf("criterion %d (%s): %s  %s  [%.1f s]\n", c.id, c.name, out.pass ? "PASS" : "FAIL",
                    out.detail.str().c_str(), secs);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}

#include "camfuse/bench.hpp"

#include "camfuse/common.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace camfuse {

std::string ImageRecord::id() const
{
    char idx[16];
    std::snprintf(idx, sizeof idx, "%03d", index);
    return device_id + "/" + std::string(to_string(set)) + "/" + idx;
}

std::vector<ImageRecord> ImageSource::select(const std::string& device_id, ImageSet set) const
{
    std::vector<ImageRecord> out;
    for (const auto& r : records()) {
        if (r.device_id == device_id && r.set == set) out.push_back(r);
    }
    std::sort(out.begin(), out.end(), [](const ImageRecord& a, const ImageRecord& b) { return a.index < b.index; });
    return out;
}

std::vector<RgbImage> ImageSource::load_all(const std::vector<ImageRecord>& records) const
{
    std::vector<RgbImage> out(records.size());
    parallel_for(records.size(), [&](std::size_t i) { out[i] = load(records[i]); });
    return out;
}

// --- sources ----------------------------------------------------------------

SimulatedSource::SimulatedSource(ExperimentPlan plan) : plan_(std::move(plan))
{
    plan_.validate();
    for (const auto& d : plan_.devices) {
        devices_.emplace(d.device_id, make_device(d.device_id, d.model_id, plan_.width, plan_.height,
                                                  plan_.device_seed(d.device_id), d.sigma_f, d.noise_std));
        for (auto set : kAllSets) {
            const int n = plan_.set_size(d, set);
            for (int i = 0; i < n; ++i) records_.push_back({d.device_id, d.model_id, set, i, {}});
        }
    }
}

const DeviceSpec& SimulatedSource::device(const std::string& device_id) const
{
    const auto it = devices_.find(device_id);
    if (it == devices_.end()) fail(Errc::plan, "unknown device '" + device_id + "'");
    return it->second;
}

SceneSpec SimulatedSource::scene(const ImageRecord& record) const
{
    SceneSpec s;
    s.kind = record.set == ImageSet::flat ? SceneKind::flat : SceneKind::natural;
    s.width = plan_.width;
    s.height = plan_.height;
    s.seed = derive_seed(plan_.seed, "scene:" + std::string(to_string(record.set)),
                         static_cast<std::uint64_t>(record.index));
    return s;
}

RgbImage SimulatedSource::load(const ImageRecord& record) const
{
    const auto& dev = device(record.device_id);
    return capture(scene(record), dev, plan_.model(dev.model_id));
}

ManifestSource::ManifestSource(std::filesystem::path root) : root_(std::move(root))
{
    const auto manifest = root_ / "manifest.tsv";
    std::ifstream in(manifest);
    if (!in) fail(Errc::dependency, "missing dataset manifest " + manifest.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || (lineno == 1 && line.starts_with("path\t"))) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, '\t')) cols.push_back(col);
        if (cols.size() != 5) {
            fail(Errc::format, manifest.string() + " line " + std::to_string(lineno) + ": expected 5 columns");
        }
        ImageRecord r;
        r.path = cols[0];
        r.device_id = cols[1];
        r.model_id = cols[2];
        r.set = parse_image_set(cols[3]);
        try {
            r.index = std::stoi(cols[4]);
        } catch (const std::exception&) {
            fail(Errc::format, manifest.string() + " line " + std::to_string(lineno) + ": bad index");
        }
        records_.push_back(std::move(r));
    }
    for (std::size_t i = 0; i < records_.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (records_[i].path == records_[j].path) {
                fail(Errc::format, "image " + records_[i].path.string() + " is listed in more than one set");
            }
        }
    }
}

RgbImage ManifestSource::load(const ImageRecord& record) const { return read_rgb(root_ / record.path); }

void write_dataset(const SimulatedSource& source, const std::filesystem::path& root)
{
    const auto& recs = source.records();
    std::vector<std::string> paths(recs.size());
    parallel_for(recs.size(), [&](std::size_t i) {
        const auto& r = recs[i];
        paths[i] = "images/" + r.id() + ".ppm";
        write_image(root / paths[i], source.load(r));
    });
    write_file_atomic(root / "manifest.tsv", [&](std::ostream& os) {
        os << "path\tdevice\tmodel\tset\tindex\n";
        for (std::size_t i = 0; i < recs.size(); ++i) {
            os << paths[i] << '\t' << recs[i].device_id << '\t' << recs[i].model_id << '\t'
               << to_string(recs[i].set) << '\t' << recs[i].index << '\n';
        }
    });
    write_file_atomic(root / "plan.txt", [&](std::ostream& os) { os << format_plan(source.plan()); });
}

// --- artifact store ---------------------------------------------------------

std::filesystem::path ArtifactStore::fingerprint(const std::string& device_id) const
{
    return root_ / "fingerprints" / (device_id + ".fp");
}

std::filesystem::path ArtifactStore::cmi(const std::string& model_id) const { return root_ / "cmi" / model_id; }

std::filesystem::path ArtifactStore::fusion(const std::string& model_id) const { return root_ / "fusion" / model_id; }

std::filesystem::path ArtifactStore::baseline(const std::string& model_id) const
{
    return root_ / "fusion" / (model_id + ".prnu-only");
}

std::filesystem::path ArtifactStore::calibration(const std::string& model_id, bool baseline) const
{
    return root_ / "calibration" / (model_id + (baseline ? ".prnu-only" : "") + ".txt");
}

void ArtifactStore::require(const std::vector<std::filesystem::path>& files) const
{
    std::string missing;
    for (const auto& f : files) {
        if (!std::filesystem::exists(f)) missing += (missing.empty() ? "" : ", ") + f.string();
    }
    if (!missing.empty()) fail(Errc::dependency, "missing artifacts: " + missing);
}

void save_calibration(const std::filesystem::path& path, const ThresholdCalibration& cal)
{
    write_file_atomic(path, [&](std::ostream& os) {
        os.precision(17);
        os << "model_id=" << cal.model_id << "\ntau=" << cal.tau << "\nsteps=" << cal.thresholds.size() << "\ncurve=";
        for (std::size_t i = 0; i < cal.thresholds.size(); ++i) {
            os << (i ? "," : "") << cal.thresholds[i] << ":" << cal.mean_f[i];
        }
        os << "\n";
    });
}

ThresholdCalibration load_calibration(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) fail(Errc::dependency, "missing calibration " + path.string());
    ThresholdCalibration cal;
    std::string line;
    bool have_tau = false;
    try {
        while (std::getline(in, line)) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            const auto key = line.substr(0, eq);
            const auto val = line.substr(eq + 1);
            if (key == "model_id") {
                cal.model_id = val;
            } else if (key == "tau") {
                cal.tau = std::stod(val);
                have_tau = true;
            } else if (key == "curve") {
                std::stringstream ss(val);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    const auto colon = item.find(':');
                    cal.thresholds.push_back(std::stod(item.substr(0, colon)));
                    cal.mean_f.push_back(std::stod(item.substr(colon + 1)));
                }
            }
        }
    } catch (const std::exception&) {
        fail(Errc::format, "malformed calibration file " + path.string());
    }
    if (!have_tau) fail(Errc::format, "calibration file " + path.string() + " has no tau");
    return cal;
}

// --- helpers ----------------------------------------------------------------

namespace {

struct Analyzed {
    RgbImage image;
    GrayImage gray;
    NoiseResidual residual;
};

std::vector<Analyzed> analyze(std::vector<RgbImage> images, double sigma0)
{
    std::vector<Analyzed> out(images.size());
    parallel_for(images.size(), [&](std::size_t i) {
        out[i].gray = to_gray(images[i]);
        out[i].residual = extract_residual(out[i].gray, sigma0);
        out[i].image = std::move(images[i]);
    });
    return out;
}

// Keeps images whose whole-image PCE against the fingerprint passes the gate.
std::vector<Analyzed> gate(std::vector<Analyzed> images, const Fingerprint& fp, double threshold,
                           std::vector<char>* kept = nullptr)
{
    std::vector<char> pass(images.size());
    parallel_for(images.size(), [&](std::size_t i) {
        const auto s = pce(images[i].residual, images[i].gray, fp);
        pass[i] = !s.degenerate && s.pce >= threshold;
    });
    std::vector<Analyzed> out;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (pass[i]) out.push_back(std::move(images[i]));
    }
    if (kept) *kept = pass;
    return out;
}

std::vector<BlockRef> random_blocks(int width, int height, int block, int count, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> rows(0, height - block);
    std::uniform_int_distribution<int> cols(0, width - block);
    std::vector<BlockRef> refs;
    for (int k = 0; k < count; ++k) {
        const int r = rows(rng);
        const int c = cols(rng);
        refs.push_back({r, c, 0, block});
    }
    return refs;
}

std::vector<std::string> other_primaries(const ExperimentPlan& plan, const std::string& model_id)
{
    std::vector<std::string> out;
    for (const auto& m : plan.models) {
        if (m.model_id != model_id) out.push_back(plan.primary_device(m.model_id).device_id);
    }
    return out;
}

std::vector<ScorePair> score_set(const std::vector<Analyzed>& images, const std::vector<std::string>& ids,
                                 bool target, int blocks, const std::string& tag, const ExperimentPlan& plan,
                                 const Fingerprint& fp, const CmiBundle& cmi)
{
    std::vector<ScorePair> out;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& a = images[i];
        const auto refs = random_blocks(a.image.width(), a.image.height(), cmi.block, blocks,
                                        derive_seed(plan.seed, tag + ":" + ids[i]));
        auto s = score_blocks(a.image, a.gray, a.residual, refs, fp, cmi, target);
        out.insert(out.end(), s.begin(), s.end());
    }
    return out;
}

struct AucTriple {
    double prnu = 0.0;
    double cnn = 0.0;
    double fusion = 0.0;
    double prnu_only = 0.0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

AucTriple aucs(const std::vector<ScorePair>& pairs, const FusionModel& fusion, const FusionModel& baseline)
{
    std::vector<int> labels;
    std::vector<double> rho, phi, fused, base;
    AucTriple t;
    for (const auto& p : pairs) {
        labels.push_back(p.target ? 1 : 0);
        (p.target ? t.positives : t.negatives)++;
        rho.push_back(p.rho);
        phi.push_back(p.phi);
        // theta is the tamper (H0) probability. H1 ranks by -theta, the same
        // order as 1 - theta without rounding tiny theta values to a tie at 1.
        fused.push_back(-theta(fusion, p.rho, p.phi));
        base.push_back(-theta(baseline, p.rho, 0.5));
    }
    t.prnu = roc_auc(rho, labels);
    t.cnn = roc_auc(phi, labels);
    t.fusion = roc_auc(fused, labels);
    t.prnu_only = roc_auc(base, labels);
    return t;
}

std::vector<std::string> record_ids(const std::vector<ImageRecord>& recs)
{
    std::vector<std::string> ids;
    for (const auto& r : recs) ids.push_back(r.id());
    return ids;
}

template <class T>
std::vector<T> keep(const std::vector<T>& v, const std::vector<char>& mask)
{
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (mask[i]) out.push_back(v[i]);
    }
    return out;
}

struct ModelArtifacts {
    Fingerprint fp;
    CmiBundle cmi;
    FusionModel fusion;
    FusionModel baseline;
};

ModelArtifacts load_artifacts(const ArtifactStore& store, const std::string& model_id, const std::string& fp_device)
{
    auto stem = [](std::filesystem::path p, const char* ext) { return p += ext; };
    store.require({store.fingerprint(fp_device), stem(store.cmi(model_id), ".nnet"), stem(store.cmi(model_id), ".meta"),
                   stem(store.fusion(model_id), ".nnet"), stem(store.baseline(model_id), ".nnet")});
    return {load_fingerprint(store.fingerprint(fp_device)), load_bundle(store.cmi(model_id)),
            load_fusion(store.fusion(model_id)), load_fusion(store.baseline(model_id))};
}

// One block-AUC evaluation: H1 images of `h1_device`, H0 images of the other
// models' primary devices, optionally recompressed.
AucTriple evaluate(const ExperimentPlan& plan, const ImageSource& source, const ModelArtifacts& art,
                   const std::string& model_id, const std::string& h1_device, int quality)
{
    auto prepare = [&](const std::vector<ImageRecord>& recs) {
        auto imgs = source.load_all(recs);
        if (quality > 0) {
            parallel_for(imgs.size(), [&](std::size_t i) { imgs[i] = recompress(imgs[i], quality); });
        }
        return imgs;
    };
    // the gate is decided on the images as captured so every quality sees the same set
    const auto h1_recs = source.select(h1_device, ImageSet::s_ts);
    std::vector<char> kept;
    gate(analyze(source.load_all(h1_recs), plan.sigma0), art.fp, plan.pce_gate, &kept);
    const auto h1_ids = keep(record_ids(h1_recs), kept);
    const auto h1 = analyze(keep(prepare(h1_recs), kept), plan.sigma0);

    std::vector<ScorePair> pairs = score_set(h1, h1_ids, true, plan.eval_blocks, "eval", plan, art.fp, art.cmi);
    for (const auto& dev : other_primaries(plan, model_id)) {
        const auto recs = source.select(dev, ImageSet::s_ts);
        const auto h0 = analyze(prepare(recs), plan.sigma0);
        auto s = score_set(h0, record_ids(recs), false, plan.eval_blocks, "eval", plan, art.fp, art.cmi);
        pairs.insert(pairs.end(), s.begin(), s.end());
    }
    if (h1.empty()) fail(Errc::invariant, "every S_ts image of " + h1_device + " failed the PCE gate");
    return aucs(pairs, art.fusion, art.baseline);
}

void add_triple(ResultTable& t, const std::string& model, const std::string& condition, const AucTriple& a)
{
    t.rows.push_back({model, kPrnu, condition, "auc", a.prnu});
    t.rows.push_back({model, kCnn, condition, "auc", a.cnn});
    t.rows.push_back({model, kFusion, condition, "auc", a.fusion});
    t.rows.push_back({model, kPrnuOnly, condition, "auc", a.prnu_only});
}

}  // namespace

// --- stages -----------------------------------------------------------------

StageReport stage_fingerprints(const ExperimentPlan& plan, const ImageSource& source, const ArtifactStore& store)
{
    StageReport report;
    for (const auto& dev : plan.devices) {
        const auto recs = source.select(dev.device_id, ImageSet::flat);
        if (recs.empty()) fail(Errc::dependency, "no flat images for device " + dev.device_id);
        const auto imgs = analyze(source.load_all(recs), plan.sigma0);
        FingerprintAccumulator acc(imgs.front().gray.width(), imgs.front().gray.height());
        for (const auto& a : imgs) acc.add(a.gray, a.residual);
        save_fingerprint(store.fingerprint(dev.device_id), acc.finish(dev.device_id));
        report.values[dev.device_id + ".flat_images"] = static_cast<double>(imgs.size());
    }
    return report;
}

StageReport stage_train_cmi(const ExperimentPlan& plan, const ImageSource& source, const ArtifactStore& store,
                            const Progress& progress)
{
    auto gather = [&](ImageSet set, std::vector<RgbImage>& images, std::vector<std::string>& models) {
        for (const auto& m : plan.models) {
            const auto recs = source.select(plan.primary_device(m.model_id).device_id, set);
            auto imgs = source.load_all(recs);
            for (auto& im : imgs) {
                images.push_back(std::move(im));
                models.push_back(m.model_id);
            }
        }
    };
    std::vector<RgbImage> train_images, test_images;
    std::vector<std::string> train_models, test_models;
    gather(ImageSet::c_tr, train_images, train_models);
    gather(ImageSet::c_ts, test_images, test_models);

    StageReport report;
    for (const auto& m : plan.models) {
        const auto train = sample_blocks(train_images, train_models, m.model_id, plan.blocks,
                                         derive_seed(plan.seed, "cmi-blocks:" + m.model_id));
        TrainOptions opt;
        opt.epochs = plan.cnn_epochs;
        opt.learning_rate = plan.cnn_lr;
        opt.momentum = plan.cnn_momentum;
        opt.batch = plan.cnn_batch;
        opt.seed = derive_seed(plan.seed, "cmi:" + m.model_id);
        opt.on_epoch = [&](int epoch, double loss) {
            if (progress) progress("cmi " + m.model_id + " epoch " + std::to_string(epoch + 1) + " loss " +
                                   std::to_string(loss));
        };
        CmiBundle bundle = train_cmi(train_images, train, default_cmi_architecture(plan.cnn_width, plan.cnn_fc), opt);
        const auto test = sample_blocks(test_images, test_models, m.model_id, plan.blocks,
                                        derive_seed(plan.seed, "cmi-test-blocks:" + m.model_id));
        bundle.accuracy = block_accuracy(bundle, test_images, test);
        save_bundle(store.cmi(m.model_id), bundle);
        report.values[m.model_id + ".accuracy"] = bundle.accuracy;
        report.values[m.model_id + ".train_blocks"] = static_cast<double>(train.entries.size());
    }
    return report;
}

StageReport stage_train_fusion(const ExperimentPlan& plan, const ImageSource& source, const ArtifactStore& store)
{
    StageReport report;
    for (const auto& m : plan.models) {
        const auto& dev = plan.primary_device(m.model_id);
        auto cmi_stem = store.cmi(m.model_id);
        store.require({store.fingerprint(dev.device_id), cmi_stem += ".nnet"});
        const Fingerprint fp = load_fingerprint(store.fingerprint(dev.device_id));
        const CmiBundle cmi = load_bundle(store.cmi(m.model_id));

        const auto h1_recs = source.select(dev.device_id, ImageSet::s_tr);
        std::vector<char> kept;
        const auto h1 = gate(analyze(source.load_all(h1_recs), plan.sigma0), fp, plan.pce_gate, &kept);
        if (h1.empty()) fail(Errc::invariant, "every S_tr image of " + dev.device_id + " failed the PCE gate");
        auto pairs = score_set(h1, keep(record_ids(h1_recs), kept), true, plan.pair_blocks, "pairs", plan, fp, cmi);
        for (const auto& other : other_primaries(plan, m.model_id)) {
            const auto recs = source.select(other, ImageSet::s_tr);
            const auto h0 = analyze(source.load_all(recs), plan.sigma0);
            auto s = score_set(h0, record_ids(recs), false, plan.pair_blocks, "pairs", plan, fp, cmi);
            pairs.insert(pairs.end(), s.begin(), s.end());
        }
        FusionOptions opt;
        opt.epochs = plan.fusion_epochs;
        opt.learning_rate = plan.fusion_lr;
        opt.batch = plan.fusion_batch;
        opt.seed = derive_seed(plan.seed, "fusion:" + m.model_id);
        save_fusion(store.fusion(m.model_id), train_fusion(pairs, opt, m.model_id));
        save_fusion(store.baseline(m.model_id), train_fusion(without_phi(pairs), opt, m.model_id));
        report.values[m.model_id + ".pairs"] = static_cast<double>(pairs.size());
        report.values[m.model_id + ".gate_rejected"] =
            static_cast<double>(std::count(kept.begin(), kept.end(), char{0}));
    }
    return report;
}

std::vector<ForgeryCase> make_forgery_cases(const ExperimentPlan& plan, const ImageSource& source,
                                            const std::string& model_id, ImageSet set)
{
    const auto host_recs = source.select(plan.primary_device(model_id).device_id, set);
    const auto others = other_primaries(plan, model_id);
    if (host_recs.empty() || others.empty()) fail(Errc::argument, "forgery set for " + model_id + " is empty");
    std::vector<std::vector<ImageRecord>> donor_recs;
    for (const auto& o : others) donor_recs.push_back(source.select(o, set));

    std::vector<ForgeryCase> cases;
    for (std::size_t i = 0; i < host_recs.size(); ++i) {
        const RgbImage host = source.load(host_recs[i]);
        const auto& pool = donor_recs[i % donor_recs.size()];
        if (pool.empty()) fail(Errc::argument, "no donor images for " + model_id);
        // next scene in the pool, so the pasted content differs from the host's
        const RgbImage donor = source.load(pool[(i + 1) % pool.size()]);
        for (int size : plan.forgery_sizes) {
            std::mt19937_64 rng(derive_seed(plan.seed, "forgery:" + host_recs[i].id(), static_cast<std::uint64_t>(size)));
            const int r = std::uniform_int_distribution<int>(0, host.height() - size)(rng);
            const int c = std::uniform_int_distribution<int>(0, host.width() - size)(rng);
            cases.push_back({size, host_recs[i].id(), make_forgery(host, donor, size, r, c)});
        }
    }
    return cases;
}

namespace {

std::vector<ProbabilityMap> maps_for(const std::vector<ForgeryCase>& cases, const ModelArtifacts& art,
                                     const ExperimentPlan& plan, bool prnu_only)
{
    MapOptions opt;
    opt.window = plan.blocks.block;
    opt.stride = plan.stride;
    opt.sigma0 = plan.sigma0;
    opt.aggregation = plan.aggregation;
    opt.prnu_only = prnu_only;
    const FusionModel& fus = prnu_only ? art.baseline : art.fusion;
    std::vector<ProbabilityMap> maps;
    for (const auto& c : cases) maps.push_back(sliding_map(c.forgery.image, art.fp, art.cmi, fus, opt));
    return maps;
}

}  // namespace

StageReport stage_calibrate(const ExperimentPlan& plan, const ImageSource& source, const ArtifactStore& store)
{
    StageReport report;
    const int radius = opening_radius_for(plan.width);
    for (const auto& m : plan.models) {
        const auto art = load_artifacts(store, m.model_id, plan.primary_device(m.model_id).device_id);
        const auto cases = make_forgery_cases(plan, source, m.model_id, ImageSet::f);
        std::vector<BinaryMask> truths;
        for (const auto& c : cases) truths.push_back(c.forgery.mask);
        for (bool baseline : {false, true}) {
            const auto maps = maps_for(cases, art, plan, baseline);
            auto cal = calibrate_threshold(maps, truths, radius);
            cal.model_id = m.model_id;
            save_calibration(store.calibration(m.model_id, baseline), cal);
            report.values[m.model_id + (baseline ? ".baseline_tau" : ".tau")] = cal.tau;
        }
    }
    return report;
}

// --- experiments ------------------------------------------------------------

ResultTable run_auc_experiment(const ExperimentPlan& plan, const ImageSource& source, const ArtifactStore& store)
{
    ResultTable t{"auc", {}};
    for (const auto& m : plan.models) {
        const auto& dev = plan.primary_device(m.model_id);
        const auto art = load_artifacts(store, m.model_id, dev.device_id);
        add_triple(t, m.model_id, "original", evaluate(plan, source, art, m.model_id, dev.device_id, 0));
    }
    return t;
}

ResultTable run_jpeg_experiment(const ExperimentPlan& plan, const ImageSource& source, const ArtifactStore& store)
{
    ResultTable t{"jpeg", {}};
    for (const auto& m : plan.models) {
        const auto& dev = plan.primary_device(m.model_id);
        const auto art = load_artifacts(store, m.model_id, dev.device_id);
        for (int q : plan.qualities) {
            add_triple(t, m.model_id, "q" + std::to_string(q), evaluate(plan, source, art, m.model_id, dev.device_id, q));
        }
    }
    return t;
}

ResultTable run_cross_device_experiment(const ExperimentPlan& plan, const ImageSource& source,
                                        const ArtifactStore& store)
{
    ResultTable t{"cross_device", {}};
    bool any = false;
    for (const auto& m : plan.models) {
        for (const auto* dev : plan.secondary_devices(m.model_id)) {
            any = true;
            const auto art = load_artifacts(store, m.model_id, dev->device_id);
            add_triple(t, m.model_id, dev->device_id, evaluate(plan, source, art, m.model_id, dev->device_id, 0));
        }
    }
    if (!any) fail(Errc::plan, "cross-device experiment needs a model with a second device");
    return t;
}

ResultTable run_forgery_benchmark(const ExperimentPlan& plan, const ImageSource& source, const ArtifactStore& store,
                                  bool prnu_only)
{
    ResultTable t{prnu_only ? "forgery_prnu_only" : "forgery", {}};
    const int radius = opening_radius_for(plan.width);
    for (const auto& m : plan.models) {
        const auto art = load_artifacts(store, m.model_id, plan.primary_device(m.model_id).device_id);
        store.require({store.calibration(m.model_id, prnu_only)});
        const double tau = load_calibration(store.calibration(m.model_id, prnu_only)).tau;
        const auto cases = make_forgery_cases(plan, source, m.model_id, ImageSet::s_ts);
        const auto maps = maps_for(cases, art, plan, prnu_only);
        for (int size : plan.forgery_sizes) {
            double sum = 0.0;
            int n = 0;
            for (std::size_t i = 0; i < cases.size(); ++i) {
                if (cases[i].size != size) continue;
                sum += f_score(binarize(maps[i], tau, radius), cases[i].forgery.mask).value;
                ++n;
            }
            t.rows.push_back({m.model_id, prnu_only ? kPrnuOnly : kFusion, "size=" + std::to_string(size), "f_score",
                              n ? sum / n : 0.0, n == 0});
        }
    }
    return t;
}

// --- reporting --------------------------------------------------------------

std::optional<double> ResultTable::find(const std::string& model, const std::string& method,
                                        const std::string& condition, const std::string& metric) const
{
    for (const auto& r : rows) {
        if (r.model == model && r.method == method && r.condition == condition && r.metric == metric && !r.failed) {
            return r.value;
        }
    }
    return std::nullopt;
}

std::string ResultTable::csv() const
{
    std::ostringstream os;
    os.precision(6);
    os << std::fixed;
    os << "model,method,condition,metric,value\n";
    for (const auto& r : rows) {
        os << r.model << ',' << r.method << ',' << r.condition << ',' << r.metric << ',';
        if (r.failed) {
            os << "failed";
        } else {
            os << r.value;
        }
        os << '\n';
    }
    return os.str();
}

const std::vector<ReferenceRow>& reference_forgery_scores()
{
    static const std::vector<ReferenceRow> rows = {
        {"MRF", 0.57, 0.38, 0.13},
        {"MSF", 0.70, 0.53, 0.19},
        {"Fusion", 0.73, 0.56, 0.26},
    };
    return rows;
}

std::string summary_report(const ExperimentPlan& plan, const std::vector<ResultTable>& tables)
{
    std::ostringstream os;
    char buf[256];
    os << "profile " << plan.profile << ", seed " << plan.seed << ", " << plan.models.size() << " models, "
       << plan.devices.size() << " devices, " << plan.width << "x" << plan.height << "\n";
    for (const auto& t : tables) {
        os << "\n[" << t.name << "]\n";
        std::vector<std::string> conditions;
        std::vector<std::string> methods;
        for (const auto& r : t.rows) {
            if (std::find(conditions.begin(), conditions.end(), r.condition) == conditions.end()) {
                conditions.push_back(r.condition);
            }
            if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
        }
        for (const auto& cond : conditions) {
            std::snprintf(buf, sizeof buf, "%-8s %-14s", "model", cond.c_str());
            os << buf;
            for (const auto& meth : methods) {
                std::snprintf(buf, sizeof buf, " %10s", meth.c_str());
                os << buf;
            }
            os << "\n";
            std::vector<double> sums(methods.size(), 0.0);
            std::vector<int> counts(methods.size(), 0);
            for (const auto& m : plan.models) {
                std::snprintf(buf, sizeof buf, "%-8s %-14s", m.model_id.c_str(), "");
                os << buf;
                bool any = false;
                for (std::size_t k = 0; k < methods.size(); ++k) {
                    std::optional<double> v;
                    for (const auto& r : t.rows) {
                        if (r.model == m.model_id && r.method == methods[k] && r.condition == cond && !r.failed) {
                            v = r.value;
                        }
                    }
                    if (v) {
                        any = true;
                        sums[k] += *v;
                        ++counts[k];
                        std::snprintf(buf, sizeof buf, " %10.3f", *v);
                    } else {
                        std::snprintf(buf, sizeof buf, " %10s", "-");
                    }
                    os << buf;
                }
                os << (any ? "\n" : " (no data)\n");
            }
            std::snprintf(buf, sizeof buf, "%-8s %-14s", "avg", "");
            os << buf;
            for (std::size_t k = 0; k < methods.size(); ++k) {
                std::snprintf(buf, sizeof buf, " %10.3f", counts[k] ? sums[k] / counts[k] : 0.0);
                os << buf;
            }
            os << "\n";
        }
        if (t.name == "forgery_prnu_only") {
            os << "reference averages at paper resolution (large/medium/small):\n";
            for (const auto& r : reference_forgery_scores()) {
                std::snprintf(buf, sizeof buf, "  %-8s %.2f %.2f %.2f\n", r.method, r.large, r.medium, r.small);
                os << buf;
            }
        }
    }
    return os.str();
}

std::vector<ResultTable> run_bench(const ExperimentPlan& plan, const ImageSource& source, const ArtifactStore& store,
                                   const std::filesystem::path& out, const Progress& progress)
{
    auto say = [&](const std::string& msg) {
        if (progress) {
            progress(msg);
        } else {
            spdlog::info("{}", msg);
        }
    };
    auto exists = [](std::filesystem::path p, const char* ext = "") { return std::filesystem::exists(p += ext); };
    bool have_fp = true, have_cmi = true, have_fusion = true, have_cal = true;
    for (const auto& d : plan.devices) have_fp = have_fp && exists(store.fingerprint(d.device_id));
    for (const auto& m : plan.models) {
        have_cmi = have_cmi && exists(store.cmi(m.model_id), ".nnet");
        have_fusion = have_fusion && exists(store.fusion(m.model_id), ".nnet") && exists(store.baseline(m.model_id), ".nnet");
        have_cal = have_cal && exists(store.calibration(m.model_id, false)) && exists(store.calibration(m.model_id, true));
    }
    if (!have_fp) {
        say("estimating fingerprints");
        stage_fingerprints(plan, source, store);
    }
    if (!have_cmi) {
        say("training CMI networks");
        stage_train_cmi(plan, source, store, progress);
        have_fusion = have_cal = false;
    }
    if (!have_fusion || !have_fp) {
        say("training fusion networks");
        stage_train_fusion(plan, source, store);
        have_cal = false;
    }
    if (!have_cal) {
        say("calibrating thresholds");
        stage_calibrate(plan, source, store);
    }
    std::vector<ResultTable> tables;
    say("block AUC experiment");
    tables.push_back(run_auc_experiment(plan, source, store));
    say("JPEG experiment");
    tables.push_back(run_jpeg_experiment(plan, source, store));
    say("unseen-device experiment");
    tables.push_back(run_cross_device_experiment(plan, source, store));
    say("forgery benchmark");
    tables.push_back(run_forgery_benchmark(plan, source, store));
    tables.push_back(run_forgery_benchmark(plan, source, store, true));
    for (const auto& t : tables) {
        write_file_atomic(out / (t.name + ".csv"), [&](std::ostream& os) { os << t.csv(); });
    }
    write_file_atomic(out / "summary.txt", [&](std::ostream& os) { os << summary_report(plan, tables); });
    return tables;
}

}  // namespace camfuse

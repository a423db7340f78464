#include "camfuse/plan.hpp"

#include "camfuse/common.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace camfuse {

std::string_view to_string(ImageSet s)
{
    switch (s) {
        case ImageSet::flat: return "flat";
        case ImageSet::c_tr: return "C_tr";
        case ImageSet::c_ts: return "C_ts";
        case ImageSet::s_tr: return "S_tr";
        case ImageSet::s_ts: return "S_ts";
        case ImageSet::f: return "F";
    }
    return "?";
}

ImageSet parse_image_set(std::string_view s)
{
    for (auto v : kAllSets) {
        if (s == to_string(v)) return v;
    }
    fail(Errc::format, "unknown image set '" + std::string(s) + "'");
}

int SetSizes::of(ImageSet s) const
{
    switch (s) {
        case ImageSet::flat: return flat;
        case ImageSet::c_tr: return c_tr;
        case ImageSet::c_ts: return c_ts;
        case ImageSet::s_tr: return s_tr;
        case ImageSet::s_ts: return s_ts;
        case ImageSet::f: return f;
    }
    return 0;
}

void ExperimentPlan::validate() const
{
    if (width < blocks.block || height < blocks.block) {
        fail(Errc::plan, "image size " + std::to_string(width) + "x" + std::to_string(height) +
                             " is smaller than the block size");
    }
    if (models.empty()) fail(Errc::plan, "plan declares no camera models");
    std::set<std::string> model_ids;
    for (const auto& m : models) {
        if (!model_ids.insert(m.model_id).second) fail(Errc::plan, "duplicate model id '" + m.model_id + "'");
        if (m.quant_table_scale < 1.0) fail(Errc::plan, "model " + m.model_id + ": quant scale must be >= 1");
    }
    std::set<std::string> device_ids;
    for (const auto& d : devices) {
        if (!device_ids.insert(d.device_id).second) fail(Errc::plan, "duplicate device id '" + d.device_id + "'");
        if (!model_ids.contains(d.model_id)) {
            fail(Errc::plan, "device " + d.device_id + " refers to unknown model '" + d.model_id + "'");
        }
        if (d.sigma_f < 0.0 || d.noise_std < 0.0) fail(Errc::plan, "device " + d.device_id + ": negative noise level");
    }
    for (const auto& m : models) primary_device(m.model_id);
    if (models.size() < 2) fail(Errc::plan, "at least two camera models are needed for the other class");
    for (auto s : kAllSets) {
        if (sets.of(s) < 1) fail(Errc::plan, "set " + std::string(to_string(s)) + " must hold at least one image");
    }
    if (blocks.target < 1 || blocks.other < 1 || pair_blocks < 1 || eval_blocks < 1) {
        fail(Errc::plan, "block counts must be positive");
    }
    for (int q : qualities) {
        if (q < 1 || q > 100) fail(Errc::plan, "JPEG quality " + std::to_string(q) + " outside [1,100]");
    }
    for (int s : forgery_sizes) {
        if (s < 1 || s > width || s > height) fail(Errc::plan, "forgery size " + std::to_string(s) + " does not fit");
    }
    if (stride < 1 || sigma0 <= 0.0 || cnn_epochs < 0 || fusion_epochs < 0 || cnn_width < 1 || cnn_fc < 1) {
        fail(Errc::plan, "stride, sigma0, widths and epoch counts must be positive");
    }
}

const CameraModelSpec& ExperimentPlan::model(const std::string& model_id) const
{
    for (const auto& m : models) {
        if (m.model_id == model_id) return m;
    }
    fail(Errc::plan, "unknown model '" + model_id + "'");
}

const DevicePlan& ExperimentPlan::device(const std::string& device_id) const
{
    for (const auto& d : devices) {
        if (d.device_id == device_id) return d;
    }
    fail(Errc::plan, "unknown device '" + device_id + "'");
}

const DevicePlan& ExperimentPlan::primary_device(const std::string& model_id) const
{
    for (const auto& d : devices) {
        if (d.model_id == model_id && d.primary) return d;
    }
    fail(Errc::plan, "model " + model_id + " has no primary device");
}

std::vector<const DevicePlan*> ExperimentPlan::secondary_devices(const std::string& model_id) const
{
    std::vector<const DevicePlan*> out;
    for (const auto& d : devices) {
        if (d.model_id == model_id && !d.primary) out.push_back(&d);
    }
    return out;
}

int ExperimentPlan::set_size(const DevicePlan& dev, ImageSet set) const
{
    if (!dev.primary && set != ImageSet::flat && set != ImageSet::s_ts) return 0;
    return sets.of(set);
}

std::uint64_t ExperimentPlan::device_seed(const std::string& device_id) const
{
    return derive_seed(seed, "device:" + device_id);
}

namespace {

std::vector<CameraModelSpec> default_models()
{
    return {
        {"M1", CfaLayout::rggb, DemosaicMethod::bilinear, 2.0, 0.0},
        {"M2", CfaLayout::rggb, DemosaicMethod::smooth_hue, 2.0, 0.6},
        {"M3", CfaLayout::rggb, DemosaicMethod::gradient_corrected, 2.0, 0.3},
    };
}

std::vector<DevicePlan> default_devices(const std::vector<CameraModelSpec>& models)
{
    std::vector<DevicePlan> out;
    for (const auto& m : models) {
        out.push_back({m.model_id + "-1", m.model_id, true, 0.0035, 2.0});
        out.push_back({m.model_id + "-2", m.model_id, false, 0.0035, 2.0});
    }
    return out;
}

}  // namespace

ExperimentPlan desk_plan()
{
    ExperimentPlan p;
    p.models = default_models();
    p.devices = default_devices(p.models);
    return p;
}

ExperimentPlan full_plan()
{
    ExperimentPlan p = desk_plan();
    p.profile = "full";
    p.sets = SetSizes{50, 80, 20, 40, 10, 10};
    p.blocks = SamplingCounts{96, 500, 50};
    p.pair_blocks = 100;
    p.eval_blocks = 100;
    p.cnn_width = 16;
    p.cnn_fc = 128;
    return p;
}

ExperimentPlan profile_plan(std::string_view profile)
{
    if (profile == "desk") return desk_plan();
    if (profile == "full") return full_plan();
    fail(Errc::usage, "unknown profile '" + std::string(profile) + "' (expected desk or full)");
}

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <class T>
T number(const std::string& key, const std::string& v)
{
    T out{};
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) fail(Errc::plan, "plan key '" + key + "': cannot parse '" + v + "'");
    return out;
}

std::vector<int> int_list(const std::string& key, const std::string& v)
{
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(number<int>(key, trim(item)));
    if (out.empty()) fail(Errc::plan, "plan key '" + key + "' needs at least one value");
    return out;
}

std::vector<std::string> words(const std::string& v)
{
    std::stringstream ss(v);
    std::vector<std::string> out;
    std::string w;
    while (ss >> w) out.push_back(w);
    return out;
}

}  // namespace

ExperimentPlan parse_plan(std::string_view text, ExperimentPlan p)
{
    std::vector<CameraModelSpec> models;
    std::vector<DevicePlan> devices;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(Errc::plan, "plan line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string val = trim(std::string_view(line).substr(eq + 1));

        if (key.starts_with("model.")) {
            const auto w = words(val);
            if (w.size() != 4) fail(Errc::plan, "plan key '" + key + "': expected <demosaic> <cfa> <quant> <sharpen>");
            models.push_back({key.substr(6), parse_cfa(w[1]), parse_demosaic(w[0]), number<double>(key, w[2]),
                              number<double>(key, w[3])});
        } else if (key.starts_with("device.")) {
            const auto w = words(val);
            if (w.size() != 4 || (w[1] != "primary" && w[1] != "secondary")) {
                fail(Errc::plan, "plan key '" + key + "': expected <model> primary|secondary <sigma_f> <noise>");
            }
            devices.push_back({key.substr(7), w[0], w[1] == "primary", number<double>(key, w[2]),
                               number<double>(key, w[3])});
        } else if (key == "seed") {
            p.seed = number<std::uint64_t>(key, val);
        } else if (key == "width") {
            p.width = number<int>(key, val);
        } else if (key == "height") {
            p.height = number<int>(key, val);
        } else if (key == "sets.flat") {
            p.sets.flat = number<int>(key, val);
        } else if (key == "sets.C_tr") {
            p.sets.c_tr = number<int>(key, val);
        } else if (key == "sets.C_ts") {
            p.sets.c_ts = number<int>(key, val);
        } else if (key == "sets.S_tr") {
            p.sets.s_tr = number<int>(key, val);
        } else if (key == "sets.S_ts") {
            p.sets.s_ts = number<int>(key, val);
        } else if (key == "sets.F") {
            p.sets.f = number<int>(key, val);
        } else if (key == "blocks.size") {
            p.blocks.block = number<int>(key, val);
        } else if (key == "blocks.target") {
            p.blocks.target = number<int>(key, val);
        } else if (key == "blocks.other") {
            p.blocks.other = number<int>(key, val);
        } else if (key == "pair_blocks") {
            p.pair_blocks = number<int>(key, val);
        } else if (key == "eval_blocks") {
            p.eval_blocks = number<int>(key, val);
        } else if (key == "qualities") {
            p.qualities = int_list(key, val);
        } else if (key == "forgery_sizes") {
            p.forgery_sizes = int_list(key, val);
        } else if (key == "cnn.width") {
            p.cnn_width = number<int>(key, val);
        } else if (key == "cnn.fc") {
            p.cnn_fc = number<int>(key, val);
        } else if (key == "cnn.epochs") {
            p.cnn_epochs = number<int>(key, val);
        } else if (key == "cnn.batch") {
            p.cnn_batch = number<int>(key, val);
        } else if (key == "cnn.lr") {
            p.cnn_lr = number<double>(key, val);
        } else if (key == "cnn.momentum") {
            p.cnn_momentum = number<double>(key, val);
        } else if (key == "fusion.epochs") {
            p.fusion_epochs = number<int>(key, val);
        } else if (key == "fusion.batch") {
            p.fusion_batch = number<int>(key, val);
        } else if (key == "fusion.lr") {
            p.fusion_lr = number<double>(key, val);
        } else if (key == "stride") {
            p.stride = number<int>(key, val);
        } else if (key == "sigma0") {
            p.sigma0 = number<double>(key, val);
        } else if (key == "pce_gate") {
            p.pce_gate = number<double>(key, val);
        } else if (key == "aggregation") {
            if (val != "mean" && val != "max") fail(Errc::plan, "aggregation must be mean or max");
            p.aggregation = val == "mean" ? Aggregation::mean : Aggregation::max;
        } else {
            fail(Errc::plan, "plan line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    const bool new_models = !models.empty();
    if (new_models) p.models = std::move(models);
    if (!devices.empty()) {
        p.devices = std::move(devices);
    } else if (new_models) {
        p.devices = default_devices(p.models);
    }
    p.validate();
    return p;
}

ExperimentPlan load_plan(const std::filesystem::path& path, ExperimentPlan base)
{
    std::ifstream in(path);
    if (!in) fail(Errc::plan, "cannot read plan file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_plan(ss.str(), std::move(base));
}

std::string format_plan(const ExperimentPlan& p)
{
    std::ostringstream os;
    os.precision(17);
    os << "# profile " << p.profile << "\nseed=" << p.seed << "\nwidth=" << p.width << "\nheight=" << p.height << "\n";
    for (const auto& m : p.models) {
        os << "model." << m.model_id << "=" << to_string(m.demosaic) << " " << to_string(m.cfa) << " "
           << m.quant_table_scale << " " << m.sharpen_amount << "\n";
    }
    for (const auto& d : p.devices) {
        os << "device." << d.device_id << "=" << d.model_id << " " << (d.primary ? "primary" : "secondary") << " "
           << d.sigma_f << " " << d.noise_std << "\n";
    }
    os << "sets.flat=" << p.sets.flat << "\nsets.C_tr=" << p.sets.c_tr << "\nsets.C_ts=" << p.sets.c_ts
       << "\nsets.S_tr=" << p.sets.s_tr << "\nsets.S_ts=" << p.sets.s_ts << "\nsets.F=" << p.sets.f
       << "\nblocks.size=" << p.blocks.block << "\nblocks.target=" << p.blocks.target
       << "\nblocks.other=" << p.blocks.other << "\npair_blocks=" << p.pair_blocks
       << "\neval_blocks=" << p.eval_blocks << "\nqualities=";
    for (std::size_t i = 0; i < p.qualities.size(); ++i) os << (i ? "," : "") << p.qualities[i];
    os << "\nforgery_sizes=";
    for (std::size_t i = 0; i < p.forgery_sizes.size(); ++i) os << (i ? "," : "") << p.forgery_sizes[i];
    os << "\ncnn.width=" << p.cnn_width << "\ncnn.fc=" << p.cnn_fc << "\ncnn.epochs=" << p.cnn_epochs
       << "\ncnn.batch=" << p.cnn_batch << "\ncnn.lr=" << p.cnn_lr << "\ncnn.momentum=" << p.cnn_momentum
       << "\nfusion.epochs=" << p.fusion_epochs << "\nfusion.batch=" << p.fusion_batch
       << "\nfusion.lr=" << p.fusion_lr << "\nstride=" << p.stride << "\nsigma0=" << p.sigma0
       << "\npce_gate=" << p.pce_gate
       << "\naggregation=" << (p.aggregation == Aggregation::mean ? "mean" : "max") << "\n";
    return os.str();
}

}  // namespace camfuse

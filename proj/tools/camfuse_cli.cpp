#include "camfuse/bench.hpp"
#include "camfuse/common.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>

namespace {

using namespace camfuse;

struct RunConfig {
    std::string profile = "desk";
    std::string plan_file;
    std::string data;
    std::string store = "store";
    std::string out;
    std::optional<std::uint64_t> seed;
    int jobs = 0;
    std::optional<int> stride;
    std::optional<double> sigma0;
    std::optional<int> epochs;

    // detect
    std::string image;
    std::string model;
    std::string device;
    std::string truth;
    bool prnu_only = false;
};

enum Exit { ok = 0, usage = 2, dependency = 3, data = 4, invariant = 5 };

int exit_code(Errc code)
{
    switch (code) {
    case Errc::usage:
    case Errc::plan:
    case Errc::argument:
        return usage;
    case Errc::dependency:
        return dependency;
    case Errc::invariant:
        return invariant;
    default:
        return data;
    }
}

void report_error(std::string_view kind, int code, const std::string& message)
{
    std::cerr << "error kind=" << kind << " exit=" << code << " message=" << nlohmann::json(message).dump() << "\n";
}

void setup_logging()
{
    auto logger = spdlog::stderr_color_mt("camfuse");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("%H:%M:%S %^%l%$ %v");
    spdlog::set_level(spdlog::level::info);
    if (const char* level = std::getenv("CAMFUSE_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

ExperimentPlan resolve_plan(const RunConfig& cfg)
{
    ExperimentPlan plan = profile_plan(cfg.profile);
    if (!cfg.plan_file.empty()) plan = load_plan(cfg.plan_file, plan);
    if (cfg.seed) plan.seed = *cfg.seed;
    if (cfg.stride) plan.stride = *cfg.stride;
    if (cfg.sigma0) plan.sigma0 = *cfg.sigma0;
    plan.validate();
    return plan;
}

std::unique_ptr<ImageSource> open_source(const RunConfig& cfg, const ExperimentPlan& plan)
{
    if (cfg.data.empty()) return std::make_unique<SimulatedSource>(plan);
    return std::make_unique<ManifestSource>(cfg.data);
}

void log_report(std::string_view stage, const StageReport& report)
{
    for (const auto& [key, value] : report.values) spdlog::info("{} {} = {}", stage, key, value);
}

void require_out(const RunConfig& cfg, std::string_view command)
{
    if (cfg.out.empty()) fail(Errc::usage, std::string(command) + " needs --out");
}

int cmd_simulate(const RunConfig& cfg)
{
    require_out(cfg, "simulate");
    SimulatedSource source(resolve_plan(cfg));
    write_dataset(source, cfg.out);
    spdlog::info("wrote {} images to {}", source.records().size(), cfg.out);
    return ok;
}

int cmd_fingerprint(const RunConfig& cfg)
{
    const auto plan = resolve_plan(cfg);
    log_report("fingerprint", stage_fingerprints(plan, *open_source(cfg, plan), ArtifactStore(cfg.store)));
    return ok;
}

int cmd_train_cmi(const RunConfig& cfg)
{
    auto plan = resolve_plan(cfg);
    if (cfg.epochs) plan.cnn_epochs = *cfg.epochs;
    const auto report = stage_train_cmi(plan, *open_source(cfg, plan), ArtifactStore(cfg.store),
                                        [](const std::string& msg) { spdlog::debug("{}", msg); });
    log_report("train-cmi", report);
    return ok;
}

int cmd_train_fusion(const RunConfig& cfg)
{
    auto plan = resolve_plan(cfg);
    if (cfg.epochs) plan.fusion_epochs = *cfg.epochs;
    log_report("train-fusion", stage_train_fusion(plan, *open_source(cfg, plan), ArtifactStore(cfg.store)));
    return ok;
}

int cmd_calibrate(const RunConfig& cfg)
{
    const auto plan = resolve_plan(cfg);
    log_report("calibrate", stage_calibrate(plan, *open_source(cfg, plan), ArtifactStore(cfg.store)));
    return ok;
}

int cmd_detect(const RunConfig& cfg)
{
    require_out(cfg, "detect");
    const auto plan = resolve_plan(cfg);
    const ArtifactStore store(cfg.store);
    plan.model(cfg.model);
    const std::string device = cfg.device.empty() ? plan.primary_device(cfg.model).device_id : cfg.device;
    const auto fusion_stem = cfg.prnu_only ? store.baseline(cfg.model) : store.fusion(cfg.model);
    auto with = [](std::filesystem::path p, const char* ext) { return p += ext; };
    store.require({store.fingerprint(device), with(store.cmi(cfg.model), ".nnet"), with(fusion_stem, ".nnet"),
                   store.calibration(cfg.model, cfg.prnu_only)});

    const RgbImage image = read_rgb(cfg.image);
    const Fingerprint fp = load_fingerprint(store.fingerprint(device));
    const CmiBundle cmi = load_bundle(store.cmi(cfg.model));
    const FusionModel fusion = load_fusion(fusion_stem);
    const double tau = load_calibration(store.calibration(cfg.model, cfg.prnu_only)).tau;
    std::optional<BinaryMask> truth;
    if (!cfg.truth.empty()) truth = read_mask(cfg.truth);

    MapOptions opt;
    opt.window = cmi.block;
    opt.stride = plan.stride;
    opt.sigma0 = plan.sigma0;
    opt.aggregation = plan.aggregation;
    opt.prnu_only = cfg.prnu_only;
    const ProbabilityMap map = sliding_map(image, fp, cmi, fusion, opt);
    const BinaryMap binary = binarize(map, tau, opening_radius_for(image.width()));

    const std::filesystem::path out(cfg.out);
    write_map(out / "map.pgm", out / "map.txt", map, tau);
    write_mask(out / "binary.pgm", binary);

    nlohmann::json metrics = {
        {"image", cfg.image},
        {"model", cfg.model},
        {"device", device},
        {"method", cfg.prnu_only ? kPrnuOnly : kFusion},
        {"tau", tau},
        {"positive_fraction", static_cast<double>(binary.count()) / static_cast<double>(binary.size())},
    };
    if (truth) {
        const FScore f = f_score(binary, *truth);
        metrics["f_score"] = f.value;
        metrics["tp"] = f.counts.tp;
        metrics["fp"] = f.counts.fp;
        metrics["fn"] = f.counts.fn;
        metrics["tn"] = f.counts.tn;
    }
    write_file_atomic(out / "metrics.jsonl", [&](std::ostream& os) { os << metrics.dump() << "\n"; });
    std::cout << metrics.dump() << "\n";
    return ok;
}

int cmd_bench(const RunConfig& cfg)
{
    require_out(cfg, "bench");
    auto plan = resolve_plan(cfg);
    if (cfg.epochs) plan.cnn_epochs = *cfg.epochs;
    const auto source = open_source(cfg, plan);
    const auto tables = run_bench(plan, *source, ArtifactStore(cfg.store), cfg.out,
                                  [](const std::string& msg) { spdlog::info("{}", msg); });
    std::cout << summary_report(plan, tables);
    return ok;
}

void add_common(CLI::App* sub, RunConfig& cfg)
{
    sub->add_option("--profile", cfg.profile, "Plan profile (desk or full)")->check(CLI::IsMember({"desk", "full"}));
    sub->add_option("--plan", cfg.plan_file, "Plan file (key=value); flags override it")->check(CLI::ExistingFile);
    sub->add_option("--seed", cfg.seed, "Root seed for every stage");
    sub->add_option("--jobs", cfg.jobs, "Worker threads (default: logical cores)")->check(CLI::NonNegativeNumber);
    sub->add_option("--stride", cfg.stride, "Sliding-window stride in pixels")->check(CLI::PositiveNumber);
    sub->add_option("--sigma0", cfg.sigma0, "Denoiser noise level")->check(CLI::PositiveNumber);
}

void add_data(CLI::App* sub, RunConfig& cfg)
{
    sub->add_option("--data", cfg.data, "Dataset directory with manifest.tsv (default: simulate from the plan)");
}

void add_store(CLI::App* sub, RunConfig& cfg)
{
    sub->add_option("--store", cfg.store, "Artifact store directory")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv)
{
    setup_logging();
    RunConfig cfg;
    CLI::App app{"Camera-trace fusion for image source verification and tamper localization"};
    app.require_subcommand(1);

    auto* simulate = app.add_subcommand("simulate", "Write the simulated dataset and its manifest");
    add_common(simulate, cfg);
    simulate->add_option("--out", cfg.out, "Dataset directory")->required();

    auto* fingerprint = app.add_subcommand("fingerprint", "Estimate a fingerprint per device from flat images");
    auto* train_cmi = app.add_subcommand("train-cmi", "Train one camera-model network per model");
    auto* train_fusion = app.add_subcommand("train-fusion", "Train the fusion network and the PRNU-only baseline");
    auto* calibrate = app.add_subcommand("calibrate", "Pick the map threshold per model on forged F images");
    auto* bench = app.add_subcommand("bench", "Run missing stages and all experiments");
    for (auto* sub : {fingerprint, train_cmi, train_fusion, calibrate, bench}) {
        add_common(sub, cfg);
        add_data(sub, cfg);
        add_store(sub, cfg);
    }
    train_cmi->add_option("--epochs", cfg.epochs, "Training epochs")->check(CLI::PositiveNumber);
    train_fusion->add_option("--epochs", cfg.epochs, "Training epochs")->check(CLI::PositiveNumber);
    bench->add_option("--epochs", cfg.epochs, "CNN training epochs")->check(CLI::PositiveNumber);
    bench->add_option("--out", cfg.out, "Report directory")->required();

    auto* detect = app.add_subcommand("detect", "Tamper map of one image");
    add_common(detect, cfg);
    add_store(detect, cfg);
    detect->add_option("--image", cfg.image, "Image to check (PPM)")->required()->check(CLI::ExistingFile);
    detect->add_option("--model", cfg.model, "Claimed camera model")->required();
    detect->add_option("--device", cfg.device, "Claimed device (default: the model's primary device)");
    detect->add_option("--truth", cfg.truth, "Ground-truth mask (PGM) for scoring")->check(CLI::ExistingFile);
    detect->add_flag("--prnu-only", cfg.prnu_only, "Use the PRNU-only baseline");
    detect->add_option("--out", cfg.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report_error("usage", usage, e.what());
        return usage;
    }

    set_default_jobs(cfg.jobs);
    try {
        if (*simulate) return cmd_simulate(cfg);
        if (*fingerprint) return cmd_fingerprint(cfg);
        if (*train_cmi) return cmd_train_cmi(cfg);
        if (*train_fusion) return cmd_train_fusion(cfg);
        if (*calibrate) return cmd_calibrate(cfg);
        if (*detect) return cmd_detect(cfg);
        if (*bench) return cmd_bench(cfg);
    } catch (const Error& e) {
        const int code = exit_code(e.code());
        report_error(to_string(e.code()), code, e.what());
        return code;
    } catch (const std::exception& e) {
        report_error("internal", invariant, e.what());
        return invariant;
    }
    return usage;
}

#include "camfuse/localize.hpp"

#include "camfuse/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace camfuse {

std::vector<BlockRef> window_grid(int width, int height, int window, int stride)
{
    if (window < 1 || stride < 1) fail(Errc::argument, "window and stride must be positive");
    if (width < window || height < window) {
        fail(Errc::dimension, "image " + std::to_string(width) + "x" + std::to_string(height) +
                                  " is smaller than the " + std::to_string(window) + " px window");
    }
    std::vector<BlockRef> out;
    for (int r = 0; r + window <= height; r += stride) {
        for (int c = 0; c + window <= width; c += stride) out.push_back({r, c, 0, window});
    }
    return out;
}

ProbabilityMap accumulate_map(int width, int height, int window, int stride, std::span<const double> window_scores,
                              Aggregation aggregation)
{
    const auto grid = window_grid(width, height, window, stride);
    if (grid.size() != window_scores.size()) {
        fail(Errc::argument, "expected " + std::to_string(grid.size()) + " window scores, got " +
                                 std::to_string(window_scores.size()));
    }
    ProbabilityMap map;
    map.width = width;
    map.height = height;
    map.window = window;
    map.stride = stride;
    map.aggregation = aggregation;
    const std::size_t n = static_cast<std::size_t>(width) * height;
    map.scores.assign(n, aggregation == Aggregation::max ? -std::numeric_limits<double>::infinity() : 0.0);
    map.coverage.assign(n, 0);

    int last_row = 0;
    int last_col = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double s = window_scores[k];
        if (!std::isfinite(s)) fail(Errc::argument, "window score is not finite");
        const auto& b = grid[k];
        last_row = std::max(last_row, b.row + window - 1);
        last_col = std::max(last_col, b.col + window - 1);
        for (int r = b.row; r < b.row + window; ++r) {
            for (int c = b.col; c < b.col + window; ++c) {
                const std::size_t i = static_cast<std::size_t>(r) * width + c;
                if (aggregation == Aggregation::max) {
                    map.scores[i] = std::max(map.scores[i], s);
                } else {
                    map.scores[i] += s;
                }
                ++map.coverage[i];
            }
        }
    }
    if (aggregation == Aggregation::mean) {
        for (std::size_t i = 0; i < n; ++i) {
            if (map.coverage[i] > 0) map.scores[i] /= map.coverage[i];
        }
    }
    // Covered pixels form the rectangle [0,last_row] x [0,last_col], so the
    // nearest covered pixel is found by clamping.
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * width + c;
            if (map.coverage[i] > 0) continue;
            map.scores[i] = map(std::min(r, last_row), std::min(c, last_col));
            map.border_filled = true;
        }
    }
    return map;
}

std::vector<double> window_scores(const RgbImage& image, const Fingerprint& fp, const CmiBundle& cmi,
                                  const FusionModel& fusion, const MapOptions& options)
{
    if (fp.width() != image.width() || fp.height() != image.height()) {
        fail(Errc::dimension, "fingerprint " + std::to_string(fp.width()) + "x" + std::to_string(fp.height()) +
                                  " is not aligned with image " + std::to_string(image.width()) + "x" +
                                  std::to_string(image.height()));
    }
    const auto grid = window_grid(image.width(), image.height(), options.window, options.stride);
    const GrayImage gray = to_gray(image);
    const NoiseResidual residual = extract_residual(gray, options.sigma0);
    std::vector<double> out(grid.size());
    parallel_for(grid.size(), [&](std::size_t k) {
        const auto& ref = grid[k];
        const double rho = correlate(crop(residual, ref), crop(gray, ref), crop(fp, ref)).rho;
        const double phi = options.prnu_only ? 0.5 : cmi.phi(image, ref);
        out[k] = theta(fusion, rho, phi);
    });
    return out;
}

ProbabilityMap sliding_map(const RgbImage& image, const Fingerprint& fp, const CmiBundle& cmi,
                           const FusionModel& fusion, const MapOptions& options)
{
    const auto scores = window_scores(image, fp, cmi, fusion, options);
    return accumulate_map(image.width(), image.height(), options.window, options.stride, scores, options.aggregation);
}

void write_map(const std::filesystem::path& raster, const std::filesystem::path& sidecar, const ProbabilityMap& map,
               double tau)
{
    GrayImage img(map.width, map.height);
    auto px = img.values();
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = std::clamp(map.scores[i], 0.0, 1.0) * 255.0;
    write_image(raster, img);
    write_file_atomic(sidecar, [&](std::ostream& os) {
        os << "width=" << map.width << "\nheight=" << map.height << "\nwindow=" << map.window
           << "\nstride=" << map.stride << "\naggregation=" << (map.aggregation == Aggregation::mean ? "mean" : "max")
           << "\ntau=" << tau << "\ncoverage_policy=nearest-covered"
           << "\nborder_filled=" << (map.border_filled ? "true" : "false") << "\n";
    });
}

int opening_radius_for(int width)
{
    return std::max(1, static_cast<int>(std::lround(20.0 * width / 3000.0)));
}

BinaryMap threshold(const ProbabilityMap& map, double tau)
{
    BinaryMap out(map.width, map.height);
    auto bits = out.bits();
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = map.scores[i] >= tau ? 1 : 0;
    return out;
}

namespace {

std::vector<std::pair<int, int>> disc_offsets(int radius)
{
    std::vector<std::pair<int, int>> out;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dy * dy + dx * dx <= radius * radius) out.emplace_back(dy, dx);
        }
    }
    return out;
}

}  // namespace

BinaryMap erode_disc(const BinaryMap& in, int radius)
{
    if (radius < 0) fail(Errc::argument, "disc radius must be non-negative");
    const auto disc = disc_offsets(radius);
    const int w = in.width();
    const int h = in.height();
    BinaryMap out(w, h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!in(r, c)) continue;
            bool keep = true;
            for (const auto& [dy, dx] : disc) {
                const int y = r + dy;
                const int x = c + dx;
                if (y < 0 || y >= h || x < 0 || x >= w) continue;
                if (!in(y, x)) {
                    keep = false;
                    break;
                }
            }
            out(r, c) = keep ? 1 : 0;
        }
    }
    return out;
}

BinaryMap dilate_disc(const BinaryMap& in, int radius)
{
    if (radius < 0) fail(Errc::argument, "disc radius must be non-negative");
    const auto disc = disc_offsets(radius);
    const int w = in.width();
    const int h = in.height();
    BinaryMap out(w, h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!in(r, c)) continue;
            for (const auto& [dy, dx] : disc) {
                const int y = r + dy;
                const int x = c + dx;
                if (y >= 0 && y < h && x >= 0 && x < w) out(y, x) = 1;
            }
        }
    }
    return out;
}

BinaryMap open_disc(const BinaryMap& in, int radius) { return dilate_disc(erode_disc(in, radius), radius); }

BinaryMap binarize(const ProbabilityMap& map, double tau, int radius)
{
    return open_disc(threshold(map, tau), radius);
}

double f_score(const ConfusionCounts& c)
{
    const double denom = 2.0 * static_cast<double>(c.tp) + static_cast<double>(c.fp) + static_cast<double>(c.fn);
    return denom == 0.0 ? 1.0 : 2.0 * static_cast<double>(c.tp) / denom;
}

FScore f_score(const BinaryMap& pred, const BinaryMask& truth)
{
    if (pred.width() != truth.width() || pred.height() != truth.height()) {
        fail(Errc::dimension, "prediction " + std::to_string(pred.width()) + "x" + std::to_string(pred.height()) +
                                  " does not match truth " + std::to_string(truth.width()) + "x" +
                                  std::to_string(truth.height()));
    }
    FScore out;
    auto p = pred.bits();
    auto t = truth.bits();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool pp = p[i] != 0;
        const bool tt = t[i] != 0;
        if (pp && tt) {
            ++out.counts.tp;
        } else if (pp) {
            ++out.counts.fp;
        } else if (tt) {
            ++out.counts.fn;
        } else {
            ++out.counts.tn;
        }
    }
    out.value = f_score(out.counts);
    return out;
}

std::size_t ThresholdCalibration::best_index() const
{
    const auto it = std::find(thresholds.begin(), thresholds.end(), tau);
    return static_cast<std::size_t>(it - thresholds.begin());
}

ThresholdCalibration calibrate_threshold(std::span<const ProbabilityMap> maps, std::span<const BinaryMask> truths,
                                         int radius, int steps)
{
    if (maps.empty()) fail(Errc::argument, "calibration needs at least one forged image");
    if (maps.size() != truths.size()) fail(Errc::argument, "every map needs a truth mask");
    if (steps < 2) fail(Errc::argument, "calibration needs at least two thresholds");

    ThresholdCalibration cal;
    cal.thresholds.resize(steps);
    for (int i = 0; i < steps; ++i) cal.thresholds[i] = static_cast<double>(i) / (steps - 1);
    std::vector<std::vector<double>> per_map(maps.size(), std::vector<double>(steps));
    parallel_for(maps.size(), [&](std::size_t m) {
        for (int i = 0; i < steps; ++i) {
            per_map[m][i] = f_score(binarize(maps[m], cal.thresholds[i], radius), truths[m]).value;
        }
    });
    cal.mean_f.assign(steps, 0.0);
    for (int i = 0; i < steps; ++i) {
        for (const auto& f : per_map) cal.mean_f[i] += f[i];
        cal.mean_f[i] /= static_cast<double>(maps.size());
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < cal.mean_f.size(); ++i) {
        if (cal.mean_f[i] > cal.mean_f[best]) best = i;
    }
    cal.tau = cal.thresholds[best];
    return cal;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels)
{
    if (scores.size() != labels.size()) fail(Errc::argument, "scores and labels differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (double s : scores) {
        if (std::isnan(s)) fail(Errc::argument, "score is NaN");
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                rank_sum += avg_rank;
                ++positives;
            }
        }
        i = j;
    }
    const std::size_t negatives = scores.size() - positives;
    if (positives == 0 || negatives == 0) fail(Errc::argument, "AUC needs both positive and negative samples");
    const double np = static_cast<double>(positives);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(negatives));
}

}  // namespace camfuse

#include "camfuse/common.hpp"
#include "camfuse/localize.hpp"
#include "support.hpp"

#include <doctest.h>

#include <random>

using namespace camfuse;

namespace {

BinaryMap random_map(int w, int h, std::uint64_t seed, double density)
{
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution b(density);
    BinaryMap m(w, h);
    for (auto& v : m.bits()) v = b(rng) ? 1 : 0;
    return m;
}

ProbabilityMap constant_map(int w, int h, double v)
{
    ProbabilityMap m;
    m.width = w;
    m.height = h;
    m.scores.assign(static_cast<std::size_t>(w) * h, v);
    m.coverage.assign(m.scores.size(), 1);
    return m;
}

}  // namespace

TEST_CASE("f-score formula")
{
    CHECK(f_score(ConfusionCounts{5, 5, 5, 0}) == 0.5);
    CHECK(f_score(ConfusionCounts{0, 0, 0, 100}) == 1.0);
    CHECK(f_score(ConfusionCounts{0, 3, 0, 0}) == 0.0);

    BinaryMask truth(10, 10);
    for (int r = 2; r < 6; ++r) truth(r, 3) = 1;
    const FScore perfect = f_score(truth, truth);
    CHECK(perfect.value == 1.0);
    CHECK(perfect.counts.tp == 4);
    CHECK(perfect.counts.tn == 96);
    CHECK_THROWS_AS(f_score(BinaryMask(10, 9), truth), Error);
}

TEST_CASE("window grid and mean aggregation")
{
    const auto grid = window_grid(10, 8, 4, 3);
    CHECK(grid.size() == 3 * 2);
    CHECK(grid.back() == BlockRef{3, 6, 0, 4});
    CHECK_THROWS_AS(window_grid(3, 8, 4, 1), Error);

    std::vector<double> scores(grid.size());
    for (std::size_t k = 0; k < scores.size(); ++k) scores[k] = 0.1 * static_cast<double>(k + 1);
    const ProbabilityMap map = accumulate_map(10, 8, 4, 3, scores);
    // oracle: average of every window containing the pixel
    for (int r = 0; r < 7; ++r) {
        for (int c = 0; c < 10; ++c) {
            double sum = 0;
            int n = 0;
            for (std::size_t k = 0; k < grid.size(); ++k) {
                const auto& b = grid[k];
                if (r >= b.row && r < b.row + 4 && c >= b.col && c < b.col + 4) {
                    sum += scores[k];
                    ++n;
                }
            }
            if (n) {
                CHECK(map(r, c) == doctest::Approx(sum / n).epsilon(1e-12));
                CHECK(map.coverage[r * 10 + c] == n);
            }
        }
    }
    // row 7 is outside every window and copies row 6
    CHECK(map.border_filled);
    for (int c = 0; c < 10; ++c) CHECK(map(7, c) == map(6, c));

    const ProbabilityMap mx = accumulate_map(10, 8, 4, 3, scores, Aggregation::max);
    CHECK(mx(3, 3) == doctest::Approx(0.5));
}

TEST_CASE("stride equal to window tiles without averaging")
{
    std::vector<double> scores{0.1, 0.2, 0.3, 0.4};
    const ProbabilityMap map = accumulate_map(8, 8, 4, 4, scores);
    CHECK_FALSE(map.border_filled);
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 8; ++c) {
            CHECK(map.coverage[r * 8 + c] == 1);
            CHECK(map(r, c) == scores[(r / 4) * 2 + c / 4]);
        }
    }
    CHECK_THROWS_AS(accumulate_map(8, 8, 4, 4, std::vector<double>{0.1}), Error);
}

TEST_CASE("opening radius scales with width")
{
    CHECK(opening_radius_for(3000) == 20);
    CHECK(opening_radius_for(256) == 2);
    CHECK(opening_radius_for(50) == 1);
}

TEST_CASE("opening is idempotent and removes small blobs")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const BinaryMap m = random_map(40, 30, seed, 0.6);
        for (int radius : {1, 2, 3}) {
            const BinaryMap once = open_disc(m, radius);
            CHECK(open_disc(once, radius) == once);
        }
    }
    BinaryMap blob(30, 30);
    for (int r = -1; r <= 1; ++r) {
        for (int c = -1; c <= 1; ++c) blob(15 + r, 15 + c) = 1;
    }
    CHECK(open_disc(blob, 2).count() == 0);
    const BinaryMap ones(30, 30, 1);
    CHECK(open_disc(ones, 3) == ones);
}

TEST_CASE("threshold boundaries")
{
    ProbabilityMap m = constant_map(4, 4, 0.3);
    m.scores[5] = 1.0;
    CHECK(threshold(m, 0.0).count() == 16);
    CHECK(threshold(m, 1.0).count() == 1);
    CHECK(threshold(m, 0.3).count() == 16);
    CHECK(threshold(m, 0.31).count() == 1);
}

TEST_CASE("calibration on a constant map")
{
    const double c = 0.42;
    std::vector<ProbabilityMap> maps(3, constant_map(20, 20, c));
    std::vector<BinaryMask> truths;
    for (int k = 0; k < 3; ++k) {
        BinaryMask t(20, 20);
        for (int r = 0; r < 5 + k; ++r) {
            for (int col = 0; col < 6; ++col) t(r, col) = 1;
        }
        truths.push_back(t);
    }
    const auto cal = calibrate_threshold(maps, truths, 1);
    CHECK(cal.thresholds.size() == 100);
    CHECK(cal.thresholds[99] == 1.0);
    CHECK(cal.tau <= c);
    CHECK(cal.tau == 0.0);  // flat curve below c, ties go to the lowest threshold
    for (std::size_t i = 0; i < cal.thresholds.size(); ++i) {
        const double expected = cal.thresholds[i] <= c ? cal.mean_f[0] : cal.mean_f[99];
        CHECK(cal.mean_f[i] == expected);
    }
    const auto again = calibrate_threshold(maps, truths, 1);
    CHECK(again.tau == cal.tau);
    CHECK(again.mean_f == cal.mean_f);
    CHECK(cal.thresholds[cal.best_index()] == cal.tau);
}

TEST_CASE("calibration finds an interior optimum")
{
    // tampered square scores 0.7, background 0.2 plus a ramp
    ProbabilityMap m = constant_map(32, 32, 0.2);
    BinaryMask truth(32, 32);
    for (int r = 0; r < 32; ++r) {
        for (int c = 0; c < 32; ++c) {
            m.scores[r * 32 + c] = 0.2 + 0.3 * c / 31.0;
            if (r >= 8 && r < 24 && c >= 4 && c < 20) {
                m.scores[r * 32 + c] = 0.7;
                truth(r, c) = 1;
            }
        }
    }
    const std::vector<ProbabilityMap> maps{m};
    const std::vector<BinaryMask> truths{truth};
    const auto cal = calibrate_threshold(maps, truths, 1);
    CHECK(cal.tau > 0.45);
    CHECK(cal.tau <= 0.7);
    CHECK(cal.mean_f[cal.best_index()] > 0.95);
}

TEST_CASE("roc_auc")
{
    const std::vector<double> sep{0.1, 0.2, 0.8, 0.9};
    const std::vector<int> lab{0, 0, 1, 1};
    CHECK(roc_auc(sep, lab) == 1.0);

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s(20);
        std::vector<int> l(20);
        for (int i = 0; i < 20; ++i) {
            s[i] = std::round(u(rng) * 8.0) / 8.0;  // forces ties
            l[i] = i % 3 == 0 ? 1 : 0;
        }
        CHECK(std::abs(roc_auc(s, l) - testing::auc_oracle(s, l)) < 1e-12);
    }

    std::vector<double> big(20000);
    std::vector<int> labels(20000);
    for (std::size_t i = 0; i < big.size(); ++i) {
        big[i] = u(rng);
        labels[i] = static_cast<int>(rng() % 2);
    }
    CHECK(std::abs(roc_auc(big, labels) - 0.5) < 0.02);

    CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), Error);
    CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), Error);
}

#include "camfuse/camsim.hpp"
#include "camfuse/common.hpp"
#include "camfuse/prnu.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace camfuse;

namespace {

double rms_diff(const RgbImage& a, const RgbImage& b)
{
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = a.samples()[i] - b.samples()[i];
    return testing::rms(d);
}

const CameraModelSpec kPlain{"M", CfaLayout::rggb, DemosaicMethod::bilinear, 1.0, 0.0};

}  // namespace

TEST_CASE("enum names round trip")
{
    for (auto c : {CfaLayout::rggb, CfaLayout::bggr, CfaLayout::grbg, CfaLayout::gbrg}) {
        CHECK(parse_cfa(to_string(c)) == c);
    }
    for (auto d : {DemosaicMethod::bilinear, DemosaicMethod::smooth_hue, DemosaicMethod::gradient_corrected}) {
        CHECK(parse_demosaic(to_string(d)) == d);
    }
    CHECK_THROWS_AS(parse_cfa("XYZW"), Error);
}

TEST_CASE("cfa layouts")
{
    CHECK(cfa_color(CfaLayout::rggb, 0, 0) == 0);
    CHECK(cfa_color(CfaLayout::rggb, 0, 1) == 1);
    CHECK(cfa_color(CfaLayout::rggb, 1, 0) == 1);
    CHECK(cfa_color(CfaLayout::rggb, 1, 1) == 2);
    CHECK(cfa_color(CfaLayout::bggr, 0, 0) == 2);
    CHECK(cfa_color(CfaLayout::grbg, 0, 1) == 0);
    CHECK(cfa_color(CfaLayout::gbrg, 1, 0) == 0);
    CHECK(cfa_color(CfaLayout::rggb, 2, 2) == 0);
}

TEST_CASE("mosaic samples one channel per photosite")
{
    const RgbImage img = testing::random_rgb(6, 4, 1);
    const Plane raw = mosaic(img, CfaLayout::gbrg);
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 6; ++c) CHECK(raw(r, c) == img(r, c, cfa_color(CfaLayout::gbrg, r, c)));
    }
}

TEST_CASE("demosaic keeps the sampled values and is exact on constants")
{
    const RgbImage img = testing::random_rgb(8, 8, 2);
    const RgbImage flat(10, 10, 77.0);
    for (auto method : {DemosaicMethod::bilinear, DemosaicMethod::smooth_hue, DemosaicMethod::gradient_corrected}) {
        const RgbImage out = demosaic(mosaic(img, CfaLayout::rggb), CfaLayout::rggb, method);
        for (int r = 0; r < 8; ++r) {
            for (int c = 0; c < 8; ++c) {
                const int ch = cfa_color(CfaLayout::rggb, r, c);
                CHECK(out(r, c, ch) == doctest::Approx(img(r, c, ch)).epsilon(1e-12));
            }
        }
        const RgbImage f = demosaic(mosaic(flat, CfaLayout::bggr), CfaLayout::bggr, method);
        for (double v : f.samples()) CHECK(v == doctest::Approx(77.0).epsilon(1e-12));
    }
}

TEST_CASE("degenerate pipeline reproduces the flat scene")
{
    const DeviceSpec dev = make_device("D", "M", 64, 64, 3, 0.0, 0.0);
    const SceneSpec scene{SceneKind::flat, 64, 64, 5};
    const RgbImage i0 = render_scene(scene);
    const RgbImage out = capture(scene, dev, kPlain);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out.samples()[i] - i0.samples()[i]) < 1.0);
}

TEST_CASE("capture is deterministic")
{
    const DeviceSpec dev = make_device("D", "M", 48, 48, 3);
    const SceneSpec scene{SceneKind::natural, 48, 48, 9};
    const CameraModelSpec model{"M", CfaLayout::grbg, DemosaicMethod::gradient_corrected, 2.0, 0.5};
    CHECK(capture(scene, dev, model).samples().size() == 48u * 48u * 3u);
    const auto a = capture(scene, dev, model);
    const auto b = capture(scene, dev, model);
    CHECK(std::equal(a.samples().begin(), a.samples().end(), b.samples().begin()));
    for (double v : a.samples()) CHECK(v == std::round(v));
}

TEST_CASE("prnu pattern statistics")
{
    const DeviceSpec dev = make_device("D", "M", 128, 128, 4, 0.02);
    double s = 0.0, ss = 0.0;
    for (double v : dev.prnu_pattern.values()) {
        s += v;
        ss += v * v;
    }
    const double n = static_cast<double>(dev.prnu_pattern.size());
    CHECK(std::abs(s / n) < 1e-12);
    CHECK(std::sqrt(ss / n - (s / n) * (s / n)) == doctest::Approx(0.02).epsilon(1e-9));
}

TEST_CASE("device difference explains the residual difference")
{
    const DeviceSpec a = make_device("A", "M", 128, 128, 10, 0.02, 0.0);
    const DeviceSpec b = make_device("B", "M", 128, 128, 11, 0.02, 0.0);
    const SceneSpec scene{SceneKind::natural, 128, 128, 42};
    const NoiseResidual ra = extract_residual(to_gray(capture(scene, a, kPlain)));
    const NoiseResidual rb = extract_residual(to_gray(capture(scene, b, kPlain)));
    const GrayImage i0 = to_gray(render_scene(scene));
    std::vector<double> dres(ra.size()), dsig(ra.size());
    for (std::size_t i = 0; i < ra.size(); ++i) {
        dres[i] = ra.values()[i] - rb.values()[i];
        dsig[i] = i0.values()[i] * (a.prnu_pattern.values()[i] - b.prnu_pattern.values()[i]);
    }
    CHECK(testing::pearson_oracle(dres, dsig) > 0.0);
}

TEST_CASE("jpeg quality scaling")
{
    const auto& luma = jpeg_luma_base();
    CHECK(luma[0] == 16);
    CHECK(jpeg_chroma_base()[0] == 17);
    const auto q50 = scaled_table(luma, 50);
    CHECK(std::equal(q50.begin(), q50.end(), luma.begin()));
    CHECK(scaled_table(luma, 75)[0] == 8);
    CHECK(scaled_table(luma, 90)[0] == 3);
    for (double v : scaled_table(luma, 100)) CHECK(v == 1);
    CHECK(scaled_table(luma, 1)[0] == 255);
    CHECK(scaled_table(luma, 10)[0] == 80);
    CHECK_THROWS_AS(scaled_table(luma, 0), Error);
    CHECK_THROWS_AS(scaled_table(luma, 101), Error);
}

TEST_CASE("recompression")
{
    const DeviceSpec dev = make_device("D", "M", 100, 84, 3);
    const RgbImage img = capture({SceneKind::natural, 100, 84, 1}, dev, kPlain);
    const RgbImage q100 = recompress(img, 100);
    CHECK(q100.width() == 100);
    CHECK(q100.height() == 84);
    CHECK(rms_diff(q100, img) < 2.0);
    const RgbImage once = recompress(img, 50);
    const RgbImage twice = recompress(once, 50);
    CHECK(rms_diff(twice, once) < rms_diff(once, img));

    QuantTable zero{};
    const RgbImage same = dct_roundtrip(img, zero, zero, false);
    CHECK(rms_diff(same, img) < 1.0);
}

TEST_CASE("make_forgery")
{
    const RgbImage host = testing::random_rgb(64, 48, 1);
    const RgbImage donor = testing::random_rgb(64, 48, 2);
    const Forgery f = make_forgery(host, donor, 20, 10, 30);
    CHECK(f.mask.count() == 400);
    for (int r = 0; r < 48; ++r) {
        for (int c = 0; c < 64; ++c) {
            const bool inside = r >= 10 && r < 30 && c >= 30 && c < 50;
            CHECK(f.mask(r, c) == (inside ? 1 : 0));
            for (int ch = 0; ch < 3; ++ch) CHECK(f.image(r, c, ch) == (inside ? donor : host)(r, c, ch));
        }
    }
    CHECK_THROWS_AS(make_forgery(host, donor, 20, 40, 0), Error);
    CHECK_THROWS_AS(make_forgery(host, testing::random_rgb(32, 32, 3), 8, 30, 40), Error);
}

TEST_CASE("pasted region loses the host fingerprint")
{
    const int w = 128;
    const DeviceSpec host_dev = make_device("H", "M", w, w, 21, 0.02, 1.0);
    const DeviceSpec donor_dev = make_device("O", "M", w, w, 22, 0.02, 1.0);
    std::vector<GrayImage> flats;
    std::vector<NoiseResidual> res;
    for (int i = 0; i < 30; ++i) {
        flats.push_back(to_gray(capture({SceneKind::flat, w, w, static_cast<std::uint64_t>(i)}, host_dev, kPlain)));
        res.push_back(extract_residual(flats.back()));
    }
    const Fingerprint fp = estimate_fingerprint(flats, res, "H");

    const int size = 48;
    int wins = 0;
    const int trials = 50;
    for (int t = 0; t < trials; ++t) {
        const RgbImage host = capture({SceneKind::natural, w, w, 100u + t}, host_dev, kPlain);
        const RgbImage donor = capture({SceneKind::natural, w, w, 300u + t}, donor_dev, kPlain);
        const int row = (t * 7) % (w - 2 * size);
        const BlockRef pasted{row, 0, 0, size};
        const BlockRef clean{row, w - size, 0, size};
        const Forgery f = make_forgery(host, donor, size, pasted.row, pasted.col);
        const GrayImage g = to_gray(f.image);
        const NoiseResidual n = extract_residual(g);
        const double p_pasted = pce(crop(n, pasted), crop(g, pasted), crop(fp, pasted)).pce;
        const double p_clean = pce(crop(n, clean), crop(g, clean), crop(fp, clean)).pce;
        if (p_pasted < p_clean) ++wins;
    }
    CHECK(wins >= trials * 9 / 10);
}

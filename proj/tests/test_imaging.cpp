#include "camfuse/common.hpp"
#include "camfuse/imaging.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>
#include <random>

using namespace camfuse;

namespace {

std::vector<std::uint8_t> bytes_of(std::string header, std::vector<std::uint8_t> payload)
{
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

Errc code_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::invariant;
}

}  // namespace

TEST_CASE("decode minimal P5")
{
    const auto img = decode_netpbm(bytes_of("P5 2 2 255\n", {0, 255, 128, 64}));
    const auto& g = std::get<GrayImage>(img);
    CHECK(g.width() == 2);
    CHECK(g(0, 0) == 0);
    CHECK(g(0, 1) == 255);
    CHECK(g(1, 0) == 128);
    CHECK(g(1, 1) == 64);
}

TEST_CASE("decode minimal P6")
{
    const auto img = decode_netpbm(bytes_of("P6\n2 1\n255\n", {255, 0, 0, 0, 255, 0}));
    const auto& c = std::get<RgbImage>(img);
    CHECK(c(0, 0, 0) == 255);
    CHECK(c(0, 0, 1) == 0);
    CHECK(c(0, 1, 1) == 255);
    CHECK(c(0, 1, 2) == 0);
}

TEST_CASE("netpbm header comments are skipped")
{
    const auto img = decode_netpbm(bytes_of("P5\n# made by hand\n1 1\n255\n", {7}));
    CHECK(std::get<GrayImage>(img)(0, 0) == 7);
}

TEST_CASE("netpbm errors")
{
    CHECK(code_of([] { decode_netpbm(bytes_of("P3 1 1 255\n", {1, 2, 3})); }) == Errc::format);
    CHECK(code_of([] { decode_netpbm(bytes_of("P5 2 2 65535\n", {0, 0})); }) == Errc::format);
    CHECK(code_of([] { decode_netpbm(bytes_of("P5 2 2 255\n", {1, 2, 3})); }) == Errc::truncation);
    CHECK(code_of([] { decode_netpbm(bytes_of("P5 x 2 255\n", {})); }) == Errc::format);
    CHECK(code_of([] { read_image("/nonexistent/camfuse.ppm"); }) == Errc::io);
}

TEST_CASE("write then read is byte identical")
{
    testing::TempDir dir("imaging");
    std::mt19937 rng(3);
    RgbImage rgb(96, 96);
    GrayImage gray(96, 96);
    for (double& v : rgb.samples()) v = static_cast<double>(rng() % 256);
    for (double& v : gray.values()) v = static_cast<double>(rng() % 256);
    write_image(dir.path() / "a.ppm", rgb);
    write_image(dir.path() / "a.pgm", gray);
    const RgbImage rgb2 = read_rgb(dir.path() / "a.ppm");
    const GrayImage gray2 = read_gray(dir.path() / "a.pgm");
    CHECK(encode_netpbm(rgb2) == encode_netpbm(rgb));
    CHECK(encode_netpbm(gray2) == encode_netpbm(gray));

    BinaryMask mask(5, 4);
    mask(1, 2) = 1;
    mask(3, 4) = 1;
    write_mask(dir.path() / "m.pgm", mask);
    CHECK(read_mask(dir.path() / "m.pgm") == mask);
}

TEST_CASE("to_gray uses BT.601 weights")
{
    RgbImage img(3, 1);
    img(0, 0, 0) = img(0, 0, 1) = img(0, 0, 2) = 255;
    img(0, 1, 0) = 255;
    const GrayImage g = to_gray(img);
    CHECK(g(0, 0) == doctest::Approx(255.0).epsilon(1e-12));
    CHECK(g(0, 1) == doctest::Approx(0.299 * 255.0).epsilon(1e-12));
    CHECK(g(0, 1) == doctest::Approx(76.245).epsilon(1e-12));
    CHECK(g(0, 2) == 0.0);
}

TEST_CASE("to_level rounds half up and clamps")
{
    CHECK(to_level(-3.0) == 0);
    CHECK(to_level(0.5) == 1);
    CHECK(to_level(1.49) == 1);
    CHECK(to_level(254.5) == 255);
    CHECK(to_level(300.0) == 255);
}

TEST_CASE("extract_block")
{
    GrayImage ramp(4, 4);
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) ramp(r, c) = 4 * r + c;
    }
    const GrayImage b = extract_block(ramp, {1, 1, 0, 2});
    CHECK(b(0, 0) == 5);
    CHECK(b(0, 1) == 6);
    CHECK(b(1, 0) == 9);
    CHECK(b(1, 1) == 10);

    const GrayImage full = extract_block(ramp, {0, 0, 0, 4});
    CHECK(std::equal(full.values().begin(), full.values().end(), ramp.values().begin()));

    CHECK(code_of([&] { extract_block(ramp, {3, 0, 0, 2}); }) == Errc::bounds);
    CHECK(code_of([&] { extract_block(ramp, {0, -1, 0, 2}); }) == Errc::bounds);
}

TEST_CASE("extract_block matches direct indexing on random refs")
{
    const RgbImage img = testing::random_rgb(512, 512, 11);
    std::mt19937_64 rng(12);
    for (int k = 0; k < 1000; ++k) {
        const int size = 1 + static_cast<int>(rng() % 96);
        const int r = static_cast<int>(rng() % (512 - size + 1));
        const int c = static_cast<int>(rng() % (512 - size + 1));
        const RgbImage b = extract_block(img, {r, c, 0, size});
        bool same = true;
        for (int i = 0; i < size && same; ++i) {
            for (int j = 0; j < size && same; ++j) {
                for (int ch = 0; ch < 3; ++ch) same = same && b(i, j, ch) == img(r + i, c + j, ch);
            }
        }
        REQUIRE(same);
    }
}

TEST_CASE("rgb samples must be in range")
{
    CHECK(code_of([] { RgbImage(1, 1, std::vector<double>{0, 256, 0}); }) == Errc::argument);
    CHECK(code_of([] { RgbImage(2, 1, std::vector<double>{0, 1, 2}); }) == Errc::dimension);
}

#include "camfuse/common.hpp"
#include "camfuse/nnet.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace camfuse;

namespace {

Tensor random_tensor(Shape s, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Tensor t(s);
    for (double& v : t.data) v = n(rng);
    return t;
}

std::vector<LayerSpec> toy_conv_net()
{
    return {conv3x3(3), relu(), maxpool2(), conv3x3(4, 2), relu(), fc(5), relu(), fc(2), softmax()};
}

// Two Gaussian blobs in the plane, one per class.
TensorSamples blobs(int n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.4);
    TensorSamples s;
    for (int i = 0; i < n; ++i) {
        const int label = i % 2;
        const double cx = label ? 1.5 : -1.5;
        s.add(Tensor(Shape{1, 1, 2}, {cx + noise(rng), -cx + noise(rng)}), label);
    }
    return s;
}

double accuracy(const NetModel& m, const TensorSamples& s)
{
    int ok = 0;
    std::vector<double> buf(2);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s.fill(i, buf);
        const Tensor out = forward(m, Tensor(Shape{1, 1, 2}, buf));
        const int pred = out.data.size() == 1 ? (out.data[0] >= 0.5) : (out.data[1] > out.data[0]);
        ok += pred == s.label(i);
    }
    return static_cast<double>(ok) / static_cast<double>(s.size());
}

}  // namespace

TEST_CASE("layer shapes")
{
    const NetModel m = make_model(Shape{12, 12, 2}, toy_conv_net(), 1);
    const auto shapes = m.shapes();
    CHECK(shapes[0] == Shape{12, 12, 3});
    CHECK(shapes[2] == Shape{6, 6, 3});
    CHECK(shapes[3] == Shape{3, 3, 4});
    CHECK(m.output_shape() == Shape{1, 1, 2});
    CHECK(m.parameter_count() == (3 * 2 * 9 + 3) + (4 * 3 * 9 + 4) + (5 * 36 + 5) + (2 * 5 + 2));
    CHECK_THROWS_AS(make_model(Shape{4, 4, 1}, {softmax(), fc(2)}, 1), Error);
    CHECK_THROWS_AS(make_model(Shape{4, 4, 1}, {fc(0), softmax()}, 1), Error);
}

TEST_CASE("zero weights give a uniform softmax")
{
    const NetModel m = zero_model(Shape{8, 8, 3}, toy_conv_net());
    const Tensor out = forward(m, random_tensor(Shape{8, 8, 3}, 4));
    CHECK(out.data[0] == 0.5);
    CHECK(out.data[1] == 0.5);
    const NetModel s = zero_model(Shape{1, 1, 2}, {fc(3), relu(), fc(1), sigmoid()});
    CHECK(forward(s, Tensor(Shape{1, 1, 2}, {0.3, -2.0})).data[0] == 0.5);
}

TEST_CASE("relu and maxpool definitions")
{
    const NetModel r = make_model(Shape{3, 1, 1}, {relu()}, 0);
    const Tensor out = forward(r, Tensor(Shape{3, 1, 1}, {-1.0, 0.0, 3.0}));
    CHECK(out.data == std::vector<double>{0.0, 0.0, 3.0});
    const NetModel p = make_model(Shape{2, 2, 1}, {maxpool2()}, 0);
    CHECK(forward(p, Tensor(Shape{2, 2, 1}, {1.0, 5.0, 2.0, 3.0})).data == std::vector<double>{5.0});
}

TEST_CASE("softmax cross-entropy gradient is p minus one-hot")
{
    // a single fc layer: dL/db = p - y
    const NetModel m = make_model(Shape{1, 1, 3}, {fc(2), softmax()}, 7);
    const Tensor x(Shape{1, 1, 3}, {0.5, -1.0, 2.0});
    const Tensor p = forward(m, x);
    const auto g = backward(m, x, 1);
    CHECK(g.grads[0][6] == doctest::Approx(p.data[0]).epsilon(1e-12));
    CHECK(g.grads[0][7] == doctest::Approx(p.data[1] - 1.0).epsilon(1e-12));
    CHECK(g.loss == doctest::Approx(-std::log(p.data[1])).epsilon(1e-12));
}

TEST_CASE("zero input gives zero kernel gradients for the first conv")
{
    const NetModel m = make_model(Shape{8, 8, 2}, toy_conv_net(), 3);
    const auto g = backward(m, Tensor(Shape{8, 8, 2}), 0);
    const std::size_t kernel = 3 * 2 * 9;
    for (std::size_t i = 0; i < kernel; ++i) CHECK(g.grads[0][i] == 0.0);
}

TEST_CASE("finite differences agree with backprop")
{
    SUBCASE("two-conv toy net")
    {
        NetModel m = make_model(Shape{10, 10, 3}, toy_conv_net(), 11);
        for (auto& layer : m.params) {
            std::mt19937_64 rng(5);
            std::normal_distribution<double> n(0.0, 0.05);
            if (!layer.empty()) layer.back() += n(rng);
        }
        const auto check = check_gradients(m, random_tensor(Shape{10, 10, 3}, 12), 1, 150, 1e-5, 13);
        CHECK(check.checked >= 100);
        CHECK(check.max_relative_error < 1e-4);
    }
    SUBCASE("sigmoid head")
    {
        const NetModel m = make_model(Shape{1, 1, 2}, {fc(10), relu(), fc(10), relu(), fc(1), sigmoid()}, 14);
        const auto check = check_gradients(m, Tensor(Shape{1, 1, 2}, {0.04, 0.7}), 1, 141, 1e-5, 15);
        CHECK(check.checked >= 100);
        CHECK(check.max_relative_error < 1e-4);
    }
}

TEST_CASE("sgd on separable blobs")
{
    const TensorSamples data = blobs(200, 1);
    const NetModel init = make_model(Shape{1, 1, 2}, {fc(8), relu(), fc(2), softmax()}, 2);
    TrainOptions opt;
    opt.epochs = 50;
    opt.batch = 16;
    opt.seed = 3;
    const NetModel trained = sgd_train(init, data, opt);
    CHECK(accuracy(trained, data) >= 0.99);
    CHECK(trained.meta.epochs == 50);
    CHECK(mean_loss(trained, data) < mean_loss(init, data));

    opt.precision = Precision::dual;
    const NetModel dual = sgd_train(init, data, opt);
    CHECK(accuracy(dual, data) >= 0.99);
}

TEST_CASE("sgd determinism and null update")
{
    const TensorSamples data = blobs(64, 4);
    const NetModel init = make_model(Shape{1, 1, 2}, {fc(4), relu(), fc(1), sigmoid()}, 5);
    TrainOptions opt;
    opt.epochs = 5;
    opt.batch = 8;
    opt.seed = 6;
    CHECK(sgd_train(init, data, opt).params == sgd_train(init, data, opt).params);
    opt.learning_rate = 0.0;
    opt.precision = Precision::dual;
    CHECK(sgd_train(init, data, opt).params == init.params);
    // single precision keeps float copies, so only float rounding remains
    opt.precision = Precision::single;
    const NetModel single = sgd_train(init, data, opt);
    for (std::size_t l = 0; l < init.params.size(); ++l) {
        for (std::size_t i = 0; i < init.params[l].size(); ++i) {
            CHECK(single.params[l][i] == static_cast<double>(static_cast<float>(init.params[l][i])));
        }
    }
}

TEST_CASE("fast predictor tracks the reference forward pass")
{
    const NetModel m = make_model(Shape{16, 16, 3}, toy_conv_net(), 21);
    const FastPredictor fast(m);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Tensor x = random_tensor(Shape{16, 16, 3}, 30 + s);
        const auto a = forward(m, x).data;
        const auto b = fast(x.data);
        REQUIRE(b.size() == a.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-4);
    }
}

TEST_CASE("model encoding")
{
    NetModel m = make_model(Shape{8, 8, 3}, toy_conv_net(), 31);
    m.meta = {7, 0.01, 0.9, 32, 0.25};
    const auto bytes = encode_model(m);
    CHECK(decode_model(bytes) == m);

    auto code = [](std::span<const std::uint8_t> b) {
        try {
            decode_model(b);
        } catch (const Error& e) {
            return e.code();
        }
        return Errc::invariant;
    };
    CHECK(code(std::span(bytes).first(bytes.size() - 1)) == Errc::truncation);
    auto extra = bytes;
    extra.push_back(0);
    CHECK(code(extra) == Errc::format);
    auto bad = bytes;
    bad[0] = 'X';
    CHECK(code(bad) == Errc::format);

    testing::TempDir dir("nnet");
    save_model(dir.path() / "m.nnet", m);
    CHECK(load_model(dir.path() / "m.nnet") == m);
    try {
        load_model(dir.path() / "none.nnet");
        FAIL("expected a dependency error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::dependency);
    }
}

TEST_CASE("tensor shape is validated")
{
    CHECK_THROWS_AS(Tensor(Shape{2, 2, 1}, std::vector<double>{1, 2, 3}), Error);
    const NetModel m = make_model(Shape{4, 4, 1}, {fc(2), softmax()}, 1);
    CHECK_THROWS_AS(forward(m, Tensor(Shape{4, 4, 2})), Error);
}

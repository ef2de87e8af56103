#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "glt/checkpoint.hpp"
#include "glt/error.hpp"
#include "glt/layers.hpp"
#include "glt/ops.hpp"
#include "support.hpp"

using namespace glt;
using glt::test::random_tensor;

namespace {

// Direct six-loop cross-correlation with zero padding.
std::vector<double> naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t pad)
{
    const auto B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const auto O = w.dim(0), k = w.dim(2);
    const auto Ho = H + 2 * pad - k + 1, Wo = W + 2 * pad - k + 1;
    std::vector<double> out(B * O * Ho * Wo, 0.0);
    for (std::size_t n = 0; n < B; ++n)
        for (std::size_t o = 0; o < O; ++o)
            for (std::size_t r = 0; r < Ho; ++r)
                for (std::size_t c = 0; c < Wo; ++c) {
                    double acc = b.data()[o];
                    for (std::size_t ci = 0; ci < C; ++ci)
                        for (std::size_t i = 0; i < k; ++i)
                            for (std::size_t j = 0; j < k; ++j) {
                                const long rr = static_cast<long>(r + i) - static_cast<long>(pad);
                                const long cc = static_cast<long>(c + j) - static_cast<long>(pad);
                                if (rr < 0 || cc < 0 || rr >= static_cast<long>(H) || cc >= static_cast<long>(W)) continue;
                                acc += x.data()[((n * C + ci) * H + rr) * W + cc] * w.data()[((o * C + ci) * k + i) * k + j];
                            }
                    out[((n * O + o) * Ho + r) * Wo + c] = acc;
                }
    return out;
}

} // namespace

TEST_CASE("conv2d counting example: ones kernel over ones")
{
    auto x = Tensor::full({1, 1, 4, 4}, 1.0);
    auto w = Tensor::full({1, 1, 3, 3}, 1.0);
    auto y = conv2d(x, w, Tensor::zeros({1}), 1);
    CHECK(y.shape() == Shape{1, 1, 4, 4});
    CHECK(y.data()[0] == 4.0);
    CHECK(y.data()[5] == 9.0);
    CHECK(y.data()[15] == 4.0);
    CHECK(y.data()[1] == 6.0);
}

TEST_CASE("conv2d with a unit 1x1 kernel is the identity")
{
    auto x = random_tensor({2, 1, 5, 3}, 1);
    auto y = conv2d(x, Tensor::full({1, 1, 1, 1}, 1.0), Tensor::zeros({1}), 0);
    CHECK(test::max_abs_diff(x.data(), y.data()) == 0.0);
}

TEST_CASE("conv2d matches the direct six-loop oracle")
{
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const std::size_t k = seed % 2 ? 3 : 1, pad = seed % 3 == 0 ? 0 : 1;
        auto x = random_tensor({2, 3, 7, 6}, 10 + seed);
        auto w = random_tensor({4, 3, k, k}, 20 + seed);
        auto b = random_tensor({4}, 30 + seed);
        auto y = conv2d(x, w, b, pad);
        CHECK(test::max_abs_diff(y.data(), naive_conv(x, w, b, pad)) < 1e-6);
    }
}

TEST_CASE("conv output shape follows (L + 2 pad - k) + 1 over a sweep")
{
    Rng rng(3);
    for (std::size_t H : {3u, 4u, 7u, 10u})
        for (std::size_t W : {3u, 5u, 8u})
            for (std::size_t k : {1u, 2u, 3u})
                for (std::size_t pad : {0u, 1u, 2u}) {
                    Conv2d conv(2, 3, k, pad, rng);
                    auto y = conv.forward(Tensor::zeros({1, 2, H, W}));
                    CHECK(y.shape() == Shape{1, 3, H + 2 * pad - k + 1, W + 2 * pad - k + 1});
                }
}

TEST_CASE("conv2d rejects a channel mismatch")
{
    Rng rng(1);
    Conv2d conv(3, 4, 3, 1, rng);
    CHECK_THROWS_AS(conv.forward(Tensor::zeros({1, 2, 5, 5})), DimensionError);
}

TEST_CASE("pooling examples")
{
    auto m = maxpool2(Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4}));
    CHECK(m.numel() == 1);
    CHECK(m.item() == 4.0);

    auto a = avgpool_global(Tensor::full({1, 3, 5, 5}, 1.0));
    CHECK(a.shape() == Shape{1, 3});
    for (double v : a.data()) CHECK(v == doctest::Approx(1.0));

    auto big = maxpool2(Tensor::zeros({1, 1, 130, 170}));
    CHECK(big.shape() == Shape{1, 1, 65, 85});
    CHECK_THROWS_AS(maxpool2(Tensor::zeros({1, 1, 1, 4})), DimensionError);
}

TEST_CASE("batch norm train-mode examples")
{
    BatchNorm2d bn(1);
    auto x = Tensor::from_data({2, 1, 1, 1}, {-1, 1});
    auto y = bn.forward(x, Mode::train);
    CHECK(y.data()[0] == doctest::Approx(-1.0 / std::sqrt(1.0 + 1e-5)).epsilon(1e-12));
    CHECK(y.data()[1] == doctest::Approx(1.0 / std::sqrt(1.0 + 1e-5)).epsilon(1e-12));

    BatchNorm2d affine(1);
    affine.gamma.mutable_data()[0] = 2.0;
    affine.beta.mutable_data()[0] = 3.0;
    auto z = affine.forward(x, Mode::train);
    CHECK(z.data()[0] == doctest::Approx(3.0 - 2.0 / std::sqrt(1.0 + 1e-5)));
    CHECK(z.data()[1] == doctest::Approx(3.0 + 2.0 / std::sqrt(1.0 + 1e-5)));
}

TEST_CASE("batch norm normalises each channel and tracks running statistics")
{
    BatchNorm2d bn(3);
    auto x = add_scalar(random_tensor({8, 3, 4, 4}, 5, false, 3.0), 2.0);
    auto y = bn.forward(x, Mode::train);
    for (std::size_t c = 0; c < 3; ++c) {
        double m = 0, v = 0;
        std::size_t n = 0;
        for (std::size_t b = 0; b < 8; ++b)
            for (std::size_t i = 0; i < 16; ++i) m += y.data()[(b * 3 + c) * 16 + i], ++n;
        m /= n;
        for (std::size_t b = 0; b < 8; ++b)
            for (std::size_t i = 0; i < 16; ++i) v += std::pow(y.data()[(b * 3 + c) * 16 + i] - m, 2);
        v /= n;
        CHECK(std::fabs(m) < 1e-3);
        CHECK(std::fabs(v - 1.0) < 1e-2);
        CHECK(bn.running_mean.data()[c] != 0.0);
    }

    // eval mode uses the running estimates
    auto e1 = bn.forward(x, Mode::eval);
    const double rm = bn.running_mean.data()[0], rv = bn.running_var.data()[0];
    CHECK(e1.data()[0] == doctest::Approx((x.data()[0] - rm) / std::sqrt(rv + 1e-5)));
}

TEST_CASE("batch norm with a constant channel and batch size one stays finite")
{
    BatchNorm2d bn(1);
    auto y = bn.forward(Tensor::full({1, 1, 2, 2}, 5.0), Mode::train);
    for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("linear layer examples")
{
    Rng rng(2);
    Linear layer(3, 3, rng);
    auto w = layer.weight.mutable_data();
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
    auto x = random_tensor({2, 3}, 3);
    CHECK(test::max_abs_diff(layer.forward(x).data(), x.data()) == 0.0);

    std::fill(w.begin(), w.end(), 0.0);
    auto b = layer.bias.mutable_data();
    std::fill(b.begin(), b.end(), 4.5);
    const auto y = layer.forward(x);
    for (double v : y.data()) CHECK(v == 4.5);
    CHECK_THROWS_AS(layer.forward(Tensor::zeros({2, 4})), DimensionError);
}

TEST_CASE("step decay schedule")
{
    StepDecay s{1e-4, 25, 0.5};
    CHECK(s.at(0) == 1e-4);
    CHECK(s.at(24) == 1e-4);
    CHECK(s.at(25) == 5e-5);
    CHECK(s.at(26) == 5e-5);
    CHECK(s.at(50) == doctest::Approx(2.5e-5));
}

TEST_CASE("adam with zero gradients leaves parameters unchanged")
{
    auto p = random_tensor({4}, 1, true);
    std::vector<double> before(p.data().begin(), p.data().end());
    Adam opt({{"p", p}}, {1e-2, 25, 0.5});
    for (int i = 0; i < 5; ++i) {
        sum(scale(p, 0.0)).backward();
        opt.step();
    }
    CHECK(std::equal(before.begin(), before.end(), p.data().begin()));
}

TEST_CASE("adam converges on a one-dimensional quadratic")
{
    auto x = Tensor::from_data({1}, {5.0}, true);
    Adam opt({{"x", x}}, {0.1, 100, 0.5});
    for (int step = 0; step < 500; ++step) {
        opt.set_epoch(static_cast<std::size_t>(step));
        sum(square(add_scalar(x, -1.25))).backward();
        opt.step();
    }
    CHECK(std::fabs(x.item() - 1.25) < 1e-3);
}

TEST_CASE("adam aborts on a NaN gradient naming the parameter")
{
    auto p = Tensor::from_data({1}, {1.0}, true);
    p.mutable_grad()[0] = std::nan("");
    Adam opt({{"block3.weight", p}}, {});
    CHECK_THROWS_WITH_AS(opt.step(), doctest::Contains("block3.weight"), NumericalError);
}

TEST_CASE("checkpoint round trip, manifest offsets and architecture mismatch")
{
    const auto dir = std::filesystem::temp_directory_path() / "glt_layers_ckpt";
    std::filesystem::create_directories(dir);
    auto a = random_tensor({2, 3}, 1), b = random_tensor({4}, 2);
    save_checkpoint({{"a", a}, {"b", b}}, dir / "m");
    auto manifest = read_manifest(dir / "m");
    REQUIRE(manifest.size() == 2);
    CHECK(manifest[0].name == "a");
    CHECK(manifest[0].shape == Shape{2, 3});
    CHECK(manifest[0].offset == 0);
    CHECK(manifest[1].offset == 4 + 4 + 2 * 4 + 6 * 4);
    CHECK(std::filesystem::file_size(dir / "m.bin") == manifest[1].offset + 4 + 4 + 4 + 4 * 4);

    auto a2 = Tensor::zeros({2, 3}), b2 = Tensor::zeros({4});
    load_checkpoint_into({{"a", a2}, {"b", b2}}, dir / "m");
    for (std::size_t i = 0; i < 6; ++i) CHECK(a2.data()[i] == static_cast<float>(a.data()[i]));

    auto wrong = Tensor::zeros({3, 2});
    CHECK_THROWS_AS(load_checkpoint_into({{"a", wrong}, {"b", b2}}, dir / "m"), FormatError);
    CHECK(wrong.data()[0] == 0.0);
    CHECK_THROWS_AS(load_checkpoint_into({{"a", a2}}, dir / "m"), FormatError);
    CHECK(parse_shape("4x3x3") == Shape{4, 3, 3});
    std::filesystem::remove_all(dir);
}

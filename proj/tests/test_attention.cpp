#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "glt/attention.hpp"
#include "glt/error.hpp"
#include "glt/gradcheck.hpp"
#include "glt/ops.hpp"
#include "support.hpp"

using namespace glt;
using glt::test::random_tensor;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

void set_identity(Conv2d& conv)
{
    auto w = conv.weight.mutable_data();
    std::fill(w.begin(), w.end(), 0.0);
    const auto d = conv.out_channels();
    for (std::size_t i = 0; i < d; ++i) w[i * d + i] = 1.0;
}

} // namespace

TEST_CASE("identical keys give uniform attention and the column mean of V")
{
    GlaConfig cfg{4, 2, AttentionScaling::per_head};
    auto q = random_tensor({3, 4}, 1);
    std::vector<double> krow{0.3, -1.0, 2.0, 0.5}, k;
    for (int j = 0; j < 5; ++j) k.insert(k.end(), krow.begin(), krow.end());
    auto keys = Tensor::from_data({5, 4}, k);
    auto v = random_tensor({5, 4}, 2);
    auto out = multi_head_attention(q, keys, v, cfg);
    for (double w : out.weights.data()) CHECK(w == doctest::Approx(0.2).epsilon(1e-12));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t c = 0; c < 4; ++c) {
            double m = 0;
            for (std::size_t j = 0; j < 5; ++j) m += v.data()[j * 4 + c];
            CHECK(out.context.data()[i * 4 + c] == doctest::Approx(m / 5).epsilon(1e-12));
        }
}

TEST_CASE("two-dimensional single-head example matches the loop oracle")
{
    GlaConfig cfg{2, 1, AttentionScaling::per_head};
    auto q = Tensor::from_data({1, 2}, {1, 0});
    auto k = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    auto v = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    auto out = multi_head_attention(q, k, v, cfg);
    const double s = 1.0 / std::sqrt(2.0);
    const double w0 = std::exp(s) / (std::exp(s) + 1.0);
    CHECK(out.weights.data()[0] == doctest::Approx(w0).epsilon(1e-14));
    CHECK(out.context.data()[0] == doctest::Approx(w0).epsilon(1e-14));
    CHECK(out.context.data()[1] == doctest::Approx(1 - w0).epsilon(1e-14));
    auto loop = test::loop_attention(values(q), values(k), values(v), 1, 2, 2, 1, s);
    CHECK(test::max_abs_diff(out.context.data(), loop.context) < 1e-15);
}

TEST_CASE("matrix form equals the per-position loop for random N2, N1, d")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t heads = std::size_t{1} << (trial % 3);
        const std::size_t d = heads * (1 + trial % 5);
        const std::size_t n2 = 1 + rng() % 16, n1 = 1 + rng() % 80;
        for (auto scaling : {AttentionScaling::per_head, AttentionScaling::whole_model}) {
            GlaConfig cfg{d, heads, scaling};
            auto q = random_tensor({n2, d}, rng()), k = random_tensor({n1, d}, rng()), v = random_tensor({n1, d}, rng());
            auto out = multi_head_attention(q, k, v, cfg);
            const double scale = scaling == AttentionScaling::per_head ? 1.0 / std::sqrt(double(d / heads))
                                                                        : 1.0 / std::sqrt(double(d));
            auto loop = test::loop_attention(values(q), values(k), values(v), n2, n1, d, heads, scale);
            CHECK(test::max_abs_diff(out.context.data(), loop.context) < 1e-6);
            CHECK(test::max_abs_diff(out.weights.data(), loop.weights) < 1e-6);
        }
    }
}

TEST_CASE("attention rows are stochastic for N2 in {1,4,16} and N1 in {16,80}")
{
    GlaConfig cfg{16, 4, AttentionScaling::per_head};
    for (std::size_t n2 : {1u, 4u, 16u})
        for (std::size_t n1 : {16u, 80u}) {
            auto out = multi_head_attention(random_tensor({n2, 16}, n2, false, 3.0), random_tensor({n1, 16}, n1, false, 3.0),
                                            random_tensor({n1, 16}, 7), cfg);
            CHECK(out.weights.shape() == Shape{4, n2, n1});
            CHECK(out.context.shape() == Shape{n2, 16});
            for (std::size_t r = 0; r < 4 * n2; ++r) {
                double total = 0;
                for (std::size_t j = 0; j < n1; ++j) {
                    const double w = out.weights.data()[r * n1 + j];
                    CHECK(w >= 0.0);
                    CHECK(w <= 1.0);
                    total += w;
                }
                CHECK(std::fabs(total - 1.0) < 1e-6);
            }
        }
}

TEST_CASE("jointly permuting keys and values leaves the context unchanged")
{
    GlaConfig cfg{8, 2, AttentionScaling::per_head};
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n1 = 80;
        auto q = random_tensor({16, 8}, rng()), k = random_tensor({n1, 8}, rng()), v = random_tensor({n1, 8}, rng());
        std::vector<std::size_t> perm(n1);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        auto a = multi_head_attention(q, k, v, cfg);
        auto b = multi_head_attention(q, index_select(k, perm), index_select(v, perm), cfg);
        CHECK(test::max_abs_diff(a.context.data(), b.context.data()) < 1e-6);
    }
}

TEST_CASE("attention input validation")
{
    GlaConfig cfg{8, 2, AttentionScaling::per_head};
    CHECK_THROWS_AS(multi_head_attention(Tensor::zeros({2, 8}), Tensor::zeros({3, 8}), Tensor::zeros({4, 8}), cfg),
                    DimensionError);
    CHECK_THROWS_AS(multi_head_attention(Tensor::zeros({2, 6}), Tensor::zeros({3, 6}), Tensor::zeros({3, 6}), cfg),
                    DimensionError);
    CHECK_THROWS_AS((GlaConfig{10, 3, AttentionScaling::per_head}.validate()), ContractError);
    // An empty key set cannot even be represented: zero-sized dimensions are rejected.
    CHECK_THROWS_AS(Tensor::zeros({0, 8}), DimensionError);
}

TEST_CASE("projection: identity 1x1 convs give the flattened local feature as queries")
{
    Rng rng(4);
    GlaConfig cfg{6, 2, AttentionScaling::per_head};
    GlobalLocalAttention att(cfg, rng);
    set_identity(att.query);
    auto fl = random_tensor({1, 6, 2, 3}, 1), fg = random_tensor({1, 6, 8, 10}, 2);
    auto p = att.project_qkv(fl, fg);
    CHECK(p.key.shape() == Shape{1, 80, 6});
    CHECK(p.query.shape() == Shape{1, 6, 6});
    auto flat = flatten_positions(fl);
    CHECK(test::max_abs_diff(p.query.data(), flat.data()) == 0.0);
    // row-major position order: position (r, c) -> row r * w + c
    CHECK(flat.data()[(1 * 3 + 2) * 6 + 4] == fl.data()[(4 * 2 + 1) * 3 + 2]);
    auto back = unflatten_positions(flat, 2, 3);
    CHECK(test::max_abs_diff(back.data(), fl.data()) == 0.0);
    CHECK_THROWS_AS(att.project_qkv(random_tensor({1, 5, 2, 2}, 3), fg), DimensionError);
}

TEST_CASE("output has the shape of the local feature")
{
    Rng rng(5);
    GlobalLocalAttention att({8, 4, AttentionScaling::per_head}, rng);
    Tensor weights;
    auto y = att.forward(random_tensor({3, 8, 4, 4}, 1), random_tensor({3, 8, 8, 10}, 2), &weights);
    CHECK(y.shape() == Shape{3, 8, 4, 4});
    CHECK(weights.shape() == Shape{3, 4, 16, 80});
}

TEST_CASE("single attention layer passes gradcheck")
{
    Rng rng(6);
    GlobalLocalAttention att({8, 2, AttentionScaling::per_head}, rng);
    auto fl = random_tensor({2, 8, 2, 2}, 1, true), fg = random_tensor({2, 8, 3, 3}, 2, true);
    auto w = random_tensor({2, 8, 2, 2}, 3);
    std::vector<NamedTensor> params;
    att.collect("att", params);
    params.push_back({"fl", fl});
    params.push_back({"fg", fg});
    auto report = gradcheck([&] { return scale(sum(mul(att.forward(fl, fg), w)), 1e-3); }, params);
    CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("attention runtime grows at most linearly in N1")
{
    GlaConfig cfg{64, 4, AttentionScaling::per_head};
    auto q = random_tensor({16, 64}, 1);
    auto time_for = [&](std::size_t n1) {
        auto k = random_tensor({n1, 64}, 2), v = random_tensor({n1, 64}, 3);
        double best = 1e9;
        for (int rep = 0; rep < 5; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            for (int i = 0; i < 20; ++i) multi_head_attention(q, k, v, cfg);
            best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        return best;
    };
    const double t1 = time_for(1024), t2 = time_for(2048);
    CAPTURE(t1);
    CAPTURE(t2);
    CHECK(t2 / t1 < 2.5);
}

TEST_CASE("attention trace CSV")
{
    auto w = Tensor::from_data({1, 2, 2}, {0.25, 0.75, 1.0, 0.0});
    std::ostringstream os;
    write_attention_csv(os, w);
    CHECK(os.str() == "head,query_index,key_index,weight\n0,0,0,0.25\n0,0,1,0.75\n0,1,0,1\n0,1,1,0\n");
}

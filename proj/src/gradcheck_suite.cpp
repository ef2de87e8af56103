#include "glt/gradcheck_suite.hpp"

#include <random>

#include "glt/model.hpp"
#include "glt/ops.hpp"

namespace glt {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true)
{
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = dist(rng);
    return Tensor::from_data(std::move(shape), std::move(v), requires_grad);
}

// Several parameters have gradients that are exactly zero (conv biases ahead of
// batch norm, key biases under the softmax shift invariance). Their numeric
// estimate is pure round-off of order eps * |f| / step, and the relative error
// floor of 1e-8 is absolute, so the objectives are kept near 1e-3 in magnitude.
constexpr double kObjectiveScale = 1e-3;

// Fixed random projection to a scalar, so no gradient is structurally symmetric.
Tensor probe(const Tensor& y, const Tensor& weights) { return scale(sum(mul(y, weights)), kObjectiveScale); }

Tensor faulty_identity(const Tensor& x)
{
    return make_op(x.shape(), std::vector<double>(x.data().begin(), x.data().end()), {x}, [](detail::Node& self) {
        auto& parent = *self.parents[0];
        auto& g = parent.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * self.grad[i];
    });
}

std::vector<NamedTensor> with_input(std::vector<NamedTensor> params, const std::string& name, const Tensor& x)
{
    params.push_back({name, x});
    return params;
}

SuiteCheck check(std::string name, const std::function<Tensor()>& f, const std::vector<NamedTensor>& inputs,
                 double tolerance)
{
    return {std::move(name), gradcheck(f, inputs, 1e-5, tolerance), tolerance};
}

} // namespace

std::vector<SuiteCheck> run_gradcheck_suite(const SuiteOptions& options)
{
    Rng rng(options.seed);
    std::vector<SuiteCheck> out;
    const double lt = options.layer_tolerance;

    {
        auto a = random_tensor({3, 4}, rng), b = random_tensor({4, 5}, rng);
        auto w = random_tensor({3, 5}, rng, false);
        out.push_back(check("matmul", [&] { return probe(matmul(a, b), w); }, {{"a", a}, {"b", b}}, lt));
    }
    {
        auto x = random_tensor({3, 5}, rng);
        auto w = random_tensor({3, 5}, rng, false);
        out.push_back(check("softmax", [&] { return probe(softmax(x, 1), w); }, {{"x", x}}, lt));
    }
    {
        auto a = random_tensor({2, 3}, rng), b = random_tensor({2, 3}, rng);
        auto f = [&] {
            auto y = concat({add(a, b), sub(a, scale(b, 0.5)), mul(a, b), relu(add_scalar(a, 0.1))}, 0); // [8, 3]
            auto t = reshape(transpose(y), {3, 8});
            return add(mean(square(t)), sum(mul(reshape(sum(t), {1}), reshape(mean(matmul(transpose(a), b)), {1}))));
        };
        out.push_back(check("elementwise", f, {{"a", a}, {"b", b}}, lt));
    }
    {
        Conv2d conv(3, 4, 3, 1, rng);
        auto x = random_tensor({2, 3, 6, 5}, rng);
        auto w = random_tensor({2, 4, 6, 5}, rng, false);
        std::vector<NamedTensor> params;
        conv.collect("conv2d", params);
        out.push_back(check("conv2d", [&] { return probe(conv.forward(x), w); }, with_input(params, "conv2d.input", x), lt));
    }
    {
        BatchNorm2d bn(3);
        auto x = random_tensor({4, 3, 3, 3}, rng);
        auto w = random_tensor({4, 3, 3, 3}, rng, false);
        std::vector<NamedTensor> params;
        bn.collect("batchnorm", params);
        out.push_back(check("batchnorm", [&] { return probe(bn.forward(x, Mode::train), w); },
                                              with_input(params, "batchnorm.input", x), lt));
    }
    {
        Linear layer(6, 4, rng);
        auto x = random_tensor({3, 6}, rng);
        auto w = random_tensor({3, 4}, rng, false);
        std::vector<NamedTensor> params;
        layer.collect("linear", params);
        const bool fault = options.inject_fault;
        auto f = [&] {
            auto y = layer.forward(x);
            return probe(fault ? faulty_identity(y) : y, w);
        };
        out.push_back(check("linear", f, with_input(params, "linear.input", x), lt));
    }
    {
        auto x = random_tensor({2, 2, 5, 6}, rng);
        auto w = random_tensor({2, 2, 2, 3}, rng, false);
        out.push_back(check("maxpool2", [&] { return probe(maxpool2(x), w); }, {{"x", x}}, lt));
        auto v = random_tensor({2, 2}, rng, false);
        out.push_back(check("avgpool_global", [&] { return probe(avgpool_global(x), v); }, {{"x", x}}, lt));
    }
    {
        GlaConfig cfg{8, 2, AttentionScaling::per_head};
        GlobalLocalAttention attention(cfg, rng);
        auto fl = random_tensor({2, 8, 2, 2}, rng), fg = random_tensor({2, 8, 3, 4}, rng);
        auto w = random_tensor({2, 8, 2, 2}, rng, false);
        std::vector<NamedTensor> params;
        attention.collect("attention", params);
        params.push_back({"attention.f_local", fl});
        params.push_back({"attention.f_global", fg});
        out.push_back(check("attention", [&] { return probe(attention.forward(fl, fg), w); }, params, lt));
    }
    {
        GlaConfig cfg{8, 2, AttentionScaling::per_head};
        GltBlock block(cfg, rng);
        auto fl = random_tensor({3, 8, 2, 2}, rng), fg = random_tensor({3, 8, 3, 3}, rng);
        auto w = random_tensor({3, 8, 2, 2}, rng, false);
        std::vector<NamedTensor> params;
        block.collect("block", params);
        params.push_back({"block.f_local", fl});
        params.push_back({"block.f_global", fg});
        out.push_back(check("glt_block", [&] { return probe(block.forward(fl, fg, Mode::train), w); }, params, options.model_tolerance));
    }
    {
        BackboneConfig cfg{{4, 8, 16, 32}, 2, 2};
        Backbone backbone(cfg, rng);
        auto x = random_tensor({2, 2, 16, 16}, rng);
        auto w = random_tensor({2, 32, 1, 1}, rng, false);
        std::vector<NamedTensor> params;
        backbone.collect("backbone", params);
        out.push_back(check("backbone", [&] { return probe(backbone.forward(x, Mode::train), w); },
                                             with_input(params, "backbone.input", x), options.model_tolerance));
    }
    {
        ModelConfig cfg;
        cfg.backbone = {{4, 4, 8}, 2, 2};
        cfg.attention = {8, 2, AttentionScaling::per_head};
        cfg.blocks = 2;
        GltModel model(cfg, options.seed + 1);
        auto images = random_tensor({2, 2, 24, 24}, rng, false);
        const std::vector<PatchSpec> patches{{0, 0, 16}, {4, 8, 16}, {8, 2, 16}};
        const std::vector<std::size_t> owner{0, 1, 1};
        const std::vector<double> tg{40.0, 60.0}, tl{40.0, 60.0, 60.0};
        auto f = [&] {
            auto ctx = model.encode_global(images);
            auto pred = model.predict_local(crop_patches(images, patches, owner), &ctx, owner);
            return scale(training_loss(ctx.age, tg, pred, tl), kObjectiveScale / 100.0);
        };
        out.push_back(check("glt_model", f, model.parameters(), options.model_tolerance));
    }
    return out;
}

} // namespace glt

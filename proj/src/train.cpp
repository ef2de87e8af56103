#include "glt/train.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <random>

#include "glt/error.hpp"
#include "glt/ops.hpp"

namespace glt {

void TrainConfig::validate() const
{
    if (epochs == 0 || batch_size == 0 || patches_per_subject == 0)
        throw ContractError("TrainConfig: epochs, batch size and patches per subject must be positive");
    if (!(schedule.initial > 0.0) || schedule.period == 0 || !(schedule.factor > 0.0))
        throw ContractError("TrainConfig: learning-rate schedule must be positive");
    if (policy == PatchPolicy::single_size && patch_size == 0) throw ContractError("TrainConfig: patch size must be positive");
}

namespace {

Tensor stack_images(std::span<const TrainSample> data, std::span<const std::size_t> members)
{
    const auto& first = data[members[0]].image.shape();
    const auto per = shape_numel(first);
    std::vector<double> out(members.size() * per);
    for (std::size_t i = 0; i < members.size(); ++i) {
        const auto& img = data[members[i]].image;
        if (img.shape() != first)
            throw DimensionError("train: images differ in shape, " + shape_str(first) + " vs " + shape_str(img.shape()));
        std::copy(img.data().begin(), img.data().end(), out.begin() + static_cast<std::ptrdiff_t>(i * per));
    }
    return Tensor::from_data({members.size(), first[0], first[1], first[2]}, std::move(out));
}

} // namespace

TrainResult train(GltModel& model, std::span<const TrainSample> data, const TrainConfig& cfg,
                  const TrainProgress& progress)
{
    cfg.validate();
    if (data.empty()) throw ContractError("train: empty dataset");
    for (const auto& s : data)
        if (s.image.rank() != 3) throw DimensionError("train: images must be [K, H, W], got " + shape_str(s.image.shape()));
    const auto H = data[0].image.dim(1), W = data[0].image.dim(2);

    std::vector<std::size_t> single_sizes{cfg.patch_size};
    const auto sizes = cfg.policy == PatchPolicy::single_size ? single_sizes : cfg.grid.sizes_within(H, W);
    if (sizes.empty() || sizes.front() > std::min(H, W))
        throw ContractError("train: no patch size fits the " + std::to_string(H) + "x" + std::to_string(W) + " images");

    if (cfg.normalize_targets) {
        double m = 0.0;
        for (const auto& s : data) m += s.age;
        m /= static_cast<double>(data.size());
        double v = 0.0;
        for (const auto& s : data) v += (s.age - m) * (s.age - m);
        const double sd = std::sqrt(v / static_cast<double>(data.size()));
        model.set_target_normalization(m, sd > 1e-6 ? sd : 1.0);
    }

    std::mt19937_64 rng(cfg.seed);
    Adam optimizer(model.parameters(), cfg.schedule);
    model.set_mode(Mode::train);

    TrainResult result;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        optimizer.set_epoch(epoch);
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t epoch_steps = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const auto end = std::min(order.size(), start + cfg.batch_size);
            std::span<const std::size_t> members(order.data() + start, end - start);
            auto images = stack_images(data, members);

            GlobalContext ctx;
            std::vector<double> global_targets;
            if (!model.local_only()) {
                ctx = model.encode_global(images);
                for (auto m : members) global_targets.push_back(data[m].age);
            }

            // size -> (patches, owners)
            std::map<std::size_t, std::pair<std::vector<PatchSpec>, std::vector<std::size_t>>> groups;
            std::uniform_int_distribution<std::size_t> pick(0, sizes.size() - 1);
            for (std::size_t b = 0; b < members.size(); ++b)
                for (std::size_t p = 0; p < cfg.patches_per_subject; ++p) {
                    const auto s = sizes[pick(rng)];
                    std::uniform_int_distribution<std::size_t> row(0, H - s), col(0, W - s);
                    const auto r = row(rng);
                    auto& g = groups[s];
                    g.first.push_back({r, col(rng), s});
                    g.second.push_back(b);
                }

            std::vector<Tensor> local_preds;
            std::vector<double> local_targets;
            for (const auto& [size, group] : groups) {
                const auto& [patches, owner] = group;
                auto crops = crop_patches(images, patches, owner);
                local_preds.push_back(model.predict_local(crops, model.local_only() ? nullptr : &ctx, owner));
                for (auto b : owner) local_targets.push_back(data[members[b]].age);
            }
            auto pred_local = local_preds.size() == 1 ? local_preds[0] : concat(local_preds, 0);

            auto loss = training_loss(ctx.age, global_targets, pred_local, local_targets);
            const double value = loss.item();
            if (!std::isfinite(value))
                throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                                     std::to_string(step));
            loss.backward();
            optimizer.step();

            result.curve.push_back({epoch, step, value});
            epoch_loss += value;
            ++epoch_steps;
            ++step;
        }
        result.final_loss = epoch_loss / static_cast<double>(epoch_steps);
        if (progress) progress(epoch, result.final_loss);
    }
    model.set_mode(Mode::eval);
    return result;
}

std::vector<std::size_t> kfold_assignment(std::size_t n, std::size_t k, std::uint64_t seed)
{
    if (k == 0 || k > n) throw ContractError("cannot split " + std::to_string(n) + " items into " + std::to_string(k) + " folds");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> fold(n);
    for (std::size_t i = 0; i < n; ++i) fold[order[i]] = i % k;
    return fold;
}

void write_loss_csv(std::ostream& os, std::span<const LossPoint> curve)
{
    const auto old = os.precision(17);
    os << "epoch,step,loss\n";
    for (const auto& p : curve) os << p.epoch << ',' << p.step << ',' << p.loss << '\n';
    os.precision(old);
}

} // namespace glt

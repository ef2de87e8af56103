#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "glt/layers.hpp"
#include "glt/model.hpp"
#include "glt/patches.hpp"

namespace glt {

enum class PatchPolicy {
    single_size, // patches_per_subject crops of patch_size at random positions
    multi_size,  // patches_per_subject crops with sizes drawn from the grid
};

struct TrainConfig {
    std::size_t epochs = 80;
    std::size_t batch_size = 18;
    StepDecay schedule{1e-4, 25, 0.5};
    PatchPolicy policy = PatchPolicy::single_size;
    std::size_t patch_size = 64;
    std::size_t patches_per_subject = 1;
    SizeGrid grid;
    // Sets the model's age read-out to mean + std * head(x) from the training targets.
    bool normalize_targets = true;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainSample {
    Tensor image; // [K, H, W]
    double age = 0.0;
};

struct LossPoint {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double loss = 0.0;
};

struct TrainResult {
    std::vector<LossPoint> curve;
    // Mean step loss of the final epoch.
    double final_loss = 0.0;
};

using TrainProgress = std::function<void(std::size_t epoch, double mean_loss)>;

/// Mini-batch training with Adam and the step-decay schedule. Each step encodes
/// the batch images once through the global pathway and shares that feature
/// with every patch of the same image. Deterministic for a fixed seed.
/// Throws NumericalError with epoch and step when the loss stops being finite.
TrainResult train(GltModel& model, std::span<const TrainSample> data, const TrainConfig& cfg,
                  const TrainProgress& progress = {});

/// Fold index in [0, k) for each of n items after a seeded shuffle. Fold sizes
/// differ by at most one.
std::vector<std::size_t> kfold_assignment(std::size_t n, std::size_t k, std::uint64_t seed);

void write_loss_csv(std::ostream& os, std::span<const LossPoint> curve);

} // namespace glt

// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "alia/image.hpp"
#include "alia/rng.hpp"

namespace alia::train {

struct Sample {
    Image image;
    std::vector<double> target;  // soft label over classes
};

// In-training augmentation applied to each mini-batch.
class AugmentationPolicy {
public:
    virtual ~AugmentationPolicy() = default;
    virtual std::string_view name() const = 0;
    virtual void apply(std::vector<Sample>& batch, SplitMix64& rng) const = 0;
};

// Batch-level CutMix as in torchvision.transforms.v2.CutMix: one
// lambda ~ Beta(alpha, alpha) per batch, each sample paired with the previous
// one (batch rolled by one), a box of area (1 - lambda) pasted from the
// partner, lambda corrected to the clipped box and used to mix the targets.
// Images in a batch must share a size.
class CutMix : public AugmentationPolicy {
public:
    explicit CutMix(double alpha = 1.0) : alpha_(alpha) {}
    std::string_view name() const override { return "cutmix"; }
    void apply(std::vector<Sample>& batch, SplitMix64& rng) const override;

private:
    double alpha_;
};

enum class RandAugmentOp {
    identity,
    shear_x,
    shear_y,
    translate_x,
    translate_y,
    rotate,
    brightness,
    color,
    contrast,
    sharpness,
    posterize,
    solarize,
    autocontrast,
    equalize,
};

inline constexpr int kRandAugmentOpCount = 14;

std::string_view to_string(RandAugmentOp op);

// Applies one op at a signed magnitude value (already looked up from the
// bins). Geometric ops use nearest-neighbour sampling and fill with black.
Image apply_op(const Image& image, RandAugmentOp op, double magnitude);

// Magnitude value of `op` at bin `index` of `bins` (torchvision's table:
// shear 0..0.3, translate 0..150/331 of the side, rotate 0..30 degrees,
// enhance 0..0.9, posterize 8 - round(i / ((bins - 1) / 4)) bits, solarize
// 255..0).
double op_magnitude(RandAugmentOp op, int index, int bins, int width, int height);
bool op_signed(RandAugmentOp op);

// torchvision.transforms.RandAugment defaults: num_ops 2, magnitude 9, 31 bins.
class RandAugment : public AugmentationPolicy {
public:
    RandAugment(int num_ops = 2, int magnitude = 9, int bins = 31);
    std::string_view name() const override { return "randaug"; }
    void apply(std::vector<Sample>& batch, SplitMix64& rng) const override;
    Image augment(const Image& image, SplitMix64& rng) const;

private:
    int num_ops_;
    int magnitude_;
    int bins_;
};

// "cutmix" or "randaug"; empty name gives nullptr.
std::unique_ptr<AugmentationPolicy> make_policy(std::string_view name);

}  // namespace alia::train

// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/train/policy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "alia/error.hpp"

namespace alia::train {

namespace {

double sample_beta(double alpha, SplitMix64& rng) {
    if (alpha == 1.0) return rng.uniform();
    std::gamma_distribution<double> g(alpha, 1.0);
    const double x = g(rng);
    const double y = g(rng);
    return x + y > 0 ? x / (x + y) : 0.5;
}

std::uint8_t clamp_trunc(double v) { return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0)); }

// (ratio * a + (1 - ratio) * b), clamped and truncated as torchvision does for uint8.
Image blend(const Image& a, const Image& b, double ratio) {
    Image out(a.width, a.height);
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        out.pixels[i] = clamp_trunc(ratio * a.pixels[i] + (1.0 - ratio) * b.pixels[i]);
    }
    return out;
}

Image grayscale3(const Image& img) {
    Image out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
        const auto l = static_cast<std::uint8_t>(0.2989 * img.pixels[i] + 0.587 * img.pixels[i + 1] +
                                                 0.114 * img.pixels[i + 2]);
        out.pixels[i] = out.pixels[i + 1] = out.pixels[i + 2] = l;
    }
    return out;
}

// Inverse-mapped resampling: out(x, y) = in(map(x + 0.5, y + 0.5)), nearest, black fill.
template <typename Map>
Image resample(const Image& img, Map&& map) {
    Image out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const auto [sx, sy] = map(x + 0.5, y + 0.5);
            const int ix = static_cast<int>(std::floor(sx));
            const int iy = static_cast<int>(std::floor(sy));
            auto* dst = out.at(x, y);
            if (ix < 0 || iy < 0 || ix >= img.width || iy >= img.height) {
                dst[0] = dst[1] = dst[2] = 0;
            } else {
                const auto* src = img.at(ix, iy);
                dst[0] = src[0];
                dst[1] = src[1];
                dst[2] = src[2];
            }
        }
    }
    return out;
}

Image sharpen_degenerate(const Image& img) {
    Image out = img;
    if (img.width < 3 || img.height < 3) return out;
    for (int y = 1; y < img.height - 1; ++y) {
        for (int x = 1; x < img.width - 1; ++x) {
            for (int c = 0; c < 3; ++c) {
                double s = 0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) s += img.at(x + dx, y + dy)[c] * (dx == 0 && dy == 0 ? 5.0 : 1.0);
                }
                out.at(x, y)[c] = clamp_trunc(std::nearbyint(s / 13.0));
            }
        }
    }
    return out;
}

Image equalize(const Image& img) {
    Image out = img;
    const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
    for (int c = 0; c < 3; ++c) {
        std::array<std::size_t, 256> hist{};
        for (std::size_t i = 0; i < n; ++i) ++hist[img.pixels[i * 3 + c]];
        std::size_t last = 0;
        for (std::size_t v = 0; v < 256; ++v) {
            if (hist[v]) last = v;
        }
        const std::size_t step = (n - hist[last]) / 255;
        if (step == 0) continue;
        std::array<std::uint8_t, 256> lut{};
        std::size_t cum = 0;
        for (std::size_t v = 0; v < 256; ++v) {
            // lut is shifted by one: entry v uses the cumulative count below v.
            lut[v] = static_cast<std::uint8_t>(std::min<std::size_t>((cum + step / 2) / step, 255));
            cum += hist[v];
        }
        for (std::size_t i = 0; i < n; ++i) out.pixels[i * 3 + c] = lut[img.pixels[i * 3 + c]];
    }
    return out;
}

Image autocontrast(const Image& img) {
    Image out = img;
    for (int c = 0; c < 3; ++c) {
        int lo = 255, hi = 0;
        for (std::size_t i = c; i < img.pixels.size(); i += 3) {
            lo = std::min<int>(lo, img.pixels[i]);
            hi = std::max<int>(hi, img.pixels[i]);
        }
        if (hi == lo) continue;
        const double scale = 255.0 / (hi - lo);
        for (std::size_t i = c; i < img.pixels.size(); i += 3) out.pixels[i] = clamp_trunc((img.pixels[i] - lo) * scale);
    }
    return out;
}

}  // namespace

void CutMix::apply(std::vector<Sample>& batch, SplitMix64& rng) const {
    if (batch.size() < 2) return;
    const int w = batch[0].image.width;
    const int h = batch[0].image.height;
    for (const auto& s : batch) {
        if (s.image.width != w || s.image.height != h) throw PreconditionError("cutmix: images differ in size");
    }
    const double lam = sample_beta(alpha_, rng);
    const int rx = static_cast<int>(rng.below(static_cast<std::uint64_t>(w)));
    const int ry = static_cast<int>(rng.below(static_cast<std::uint64_t>(h)));
    const double r = 0.5 * std::sqrt(1.0 - lam);
    const int rw = static_cast<int>(r * w);
    const int rh = static_cast<int>(r * h);
    const int x1 = std::max(rx - rw, 0), y1 = std::max(ry - rh, 0);
    const int x2 = std::min(rx + rw, w), y2 = std::min(ry + rh, h);
    const double lam_adj = 1.0 - static_cast<double>((x2 - x1) * (y2 - y1)) / static_cast<double>(w * h);

    const std::vector<Sample> original = batch;
    const std::size_t n = batch.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Sample& partner = original[(i + n - 1) % n];
        for (int y = y1; y < y2; ++y) {
            for (int x = x1; x < x2; ++x) std::copy_n(partner.image.at(x, y), 3, batch[i].image.at(x, y));
        }
        for (std::size_t c = 0; c < batch[i].target.size(); ++c) {
            batch[i].target[c] = lam_adj * original[i].target[c] + (1.0 - lam_adj) * partner.target[c];
        }
    }
}

std::string_view to_string(RandAugmentOp op) {
    static constexpr std::array<std::string_view, kRandAugmentOpCount> names = {
        "Identity",   "ShearX", "ShearY",    "TranslateX", "TranslateY",   "Rotate",  "Brightness",
        "Color",      "Contrast", "Sharpness", "Posterize",  "Solarize",     "AutoContrast", "Equalize"};
    return names[static_cast<std::size_t>(op)];
}

bool op_signed(RandAugmentOp op) {
    switch (op) {
        case RandAugmentOp::shear_x:
        case RandAugmentOp::shear_y:
        case RandAugmentOp::translate_x:
        case RandAugmentOp::translate_y:
        case RandAugmentOp::rotate:
        case RandAugmentOp::brightness:
        case RandAugmentOp::color:
        case RandAugmentOp::contrast:
        case RandAugmentOp::sharpness: return true;
        default: return false;
    }
}

double op_magnitude(RandAugmentOp op, int index, int bins, int width, int height) {
    const double t = bins > 1 ? static_cast<double>(index) / (bins - 1) : 0.0;
    switch (op) {
        case RandAugmentOp::shear_x:
        case RandAugmentOp::shear_y: return 0.3 * t;
        case RandAugmentOp::translate_x: return 150.0 / 331.0 * width * t;
        case RandAugmentOp::translate_y: return 150.0 / 331.0 * height * t;
        case RandAugmentOp::rotate: return 30.0 * t;
        case RandAugmentOp::brightness:
        case RandAugmentOp::color:
        case RandAugmentOp::contrast:
        case RandAugmentOp::sharpness: return 0.9 * t;
        case RandAugmentOp::posterize:
            return 8.0 - std::nearbyint(static_cast<double>(index) / ((bins - 1) / 4.0));
        case RandAugmentOp::solarize: return 255.0 * (1.0 - t);
        default: return 0.0;
    }
}

Image apply_op(const Image& img, RandAugmentOp op, double mag) {
    switch (op) {
        case RandAugmentOp::identity: return img;
        case RandAugmentOp::shear_x:
            return resample(img, [&](double x, double y) { return std::pair{x - mag * y, y}; });
        case RandAugmentOp::shear_y:
            return resample(img, [&](double x, double y) { return std::pair{x, y - mag * x}; });
        case RandAugmentOp::translate_x: {
            const int t = static_cast<int>(mag);
            return resample(img, [&](double x, double y) { return std::pair{x - t, y}; });
        }
        case RandAugmentOp::translate_y: {
            const int t = static_cast<int>(mag);
            return resample(img, [&](double x, double y) { return std::pair{x, y - t}; });
        }
        case RandAugmentOp::rotate: {
            const double a = mag * std::numbers::pi / 180.0;
            const double cx = img.width * 0.5, cy = img.height * 0.5;
            const double c = std::cos(a), s = std::sin(a);
            return resample(img, [&](double x, double y) {
                const double dx = x - cx, dy = y - cy;
                return std::pair{cx + c * dx - s * dy, cy + s * dx + c * dy};
            });
        }
        case RandAugmentOp::brightness: {
            Image black(img.width, img.height);
            return blend(img, black, 1.0 + mag);
        }
        case RandAugmentOp::color: return blend(img, grayscale3(img), 1.0 + mag);
        case RandAugmentOp::contrast: {
            const Image g = grayscale3(img);
            double mean = 0;
            for (std::size_t i = 0; i < g.pixels.size(); i += 3) mean += g.pixels[i];
            mean /= static_cast<double>(g.pixels.size() / 3);
            Image out(img.width, img.height);
            for (std::size_t i = 0; i < img.pixels.size(); ++i) {
                out.pixels[i] = clamp_trunc((1.0 + mag) * img.pixels[i] - mag * mean);
            }
            return out;
        }
        case RandAugmentOp::sharpness: return blend(img, sharpen_degenerate(img), 1.0 + mag);
        case RandAugmentOp::posterize: {
            const int bits = std::clamp(static_cast<int>(mag), 0, 8);
            const auto mask = static_cast<std::uint8_t>(0xFF << (8 - bits));
            Image out = img;
            for (auto& p : out.pixels) p &= mask;
            return out;
        }
        case RandAugmentOp::solarize: {
            Image out = img;
            for (auto& p : out.pixels) {
                if (p >= mag) p = static_cast<std::uint8_t>(255 - p);
            }
            return out;
        }
        case RandAugmentOp::autocontrast: return autocontrast(img);
        case RandAugmentOp::equalize: return equalize(img);
    }
    return img;
}

RandAugment::RandAugment(int num_ops, int magnitude, int bins) : num_ops_(num_ops), magnitude_(magnitude), bins_(bins) {
    if (num_ops < 0 || bins < 1 || magnitude < 0 || magnitude >= bins) {
        throw RangeError("randaugment: need 0 <= magnitude < bins and num_ops >= 0");
    }
}

Image RandAugment::augment(const Image& image, SplitMix64& rng) const {
    Image img = image;
    for (int i = 0; i < num_ops_; ++i) {
        const auto op = static_cast<RandAugmentOp>(rng.below(kRandAugmentOpCount));
        double mag = op_magnitude(op, magnitude_, bins_, img.width, img.height);
        if (op_signed(op) && rng.below(2) == 1) mag = -mag;
        img = apply_op(img, op, mag);
    }
    return img;
}

void RandAugment::apply(std::vector<Sample>& batch, SplitMix64& rng) const {
    for (auto& s : batch) s.image = augment(s.image, rng);
}

std::unique_ptr<AugmentationPolicy> make_policy(std::string_view name) {
    if (name.empty() || name == "none") return nullptr;
    if (name == "cutmix") return std::make_unique<CutMix>();
    if (name == "randaug") return std::make_unique<RandAugment>();
    throw ValidationError("policy", "unknown augmentation policy '" + std::string(name) + "'");
}

}  // namespace alia::train

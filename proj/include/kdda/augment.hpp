#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kdda/rng.hpp"
#include "kdda/tensor.hpp"

namespace kdda {

enum class DAKind { identity, flip, flip_crop, cutout, mixup, cutmix };

DAKind da_kind_from_string(const std::string& s);
std::string to_string(DAKind k);

struct DAScheme {
    DAKind kind = DAKind::identity;
    int cutout_length = 8;
    double mix_alpha = 1.0;
    int crop_pad = 4;

    void validate(int side) const;
};

struct CutBox {
    int x0 = 0, y0 = 0, w = 0, h = 0;
    int area() const { return w * h; }
};

// Mixing metadata for one augmented sample.
struct MixParams {
    double lambda = 1.0;
    int partner = -1;            // index into the original half
    double effective_ratio = 1.0;  // share of the sample still owned by the source image
    CutBox box;
    bool has_box = false;
};

struct LabeledBatch {
    Tensor images;  // {B, C, H, W}
    std::vector<int> labels;
    int size() const { return static_cast<int>(labels.size()); }
};

enum class LossMode { CePlusKl, KlOnly };

// Originals followed by their augmented copies. The first `original_count`
// samples are bit-identical to the input batch and carry CePlusKl; the rest
// carry KlOnly. `mix[i]` describes augmented sample `original_count + i`.
struct ComposedBatch {
    Tensor images;
    std::vector<int> labels;
    std::vector<LossMode> loss_mode;
    std::vector<MixParams> mix;
    int original_count = 0;

    int size() const { return static_cast<int>(labels.size()); }
    int augmented_count() const { return size() - original_count; }
};

// --- kernels (deterministic cores; rank-3 {C,H,W} images) ---

Tensor hflip(const Tensor& image, double p, Rng& rng);
Tensor pad_crop_at(const Tensor& image, int pad, int oy, int ox);
Tensor pad_crop(const Tensor& image, int pad, Rng& rng);
Tensor cutout_at(const Tensor& image, int length, int cy, int cx);
Tensor cutout(const Tensor& image, int length, Rng& rng);
Tensor mixup(const Tensor& xi, const Tensor& xj, double lambda);
CutBox cutmix_box(int h, int w, double lambda, int cy, int cx);
// Pastes the box region of xj onto xi; returns (image, effective area ratio).
std::pair<Tensor, double> cutmix_at(const Tensor& xi, const Tensor& xj, double lambda, int cy, int cx);
std::pair<Tensor, double> cutmix(const Tensor& xi, const Tensor& xj, double lambda, Rng& rng);

// Beta(alpha, alpha) draw; Uniform[0,1] at alpha = 1.
double sample_mix_lambda(double alpha, Rng& rng);

// The base pipeline: random horizontal flip then random pad-crop per sample.
LabeledBatch standard_flip_crop(const LabeledBatch& raw, int pad, Rng& rng);

// Doubles the batch: originals unchanged (CePlusKl) followed by one augmented
// copy each (KlOnly). Mix partners come from a uniform in-batch permutation;
// no labels are taken from the augmentation itself.
ComposedBatch compose_batch(const LabeledBatch& standard_batch, const DAScheme& scheme, Rng& rng);

}  // namespace kdda

#include "kdda/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace kdda {

DAKind da_kind_from_string(const std::string& s) {
    if (s == "identity") return DAKind::identity;
    if (s == "flip") return DAKind::flip;
    if (s == "flip_crop") return DAKind::flip_crop;
    if (s == "cutout") return DAKind::cutout;
    if (s == "mixup") return DAKind::mixup;
    if (s == "cutmix") return DAKind::cutmix;
    throw std::invalid_argument("unknown DA scheme: " + s);
}

std::string to_string(DAKind k) {
    switch (k) {
        case DAKind::identity: return "identity";
        case DAKind::flip: return "flip";
        case DAKind::flip_crop: return "flip_crop";
        case DAKind::cutout: return "cutout";
        case DAKind::mixup: return "mixup";
        case DAKind::cutmix: return "cutmix";
    }
    return "?";
}

void DAScheme::validate(int side) const {
    if (kind == DAKind::cutout && (cutout_length <= 0 || cutout_length > side))
        throw std::invalid_argument("cutout_length must be in (0, image side]");
    if (mix_alpha <= 0.0) throw std::invalid_argument("mix_alpha must be positive");
    if (crop_pad < 0) throw std::invalid_argument("crop_pad must be >= 0");
}

namespace {
void check_image(const Tensor& t, const char* who) {
    if (t.rank() != 3)
        throw std::invalid_argument(std::string(who) + " expects a {C,H,W} image");
}
}  // namespace

Tensor hflip(const Tensor& image, double p, Rng& rng) {
    check_image(image, "hflip");
    Tensor out = image;
    if (p <= 0.0 || !rng.bernoulli(p)) return out;
    const int c = image.extent(0), h = image.extent(1), w = image.extent(2);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y) {
            double* row = out.data() + (static_cast<std::size_t>(ch) * h + y) * w;
            std::reverse(row, row + w);
        }
    return out;
}

Tensor pad_crop_at(const Tensor& image, int pad, int oy, int ox) {
    check_image(image, "pad_crop");
    if (pad < 0) throw std::invalid_argument("pad must be >= 0");
    if (oy < 0 || oy > 2 * pad || ox < 0 || ox > 2 * pad)
        throw std::invalid_argument("pad_crop offset out of range");
    const int c = image.extent(0), h = image.extent(1), w = image.extent(2);
    Tensor out(image.shape());
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y) {
            const int sy = y + oy - pad;  // source row in the unpadded image
            double* orow = out.data() + (static_cast<std::size_t>(ch) * h + y) * w;
            if (sy < 0 || sy >= h) continue;  // zero padding
            const double* irow = image.data() + (static_cast<std::size_t>(ch) * h + sy) * w;
            for (int x = 0; x < w; ++x) {
                const int sx = x + ox - pad;
                if (sx >= 0 && sx < w) orow[x] = irow[sx];
            }
        }
    }
    return out;
}

Tensor pad_crop(const Tensor& image, int pad, Rng& rng) {
    if (pad == 0) return image;
    const int oy = rng.uniform_int(2 * pad + 1);
    const int ox = rng.uniform_int(2 * pad + 1);
    return pad_crop_at(image, pad, oy, ox);
}

Tensor cutout_at(const Tensor& image, int length, int cy, int cx) {
    check_image(image, "cutout");
    const int c = image.extent(0), h = image.extent(1), w = image.extent(2);
    if (length <= 0 || length > std::min(h, w))
        throw std::invalid_argument("cutout length must be in (0, min(H,W)]");
    Tensor out = image;
    const int y0 = std::clamp(cy - length / 2, 0, h);
    const int y1 = std::clamp(cy - length / 2 + length, 0, h);
    const int x0 = std::clamp(cx - length / 2, 0, w);
    const int x1 = std::clamp(cx - length / 2 + length, 0, w);
    for (int ch = 0; ch < c; ++ch)
        for (int y = y0; y < y1; ++y) {
            double* row = out.data() + (static_cast<std::size_t>(ch) * h + y) * w;
            for (int x = x0; x < x1; ++x) row[x] = 0.0;
        }
    return out;
}

Tensor cutout(const Tensor& image, int length, Rng& rng) {
    const int cy = rng.uniform_int(image.extent(1));
    const int cx = rng.uniform_int(image.extent(2));
    return cutout_at(image, length, cy, cx);
}

Tensor mixup(const Tensor& xi, const Tensor& xj, double lambda) {
    if (xi.shape() != xj.shape()) throw std::invalid_argument("mixup shape mismatch");
    if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("mixup lambda outside [0,1]");
    Tensor out(xi.shape());
    for (int i = 0; i < xi.size(); ++i) out[i] = lambda * xi[i] + (1.0 - lambda) * xj[i];
    return out;
}

CutBox cutmix_box(int h, int w, double lambda, int cy, int cx) {
    const double cut = std::sqrt(std::max(0.0, 1.0 - lambda));
    const int bw = static_cast<int>(std::lround(w * cut));
    const int bh = static_cast<int>(std::lround(h * cut));
    CutBox box;
    box.x0 = std::clamp(cx - bw / 2, 0, w);
    box.y0 = std::clamp(cy - bh / 2, 0, h);
    box.w = std::clamp(cx - bw / 2 + bw, 0, w) - box.x0;
    box.h = std::clamp(cy - bh / 2 + bh, 0, h) - box.y0;
    return box;
}

std::pair<Tensor, double> cutmix_at(const Tensor& xi, const Tensor& xj, double lambda, int cy, int cx) {
    if (xi.shape() != xj.shape()) throw std::invalid_argument("cutmix shape mismatch");
    if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("cutmix lambda outside [0,1]");
    const int c = xi.extent(0), h = xi.extent(1), w = xi.extent(2);
    const CutBox box = cutmix_box(h, w, lambda, cy, cx);
    Tensor out = xi;
    for (int ch = 0; ch < c; ++ch)
        for (int y = box.y0; y < box.y0 + box.h; ++y) {
            double* orow = out.data() + (static_cast<std::size_t>(ch) * h + y) * w;
            const double* jrow = xj.data() + (static_cast<std::size_t>(ch) * h + y) * w;
            for (int x = box.x0; x < box.x0 + box.w; ++x) orow[x] = jrow[x];
        }
    const double ratio = 1.0 - static_cast<double>(box.area()) / (static_cast<double>(h) * w);
    return {std::move(out), ratio};
}

std::pair<Tensor, double> cutmix(const Tensor& xi, const Tensor& xj, double lambda, Rng& rng) {
    const int cy = rng.uniform_int(xi.extent(1));
    const int cx = rng.uniform_int(xi.extent(2));
    return cutmix_at(xi, xj, lambda, cy, cx);
}

double sample_mix_lambda(double alpha, Rng& rng) {
    if (alpha <= 0.0) throw std::invalid_argument("mix alpha must be positive");
    if (alpha == 1.0) return rng.uniform();
    return rng.beta(alpha, alpha);
}

namespace {
Tensor image_of(const Tensor& batch, int i) {
    const auto s = batch.slice(i);
    return Tensor::from({batch.extent(1), batch.extent(2), batch.extent(3)},
                        std::vector<double>(s.begin(), s.end()));
}

void put_image(Tensor& batch, int i, const Tensor& img) {
    auto dst = batch.slice(i);
    std::copy(img.data(), img.data() + img.size(), dst.begin());
}
}  // namespace

LabeledBatch standard_flip_crop(const LabeledBatch& raw, int pad, Rng& rng) {
    LabeledBatch out;
    out.images = raw.images;
    out.labels = raw.labels;
    for (int i = 0; i < raw.size(); ++i) {
        Tensor img = image_of(out.images, i);
        img = hflip(img, 0.5, rng);
        img = pad_crop(img, pad, rng);
        put_image(out.images, i, img);
    }
    return out;
}

ComposedBatch compose_batch(const LabeledBatch& standard_batch, const DAScheme& scheme, Rng& rng) {
    const int b = standard_batch.size();
    if (b == 0) throw std::invalid_argument("compose_batch on empty batch");
    scheme.validate(std::min(standard_batch.images.extent(2), standard_batch.images.extent(3)));

    ComposedBatch out;
    out.original_count = b;
    std::vector<int> shape = standard_batch.images.shape();
    shape[0] = 2 * b;
    out.images = Tensor(shape);
    out.labels.resize(static_cast<std::size_t>(2 * b));
    out.loss_mode.resize(static_cast<std::size_t>(2 * b));
    out.mix.resize(static_cast<std::size_t>(b));

    for (int i = 0; i < b; ++i) {
        const auto src = standard_batch.images.slice(i);
        std::copy(src.begin(), src.end(), out.images.slice(i).begin());
        out.labels[static_cast<std::size_t>(i)] = standard_batch.labels[static_cast<std::size_t>(i)];
        out.loss_mode[static_cast<std::size_t>(i)] = LossMode::CePlusKl;
    }

    const bool mixing = scheme.kind == DAKind::mixup || scheme.kind == DAKind::cutmix;
    std::vector<int> partners;
    if (mixing) partners = rng.permutation(b);

    for (int i = 0; i < b; ++i) {
        const Tensor xi = image_of(standard_batch.images, i);
        Tensor aug;
        MixParams mp;
        switch (scheme.kind) {
            case DAKind::identity:
                aug = xi;
                break;
            case DAKind::flip:
                aug = hflip(xi, 0.5, rng);
                break;
            case DAKind::flip_crop:
                aug = hflip(xi, 0.5, rng);
                aug = pad_crop(aug, scheme.crop_pad, rng);
                break;
            case DAKind::cutout:
                aug = cutout(xi, scheme.cutout_length, rng);
                break;
            case DAKind::mixup: {
                mp.partner = partners[static_cast<std::size_t>(i)];
                mp.lambda = sample_mix_lambda(scheme.mix_alpha, rng);
                mp.effective_ratio = mp.lambda;
                aug = mixup(xi, image_of(standard_batch.images, mp.partner), mp.lambda);
                break;
            }
            case DAKind::cutmix: {
                mp.partner = partners[static_cast<std::size_t>(i)];
                mp.lambda = sample_mix_lambda(scheme.mix_alpha, rng);
                const int cy = rng.uniform_int(xi.extent(1));
                const int cx = rng.uniform_int(xi.extent(2));
                mp.box = cutmix_box(xi.extent(1), xi.extent(2), mp.lambda, cy, cx);
                mp.has_box = true;
                auto [img, ratio] = cutmix_at(xi, image_of(standard_batch.images, mp.partner),
                                              mp.lambda, cy, cx);
                mp.effective_ratio = ratio;
                aug = std::move(img);
                break;
            }
        }
        put_image(out.images, b + i, aug);
        // the augmented copy keeps its source label; training never uses it
        // for cross-entropy (KlOnly), it only feeds the disagreement counter
        out.labels[static_cast<std::size_t>(b + i)] =
            standard_batch.labels[static_cast<std::size_t>(i)];
        out.loss_mode[static_cast<std::size_t>(b + i)] = LossMode::KlOnly;
        out.mix[static_cast<std::size_t>(i)] = mp;
    }
    return out;
}

}  // namespace kdda

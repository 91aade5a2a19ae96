#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "kdda/augment.hpp"

using namespace kdda;

namespace {
Tensor image3(int c, int h, int w, Rng& rng) {
    Tensor t({c, h, w});
    for (int i = 0; i < t.size(); ++i) t[i] = rng.uniform();
    return t;
}
}  // namespace

TEST_CASE("hflip") {
    Rng rng(1);
    Tensor img = Tensor::from({1, 1, 2}, {0.3, 0.8});

    Tensor same = hflip(img, 0.0, rng);
    CHECK(same == img);

    Tensor flipped = hflip(img, 1.0, rng);
    CHECK(flipped[0] == 0.8);
    CHECK(flipped[1] == 0.3);

    Tensor twice = hflip(flipped, 1.0, rng);
    CHECK(twice == img);
}

TEST_CASE("pad_crop") {
    Rng rng(2);
    Tensor img = image3(1, 2, 2, rng);
    CHECK(pad_crop(img, 0, rng) == img);

    // offset (0,0) with pad 1: the window starts in the zero border
    Tensor c = pad_crop_at(img, 1, 0, 0);
    CHECK(c.shape() == img.shape());
    CHECK(c[0 * 2 + 0] == 0.0);      // padded corner
    CHECK(c[0 * 2 + 1] == 0.0);      // padded top row
    CHECK(c[1 * 2 + 0] == 0.0);      // padded left column
    CHECK(c[1 * 2 + 1] == img[0]);   // original (0,0)

    // pixel multiset is a subset of original pixels plus zero
    Tensor big = image3(2, 6, 6, rng);
    std::multiset<double> source(big.data(), big.data() + big.size());
    source.insert(0.0);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor crop = pad_crop(big, 2, rng);
        for (int i = 0; i < crop.size(); ++i) {
            const bool ok = crop[i] == 0.0 || source.count(crop[i]) > 0;
            CHECK(ok);
        }
    }
}

TEST_CASE("cutout") {
    Rng rng(3);
    Tensor img = image3(2, 6, 6, rng);

    Tensor all_zero = cutout_at(img, 6, 3, 3);
    for (int i = 0; i < all_zero.size(); ++i) CHECK(all_zero[i] == 0.0);

    Tensor four = image3(1, 4, 4, rng);
    Tensor cut = cutout_at(four, 2, 1, 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            const double v = cut[y * 4 + x];
            if (y <= 1 && x <= 1)
                CHECK(v == 0.0);
            else
                CHECK(v == four[y * 4 + x]);
        }

    // zeroed row/column counts never exceed the cut length
    for (int trial = 0; trial < 50; ++trial) {
        const Tensor out = cutout(img, 3, rng);
        std::set<int> rows, cols;
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 6; ++x)
                if (out[y * 6 + x] == 0.0 && img[y * 6 + x] != 0.0) {
                    rows.insert(y);
                    cols.insert(x);
                }
        CHECK(rows.size() <= 3);
        CHECK(cols.size() <= 3);
    }

    CHECK_THROWS_AS(cutout_at(four, 0, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(cutout_at(four, 9, 0, 0), std::invalid_argument);
}

TEST_CASE("mixup") {
    Rng rng(4);
    Tensor a = image3(1, 2, 2, rng);
    Tensor b = image3(1, 2, 2, rng);

    CHECK(mixup(a, b, 1.0) == a);
    CHECK(mixup(a, b, 0.0) == b);

    Tensor x = Tensor::from({1, 1, 2}, {0.0, 2.0});
    Tensor y = Tensor::from({1, 1, 2}, {2.0, 0.0});
    Tensor mid = mixup(x, y, 0.5);
    CHECK(mid[0] == 1.0);
    CHECK(mid[1] == 1.0);

    // exact symmetry
    for (int trial = 0; trial < 20; ++trial) {
        const double lam = rng.uniform();
        CHECK(mixup(a, b, lam) == mixup(b, a, 1.0 - lam));
    }

    Tensor wrong({1, 3, 3});
    CHECK_THROWS_AS(mixup(a, wrong, 0.5), std::invalid_argument);
}

TEST_CASE("cutmix") {
    Rng rng(5);
    Tensor a = image3(1, 8, 8, rng);
    Tensor b = image3(1, 8, 8, rng);

    auto [img1, r1] = cutmix(a, b, 1.0, rng);
    CHECK(img1 == a);
    CHECK(r1 == 1.0);

    auto [img0, r0] = cutmix_at(a, b, 0.0, 4, 4);
    CHECK(img0 == b);
    CHECK(r0 == 0.0);

    for (int trial = 0; trial < 50; ++trial) {
        const double lam = rng.uniform();
        auto [out, ratio] = cutmix(a, b, lam, rng);
        int from_b = 0;
        for (int i = 0; i < out.size(); ++i) {
            const bool ok = out[i] == a[i] || out[i] == b[i];
            CHECK(ok);
            if (out[i] == b[i] && out[i] != a[i]) ++from_b;
        }
        CHECK(ratio >= 0.0);
        CHECK(ratio <= 1.0);
        CHECK(from_b <= std::lround((1.0 - ratio) * 64));
    }
}

TEST_CASE("sample_mix_lambda distribution") {
    Rng rng(6);
    const int n = 100000;
    std::vector<double> draws(n);
    double mean = 0.0;
    for (int i = 0; i < n; ++i) {
        draws[static_cast<std::size_t>(i)] = sample_mix_lambda(1.0, rng);
        mean += draws[static_cast<std::size_t>(i)];
    }
    mean /= n;
    CHECK(std::abs(mean - 0.5) < 0.01);

    // Kolmogorov-Smirnov distance to Uniform[0,1]
    std::sort(draws.begin(), draws.end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = draws[static_cast<std::size_t>(i)];
        ks = std::max(ks, std::abs(x - static_cast<double>(i) / n));
        ks = std::max(ks, std::abs(x - static_cast<double>(i + 1) / n));
    }
    CHECK(ks < 0.01);

    // alpha = 0.2 has more variance than uniform (1/12)
    double m2 = 0.0, m1 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = sample_mix_lambda(0.2, rng);
        m1 += x;
        m2 += x * x;
    }
    m1 /= n;
    m2 = m2 / n - m1 * m1;
    CHECK(m2 > 1.0 / 12.0);

    CHECK_THROWS_AS(sample_mix_lambda(0.0, rng), std::invalid_argument);
}

TEST_CASE("compose_batch identity doubles the batch bit-identically") {
    Rng rng(7);
    LabeledBatch batch;
    batch.images = Tensor({2, 1, 4, 4});
    for (int i = 0; i < batch.images.size(); ++i) batch.images[i] = rng.uniform();
    batch.labels = {0, 1};

    DAScheme scheme;
    scheme.kind = DAKind::identity;
    const ComposedBatch cb = compose_batch(batch, scheme, rng);
    CHECK(cb.size() == 4);
    CHECK(cb.original_count == 2);
    for (int i = 0; i < 2; ++i) {
        const auto orig = cb.images.slice(i);
        const auto aug = cb.images.slice(2 + i);
        for (std::size_t j = 0; j < orig.size(); ++j) CHECK(orig[j] == aug[j]);
        CHECK(cb.labels[static_cast<std::size_t>(i)] == batch.labels[static_cast<std::size_t>(i)]);
        CHECK(cb.loss_mode[static_cast<std::size_t>(i)] == LossMode::CePlusKl);
        CHECK(cb.loss_mode[static_cast<std::size_t>(2 + i)] == LossMode::KlOnly);
    }
}

TEST_CASE("compose_batch mix schemes degenerate on constant batches") {
    // if every image in the batch is the same, mix partners change nothing
    Rng rng(8);
    LabeledBatch batch;
    batch.images = Tensor({3, 1, 4, 4});
    Tensor proto = image3(1, 4, 4, rng);
    for (int i = 0; i < 3; ++i) {
        auto dst = batch.images.slice(i);
        std::copy(proto.data(), proto.data() + proto.size(), dst.begin());
    }
    batch.labels = {0, 1, 2};

    for (const DAKind kind : {DAKind::mixup, DAKind::cutmix}) {
        DAScheme scheme;
        scheme.kind = kind;
        Rng local(9);
        const ComposedBatch cb = compose_batch(batch, scheme, local);
        for (int i = 0; i < 3; ++i) {
            const auto orig = cb.images.slice(i);
            const auto aug = cb.images.slice(3 + i);
            for (std::size_t j = 0; j < orig.size(); ++j)
                CHECK(aug[j] == doctest::Approx(orig[j]).epsilon(1e-15));
        }
    }
}

TEST_CASE("compose_batch loss-mode pattern and shape for every scheme") {
    Rng rng(10);
    LabeledBatch batch;
    batch.images = Tensor({4, 1, 8, 8});
    for (int i = 0; i < batch.images.size(); ++i) batch.images[i] = rng.uniform();
    batch.labels = {0, 1, 2, 3};

    for (const DAKind kind : {DAKind::identity, DAKind::flip, DAKind::flip_crop, DAKind::cutout,
                              DAKind::mixup, DAKind::cutmix}) {
        DAScheme scheme;
        scheme.kind = kind;
        scheme.cutout_length = 4;
        Rng local(11);
        const ComposedBatch cb = compose_batch(batch, scheme, local);
        CHECK(cb.size() == 8);
        CHECK(cb.images.shape() == std::vector<int>{8, 1, 8, 8});
        for (int i = 0; i < 4; ++i) {
            CHECK(cb.loss_mode[static_cast<std::size_t>(i)] == LossMode::CePlusKl);
            CHECK(cb.loss_mode[static_cast<std::size_t>(4 + i)] == LossMode::KlOnly);
            // original half bit-identical
            const auto orig = cb.images.slice(i);
            const auto src = batch.images.slice(i);
            for (std::size_t j = 0; j < orig.size(); ++j) CHECK(orig[j] == src[j]);
        }
        // pixel values stay inside the input range, or zero fill
        for (int i = 0; i < cb.images.size(); ++i) {
            CHECK(cb.images[i] >= 0.0);
            CHECK(cb.images[i] <= 1.0);
        }
    }

    LabeledBatch empty;
    DAScheme scheme;
    CHECK_THROWS(compose_batch(empty, scheme, rng));
}

TEST_CASE("determinism: identical inputs and seed give identical outputs") {
    LabeledBatch batch;
    Rng gen(12);
    batch.images = Tensor({4, 1, 8, 8});
    for (int i = 0; i < batch.images.size(); ++i) batch.images[i] = gen.uniform();
    batch.labels = {0, 1, 0, 1};

    DAScheme scheme;
    scheme.kind = DAKind::cutmix;
    Rng r1(77), r2(77);
    const ComposedBatch a = compose_batch(batch, scheme, r1);
    const ComposedBatch b = compose_batch(batch, scheme, r2);
    CHECK(a.images == b.images);
    CHECK(a.labels == b.labels);
    for (std::size_t i = 0; i < a.mix.size(); ++i) {
        CHECK(a.mix[i].lambda == b.mix[i].lambda);
        CHECK(a.mix[i].partner == b.mix[i].partner);
        CHECK(a.mix[i].effective_ratio == b.mix[i].effective_ratio);
    }
}

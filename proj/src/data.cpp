#include "kdda/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "kdda/rng.hpp"

namespace kdda {

void Dataset::validate() const {
    if (size() <= 0) throw std::invalid_argument("dataset is empty");
    if (images.rank() != 4 || images.extent(0) != size())
        throw std::invalid_argument("dataset image/label count mismatch");
    if (class_count <= 0) throw std::invalid_argument("dataset class_count must be positive");
    for (const int y : labels)
        if (y < 0 || y >= class_count) throw std::invalid_argument("dataset label out of range");
}

namespace {

// One rendered pattern. Families cycle with the class index; the parameter
// slot within a family comes from class/3.
void render_pattern(double* img, int side, int cls, int classes, Rng& rng, double noise_sigma) {
    const int family = cls % 3;
    const int idx = cls / 3;
    const int family_count = (classes - family + 2) / 3;

    const double jx = rng.uniform(-2.5, 2.5);
    const double jy = rng.uniform(-2.5, 2.5);
    const double scale = rng.uniform(0.8, 1.2);
    // bounded phase jitter keeps the class pixel means structured
    const double phase = rng.uniform(-0.9, 0.9);
    const double ex = side / 2.0 + jx;  // envelope / ring center
    const double ey = side / 2.0 + jy;
    const double env_sigma = 0.38 * side * scale;

    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            // carrier anchored to the frame, envelope follows the jitter
            const double px = (x - side / 2.0) / scale;
            const double py = (y - side / 2.0) / scale;
            const double de2 = (x - ex) * (x - ex) + (y - ey) * (y - ey);
            const double env = std::exp(-de2 / (2.0 * env_sigma * env_sigma));
            double v = 0.0;
            if (family == 0) {
                // oriented grating under a Gaussian window
                const double theta = std::numbers::pi * idx / std::max(1, family_count);
                const double u = px * std::cos(theta) + py * std::sin(theta);
                const double wavelength = side / 3.0;
                v = 0.5 + 0.45 * env * std::cos(2.0 * std::numbers::pi * u / wavelength + phase);
            } else if (family == 1) {
                // bright ring of class-specific radius
                const double r = (side / 2.0) * (0.25 + 0.6 * idx / std::max(1, family_count - 1));
                const double d = std::sqrt((x - ex) * (x - ex) + (y - ey) * (y - ey)) / scale;
                const double width = 1.3;
                v = 0.12 + 0.82 * std::exp(-(d - r) * (d - r) / (2.0 * width * width));
            } else {
                // checker with class-specific period
                const double period = 4.0 + 2.0 * idx;
                const double a = std::cos(2.0 * std::numbers::pi * px / period + phase);
                const double b = std::cos(2.0 * std::numbers::pi * py / period + phase);
                v = 0.5 + 0.45 * env * a * b;
            }
            v += noise_sigma * rng.normal();
            img[y * side + x] = std::clamp(v, 0.0, 1.0);
        }
    }
}

}  // namespace

std::pair<Dataset, Dataset> gen_synthetic(int classes, int per_class, int side, std::uint64_t seed) {
    if (classes < 2) throw std::invalid_argument("gen_synthetic needs at least 2 classes");
    if (side < 8) throw std::invalid_argument("gen_synthetic needs side >= 8");
    if (per_class < 5) throw std::invalid_argument("gen_synthetic needs per_class >= 5");

    const int train_per_class = (per_class * 4) / 5;
    const int test_per_class = per_class - train_per_class;
    const double noise_sigma = 0.22;

    Dataset train, test;
    train.split = "train";
    test.split = "test";
    train.class_count = test.class_count = classes;
    train.images = Tensor({classes * train_per_class, 1, side, side});
    test.images = Tensor({classes * test_per_class, 1, side, side});

    int tr = 0, te = 0;
    for (int c = 0; c < classes; ++c) {
        Rng rng(Rng::derive(seed, {0xDA7Au, static_cast<std::uint64_t>(c)}));
        for (int i = 0; i < per_class; ++i) {
            const bool is_train = i < train_per_class;
            double* img = is_train ? train.images.slice(tr).data() : test.images.slice(te).data();
            render_pattern(img, side, c, classes, rng, noise_sigma);
            if (is_train) {
                train.labels.push_back(c);
                ++tr;
            } else {
                test.labels.push_back(c);
                ++te;
            }
        }
    }
    return {std::move(train), std::move(test)};
}

namespace {
constexpr int kCifarPixels = 3072;

std::size_t record_size(CifarVariant v) {
    return v == CifarVariant::cifar10 ? 3073 : 3074;
}
}  // namespace

Dataset load_cifar_binary(const std::string& path, CifarVariant variant) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open CIFAR file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    const std::size_t rec = record_size(variant);
    if (bytes.empty() || bytes.size() % rec != 0) {
        const std::size_t offset = (bytes.size() / rec) * rec;
        char msg[128];
        std::snprintf(msg, sizeof(msg),
                      "malformed CIFAR file: partial record starting at byte %zu", offset);
        throw MalformedFileError(msg, offset);
    }

    const int n = static_cast<int>(bytes.size() / rec);
    const int classes = variant == CifarVariant::cifar10 ? 10 : 100;
    Dataset ds;
    ds.split = "train";
    ds.class_count = classes;
    ds.images = Tensor({n, 3, 32, 32});
    ds.labels.resize(static_cast<std::size_t>(n));

    for (int i = 0; i < n; ++i) {
        const unsigned char* r = bytes.data() + static_cast<std::size_t>(i) * rec;
        const int label = variant == CifarVariant::cifar10 ? r[0] : r[1];  // fine label
        if (label >= classes) {
            const std::size_t offset = static_cast<std::size_t>(i) * rec;
            char msg[128];
            std::snprintf(msg, sizeof(msg), "malformed CIFAR record: label %d at byte %zu",
                          label, offset);
            throw MalformedFileError(msg, offset);
        }
        ds.labels[static_cast<std::size_t>(i)] = label;
        const unsigned char* px = r + (variant == CifarVariant::cifar10 ? 1 : 2);
        double* img = ds.images.slice(i).data();
        for (int j = 0; j < kCifarPixels; ++j) img[j] = px[j] / 255.0;
    }
    return ds;
}

void write_cifar_binary(const Dataset& ds, const std::string& path, CifarVariant variant) {
    ds.validate();
    if (ds.images.extent(1) != 3 || ds.images.extent(2) != 32 || ds.images.extent(3) != 32)
        throw std::invalid_argument("CIFAR writer needs {N,3,32,32} images");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    for (int i = 0; i < ds.size(); ++i) {
        if (variant == CifarVariant::cifar100) out.put(0);  // coarse label not tracked
        out.put(static_cast<char>(ds.labels[static_cast<std::size_t>(i)]));
        const double* img = ds.images.slice(i).data();
        for (int j = 0; j < kCifarPixels; ++j) {
            const long b = std::lround(std::clamp(img[j], 0.0, 1.0) * 255.0);
            out.put(static_cast<char>(static_cast<unsigned char>(b)));
        }
    }
}

std::vector<std::vector<int>> batches(int dataset_size, int batch_size,
                                      std::uint64_t shuffle_seed, int epoch) {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    Rng rng(Rng::derive(shuffle_seed, {0xBA7C4u, static_cast<std::uint64_t>(epoch)}));
    const std::vector<int> perm = rng.permutation(dataset_size);
    std::vector<std::vector<int>> out;
    for (int start = 0; start < dataset_size; start += batch_size) {
        const int end = std::min(dataset_size, start + batch_size);
        out.emplace_back(perm.begin() + start, perm.begin() + end);
    }
    return out;
}

Tensor gather_images(const Dataset& ds, const std::vector<int>& idx) {
    const int stride = ds.images.size() / ds.images.extent(0);
    std::vector<int> shape = ds.images.shape();
    shape[0] = static_cast<int>(idx.size());
    Tensor out(shape);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto src = ds.images.slice(idx[i]);
        std::copy(src.begin(), src.end(), out.data() + i * static_cast<std::size_t>(stride));
    }
    return out;
}

std::vector<int> gather_labels(const Dataset& ds, const std::vector<int>& idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
        out[i] = ds.labels[static_cast<std::size_t>(idx[i])];
    return out;
}

}  // namespace kdda

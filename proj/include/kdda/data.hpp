#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kdda/tensor.hpp"

namespace kdda {

struct Dataset {
    Tensor images;  // {N, C, H, W}, values in [0,1]
    std::vector<int> labels;
    int class_count = 0;
    std::string split;

    int size() const { return static_cast<int>(labels.size()); }
    void validate() const;
};

enum class CifarVariant { cifar10, cifar100 };

struct MalformedFileError : std::runtime_error {
    MalformedFileError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg), byte_offset(offset) {}
    std::size_t byte_offset;
};

// Procedural image-classification data: each class renders one pattern family
// (oriented gratings / rings / checkers) with per-sample jitter in position,
// scale and additive noise. Returns (train, test) with an exact 80/20 split
// per class. Fully determined by the seed.
std::pair<Dataset, Dataset> gen_synthetic(int classes, int per_class, int side, std::uint64_t seed);

// CIFAR binary records: cifar10 = [label u8][3072 px], cifar100 =
// [coarse u8][fine u8][3072 px]; pixels channel-planar RGB, row-major 32x32,
// scaled to [0,1] by /255. Fine label used for cifar100.
Dataset load_cifar_binary(const std::string& path, CifarVariant variant);

// Inverse of the loader (coarse byte written as 0). Pixels are quantized by
// round(x*255); a loaded dataset round-trips bit-exactly.
void write_cifar_binary(const Dataset& ds, const std::string& path, CifarVariant variant);

// Per-epoch shuffled index batches; the permutation is derived from
// (shuffle_seed, epoch), the final short batch is kept.
std::vector<std::vector<int>> batches(int dataset_size, int batch_size,
                                      std::uint64_t shuffle_seed, int epoch);

// Copy the indexed samples into a fresh {n,C,H,W} batch tensor.
Tensor gather_images(const Dataset& ds, const std::vector<int>& idx);
std::vector<int> gather_labels(const Dataset& ds, const std::vector<int>& idx);

}  // namespace kdda

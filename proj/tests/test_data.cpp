#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "kdda/data.hpp"
#include "kdda/rng.hpp"

using namespace kdda;

namespace {
std::string temp_path(const char* name) {
    return std::string("/tmp/kdda_test_") + name;
}

std::vector<unsigned char> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}
}  // namespace

TEST_CASE("gen_synthetic determinism and shapes") {
    auto [train1, test1] = gen_synthetic(10, 200, 16, 5);
    auto [train2, test2] = gen_synthetic(10, 200, 16, 5);
    CHECK(train1.images == train2.images);
    CHECK(train1.labels == train2.labels);
    CHECK(test1.images == test2.images);

    CHECK(train1.images.shape() == std::vector<int>{1600, 1, 16, 16});
    CHECK(test1.images.shape() == std::vector<int>{400, 1, 16, 16});
    CHECK(train1.class_count == 10);

    auto [train3, _] = gen_synthetic(10, 200, 16, 6);
    CHECK_FALSE(train1.images == train3.images);

    // exact class balance in both splits
    std::vector<int> train_counts(10, 0), test_counts(10, 0);
    for (const int y : train1.labels) ++train_counts[static_cast<std::size_t>(y)];
    for (const int y : test1.labels) ++test_counts[static_cast<std::size_t>(y)];
    for (int c = 0; c < 10; ++c) {
        CHECK(train_counts[static_cast<std::size_t>(c)] == 160);
        CHECK(test_counts[static_cast<std::size_t>(c)] == 40);
    }

    // pixel range
    for (int i = 0; i < train1.images.size(); ++i) {
        CHECK(train1.images[i] >= 0.0);
        CHECK(train1.images[i] <= 1.0);
    }

    CHECK_THROWS_AS(gen_synthetic(1, 100, 16, 1), std::invalid_argument);
    CHECK_THROWS_AS(gen_synthetic(10, 100, 4, 1), std::invalid_argument);
}

TEST_CASE("gen_synthetic classes are separable in pixel space") {
    auto [train, test] = gen_synthetic(6, 120, 16, 11);
    const int d = 16 * 16;
    // per-class pixel means
    std::vector<std::vector<double>> mean(6, std::vector<double>(static_cast<std::size_t>(d), 0.0));
    std::vector<int> counts(6, 0);
    for (int i = 0; i < train.size(); ++i) {
        const int y = train.labels[static_cast<std::size_t>(i)];
        const auto img = train.images.slice(i);
        for (int j = 0; j < d; ++j) mean[static_cast<std::size_t>(y)][static_cast<std::size_t>(j)] += img[static_cast<std::size_t>(j)];
        ++counts[static_cast<std::size_t>(y)];
    }
    for (int c = 0; c < 6; ++c)
        for (int j = 0; j < d; ++j) mean[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] /= counts[static_cast<std::size_t>(c)];

    // within-class pixel stderr bound: pixel sd <= 0.5, n per class = 96
    const double sem = 0.5 / std::sqrt(96.0);
    int significant_pairs = 0;
    for (int a = 0; a < 6; ++a)
        for (int b = a + 1; b < 6; ++b) {
            double max_gap = 0.0;
            for (int j = 0; j < d; ++j)
                max_gap = std::max(max_gap, std::abs(mean[static_cast<std::size_t>(a)][static_cast<std::size_t>(j)] -
                                                     mean[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)]));
            if (max_gap > 5.0 * sem) ++significant_pairs;
        }
    CHECK(significant_pairs == 15);  // every pair differs significantly somewhere
}

TEST_CASE("cifar loader: single all-zero cifar100 record") {
    const std::string path = temp_path("zero.bin");
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        for (int i = 0; i < 3074; ++i) out.put(0);
    }
    const Dataset ds = load_cifar_binary(path, CifarVariant::cifar100);
    CHECK(ds.size() == 1);
    CHECK(ds.labels[0] == 0);
    CHECK(ds.class_count == 100);
    for (int i = 0; i < ds.images.size(); ++i) CHECK(ds.images[i] == 0.0);
    std::remove(path.c_str());
}

TEST_CASE("cifar loader: 3-record file round-trips bit-exactly") {
    const std::string path = temp_path("three.bin");
    {
        Rng rng(13);
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        for (int r = 0; r < 3; ++r) {
            out.put(static_cast<char>(rng.uniform_int(20)));   // coarse (ignored)
            out.put(static_cast<char>(rng.uniform_int(100)));  // fine
            for (int i = 0; i < 3072; ++i) out.put(static_cast<char>(rng.uniform_int(256)));
        }
    }
    // writer normalizes the coarse byte to zero, so round-trip from the
    // loaded dataset (write -> read) must be exact
    const Dataset ds = load_cifar_binary(path, CifarVariant::cifar100);
    CHECK(ds.size() == 3);
    const std::string path2 = temp_path("three_rt.bin");
    write_cifar_binary(ds, path2, CifarVariant::cifar100);
    const Dataset ds2 = load_cifar_binary(path2, CifarVariant::cifar100);
    CHECK(ds.images == ds2.images);
    CHECK(ds.labels == ds2.labels);

    // and a written file re-writes to identical bytes
    const std::string path3 = temp_path("three_rt2.bin");
    write_cifar_binary(ds2, path3, CifarVariant::cifar100);
    CHECK(read_bytes(path2) == read_bytes(path3));
    std::remove(path.c_str());
    std::remove(path2.c_str());
    std::remove(path3.c_str());
}

TEST_CASE("cifar loader: truncation errors carry the byte offset") {
    const std::string path = temp_path("trunc.bin");
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        for (int i = 0; i < 3073; ++i) out.put(1);  // cifar100 record minus one byte
    }
    try {
        load_cifar_binary(path, CifarVariant::cifar100);
        FAIL("expected MalformedFileError");
    } catch (const MalformedFileError& e) {
        CHECK(e.byte_offset == 0);
    }

    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        for (int i = 0; i < 2 * 3073 + 100; ++i) out.put(0);  // cifar10: 2 records + partial
    }
    try {
        load_cifar_binary(path, CifarVariant::cifar10);
        FAIL("expected MalformedFileError");
    } catch (const MalformedFileError& e) {
        CHECK(e.byte_offset == 2 * 3073);
    }
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_cifar_binary("/nonexistent/nope.bin", CifarVariant::cifar10),
                    std::runtime_error);
}

TEST_CASE("batches cover the dataset exactly") {
    const auto one = batches(10, 64, 3, 0);
    CHECK(one.size() == 1);
    CHECK(one[0].size() == 10);

    const auto bs = batches(103, 16, 9, 4);
    CHECK(bs.size() == 7);
    CHECK(bs.back().size() == 103 - 6 * 16);
    std::set<int> seen;
    for (const auto& b : bs)
        for (const int i : b) seen.insert(i);
    CHECK(seen.size() == 103);
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == 102);

    CHECK(batches(50, 8, 1, 2) == batches(50, 8, 1, 2));
    CHECK_FALSE(batches(50, 8, 1, 2) == batches(50, 8, 1, 3));
    CHECK_FALSE(batches(50, 8, 1, 2) == batches(50, 8, 2, 2));

    CHECK_THROWS_AS(batches(10, 0, 1, 0), std::invalid_argument);
}

#pragma once

#include <span>
#include <string>
#include <vector>

namespace kdda {

// Dense row-major double tensor. Substrate for images, logits, probabilities
// and gradients throughout the project.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape, double fill = 0.0);
    static Tensor from(std::vector<int> shape, std::vector<double> values);

    const std::vector<int>& shape() const { return shape_; }
    int size() const { return static_cast<int>(data_.size()); }
    int extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
    int rank() const { return static_cast<int>(shape_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](int i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return data_[static_cast<std::size_t>(i)]; }

    // Contiguous slice along axis 0 (e.g. one sample of a batch).
    std::span<double> slice(int index);
    std::span<const double> slice(int index) const;

    void fill(double v);
    bool all_finite() const;

    std::string shape_str() const;

    bool operator==(const Tensor& other) const = default;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

int shape_product(const std::vector<int>& shape);

// Throws std::runtime_error naming `where` if any entry is NaN/Inf.
void require_finite(const Tensor& t, const char* where);

}  // namespace kdda

#include "kdda/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace kdda {

int shape_product(const std::vector<int>& shape) {
    int n = 1;
    for (const int e : shape) {
        if (e <= 0) throw std::invalid_argument("tensor extent must be positive");
        n *= e;
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape, double fill)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_product(shape_)), fill) {}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
    Tensor t;
    const int n = shape_product(shape);
    if (static_cast<std::size_t>(n) != values.size())
        throw std::invalid_argument("tensor value count does not match shape");
    t.shape_ = std::move(shape);
    t.data_ = std::move(values);
    return t;
}

std::span<double> Tensor::slice(int index) {
    const int stride = size() / extent(0);
    return {data_.data() + static_cast<std::size_t>(index) * static_cast<std::size_t>(stride),
            static_cast<std::size_t>(stride)};
}

std::span<const double> Tensor::slice(int index) const {
    const int stride = size() / extent(0);
    return {data_.data() + static_cast<std::size_t>(index) * static_cast<std::size_t>(stride),
            static_cast<std::size_t>(stride)};
}

void Tensor::fill(double v) {
    for (auto& x : data_) x = v;
}

bool Tensor::all_finite() const {
    for (const double x : data_)
        if (!std::isfinite(x)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << 'x';
        os << shape_[i];
    }
    os << ']';
    return os.str();
}

void require_finite(const Tensor& t, const char* where) {
    if (!t.all_finite())
        throw std::runtime_error(std::string("non-finite values in ") + where);
}

}  // namespace kdda

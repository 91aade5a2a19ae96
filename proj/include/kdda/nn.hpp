#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "kdda/tensor.hpp"

namespace kdda {

// One stage of a feed-forward network. forward() caches whatever backward()
// needs; backward() returns the gradient w.r.t. the layer input and
// accumulates parameter gradients.
class Layer {
public:
    virtual ~Layer() = default;
    virtual std::string spec() const = 0;
    virtual std::vector<int> out_shape(const std::vector<int>& in) const = 0;
    virtual Tensor forward(const Tensor& x) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual std::vector<Tensor*> params() { return {}; }
    virtual std::vector<Tensor*> grads() { return {}; }
    virtual std::unique_ptr<Layer> clone() const = 0;
};

// 3x3 convolution, stride 1, zero padding 1 (shape preserving).
class Conv3x3 : public Layer {
public:
    Conv3x3(int in_channels, int out_channels);
    std::string spec() const override;
    std::vector<int> out_shape(const std::vector<int>& in) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Tensor*> params() override { return {&weight_, &bias_}; }
    std::vector<Tensor*> grads() override { return {&dweight_, &dbias_}; }
    std::unique_ptr<Layer> clone() const override;

private:
    int in_c_, out_c_;
    Tensor weight_, bias_;    // {out,in,3,3}, {out}
    Tensor dweight_, dbias_;
    Tensor input_;
};

// Fully connected layer; flattens everything after the batch axis.
class Dense : public Layer {
public:
    Dense(int in_features, int out_features);
    std::string spec() const override;
    std::vector<int> out_shape(const std::vector<int>& in) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Tensor*> params() override { return {&weight_, &bias_}; }
    std::vector<Tensor*> grads() override { return {&dweight_, &dbias_}; }
    std::unique_ptr<Layer> clone() const override;

private:
    int in_f_, out_f_;
    Tensor weight_, bias_;    // {out,in}, {out}
    Tensor dweight_, dbias_;
    Tensor input_;
    std::vector<int> in_shape_;
};

class Relu : public Layer {
public:
    std::string spec() const override { return "relu"; }
    std::vector<int> out_shape(const std::vector<int>& in) const override { return in; }
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(); }

private:
    Tensor input_;
};

// 2x2 max pooling, stride 2. Requires even spatial extents.
class MaxPool2 : public Layer {
public:
    std::string spec() const override { return "maxpool2"; }
    std::vector<int> out_shape(const std::vector<int>& in) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2>(); }

private:
    std::vector<int> in_shape_;
    std::vector<int> argmax_;
};

// Global average pool: {N,C,H,W} -> {N,C}.
class GlobalAvgPool : public Layer {
public:
    std::string spec() const override { return "gap"; }
    std::vector<int> out_shape(const std::vector<int>& in) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<GlobalAvgPool>(); }

private:
    std::vector<int> in_shape_;
};

// Ordered layer stack with He-normal initialization from a seed. Built from a
// comma-separated spec, e.g. "conv3x3:1:12,relu,maxpool2,dense:768:10".
class Model {
public:
    Model() = default;
    Model(const Model& other);
    Model& operator=(const Model& other);
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;

    static Model from_spec(const std::string& spec, std::uint64_t init_seed);

    Tensor forward(const Tensor& x);
    // Gradient of the loss w.r.t. the forward output; fills parameter grads.
    void backward(const Tensor& grad_out);

    std::vector<Tensor*> params();
    std::vector<Tensor*> grads();
    std::vector<const Tensor*> params() const;
    void zero_grads();
    int param_count() const;

    std::string spec() const;
    std::vector<int> out_shape(const std::vector<int>& in) const;

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    bool has_forwarded_ = false;
};

}  // namespace kdda

#pragma once

#include <vector>

#include "kdda/tensor.hpp"

namespace kdda {

// Multi-step decay schedule. When total epochs are scaled by k, every decay
// boundary moves to round(k * epoch) as well.
struct ScheduleConfig {
    double base_lr = 0.05;
    int total_epochs = 240;
    std::vector<int> decay_epochs = {150, 180, 210};
    double decay_factor = 0.1;
    double epoch_scale_k = 1.0;

    int scaled_total() const;
    void validate() const;
};

// Learning rate at `epoch` (0-based) under the scaled schedule.
double lr_at(int epoch, const ScheduleConfig& sched);

// v <- momentum*v + grad + weight_decay*param; param <- param - lr*v
void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr,
              double momentum = 0.9, double weight_decay = 5e-4);

// Momentum buffers paired one-to-one with the parameter list they were
// built from.
class Sgd {
public:
    Sgd(const std::vector<Tensor*>& params, double momentum = 0.9, double weight_decay = 5e-4);
    void step(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads, double lr);

private:
    std::vector<Tensor> velocity_;
    double momentum_;
    double weight_decay_;
};

}  // namespace kdda

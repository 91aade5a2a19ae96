#include "kdda/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace kdda {

int ScheduleConfig::scaled_total() const {
    return static_cast<int>(std::lround(epoch_scale_k * total_epochs));
}

void ScheduleConfig::validate() const {
    if (base_lr <= 0.0) throw std::invalid_argument("base_lr must be positive");
    if (total_epochs <= 0) throw std::invalid_argument("total_epochs must be positive");
    if (decay_factor <= 0.0) throw std::invalid_argument("decay_factor must be positive");
    if (epoch_scale_k <= 0.0) throw std::invalid_argument("epoch_scale_k must be positive");
    int prev = -1;
    for (const int e : decay_epochs) {
        if (e <= prev) throw std::invalid_argument("decay_epochs must be strictly increasing");
        if (e >= total_epochs) throw std::invalid_argument("decay epoch beyond total_epochs");
        prev = e;
    }
}

double lr_at(int epoch, const ScheduleConfig& sched) {
    sched.validate();
    if (epoch < 0 || epoch >= sched.scaled_total())
        throw std::out_of_range("epoch outside the scheduled range");
    int decays = 0;
    for (const int e : sched.decay_epochs) {
        const int scaled = static_cast<int>(std::lround(sched.epoch_scale_k * e));
        if (scaled <= epoch) ++decays;
    }
    return sched.base_lr * std::pow(sched.decay_factor, decays);
}

void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr,
              double momentum, double weight_decay) {
    if (param.shape() != grad.shape() || param.shape() != velocity.shape())
        throw std::invalid_argument("sgd_step shape mismatch");
    for (int i = 0; i < param.size(); ++i) {
        velocity[i] = momentum * velocity[i] + grad[i] + weight_decay * param[i];
        param[i] -= lr * velocity[i];
    }
}

Sgd::Sgd(const std::vector<Tensor*>& params, double momentum, double weight_decay)
    : momentum_(momentum), weight_decay_(weight_decay) {
    velocity_.reserve(params.size());
    for (const Tensor* p : params) velocity_.emplace_back(p->shape());
}

void Sgd::step(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads, double lr) {
    if (params.size() != velocity_.size() || grads.size() != velocity_.size())
        throw std::invalid_argument("optimizer parameter list changed size");
    for (std::size_t i = 0; i < params.size(); ++i)
        sgd_step(*params[i], *grads[i], velocity_[i], lr, momentum_, weight_decay_);
}

}  // namespace kdda

#include "kdda/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

namespace kdda {

namespace {
std::atomic<std::uint64_t> g_clamp_count{0};

double clamped_log(double x) {
    if (x < kLogEps) {
        g_clamp_count.fetch_add(1, std::memory_order_relaxed);
        x = kLogEps;
    }
    return std::log(x);
}
}  // namespace

std::uint64_t log_clamp_count() { return g_clamp_count.load(std::memory_order_relaxed); }
void reset_log_clamp_count() { g_clamp_count.store(0, std::memory_order_relaxed); }

void softmax_temp_into(std::span<const double> logits, double tau, std::span<double> out) {
    if (tau <= 0.0) throw std::invalid_argument("softmax temperature must be positive");
    if (logits.empty()) throw std::invalid_argument("softmax on empty logits");
    double mx = logits[0];
    for (const double z : logits) {
        if (!std::isfinite(z)) throw std::invalid_argument("non-finite logit in softmax");
        mx = std::max(mx, z);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp((logits[i] - mx) / tau);
        sum += out[i];
    }
    for (auto& p : out) p /= sum;
}

std::vector<double> softmax_temp(std::span<const double> logits, double tau) {
    std::vector<double> out(logits.size());
    softmax_temp_into(logits, tau, out);
    return out;
}

double cross_entropy(int y, std::span<const double> probs) {
    if (y < 0 || static_cast<std::size_t>(y) >= probs.size())
        throw std::invalid_argument("label out of range in cross_entropy");
    return -clamped_log(probs[static_cast<std::size_t>(y)]);
}

double cross_entropy_batch(std::span<const int> labels, std::span<const double> probs, int classes) {
    if (labels.empty()) throw std::invalid_argument("cross_entropy_batch on empty batch");
    if (probs.size() != labels.size() * static_cast<std::size_t>(classes))
        throw std::invalid_argument("probability matrix size mismatch");
    double sum = 0.0;
    for (std::size_t n = 0; n < labels.size(); ++n)
        sum += cross_entropy(labels[n], probs.subspan(n * static_cast<std::size_t>(classes),
                                                      static_cast<std::size_t>(classes)));
    return sum / static_cast<double>(labels.size());
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("kl_divergence size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;  // 0*log0 = 0
        sum += p[i] * (std::log(p[i]) - clamped_log(q[i]));
    }
    return std::max(sum, 0.0);
}

double soft_cross_entropy(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("soft_cross_entropy size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        sum -= p[i] * clamped_log(q[i]);
    }
    return sum;
}

}  // namespace kdda

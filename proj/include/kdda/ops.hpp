#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace kdda {

// Count of log-argument clamps (probability hit the 1e-12 floor) since the
// last reset. Exposed so silent clamping stays auditable.
std::uint64_t log_clamp_count();
void reset_log_clamp_count();

inline constexpr double kLogEps = 1e-12;

// Temperature softmax: exp((z - max)/tau) normalized. tau must be > 0.
std::vector<double> softmax_temp(std::span<const double> logits, double tau);
void softmax_temp_into(std::span<const double> logits, double tau, std::span<double> out);

// -log(probs[y]); probs[y] is clamped at 1e-12 (counted).
double cross_entropy(int y, std::span<const double> probs);

// Mean cross-entropy over rows of a row-major [n x c] probability matrix.
double cross_entropy_batch(std::span<const int> labels, std::span<const double> probs, int classes);

// KL(p || q) = sum p_i log(p_i/q_i), 0*log0 = 0, q clamped at 1e-12 (counted).
double kl_divergence(std::span<const double> p, std::span<const double> q);

// -sum_i p_i log q_i with the same clamping convention.
double soft_cross_entropy(std::span<const double> p, std::span<const double> q);

}  // namespace kdda

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "kdda/distill.hpp"

namespace kdda {

// -sum p_i log p_i, natural log, 0*log0 = 0. In [0, ln C].
double shannon_entropy(std::span<const double> p);

// Streaming accumulator for teacher probability windows: every
// `window_size_k` consecutive samples form one window; u = per-window mean
// probability vector, m = per-class population variance of the u's,
// m_bar = mean of sqrt(m).
class WindowStats {
public:
    WindowStats(int window_size_k, int class_count);

    void add(std::span<const double> probs_row);
    void add_matrix(const Tensor& probs);  // {n, C} rows in order

    int window_count() const { return static_cast<int>(window_means_.size()); }
    const std::vector<std::vector<double>>& window_means() const { return window_means_; }

    // Streaming (Welford) population variance per class; needs >= 2 windows.
    std::vector<double> variance_per_class() const;
    double m_bar() const;

    // Two-pass recomputation from the stored window means, for cross-checks.
    std::vector<double> variance_materialized() const;

private:
    int k_;
    int classes_;
    std::vector<double> window_sum_;
    int window_fill_ = 0;
    std::vector<std::vector<double>> window_means_;
    // Welford state over window means
    long count_ = 0;
    std::vector<double> mean_, m2_;
};

// Mean entry of the per-batch sample covariance / correlation matrix of
// probability rows (rows are the variables, the C class-probabilities the
// observations). Zero-variance rows contribute correlation 0 (counted).
class BatchCovStats {
public:
    void add_batch(const Tensor& probs);  // {n>=2, C>=2}
    double vbar() const;
    double rbar() const;
    long zero_variance_rows() const { return zero_rows_; }
    int batch_count() const { return batch_count_; }

private:
    double v_sum_ = 0.0, r_sum_ = 0.0;
    int batch_count_ = 0;
    long zero_rows_ = 0;
};

// Whole-list convenience forms.
double covariance_metric_vbar(std::span<const Tensor> prob_batches);
double correlation_metric_rbar(std::span<const Tensor> prob_batches);

struct StreamMetricsResult {
    std::vector<double> m;
    double m_bar = 0.0;
    double vbar = 0.0;
    double rbar = 0.0;
    int window_count = 0;
    long zero_variance_rows = 0;
};

// Composed-batch stream feeding the metrics: same construction as the
// training loop (per-pass shuffle, standard flip+crop, scheme composition,
// optional teacher-entropy picking).
struct StreamConfig {
    DAScheme scheme;
    std::optional<PickConfig> pick;
    int batch_size = 64;
    bool standard_flip_crop = true;
    int passes = 10;
    std::uint64_t seed = 1;
};

// T. stddev (with v-bar / r-bar from the same probability stream) of a frozen
// teacher over `passes` epochs of composed batches. window_k counts samples.
StreamMetricsResult t_stddev(const Model& teacher, const Dataset& train,
                             const StreamConfig& stream, int window_k);

struct CorrelationReport {
    double r = 0.0;
    double p_value = 1.0;
    int n = 0;
};

// Sample Pearson r with the two-sided Student-t p-value (n-2 dof). Requires
// n >= 3 and non-constant inputs. Exact linear dependence reports p = 0.
CorrelationReport pearson(std::span<const double> xs, std::span<const double> ys);

// Continued-fraction regularized incomplete beta I_x(a, b), tolerance 1e-12.
double regularized_incomplete_beta(double x, double a, double b);
// Two-sided tail mass of Student-t with `dof` degrees of freedom.
double student_t_two_sided_p(double t, int dof);

// Mean tau=1 cross-entropy and argmax accuracy over a dataset.
std::pair<double, double> eval_test_loss(Model& model, const Dataset& ds);

}  // namespace kdda

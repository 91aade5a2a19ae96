#include "kdda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kdda/ops.hpp"

namespace kdda {

double shannon_entropy(std::span<const double> p) {
    double h = 0.0;
    for (const double x : p)
        if (x > 0.0) h -= x * std::log(x);
    return std::max(h, 0.0);
}

// ------------------------------------------------------------- WindowStats

WindowStats::WindowStats(int window_size_k, int class_count)
    : k_(window_size_k), classes_(class_count) {
    if (k_ < 1) throw std::invalid_argument("window size must be >= 1");
    if (classes_ < 2) throw std::invalid_argument("need at least 2 classes");
    window_sum_.assign(static_cast<std::size_t>(classes_), 0.0);
    mean_.assign(static_cast<std::size_t>(classes_), 0.0);
    m2_.assign(static_cast<std::size_t>(classes_), 0.0);
}

void WindowStats::add(std::span<const double> probs_row) {
    if (probs_row.size() != static_cast<std::size_t>(classes_))
        throw std::invalid_argument("probability row has wrong class count");
    for (int c = 0; c < classes_; ++c) window_sum_[static_cast<std::size_t>(c)] += probs_row[static_cast<std::size_t>(c)];
    if (++window_fill_ < k_) return;

    std::vector<double> u(static_cast<std::size_t>(classes_));
    double total = 0.0;
    for (int c = 0; c < classes_; ++c) {
        u[static_cast<std::size_t>(c)] = window_sum_[static_cast<std::size_t>(c)] / k_;
        total += u[static_cast<std::size_t>(c)];
    }
    if (std::abs(total - 1.0) > 1e-6)
        throw std::runtime_error("window mean is not a probability vector");

    ++count_;
    for (int c = 0; c < classes_; ++c) {
        const double delta = u[static_cast<std::size_t>(c)] - mean_[static_cast<std::size_t>(c)];
        mean_[static_cast<std::size_t>(c)] += delta / static_cast<double>(count_);
        m2_[static_cast<std::size_t>(c)] += delta * (u[static_cast<std::size_t>(c)] - mean_[static_cast<std::size_t>(c)]);
    }
    window_means_.push_back(std::move(u));
    std::fill(window_sum_.begin(), window_sum_.end(), 0.0);
    window_fill_ = 0;
}

void WindowStats::add_matrix(const Tensor& probs) {
    const int n = probs.extent(0), c = probs.extent(1);
    for (int i = 0; i < n; ++i)
        add({probs.data() + static_cast<std::size_t>(i) * c, static_cast<std::size_t>(c)});
}

std::vector<double> WindowStats::variance_per_class() const {
    if (count_ < 2) throw std::runtime_error("t_stddev needs at least 2 complete windows");
    std::vector<double> m(static_cast<std::size_t>(classes_));
    for (int c = 0; c < classes_; ++c)
        m[static_cast<std::size_t>(c)] = m2_[static_cast<std::size_t>(c)] / static_cast<double>(count_);
    return m;
}

double WindowStats::m_bar() const {
    const auto m = variance_per_class();
    double acc = 0.0;
    for (const double v : m) acc += std::sqrt(std::max(v, 0.0));
    return acc / classes_;
}

std::vector<double> WindowStats::variance_materialized() const {
    if (window_means_.size() < 2) throw std::runtime_error("t_stddev needs at least 2 complete windows");
    const double n = static_cast<double>(window_means_.size());
    std::vector<double> mean(static_cast<std::size_t>(classes_), 0.0);
    for (const auto& u : window_means_)
        for (int c = 0; c < classes_; ++c) mean[static_cast<std::size_t>(c)] += u[static_cast<std::size_t>(c)];
    for (auto& v : mean) v /= n;
    std::vector<double> var(static_cast<std::size_t>(classes_), 0.0);
    for (const auto& u : window_means_)
        for (int c = 0; c < classes_; ++c) {
            const double d = u[static_cast<std::size_t>(c)] - mean[static_cast<std::size_t>(c)];
            var[static_cast<std::size_t>(c)] += d * d;
        }
    for (auto& v : var) v /= n;  // population variance
    return var;
}

// ----------------------------------------------------------- BatchCovStats

void BatchCovStats::add_batch(const Tensor& probs) {
    const int n = probs.extent(0), c = probs.extent(1);
    if (n < 2) throw std::invalid_argument("covariance metric needs >= 2 rows per batch");
    if (c < 2) throw std::invalid_argument("covariance metric needs >= 2 observations per row");

    // mean of the N x N covariance (and correlation) matrix without forming
    // it: mean_ij cov_ij = (1/(C-1)) * sum_c s_c^2 with s_c the mean centered
    // column; same trick for correlation on sd-normalized rows.
    std::vector<double> col_sum(static_cast<std::size_t>(c), 0.0);
    std::vector<double> col_sum_norm(static_cast<std::size_t>(c), 0.0);
    for (int i = 0; i < n; ++i) {
        const double* row = probs.data() + static_cast<std::size_t>(i) * c;
        double mean = 0.0;
        for (int j = 0; j < c; ++j) mean += row[j];
        mean /= c;
        double ss = 0.0;
        for (int j = 0; j < c; ++j) {
            const double d = row[j] - mean;
            col_sum[static_cast<std::size_t>(j)] += d;
            ss += d * d;
        }
        const double denom = std::sqrt(ss);  // sd_i * sqrt(C-1)
        if (denom < 1e-300) {
            ++zero_rows_;
            continue;
        }
        for (int j = 0; j < c; ++j)
            col_sum_norm[static_cast<std::size_t>(j)] += (row[j] - mean) / denom;
    }
    double v = 0.0, r = 0.0;
    for (int j = 0; j < c; ++j) {
        const double s = col_sum[static_cast<std::size_t>(j)] / n;
        v += s * s;
        const double sn = col_sum_norm[static_cast<std::size_t>(j)];
        r += sn * sn;
    }
    v_sum_ += v / (c - 1);
    r_sum_ += r / (static_cast<double>(n) * n);
    ++batch_count_;
}

double BatchCovStats::vbar() const {
    if (batch_count_ == 0) throw std::runtime_error("no batches accumulated");
    return v_sum_ / batch_count_;
}

double BatchCovStats::rbar() const {
    if (batch_count_ == 0) throw std::runtime_error("no batches accumulated");
    return r_sum_ / batch_count_;
}

double covariance_metric_vbar(std::span<const Tensor> prob_batches) {
    BatchCovStats stats;
    for (const Tensor& b : prob_batches) stats.add_batch(b);
    return stats.vbar();
}

double correlation_metric_rbar(std::span<const Tensor> prob_batches) {
    BatchCovStats stats;
    for (const Tensor& b : prob_batches) stats.add_batch(b);
    return stats.rbar();
}

// ----------------------------------------------------------- stream metrics

StreamMetricsResult t_stddev(const Model& teacher, const Dataset& train,
                             const StreamConfig& stream, int window_k) {
    if (stream.pick && stream.pick->scorer != PickScorer::teacher_entropy)
        throw std::invalid_argument("stream metrics support teacher-entropy picking only");
    Model teacher_eval = teacher;
    WindowStats windows(window_k, train.class_count);
    BatchCovStats cov;

    for (int pass = 0; pass < stream.passes; ++pass) {
        Rng aug_rng(Rng::derive(stream.seed, {0xA06u, static_cast<std::uint64_t>(pass)}));
        const auto index_batches =
            batches(train.size(), stream.batch_size, Rng::derive(stream.seed, {0x5F0Fu}), pass);
        for (const auto& idx : index_batches) {
            ComposedBatch cb = compose_training_batch(train, idx, stream.scheme,
                                                      stream.standard_flip_crop, aug_rng);
            Tensor probs = probs_from_logits(forward_logits(teacher_eval, cb.images), 1.0);
            if (stream.pick) {
                const int b = cb.original_count, a = cb.augmented_count(), c = probs.extent(1);
                Tensor aug_probs({a, c});
                std::copy(probs.data() + static_cast<std::size_t>(b) * c,
                          probs.data() + probs.size(), aug_probs.data());
                const auto picked = cutmix_pick(aug_probs, stream.pick->ratio_r, stream.pick->order);
                cb = apply_pick(cb, picked);
                Tensor kept({cb.size(), c});
                std::copy(probs.data(), probs.data() + static_cast<std::size_t>(b) * c, kept.data());
                for (std::size_t k = 0; k < picked.size(); ++k)
                    std::copy(probs.data() + static_cast<std::size_t>(b + picked[k]) * c,
                              probs.data() + static_cast<std::size_t>(b + picked[k] + 1) * c,
                              kept.data() + (static_cast<std::size_t>(b) + k) * c);
                probs = std::move(kept);
            }
            windows.add_matrix(probs);
            cov.add_batch(probs);
        }
    }

    StreamMetricsResult out;
    out.m = windows.variance_per_class();
    out.m_bar = windows.m_bar();
    out.vbar = cov.vbar();
    out.rbar = cov.rbar();
    out.window_count = windows.window_count();
    out.zero_variance_rows = cov.zero_variance_rows();
    return out;
}

// ----------------------------------------------------------------- pearson

namespace {
double beta_continued_fraction(double x, double a, double b) {
    constexpr double tiny = 1e-300;
    constexpr double tol = 1e-12;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 1000; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < tol) break;
    }
    return h;
}
}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
    if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("beta parameters must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    const double front = std::exp(a * std::log(x) + b * std::log(1.0 - x) - lbeta);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(x, a, b) / a;
    return 1.0 - std::exp(b * std::log(1.0 - x) + a * std::log(x) - lbeta) *
                     beta_continued_fraction(1.0 - x, b, a) / b;
}

double student_t_two_sided_p(double t, int dof) {
    if (dof < 1) throw std::invalid_argument("degrees of freedom must be >= 1");
    const double v = static_cast<double>(dof);
    return regularized_incomplete_beta(v / (v + t * t), v / 2.0, 0.5);
}

CorrelationReport pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("pearson input size mismatch");
    const int n = static_cast<int>(xs.size());
    if (n < 3) throw std::invalid_argument("pearson needs n >= 3");
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < n; ++i) {
        mx += xs[static_cast<std::size_t>(i)];
        my += ys[static_cast<std::size_t>(i)];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dx = xs[static_cast<std::size_t>(i)] - mx;
        const double dy = ys[static_cast<std::size_t>(i)] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw std::invalid_argument("pearson undefined for constant input");

    CorrelationReport rep;
    rep.n = n;
    rep.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double one_minus_r2 = 1.0 - rep.r * rep.r;
    if (one_minus_r2 <= 0.0) {
        rep.p_value = 0.0;  // exact linear dependence
        return rep;
    }
    const double t = rep.r * std::sqrt((n - 2) / one_minus_r2);
    rep.p_value = student_t_two_sided_p(t, n - 2);
    return rep;
}

std::pair<double, double> eval_test_loss(Model& model, const Dataset& ds) {
    ds.validate();
    const Tensor probs = probs_from_logits(forward_logits(model, ds.images), 1.0);
    const int c = probs.extent(1);
    const double loss =
        cross_entropy_batch(ds.labels, {probs.data(), static_cast<std::size_t>(probs.size())}, c);
    int hits = 0;
    for (int i = 0; i < ds.size(); ++i) {
        const double* row = probs.data() + static_cast<std::size_t>(i) * c;
        int am = 0;
        for (int j = 1; j < c; ++j)
            if (row[j] > row[am]) am = j;
        if (am == ds.labels[static_cast<std::size_t>(i)]) ++hits;
    }
    return {loss, static_cast<double>(hits) / ds.size()};
}

}  // namespace kdda

#pragma once

#include <cstdint>
#include <vector>

#include "kdda/rng.hpp"

namespace kdda {

// Finite-support joint distribution with fixed teacher and predictor tables.
// Inputs are x in [0, support); q(x) = -teacher(x)^T log predictor(x).
struct SyntheticWorld {
    std::vector<double> marginal;
    std::vector<std::vector<double>> teacher_table;
    std::vector<std::vector<double>> predictor_table;

    int support_size() const { return static_cast<int>(marginal.size()); }
    int class_count() const { return teacher_table.empty() ? 0 : static_cast<int>(teacher_table[0].size()); }
    void validate() const;
    std::vector<double> q_values() const;

    // Random simplex rows from the seed; predictor differs from the teacher
    // so q is non-constant.
    static SyntheticWorld random(int support, int classes, std::uint64_t seed);
};

// Exact finite sum: E_x[q(x)] under the marginal.
double true_distilled_risk(const SyntheticWorld& world);

// Copy-chain sampler: x1 ~ marginal, x_{i+1} = x_i with probability rho, else
// a fresh marginal draw. Preserves each element's marginal exactly while rho
// dials the sequence correlation.
std::vector<int> sample_sequence(const SyntheticWorld& world, int n, double rho, Rng& rng);

struct GapMoments {
    double mean_delta = 0.0;
    double se_delta = 0.0;
    double mean_delta_sq = 0.0;
    double se_delta_sq = 0.0;
};

// Monte Carlo moments of Delta = R_hat_S - R_D over `repeats` sequences.
GapMoments estimate_gap_moments(const SyntheticWorld& world, int n, double rho, int repeats,
                                Rng& rng);

struct ExactGapMoments {
    double mean_delta = 0.0;
    double mean_delta_sq = 0.0;
    double var_direct = 0.0;  // Var_S[R_hat] from the enumeration
    double var_term = 0.0;    // (1/N) Var_x[q]
    double cov_term = 0.0;    // (2/N^2) sum_{j<k} Cov[q(x_j), q(x_k)]
};

// Full enumeration of support^N sequences (guard: <= 1e6) with exact chain
// probabilities, plus the variance decomposition from the exact pairwise
// joints.
ExactGapMoments exact_gap_moments(const SyntheticWorld& world, int n, double rho);

// Same decomposition without enumeration; usable at any N.
ExactGapMoments closed_form_gap_moments(const SyntheticWorld& world, int n, double rho);

// Numerically robust sum (pairwise), reduction-order stable.
double pairwise_sum(std::vector<double> values);

}  // namespace kdda

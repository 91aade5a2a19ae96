#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "kdda/metrics.hpp"
#include "kdda/ops.hpp"
#include "kdda/prop_lab.hpp"

using namespace kdda;

namespace {
SyntheticWorld hand_world() {
    // support 3, uniform marginal, hand-built tables
    SyntheticWorld w;
    w.marginal = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    w.teacher_table = {{0.7, 0.3}, {0.2, 0.8}, {0.5, 0.5}};
    w.predictor_table = {{0.6, 0.4}, {0.3, 0.7}, {0.5, 0.5}};
    return w;
}
}  // namespace

TEST_CASE("true_distilled_risk") {
    SUBCASE("predictor equal to teacher gives expected teacher entropy") {
        SyntheticWorld w = hand_world();
        w.predictor_table = w.teacher_table;
        double expect = 0.0;
        for (int x = 0; x < 3; ++x)
            expect += w.marginal[static_cast<std::size_t>(x)] *
                      shannon_entropy(w.teacher_table[static_cast<std::size_t>(x)]);
        CHECK(true_distilled_risk(w) == doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("single-support world returns q itself") {
        SyntheticWorld w;
        w.marginal = {0.4, 0.6};
        w.teacher_table = {{0.9, 0.1}, {0.9, 0.1}};
        w.predictor_table = {{0.8, 0.2}, {0.8, 0.2}};
        const double q = -(0.9 * std::log(0.8) + 0.1 * std::log(0.2));
        CHECK(true_distilled_risk(w) == doctest::Approx(q).epsilon(1e-12));
    }
    SUBCASE("three-term weighted sum by hand") {
        const SyntheticWorld w = hand_world();
        const double q0 = -(0.7 * std::log(0.6) + 0.3 * std::log(0.4));
        const double q1 = -(0.2 * std::log(0.3) + 0.8 * std::log(0.7));
        const double q2 = -(0.5 * std::log(0.5) + 0.5 * std::log(0.5));
        CHECK(true_distilled_risk(w) == doctest::Approx((q0 + q1 + q2) / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("sample_sequence statistics") {
    SyntheticWorld w = SyntheticWorld::random(4, 3, 17);

    SUBCASE("rho = 0 adjacent equality matches sum of squared marginals") {
        Rng rng(1);
        double expect = 0.0;
        for (const double p : w.marginal) expect += p * p;
        int equal = 0;
        const int pairs = 100000;
        for (int i = 0; i < pairs; ++i) {
            const auto seq = sample_sequence(w, 2, 0.0, rng);
            if (seq[0] == seq[1]) ++equal;
        }
        CHECK(std::abs(static_cast<double>(equal) / pairs - expect) < 0.01);
    }

    SUBCASE("rho = 0.5 on a uniform 2-support world gives 0.75 adjacent equality") {
        SyntheticWorld two;
        two.marginal = {0.5, 0.5};
        two.teacher_table = {{0.9, 0.1}, {0.1, 0.9}};
        two.predictor_table = {{0.8, 0.2}, {0.2, 0.8}};
        Rng rng(2);
        int equal = 0;
        const int pairs = 100000;
        for (int i = 0; i < pairs; ++i) {
            const auto seq = sample_sequence(two, 2, 0.5, rng);
            if (seq[0] == seq[1]) ++equal;
        }
        CHECK(std::abs(static_cast<double>(equal) / pairs - 0.75) < 0.01);
    }

    SUBCASE("high rho makes constant sequences dominate") {
        Rng rng(3);
        int constant = 0;
        for (int i = 0; i < 2000; ++i) {
            const auto seq = sample_sequence(w, 6, 0.99, rng);
            bool all_same = true;
            for (const int x : seq) all_same &= x == seq[0];
            if (all_same) ++constant;
        }
        CHECK(constant > 1700);
    }

    SUBCASE("marginal preservation at every position (chi-square at 0.01)") {
        for (const double rho : {0.0, 0.45, 0.9}) {
            Rng rng(4);
            const int n = 5, reps = 100000;
            std::vector<std::vector<int>> counts(n, std::vector<int>(4, 0));
            for (int r = 0; r < reps; ++r) {
                const auto seq = sample_sequence(w, n, rho, rng);
                for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(i)]
                    [static_cast<std::size_t>(seq[static_cast<std::size_t>(i)])];
            }
            // chi-square critical value at significance 0.01, df = 3
            const double critical = 11.3449;
            for (int i = 0; i < n; ++i) {
                double stat = 0.0;
                for (int x = 0; x < 4; ++x) {
                    const double expect = reps * w.marginal[static_cast<std::size_t>(x)];
                    const double d = counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(x)] - expect;
                    stat += d * d / expect;
                }
                CHECK(stat < critical);
            }
        }
    }

    Rng err_rng(1);
    CHECK_THROWS_AS(sample_sequence(w, 0, 0.0, err_rng), std::invalid_argument);
}

TEST_CASE("exact_gap_moments") {
    SUBCASE("rho = 0 is the iid case of the decomposition") {
        const SyntheticWorld w = hand_world();
        const auto ex = exact_gap_moments(w, 4, 0.0);
        CHECK(ex.cov_term == doctest::Approx(0.0).epsilon(1e-15));
        // Var_x[q] by hand
        const auto q = w.q_values();
        const double eq = true_distilled_risk(w);
        double var_q = 0.0;
        for (int x = 0; x < 3; ++x)
            var_q += w.marginal[static_cast<std::size_t>(x)] *
                     (q[static_cast<std::size_t>(x)] - eq) * (q[static_cast<std::size_t>(x)] - eq);
        CHECK(ex.var_term == doctest::Approx(var_q / 4.0).epsilon(1e-12));
        CHECK(ex.var_direct == doctest::Approx(var_q / 4.0).epsilon(1e-12));
    }

    SUBCASE("support 2, N = 2, rho = 0.5 against a 4-sequence hand enumeration") {
        SyntheticWorld w;
        w.marginal = {0.3, 0.7};
        w.teacher_table = {{1.0, 0.0}, {0.0, 1.0}};
        w.predictor_table = {{0.8, 0.2}, {0.4, 0.6}};
        const double q0 = -std::log(0.8), q1 = -std::log(0.6);
        const double risk = 0.3 * q0 + 0.7 * q1;
        const double rho = 0.5;
        // chain probabilities for the four sequences
        const double p00 = 0.3 * (rho + (1 - rho) * 0.3);
        const double p01 = 0.3 * ((1 - rho) * 0.7);
        const double p10 = 0.7 * ((1 - rho) * 0.3);
        const double p11 = 0.7 * (rho + (1 - rho) * 0.7);
        const double d00 = q0 - risk, d11 = q1 - risk;
        const double d01 = 0.5 * (q0 + q1) - risk;
        const double mean = p00 * d00 + (p01 + p10) * d01 + p11 * d11;
        const double mean_sq =
            p00 * d00 * d00 + (p01 + p10) * d01 * d01 + p11 * d11 * d11;

        const auto ex = exact_gap_moments(w, 2, rho);
        CHECK(ex.mean_delta == doctest::Approx(mean).epsilon(1e-12));
        CHECK(std::abs(ex.mean_delta) < 1e-12);  // marginals preserved
        CHECK(ex.mean_delta_sq == doctest::Approx(mean_sq).epsilon(1e-12));
    }

    SUBCASE("decomposition identity holds for every tested configuration") {
        for (const std::uint64_t seed : {101u, 202u}) {
            const SyntheticWorld w = SyntheticWorld::random(4, 5, seed);
            for (const int n : {2, 3, 5}) {
                for (const double rho : {0.0, 0.25, 0.5, 0.75, 0.95}) {
                    const auto ex = exact_gap_moments(w, n, rho);
                    CHECK(std::abs(ex.var_direct - (ex.var_term + ex.cov_term)) < 1e-12);
                    CHECK(std::abs(ex.mean_delta) < 1e-12);
                }
            }
        }
    }

    SUBCASE("mean is rho-invariant and the second moment strictly increases") {
        const SyntheticWorld w = SyntheticWorld::random(4, 4, 99);
        double prev_sq = -1.0;
        double first_mean = 0.0;
        bool first = true;
        for (const double rho : {0.0, 0.2, 0.4, 0.6, 0.8}) {
            const auto ex = exact_gap_moments(w, 3, rho);
            if (first) {
                first_mean = ex.mean_delta;
                first = false;
            }
            CHECK(std::abs(ex.mean_delta - first_mean) < 1e-12);
            CHECK(ex.mean_delta_sq > prev_sq);
            prev_sq = ex.mean_delta_sq;
        }
    }

    SUBCASE("closed form matches enumeration") {
        const SyntheticWorld w = SyntheticWorld::random(5, 3, 55);
        for (const double rho : {0.0, 0.3, 0.7}) {
            const auto ex = exact_gap_moments(w, 4, rho);
            const auto cf = closed_form_gap_moments(w, 4, rho);
            CHECK(cf.mean_delta_sq == doctest::Approx(ex.mean_delta_sq).epsilon(1e-12));
            CHECK(cf.var_term == doctest::Approx(ex.var_term).epsilon(1e-15));
            CHECK(cf.cov_term == doctest::Approx(ex.cov_term).epsilon(1e-15));
        }
    }

    SUBCASE("enumeration guard") {
        const SyntheticWorld w = SyntheticWorld::random(10, 3, 1);
        CHECK_THROWS_AS(exact_gap_moments(w, 7, 0.5), std::runtime_error);
    }
}

TEST_CASE("estimate_gap_moments") {
    SUBCASE("teacher as predictor on a single-support world gives zero moments") {
        SyntheticWorld w;
        w.marginal = {1.0 - 1e-12, 1e-12};
        w.marginal = {0.5, 0.5};
        w.teacher_table = {{0.6, 0.4}, {0.6, 0.4}};
        w.predictor_table = {{0.6, 0.4}, {0.6, 0.4}};  // q constant across support
        Rng rng(5);
        const auto gm = estimate_gap_moments(w, 4, 0.3, 500, rng);
        CHECK(gm.mean_delta == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(gm.mean_delta_sq == doctest::Approx(0.0).epsilon(1e-12));
    }

    SUBCASE("rho = 0, N = 1: second moment equals Var[q] within 3 stderr") {
        const SyntheticWorld w = SyntheticWorld::random(6, 4, 7);
        const auto q = w.q_values();
        const double eq = true_distilled_risk(w);
        double var_q = 0.0;
        for (std::size_t x = 0; x < q.size(); ++x)
            var_q += w.marginal[x] * (q[x] - eq) * (q[x] - eq);
        Rng rng(6);
        const auto gm = estimate_gap_moments(w, 1, 0.0, 20000, rng);
        CHECK(std::abs(gm.mean_delta_sq - var_q) < 3.0 * gm.se_delta_sq);
        CHECK(std::abs(gm.mean_delta) < 3.0 * gm.se_delta);
    }

    SUBCASE("monte carlo agrees with enumeration within 3 stderr") {
        const SyntheticWorld w = SyntheticWorld::random(4, 3, 21);
        for (const double rho : {0.0, 0.5}) {
            Rng rng(7);
            const auto gm = estimate_gap_moments(w, 5, rho, 20000, rng);
            const auto ex = exact_gap_moments(w, 5, rho);
            CHECK(std::abs(gm.mean_delta - ex.mean_delta) < 3.0 * gm.se_delta);
            CHECK(std::abs(gm.mean_delta_sq - ex.mean_delta_sq) < 3.0 * gm.se_delta_sq);
        }
    }

    SUBCASE("repeat floor") {
        const SyntheticWorld w = SyntheticWorld::random(4, 3, 21);
        Rng rng(8);
        CHECK_THROWS_AS(estimate_gap_moments(w, 5, 0.0, 50, rng), std::invalid_argument);
    }
}

TEST_CASE("pairwise_sum is order-robust") {
    Rng rng(9);
    std::vector<double> xs(10001);
    for (auto& x : xs) x = rng.uniform(-1.0, 1.0) * 1e6;
    const double a = pairwise_sum(xs);
    std::vector<double> rev(xs.rbegin(), xs.rend());
    const double b = pairwise_sum(rev);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
    CHECK(pairwise_sum({}) == 0.0);
    CHECK(pairwise_sum({1.5}) == 1.5);
}

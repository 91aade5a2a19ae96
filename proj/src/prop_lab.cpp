#include "kdda/prop_lab.hpp"

#include <cmath>
#include <stdexcept>
#include <tuple>

#include "kdda/ops.hpp"

namespace kdda {

namespace {
void check_simplex(const std::vector<double>& p, const char* what) {
    if (p.size() < 2) throw std::invalid_argument(std::string(what) + " needs >= 2 entries");
    double sum = 0.0;
    for (const double x : p) {
        if (x < 0.0) throw std::invalid_argument(std::string(what) + " has a negative entry");
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument(std::string(what) + " does not sum to 1");
}
}  // namespace

void SyntheticWorld::validate() const {
    check_simplex(marginal, "marginal");
    if (teacher_table.size() != marginal.size() || predictor_table.size() != marginal.size())
        throw std::invalid_argument("table row count must equal support size");
    for (const auto& row : teacher_table) check_simplex(row, "teacher row");
    for (const auto& row : predictor_table) check_simplex(row, "predictor row");
}

std::vector<double> SyntheticWorld::q_values() const {
    std::vector<double> q(marginal.size());
    for (std::size_t x = 0; x < marginal.size(); ++x)
        q[x] = soft_cross_entropy(teacher_table[x], predictor_table[x]);
    return q;
}

SyntheticWorld SyntheticWorld::random(int support, int classes, std::uint64_t seed) {
    if (support < 2 || classes < 2)
        throw std::invalid_argument("world needs support >= 2 and classes >= 2");
    Rng rng(Rng::derive(seed, {0x3031Du}));
    auto simplex = [&rng](int n) {
        std::vector<double> v(static_cast<std::size_t>(n));
        double sum = 0.0;
        for (auto& x : v) {
            x = rng.gamma(1.0);
            sum += x;
        }
        for (auto& x : v) x /= sum;
        return v;
    };
    SyntheticWorld w;
    w.marginal = simplex(support);
    for (int x = 0; x < support; ++x) {
        w.teacher_table.push_back(simplex(classes));
        w.predictor_table.push_back(simplex(classes));
    }
    w.validate();
    return w;
}

double true_distilled_risk(const SyntheticWorld& world) {
    world.validate();
    const auto q = world.q_values();
    double risk = 0.0;
    for (std::size_t x = 0; x < q.size(); ++x) risk += world.marginal[x] * q[x];
    return risk;
}

namespace {
int draw_categorical(const std::vector<double>& p, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(p.size() - 1);
}
}  // namespace

std::vector<int> sample_sequence(const SyntheticWorld& world, int n, double rho, Rng& rng) {
    if (n < 1) throw std::invalid_argument("sequence length must be >= 1");
    if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("rho must be in [0,1)");
    std::vector<int> seq(static_cast<std::size_t>(n));
    seq[0] = draw_categorical(world.marginal, rng);
    for (int i = 1; i < n; ++i) {
        if (rng.uniform() < rho)
            seq[static_cast<std::size_t>(i)] = seq[static_cast<std::size_t>(i - 1)];
        else
            seq[static_cast<std::size_t>(i)] = draw_categorical(world.marginal, rng);
    }
    return seq;
}

double pairwise_sum(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::size_t n = values.size();
    while (n > 1) {
        const std::size_t half = (n + 1) / 2;
        for (std::size_t i = 0; i + half < n; ++i) values[i] += values[i + half];
        n = half;
    }
    return values[0];
}

GapMoments estimate_gap_moments(const SyntheticWorld& world, int n, double rho, int repeats,
                                Rng& rng) {
    if (repeats < 100) throw std::invalid_argument("estimate_gap_moments needs >= 100 repeats");
    const auto q = world.q_values();
    const double risk = true_distilled_risk(world);

    std::vector<double> deltas(static_cast<std::size_t>(repeats));
    std::vector<double> delta_sqs(static_cast<std::size_t>(repeats));
    for (int rep = 0; rep < repeats; ++rep) {
        const auto seq = sample_sequence(world, n, rho, rng);
        double acc = 0.0;
        for (const int x : seq) acc += q[static_cast<std::size_t>(x)];
        const double delta = acc / n - risk;
        deltas[static_cast<std::size_t>(rep)] = delta;
        delta_sqs[static_cast<std::size_t>(rep)] = delta * delta;
    }

    auto mean_and_se = [repeats](const std::vector<double>& xs) {
        const double mean = pairwise_sum(std::vector<double>(xs)) / repeats;
        std::vector<double> sq(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double d = xs[i] - mean;
            sq[i] = d * d;
        }
        const double var = pairwise_sum(std::move(sq)) / (repeats - 1);
        return std::pair<double, double>{mean, std::sqrt(var / repeats)};
    };

    GapMoments out;
    std::tie(out.mean_delta, out.se_delta) = mean_and_se(deltas);
    std::tie(out.mean_delta_sq, out.se_delta_sq) = mean_and_se(delta_sqs);
    return out;
}

namespace {
// Decomposition terms from the chain's exact pairwise joints:
// P(x_j=a, x_k=b) = pi(a) * (rho^{k-j} * [a==b] + (1 - rho^{k-j}) * pi(b)).
void fill_decomposition(const SyntheticWorld& world, int n, double rho, ExactGapMoments& out) {
    const auto q = world.q_values();
    const double eq = true_distilled_risk(world);
    double var_q = 0.0;
    for (std::size_t x = 0; x < q.size(); ++x)
        var_q += world.marginal[x] * (q[x] - eq) * (q[x] - eq);
    out.var_term = var_q / n;

    double cov_sum = 0.0;
    for (int d = 1; d < n; ++d) {
        const double rho_d = std::pow(rho, d);
        double second_moment = 0.0;
        for (std::size_t a = 0; a < q.size(); ++a)
            for (std::size_t b = 0; b < q.size(); ++b) {
                const double joint = world.marginal[a] *
                                     (rho_d * (a == b ? 1.0 : 0.0) +
                                      (1.0 - rho_d) * world.marginal[b]);
                second_moment += joint * q[a] * q[b];
            }
        const double cov = second_moment - eq * eq;
        cov_sum += static_cast<double>(n - d) * cov;  // (n - d) pairs at lag d
    }
    out.cov_term = 2.0 * cov_sum / (static_cast<double>(n) * n);
}
}  // namespace

ExactGapMoments exact_gap_moments(const SyntheticWorld& world, int n, double rho) {
    world.validate();
    if (n < 1) throw std::invalid_argument("sequence length must be >= 1");
    if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("rho must be in [0,1)");
    const int support = world.support_size();
    if (std::pow(static_cast<double>(support), n) > 1e6)
        throw std::runtime_error("enumeration guard exceeded (support^N > 1e6)");

    const auto q = world.q_values();
    const double risk = true_distilled_risk(world);

    std::vector<int> seq(static_cast<std::size_t>(n), 0);
    double e_delta = 0.0, e_delta_sq = 0.0;
    for (;;) {
        double prob = world.marginal[static_cast<std::size_t>(seq[0])];
        double acc = q[static_cast<std::size_t>(seq[0])];
        for (int i = 1; i < n; ++i) {
            const int cur = seq[static_cast<std::size_t>(i)];
            const int prev = seq[static_cast<std::size_t>(i - 1)];
            prob *= rho * (cur == prev ? 1.0 : 0.0) +
                    (1.0 - rho) * world.marginal[static_cast<std::size_t>(cur)];
            acc += q[static_cast<std::size_t>(cur)];
        }
        const double delta = acc / n - risk;
        e_delta += prob * delta;
        e_delta_sq += prob * delta * delta;

        int pos = n - 1;  // odometer over support^N
        while (pos >= 0 && ++seq[static_cast<std::size_t>(pos)] == support) {
            seq[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
    }

    ExactGapMoments out;
    out.mean_delta = e_delta;
    out.mean_delta_sq = e_delta_sq;
    out.var_direct = e_delta_sq - e_delta * e_delta;
    fill_decomposition(world, n, rho, out);
    return out;
}

ExactGapMoments closed_form_gap_moments(const SyntheticWorld& world, int n, double rho) {
    world.validate();
    if (n < 1) throw std::invalid_argument("sequence length must be >= 1");
    if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("rho must be in [0,1)");
    ExactGapMoments out;
    fill_decomposition(world, n, rho, out);
    out.mean_delta = 0.0;  // marginals are preserved exactly
    out.var_direct = out.var_term + out.cov_term;
    out.mean_delta_sq = out.var_direct;
    return out;
}

}  // namespace kdda

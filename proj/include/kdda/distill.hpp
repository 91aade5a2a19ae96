#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kdda/augment.hpp"
#include "kdda/data.hpp"
#include "kdda/nn.hpp"
#include "kdda/optim.hpp"
#include "kdda/rng.hpp"
#include "kdda/tensor.hpp"

namespace kdda {

enum class PickScorer { teacher_entropy, student_entropy };
enum class PickOrder { highest, lowest };

PickScorer pick_scorer_from_string(const std::string& s);
std::string to_string(PickScorer s);
PickOrder pick_order_from_string(const std::string& s);
std::string to_string(PickOrder o);

struct PickConfig {
    double ratio_r = 0.5;
    PickScorer scorer = PickScorer::teacher_entropy;
    PickOrder order = PickOrder::highest;

    void validate() const;
};

struct DistillConfig {
    double tau = 4.0;
    double alpha = 0.9;
    DAScheme scheme;
    std::optional<PickConfig> pick;
    ScheduleConfig schedule;
    int batch_size = 64;
    std::uint64_t seed = 1;
    bool standard_flip_crop = true;
    double momentum = 0.9;
    double weight_decay = 5e-4;

    void validate() const;
};

// Per-epoch risk snapshot; q_values[i] = -p_t(x_i)^T log f(x_i) on the raw
// training images.
struct RiskReport {
    int epoch = 0;
    double empirical_risk = 0.0;
    double distilled_risk = 0.0;
    double test_loss = 0.0;
    double test_accuracy = 0.0;
    std::vector<double> q_values;
};

// (1-alpha)*CE(y, softmax(z_s)) + alpha*tau^2*KL(softmax(z_t/tau), softmax(z_s/tau))
double kd_loss(int y, std::span<const double> logits_s, std::span<const double> logits_t,
               double alpha, double tau);

// The KL term of kd_loss alone, carried by augmented samples.
double kl_only_loss(std::span<const double> logits_s, std::span<const double> logits_t,
                    double alpha, double tau);

// Eq-style empirical distilled risk over row-major [n x c] matrices.
double empirical_distilled_risk(const Tensor& teacher_probs, const Tensor& student_probs);

// Entropy-based selection over augmented candidates. scorer_probs is [A x C];
// picks ceil(ratio_r * A) rows by entropy (highest by default), ties broken by
// lower index; returns indices sorted ascending.
std::vector<int> cutmix_pick(const Tensor& scorer_probs, double ratio_r,
                             PickOrder order = PickOrder::highest);

// Composed loss over a (possibly picked) batch. The CE term averages over
// CePlusKl samples, the KL term averages over every retained sample, so the
// identity composition reduces exactly to plain KD on the un-composed batch.
struct BatchLoss {
    double loss = 0.0;
    Tensor dlogits;  // gradient w.r.t. student logits, {n, C}
};
BatchLoss kd_batch_loss(const Tensor& s_logits, const Tensor& t_logits,
                        std::span<const int> labels, std::span<const LossMode> modes,
                        double alpha, double tau);

// Batch inference without touching training state of the caller's model.
Tensor forward_logits(Model& model, const Tensor& images, int chunk = 256);
Tensor probs_from_logits(const Tensor& logits, double tau);

// One training step's batch exactly as the loop sees it: gather, optional
// standard flip+crop, then scheme composition.
ComposedBatch compose_training_batch(const Dataset& ds, const std::vector<int>& idx,
                                     const DAScheme& scheme, bool standard_da, Rng& rng);

// Keeps all originals plus the picked augmented samples.
ComposedBatch apply_pick(const ComposedBatch& cb, const std::vector<int>& picked_aug);

struct TrainResult {
    Model student;
    std::vector<RiskReport> history;
};

// Composed-batch KD training with the multi-step schedule. Deterministic for
// a fixed (config, seed); the teacher is used for inference only.
TrainResult train_student(const Model& teacher, Model student, const Dataset& train,
                          const Dataset& test, const DistillConfig& cfg);

// Fraction of cutmix samples in the stream whose teacher argmax disagrees
// with the area-weighted cutmix label.
double label_disagreement_rate(Model& teacher, std::span<const ComposedBatch> stream);

}  // namespace kdda

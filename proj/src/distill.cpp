#include "kdda/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "kdda/metrics.hpp"
#include "kdda/ops.hpp"

namespace kdda {

PickScorer pick_scorer_from_string(const std::string& s) {
    if (s == "teacher_entropy") return PickScorer::teacher_entropy;
    if (s == "student_entropy") return PickScorer::student_entropy;
    throw std::invalid_argument("unknown pick scorer: " + s);
}

std::string to_string(PickScorer s) {
    return s == PickScorer::teacher_entropy ? "teacher_entropy" : "student_entropy";
}

PickOrder pick_order_from_string(const std::string& s) {
    if (s == "highest") return PickOrder::highest;
    if (s == "lowest") return PickOrder::lowest;
    throw std::invalid_argument("unknown pick order: " + s);
}

std::string to_string(PickOrder o) { return o == PickOrder::highest ? "highest" : "lowest"; }

void PickConfig::validate() const {
    if (!(ratio_r > 0.0 && ratio_r <= 1.0))
        throw std::invalid_argument("pick ratio_r must be in (0,1]");
}

void DistillConfig::validate() const {
    if (tau <= 0.0) throw std::invalid_argument("tau must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    schedule.validate();
    if (pick) pick->validate();
}

double kd_loss(int y, std::span<const double> logits_s, std::span<const double> logits_t,
               double alpha, double tau) {
    if (logits_s.size() != logits_t.size()) throw std::invalid_argument("kd_loss logit size mismatch");
    if (tau <= 0.0) throw std::invalid_argument("tau must be positive");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha outside [0,1]");
    const auto ps = softmax_temp(logits_s, 1.0);
    const double ce = cross_entropy(y, ps);
    const auto ps_t = softmax_temp(logits_s, tau);
    const auto pt_t = softmax_temp(logits_t, tau);
    return (1.0 - alpha) * ce + alpha * tau * tau * kl_divergence(pt_t, ps_t);
}

double kl_only_loss(std::span<const double> logits_s, std::span<const double> logits_t,
                    double alpha, double tau) {
    if (logits_s.size() != logits_t.size())
        throw std::invalid_argument("kl_only_loss logit size mismatch");
    if (tau <= 0.0) throw std::invalid_argument("tau must be positive");
    const auto ps_t = softmax_temp(logits_s, tau);
    const auto pt_t = softmax_temp(logits_t, tau);
    return alpha * tau * tau * kl_divergence(pt_t, ps_t);
}

double empirical_distilled_risk(const Tensor& teacher_probs, const Tensor& student_probs) {
    if (teacher_probs.shape() != student_probs.shape())
        throw std::invalid_argument("empirical_distilled_risk shape mismatch");
    const int n = teacher_probs.extent(0), c = teacher_probs.extent(1);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        sum += soft_cross_entropy({teacher_probs.data() + static_cast<std::size_t>(i) * c,
                                   static_cast<std::size_t>(c)},
                                  {student_probs.data() + static_cast<std::size_t>(i) * c,
                                   static_cast<std::size_t>(c)});
    }
    return sum / n;
}

std::vector<int> cutmix_pick(const Tensor& scorer_probs, double ratio_r, PickOrder order) {
    const int n = scorer_probs.extent(0);
    if (n == 0) throw std::invalid_argument("cutmix_pick on empty input");
    if (!(ratio_r > 0.0 && ratio_r <= 1.0))
        throw std::invalid_argument("pick ratio_r must be in (0,1]");
    const int c = scorer_probs.extent(1);
    std::vector<double> entropy(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        entropy[static_cast<std::size_t>(i)] = shannon_entropy(
            {scorer_probs.data() + static_cast<std::size_t>(i) * c, static_cast<std::size_t>(c)});

    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    const bool highest = order == PickOrder::highest;
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        const double ea = entropy[static_cast<std::size_t>(a)];
        const double eb = entropy[static_cast<std::size_t>(b)];
        if (ea != eb) return highest ? ea > eb : ea < eb;
        return a < b;
    });
    const int keep = std::min(n, static_cast<int>(std::ceil(ratio_r * n)));
    idx.resize(static_cast<std::size_t>(keep));
    std::sort(idx.begin(), idx.end());
    return idx;
}

BatchLoss kd_batch_loss(const Tensor& s_logits, const Tensor& t_logits,
                        std::span<const int> labels, std::span<const LossMode> modes,
                        double alpha, double tau) {
    if (s_logits.shape() != t_logits.shape())
        throw std::invalid_argument("kd_batch_loss logits shape mismatch");
    const int n = s_logits.extent(0), c = s_logits.extent(1);
    if (labels.size() != static_cast<std::size_t>(n) || modes.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("kd_batch_loss label/mode count mismatch");

    int n_ce = 0;
    for (const LossMode m : modes)
        if (m == LossMode::CePlusKl) ++n_ce;
    if (n_ce == 0) throw std::invalid_argument("kd_batch_loss: no CePlusKl samples");

    BatchLoss out;
    out.dlogits = Tensor({n, c});
    double ce_sum = 0.0, kl_sum = 0.0;
    std::vector<double> ps(static_cast<std::size_t>(c)), ps_t(static_cast<std::size_t>(c)),
        pt_t(static_cast<std::size_t>(c));

    const double ce_w = (1.0 - alpha) / n_ce;
    const double kl_w = alpha * tau / n;  // tau^2 * (1/tau) from the softmax jacobian
    for (int i = 0; i < n; ++i) {
        const std::span<const double> zs{s_logits.data() + static_cast<std::size_t>(i) * c,
                                         static_cast<std::size_t>(c)};
        const std::span<const double> zt{t_logits.data() + static_cast<std::size_t>(i) * c,
                                         static_cast<std::size_t>(c)};
        softmax_temp_into(zs, tau, ps_t);
        softmax_temp_into(zt, tau, pt_t);
        kl_sum += kl_divergence(pt_t, ps_t);
        double* g = out.dlogits.data() + static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) g[j] = kl_w * (ps_t[static_cast<std::size_t>(j)] -
                                                   pt_t[static_cast<std::size_t>(j)]);
        if (modes[static_cast<std::size_t>(i)] == LossMode::CePlusKl) {
            softmax_temp_into(zs, 1.0, ps);
            const int y = labels[static_cast<std::size_t>(i)];
            ce_sum += cross_entropy(y, ps);
            for (int j = 0; j < c; ++j)
                g[j] += ce_w * (ps[static_cast<std::size_t>(j)] - (j == y ? 1.0 : 0.0));
        }
    }
    out.loss = (1.0 - alpha) * ce_sum / n_ce + alpha * tau * tau * kl_sum / n;
    return out;
}

Tensor forward_logits(Model& model, const Tensor& images, int chunk) {
    const int n = images.extent(0);
    const std::vector<int> out_shape = model.out_shape(images.shape());
    const int c = out_shape[1];
    Tensor logits({n, c});
    const int stride = images.size() / n;
    for (int start = 0; start < n; start += chunk) {
        const int m = std::min(chunk, n - start);
        std::vector<int> shape = images.shape();
        shape[0] = m;
        Tensor part(shape);
        std::copy(images.data() + static_cast<std::size_t>(start) * stride,
                  images.data() + static_cast<std::size_t>(start + m) * stride, part.data());
        const Tensor out = model.forward(part);
        std::copy(out.data(), out.data() + out.size(),
                  logits.data() + static_cast<std::size_t>(start) * c);
    }
    return logits;
}

Tensor probs_from_logits(const Tensor& logits, double tau) {
    const int n = logits.extent(0), c = logits.extent(1);
    Tensor probs({n, c});
    for (int i = 0; i < n; ++i)
        softmax_temp_into({logits.data() + static_cast<std::size_t>(i) * c, static_cast<std::size_t>(c)},
                          tau, {probs.data() + static_cast<std::size_t>(i) * c, static_cast<std::size_t>(c)});
    return probs;
}

ComposedBatch compose_training_batch(const Dataset& ds, const std::vector<int>& idx,
                                     const DAScheme& scheme, bool standard_da, Rng& rng) {
    LabeledBatch batch{gather_images(ds, idx), gather_labels(ds, idx)};
    if (standard_da) batch = standard_flip_crop(batch, scheme.crop_pad, rng);
    return compose_batch(batch, scheme, rng);
}

ComposedBatch apply_pick(const ComposedBatch& cb, const std::vector<int>& picked_aug) {
    const int b = cb.original_count;
    ComposedBatch out;
    out.original_count = b;
    const int total = b + static_cast<int>(picked_aug.size());
    std::vector<int> shape = cb.images.shape();
    shape[0] = total;
    out.images = Tensor(shape);
    out.labels.resize(static_cast<std::size_t>(total));
    out.loss_mode.resize(static_cast<std::size_t>(total));
    out.mix.reserve(picked_aug.size());

    const int stride = cb.images.size() / cb.size();
    for (int i = 0; i < b; ++i) {
        const auto src = cb.images.slice(i);
        std::copy(src.begin(), src.end(), out.images.data() + static_cast<std::size_t>(i) * stride);
        out.labels[static_cast<std::size_t>(i)] = cb.labels[static_cast<std::size_t>(i)];
        out.loss_mode[static_cast<std::size_t>(i)] = LossMode::CePlusKl;
    }
    for (std::size_t k = 0; k < picked_aug.size(); ++k) {
        const int a = picked_aug[k];
        if (a < 0 || a >= cb.augmented_count())
            throw std::out_of_range("picked index outside the augmented half");
        const auto src = cb.images.slice(b + a);
        std::copy(src.begin(), src.end(),
                  out.images.data() + (static_cast<std::size_t>(b) + k) * stride);
        out.labels[static_cast<std::size_t>(b) + k] = cb.labels[static_cast<std::size_t>(b + a)];
        out.loss_mode[static_cast<std::size_t>(b) + k] = LossMode::KlOnly;
        out.mix.push_back(cb.mix[static_cast<std::size_t>(a)]);
    }
    return out;
}

namespace {

RiskReport make_risk_report(int epoch, Model& student, const Tensor& teacher_train_probs,
                            const Dataset& train, const Dataset& test) {
    RiskReport rep;
    rep.epoch = epoch;
    const Tensor train_logits = forward_logits(student, train.images);
    const Tensor train_probs = probs_from_logits(train_logits, 1.0);
    rep.empirical_risk = cross_entropy_batch(train.labels,
                                             {train_probs.data(), static_cast<std::size_t>(train_probs.size())},
                                             train_probs.extent(1));
    const int c = train_probs.extent(1);
    rep.q_values.resize(static_cast<std::size_t>(train.size()));
    double qsum = 0.0;
    for (int i = 0; i < train.size(); ++i) {
        const double q = soft_cross_entropy(
            {teacher_train_probs.data() + static_cast<std::size_t>(i) * c, static_cast<std::size_t>(c)},
            {train_probs.data() + static_cast<std::size_t>(i) * c, static_cast<std::size_t>(c)});
        rep.q_values[static_cast<std::size_t>(i)] = q;
        qsum += q;
    }
    rep.distilled_risk = qsum / train.size();
    const auto [loss, acc] = eval_test_loss(student, test);
    rep.test_loss = loss;
    rep.test_accuracy = acc;
    return rep;
}

}  // namespace

TrainResult train_student(const Model& teacher, Model student, const Dataset& train,
                          const Dataset& test, const DistillConfig& cfg) {
    cfg.validate();
    train.validate();
    test.validate();
    Model teacher_eval = teacher;  // frozen copy, inference only

    const std::vector<int> teacher_out = teacher_eval.out_shape(
        {1, train.images.extent(1), train.images.extent(2), train.images.extent(3)});
    const std::vector<int> student_out = student.out_shape(
        {1, train.images.extent(1), train.images.extent(2), train.images.extent(3)});
    if (teacher_out != student_out || teacher_out[1] != train.class_count)
        throw std::invalid_argument("teacher/student class-count mismatch");

    const Tensor teacher_train_probs =
        probs_from_logits(forward_logits(teacher_eval, train.images), 1.0);

    Sgd opt(student.params(), cfg.momentum, cfg.weight_decay);
    TrainResult result;
    const int epochs = cfg.schedule.scaled_total();

    for (int epoch = 0; epoch < epochs; ++epoch) {
        const double lr = lr_at(epoch, cfg.schedule);
        Rng aug_rng(Rng::derive(cfg.seed, {0xA06u, static_cast<std::uint64_t>(epoch)}));
        const auto index_batches = batches(train.size(), cfg.batch_size,
                                           Rng::derive(cfg.seed, {0x5F0Fu}), epoch);
        for (const auto& idx : index_batches) {
            ComposedBatch cb = compose_training_batch(train, idx, cfg.scheme,
                                                      cfg.standard_flip_crop, aug_rng);
            Tensor t_logits = forward_logits(teacher_eval, cb.images);
            if (cfg.pick) {
                const int b = cb.original_count;
                const int a = cb.augmented_count();
                Tensor scorer_logits({a, t_logits.extent(1)});
                if (cfg.pick->scorer == PickScorer::teacher_entropy) {
                    std::copy(t_logits.data() + static_cast<std::size_t>(b) * t_logits.extent(1),
                              t_logits.data() + t_logits.size(), scorer_logits.data());
                } else {
                    std::vector<int> shape = cb.images.shape();
                    shape[0] = a;
                    Tensor aug_images(shape);
                    const int stride = cb.images.size() / cb.size();
                    std::copy(cb.images.data() + static_cast<std::size_t>(b) * stride,
                              cb.images.data() + cb.images.size(), aug_images.data());
                    scorer_logits = forward_logits(student, aug_images);
                }
                const std::vector<int> picked =
                    cutmix_pick(probs_from_logits(scorer_logits, 1.0), cfg.pick->ratio_r,
                                cfg.pick->order);
                cb = apply_pick(cb, picked);
                t_logits = forward_logits(teacher_eval, cb.images);
            }
            const Tensor s_logits = student.forward(cb.images);
            const BatchLoss bl =
                kd_batch_loss(s_logits, t_logits, cb.labels, cb.loss_mode, cfg.alpha, cfg.tau);
            student.zero_grads();
            student.backward(bl.dlogits);
            opt.step(student.params(), student.grads(), lr);
        }
        result.history.push_back(
            make_risk_report(epoch, student, teacher_train_probs, train, test));
    }
    result.student = std::move(student);
    return result;
}

double label_disagreement_rate(Model& teacher, std::span<const ComposedBatch> stream) {
    long total = 0, disagree = 0;
    for (const ComposedBatch& cb : stream) {
        if (cb.augmented_count() == 0) continue;
        const Tensor logits = forward_logits(teacher, cb.images);
        const int c = logits.extent(1);
        for (int a = 0; a < cb.augmented_count(); ++a) {
            const MixParams& mp = cb.mix[static_cast<std::size_t>(a)];
            if (!mp.has_box) continue;
            const int yi = cb.labels[static_cast<std::size_t>(cb.original_count + a)];
            const int yj = cb.labels[static_cast<std::size_t>(mp.partner)];
            // area-weighted cutmix label: ratio on the source, 1-ratio on the patch
            int mixed_label;
            if (yi == yj) {
                mixed_label = yi;
            } else {
                const double wi = mp.effective_ratio, wj = 1.0 - mp.effective_ratio;
                mixed_label = wi > wj ? yi : (wj > wi ? yj : std::min(yi, yj));
            }
            const double* row = logits.data() + static_cast<std::size_t>(cb.original_count + a) * c;
            int am = 0;
            for (int j = 1; j < c; ++j)
                if (row[j] > row[am]) am = j;
            if (am != mixed_label) ++disagree;
            ++total;
        }
    }
    if (total == 0) throw std::invalid_argument("label_disagreement_rate: no cutmix samples in stream");
    return static_cast<double>(disagree) / static_cast<double>(total);
}

}  // namespace kdda

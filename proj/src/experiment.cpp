#include "kdda/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace kdda {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

// ------------------------------------------------------------------ config

namespace {
ScheduleConfig schedule_from_json(const json& j, const ScheduleConfig& def) {
    ScheduleConfig s = def;
    s.base_lr = j.value("base_lr", s.base_lr);
    s.total_epochs = j.value("total_epochs", s.total_epochs);
    if (j.contains("decay_epochs")) s.decay_epochs = j.at("decay_epochs").get<std::vector<int>>();
    s.decay_factor = j.value("decay_factor", s.decay_factor);
    s.epoch_scale_k = j.value("epoch_scale_k", s.epoch_scale_k);
    return s;
}

json schedule_to_json(const ScheduleConfig& s) {
    return {{"base_lr", s.base_lr},
            {"total_epochs", s.total_epochs},
            {"decay_epochs", s.decay_epochs},
            {"decay_factor", s.decay_factor},
            {"epoch_scale_k", s.epoch_scale_k}};
}

DAScheme scheme_from_json(const json& j, const DAScheme& def) {
    DAScheme s = def;
    if (j.contains("kind")) s.kind = da_kind_from_string(j.at("kind").get<std::string>());
    s.cutout_length = j.value("cutout_length", s.cutout_length);
    s.mix_alpha = j.value("mix_alpha", s.mix_alpha);
    s.crop_pad = j.value("crop_pad", s.crop_pad);
    return s;
}

json scheme_to_json(const DAScheme& s) {
    return {{"kind", to_string(s.kind)},
            {"cutout_length", s.cutout_length},
            {"mix_alpha", s.mix_alpha},
            {"crop_pad", s.crop_pad}};
}

PickConfig pick_from_json(const json& j, const PickConfig& def) {
    PickConfig p = def;
    p.ratio_r = j.value("ratio_r", p.ratio_r);
    if (j.contains("scorer")) p.scorer = pick_scorer_from_string(j.at("scorer").get<std::string>());
    if (j.contains("order")) p.order = pick_order_from_string(j.at("order").get<std::string>());
    return p;
}

json pick_to_json(const PickConfig& p) {
    return {{"ratio_r", p.ratio_r}, {"scorer", to_string(p.scorer)}, {"order", to_string(p.order)}};
}
}  // namespace

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.teacher.schedule.base_lr = 0.05;
    cfg.teacher.schedule.total_epochs = 30;
    cfg.teacher.schedule.decay_epochs = {20, 26};
    cfg.distill.schedule.base_lr = 0.05;
    cfg.distill.schedule.total_epochs = 60;
    cfg.distill.schedule.decay_epochs = {40, 52};
    cfg.distill.scheme.kind = DAKind::cutmix;
    cfg.distill.scheme.cutout_length = 6;
    cfg.distill.scheme.mix_alpha = 2.0;
    cfg.distill.scheme.crop_pad = 2;
    return cfg;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig cfg = default_config();
    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        cfg.dataset.type = d.value("type", cfg.dataset.type);
        cfg.dataset.classes = d.value("classes", cfg.dataset.classes);
        cfg.dataset.per_class = d.value("per_class", cfg.dataset.per_class);
        cfg.dataset.side = d.value("side", cfg.dataset.side);
        cfg.dataset.seed = d.value("seed", cfg.dataset.seed);
        cfg.dataset.path = d.value("path", cfg.dataset.path);
        cfg.dataset.test_path = d.value("test_path", cfg.dataset.test_path);
        cfg.dataset.variant = d.value("variant", cfg.dataset.variant);
    }
    if (j.contains("teacher")) {
        const json& t = j.at("teacher");
        cfg.teacher.arch = t.value("arch", cfg.teacher.arch);
        if (t.contains("schedule")) cfg.teacher.schedule = schedule_from_json(t.at("schedule"), cfg.teacher.schedule);
        cfg.teacher.batch_size = t.value("batch_size", cfg.teacher.batch_size);
        cfg.teacher.seed = t.value("seed", cfg.teacher.seed);
        cfg.teacher.checkpoint = t.value("checkpoint", cfg.teacher.checkpoint);
    }
    if (j.contains("student")) cfg.student_arch = j.at("student").value("arch", cfg.student_arch);
    if (j.contains("distill")) {
        const json& d = j.at("distill");
        cfg.distill.tau = d.value("tau", cfg.distill.tau);
        cfg.distill.alpha = d.value("alpha", cfg.distill.alpha);
        cfg.distill.batch_size = d.value("batch_size", cfg.distill.batch_size);
        cfg.distill.seed = d.value("seed", cfg.distill.seed);
        cfg.distill.standard_flip_crop = d.value("standard_flip_crop", cfg.distill.standard_flip_crop);
        cfg.distill.momentum = d.value("momentum", cfg.distill.momentum);
        cfg.distill.weight_decay = d.value("weight_decay", cfg.distill.weight_decay);
        if (d.contains("scheme")) cfg.distill.scheme = scheme_from_json(d.at("scheme"), cfg.distill.scheme);
        if (d.contains("schedule")) cfg.distill.schedule = schedule_from_json(d.at("schedule"), cfg.distill.schedule);
        if (d.contains("pick") && !d.at("pick").is_null())
            cfg.distill.pick = pick_from_json(d.at("pick"), PickConfig{});
    }
    if (j.contains("metrics")) {
        cfg.metrics.window_k = j.at("metrics").value("window_k", cfg.metrics.window_k);
        cfg.metrics.passes = j.at("metrics").value("passes", cfg.metrics.passes);
    }
    if (j.contains("rank")) {
        const json& r = j.at("rank");
        if (r.contains("schemes")) cfg.rank.schemes = r.at("schemes").get<std::vector<std::string>>();
        if (r.contains("seeds")) cfg.rank.seeds = r.at("seeds").get<std::vector<std::uint64_t>>();
    }
    if (j.contains("prop")) {
        const json& p = j.at("prop");
        cfg.prop.support = p.value("support", cfg.prop.support);
        cfg.prop.classes = p.value("classes", cfg.prop.classes);
        cfg.prop.n = p.value("n", cfg.prop.n);
        cfg.prop.repeats = p.value("repeats", cfg.prop.repeats);
        if (p.contains("rhos")) cfg.prop.rhos = p.at("rhos").get<std::vector<double>>();
        cfg.prop.world_seed = p.value("world_seed", cfg.prop.world_seed);
        cfg.prop.sample_seed = p.value("sample_seed", cfg.prop.sample_seed);
    }
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.threads = j.value("threads", cfg.threads);
    return cfg;
}

json ExperimentConfig::to_json() const {
    json j;
    j["dataset"] = {{"type", dataset.type},         {"classes", dataset.classes},
                    {"per_class", dataset.per_class}, {"side", dataset.side},
                    {"seed", dataset.seed},         {"path", dataset.path},
                    {"test_path", dataset.test_path}, {"variant", dataset.variant}};
    j["teacher"] = {{"arch", teacher.arch},
                    {"schedule", schedule_to_json(teacher.schedule)},
                    {"batch_size", teacher.batch_size},
                    {"seed", teacher.seed},
                    {"checkpoint", teacher.checkpoint}};
    j["student"] = {{"arch", student_arch}};
    j["distill"] = {{"tau", distill.tau},
                    {"alpha", distill.alpha},
                    {"batch_size", distill.batch_size},
                    {"seed", distill.seed},
                    {"standard_flip_crop", distill.standard_flip_crop},
                    {"momentum", distill.momentum},
                    {"weight_decay", distill.weight_decay},
                    {"scheme", scheme_to_json(distill.scheme)},
                    {"schedule", schedule_to_json(distill.schedule)},
                    {"pick", distill.pick ? pick_to_json(*distill.pick) : json(nullptr)}};
    j["metrics"] = {{"window_k", metrics.window_k}, {"passes", metrics.passes}};
    j["rank"] = {{"schemes", rank.schemes}, {"seeds", rank.seeds}};
    j["prop"] = {{"support", prop.support}, {"classes", prop.classes},
                 {"n", prop.n},             {"repeats", prop.repeats},
                 {"rhos", prop.rhos},       {"world_seed", prop.world_seed},
                 {"sample_seed", prop.sample_seed}};
    j["out_dir"] = out_dir;
    j["threads"] = threads;
    return j;
}

ExperimentConfig ExperimentConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    json j;
    in >> j;
    return from_json(j);
}

std::string ExperimentConfig::teacher_checkpoint_path() const {
    if (!teacher.checkpoint.empty()) return teacher.checkpoint;
    return out_dir + "/teacher.ckpt";
}

DistillConfig scheme_distill_config(const ExperimentConfig& cfg, const std::string& scheme_name,
                                    std::uint64_t seed) {
    DistillConfig d = cfg.distill;
    d.seed = seed;
    d.pick.reset();
    std::string kind = scheme_name;
    if (scheme_name == "cutmix_pick" || scheme_name == "cutmix_pick_student") {
        kind = "cutmix";
        PickConfig p = cfg.distill.pick.value_or(PickConfig{});
        p.scorer = scheme_name == "cutmix_pick" ? PickScorer::teacher_entropy
                                                : PickScorer::student_entropy;
        d.pick = p;
    }
    d.scheme.kind = da_kind_from_string(kind);
    return d;
}

std::pair<Dataset, Dataset> build_dataset(const DatasetSpec& spec) {
    if (spec.type == "synthetic")
        return gen_synthetic(spec.classes, spec.per_class, spec.side, spec.seed);
    if (spec.type == "cifar") {
        if (spec.path.empty() || spec.test_path.empty())
            throw std::invalid_argument("cifar dataset needs path and test_path");
        const CifarVariant v =
            spec.variant == "cifar10" ? CifarVariant::cifar10 : CifarVariant::cifar100;
        Dataset train = load_cifar_binary(spec.path, v);
        Dataset test = load_cifar_binary(spec.test_path, v);
        test.split = "test";
        return {std::move(train), std::move(test)};
    }
    throw std::invalid_argument("unknown dataset type: " + spec.type);
}

// ----------------------------------------------------------- train teacher

TeacherArtifacts run_train_teacher(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    auto [train, test] = build_dataset(cfg.dataset);

    Model teacher = Model::from_spec(cfg.teacher.arch, cfg.teacher.seed);
    Sgd opt(teacher.params(), cfg.distill.momentum, cfg.distill.weight_decay);
    const ScheduleConfig& sched = cfg.teacher.schedule;

    for (int epoch = 0; epoch < sched.scaled_total(); ++epoch) {
        const double lr = lr_at(epoch, sched);
        Rng aug_rng(Rng::derive(cfg.teacher.seed, {0x7EAC4u, static_cast<std::uint64_t>(epoch)}));
        for (const auto& idx :
             batches(train.size(), cfg.teacher.batch_size, Rng::derive(cfg.teacher.seed, {0x7EACu}), epoch)) {
            LabeledBatch batch{gather_images(train, idx), gather_labels(train, idx)};
            batch = standard_flip_crop(batch, cfg.distill.scheme.crop_pad, aug_rng);
            const Tensor logits = teacher.forward(batch.images);
            const Tensor probs = probs_from_logits(logits, 1.0);
            const int n = logits.extent(0), c = logits.extent(1);
            Tensor dlogits({n, c});
            for (int i = 0; i < n; ++i) {
                const int y = batch.labels[static_cast<std::size_t>(i)];
                for (int j = 0; j < c; ++j)
                    dlogits[i * c + j] = (probs[i * c + j] - (j == y ? 1.0 : 0.0)) / n;
            }
            teacher.zero_grads();
            teacher.backward(dlogits);
            opt.step(teacher.params(), teacher.grads(), lr);
        }
    }

    TeacherArtifacts art;
    std::tie(art.train_loss, art.train_acc) = eval_test_loss(teacher, train);
    std::tie(art.test_loss, art.test_acc) = eval_test_loss(teacher, test);
    art.checkpoint_path = cfg.teacher_checkpoint_path();
    save_checkpoint(teacher, art.checkpoint_path);

    json j = {{"arch", cfg.teacher.arch},
              {"train_loss", art.train_loss},
              {"train_acc", art.train_acc},
              {"test_loss", art.test_loss},
              {"test_acc", art.test_acc},
              {"checkpoint", art.checkpoint_path}};
    std::ofstream(cfg.out_dir + "/teacher_metrics.json") << j.dump(2) << "\n";
    art.teacher = std::move(teacher);
    return art;
}

// ----------------------------------------------------------------- rank-da

namespace {
Model load_teacher_or_fail(const ExperimentConfig& cfg) {
    const std::string path = cfg.teacher_checkpoint_path();
    if (!fs::exists(path))
        throw std::runtime_error("missing teacher checkpoint: " + path +
                                 " (run train-teacher first)");
    return load_checkpoint(path);
}

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (const double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double s = 0.0;
    for (const double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

void parallel_cells(int count, int threads, const std::function<void(int)>& work) {
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) work(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    const int n_threads = std::min(threads, count);
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t)
        pool.emplace_back([&]() {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= count) return;
                work(i);
            }
        });
    for (auto& th : pool) th.join();
}
}  // namespace

RankOutput run_rank_da(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    if (cfg.rank.schemes.empty()) throw std::invalid_argument("rank.schemes must be nonempty");
    if (cfg.rank.seeds.empty()) throw std::invalid_argument("rank.seeds must be nonempty");
    const Model teacher = load_teacher_or_fail(cfg);
    auto [train, test] = build_dataset(cfg.dataset);

    const int n_seeds = static_cast<int>(cfg.rank.seeds.size());
    const int n_cells = static_cast<int>(cfg.rank.schemes.size()) * n_seeds;
    RankOutput out;
    out.cells.resize(static_cast<std::size_t>(n_cells));

    const int threads = cfg.threads == 0
                            ? static_cast<int>(std::thread::hardware_concurrency())
                            : cfg.threads;
    parallel_cells(n_cells, threads, [&](int cell) {
        const int s_idx = cell / n_seeds;
        const int k_idx = cell % n_seeds;
        const std::string& scheme = cfg.rank.schemes[static_cast<std::size_t>(s_idx)];
        const std::uint64_t seed = cfg.rank.seeds[static_cast<std::size_t>(k_idx)];
        const DistillConfig dcfg = scheme_distill_config(cfg, scheme, seed);

        StreamConfig stream;
        stream.scheme = dcfg.scheme;
        stream.pick = dcfg.pick;
        stream.batch_size = dcfg.batch_size;
        stream.standard_flip_crop = dcfg.standard_flip_crop;
        stream.passes = cfg.metrics.passes;
        stream.seed = seed;
        const StreamMetricsResult sm = t_stddev(teacher, train, stream, cfg.metrics.window_k);

        Model student = Model::from_spec(cfg.student_arch, Rng::derive(seed, {0x57D7u}));
        const TrainResult tr = train_student(teacher, std::move(student), train, test, dcfg);

        RankCell& rc = out.cells[static_cast<std::size_t>(cell)];
        rc.scheme = scheme;
        rc.seed = seed;
        rc.t_stddev = sm.m_bar;
        rc.vbar = sm.vbar;
        rc.rbar = sm.rbar;
        // mean over the last 5 epochs damps the per-run variation of the
        // final loss (the post-decay plateau is flat)
        const int tail = std::min<int>(5, static_cast<int>(tr.history.size()));
        double loss = 0.0, acc = 0.0;
        for (int e = 0; e < tail; ++e) {
            const RiskReport& r = tr.history[tr.history.size() - 1 - static_cast<std::size_t>(e)];
            loss += r.test_loss;
            acc += r.test_accuracy;
        }
        rc.test_loss = loss / tail;
        rc.test_acc = acc / tail;
    });

    // CSV, scheme-major then seed order (fixed regardless of thread timing)
    out.csv_path = cfg.out_dir + "/rank_da.csv";
    {
        std::ofstream csv(out.csv_path, std::ios::trunc);
        csv << "scheme,t_stddev,vbar,rbar,student_test_loss,student_test_acc,seed\n";
        for (const RankCell& rc : out.cells)
            csv << rc.scheme << ',' << format_double(rc.t_stddev) << ',' << format_double(rc.vbar)
                << ',' << format_double(rc.rbar) << ',' << format_double(rc.test_loss) << ','
                << format_double(rc.test_acc) << ',' << rc.seed << '\n';
    }

    for (std::size_t s = 0; s < cfg.rank.schemes.size(); ++s) {
        std::vector<double> ts, losses, accs, vbars, rbars;
        for (int k = 0; k < n_seeds; ++k) {
            const RankCell& rc = out.cells[s * static_cast<std::size_t>(n_seeds) +
                                           static_cast<std::size_t>(k)];
            ts.push_back(rc.t_stddev);
            losses.push_back(rc.test_loss);
            accs.push_back(rc.test_acc);
            vbars.push_back(rc.vbar);
            rbars.push_back(rc.rbar);
        }
        SchemeAggregate agg;
        agg.scheme = cfg.rank.schemes[s];
        agg.t_stddev_mean = mean_of(ts);
        agg.t_stddev_std = sample_std(ts);
        agg.vbar_mean = mean_of(vbars);
        agg.rbar_mean = mean_of(rbars);
        agg.test_loss_mean = mean_of(losses);
        agg.test_loss_std = sample_std(losses);
        agg.test_acc_mean = mean_of(accs);
        out.aggregates.push_back(agg);
    }

    std::vector<double> xs, ys;
    for (const auto& agg : out.aggregates) {
        xs.push_back(agg.t_stddev_mean);
        ys.push_back(agg.test_loss_mean);
    }
    json corr_json;
    if (xs.size() >= 3) {
        try {
            out.corr = pearson(xs, ys);
            out.correlation_defined = true;
            corr_json = {{"defined", true}, {"r", out.corr.r}, {"p_value", out.corr.p_value},
                         {"n", out.corr.n}};
        } catch (const std::invalid_argument&) {
            corr_json = {{"defined", false}, {"reason", "constant scheme means"}};
        }
    } else {
        corr_json = {{"defined", false}, {"reason", "need at least 3 schemes"}};
    }

    json per_scheme;
    for (const auto& agg : out.aggregates) {
        per_scheme[agg.scheme] = {
            {"t_stddev", {{"mean", agg.t_stddev_mean}, {"std", agg.t_stddev_std}}},
            {"vbar", {{"mean", agg.vbar_mean}}},
            {"rbar", {{"mean", agg.rbar_mean}}},
            {"student_test_loss", {{"mean", agg.test_loss_mean}, {"std", agg.test_loss_std}}},
            {"student_test_acc", {{"mean", agg.test_acc_mean}}}};
    }
    json summary = {{"per_scheme", per_scheme},
                    {"pearson_t_stddev_vs_test_loss", corr_json},
                    {"seeds", cfg.rank.seeds}};
    out.summary_path = cfg.out_dir + "/rank_da_summary.json";
    std::ofstream(out.summary_path) << summary.dump(2) << "\n";
    return out;
}

// --------------------------------------------------------------- prop-check

PropOutput run_prop_check(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    if (cfg.prop.rhos.empty()) throw std::invalid_argument("prop.rhos must be nonempty");
    const SyntheticWorld world =
        SyntheticWorld::random(cfg.prop.support, cfg.prop.classes, cfg.prop.world_seed);

    PropOutput out;
    const bool enumerable =
        std::pow(static_cast<double>(cfg.prop.support), cfg.prop.n) <= 1e6;
    for (std::size_t i = 0; i < cfg.prop.rhos.size(); ++i) {
        const double rho = cfg.prop.rhos[i];
        PropRow row;
        row.rho = rho;
        row.n = cfg.prop.n;
        Rng rng(Rng::derive(cfg.prop.sample_seed, {0x6A9u, i}));
        row.mc = estimate_gap_moments(world, cfg.prop.n, rho, cfg.prop.repeats, rng);
        row.exact = enumerable ? exact_gap_moments(world, cfg.prop.n, rho)
                               : closed_form_gap_moments(world, cfg.prop.n, rho);
        row.exact_enumerated = enumerable;
        out.rows.push_back(row);
    }

    out.csv_path = cfg.out_dir + "/prop_check.csv";
    {
        std::ofstream csv(out.csv_path, std::ios::trunc);
        csv << "rho,N,mean_delta,se_delta,mean_delta_sq,se_delta_sq,exact_mean,exact_sq\n";
        for (const PropRow& r : out.rows)
            csv << format_double(r.rho) << ',' << r.n << ',' << format_double(r.mc.mean_delta)
                << ',' << format_double(r.mc.se_delta) << ',' << format_double(r.mc.mean_delta_sq)
                << ',' << format_double(r.mc.se_delta_sq) << ','
                << format_double(r.exact.mean_delta) << ','
                << format_double(r.exact.mean_delta_sq) << '\n';
    }

    // acceptance checks: E[Delta^2] strictly increasing in rho, and the
    // variance decomposition identity when enumeration was possible
    if (out.rows.size() >= 2) {
        for (std::size_t i = 1; i < out.rows.size(); ++i) {
            if (!(out.rows[i].mc.mean_delta_sq > out.rows[i - 1].mc.mean_delta_sq)) {
                out.checks_ok = false;
                out.failures.push_back("monte-carlo E[Delta^2] not strictly increasing at rho=" +
                                       format_double(out.rows[i].rho));
            }
            if (!(out.rows[i].exact.mean_delta_sq > out.rows[i - 1].exact.mean_delta_sq)) {
                out.checks_ok = false;
                out.failures.push_back("exact E[Delta^2] not strictly increasing at rho=" +
                                       format_double(out.rows[i].rho));
            }
        }
    }
    for (const PropRow& r : out.rows) {
        if (!r.exact_enumerated) continue;
        const double diff = std::abs(r.exact.var_direct - (r.exact.var_term + r.exact.cov_term));
        if (diff > 1e-12) {
            out.checks_ok = false;
            out.failures.push_back("variance decomposition identity violated at rho=" +
                                   format_double(r.rho) + " (|diff|=" + format_double(diff) + ")");
        }
    }
    return out;
}

// ------------------------------------------------------------------ distill

DistillArtifacts run_distill(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    const Model teacher = load_teacher_or_fail(cfg);
    auto [train, test] = build_dataset(cfg.dataset);
    Model student = Model::from_spec(cfg.student_arch, Rng::derive(cfg.distill.seed, {0x57D7u}));

    DistillArtifacts art;
    art.result = train_student(teacher, std::move(student), train, test, cfg.distill);

    const std::string tag = to_string(cfg.distill.scheme.kind) +
                            (cfg.distill.pick ? "_pick" : "") + "_seed" +
                            std::to_string(cfg.distill.seed);
    art.checkpoint_path = cfg.out_dir + "/student_" + tag + ".ckpt";
    save_checkpoint(art.result.student, art.checkpoint_path);

    art.history_path = cfg.out_dir + "/distill_history_" + tag + ".csv";
    std::ofstream csv(art.history_path, std::ios::trunc);
    csv << "epoch,empirical_risk,distilled_risk,test_loss,test_accuracy\n";
    for (const RiskReport& r : art.result.history)
        csv << r.epoch << ',' << format_double(r.empirical_risk) << ','
            << format_double(r.distilled_risk) << ',' << format_double(r.test_loss) << ','
            << format_double(r.test_accuracy) << '\n';
    return art;
}

StreamMetricsResult run_tstddev(const ExperimentConfig& cfg, const std::string& out_json) {
    const Model teacher = load_teacher_or_fail(cfg);
    auto [train, test] = build_dataset(cfg.dataset);
    (void)test;
    StreamConfig stream;
    stream.scheme = cfg.distill.scheme;
    stream.pick = cfg.distill.pick;
    stream.batch_size = cfg.distill.batch_size;
    stream.standard_flip_crop = cfg.distill.standard_flip_crop;
    stream.passes = cfg.metrics.passes;
    stream.seed = cfg.distill.seed;
    const StreamMetricsResult r = t_stddev(teacher, train, stream, cfg.metrics.window_k);
    if (!out_json.empty()) {
        json j = {{"scheme", to_string(cfg.distill.scheme.kind)},
                  {"picked", cfg.distill.pick.has_value()},
                  {"window_k", cfg.metrics.window_k},
                  {"passes", cfg.metrics.passes},
                  {"windows", r.window_count},
                  {"t_stddev", r.m_bar},
                  {"vbar", r.vbar},
                  {"rbar", r.rbar},
                  {"zero_variance_rows", r.zero_variance_rows}};
        fs::create_directories(fs::path(out_json).parent_path().empty()
                                   ? fs::path(".")
                                   : fs::path(out_json).parent_path());
        std::ofstream(out_json) << j.dump(2) << "\n";
    }
    return r;
}

CorrelationReport correlate_rank_csv(const std::string& csv_path, const std::string& out_json) {
    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot open CSV: " + csv_path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + csv_path);
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_scheme;
    std::vector<std::string> order;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() < 7) throw std::runtime_error("bad CSV row: " + line);
        auto& entry = by_scheme[fields[0]];
        if (entry.first.empty()) order.push_back(fields[0]);
        entry.first.push_back(std::stod(fields[1]));   // t_stddev
        entry.second.push_back(std::stod(fields[4]));  // student_test_loss
    }
    std::vector<double> xs, ys;
    for (const auto& scheme : order) {
        const auto& entry = by_scheme[scheme];
        xs.push_back(mean_of(entry.first));
        ys.push_back(mean_of(entry.second));
    }
    const CorrelationReport rep = pearson(xs, ys);
    if (!out_json.empty()) {
        json j = {{"r", rep.r}, {"p_value", rep.p_value}, {"n", rep.n},
                  {"x", "t_stddev per-scheme mean"}, {"y", "student_test_loss per-scheme mean"}};
        std::ofstream(out_json) << j.dump(2) << "\n";
    }
    return rep;
}

}  // namespace kdda

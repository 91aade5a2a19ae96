#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdda/checkpoint.hpp"
#include "kdda/data.hpp"
#include "kdda/distill.hpp"
#include "kdda/metrics.hpp"
#include "kdda/prop_lab.hpp"

namespace kdda {

struct DatasetSpec {
    std::string type = "synthetic";  // "synthetic" | "cifar"
    int classes = 10;
    int per_class = 200;
    int side = 16;
    std::uint64_t seed = 1;
    std::string path;       // cifar train file
    std::string test_path;  // cifar test file
    std::string variant = "cifar100";
};

struct TeacherSpec {
    std::string arch = "conv3x3:1:12,relu,maxpool2,conv3x3:12:24,relu,maxpool2,dense:384:10";
    ScheduleConfig schedule;
    int batch_size = 64;
    std::uint64_t seed = 1;
    std::string checkpoint;  // empty -> <out_dir>/teacher.ckpt
};

struct MetricsSpec {
    int window_k = 640;
    int passes = 10;
};

struct RankSpec {
    std::vector<std::string> schemes = {"identity", "flip",   "flip_crop",  "cutout",
                                        "mixup",    "cutmix", "cutmix_pick"};
    std::vector<std::uint64_t> seeds = {1, 2, 3};
};

struct PropSpec {
    int support = 8;
    int classes = 5;
    int n = 16;
    int repeats = 20000;
    std::vector<double> rhos = {0.0, 0.3, 0.6, 0.9};
    std::uint64_t world_seed = 7;
    std::uint64_t sample_seed = 99;
};

struct ExperimentConfig {
    DatasetSpec dataset;
    TeacherSpec teacher;
    std::string student_arch = "conv3x3:1:8,relu,maxpool2,conv3x3:8:16,relu,maxpool2,dense:256:10";
    DistillConfig distill;
    MetricsSpec metrics;
    RankSpec rank;
    PropSpec prop;
    std::string out_dir = "out";
    int threads = 1;

    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    static ExperimentConfig load_file(const std::string& path);

    std::string teacher_checkpoint_path() const;
};

// Desk-scale defaults (synthetic data, small CNNs, short schedules).
ExperimentConfig default_config();

// Maps a ranking scheme name ("cutmix_pick" enables teacher-entropy picking)
// onto the distill config.
DistillConfig scheme_distill_config(const ExperimentConfig& cfg, const std::string& scheme_name,
                                    std::uint64_t seed);

std::pair<Dataset, Dataset> build_dataset(const DatasetSpec& spec);

struct TeacherArtifacts {
    Model teacher;
    std::string checkpoint_path;
    double train_loss = 0.0, train_acc = 0.0;
    double test_loss = 0.0, test_acc = 0.0;
};
TeacherArtifacts run_train_teacher(const ExperimentConfig& cfg);

struct RankCell {
    std::string scheme;
    std::uint64_t seed = 0;
    double t_stddev = 0.0, vbar = 0.0, rbar = 0.0;
    double test_loss = 0.0, test_acc = 0.0;
};

struct SchemeAggregate {
    std::string scheme;
    double t_stddev_mean = 0.0, t_stddev_std = 0.0;
    double vbar_mean = 0.0, rbar_mean = 0.0;
    double test_loss_mean = 0.0, test_loss_std = 0.0;
    double test_acc_mean = 0.0;
};

struct RankOutput {
    std::vector<RankCell> cells;  // scheme-major, seed-minor
    std::vector<SchemeAggregate> aggregates;
    bool correlation_defined = false;
    CorrelationReport corr;
    std::string csv_path, summary_path;
};
RankOutput run_rank_da(const ExperimentConfig& cfg);

struct PropRow {
    double rho = 0.0;
    int n = 0;
    GapMoments mc;
    ExactGapMoments exact;
    bool exact_enumerated = false;  // enumeration vs closed form
};

struct PropOutput {
    std::vector<PropRow> rows;
    bool checks_ok = true;
    std::vector<std::string> failures;
    std::string csv_path;
};
PropOutput run_prop_check(const ExperimentConfig& cfg);

struct DistillArtifacts {
    TrainResult result;
    std::string checkpoint_path, history_path;
};
DistillArtifacts run_distill(const ExperimentConfig& cfg);

StreamMetricsResult run_tstddev(const ExperimentConfig& cfg, const std::string& out_json);

// Re-computes the per-scheme-mean Pearson report from a rank-da CSV.
CorrelationReport correlate_rank_csv(const std::string& csv_path, const std::string& out_json);

std::string format_double(double v);

}  // namespace kdda

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "kdda/experiment.hpp"

using namespace kdda;
namespace fs = std::filesystem;

namespace {
ExperimentConfig tiny_config(const std::string& out_dir) {
    ExperimentConfig cfg = default_config();
    cfg.dataset.classes = 3;
    cfg.dataset.per_class = 30;
    cfg.dataset.side = 8;
    cfg.teacher.arch = "conv3x3:1:4,relu,maxpool2,dense:64:3";
    cfg.teacher.schedule.total_epochs = 3;
    cfg.teacher.schedule.decay_epochs = {2};
    cfg.student_arch = "conv3x3:1:3,relu,maxpool2,dense:48:3";
    cfg.distill.schedule.total_epochs = 2;
    cfg.distill.schedule.decay_epochs = {1};
    cfg.distill.scheme.crop_pad = 1;
    cfg.distill.scheme.cutout_length = 3;
    cfg.distill.batch_size = 16;
    cfg.metrics.window_k = 48;
    cfg.metrics.passes = 2;
    cfg.rank.schemes = {"identity", "cutmix", "cutmix_pick"};
    cfg.rank.seeds = {1, 2};
    cfg.prop.support = 4;
    cfg.prop.classes = 3;
    cfg.prop.n = 3;
    cfg.prop.repeats = 2000;
    cfg.prop.rhos = {0.0, 0.25, 0.5, 0.75};
    cfg.out_dir = out_dir;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(KDDA_BIN) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}
}  // namespace

TEST_CASE("config JSON round-trip is identity") {
    const ExperimentConfig cfg = tiny_config("/tmp/kdda_cli_rt");
    const nlohmann::json j1 = cfg.to_json();
    const ExperimentConfig back = ExperimentConfig::from_json(j1);
    const nlohmann::json j2 = back.to_json();
    CHECK(j1 == j2);

    // defaults survive a round-trip too
    const nlohmann::json d1 = default_config().to_json();
    CHECK(d1 == ExperimentConfig::from_json(d1).to_json());
}

TEST_CASE("scheme name mapping") {
    const ExperimentConfig cfg = default_config();
    const DistillConfig plain = scheme_distill_config(cfg, "mixup", 3);
    CHECK(plain.scheme.kind == DAKind::mixup);
    CHECK_FALSE(plain.pick.has_value());
    CHECK(plain.seed == 3);

    const DistillConfig picked = scheme_distill_config(cfg, "cutmix_pick", 4);
    CHECK(picked.scheme.kind == DAKind::cutmix);
    REQUIRE(picked.pick.has_value());
    CHECK(picked.pick->scorer == PickScorer::teacher_entropy);
    CHECK(picked.pick->ratio_r == 0.5);

    const DistillConfig student_pick = scheme_distill_config(cfg, "cutmix_pick_student", 4);
    REQUIRE(student_pick.pick.has_value());
    CHECK(student_pick.pick->scorer == PickScorer::student_entropy);

    CHECK_THROWS_AS(scheme_distill_config(cfg, "nonsense", 1), std::invalid_argument);
}

TEST_CASE("prop-check output is deterministic and complete") {
    ExperimentConfig cfg = tiny_config("/tmp/kdda_cli_prop");
    fs::remove_all(cfg.out_dir);
    const PropOutput a = run_prop_check(cfg);
    CHECK(a.rows.size() == 4);
    CHECK(a.checks_ok);
    for (const auto& row : a.rows) CHECK(row.exact_enumerated);
    const std::string csv_a = slurp(a.csv_path);

    const PropOutput b = run_prop_check(cfg);
    CHECK(slurp(b.csv_path) == csv_a);
    CHECK(csv_a.substr(0, csv_a.find('\n')) ==
          "rho,N,mean_delta,se_delta,mean_delta_sq,se_delta_sq,exact_mean,exact_sq");
    fs::remove_all(cfg.out_dir);
}

TEST_CASE("rank-da requires a trained teacher") {
    ExperimentConfig cfg = tiny_config("/tmp/kdda_cli_missing");
    fs::remove_all(cfg.out_dir);
    CHECK_THROWS_AS(run_rank_da(cfg), std::runtime_error);
    CHECK_THROWS_AS(run_distill(cfg), std::runtime_error);
    fs::remove_all(cfg.out_dir);
}

TEST_CASE("teacher -> distill -> correlate pipeline on a tiny config") {
    ExperimentConfig cfg = tiny_config("/tmp/kdda_cli_pipe");
    fs::remove_all(cfg.out_dir);

    const TeacherArtifacts ta = run_train_teacher(cfg);
    CHECK(fs::exists(ta.checkpoint_path));
    CHECK(fs::exists(cfg.out_dir + "/teacher_metrics.json"));

    // checkpoint reload reproduces the evaluation bit-for-bit
    Model reloaded = load_checkpoint(ta.checkpoint_path);
    auto [train, test] = build_dataset(cfg.dataset);
    Model teacher_copy = ta.teacher;
    const auto ev1 = eval_test_loss(teacher_copy, test);
    const auto ev2 = eval_test_loss(reloaded, test);
    CHECK(ev1.first == ev2.first);
    CHECK(ev1.second == ev2.second);

    const DistillArtifacts da = run_distill(cfg);
    CHECK(fs::exists(da.checkpoint_path));
    CHECK(fs::exists(da.history_path));
    CHECK(da.result.history.size() == 2);

    const StreamMetricsResult sm = run_tstddev(cfg, cfg.out_dir + "/tstddev.json");
    CHECK(sm.m_bar > 0.0);
    CHECK(fs::exists(cfg.out_dir + "/tstddev.json"));
    fs::remove_all(cfg.out_dir);
}

TEST_CASE("CLI exit codes") {
    const std::string dir = "/tmp/kdda_cli_codes";
    fs::remove_all(dir);
    fs::create_directories(dir);

    // validation failure: config file missing
    CHECK(run_cli("prop-check --config /tmp/does_not_exist.json") == 1);

    // validation failure: distill without a teacher checkpoint
    {
        nlohmann::json j = tiny_config(dir).to_json();
        std::ofstream(dir + "/cfg.json") << j.dump();
        CHECK(run_cli("distill --config " + dir + "/cfg.json") == 1);
    }

    // success path
    CHECK(run_cli("prop-check --config " + dir + "/cfg.json") == 0);

    // acceptance failure: a descending rho grid breaks monotonicity -> exit 2
    {
        ExperimentConfig cfg = tiny_config(dir);
        cfg.prop.rhos = {0.75, 0.0};
        std::ofstream(dir + "/bad.json") << cfg.to_json().dump();
        CHECK(run_cli("prop-check --config " + dir + "/bad.json") == 2);
    }
    fs::remove_all(dir);
}

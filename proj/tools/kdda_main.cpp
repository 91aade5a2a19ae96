#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kdda/experiment.hpp"

namespace {

kdda::ExperimentConfig make_config(const std::string& config_path,
                                   const std::optional<std::uint64_t>& seed,
                                   const std::optional<std::string>& out_dir) {
    kdda::ExperimentConfig cfg = config_path.empty()
                                     ? kdda::default_config()
                                     : kdda::ExperimentConfig::load_file(config_path);
    if (seed) {
        cfg.distill.seed = *seed;
        cfg.prop.sample_seed = *seed;
    }
    if (out_dir) cfg.out_dir = *out_dir;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"knowledge distillation + data augmentation quality toolkit"};
    app.require_subcommand(1);
    app.fallthrough(true);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    app.add_option("--config", config_path, "JSON config file (defaults are desk-scale)");
    app.add_option("--seed", seed, "override the run seed");
    app.add_option("--out", out_dir, "override the output directory");

    auto* train_teacher = app.add_subcommand("train-teacher", "train the teacher with plain CE");
    auto* distill = app.add_subcommand("distill", "distill a student with the configured DA scheme");
    auto* tstddev = app.add_subcommand("tstddev", "teacher-only stream metrics for one scheme");
    auto* rank_da = app.add_subcommand("rank-da", "rank DA schemes and correlate with student loss");
    auto* prop_check = app.add_subcommand("prop-check", "variance/covariance proposition checks");
    auto* correlate = app.add_subcommand("correlate", "Pearson r/p from an existing rank CSV");

    std::string csv_path;
    correlate->add_option("--csv", csv_path, "rank CSV to correlate (default <out>/rank_da.csv)");

    CLI11_PARSE(app, argc, argv);

    try {
        const kdda::ExperimentConfig cfg = make_config(config_path, seed, out_dir);
        if (train_teacher->parsed()) {
            const auto art = kdda::run_train_teacher(cfg);
            std::cout << "teacher " << art.checkpoint_path
                      << " train_acc=" << kdda::format_double(art.train_acc)
                      << " test_acc=" << kdda::format_double(art.test_acc)
                      << " test_loss=" << kdda::format_double(art.test_loss) << "\n";
        } else if (distill->parsed()) {
            const auto art = kdda::run_distill(cfg);
            const auto& last = art.result.history.back();
            std::cout << "student " << art.checkpoint_path
                      << " test_loss=" << kdda::format_double(last.test_loss)
                      << " test_acc=" << kdda::format_double(last.test_accuracy) << "\n";
        } else if (tstddev->parsed()) {
            const auto r = kdda::run_tstddev(cfg, cfg.out_dir + "/tstddev.json");
            std::cout << "t_stddev=" << kdda::format_double(r.m_bar)
                      << " vbar=" << kdda::format_double(r.vbar)
                      << " rbar=" << kdda::format_double(r.rbar)
                      << " windows=" << r.window_count << "\n";
        } else if (rank_da->parsed()) {
            const auto out = kdda::run_rank_da(cfg);
            for (const auto& agg : out.aggregates)
                std::cout << agg.scheme << " t_stddev=" << kdda::format_double(agg.t_stddev_mean)
                          << " test_loss=" << kdda::format_double(agg.test_loss_mean) << "\n";
            if (out.correlation_defined)
                std::cout << "pearson r=" << kdda::format_double(out.corr.r)
                          << " p=" << kdda::format_double(out.corr.p_value) << "\n";
            else
                std::cout << "pearson undefined (need >= 3 non-constant scheme means)\n";
            std::cout << "wrote " << out.csv_path << " and " << out.summary_path << "\n";
        } else if (prop_check->parsed()) {
            const auto out = kdda::run_prop_check(cfg);
            for (const auto& r : out.rows)
                std::cout << "rho=" << kdda::format_double(r.rho)
                          << " E[d]=" << kdda::format_double(r.mc.mean_delta)
                          << " E[d^2]=" << kdda::format_double(r.mc.mean_delta_sq)
                          << " exact=" << kdda::format_double(r.exact.mean_delta_sq) << "\n";
            std::cout << "wrote " << out.csv_path << "\n";
            if (!out.checks_ok) {
                for (const auto& f : out.failures) std::cerr << "check failed: " << f << "\n";
                return 2;
            }
        } else if (correlate->parsed()) {
            const std::string path = csv_path.empty() ? cfg.out_dir + "/rank_da.csv" : csv_path;
            const auto rep = kdda::correlate_rank_csv(path, cfg.out_dir + "/correlate.json");
            std::cout << "pearson r=" << kdda::format_double(rep.r)
                      << " p=" << kdda::format_double(rep.p_value) << " n=" << rep.n << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

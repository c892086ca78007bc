// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Runs everything from scratch in a temp directory (datasets included),
// so a fresh clone passes or fails on its own merits.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wdce/commands.hpp"
#include "wdce/config.hpp"
#include "wdce/data.hpp"
#include "wdce/model.hpp"
#include "wdce/ops.hpp"
#include "wdce/rng.hpp"
#include "wdce/verify.hpp"
#include "wdce/wavelet.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool passed, const std::string& what, const std::string& detail) {
    std::cout << (passed ? "[PASS]" : "[FAIL]") << " criterion " << criterion << " (" << what
              << "): " << detail << "\n"
              << std::flush;
    if (!passed) ++g_failures;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// ---- criterion 1 & 2: Haar reconstruction/Parseval and filter algebra --

void criterion_1_2() {
    const auto start = Clock::now();
    const std::vector<std::size_t> sweep{2, 4, 8, 16, 32, 64};

    double recon_err = 0.0, parseval_err = 0.0;
    wdce::Rng rng(515151);
    for (std::size_t frames : sweep) {
        const auto filters = wdce::build_haar(frames);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> values(frames);
            for (double& v : values) v = rng.uniform(-2.0, 2.0);
            auto x = wdce::Tensor::from_data({1, frames}, values);
            auto bands = wdce::dwt(x, filters);
            auto back = wdce::idwt(bands.low, bands.high, filters);
            double ex = 0.0, eb = 0.0;
            for (std::size_t i = 0; i < frames; ++i) {
                recon_err = std::max(recon_err, std::fabs(back->data[i] - x->data[i]));
                ex += x->data[i] * x->data[i];
            }
            for (double v : bands.low->data) eb += v * v;
            for (double v : bands.high->data) eb += v * v;
            parseval_err = std::max(parseval_err, std::fabs(ex - eb) / std::max(1.0, ex));
        }
    }
    const double elapsed = seconds_since(start);
    {
        char buf[200];
        std::snprintf(buf, sizeof(buf),
                      "max reconstruction err %.3g, max Parseval err %.3g, %.2f s",
                      recon_err, parseval_err, elapsed);
        report(1, recon_err < 1e-10 && parseval_err < 1e-10 && elapsed < 5.0,
               "Haar correctness", buf);
    }

    double algebra_err = 0.0;
    for (std::size_t frames : sweep) {
        const auto f = wdce::build_haar(frames);
        const std::size_t half = frames / 2;
        auto ltl = wdce::matmul(wdce::transpose2d(f.low), f.low);
        auto hth = wdce::matmul(wdce::transpose2d(f.high), f.high);
        auto lth = wdce::matmul(wdce::transpose2d(f.low), f.high);
        auto complete = wdce::add(wdce::matmul(f.low, wdce::transpose2d(f.low)),
                                  wdce::matmul(f.high, wdce::transpose2d(f.high)));
        for (std::size_t i = 0; i < half; ++i) {
            for (std::size_t j = 0; j < half; ++j) {
                const double eye = i == j ? 1.0 : 0.0;
                algebra_err = std::max(algebra_err, std::fabs(ltl->data[i * half + j] - eye));
                algebra_err = std::max(algebra_err, std::fabs(hth->data[i * half + j] - eye));
                algebra_err = std::max(algebra_err, std::fabs(lth->data[i * half + j]));
            }
        }
        for (std::size_t i = 0; i < frames; ++i) {
            for (std::size_t j = 0; j < frames; ++j) {
                const double eye = i == j ? 1.0 : 0.0;
                algebra_err = std::max(algebra_err,
                                       std::fabs(complete->data[i * frames + j] - eye));
            }
        }
    }
    {
        char buf[120];
        std::snprintf(buf, sizeof(buf), "max deviation %.3g over T in {2..64}", algebra_err);
        report(2, algebra_err < 1e-12, "filter algebra", buf);
    }
}

// ---- criterion 3: gradient fidelity ------------------------------------

void criterion_3() {
    const auto start = Clock::now();
    const auto checks = wdce::verify_grad();
    const double elapsed = seconds_since(start);
    double worst = 0.0;
    bool ok = true;
    for (const auto& c : checks) {
        worst = std::max(worst, c.max_error);
        if (!c.passed) {
            ok = false;
            std::cout << "         failing: " << c.name << " err " << c.max_error << "\n";
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%zu checks, worst rel err %.3g, %.2f s (< 60 s)",
                  checks.size(), worst, elapsed);
    report(3, ok && elapsed < 60.0, "gradient fidelity", buf);
}

// ---- criterion 4 & 5: attention and contrastive property suites --------

void suite_criterion(int criterion, const char* name, const char* suite) {
    const auto checks = wdce::verify_suite(suite);
    bool ok = true;
    double worst = 0.0;
    for (const auto& c : checks) {
        worst = std::max(worst, c.max_error);
        if (!c.passed) {
            ok = false;
            std::cout << "         failing: " << c.name << " err " << c.max_error << "\n";
        }
    }
    char buf[120];
    std::snprintf(buf, sizeof(buf), "%zu checks, worst err %.3g", checks.size(), worst);
    report(criterion, ok, name, buf);
}

// ---- criterion 6: ablation trend ---------------------------------------

void criterion_6(const fs::path& dir) {
    const auto start = Clock::now();
    const fs::path data_path = dir / "default.wdcd";
    std::ostringstream gen_log;
    wdce::cli::cmd_gen(wdce::SynthSpec{}, data_path.string(), gen_log);

    const fs::path out_dir = dir / "ablation";
    wdce::cli::cmd_ablate(wdce::cli::ablation_default_config(), data_path.string(),
                          out_dir.string(), {1, 2, 3}, std::cout);

    std::map<std::string, std::vector<double>> by_variant;
    std::ifstream results(out_dir / "results.csv");
    std::string line;
    std::getline(results, line);  // header
    while (std::getline(results, line)) {
        std::stringstream ls(line);
        std::string variant, seed, acc;
        std::getline(ls, variant, ',');
        std::getline(ls, seed, ',');
        std::getline(ls, acc, ',');
        by_variant[variant].push_back(std::stod(acc));
    }

    auto mean_of = [&](const std::string& name) {
        const auto& v = by_variant.at(name);
        double s = 0.0;
        for (double a : v) s += a;
        return s / double(v.size());
    };
    const double elapsed = seconds_since(start);

    std::size_t rows = 0;
    for (const auto& [name, accs] : by_variant) rows += accs.size();
    const bool grid_ok = by_variant.size() == 7 && rows == 21;

    const double base = mean_of("baseline");
    const double full = mean_of("full");
    const double dwt_da = mean_of("dwt_da");
    const double cs_da = mean_of("channel_split_da");

    char buf[300];
    std::snprintf(buf, sizeof(buf),
                  "full %.3f vs baseline %.3f (need >= +0.05); dwt_da %.3f vs channel_split "
                  "%.3f (strict); 7x3 grid %s; %.0f s (< 900 s)",
                  full, base, dwt_da, cs_da, grid_ok ? "complete" : "INCOMPLETE", elapsed);
    report(6, grid_ok && full >= base + 0.05 && dwt_da > cs_da && elapsed < 900.0,
           "ablation trend", buf);
}

// ---- criterion 7: training sanity on the easy regime -------------------

void criterion_7(const fs::path& dir) {
    wdce::RunConfig cfg = wdce::cli::sanity_default_config();
    const fs::path data_path = dir / "easy.wdcd";
    std::ostringstream log;
    wdce::cli::cmd_gen(cfg.synth, data_path.string(), log);

    const auto raw = wdce::load_dataset(data_path.string());
    auto [train_split, test_split] =
        wdce::split_dataset(raw, cfg.train.train_fraction, cfg.train.seed);

    wdce::WdceModel model(cfg.backbone, cfg.train, wdce::toy_skeleton(raw[0].joints),
                          raw[0].channels, raw[0].frames, wdce::class_counts(raw).size());
    wdce::SgdOptimizer opt(model.parameters(), cfg.train.learning_rate, cfg.train.momentum,
                           cfg.train.weight_decay);

    std::vector<double> losses;
    std::vector<std::size_t> epochs;
    wdce::run_training(model, opt, train_split,
                       [&](std::size_t epoch, std::size_t, const wdce::StepMetrics& m) {
                           losses.push_back(m.loss_total);
                           epochs.push_back(epoch);
                       });

    const std::size_t steps = losses.size();
    const double train_acc = wdce::evaluate(model, train_split, cfg.train.batch_size).accuracy;

    // 10-step moving average must not increase once the first milestone
    // has decayed the learning rate
    const std::size_t milestone_epoch = cfg.train.effective_milestones().front();
    std::size_t milestone_step = steps;
    for (std::size_t i = 0; i < steps; ++i) {
        if (epochs[i] >= milestone_epoch) {
            milestone_step = i;
            break;
        }
    }
    auto ma_at = [&](std::size_t end) {  // mean of losses[end-9..end]
        double s = 0.0;
        for (std::size_t i = end + 1 - 10; i <= end; ++i) s += losses[i];
        return s / 10.0;
    };
    std::size_t violations = 0;
    double worst_rise = 0.0;
    for (std::size_t end = std::max<std::size_t>(10, milestone_step); end < steps; ++end) {
        const double prev = ma_at(end - 1), cur = ma_at(end);
        if (cur > prev + 1e-12) {
            ++violations;
            worst_rise = std::max(worst_rise, cur - prev);
        }
    }

    char buf[240];
    std::snprintf(buf, sizeof(buf),
                  "train acc %.3f (need >= 0.95) in %zu steps (<= 200); moving-average "
                  "violations after milestone: %zu (worst rise %.3g)",
                  train_acc, steps, violations, worst_rise);
    report(7, train_acc >= 0.95 && steps <= 200 && violations == 0, "training sanity", buf);
}

// ---- criterion 8: determinism of command artifacts ---------------------

void criterion_8(const fs::path& dir) {
    std::ostringstream log;
    bool ok = true;
    std::string detail;

    // dataset generation
    wdce::SynthSpec spec;
    spec.samples_per_class = 20;
    const fs::path gen_a = dir / "det_a.wdcd", gen_b = dir / "det_b.wdcd";
    wdce::cli::cmd_gen(spec, gen_a.string(), log);
    wdce::cli::cmd_gen(spec, gen_b.string(), log);
    if (read_bytes(gen_a) != read_bytes(gen_b)) {
        ok = false;
        detail += "gen bytes differ; ";
    }

    // training artifacts: metrics csv + checkpoint
    wdce::RunConfig cfg;
    cfg.backbone.n_stgc = 1;
    cfg.backbone.n_ssa = 1;
    cfg.backbone.channels = {4};
    cfg.backbone.tcn_kernel = 3;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 16;
    cfg.train.att_dim = 4;
    cfg.synth = spec;
    const fs::path run_a = dir / "det_run_a", run_b = dir / "det_run_b";
    wdce::cli::cmd_train(cfg, gen_a.string(), run_a.string(), log);
    wdce::cli::cmd_train(cfg, gen_a.string(), run_b.string(), log);
    if (read_bytes(run_a / "metrics.csv") != read_bytes(run_b / "metrics.csv")) {
        ok = false;
        detail += "metrics.csv bytes differ; ";
    }
    if (read_bytes(run_a / "model.ckpt") != read_bytes(run_b / "model.ckpt")) {
        ok = false;
        detail += "model.ckpt bytes differ; ";
    }

    // transform dumps
    const fs::path traj = dir / "det_traj.csv";
    {
        std::ofstream out(traj);
        out << "t0,0.25,1,-0.5,2,0.125,3,-1,4\n";
    }
    wdce::cli::cmd_dwt(traj.string(), (dir / "det_dwt_a").string(), false, log);
    wdce::cli::cmd_dwt(traj.string(), (dir / "det_dwt_b").string(), false, log);
    if (read_bytes(dir / "det_dwt_a" / "low.csv") != read_bytes(dir / "det_dwt_b" / "low.csv")) {
        ok = false;
        detail += "dwt bytes differ; ";
    }

    if (detail.empty()) detail = "gen, train (metrics + checkpoint) and dwt reruns byte-identical";
    report(8, ok, "determinism", detail);
}

// ---- criterion 9: generator discriminability ---------------------------

void criterion_9() {
    const auto data = wdce::generate(wdce::SynthSpec{});
    const auto disc = wdce::band_discriminability(data, wdce::SynthSpec{}.class_pairs);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "min pair ratio %.2f, mean %.2f (need min >= 5)",
                  disc.min_ratio, disc.mean_ratio);
    report(9, disc.min_ratio >= 5.0, "generator discriminability", buf);
}

}  // namespace

int main() {
    const auto dir = fs::temp_directory_path() / "wdce_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);

    try {
        criterion_1_2();
        criterion_3();
        suite_criterion(4, "attention contracts", "attention");
        suite_criterion(5, "contrastive analytics", "contrastive");
        criterion_9();
        criterion_8(dir);
        criterion_7(dir);
        criterion_6(dir);
    } catch (const std::exception& e) {
        std::cout << "[FAIL] acceptance aborted: " << e.what() << "\n";
        return 1;
    }

    if (g_failures == 0) {
        std::cout << "acceptance: all criteria passed\n";
        return 0;
    }
    std::cout << "acceptance: " << g_failures << " criterion(s) FAILED\n";
    return 1;
}

#include "wdce/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "wdce/data.hpp"
#include "wdce/model.hpp"
#include "wdce/ops.hpp"
#include "wdce/serialize.hpp"
#include "wdce/verify.hpp"
#include "wdce/wavelet.hpp"

namespace wdce::cli {

namespace fs = std::filesystem;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

Dataset load_dataset_checked(const std::string& path) {
    try {
        return load_dataset(path);
    } catch (const FormatError& e) {
        throw ConfigError("dataset " + path + ": " + e.what());
    } catch (const std::runtime_error& e) {
        throw ConfigError(e.what());
    }
}

std::size_t dataset_classes(const Dataset& data) {
    const auto counts = class_counts(data);
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0) {
            throw ConfigError("dataset has no samples for class " + std::to_string(k));
        }
    }
    return counts.size();
}

struct PreparedRun {
    SkeletonGraph graph;
    Dataset train, test;
    std::size_t classes = 0;
};

PreparedRun prepare_run(const RunConfig& cfg, const Dataset& raw) {
    if (raw.empty()) throw ConfigError("dataset is empty");
    PreparedRun run;
    run.classes = dataset_classes(raw);
    run.graph = toy_skeleton(raw[0].joints);
    const Dataset derived = derive_modality(raw, run.graph, cfg.train.modality);
    auto [train, test] = split_dataset(derived, cfg.train.train_fraction, cfg.train.seed);
    run.train = std::move(train);
    run.test = std::move(test);
    return run;
}

WdceModel build_model(const RunConfig& cfg, const PreparedRun& run) {
    const auto& sample = run.train.front();
    return WdceModel(cfg.backbone, cfg.train, run.graph, sample.channels, sample.frames,
                     run.classes);
}

// trains one model from scratch and returns its test accuracy
double train_once(const RunConfig& cfg, const Dataset& raw) {
    PreparedRun run = prepare_run(cfg, raw);
    WdceModel model = build_model(cfg, run);
    SgdOptimizer opt(model.parameters(), cfg.train.learning_rate, cfg.train.momentum,
                     cfg.train.weight_decay);
    run_training(model, opt, run.train);
    return evaluate(model, run.test, cfg.train.batch_size).accuracy;
}

}  // namespace

int cmd_gen(const SynthSpec& spec, const std::string& out_path, std::ostream& log) {
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const Dataset data = generate(spec);
    if (!out_path.empty()) {
        if (fs::path(out_path).has_parent_path()) {
            ensure_dir(fs::path(out_path).parent_path().string());
        }
        save_dataset(out_path, data);
    }

    const auto counts = class_counts(data);
    log << "generated " << data.size() << " samples, " << counts.size() << " classes\n";
    for (std::size_t k = 0; k < counts.size(); ++k) {
        log << "  class " << k << ": " << counts[k] << " samples\n";
    }
    const Discriminability disc = band_discriminability(data, spec.class_pairs);
    log << "high/low band discriminability ratio: mean " << fmt_double(disc.mean_ratio)
        << ", min " << fmt_double(disc.min_ratio) << "\n";
    for (std::size_t p = 0; p < disc.per_pair.size(); ++p) {
        log << "  pair " << p << " (classes " << 2 * p << "/" << 2 * p + 1
            << "): " << fmt_double(disc.per_pair[p]) << "\n";
    }
    if (!out_path.empty()) log << "wrote " << out_path << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& data_path, const std::string& out_dir,
              std::ostream& log) {
    cfg.validate();
    const Dataset raw = load_dataset_checked(data_path);
    ensure_dir(out_dir);

    const std::string metrics_path = (fs::path(out_dir) / "metrics.csv").string();
    std::ofstream metrics(metrics_path, std::ios::binary);
    if (!metrics) throw std::runtime_error("cannot open " + metrics_path);

    PreparedRun run = prepare_run(cfg, raw);
    WdceModel model = build_model(cfg, run);
    SgdOptimizer opt(model.parameters(), cfg.train.learning_rate, cfg.train.momentum,
                     cfg.train.weight_decay);

    metrics << "epoch,step,loss_total,loss_fuse,loss_salient,loss_proto,acc_fuse\n";
    StepMetrics last{};
    run_training(model, opt, run.train,
                 [&](std::size_t epoch, std::size_t step, const StepMetrics& m) {
                     metrics << epoch << ',' << step << ',' << fmt_double(m.loss_total) << ','
                             << fmt_double(m.loss_fuse) << ',' << fmt_double(m.loss_salient) << ','
                             << fmt_double(m.loss_proto) << ',' << fmt_double(m.acc_fuse) << '\n';
                     last = m;
                 });
    metrics.close();

    const std::string ckpt_path = (fs::path(out_dir) / "model.ckpt").string();
    save_checkpoint(ckpt_path, model, &opt, run_config_to_json(cfg));

    const EvalResult train_eval = evaluate(model, run.train, cfg.train.batch_size);
    const EvalResult test_eval = evaluate(model, run.test, cfg.train.batch_size);
    log << "final step loss " << fmt_double(last.loss_total) << ", batch accuracy "
        << fmt_double(last.acc_fuse) << "\n";
    log << "train accuracy " << fmt_double(train_eval.accuracy) << "\n";
    log << "test accuracy " << fmt_double(test_eval.accuracy) << ", within-pair confusion "
        << fmt_double(test_eval.within_pair_confusion) << "\n";
    log << "wrote " << metrics_path << " and " << ckpt_path << "\n";
    return 0;
}

namespace {

struct LoadedModel {
    RunConfig cfg;
    std::unique_ptr<WdceModel> model;
};

LoadedModel load_model_from_checkpoint(const std::string& ckpt_path, const Dataset& data) {
    CheckpointData ckpt;
    try {
        ckpt = read_checkpoint(ckpt_path);
    } catch (const FormatError& e) {
        throw ConfigError("checkpoint " + ckpt_path + ": " + e.what());
    }
    LoadedModel out;
    out.cfg = parse_run_config(ckpt.config_json);
    if (data.empty()) throw ConfigError("dataset is empty");
    if (data[0].joints != ckpt.joints || data[0].frames != ckpt.frames ||
        data[0].channels != ckpt.in_channels) {
        throw ConfigError("checkpoint/config mismatch: checkpoint was trained on V=" +
                          std::to_string(ckpt.joints) + ", T=" + std::to_string(ckpt.frames) +
                          ", C=" + std::to_string(ckpt.in_channels) + " but dataset has V=" +
                          std::to_string(data[0].joints) + ", T=" + std::to_string(data[0].frames) +
                          ", C=" + std::to_string(data[0].channels));
    }
    const std::size_t classes = dataset_classes(data);
    if (classes != ckpt.classes) {
        throw ConfigError("checkpoint/config mismatch: checkpoint has " +
                          std::to_string(ckpt.classes) + " classes, dataset " +
                          std::to_string(classes));
    }
    out.model = std::make_unique<WdceModel>(out.cfg.backbone, out.cfg.train,
                                            toy_skeleton(ckpt.joints), ckpt.in_channels,
                                            ckpt.frames, ckpt.classes);
    try {
        restore_model(*out.model, ckpt);
    } catch (const std::runtime_error& e) {
        throw ConfigError(e.what());
    }
    return out;
}

}  // namespace

int cmd_eval(const std::vector<std::string>& ckpt_paths, const std::string& data_path,
             const std::string& split, std::ostream& log) {
    if (ckpt_paths.empty()) throw ConfigError("eval needs at least one checkpoint");
    if (split != "train" && split != "test" && split != "all") {
        throw ConfigError("unknown split \"" + split + "\" (train, test, all)");
    }
    const Dataset raw = load_dataset_checked(data_path);

    std::vector<LoadedModel> loaded;
    for (const auto& path : ckpt_paths) loaded.push_back(load_model_from_checkpoint(path, raw));

    // the split must be reconstructed identically for every model
    const double fraction = loaded[0].cfg.train.train_fraction;
    const std::uint64_t split_seed = loaded[0].cfg.train.seed;
    for (const auto& lm : loaded) {
        if (lm.cfg.train.train_fraction != fraction || lm.cfg.train.seed != split_seed) {
            throw ConfigError("ensemble checkpoints disagree on the train/test split "
                              "(fraction or seed)");
        }
    }

    Dataset subset;
    if (split == "all") {
        subset = raw;
    } else {
        auto [train, test] = split_dataset(raw, fraction, split_seed);
        subset = (split == "train") ? std::move(train) : std::move(test);
    }

    std::vector<WdceModel*> models;
    for (auto& lm : loaded) models.push_back(lm.model.get());
    const std::size_t batch = loaded[0].cfg.train.batch_size;
    const EvalResult r = evaluate_ensemble(models, subset, batch);

    log << "samples " << subset.size() << " (" << split << " split)\n";
    log << "accuracy " << fmt_double(r.accuracy) << "\n";
    log << "within-pair confusion " << fmt_double(r.within_pair_confusion) << "\n";
    for (std::size_t k = 0; k < r.per_class.size(); ++k) {
        log << "  class " << k << " accuracy " << fmt_double(r.per_class[k]) << "\n";
    }
    return 0;
}

const std::vector<AblationVariant>& ablation_variants() {
    static const std::vector<AblationVariant> variants{
        {"baseline", false, false, false, false, false},
        {"dwt", true, false, false, false, false},
        {"dwt_da", true, true, false, false, false},
        {"channel_split_da", false, true, false, false, true},
        {"dwt_da_pcl", true, true, false, true, false},
        {"dwt_da_ta", true, true, true, false, false},
        {"full", true, true, true, true, false},
    };
    return variants;
}

RunConfig apply_variant(RunConfig cfg, const AblationVariant& v) {
    cfg.train.use_dwt = v.use_dwt;
    cfg.train.use_da = v.use_da;
    cfg.train.use_ta = v.use_ta;
    cfg.train.use_pcl = v.use_pcl;
    cfg.train.use_channel_split = v.use_channel_split;
    return cfg;
}

RunConfig ablation_default_config() {
    RunConfig cfg;
    cfg.backbone.n_stgc = 2;
    cfg.backbone.channels = {8, 16};
    cfg.backbone.n_ssa = 1;
    cfg.backbone.tcn_kernel = 3;
    cfg.train.learning_rate = 0.03;
    cfg.train.batch_size = 32;
    cfg.train.epochs = 30;
    return cfg;
}

RunConfig sanity_default_config() {
    RunConfig cfg;
    cfg.backbone.n_stgc = 2;
    cfg.backbone.channels = {16, 32};
    cfg.backbone.n_ssa = 1;
    cfg.backbone.tcn_kernel = 3;
    cfg.train.learning_rate = 0.04;
    cfg.train.batch_size = 48;   // 480 train samples: 10 steps per epoch
    cfg.train.epochs = 20;       // exactly 200 steps
    cfg.train.milestones = {17, 19};
    cfg.synth.rho = 0.5;
    cfg.synth.noise_sigma = 0.01;
    return cfg;
}

int cmd_ablate(const RunConfig& base, const std::string& data_path, const std::string& out_dir,
               const std::vector<std::uint64_t>& seeds, std::ostream& log) {
    base.validate();
    if (seeds.empty()) throw ConfigError("ablate needs at least one seed");
    const Dataset raw = load_dataset_checked(data_path);
    ensure_dir(out_dir);

    const std::string results_path = (fs::path(out_dir) / "results.csv").string();
    std::ofstream results(results_path, std::ios::binary);
    if (!results) throw std::runtime_error("cannot open " + results_path);
    results << "variant,seed,test_accuracy\n";

    std::map<std::string, std::vector<double>> by_variant;
    std::vector<std::string> order;
    for (const auto& variant : ablation_variants()) {
        order.push_back(variant.name);
        for (std::uint64_t seed : seeds) {
            RunConfig cfg = apply_variant(base, variant);
            cfg.train.seed = seed;
            log << "[ablate] " << variant.name << " seed " << seed << " ... " << std::flush;
            const double acc = train_once(cfg, raw);
            log << "test acc " << fmt_double(acc) << "\n";
            results << variant.name << ',' << seed << ',' << fmt_double(acc) << '\n';
            by_variant[variant.name].push_back(acc);
        }
    }
    results.close();

    // ranking table, best mean first
    std::vector<std::pair<std::string, double>> ranking;
    for (const auto& name : order) {
        const auto& accs = by_variant[name];
        double mean = 0.0;
        for (double a : accs) mean += a;
        mean /= double(accs.size());
        ranking.emplace_back(name, mean);
    }
    std::stable_sort(ranking.begin(), ranking.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    const std::string ranking_path = (fs::path(out_dir) / "ranking.csv").string();
    std::ofstream ranking_csv(ranking_path, std::ios::binary);
    ranking_csv << "rank,variant,mean_test_accuracy\n";
    log << "\nranking (mean test accuracy over " << seeds.size() << " seeds):\n";
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        log << "  " << (i + 1) << ". " << ranking[i].first << "  "
            << fmt_double(ranking[i].second) << "\n";
        ranking_csv << (i + 1) << ',' << ranking[i].first << ',' << fmt_double(ranking[i].second)
                    << '\n';
    }
    log << "wrote " << results_path << " and " << ranking_path << "\n";
    return 0;
}

int cmd_verify(const std::string& suite, std::ostream& log) {
    std::vector<PropertyCheck> checks;
    try {
        checks = verify_suite(suite);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    bool ok = true;
    for (const auto& c : checks) {
        log << (c.passed ? "[PASS] " : "[FAIL] ") << c.name << ": max error "
            << fmt_double(c.max_error) << " (tolerance " << fmt_double(c.tolerance) << ")";
        if (!c.detail.empty()) log << " — " << c.detail;
        log << "\n";
        ok = ok && c.passed;
    }
    log << (ok ? "all properties passed\n" : "PROPERTY FAILURES PRESENT\n");
    return ok ? 0 : 1;
}

namespace {

struct TrajectoryRows {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> values;
    std::size_t width = 0;
};

TrajectoryRows read_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    TrajectoryRows rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (fields.size() < 2) {
            throw ConfigError("trajectory csv line " + std::to_string(line_no) +
                              ": need an id plus at least one value");
        }
        std::vector<double> vals(fields.size() - 1);
        for (std::size_t i = 1; i < fields.size(); ++i) {
            try {
                vals[i - 1] = std::stod(fields[i]);
            } catch (const std::exception&) {
                throw ConfigError("trajectory csv line " + std::to_string(line_no) +
                                  ": non-numeric value \"" + fields[i] + "\"");
            }
        }
        if (rows.width == 0) {
            rows.width = vals.size();
        } else if (vals.size() != rows.width) {
            throw ConfigError("trajectory csv line " + std::to_string(line_no) + ": row has " +
                              std::to_string(vals.size()) + " values, expected " +
                              std::to_string(rows.width));
        }
        rows.ids.push_back(fields[0]);
        rows.values.push_back(std::move(vals));
    }
    if (rows.ids.empty()) throw ConfigError("trajectory csv " + path + " has no rows");
    return rows;
}

void write_trajectory_csv(const std::string& path, const TrajectoryRows& rows,
                          const std::vector<std::vector<double>>& values) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    for (std::size_t i = 0; i < rows.ids.size(); ++i) {
        out << rows.ids[i];
        for (double v : values[i]) out << ',' << fmt_double(v);
        out << '\n';
    }
}

}  // namespace

int cmd_dwt(const std::string& in_path, const std::string& out_dir, bool inverse,
            std::ostream& log) {
    ensure_dir(out_dir);
    if (!inverse) {
        const TrajectoryRows rows = read_trajectory_csv(in_path);
        if (rows.width % 2 != 0) {
            throw ConfigError("trajectory length " + std::to_string(rows.width) +
                              " is odd; the Haar split needs an even frame count");
        }
        const auto filters = build_haar(rows.width);
        std::vector<std::vector<double>> low(rows.ids.size()), high(rows.ids.size());
        for (std::size_t i = 0; i < rows.ids.size(); ++i) {
            auto bands = dwt(Tensor::from_data({1, rows.width}, rows.values[i]), filters);
            low[i] = bands.low->data;
            high[i] = bands.high->data;
        }
        const std::string low_path = (fs::path(out_dir) / "low.csv").string();
        const std::string high_path = (fs::path(out_dir) / "high.csv").string();
        write_trajectory_csv(low_path, rows, low);
        write_trajectory_csv(high_path, rows, high);
        log << "wrote " << low_path << " and " << high_path << " (" << rows.ids.size()
            << " trajectories, " << rows.width << " -> " << rows.width / 2 << " frames)\n";
        return 0;
    }

    const TrajectoryRows low = read_trajectory_csv((fs::path(in_path) / "low.csv").string());
    const TrajectoryRows high = read_trajectory_csv((fs::path(in_path) / "high.csv").string());
    if (low.ids != high.ids || low.width != high.width) {
        throw ConfigError("low.csv and high.csv disagree on ids or width");
    }
    const auto filters = build_haar(2 * low.width);
    std::vector<std::vector<double>> recon(low.ids.size());
    for (std::size_t i = 0; i < low.ids.size(); ++i) {
        auto x = idwt(Tensor::from_data({1, low.width}, low.values[i]),
                      Tensor::from_data({1, high.width}, high.values[i]), filters);
        recon[i] = x->data;
    }
    const std::string out_path = (fs::path(out_dir) / "reconstructed.csv").string();
    write_trajectory_csv(out_path, low, recon);
    log << "wrote " << out_path << " (" << low.ids.size() << " trajectories, " << low.width
        << " -> " << 2 * low.width << " frames)\n";
    return 0;
}

int cmd_dump(const std::string& ckpt_path, const std::string& data_path,
             const std::string& out_dir, std::ostream& log) {
    const Dataset raw = load_dataset_checked(data_path);
    LoadedModel lm = load_model_from_checkpoint(ckpt_path, raw);
    if (!lm.cfg.train.has_decoupling()) {
        throw ConfigError("dump needs a decoupled model (the baseline has no salient/subtle paths)");
    }
    ensure_dir(out_dir);

    const SkeletonGraph graph = toy_skeleton(raw[0].joints);
    const Dataset data = derive_modality(raw, graph, lm.cfg.train.modality);
    const std::size_t n = data.size();
    const std::size_t d = lm.model->feature_dim();
    const std::size_t v = raw[0].joints;
    const std::size_t batch_size = lm.cfg.train.batch_size;

    auto salient = Tensor::zeros({n, d});
    auto subtle = Tensor::zeros({n, d});
    auto fused = Tensor::zeros({n, d});
    const bool with_att = lm.cfg.train.use_ta;
    TensorPtr att = with_att ? Tensor::zeros({n, d, v}) : nullptr;

    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t stop = std::min(n, start + batch_size);
        std::vector<std::size_t> idx(stop - start);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
        auto [batch, labels] = make_batch(data, idx);
        auto out = lm.model->forward(batch);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                salient->data[(start + i) * d + j] = out.salient_pooled->data[i * d + j];
                subtle->data[(start + i) * d + j] = out.subtle_pooled->data[i * d + j];
                fused->data[(start + i) * d + j] = out.fused_pooled->data[i * d + j];
            }
            if (with_att) {
                for (std::size_t j = 0; j < d * v; ++j) {
                    att->data[(start + i) * d * v + j] = out.att.values->data[i * d * v + j];
                }
            }
        }
    }

    save_tensor((fs::path(out_dir) / "salient.wdct").string(), *salient);
    save_tensor((fs::path(out_dir) / "subtle.wdct").string(), *subtle);
    save_tensor((fs::path(out_dir) / "fused.wdct").string(), *fused);
    if (with_att) save_tensor((fs::path(out_dir) / "att.wdct").string(), *att);

    const std::string labels_path = (fs::path(out_dir) / "labels.csv").string();
    std::ofstream labels_csv(labels_path, std::ios::binary);
    labels_csv << "sample_id,label\n";
    for (const auto& s : data) labels_csv << s.sample_id << ',' << s.label << '\n';

    log << "dumped " << n << " samples (feature dim " << d << ") to " << out_dir << "\n";
    return 0;
}

}  // namespace wdce::cli

// wdce — synthetic confusable-action experiments on a wavelet-decoupling
// network: data generation, training, evaluation, ablation sweeps and
// property verification.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wdce/commands.hpp"
#include "wdce/config.hpp"

namespace {

using wdce::RunConfig;

// Exit codes: 0 success, 1 verification failure, 2 usage/config error.
constexpr int kExitVerifyFailure = 1;
constexpr int kExitUsage = 2;

// Every config field gets a flag. Precedence: flag > config file >
// WDCE_SEED (seed only) > built-in default.
struct Overrides {
    std::optional<std::string> config_path;

    // train
    std::optional<double> lambda_fuse, lambda_salient, lambda_proto;
    std::optional<double> alpha, beta, tau, proto_momentum;
    std::optional<double> learning_rate, momentum, weight_decay, lr_decay, train_fraction;
    std::optional<std::vector<std::size_t>> milestones;
    std::optional<std::size_t> epochs, batch_size, att_dim, da_kernel;
    std::optional<std::uint64_t> seed;
    std::optional<bool> use_dwt, use_da, use_ta, use_pcl, use_channel_split;
    std::optional<std::string> modality;

    // synth
    std::optional<std::size_t> class_pairs, joints, frames, samples_per_class;
    std::optional<std::size_t> salient_components, subtle_components;
    std::optional<double> f_split, rho, noise_sigma;
    std::optional<std::uint64_t> synth_seed;

    // backbone
    std::optional<std::size_t> n_stgc, n_ssa, heads, tcn_kernel;
    std::optional<std::vector<std::size_t>> channels;
};

void add_config_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_path, "JSON config file (see `wdce config`)");

    cmd->add_option("--lambda-fuse", o.lambda_fuse, "weight of the fused-head loss");
    cmd->add_option("--lambda-salient", o.lambda_salient, "weight of the salient-head loss");
    cmd->add_option("--lambda-proto", o.lambda_proto, "weight of the prototype loss");
    cmd->add_option("--alpha", o.alpha, "prototype loss: feature term weight");
    cmd->add_option("--beta", o.beta, "prototype loss: attention term weight");
    cmd->add_option("--tau", o.tau, "prototype loss temperature");
    cmd->add_option("--proto-momentum", o.proto_momentum, "prototype EMA momentum");
    cmd->add_option("--lr", o.learning_rate, "base learning rate");
    cmd->add_option("--momentum", o.momentum, "SGD momentum");
    cmd->add_option("--weight-decay", o.weight_decay, "L2 weight decay");
    cmd->add_option("--milestones", o.milestones, "epochs at which the learning rate decays");
    cmd->add_option("--lr-decay", o.lr_decay, "learning rate decay factor");
    cmd->add_option("--epochs", o.epochs, "training epochs");
    cmd->add_option("--batch-size", o.batch_size, "batch size");
    cmd->add_option("--train-fraction", o.train_fraction, "train split fraction");
    cmd->add_option("--seed", o.seed, "training seed (init, shuffle, split)");
    cmd->add_option("--att-dim", o.att_dim, "trajectory attention width");
    cmd->add_option("--da-kernel", o.da_kernel, "decoupling attention conv kernel (odd)");
    cmd->add_option("--use-dwt", o.use_dwt, "enable the wavelet split");
    cmd->add_option("--use-da", o.use_da, "enable decoupling attention");
    cmd->add_option("--use-ta", o.use_ta, "enable trajectory attention");
    cmd->add_option("--use-pcl", o.use_pcl, "enable the prototype contrastive loss");
    cmd->add_option("--use-channel-split", o.use_channel_split,
                    "replace the wavelet split with the channel-split control");
    cmd->add_option("--modality", o.modality, "joint, bone, joint_motion or bone_motion");

    cmd->add_option("--pairs", o.class_pairs, "confusable class pairs");
    cmd->add_option("--joints", o.joints, "skeleton joints");
    cmd->add_option("--frames", o.frames, "frames per sequence (even)");
    cmd->add_option("--samples-per-class", o.samples_per_class, "samples per class");
    cmd->add_option("--salient-components", o.salient_components, "salient sinusoids per pair");
    cmd->add_option("--subtle-components", o.subtle_components, "subtle sinusoids per class");
    cmd->add_option("--f-split", o.f_split, "frequency split (cycles/frame)");
    cmd->add_option("--rho", o.rho, "subtle amplitude relative to salient");
    cmd->add_option("--noise-sigma", o.noise_sigma, "additive Gaussian noise sigma");
    cmd->add_option("--synth-seed", o.synth_seed, "generator seed");

    cmd->add_option("--n-stgc", o.n_stgc, "ST-GC layer count");
    cmd->add_option("--n-ssa", o.n_ssa, "SSA-Tformer layer count");
    cmd->add_option("--channels", o.channels, "channels per ST-GC layer");
    cmd->add_option("--heads", o.heads, "attention heads");
    cmd->add_option("--tcn-kernel", o.tcn_kernel, "temporal conv kernel (odd)");
}

RunConfig resolve_config(const Overrides& o, RunConfig cfg = wdce::default_run_config()) {

    // weakest override: the environment seed, kept only where the config
    // file stays silent
    if (const char* env_seed = std::getenv("WDCE_SEED")) {
        try {
            cfg.train.seed = std::stoull(env_seed);
            cfg.synth.seed = cfg.train.seed;
        } catch (const std::exception&) {
            throw wdce::ConfigError("WDCE_SEED is not an integer: " + std::string(env_seed));
        }
    }

    if (o.config_path) cfg = wdce::load_run_config(*o.config_path, cfg);

    auto set = [](auto& target, const auto& opt) {
        if (opt) target = *opt;
    };
    set(cfg.train.lambda_fuse, o.lambda_fuse);
    set(cfg.train.lambda_salient, o.lambda_salient);
    set(cfg.train.lambda_proto, o.lambda_proto);
    set(cfg.train.contrastive.alpha, o.alpha);
    set(cfg.train.contrastive.beta, o.beta);
    set(cfg.train.contrastive.tau, o.tau);
    set(cfg.train.proto_momentum, o.proto_momentum);
    set(cfg.train.learning_rate, o.learning_rate);
    set(cfg.train.momentum, o.momentum);
    set(cfg.train.weight_decay, o.weight_decay);
    set(cfg.train.milestones, o.milestones);
    set(cfg.train.lr_decay, o.lr_decay);
    set(cfg.train.epochs, o.epochs);
    set(cfg.train.batch_size, o.batch_size);
    set(cfg.train.train_fraction, o.train_fraction);
    set(cfg.train.seed, o.seed);
    set(cfg.train.att_dim, o.att_dim);
    set(cfg.train.da_kernel, o.da_kernel);
    set(cfg.train.use_dwt, o.use_dwt);
    set(cfg.train.use_da, o.use_da);
    set(cfg.train.use_ta, o.use_ta);
    set(cfg.train.use_pcl, o.use_pcl);
    set(cfg.train.use_channel_split, o.use_channel_split);
    if (o.modality) cfg.train.modality = wdce::modality_from_name(*o.modality);

    set(cfg.synth.class_pairs, o.class_pairs);
    set(cfg.synth.joints, o.joints);
    set(cfg.synth.frames, o.frames);
    set(cfg.synth.samples_per_class, o.samples_per_class);
    set(cfg.synth.salient_components, o.salient_components);
    set(cfg.synth.subtle_components, o.subtle_components);
    set(cfg.synth.f_split, o.f_split);
    set(cfg.synth.rho, o.rho);
    set(cfg.synth.noise_sigma, o.noise_sigma);
    set(cfg.synth.seed, o.synth_seed);

    set(cfg.backbone.n_stgc, o.n_stgc);
    set(cfg.backbone.n_ssa, o.n_ssa);
    set(cfg.backbone.channels, o.channels);
    set(cfg.backbone.heads, o.heads);
    set(cfg.backbone.tcn_kernel, o.tcn_kernel);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"WDCE-Net: wavelet-decoupled skeleton action recognition, desk scale"};
    app.require_subcommand(1);

    Overrides o;

    // config
    auto* config_cmd = app.add_subcommand("config", "print configuration");
    bool print_defaults = false;
    config_cmd->add_flag("--print-defaults", print_defaults, "print the built-in defaults");
    add_config_flags(config_cmd, o);

    // gen
    auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic confusable-action dataset");
    std::string gen_spec_path, gen_out = "dataset.wdcd";
    gen_cmd->add_option("--spec", gen_spec_path, "synth spec JSON file");
    gen_cmd->add_option("--out", gen_out, "output dataset path");
    add_config_flags(gen_cmd, o);

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model");
    std::string train_data, train_out = "run";
    train_cmd->add_option("--data", train_data, "dataset file")->required();
    train_cmd->add_option("--out", train_out, "output directory");
    add_config_flags(train_cmd, o);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate checkpoints (ensemble if several)");
    std::vector<std::string> eval_ckpts;
    std::string eval_data, eval_split = "test";
    eval_cmd->add_option("--ckpt", eval_ckpts, "checkpoint file(s)")->required();
    eval_cmd->add_option("--data", eval_data, "dataset file")->required();
    eval_cmd->add_option("--split", eval_split, "train, test or all");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "run the seven-variant ablation sweep");
    std::string ablate_data, ablate_out = "ablation";
    std::vector<std::uint64_t> ablate_seeds{1, 2, 3};
    ablate_cmd->add_option("--data", ablate_data, "dataset file")->required();
    ablate_cmd->add_option("--out", ablate_out, "output directory");
    ablate_cmd->add_option("--seeds", ablate_seeds, "training seeds");
    add_config_flags(ablate_cmd, o);

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "run property suites");
    std::string verify_suite = "all";
    verify_cmd->add_option("--suite", verify_suite, "wavelet, grad, attention, contrastive, all");

    // dwt
    auto* dwt_cmd = app.add_subcommand("dwt", "apply the Haar split to trajectory CSV rows");
    std::string dwt_in, dwt_out = "dwt_out";
    bool dwt_inverse = false;
    dwt_cmd->add_option("--in", dwt_in,
                        "trajectory CSV (id,v0,v1,...); with --inverse, the directory "
                        "holding low.csv/high.csv")
        ->required();
    dwt_cmd->add_option("--out", dwt_out, "output directory");
    dwt_cmd->add_flag("--inverse", dwt_inverse, "reconstruct from low/high bands");

    // dump
    auto* dump_cmd = app.add_subcommand("dump", "dump pooled features and attention maps");
    std::string dump_ckpt, dump_data, dump_out = "dump_out";
    dump_cmd->add_option("--ckpt", dump_ckpt, "checkpoint file")->required();
    dump_cmd->add_option("--data", dump_data, "dataset file")->required();
    dump_cmd->add_option("--out", dump_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (config_cmd->parsed()) {
            if (print_defaults) {
                std::cout << wdce::run_config_to_json(wdce::default_run_config()) << "\n";
            } else {
                std::cout << wdce::run_config_to_json(resolve_config(o)) << "\n";
            }
            return 0;
        }
        if (gen_cmd->parsed()) {
            wdce::SynthSpec spec;
            if (!gen_spec_path.empty()) {
                spec = wdce::load_synth_spec(gen_spec_path);
                // synth flags still win over the spec file
                auto set = [](auto& target, const auto& opt) {
                    if (opt) target = *opt;
                };
                set(spec.class_pairs, o.class_pairs);
                set(spec.joints, o.joints);
                set(spec.frames, o.frames);
                set(spec.samples_per_class, o.samples_per_class);
                set(spec.salient_components, o.salient_components);
                set(spec.subtle_components, o.subtle_components);
                set(spec.f_split, o.f_split);
                set(spec.rho, o.rho);
                set(spec.noise_sigma, o.noise_sigma);
                set(spec.seed, o.synth_seed);
            } else {
                spec = resolve_config(o).synth;
            }
            if (o.seed) spec.seed = *o.seed;  // gen --seed names the generator seed
            return wdce::cli::cmd_gen(spec, gen_out, std::cout);
        }
        if (train_cmd->parsed()) {
            RunConfig cfg = resolve_config(o);
            cfg.validate();
            std::cout << "effective config:\n" << wdce::run_config_to_json(cfg) << "\n";
            return wdce::cli::cmd_train(cfg, train_data, train_out, std::cout);
        }
        if (eval_cmd->parsed()) {
            return wdce::cli::cmd_eval(eval_ckpts, eval_data, eval_split, std::cout);
        }
        if (ablate_cmd->parsed()) {
            RunConfig cfg = resolve_config(o, wdce::cli::ablation_default_config());
            cfg.validate();
            std::cout << "effective config:\n" << wdce::run_config_to_json(cfg) << "\n";
            return wdce::cli::cmd_ablate(cfg, ablate_data, ablate_out, ablate_seeds, std::cout);
        }
        if (verify_cmd->parsed()) {
            return wdce::cli::cmd_verify(verify_suite, std::cout) == 0 ? 0 : kExitVerifyFailure;
        }
        if (dwt_cmd->parsed()) {
            return wdce::cli::cmd_dwt(dwt_in, dwt_out, dwt_inverse, std::cout);
        }
        if (dump_cmd->parsed()) {
            return wdce::cli::cmd_dump(dump_ckpt, dump_data, dump_out, std::cout);
        }
    } catch (const wdce::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitVerifyFailure;
    }
    return 0;
}

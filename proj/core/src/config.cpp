#include "wdce/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace wdce {

using json = nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& section) {
    for (const auto& [key, value] : obj.items()) {
        if (known.count(key) == 0) {
            throw ConfigError("unknown key \"" + key + "\" in " + section);
        }
    }
}

template <typename T>
void fetch(const json& obj, const char* key, T& into, const std::string& section) {
    if (!obj.contains(key)) return;
    try {
        into = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for \"" + std::string(key) + "\" in " + section + ": " +
                          e.what());
    }
}

void parse_train(const json& obj, TrainConfig& cfg) {
    static const std::set<std::string> known{
        "lambda_fuse", "lambda_salient", "lambda_proto", "alpha", "beta", "tau",
        "proto_momentum", "learning_rate", "momentum", "weight_decay", "milestones",
        "lr_decay", "epochs", "batch_size", "train_fraction", "seed", "att_dim",
        "da_kernel", "use_dwt", "use_da", "use_ta", "use_pcl", "use_channel_split",
        "modality"};
    reject_unknown_keys(obj, known, "\"train\"");
    fetch(obj, "lambda_fuse", cfg.lambda_fuse, "train");
    fetch(obj, "lambda_salient", cfg.lambda_salient, "train");
    fetch(obj, "lambda_proto", cfg.lambda_proto, "train");
    fetch(obj, "alpha", cfg.contrastive.alpha, "train");
    fetch(obj, "beta", cfg.contrastive.beta, "train");
    fetch(obj, "tau", cfg.contrastive.tau, "train");
    fetch(obj, "proto_momentum", cfg.proto_momentum, "train");
    fetch(obj, "learning_rate", cfg.learning_rate, "train");
    fetch(obj, "momentum", cfg.momentum, "train");
    fetch(obj, "weight_decay", cfg.weight_decay, "train");
    fetch(obj, "milestones", cfg.milestones, "train");
    fetch(obj, "lr_decay", cfg.lr_decay, "train");
    fetch(obj, "epochs", cfg.epochs, "train");
    fetch(obj, "batch_size", cfg.batch_size, "train");
    fetch(obj, "train_fraction", cfg.train_fraction, "train");
    fetch(obj, "seed", cfg.seed, "train");
    fetch(obj, "att_dim", cfg.att_dim, "train");
    fetch(obj, "da_kernel", cfg.da_kernel, "train");
    fetch(obj, "use_dwt", cfg.use_dwt, "train");
    fetch(obj, "use_da", cfg.use_da, "train");
    fetch(obj, "use_ta", cfg.use_ta, "train");
    fetch(obj, "use_pcl", cfg.use_pcl, "train");
    fetch(obj, "use_channel_split", cfg.use_channel_split, "train");
    if (obj.contains("modality")) {
        std::string name;
        fetch(obj, "modality", name, "train");
        try {
            cfg.modality = modality_from_name(name);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
}

void parse_synth(const json& obj, SynthSpec& spec) {
    static const std::set<std::string> known{
        "class_pairs", "joints", "frames", "samples_per_class", "salient_components",
        "subtle_components", "f_split", "rho", "noise_sigma", "seed"};
    reject_unknown_keys(obj, known, "\"synth\"");
    fetch(obj, "class_pairs", spec.class_pairs, "synth");
    fetch(obj, "joints", spec.joints, "synth");
    fetch(obj, "frames", spec.frames, "synth");
    fetch(obj, "samples_per_class", spec.samples_per_class, "synth");
    fetch(obj, "salient_components", spec.salient_components, "synth");
    fetch(obj, "subtle_components", spec.subtle_components, "synth");
    fetch(obj, "f_split", spec.f_split, "synth");
    fetch(obj, "rho", spec.rho, "synth");
    fetch(obj, "noise_sigma", spec.noise_sigma, "synth");
    fetch(obj, "seed", spec.seed, "synth");
}

void parse_backbone(const json& obj, BackboneConfig& cfg) {
    static const std::set<std::string> known{"n_stgc", "n_ssa", "channels", "heads", "tcn_kernel"};
    reject_unknown_keys(obj, known, "\"backbone\"");
    fetch(obj, "n_stgc", cfg.n_stgc, "backbone");
    fetch(obj, "n_ssa", cfg.n_ssa, "backbone");
    fetch(obj, "channels", cfg.channels, "backbone");
    fetch(obj, "heads", cfg.heads, "backbone");
    fetch(obj, "tcn_kernel", cfg.tcn_kernel, "backbone");
}

json train_to_json(const TrainConfig& cfg) {
    json obj;
    obj["lambda_fuse"] = cfg.lambda_fuse;
    obj["lambda_salient"] = cfg.lambda_salient;
    obj["lambda_proto"] = cfg.lambda_proto;
    obj["alpha"] = cfg.contrastive.alpha;
    obj["beta"] = cfg.contrastive.beta;
    obj["tau"] = cfg.contrastive.tau;
    obj["proto_momentum"] = cfg.proto_momentum;
    obj["learning_rate"] = cfg.learning_rate;
    obj["momentum"] = cfg.momentum;
    obj["weight_decay"] = cfg.weight_decay;
    obj["milestones"] = cfg.milestones;
    obj["lr_decay"] = cfg.lr_decay;
    obj["epochs"] = cfg.epochs;
    obj["batch_size"] = cfg.batch_size;
    obj["train_fraction"] = cfg.train_fraction;
    obj["seed"] = cfg.seed;
    obj["att_dim"] = cfg.att_dim;
    obj["da_kernel"] = cfg.da_kernel;
    obj["use_dwt"] = cfg.use_dwt;
    obj["use_da"] = cfg.use_da;
    obj["use_ta"] = cfg.use_ta;
    obj["use_pcl"] = cfg.use_pcl;
    obj["use_channel_split"] = cfg.use_channel_split;
    obj["modality"] = modality_name(cfg.modality);
    return obj;
}

json synth_to_json(const SynthSpec& spec) {
    json obj;
    obj["class_pairs"] = spec.class_pairs;
    obj["joints"] = spec.joints;
    obj["frames"] = spec.frames;
    obj["samples_per_class"] = spec.samples_per_class;
    obj["salient_components"] = spec.salient_components;
    obj["subtle_components"] = spec.subtle_components;
    obj["f_split"] = spec.f_split;
    obj["rho"] = spec.rho;
    obj["noise_sigma"] = spec.noise_sigma;
    obj["seed"] = spec.seed;
    return obj;
}

json backbone_to_json(const BackboneConfig& cfg) {
    json obj;
    obj["n_stgc"] = cfg.n_stgc;
    obj["n_ssa"] = cfg.n_ssa;
    obj["channels"] = cfg.channels;
    obj["heads"] = cfg.heads;
    obj["tcn_kernel"] = cfg.tcn_kernel;
    return obj;
}

json parse_text(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("unparseable ") + what + ": " + e.what());
    }
}

}  // namespace

void RunConfig::validate() const {
    try {
        train.validate();
        synth.validate();
        backbone.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

RunConfig default_run_config() { return RunConfig{}; }

RunConfig parse_run_config(const std::string& json_text, RunConfig base) {
    const json doc = parse_text(json_text, "config");
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
    reject_unknown_keys(doc, {"train", "synth", "backbone"}, "config root");

    if (doc.contains("train")) parse_train(doc.at("train"), base.train);
    if (doc.contains("synth")) parse_synth(doc.at("synth"), base.synth);
    if (doc.contains("backbone")) parse_backbone(doc.at("backbone"), base.backbone);
    return base;
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), std::move(base));
}

SynthSpec parse_synth_spec(const std::string& json_text) {
    const json doc = parse_text(json_text, "synth spec");
    if (!doc.is_object()) throw ConfigError("synth spec root must be a JSON object");
    SynthSpec spec;
    if (doc.contains("synth")) {
        reject_unknown_keys(doc, {"synth"}, "synth spec root");
        parse_synth(doc.at("synth"), spec);
    } else {
        parse_synth(doc, spec);
    }
    return spec;
}

SynthSpec load_synth_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open spec file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_synth_spec(buf.str());
}

std::string run_config_to_json(const RunConfig& cfg) {
    json doc;
    doc["train"] = train_to_json(cfg.train);
    doc["synth"] = synth_to_json(cfg.synth);
    doc["backbone"] = backbone_to_json(cfg.backbone);
    return doc.dump(2);
}

}  // namespace wdce

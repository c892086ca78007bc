#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "wdce/commands.hpp"
#include "wdce/config.hpp"
#include "wdce/data.hpp"
#include "wdce/serialize.hpp"

using namespace wdce;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("cli");

namespace {

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path work_dir(const char* name) {
    const auto dir = fs::temp_directory_path() / "wdce_test_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunConfig micro_run_config() {
    RunConfig cfg;
    cfg.backbone.n_stgc = 1;
    cfg.backbone.n_ssa = 1;
    cfg.backbone.channels = {4};
    cfg.backbone.tcn_kernel = 3;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 16;
    cfg.train.att_dim = 4;
    cfg.synth.class_pairs = 2;
    cfg.synth.joints = 5;
    cfg.synth.frames = 16;
    cfg.synth.samples_per_class = 10;
    return cfg;
}

}  // namespace

TEST_CASE("defaults echo the stock hyperparameters") {
    RunConfig cfg = default_run_config();
    CHECK(cfg.train.contrastive.alpha == doctest::Approx(0.9));
    CHECK(cfg.train.contrastive.beta == doctest::Approx(0.1));
    CHECK(cfg.train.lambda_fuse == doctest::Approx(0.4));
    CHECK(cfg.train.lambda_salient == doctest::Approx(0.2));
    CHECK(cfg.train.lambda_proto == doctest::Approx(0.4));
    CHECK(cfg.train.momentum == doctest::Approx(0.9));
    CHECK(cfg.train.weight_decay == doctest::Approx(0.0004));
    CHECK(cfg.train.learning_rate == doctest::Approx(0.1));
    CHECK(cfg.train.batch_size == 64);
}

TEST_CASE("config json round trips and rejects unknown keys") {
    RunConfig cfg = default_run_config();
    cfg.train.epochs = 17;
    cfg.backbone.channels = {4, 8};
    cfg.backbone.n_stgc = 2;
    const std::string text = run_config_to_json(cfg);
    RunConfig back = parse_run_config(text);
    CHECK(run_config_to_json(back) == text);
    CHECK(back.train.epochs == 17);

    CHECK_THROWS_AS(parse_run_config("{\"trian\": {}}"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("{\"train\": {\"lerning_rate\": 0.1}}"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("{\"synth\": {\"sigma\": 0.1}}"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("not json"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("{\"train\": {\"modality\": \"hands\"}}"), ConfigError);
}

TEST_CASE("config files override only what they mention") {
    RunConfig base = default_run_config();
    base.train.seed = 1234;  // plays the role of an env-var seed
    RunConfig merged = parse_run_config("{\"train\": {\"epochs\": 3}}", base);
    CHECK(merged.train.seed == 1234);
    CHECK(merged.train.epochs == 3);
}

TEST_CASE("gen writes identical bytes for identical seeds") {
    const auto dir = work_dir("gen");
    SynthSpec spec = micro_run_config().synth;
    const auto a = dir / "a.wdcd";
    const auto b = dir / "b.wdcd";
    std::ostringstream log;
    CHECK(cli::cmd_gen(spec, a.string(), log) == 0);
    CHECK(cli::cmd_gen(spec, b.string(), log) == 0);
    CHECK(read_bytes(a) == read_bytes(b));

    SynthSpec reseeded = spec;
    reseeded.seed += 1;
    const auto c = dir / "c.wdcd";
    CHECK(cli::cmd_gen(reseeded, c.string(), log) == 0);
    CHECK(read_bytes(a) != read_bytes(c));

    CHECK(log.str().find("discriminability") != std::string::npos);
}

TEST_CASE("train writes byte-identical artifacts on reruns") {
    const auto dir = work_dir("train");
    const auto data_path = dir / "data.wdcd";
    RunConfig cfg = micro_run_config();
    std::ostringstream log;
    cli::cmd_gen(cfg.synth, data_path.string(), log);

    const auto out_a = dir / "run_a";
    const auto out_b = dir / "run_b";
    CHECK(cli::cmd_train(cfg, data_path.string(), out_a.string(), log) == 0);
    CHECK(cli::cmd_train(cfg, data_path.string(), out_b.string(), log) == 0);
    CHECK(read_bytes(out_a / "metrics.csv") == read_bytes(out_b / "metrics.csv"));
    CHECK(read_bytes(out_a / "model.ckpt") == read_bytes(out_b / "model.ckpt"));
    CHECK(read_bytes(out_a / "metrics.csv").rfind("epoch,step,", 0) == 0);
}

TEST_CASE("eval consumes checkpoints and enforces data compatibility") {
    const auto dir = work_dir("eval");
    const auto data_path = dir / "data.wdcd";
    RunConfig cfg = micro_run_config();
    std::ostringstream log;
    cli::cmd_gen(cfg.synth, data_path.string(), log);
    cli::cmd_train(cfg, data_path.string(), (dir / "run").string(), log);

    std::ostringstream eval_log;
    CHECK(cli::cmd_eval({(dir / "run" / "model.ckpt").string()}, data_path.string(), "test",
                        eval_log) == 0);
    CHECK(eval_log.str().find("accuracy") != std::string::npos);

    // a dataset with a different skeleton cannot be evaluated
    SynthSpec other = cfg.synth;
    other.joints = 6;
    const auto other_path = dir / "other.wdcd";
    cli::cmd_gen(other, other_path.string(), log);
    CHECK_THROWS_AS(cli::cmd_eval({(dir / "run" / "model.ckpt").string()}, other_path.string(),
                                  "test", eval_log),
                    ConfigError);
    CHECK_THROWS_AS(cli::cmd_eval({(dir / "run" / "model.ckpt").string()}, data_path.string(),
                                  "half", eval_log),
                    ConfigError);
}

TEST_CASE("dwt round trips through csv files") {
    const auto dir = work_dir("dwt");
    const auto input = dir / "traj.csv";
    {
        std::ofstream out(input);
        out << "a,1,3,2,4,0,1,-1,2\n";
        out << "b,0.5,0.5,0.5,0.5,0.25,0.75,0.25,0.75\n";
    }
    std::ostringstream log;
    CHECK(cli::cmd_dwt(input.string(), (dir / "bands").string(), false, log) == 0);
    CHECK(fs::exists(dir / "bands" / "low.csv"));
    CHECK(fs::exists(dir / "bands" / "high.csv"));
    CHECK(cli::cmd_dwt((dir / "bands").string(), (dir / "recon").string(), true, log) == 0);

    std::ifstream recon(dir / "recon" / "reconstructed.csv");
    std::string line;
    std::getline(recon, line);
    CHECK(line.rfind("a,", 0) == 0);
    std::stringstream ls(line.substr(2));
    std::vector<double> values;
    std::string field;
    while (std::getline(ls, field, ',')) values.push_back(std::stod(field));
    const std::vector<double> expected{1, 3, 2, 4, 0, 1, -1, 2};
    REQUIRE(values.size() == expected.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        CHECK(values[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    }
}

TEST_CASE("dwt rejects malformed rows with their line number") {
    const auto dir = work_dir("dwt_bad");
    const auto input = dir / "traj.csv";
    {
        std::ofstream out(input);
        out << "a,1,2,3,4\n";
        out << "b,1,oops,3,4\n";
    }
    std::ostringstream log;
    CHECK_THROWS_WITH_AS(cli::cmd_dwt(input.string(), (dir / "bands").string(), false, log),
                         doctest::Contains("line 2"), ConfigError);

    const auto odd = dir / "odd.csv";
    {
        std::ofstream out(odd);
        out << "a,1,2,3\n";
    }
    CHECK_THROWS_WITH_AS(cli::cmd_dwt(odd.string(), (dir / "bands").string(), false, log),
                         doctest::Contains("even"), ConfigError);
}

TEST_CASE("dump writes pooled features for every sample") {
    const auto dir = work_dir("dump");
    const auto data_path = dir / "data.wdcd";
    RunConfig cfg = micro_run_config();
    std::ostringstream log;
    cli::cmd_gen(cfg.synth, data_path.string(), log);
    cli::cmd_train(cfg, data_path.string(), (dir / "run").string(), log);

    CHECK(cli::cmd_dump((dir / "run" / "model.ckpt").string(), data_path.string(),
                        (dir / "features").string(), log) == 0);
    auto salient = load_tensor((dir / "features" / "salient.wdct").string());
    auto att = load_tensor((dir / "features" / "att.wdct").string());
    CHECK(salient->shape == Shape{40, 4});
    CHECK(att->shape == Shape{40, 4, 5});
    CHECK(fs::exists(dir / "features" / "labels.csv"));
}

TEST_CASE("verify command reports suite results") {
    std::ostringstream log;
    CHECK(cli::cmd_verify("wavelet", log) == 0);
    CHECK(log.str().find("[PASS]") != std::string::npos);
    CHECK_THROWS_AS(cli::cmd_verify("bogus", log), ConfigError);
}

TEST_CASE("ablation variants cover the seven-row grid") {
    const auto& variants = cli::ablation_variants();
    REQUIRE(variants.size() == 7);
    CHECK(variants[0].name == "baseline");
    CHECK_FALSE(variants[0].use_dwt);
    CHECK(variants[3].use_channel_split);
    CHECK_FALSE(variants[3].use_dwt);
    CHECK(variants[6].use_dwt);
    CHECK(variants[6].use_pcl);
    CHECK(variants[6].use_ta);

    RunConfig cfg = micro_run_config();
    RunConfig applied = cli::apply_variant(cfg, variants[3]);
    CHECK(applied.train.use_channel_split);
    CHECK_FALSE(applied.train.use_dwt);
    applied.validate();
}

TEST_SUITE_END();

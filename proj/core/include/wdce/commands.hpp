#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wdce/config.hpp"

namespace wdce::cli {

// Command implementations shared by the wdce binary and the test suites.
// All artifacts written by a command are byte-identical across reruns with
// the same config. Failures surface as exceptions: ConfigError for bad
// input (exit 2), std::exception otherwise (exit 1); a nonzero return
// marks a verification failure (exit 1).

/// Writes the dataset and logs per-class counts plus the high/low band
/// discriminability ratio.
int cmd_gen(const SynthSpec& spec, const std::string& out_path, std::ostream& log);

/// Trains one model: metrics.csv and model.ckpt appear under out_dir.
int cmd_train(const RunConfig& cfg, const std::string& data_path, const std::string& out_dir,
              std::ostream& log);

/// Evaluates one checkpoint or an ensemble (fused logits averaged).
/// split: "train", "test" or "all" (reconstructed from the checkpoint's
/// own split seed and fraction).
int cmd_eval(const std::vector<std::string>& ckpt_paths, const std::string& data_path,
             const std::string& split, std::ostream& log);

/// Runs the seven ablation variants across seeds; writes results.csv and
/// a per-variant ranking table under out_dir.
int cmd_ablate(const RunConfig& base, const std::string& data_path, const std::string& out_dir,
               const std::vector<std::uint64_t>& seeds, std::ostream& log);

/// Property suites; returns 0 iff everything passed.
int cmd_verify(const std::string& suite, std::ostream& log);

/// Forward: splits trajectory CSV rows into low.csv/high.csv under
/// out_dir. Inverse: reads low.csv/high.csv from in_path (a directory)
/// and writes reconstructed.csv.
int cmd_dwt(const std::string& in_path, const std::string& out_dir, bool inverse,
            std::ostream& log);

/// Dumps pooled salient/subtle/fused features and attention maps for every
/// sample of a dataset under a trained decoupled model.
int cmd_dump(const std::string& ckpt_path, const std::string& data_path,
             const std::string& out_dir, std::ostream& log);

/// The seven ablation rows in table order.
struct AblationVariant {
    std::string name;
    bool use_dwt, use_da, use_ta, use_pcl, use_channel_split;
};
const std::vector<AblationVariant>& ablation_variants();

/// Desk-scale training config used by the ablation sweep when the user
/// does not override it: a compact backbone and a calmer learning rate
/// than the full-scale defaults, tuned to finish 21 runs on one core in
/// minutes.
RunConfig ablation_default_config();

/// Config for the training-sanity run on the easy synthetic regime:
/// exactly 200 steps with a late two-stage decay.
RunConfig sanity_default_config();

/// Applies one variant's switches to a config.
RunConfig apply_variant(RunConfig cfg, const AblationVariant& v);

/// Deterministic shortest round-trip double formatting used in every CSV.
std::string fmt_double(double v);

}  // namespace wdce::cli

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wdce/tensor.hpp"

namespace wdce {

/// One labeled sample: joints x frames x coordinate channels, row-major.
struct SkeletonSequence {
    std::uint64_t sample_id = 0;
    std::size_t label = 0;
    std::size_t joints = 0;
    std::size_t frames = 0;
    std::size_t channels = 3;
    std::vector<double> values;  // V x T x C

    double at(std::size_t v, std::size_t t, std::size_t c) const {
        return values[(v * frames + t) * channels + c];
    }
    double& at(std::size_t v, std::size_t t, std::size_t c) {
        return values[(v * frames + t) * channels + c];
    }
};

using Dataset = std::vector<SkeletonSequence>;

/// Confusable-pair generator spec. Classes come in pairs that share one
/// low-frequency salient signal exactly; class identity lives in
/// high-frequency subtle components of relative amplitude rho. Sample i of
/// the two classes in a pair shares its salient realization, so the pair's
/// salient components are equal pre-noise by construction.
struct SynthSpec {
    std::size_t class_pairs = 3;
    std::size_t joints = 7;
    std::size_t frames = 32;
    std::size_t samples_per_class = 100;
    std::size_t salient_components = 3;
    std::size_t subtle_components = 2;
    double f_split = 0.25;     // cycles/frame boundary between the banks
    double rho = 0.15;         // subtle amplitude relative to salient
    double noise_sigma = 0.05;
    std::uint64_t seed = 42;

    std::size_t classes() const { return 2 * class_pairs; }
    void validate() const;
};

Dataset generate(const SynthSpec& spec);

// Dataset container: magic "WDCD", u64 manifest length, a line-oriented
// text manifest (format line, count/V/T/C line, then one "sample_id label"
// line per record) followed by one rank-3 tensor dump per record.
void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

/// Stratified split, deterministic per seed; every class needs >= 2 samples.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_fraction,
                                          std::uint64_t seed);

/// Columns: sample_id, label, joint, frame, x, y, z. Header row optional.
Dataset import_csv(const std::string& path);

/// Ratio of between-class distances of Haar high-band vs low-band class
/// means, per confusable pair. Classes 2p and 2p+1 form pair p.
struct Discriminability {
    std::vector<double> per_pair;
    double min_ratio = 0.0;
    double mean_ratio = 0.0;
};

Discriminability band_discriminability(const Dataset& data, std::size_t class_pairs);

/// Packs selected samples into an N x C x T x V batch plus labels.
std::pair<TensorPtr, std::vector<std::size_t>> make_batch(const Dataset& data,
                                                          const std::vector<std::size_t>& indices);

/// Per-class sample counts; size = max label + 1.
std::vector<std::size_t> class_counts(const Dataset& data);

}  // namespace wdce

#include "wdce/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "wdce/rng.hpp"
#include "wdce/serialize.hpp"
#include "wdce/wavelet.hpp"

namespace wdce {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// stream tags for keyed substreams of the dataset seed
constexpr std::uint64_t kTagPairBank = 0xA11u;
constexpr std::uint64_t kTagClassBank = 0xC1A55u;
constexpr std::uint64_t kTagRealization = 0x5EA1u;
constexpr std::uint64_t kTagNoise = 0x015Eu;

struct Sinusoid {
    double freq = 0.0;                 // cycles per frame
    std::vector<double> amplitude;     // per (joint, channel)
    std::vector<double> phase;         // per (joint, channel)
};

std::vector<Sinusoid> draw_salient_bank(const SynthSpec& spec, std::size_t pair) {
    Rng rng(derive_seed(spec.seed, {kTagPairBank, pair}));
    std::vector<Sinusoid> bank(spec.salient_components);
    const std::size_t slots = spec.joints * 3;
    for (auto& comp : bank) {
        comp.freq = rng.uniform(0.02, spec.f_split);  // strictly below the split
        comp.amplitude.resize(slots);
        comp.phase.resize(slots);
        for (std::size_t i = 0; i < slots; ++i) {
            comp.amplitude[i] = rng.uniform(0.5, 1.0);
            comp.phase[i] = rng.uniform(0.0, kTwoPi);
        }
    }
    return bank;
}

// Class-distinct frequency slots near the Nyquist rate; the first
// component sits exactly at Nyquist so its high band survives temporal
// pooling as a per-trajectory constant.
std::vector<Sinusoid> draw_subtle_bank(const SynthSpec& spec, std::size_t cls) {
    Rng rng(derive_seed(spec.seed, {kTagClassBank, cls}));
    std::vector<Sinusoid> bank(spec.subtle_components);
    const std::size_t slots = spec.joints * 3;
    const std::size_t total_slots = spec.subtle_components * spec.classes();
    const double lo = std::max(spec.f_split, 0.38);
    for (std::size_t u = 0; u < bank.size(); ++u) {
        auto& comp = bank[u];
        if (u == 0) {
            comp.freq = 0.5;
        } else {
            const double frac = double(u * spec.classes() + cls) / double(total_slots);
            comp.freq = lo + (0.5 - lo) * frac;
        }
        comp.amplitude.resize(slots);
        comp.phase.resize(slots);
        for (std::size_t i = 0; i < slots; ++i) {
            comp.amplitude[i] = spec.rho * rng.uniform(0.5, 1.0);
            comp.phase[i] = rng.uniform(0.0, kTwoPi);
        }
    }
    return bank;
}

}  // namespace

void SynthSpec::validate() const {
    if (class_pairs == 0) throw std::invalid_argument("synth spec: need at least one class pair");
    if (joints == 0) throw std::invalid_argument("synth spec: need at least one joint");
    if (frames < 2 || frames % 2 != 0) {
        throw std::invalid_argument("synth spec: frame count must be even and >= 2, got " +
                                    std::to_string(frames));
    }
    if (samples_per_class < 1) throw std::invalid_argument("synth spec: empty classes");
    if (salient_components == 0) throw std::invalid_argument("synth spec: no salient components");
    if (f_split <= 0.02 || f_split > 0.5) {
        throw std::invalid_argument("synth spec: f_split must lie in (0.02, 0.5]");
    }
    if (rho < 0.0 || rho >= 1.0) {
        throw std::invalid_argument("synth spec: rho must lie in [0, 1), got " + std::to_string(rho));
    }
    if (noise_sigma < 0.0) throw std::invalid_argument("synth spec: negative noise sigma");
}

Dataset generate(const SynthSpec& spec) {
    spec.validate();
    const std::size_t classes = spec.classes();
    const std::size_t slots = spec.joints * 3;

    std::vector<std::vector<Sinusoid>> salient(spec.class_pairs);
    for (std::size_t p = 0; p < spec.class_pairs; ++p) salient[p] = draw_salient_bank(spec, p);
    std::vector<std::vector<Sinusoid>> subtle(classes);
    for (std::size_t k = 0; k < classes; ++k) subtle[k] = draw_subtle_bank(spec, k);

    Dataset out;
    out.reserve(classes * spec.samples_per_class);
    for (std::size_t k = 0; k < classes; ++k) {
        const std::size_t pair = k / 2;
        for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
            SkeletonSequence seq;
            seq.sample_id = k * spec.samples_per_class + i;
            seq.label = k;
            seq.joints = spec.joints;
            seq.frames = spec.frames;
            seq.channels = 3;
            seq.values.assign(slots * spec.frames, 0.0);

            // salient realization shared by both classes of the pair:
            // a global phase shift and an amplitude factor per sample index
            Rng real_rng(derive_seed(spec.seed, {kTagRealization, pair, i}));
            const double phase_shift = real_rng.uniform(0.0, kTwoPi);
            const double amp_factor = real_rng.uniform(0.8, 1.2);

            Rng noise_rng(derive_seed(spec.seed, {kTagNoise, seq.sample_id}));

            for (std::size_t v = 0; v < spec.joints; ++v) {
                for (std::size_t t = 0; t < spec.frames; ++t) {
                    for (std::size_t c = 0; c < 3; ++c) {
                        const std::size_t slot = v * 3 + c;
                        double value = 0.0;
                        for (const auto& comp : salient[pair]) {
                            value += amp_factor * comp.amplitude[slot] *
                                     std::sin(kTwoPi * comp.freq * double(t) + comp.phase[slot] +
                                              phase_shift);
                        }
                        for (const auto& comp : subtle[k]) {
                            value += comp.amplitude[slot] *
                                     std::sin(kTwoPi * comp.freq * double(t) + comp.phase[slot]);
                        }
                        if (spec.noise_sigma > 0.0) {
                            value += spec.noise_sigma * noise_rng.normal();
                        }
                        seq.at(v, t, c) = value;
                    }
                }
            }
            out.push_back(std::move(seq));
        }
    }
    return out;
}

namespace {

constexpr char kDatasetMagic[4] = {'W', 'D', 'C', 'D'};

}  // namespace

void save_dataset(const std::string& path, const Dataset& data) {
    for (const auto& s : data) {
        if (data[0].joints != s.joints || data[0].frames != s.frames ||
            data[0].channels != s.channels) {
            throw std::invalid_argument("save_dataset: mixed sample shapes");
        }
    }
    std::ostringstream manifest;
    manifest << "wdce-dataset 1\n";
    if (data.empty()) {
        manifest << "0 0 0 0\n";
    } else {
        manifest << data.size() << " " << data[0].joints << " " << data[0].frames << " "
                 << data[0].channels << "\n";
    }
    for (const auto& s : data) manifest << s.sample_id << " " << s.label << "\n";
    const std::string header = manifest.str();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write(kDatasetMagic, 4);
    write_u64(out, header.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& s : data) {
        Tensor t({s.joints, s.frames, s.channels}, s.values, false);
        write_tensor(out, t);
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);

    char magic[4] = {};
    read_bytes(in, magic, 4, 0);
    if (std::memcmp(magic, kDatasetMagic, 4) != 0) {
        throw FormatError("bad dataset magic, expected \"WDCD\"", 0);
    }
    const std::uint64_t header_len = read_u64(in, 4);
    std::string header(header_len, '\0');
    read_bytes(in, header.data(), header_len, 12);

    std::istringstream hs(header);
    std::string format_line;
    if (!std::getline(hs, format_line) || format_line != "wdce-dataset 1") {
        throw FormatError("unknown dataset format line \"" + format_line + "\"", 12);
    }
    std::size_t count = 0, joints = 0, frames = 0, channels = 0;
    {
        std::string line;
        if (!std::getline(hs, line)) throw FormatError("missing dataset size line", 12);
        std::istringstream ls(line);
        if (!(ls >> count >> joints >> frames >> channels)) {
            throw FormatError("malformed dataset size line \"" + line + "\"", 12);
        }
    }

    Dataset out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::string line;
        if (!std::getline(hs, line)) {
            throw FormatError("manifest ends after " + std::to_string(i) + " of " +
                              std::to_string(count) + " records", 12);
        }
        std::istringstream ls(line);
        SkeletonSequence seq;
        if (!(ls >> seq.sample_id >> seq.label)) {
            throw FormatError("malformed manifest record \"" + line + "\"", 12);
        }
        seq.joints = joints;
        seq.frames = frames;
        seq.channels = channels;
        out.push_back(std::move(seq));
    }

    std::uint64_t offset = 12 + header_len;
    for (std::size_t i = 0; i < count; ++i) {
        TensorPtr t = read_tensor(in, offset);
        if (t->shape != Shape{joints, frames, channels}) {
            throw FormatError("record " + std::to_string(i) + " has shape " + shape_str(t->shape) +
                              ", manifest says [" + std::to_string(joints) + ", " +
                              std::to_string(frames) + ", " + std::to_string(channels) + "]",
                              offset);
        }
        out[i].values = std::move(t->data);
        offset += 4 + 4 + 8 * t->rank() + 8 * joints * frames * channels;
    }
    return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_fraction,
                                          std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0) {
        throw std::invalid_argument("split: train fraction must lie in (0, 1), got " +
                                    std::to_string(train_fraction));
    }
    const auto counts = class_counts(data);
    std::vector<std::vector<std::size_t>> by_class(counts.size());
    for (std::size_t i = 0; i < data.size(); ++i) by_class[data[i].label].push_back(i);
    for (std::size_t k = 0; k < by_class.size(); ++k) {
        if (by_class[k].size() < 2) {
            throw std::invalid_argument("split: class " + std::to_string(k) + " has " +
                                        std::to_string(by_class[k].size()) +
                                        " samples, need at least 2");
        }
    }

    Dataset train, test;
    for (std::size_t k = 0; k < by_class.size(); ++k) {
        auto& idx = by_class[k];
        Rng rng(derive_seed(seed, {0x5B117u, k}));
        for (std::size_t i = idx.size(); i-- > 1;) {
            std::swap(idx[i], idx[rng.below(i + 1)]);
        }
        std::size_t n_train = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(idx.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            (i < n_train ? train : test).push_back(data[idx[i]]);
        }
    }
    return {std::move(train), std::move(test)};
}

Dataset import_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    struct Row {
        std::uint64_t id;
        std::size_t label, joint, frame, line_no;
        double x, y, z;
    };
    std::vector<Row> rows;
    std::size_t max_joint = 0, max_frame = 0;

    std::string line;
    std::size_t line_no = 0;
    bool first_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first_line) {
            first_line = false;
            if (line.find("sample_id") != std::string::npos) continue;  // header row
        }
        std::istringstream ls(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (fields.size() != 7) {
            throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected 7 columns" +
                                     ", got " + std::to_string(fields.size()));
        }
        try {
            Row r;
            r.line_no = line_no;
            r.id = std::stoull(fields[0]);
            r.label = std::stoul(fields[1]);
            r.joint = std::stoul(fields[2]);
            r.frame = std::stoul(fields[3]);
            r.x = std::stod(fields[4]);
            r.y = std::stod(fields[5]);
            r.z = std::stod(fields[6]);
            max_joint = std::max(max_joint, r.joint);
            max_frame = std::max(max_frame, r.frame);
            rows.push_back(r);
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("csv line " + std::to_string(line_no) + ": non-numeric field");
        } catch (const std::out_of_range&) {
            throw std::runtime_error("csv line " + std::to_string(line_no) + ": value out of range");
        }
    }
    if (rows.empty()) throw std::runtime_error("csv " + path + ": no data rows");

    const std::size_t joints = max_joint + 1;
    const std::size_t frames = max_frame + 1;

    Dataset out;
    std::vector<std::vector<bool>> seen;
    auto sample_pos = [&](const Row& r) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (out[i].sample_id == r.id) {
                if (out[i].label != r.label) {
                    throw std::runtime_error("csv line " + std::to_string(r.line_no) + ": sample " +
                                             std::to_string(r.id) + " changes label");
                }
                return i;
            }
        }
        SkeletonSequence seq;
        seq.sample_id = r.id;
        seq.label = r.label;
        seq.joints = joints;
        seq.frames = frames;
        seq.channels = 3;
        seq.values.assign(joints * frames * 3, 0.0);
        out.push_back(std::move(seq));
        seen.emplace_back(joints * frames, false);
        return out.size() - 1;
    };

    for (const Row& r : rows) {
        const std::size_t s = sample_pos(r);
        const std::size_t cell = r.joint * frames + r.frame;
        if (seen[s][cell]) {
            throw std::runtime_error("csv line " + std::to_string(r.line_no) +
                                     ": duplicate (sample, joint, frame) cell");
        }
        seen[s][cell] = true;
        out[s].at(r.joint, r.frame, 0) = r.x;
        out[s].at(r.joint, r.frame, 1) = r.y;
        out[s].at(r.joint, r.frame, 2) = r.z;
    }
    for (std::size_t s = 0; s < out.size(); ++s) {
        for (std::size_t cell = 0; cell < joints * frames; ++cell) {
            if (!seen[s][cell]) {
                throw std::runtime_error("csv sample " + std::to_string(out[s].sample_id) +
                                         ": missing joint " + std::to_string(cell / frames) +
                                         " frame " + std::to_string(cell % frames));
            }
        }
    }
    return out;
}

std::vector<std::size_t> class_counts(const Dataset& data) {
    std::size_t max_label = 0;
    for (const auto& s : data) max_label = std::max(max_label, s.label);
    std::vector<std::size_t> counts(data.empty() ? 0 : max_label + 1, 0);
    for (const auto& s : data) ++counts[s.label];
    return counts;
}

std::pair<TensorPtr, std::vector<std::size_t>> make_batch(const Dataset& data,
                                                          const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw std::invalid_argument("make_batch: empty index list");
    const auto& first = data.at(indices[0]);
    const std::size_t v = first.joints, t = first.frames, c = first.channels;
    auto batch = Tensor::zeros({indices.size(), c, t, v});
    std::vector<std::size_t> labels(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto& s = data.at(indices[i]);
        if (s.joints != v || s.frames != t || s.channels != c) {
            throw std::invalid_argument("make_batch: mixed sample shapes");
        }
        labels[i] = s.label;
        for (std::size_t jv = 0; jv < v; ++jv) {
            for (std::size_t jt = 0; jt < t; ++jt) {
                for (std::size_t jc = 0; jc < c; ++jc) {
                    batch->data[((i * c + jc) * t + jt) * v + jv] = s.at(jv, jt, jc);
                }
            }
        }
    }
    return {batch, std::move(labels)};
}

Discriminability band_discriminability(const Dataset& data, std::size_t class_pairs) {
    if (data.empty()) throw std::invalid_argument("band_discriminability: empty dataset");
    const std::size_t frames = data[0].frames;
    const std::size_t rows = data[0].joints * data[0].channels;
    const auto filters = build_haar(frames);
    const std::size_t half = frames / 2;
    const std::size_t classes = 2 * class_pairs;

    // class means of both bands of the raw trajectories
    std::vector<std::vector<double>> mean_low(classes, std::vector<double>(rows * half, 0.0));
    std::vector<std::vector<double>> mean_high(classes, std::vector<double>(rows * half, 0.0));
    std::vector<std::size_t> counts(classes, 0);

    for (const auto& s : data) {
        if (s.label >= classes) {
            throw std::invalid_argument("band_discriminability: label " + std::to_string(s.label) +
                                        " outside " + std::to_string(class_pairs) + " pairs");
        }
        // V x T x C -> (V*C) x T trajectories
        std::vector<double> traj(rows * frames);
        for (std::size_t v = 0; v < s.joints; ++v) {
            for (std::size_t c = 0; c < s.channels; ++c) {
                for (std::size_t t = 0; t < s.frames; ++t) {
                    traj[(v * s.channels + c) * frames + t] = s.at(v, t, c);
                }
            }
        }
        auto bands = dwt(Tensor::from_data({rows, frames}, std::move(traj)), filters);
        ++counts[s.label];
        for (std::size_t i = 0; i < rows * half; ++i) {
            mean_low[s.label][i] += bands.low->data[i];
            mean_high[s.label][i] += bands.high->data[i];
        }
    }
    for (std::size_t k = 0; k < classes; ++k) {
        if (counts[k] == 0) {
            throw std::invalid_argument("band_discriminability: class " + std::to_string(k) +
                                        " has no samples");
        }
        for (auto& v : mean_low[k]) v /= double(counts[k]);
        for (auto& v : mean_high[k]) v /= double(counts[k]);
    }

    Discriminability out;
    double sum = 0.0;
    out.min_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < class_pairs; ++p) {
        double d_low = 0.0, d_high = 0.0;
        for (std::size_t i = 0; i < rows * half; ++i) {
            const double dl = mean_low[2 * p][i] - mean_low[2 * p + 1][i];
            const double dh = mean_high[2 * p][i] - mean_high[2 * p + 1][i];
            d_low += dl * dl;
            d_high += dh * dh;
        }
        d_low = std::sqrt(d_low);
        d_high = std::sqrt(d_high);
        const double ratio = (d_low == 0.0 && d_high == 0.0) ? 1.0
                             : (d_low == 0.0)                ? std::numeric_limits<double>::infinity()
                                                             : d_high / d_low;
        out.per_pair.push_back(ratio);
        out.min_ratio = std::min(out.min_ratio, ratio);
        sum += ratio;
    }
    out.mean_ratio = sum / double(class_pairs);
    return out;
}

}  // namespace wdce

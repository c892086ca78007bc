#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "wdce/data.hpp"
#include "wdce/serialize.hpp"
#include "wdce/wavelet.hpp"

using namespace wdce;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("data");

namespace {

SynthSpec small_spec() {
    SynthSpec spec;
    spec.class_pairs = 2;
    spec.joints = 5;
    spec.frames = 16;
    spec.samples_per_class = 10;
    spec.seed = 7;
    return spec;
}

fs::path temp_file(const char* name) {
    const auto dir = fs::temp_directory_path() / "wdce_test_data";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("generation is deterministic and correctly counted") {
    auto a = generate(small_spec());
    auto b = generate(small_spec());
    REQUIRE(a.size() == 40);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].values == b[i].values);  // bitwise
        CHECK(a[i].sample_id == b[i].sample_id);
    }
    auto counts = class_counts(a);
    REQUIRE(counts.size() == 4);
    for (std::size_t c : counts) CHECK(c == 10);
}

TEST_CASE("rho zero and sigma zero collapse each pair") {
    SynthSpec spec = small_spec();
    spec.rho = 0.0;
    spec.noise_sigma = 0.0;
    auto data = generate(spec);
    const std::size_t per = spec.samples_per_class;
    for (std::size_t p = 0; p < spec.class_pairs; ++p) {
        for (std::size_t i = 0; i < per; ++i) {
            const auto& a = data[(2 * p) * per + i];
            const auto& b = data[(2 * p + 1) * per + i];
            CHECK(a.values == b.values);  // identical pre-noise realizations
        }
    }
}

TEST_CASE("pair salient components are shared even with subtle present") {
    // rho > 0, sigma 0: the per-sample difference between the pair's
    // classes is exactly the subtle difference, identical across i only
    // in its salient part. Regenerating with rho 0 isolates the salient.
    SynthSpec with_subtle = small_spec();
    with_subtle.noise_sigma = 0.0;
    SynthSpec no_subtle = with_subtle;
    no_subtle.rho = 0.0;
    auto full = generate(with_subtle);
    auto salient_only = generate(no_subtle);
    const std::size_t per = with_subtle.samples_per_class;
    // subtle component = full - salient: must be identical across samples
    // of one class (the class template), and differ between pair classes
    const auto& f0 = full[0];
    const auto& s0 = salient_only[0];
    const auto& f1 = full[1];
    const auto& s1 = salient_only[1];
    for (std::size_t j = 0; j < f0.values.size(); ++j) {
        const double subtle_a0 = f0.values[j] - s0.values[j];
        const double subtle_a1 = f1.values[j] - s1.values[j];
        CHECK(subtle_a0 == doctest::Approx(subtle_a1).epsilon(1e-12));
    }
    double diff = 0.0;
    const auto& g0 = full[per];       // first sample of the partner class
    const auto& t0 = salient_only[per];
    for (std::size_t j = 0; j < f0.values.size(); ++j) {
        diff = std::max(diff, std::abs((f0.values[j] - s0.values[j]) -
                                       (g0.values[j] - t0.values[j])));
    }
    CHECK(diff > 1e-3);  // class-distinct subtle templates
}

TEST_CASE("odd frame counts are rejected") {
    SynthSpec spec = small_spec();
    spec.frames = 15;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
}

TEST_CASE("dataset files round trip exactly") {
    auto data = generate(small_spec());
    const auto path = temp_file("roundtrip.wdcd");
    save_dataset(path.string(), data);
    auto loaded = load_dataset(path.string());
    REQUIRE(loaded.size() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(loaded[i].sample_id == data[i].sample_id);
        CHECK(loaded[i].label == data[i].label);
        CHECK(loaded[i].values == data[i].values);  // bitwise
    }
}

TEST_CASE("empty datasets are valid files") {
    const auto path = temp_file("empty.wdcd");
    save_dataset(path.string(), {});
    auto loaded = load_dataset(path.string());
    CHECK(loaded.empty());
}

TEST_CASE("corrupted magic bytes are rejected with an offset") {
    auto data = generate(small_spec());
    const auto path = temp_file("corrupt.wdcd");
    save_dataset(path.string(), data);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXX", 4);
    }
    CHECK_THROWS_AS(load_dataset(path.string()), FormatError);
    try {
        load_dataset(path.string());
    } catch (const FormatError& e) {
        CHECK(e.offset == 0);
    }
}

TEST_CASE("truncated payloads are rejected with an offset") {
    auto data = generate(small_spec());
    const auto path = temp_file("truncated.wdcd");
    save_dataset(path.string(), data);
    const auto size = fs::file_size(path);
    fs::resize_file(path, size - 64);
    CHECK_THROWS_AS(load_dataset(path.string()), FormatError);
}

TEST_CASE("stratified split is deterministic, disjoint and exhaustive") {
    auto data = generate(small_spec());
    auto [train_a, test_a] = split_dataset(data, 0.8, 3);
    auto [train_b, test_b] = split_dataset(data, 0.8, 3);

    auto train_counts = class_counts(train_a);
    auto test_counts = class_counts(test_a);
    for (std::size_t c : train_counts) CHECK(c == 8);
    for (std::size_t c : test_counts) CHECK(c == 2);

    auto ids = [](const Dataset& d) {
        std::multiset<std::uint64_t> out;
        for (const auto& s : d) out.insert(s.sample_id);
        return out;
    };
    CHECK(ids(train_a) == ids(train_b));

    std::multiset<std::uint64_t> all = ids(train_a);
    for (auto id : ids(test_a)) all.insert(id);
    CHECK(all == ids(data));

    auto other_seed = split_dataset(data, 0.8, 4);
    CHECK(ids(other_seed.first) != ids(train_a));  // seeds matter

    Dataset tiny(1);
    tiny[0] = data[0];
    CHECK_THROWS_AS(split_dataset(tiny, 0.5, 1), std::invalid_argument);
    CHECK_THROWS_AS(split_dataset(data, 1.5, 1), std::invalid_argument);
}

TEST_CASE("csv import parses well-formed trajectories") {
    const auto path = temp_file("import.csv");
    {
        std::ofstream out(path);
        out << "sample_id,label,joint,frame,x,y,z\n";
        for (int joint = 0; joint < 2; ++joint) {
            for (int frame = 0; frame < 2; ++frame) {
                out << "7,1," << joint << ',' << frame << ',' << joint + frame << ",0.5,-1\n";
                out << "9,0," << joint << ',' << frame << ",0,0.25," << joint * frame << "\n";
            }
        }
    }
    auto data = import_csv(path.string());
    REQUIRE(data.size() == 2);
    CHECK(data[0].sample_id == 7);
    CHECK(data[0].label == 1);
    CHECK(data[0].joints == 2);
    CHECK(data[0].frames == 2);
    CHECK(data[0].at(1, 1, 0) == doctest::Approx(2.0));
    CHECK(data[1].at(1, 1, 2) == doctest::Approx(1.0));
}

TEST_CASE("csv import reports the offending line") {
    const auto path = temp_file("bad.csv");
    {
        std::ofstream out(path);
        out << "sample_id,label,joint,frame,x,y,z\n";
        out << "1,0,0,0,1,2,3\n";
        out << "1,0,0,not_a_number,1,2,3\n";
    }
    CHECK_THROWS_WITH_AS(import_csv(path.string()), doctest::Contains("line 3"),
                         std::runtime_error);

    const auto missing = temp_file("missing.csv");
    {
        std::ofstream out(missing);
        out << "1,0,0,0,1,2,3\n";
        out << "1,0,1,1,1,2,3\n";  // joint 0 frame 1 and joint 1 frame 0 absent
    }
    CHECK_THROWS_WITH_AS(import_csv(missing.string()), doctest::Contains("missing"),
                         std::runtime_error);
}

TEST_CASE("band discriminability separates the defaults and collapses at rho zero") {
    SynthSpec spec;  // default layout, fewer samples for speed
    spec.samples_per_class = 30;
    auto data = generate(spec);
    auto disc = band_discriminability(data, spec.class_pairs);
    CHECK(disc.min_ratio >= 5.0);

    SynthSpec flat = spec;
    flat.rho = 0.0;
    auto flat_disc = band_discriminability(generate(flat), flat.class_pairs);
    CHECK(flat_disc.mean_ratio < 3.0);
    CHECK(flat_disc.mean_ratio > 0.3);
}

TEST_CASE("class-difference energy concentrates in the high band near Nyquist") {
    // With shared salient realizations and zero noise, the per-index
    // difference between a pair's classes is exactly the subtle-template
    // difference; pushing the subtle slots toward the Nyquist rate pushes
    // its Haar energy fraction toward one.
    auto fraction_for = [&](double f_split) {
        SynthSpec spec = small_spec();
        spec.noise_sigma = 0.0;
        spec.f_split = f_split;  // raises the lower bound of the subtle slots
        auto data = generate(spec);
        const auto filters = build_haar(spec.frames);
        const std::size_t per = spec.samples_per_class;
        double high_energy = 0.0, total_energy = 0.0;
        for (std::size_t i = 0; i < per; ++i) {
            const auto& a = data[i];            // class 0
            const auto& b = data[per + i];      // class 1, same salient realization
            std::vector<double> diff(a.values.size());
            for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = a.values[j] - b.values[j];
            // V x T x C -> rows of T
            const std::size_t rows = spec.joints * 3;
            std::vector<double> traj(rows * spec.frames);
            for (std::size_t v = 0; v < spec.joints; ++v) {
                for (std::size_t c = 0; c < 3; ++c) {
                    for (std::size_t t = 0; t < spec.frames; ++t) {
                        traj[(v * 3 + c) * spec.frames + t] = diff[(v * spec.frames + t) * 3 + c];
                    }
                }
            }
            auto bands = dwt(Tensor::from_data({rows, spec.frames}, std::move(traj)), filters);
            for (double x : bands.high->data) high_energy += x * x;
            for (double x : bands.low->data) total_energy += x * x;
            for (double x : bands.high->data) total_energy += x * x;
        }
        return high_energy / total_energy;
    };
    const double near_nyquist = fraction_for(0.45);
    const double mid_band = fraction_for(0.25);
    CHECK(near_nyquist > mid_band);
    CHECK(near_nyquist > 0.9);
}

TEST_CASE("batches use the N x C x T x V layout") {
    auto data = generate(small_spec());
    auto [batch, labels] = make_batch(data, {0, 11});
    CHECK(batch->shape == Shape{2, 3, 16, 5});
    CHECK(labels[0] == data[0].label);
    CHECK(labels[1] == data[11].label);
    CHECK(batch->data[((0 * 3 + 1) * 16 + 4) * 5 + 2] == data[0].at(2, 4, 1));
    CHECK(batch->data[((1 * 3 + 2) * 16 + 7) * 5 + 3] == data[11].at(3, 7, 2));
}

TEST_SUITE_END();

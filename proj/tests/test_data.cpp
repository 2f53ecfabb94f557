#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "jem/data.hpp"
#include "test_util.hpp"

using namespace jem;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

LabeledDataset make_mixture(int k, int n, double sigma = 0.1,
                            std::uint64_t seed = 1) {
    DatasetSpec spec;
    spec.generator = DatasetSpec::GaussMixture;
    spec.k = k;
    spec.n = n;
    spec.sigma = sigma;
    Rng rng(seed);
    return generate(spec, rng);
}

}  // namespace

TEST_CASE("generator names round-trip, unknown name rejected") {
    for (auto g : {DatasetSpec::GaussMixture, DatasetSpec::Rings,
                   DatasetSpec::Spirals, DatasetSpec::Checkerboard,
                   DatasetSpec::File})
        CHECK(generator_from_name(generator_name(g)) == g);
    CHECK_THROWS_AS(generator_from_name("moons"), ConfigError);
}

TEST_CASE("gauss mixture: balanced classes, points near their component mean") {
    LabeledDataset ds = make_mixture(4, 400, 0.05);
    REQUIRE(ds.size() == 400);
    REQUIRE(ds.component_means.size() == 4);
    std::vector<int> counts(4, 0);
    for (int y : ds.labels) {
        REQUIRE(y >= 0);
        REQUIRE(y < 4);
        ++counts[y];
    }
    for (int c : counts) CHECK(c == 100);
    // i-th point belongs to component i%4; stay within 5 sigma
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const Tensor& mu = ds.component_means[i % 4];
        double dx = ds.inputs.at(i, 0) - mu.data[0];
        double dy = ds.inputs.at(i, 1) - mu.data[1];
        CHECK(std::sqrt(dx * dx + dy * dy) < 5 * 0.05);
    }
}

TEST_CASE("gauss mixture with k=4 uses the four grid corners") {
    LabeledDataset ds = make_mixture(4, 8, 0.01);
    std::set<std::pair<double, double>> corners;
    for (const Tensor& mu : ds.component_means)
        corners.insert({mu.data[0], mu.data[1]});
    CHECK(corners.count({-1, -1}) == 1);
    CHECK(corners.count({-1, 1}) == 1);
    CHECK(corners.count({1, -1}) == 1);
    CHECK(corners.count({1, 1}) == 1);
}

TEST_CASE("generate is deterministic given spec and seed") {
    LabeledDataset a = make_mixture(3, 60, 0.1, 7);
    LabeledDataset b = make_mixture(3, 60, 0.1, 7);
    CHECK(a.inputs == b.inputs);
    CHECK(a.labels == b.labels);
    LabeledDataset c = make_mixture(3, 60, 0.1, 8);
    CHECK_FALSE(a.inputs == c.inputs);
}

TEST_CASE("rings: radius tracks the class index") {
    DatasetSpec spec;
    spec.generator = DatasetSpec::Rings;
    spec.k = 2;
    spec.n = 200;
    spec.sigma = 0.02;
    spec.scale = 1.0;
    Rng rng(2);
    LabeledDataset ds = generate(spec, rng);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        double r = std::hypot(ds.inputs.at(i, 0), ds.inputs.at(i, 1));
        double want = ds.labels[i] == 0 ? 1.0 : 2.0;
        CHECK(std::fabs(r - want) < 0.2);
    }
}

TEST_CASE("spirals: every class present, points inside the radius budget") {
    DatasetSpec spec;
    spec.generator = DatasetSpec::Spirals;
    spec.k = 3;
    spec.n = 150;
    spec.sigma = 0.01;
    Rng rng(3);
    LabeledDataset ds = generate(spec, rng);
    std::set<int> seen(ds.labels.begin(), ds.labels.end());
    CHECK(seen.size() == 3);
    for (std::size_t i = 0; i < ds.size(); ++i)
        CHECK(std::hypot(ds.inputs.at(i, 0), ds.inputs.at(i, 1)) < 2.2);
}

TEST_CASE("checkerboard: label equals the parity rule of the containing cell") {
    DatasetSpec spec;
    spec.generator = DatasetSpec::Checkerboard;
    spec.k = 2;
    spec.n = 300;
    spec.cells = 4;
    spec.scale = 1.0;
    Rng rng(4);
    LabeledDataset ds = generate(spec, rng);
    double w = 2.0 / 4;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        int ci = int(std::floor((ds.inputs.at(i, 0) + 1.0) / w));
        int cj = int(std::floor((ds.inputs.at(i, 1) + 1.0) / w));
        ci = std::min(std::max(ci, 0), 3);
        cj = std::min(std::max(cj, 0), 3);
        CHECK(ds.labels[i] == (ci + cj) % 2);
    }
    CHECK_THROWS_AS(
        [&] {
            DatasetSpec bad = spec;
            bad.cells = 1;
            bad.k = 2;
            Rng r(0);
            generate(bad, r);
        }(),
        ConfigError);
}

TEST_CASE("generate rejects degenerate sizes") {
    DatasetSpec spec;
    spec.k = 0;
    Rng rng(0);
    CHECK_THROWS_AS(generate(spec, rng), ConfigError);
    spec.k = 2;
    spec.n = 0;
    CHECK_THROWS_AS(generate(spec, rng), ConfigError);
}

TEST_CASE("preprocess maps each dimension onto [-1,1] and hits both ends") {
    LabeledDataset ds = make_mixture(4, 200, 0.3);
    Rng rng(5);
    preprocess(ds, rng, 0.0, true);
    for (std::size_t j = 0; j < 2; ++j) {
        double lo = 1e9, hi = -1e9;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            lo = std::min(lo, ds.inputs.at(i, j));
            hi = std::max(hi, ds.inputs.at(i, j));
        }
        CHECK(lo == doctest::Approx(-1.0));
        CHECK(hi == doctest::Approx(1.0));
    }
    CHECK(ds.normalization.size() == 2);
}

TEST_CASE("preprocess: linearity of the scaling map (hand-computed case)") {
    LabeledDataset ds;
    ds.inputs = Tensor({3, 2}, {0, 10, 5, 20, 10, 30});
    ds.labels = {0, 1, 0};
    ds.num_classes = 2;
    Rng rng(0);
    preprocess(ds, rng, 0.0, true);
    // dim 0: [0,10] -> {-1, 0, 1}; dim 1: [10,30] -> {-1, 0, 1}
    CHECK(ds.inputs.at(0, 0) == doctest::Approx(-1));
    CHECK(ds.inputs.at(1, 0) == doctest::Approx(0));
    CHECK(ds.inputs.at(2, 0) == doctest::Approx(1));
    CHECK(ds.inputs.at(0, 1) == doctest::Approx(-1));
    CHECK(ds.inputs.at(2, 1) == doctest::Approx(1));
    CHECK(ds.normalization[0].first == 0);
    CHECK(ds.normalization[0].second == 10);
}

TEST_CASE("preprocess: degenerate dimension maps to zero") {
    LabeledDataset ds;
    ds.inputs = Tensor({2, 2}, {7, 1, 7, 3});
    ds.labels = {0, 1};
    ds.num_classes = 2;
    Rng rng(0);
    preprocess(ds, rng, 0.0, true);
    CHECK(ds.inputs.at(0, 0) == 0.0);
    CHECK(ds.inputs.at(1, 0) == 0.0);
    CHECK(ds.inputs.at(0, 1) == doctest::Approx(-1));
}

TEST_CASE("preprocess carries component means through the scaling map") {
    LabeledDataset ds = make_mixture(4, 400, 0.05);
    Rng rng(6);
    preprocess(ds, rng, 0.0, true);
    // mapped means must sit near the mapped cluster centroids
    std::vector<Tensor> centroid(4, Tensor({2}));
    std::vector<int> counts(4, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        int c = int(i % 4);
        centroid[c].data[0] += ds.inputs.at(i, 0);
        centroid[c].data[1] += ds.inputs.at(i, 1);
        ++counts[c];
    }
    for (int c = 0; c < 4; ++c) {
        centroid[c].data[0] /= counts[c];
        centroid[c].data[1] /= counts[c];
        double dx = centroid[c].data[0] - ds.component_means[c].data[0];
        double dy = centroid[c].data[1] - ds.component_means[c].data[1];
        CHECK(std::hypot(dx, dy) < 0.05);
    }
    CHECK(ds.component_sigma > 0);
    CHECK(ds.component_sigma < 0.1);
}

TEST_CASE("preprocess bakes noise exactly once when renoise is off") {
    LabeledDataset base = make_mixture(3, 90, 0.1, 9);
    LabeledDataset noisy = base;
    Rng r1(10), r2(10);
    preprocess(base, r1, 0.03, true);   // no baked noise
    preprocess(noisy, r2, 0.03, false); // baked
    Rng shadow(10);
    double sq = 0;
    for (std::size_t i = 0; i < base.inputs.numel(); ++i) {
        double d = noisy.inputs.data[i] - base.inputs.data[i];
        sq += d * d;
        CHECK(std::fabs(d - 0.03 * shadow.gaussian()) < 1e-15);
    }
    CHECK(std::sqrt(sq / double(base.inputs.numel())) ==
          doctest::Approx(0.03).epsilon(0.15));
}

TEST_CASE("noisy_batch adds fresh noise of the requested scale") {
    LabeledDataset ds = make_mixture(4, 100, 0.1);
    Rng rng(11);
    preprocess(ds, rng, 0.03, true);
    std::vector<std::size_t> idx = {0, 5, 10, 99};
    Rng r1(20), r2(20), r3(21);
    Tensor a = noisy_batch(ds, idx, r1, 0.03);
    Tensor b = noisy_batch(ds, idx, r2, 0.03);
    Tensor c = noisy_batch(ds, idx, r3, 0.03);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(std::fabs(a.at(i, j) - ds.inputs.at(idx[i], j)) < 0.03 * 6);

    Rng r4(22);
    Tensor clean = noisy_batch(ds, idx, r4, 0.0);
    for (std::size_t i = 0; i < idx.size(); ++i)
        CHECK(clean.row(i) == ds.inputs.row(idx[i]));
}

TEST_CASE("split: sizes, disjoint rows, determinism") {
    LabeledDataset ds = make_mixture(4, 100, 0.1, 12);
    for (std::size_t i = 0; i < ds.size(); ++i) ds.inputs.at(i, 0) = double(i);
    SplitDataset s = split(ds, 0.2, 99);
    CHECK(s.val.size() == 20);
    CHECK(s.train.size() == 80);
    std::set<double> ids;
    for (std::size_t i = 0; i < s.train.size(); ++i)
        ids.insert(s.train.inputs.at(i, 0));
    for (std::size_t i = 0; i < s.val.size(); ++i)
        ids.insert(s.val.inputs.at(i, 0));
    CHECK(ids.size() == 100);  // a permutation: nothing lost, nothing doubled

    SplitDataset s2 = split(ds, 0.2, 99);
    CHECK(s.train.inputs == s2.train.inputs);
    CHECK(s.val.labels == s2.val.labels);
    SplitDataset s3 = split(ds, 0.2, 100);
    CHECK_FALSE(s.val.inputs == s3.val.inputs);
}

TEST_CASE("csv round-trip preserves rows, labels and class count") {
    LabeledDataset ds = make_mixture(3, 30, 0.1, 13);
    std::string path = temp_path("jem_test_roundtrip.csv");
    save_csv(ds, path);
    LabeledDataset back = load_csv(path);
    REQUIRE(back.size() == 30);
    CHECK(back.num_classes == 3);
    CHECK(back.labels == ds.labels);
    for (std::size_t i = 0; i < ds.inputs.numel(); ++i)
        CHECK(back.inputs.data[i] == doctest::Approx(ds.inputs.data[i]).epsilon(1e-15));
    std::remove(path.c_str());
}

TEST_CASE("csv loader rejects malformed files") {
    std::string path = temp_path("jem_test_bad.csv");
    auto write = [&](const std::string& text) {
        std::ofstream f(path);
        f << text;
    };
    write("x0,x1\n1,2\n");  // no label column
    CHECK_THROWS_AS(load_csv(path), ParseError);
    write("label,x0,x1\n0,1\n");  // short row
    CHECK_THROWS_AS(load_csv(path), ParseError);
    write("label,x0,x1\n0,abc,2\n");  // bad number
    CHECK_THROWS_AS(load_csv(path), ParseError);
    write("label,x0,x1\n");  // header only
    CHECK_THROWS_AS(load_csv(path), ParseError);
    CHECK_THROWS_AS(load_csv(temp_path("jem_test_missing.csv")), ParseError);
    std::remove(path.c_str());
}

TEST_CASE("jtb round-trip is exact at f32 precision") {
    LabeledDataset ds = make_mixture(4, 25, 0.1, 14);
    std::string path = temp_path("jem_test_roundtrip.jtb");
    save_jtb(ds, path);
    LabeledDataset back = load_jtb(path);
    REQUIRE(back.size() == 25);
    CHECK(back.num_classes == 4);
    CHECK(back.labels == ds.labels);
    for (std::size_t i = 0; i < ds.inputs.numel(); ++i)
        CHECK(back.inputs.data[i] == double(float(ds.inputs.data[i])));
    std::remove(path.c_str());
}

TEST_CASE("jtb loader rejects corruption") {
    std::string path = temp_path("jem_test_bad.jtb");
    {
        std::ofstream f(path, std::ios::binary);
        f << "NOPE";
    }
    CHECK_THROWS_AS(load_jtb(path), ParseError);
    // truncated body
    LabeledDataset ds = make_mixture(2, 10, 0.1, 15);
    save_jtb(ds, path);
    std::filesystem::resize_file(path, 20);
    CHECK_THROWS_AS(load_jtb(path), ParseError);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_jtb(path), ParseError);
    CHECK_THROWS_AS(load_file("x", "parquet"), ConfigError);
}

TEST_CASE("file generator delegates to the named loader") {
    LabeledDataset ds = make_mixture(2, 12, 0.1, 16);
    std::string path = temp_path("jem_test_file.csv");
    save_csv(ds, path);
    DatasetSpec spec;
    spec.generator = DatasetSpec::File;
    spec.path = path;
    spec.format = "csv";
    Rng rng(0);
    LabeledDataset back = generate(spec, rng);
    CHECK(back.size() == 12);
    CHECK(back.labels == ds.labels);
    std::remove(path.c_str());
}

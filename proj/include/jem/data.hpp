#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jem/rng.hpp"
#include "jem/tensor.hpp"

namespace jem {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LabeledDataset {
    Tensor inputs;            // [N,D]
    std::vector<int> labels;  // in [0,K); -1 marks unlabeled rows
    std::string name;
    int num_classes = 0;
    // per-dimension (min,max) used by the scaling map; empty until preprocess
    std::vector<std::pair<double, double>> normalization;
    // ground-truth generator geometry, kept through preprocessing so sampler
    // quality can be scored against it
    std::vector<Tensor> component_means;
    std::vector<int> component_class;
    double component_sigma = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return inputs.cols(); }
};

struct DatasetSpec {
    enum Generator { GaussMixture, Rings, Spirals, Checkerboard, File } generator =
        GaussMixture;
    int k = 4;
    int n = 400;
    double scale = 1.0;   // overall geometry scale
    double sigma = 0.1;   // within-component spread
    int cells = 4;        // checkerboard cells per side
    std::string path;     // File generator
    std::string format = "csv";
    std::uint64_t seed = 0;
};

DatasetSpec::Generator generator_from_name(const std::string& name);
std::string generator_name(DatasetSpec::Generator g);

/// Deterministic given (spec, rng seed). Balanced class sampling.
LabeledDataset generate(const DatasetSpec& spec, Rng& rng);

/// Affine map to [-1,1] per dimension (degenerate dimensions map to 0),
/// recorded in `normalization`; component means are mapped along. When
/// renoise is false, Gaussian noise of std noise_std is baked in once here;
/// otherwise noise is expected per batch draw via noisy_batch.
void preprocess(LabeledDataset& ds, Rng& rng, double noise_std = 0.03,
                bool renoise = true);

/// Row subset with fresh noise (the per-batch re-noising path).
Tensor noisy_batch(const LabeledDataset& ds, const std::vector<std::size_t>& idx,
                   Rng& rng, double noise_std);

struct SplitDataset {
    LabeledDataset train, val;
};
/// Seeded-permutation split; stable across runs and platforms.
SplitDataset split(const LabeledDataset& ds, double val_fraction,
                   std::uint64_t seed);

LabeledDataset load_csv(const std::string& path);
LabeledDataset load_jtb(const std::string& path);
LabeledDataset load_file(const std::string& path, const std::string& format);
void save_csv(const LabeledDataset& ds, const std::string& path);
void save_jtb(const LabeledDataset& ds, const std::string& path);

}  // namespace jem

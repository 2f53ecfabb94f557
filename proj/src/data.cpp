#include "jem/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace jem {

DatasetSpec::Generator generator_from_name(const std::string& name) {
    if (name == "gauss_mixture") return DatasetSpec::GaussMixture;
    if (name == "rings") return DatasetSpec::Rings;
    if (name == "spirals") return DatasetSpec::Spirals;
    if (name == "checkerboard") return DatasetSpec::Checkerboard;
    if (name == "file") return DatasetSpec::File;
    throw ConfigError("unknown dataset generator: " + name);
}

std::string generator_name(DatasetSpec::Generator g) {
    switch (g) {
        case DatasetSpec::GaussMixture: return "gauss_mixture";
        case DatasetSpec::Rings: return "rings";
        case DatasetSpec::Spirals: return "spirals";
        case DatasetSpec::Checkerboard: return "checkerboard";
        case DatasetSpec::File: return "file";
    }
    return "?";
}

namespace {

// Component means for a K-class mixture: classes on a circle for K != 4,
// grid corners for K == 4 (the acceptance-toy layout).
std::vector<Tensor> mixture_means(int k, double scale) {
    std::vector<Tensor> means;
    if (k == 4) {
        for (double sx : {-1.0, 1.0})
            for (double sy : {-1.0, 1.0})
                means.push_back(Tensor({2}, {sx * scale, sy * scale}));
    } else {
        for (int c = 0; c < k; ++c) {
            double t = 2.0 * M_PI * c / k;
            means.push_back(Tensor({2}, {scale * std::cos(t), scale * std::sin(t)}));
        }
    }
    return means;
}

}  // namespace

LabeledDataset generate(const DatasetSpec& spec, Rng& rng) {
    if (spec.generator == DatasetSpec::File)
        return load_file(spec.path, spec.format);
    if (spec.k < 1) throw ConfigError("dataset: k must be >= 1");
    if (spec.n < 1) throw ConfigError("dataset: n must be >= 1");

    LabeledDataset ds;
    ds.name = generator_name(spec.generator);
    ds.num_classes = spec.k;
    ds.inputs = Tensor({std::size_t(spec.n), 2});
    ds.labels.resize(spec.n);

    switch (spec.generator) {
        case DatasetSpec::GaussMixture: {
            ds.component_means = mixture_means(spec.k, spec.scale);
            ds.component_sigma = spec.sigma;
            for (int c = 0; c < int(ds.component_means.size()); ++c)
                ds.component_class.push_back(c % spec.k);
            for (int i = 0; i < spec.n; ++i) {
                int c = i % int(ds.component_means.size());  // balanced
                ds.labels[i] = ds.component_class[c];
                const Tensor& mu = ds.component_means[c];
                ds.inputs.at(i, 0) = mu.data[0] + spec.sigma * rng.gaussian();
                ds.inputs.at(i, 1) = mu.data[1] + spec.sigma * rng.gaussian();
            }
            break;
        }
        case DatasetSpec::Rings: {
            for (int i = 0; i < spec.n; ++i) {
                int c = i % spec.k;
                double r = spec.scale * (1.0 + c);
                double t = rng.uniform(0, 2.0 * M_PI);
                ds.labels[i] = c;
                ds.inputs.at(i, 0) = r * std::cos(t) + spec.sigma * rng.gaussian();
                ds.inputs.at(i, 1) = r * std::sin(t) + spec.sigma * rng.gaussian();
            }
            break;
        }
        case DatasetSpec::Spirals: {
            for (int i = 0; i < spec.n; ++i) {
                int c = i % spec.k;
                double u = rng.uniform();
                double r = spec.scale * (0.2 + 1.8 * u);
                double t = 3.0 * M_PI * u + 2.0 * M_PI * c / spec.k;
                ds.labels[i] = c;
                ds.inputs.at(i, 0) = r * std::cos(t) + spec.sigma * rng.gaussian();
                ds.inputs.at(i, 1) = r * std::sin(t) + spec.sigma * rng.gaussian();
            }
            break;
        }
        case DatasetSpec::Checkerboard: {
            int cells = spec.cells;
            if (cells < spec.k)
                throw ConfigError("checkerboard: fewer cells than classes");
            // cells x cells grid over [-scale, scale]^2, class = (i+j) mod k
            double w = 2.0 * spec.scale / cells;
            for (int i = 0; i < spec.n; ++i) {
                int ci = int(rng.below(cells));
                int cj = int(rng.below(cells));
                ds.labels[i] = (ci + cj) % spec.k;
                double cx = -spec.scale + (ci + 0.5) * w;
                double cy = -spec.scale + (cj + 0.5) * w;
                ds.inputs.at(i, 0) = cx + rng.uniform(-w / 2, w / 2);
                ds.inputs.at(i, 1) = cy + rng.uniform(-w / 2, w / 2);
            }
            for (int ci = 0; ci < cells; ++ci)
                for (int cj = 0; cj < cells; ++cj) {
                    double cx = -spec.scale + (ci + 0.5) * w;
                    double cy = -spec.scale + (cj + 0.5) * w;
                    ds.component_means.push_back(Tensor({2}, {cx, cy}));
                    ds.component_class.push_back((ci + cj) % spec.k);
                }
            ds.component_sigma = w / 2;
            break;
        }
        case DatasetSpec::File:
            break;  // handled above
    }
    return ds;
}

void preprocess(LabeledDataset& ds, Rng& rng, double noise_std, bool renoise) {
    if (!ds.inputs.finite()) throw DimensionError("preprocess: non-finite inputs");
    const std::size_t n = ds.inputs.rows(), d = ds.inputs.cols();
    ds.normalization.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        double lo = ds.inputs.at(0, j), hi = lo;
        for (std::size_t i = 1; i < n; ++i) {
            lo = std::min(lo, ds.inputs.at(i, j));
            hi = std::max(hi, ds.inputs.at(i, j));
        }
        ds.normalization[j] = {lo, hi};
        for (std::size_t i = 0; i < n; ++i) {
            double v = ds.inputs.at(i, j);
            ds.inputs.at(i, j) = hi == lo ? 0.0 : -1.0 + 2.0 * (v - lo) / (hi - lo);
        }
        for (auto& mu : ds.component_means)
            mu.data[j] = ds.normalization[j].second == ds.normalization[j].first
                             ? 0.0
                             : -1.0 + 2.0 * (mu.data[j] - lo) / (hi - lo);
    }
    // component sigma scales with the tightest axis map; good enough for the
    // 3-sigma sample-quality checks on (near) isotropic generators
    if (!ds.normalization.empty() && ds.component_sigma > 0) {
        double smin = 0;
        bool first = true;
        for (auto [lo, hi] : ds.normalization)
            if (hi > lo) {
                double f = 2.0 / (hi - lo);
                smin = first ? f : std::min(smin, f);
                first = false;
            }
        if (!first) ds.component_sigma *= smin;
    }
    if (!renoise && noise_std > 0)
        for (auto& v : ds.inputs.data) v += noise_std * rng.gaussian();
}

Tensor noisy_batch(const LabeledDataset& ds, const std::vector<std::size_t>& idx,
                   Rng& rng, double noise_std) {
    const std::size_t d = ds.dim();
    Tensor out({idx.size(), d});
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < d; ++j)
            out.at(i, j) = ds.inputs.at(idx[i], j) + noise_std * rng.gaussian();
    return out;
}

SplitDataset split(const LabeledDataset& ds, double val_fraction,
                   std::uint64_t seed) {
    const std::size_t n = ds.size();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng = Rng::derive(seed, 0x5917);
    for (std::size_t i = n; i > 1; --i)
        std::swap(perm[i - 1], perm[rng.below(i)]);
    std::size_t n_val = std::size_t(std::llround(val_fraction * double(n)));
    auto take = [&](std::size_t lo, std::size_t hi) {
        LabeledDataset out = ds;
        out.inputs = Tensor({hi - lo, ds.dim()});
        out.labels.assign(hi - lo, 0);
        for (std::size_t i = lo; i < hi; ++i) {
            out.inputs.set_row(i - lo, ds.inputs.row(perm[i]));
            out.labels[i - lo] = ds.labels[perm[i]];
        }
        return out;
    };
    return {take(n_val, n), take(0, n_val)};
}

// ---- CSV ----

LabeledDataset load_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("csv: cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw ParseError("csv: empty file " + path);
    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) cols.push_back(tok);
    }
    int label_col = -1;
    for (std::size_t i = 0; i < cols.size(); ++i)
        if (cols[i] == "label") label_col = int(i);
    if (label_col < 0) throw ParseError("csv: no 'label' column in header");

    LabeledDataset ds;
    ds.name = path;
    std::vector<double> values;
    std::size_t d = cols.size() - 1;
    std::size_t n = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::size_t c = 0;
        while (std::getline(ss, tok, ',')) {
            double v;
            try {
                v = std::stod(tok);
            } catch (...) {
                throw ParseError("csv: bad number '" + tok + "'");
            }
            if (int(c) == label_col)
                ds.labels.push_back(int(v));
            else
                values.push_back(v);
            ++c;
        }
        if (c != cols.size()) throw ParseError("csv: row width != header width");
        ++n;
    }
    if (n == 0) throw ParseError("csv: no data rows");
    ds.inputs = Tensor({n, d}, std::move(values));
    ds.num_classes = 0;
    for (int y : ds.labels) ds.num_classes = std::max(ds.num_classes, y + 1);
    return ds;
}

void save_csv(const LabeledDataset& ds, const std::string& path) {
    std::ofstream f(path);
    const std::size_t d = ds.dim();
    f << "label";
    for (std::size_t j = 0; j < d; ++j) f << ",x" << j;
    f << "\n";
    f.precision(17);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        f << ds.labels[i];
        for (std::size_t j = 0; j < d; ++j) f << "," << ds.inputs.at(i, j);
        f << "\n";
    }
}

// ---- JTB: "JTB1", u32 N, u32 D, u32 K, N*D f32 features, N u32 labels ----

namespace {

void put_u32(std::ofstream& f, std::uint32_t v) {
    unsigned char b[4] = {(unsigned char)(v), (unsigned char)(v >> 8),
                          (unsigned char)(v >> 16), (unsigned char)(v >> 24)};
    f.write(reinterpret_cast<char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& f) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4))
        throw ParseError("jtb: truncated file");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

void put_f32(std::ofstream& f, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(f, u);
}

float get_f32(std::ifstream& f) {
    std::uint32_t u = get_u32(f);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

}  // namespace

void save_jtb(const LabeledDataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("jtb: cannot open " + path + " for writing");
    f.write("JTB1", 4);
    put_u32(f, std::uint32_t(ds.size()));
    put_u32(f, std::uint32_t(ds.dim()));
    put_u32(f, std::uint32_t(ds.num_classes));
    for (double v : ds.inputs.data) put_f32(f, float(v));
    for (int y : ds.labels) put_u32(f, std::uint32_t(y));
}

LabeledDataset load_jtb(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("jtb: cannot open " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, "JTB1", 4) != 0)
        throw ParseError("jtb: bad magic");
    std::uint32_t n = get_u32(f), d = get_u32(f), k = get_u32(f);
    LabeledDataset ds;
    ds.name = path;
    ds.num_classes = int(k);
    ds.inputs = Tensor({n, d});
    for (auto& v : ds.inputs.data) v = double(get_f32(f));
    ds.labels.resize(n);
    for (auto& y : ds.labels) {
        std::uint32_t u = get_u32(f);
        if (u >= k) throw ParseError("jtb: label out of range");
        y = int(u);
    }
    return ds;
}

LabeledDataset load_file(const std::string& path, const std::string& format) {
    if (format == "csv") return load_csv(path);
    if (format == "jtb") return load_jtb(path);
    throw ConfigError("unknown dataset format: " + format);
}

}  // namespace jem

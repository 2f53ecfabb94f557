#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace jem {

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense row-major tensor of doubles. Rank is 1 or 2 everywhere in this
/// project; a rank-1 tensor of length D is treated as a single row where a
/// batch is expected.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s)
        : shape(std::move(s)), data(numel_of(shape), 0.0) {}
    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (numel_of(shape) != data.size())
            throw DimensionError("tensor shape/data size mismatch");
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto d : s) n *= d;
        return n;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    // Batch view: rank-1 [D] reads as one row of width D.
    std::size_t rows() const { return rank() <= 1 ? 1 : shape[0]; }
    std::size_t cols() const {
        if (rank() == 0) return numel();
        return rank() == 1 ? shape[0] : shape[1];
    }

    double& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    Tensor row(std::size_t i) const {
        std::size_t c = cols();
        Tensor r({c});
        for (std::size_t j = 0; j < c; ++j) r.data[j] = at(i, j);
        return r;
    }

    void set_row(std::size_t i, const Tensor& r) {
        std::size_t c = cols();
        if (r.numel() != c) throw DimensionError("set_row width mismatch");
        for (std::size_t j = 0; j < c; ++j) at(i, j) = r.data[j];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape == b.shape && a.data == b.data;
    }
};

inline double l2_norm(const Tensor& t) {
    double s = 0;
    for (double v : t.data) s += v * v;
    return std::sqrt(s);
}

inline double linf_norm(const Tensor& t) {
    double m = 0;
    for (double v : t.data) m = std::max(m, std::fabs(v));
    return m;
}

}  // namespace jem

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "jem/energy.hpp"
#include "jem/rng.hpp"

namespace jem {

/// Raised when a chain or a loss goes non-finite. The trainer catches it and
/// runs the recovery ladder.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class InitDist { UniformBox, Normal };

struct SamplerConfig {
    double alpha = 1.0;   // step size
    double sigma = 0.01;  // per-step noise std (ignored in proper mode)
    int eta = 20;         // SGLD steps per transition
    double rho = 0.05;    // chain reinitialization probability
    InitDist init = InitDist::UniformBox;
    // Proper mode: drift (alpha/2)*grad, noise std sqrt(alpha). Improper
    // (default): drift alpha*grad, noise std sigma.
    bool proper_mode = false;

    double drift_coef() const { return proper_mode ? alpha / 2.0 : alpha; }
    double noise_std() const { return proper_mode ? std::sqrt(alpha) : sigma; }
};

/// Fixed-capacity ring of persistent chain states. Fresh draws overwrite in
/// ring order once full; non-finite states never get stored.
struct ReplayBuffer {
    std::size_t capacity = 10000;
    std::vector<Tensor> slots;
    std::size_t write_cursor = 0;
    std::uint64_t transition_counter = 0;

    explicit ReplayBuffer(std::size_t cap = 10000) : capacity(cap) {}
    std::size_t size() const { return slots.size(); }
};

/// Batched gradient of an (unnormalized) log-density; lets tests inject
/// analytic energies.
using GradLogP = std::function<Tensor(const Tensor& x_batch)>;

GradLogP unconditional_grad(const JemModel& m);
GradLogP conditional_grad(const JemModel& m, std::vector<int> ys);

Tensor p0_draw(InitDist init, std::size_t dim, Rng& rng);

/// One SGLD step on a batch (or single state). Throws DivergenceError on a
/// non-finite gradient; nothing is clipped.
Tensor sgld_step(const GradLogP& grad, const Tensor& x, const SamplerConfig& cfg,
                 Rng& rng);
Tensor sgld_step(const JemModel& m, const Tensor& x, const SamplerConfig& cfg,
                 Rng& rng, std::optional<int> conditional_y = std::nullopt);

/// Runs `steps` SGLD steps from x, sequential rng.
Tensor sgld_chain(const GradLogP& grad, Tensor x, const SamplerConfig& cfg,
                  Rng& rng, int steps);

struct InitBatch {
    Tensor states;                  // [n, dim]
    std::vector<std::size_t> slots; // originating / target buffer slot per chain
    std::vector<char> fresh;        // 1 when drawn from p0
};

/// Algorithm-level chain initialization: each state comes from a uniformly
/// random buffer slot with probability 1-rho, else fresh from p0. Fresh
/// draws claim a write slot (append until capacity, then ring order).
InitBatch draw_init(ReplayBuffer& buf, const SamplerConfig& cfg, Rng& rng,
                    std::size_t n, std::size_t dim);

/// Persistent contrastive divergence transition: draw_init, eta SGLD steps
/// per chain (parallel, per-chain rng substreams), write finite finals back
/// to their slots. Divergent chains leave a fresh p0 draw in their slot and
/// the divergence is reported after the buffer is sanitized.
Tensor pcd_transition(const JemModel& m, ReplayBuffer& buf,
                      const SamplerConfig& cfg, Rng& rng, std::size_t n,
                      const std::vector<int>* conditional_y = nullptr);

/// Unconditional samples from fresh chains (method 2).
Tensor sample_px_method2(const JemModel& m, const SamplerConfig& cfg, Rng& rng,
                         int steps, std::size_t n);

struct LabeledSamples {
    Tensor states;
    std::vector<int> labels;
};

/// Class-conditional sampling (method 1): draw y from the prior, run a chain
/// with conditional drift, discard or keep y as the caller likes.
LabeledSamples sample_px_method1(const JemModel& m, const SamplerConfig& cfg,
                                 Rng& rng, int steps, std::size_t n,
                                 const std::vector<double>& class_prior = {});

// Parallel/serial kernel pair; pcd_transition and the samplers route through
// the parallel one. Results are bit-identical by construction (per-chain rng
// substreams, serialized write-back).
void run_chains_parallel(const JemModel& m, Tensor& states,
                         const SamplerConfig& cfg, std::uint64_t base_seed,
                         std::uint64_t counter, const std::vector<int>* cond_y,
                         std::vector<char>& diverged);
void run_chains_serial(const JemModel& m, Tensor& states,
                       const SamplerConfig& cfg, std::uint64_t base_seed,
                       std::uint64_t counter, const std::vector<int>* cond_y,
                       std::vector<char>& diverged);

void set_threads(int n);

}  // namespace jem

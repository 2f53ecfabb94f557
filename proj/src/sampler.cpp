#include "jem/sampler.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace jem {

void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

GradLogP unconditional_grad(const JemModel& m) {
    return [&m](const Tensor& x) { return grad_logp_x(m, x); };
}

GradLogP conditional_grad(const JemModel& m, std::vector<int> ys) {
    return [&m, ys = std::move(ys)](const Tensor& x) {
        if (ys.size() == 1 && x.rows() > 1) {
            std::vector<int> rep(x.rows(), ys[0]);
            return grad_logp_x_conditional(m, x, rep);
        }
        return grad_logp_x_conditional(m, x, ys);
    };
}

Tensor p0_draw(InitDist init, std::size_t dim, Rng& rng) {
    Tensor x({dim});
    for (auto& v : x.data)
        v = init == InitDist::UniformBox ? rng.uniform(-1.0, 1.0) : rng.gaussian();
    return x;
}

Tensor sgld_step(const GradLogP& grad, const Tensor& x, const SamplerConfig& cfg,
                 Rng& rng) {
    Tensor g = grad(x);
    if (!g.finite())
        throw DivergenceError("sgld_step: non-finite gradient");
    const double a = cfg.drift_coef();
    const double s = cfg.noise_std();
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i)
        out.data[i] = x.data[i] + a * g.data[i] + s * rng.gaussian();
    return out;
}

Tensor sgld_step(const JemModel& m, const Tensor& x, const SamplerConfig& cfg,
                 Rng& rng, std::optional<int> conditional_y) {
    if (conditional_y)
        return sgld_step(conditional_grad(m, {*conditional_y}), x, cfg, rng);
    return sgld_step(unconditional_grad(m), x, cfg, rng);
}

Tensor sgld_chain(const GradLogP& grad, Tensor x, const SamplerConfig& cfg,
                  Rng& rng, int steps) {
    for (int t = 0; t < steps; ++t) x = sgld_step(grad, x, cfg, rng);
    return x;
}

InitBatch draw_init(ReplayBuffer& buf, const SamplerConfig& cfg, Rng& rng,
                    std::size_t n, std::size_t dim) {
    InitBatch out;
    out.states = Tensor({n, dim});
    out.slots.resize(n);
    out.fresh.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        bool fresh = buf.size() == 0 || rng.uniform() < cfg.rho;
        out.fresh[i] = fresh ? 1 : 0;
        if (fresh) {
            Tensor x = p0_draw(cfg.init, dim, rng);
            std::size_t slot;
            if (buf.size() < buf.capacity) {
                slot = buf.size();
                buf.slots.push_back(x);
            } else {
                slot = buf.write_cursor;
                buf.write_cursor = (buf.write_cursor + 1) % buf.capacity;
                buf.slots[slot] = x;
            }
            out.slots[i] = slot;
            out.states.set_row(i, x);
        } else {
            std::size_t slot = rng.below(buf.size());
            out.slots[i] = slot;
            out.states.set_row(i, buf.slots[slot]);
        }
    }
    return out;
}

namespace {

// One chain, eta steps, own rng substream. Returns false on divergence.
bool evolve_chain(const JemModel& m, Tensor& state, const SamplerConfig& cfg,
                  Rng rng, const int* y) {
    GradLogP grad = y ? conditional_grad(m, {*y}) : unconditional_grad(m);
    for (int t = 0; t < cfg.eta; ++t) {
        Tensor g = grad(state);
        if (!g.finite()) return false;
        const double a = cfg.drift_coef();
        const double s = cfg.noise_std();
        for (std::size_t i = 0; i < state.numel(); ++i)
            state.data[i] += a * g.data[i] + s * rng.gaussian();
        if (!state.finite()) return false;
    }
    return true;
}

}  // namespace

void run_chains_serial(const JemModel& m, Tensor& states,
                       const SamplerConfig& cfg, std::uint64_t base_seed,
                       std::uint64_t counter, const std::vector<int>* cond_y,
                       std::vector<char>& diverged) {
    const std::size_t n = states.rows();
    diverged.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        Tensor s = states.row(i);
        const int* y = cond_y ? &(*cond_y)[i] : nullptr;
        bool ok = evolve_chain(m, s, cfg, Rng::derive(base_seed, counter, i), y);
        if (ok)
            states.set_row(i, s);
        else
            diverged[i] = 1;
    }
}

void run_chains_parallel(const JemModel& m, Tensor& states,
                         const SamplerConfig& cfg, std::uint64_t base_seed,
                         std::uint64_t counter, const std::vector<int>* cond_y,
                         std::vector<char>& diverged) {
    const std::size_t n = states.rows();
    diverged.assign(n, 0);
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < (long long)n; ++i) {
        Tensor s = states.row(i);
        const int* y = cond_y ? &(*cond_y)[i] : nullptr;
        bool ok = evolve_chain(m, s, cfg, Rng::derive(base_seed, counter, i), y);
        if (ok)
            states.set_row(i, s);
        else
            diverged[i] = 1;
    }
}

Tensor pcd_transition(const JemModel& m, ReplayBuffer& buf,
                      const SamplerConfig& cfg, Rng& rng, std::size_t n,
                      const std::vector<int>* conditional_y) {
    const std::size_t dim = m.net.input_dim;
    const std::uint64_t counter = buf.transition_counter++;
    InitBatch init = draw_init(buf, cfg, rng, n, dim);
    std::uint64_t base_seed = rng.next_u64();

    std::vector<char> diverged;
    run_chains_parallel(m, init.states, cfg, base_seed, counter, conditional_y,
                        diverged);

    // Serialized write-back in chain order; divergent slots are refilled
    // from p0 and never hold a non-finite state.
    bool any_diverged = false;
    Rng refill = Rng::derive(base_seed, counter, 0xFFFFFFFFull);
    for (std::size_t i = 0; i < n; ++i) {
        if (diverged[i]) {
            any_diverged = true;
            Tensor fresh = p0_draw(cfg.init, dim, refill);
            buf.slots[init.slots[i]] = fresh;
            init.states.set_row(i, fresh);
        } else {
            buf.slots[init.slots[i]] = init.states.row(i);
        }
    }
    if (any_diverged)
        throw DivergenceError("pcd_transition: chain diverged");
    return init.states;
}

Tensor sample_px_method2(const JemModel& m, const SamplerConfig& cfg, Rng& rng,
                         int steps, std::size_t n) {
    const std::size_t dim = m.net.input_dim;
    Tensor states({n, dim});
    for (std::size_t i = 0; i < n; ++i)
        states.set_row(i, p0_draw(cfg.init, dim, rng));
    SamplerConfig c = cfg;
    c.eta = steps;
    std::uint64_t base_seed = rng.next_u64();
    std::vector<char> diverged;
    run_chains_parallel(m, states, c, base_seed, 0, nullptr, diverged);
    for (std::size_t i = 0; i < n; ++i)
        if (diverged[i]) throw DivergenceError("sample_px_method2: chain diverged");
    return states;
}

LabeledSamples sample_px_method1(const JemModel& m, const SamplerConfig& cfg,
                                 Rng& rng, int steps, std::size_t n,
                                 const std::vector<double>& class_prior) {
    const std::size_t k = m.num_classes;
    std::vector<double> prior = class_prior;
    if (prior.empty()) prior.assign(k, 1.0 / double(k));
    if (prior.size() != k)
        throw DimensionError("sample_px_method1: prior size != num_classes");
    // cumulative for inverse-cdf draws
    std::vector<double> cum(k);
    double acc = 0;
    for (std::size_t c = 0; c < k; ++c) {
        acc += prior[c];
        cum[c] = acc;
    }
    LabeledSamples out;
    out.labels.resize(n);
    const std::size_t dim = m.net.input_dim;
    out.states = Tensor({n, dim});
    for (std::size_t i = 0; i < n; ++i) {
        double u = rng.uniform() * acc;
        int y = int(k) - 1;
        for (std::size_t c = 0; c < k; ++c)
            if (u < cum[c]) {
                y = int(c);
                break;
            }
        out.labels[i] = y;
        out.states.set_row(i, p0_draw(cfg.init, dim, rng));
    }
    SamplerConfig c = cfg;
    c.eta = steps;
    std::uint64_t base_seed = rng.next_u64();
    std::vector<char> diverged;
    run_chains_parallel(m, out.states, c, base_seed, 0, &out.labels, diverged);
    for (std::size_t i = 0; i < n; ++i)
        if (diverged[i]) throw DivergenceError("sample_px_method1: chain diverged");
    return out;
}

}  // namespace jem

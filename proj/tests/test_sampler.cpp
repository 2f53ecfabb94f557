#include <doctest.h>

#include <cmath>
#include <set>

#include "jem/sampler.hpp"
#include "test_util.hpp"

using namespace jem;
using namespace jemtest;

namespace {

const GradLogP kStandardNormal = [](const Tensor& x) {
    Tensor g = x;
    for (auto& v : g.data) v = -v;
    return g;
};

const GradLogP kZeroGrad = [](const Tensor& x) { return Tensor(x.shape); };

JemModel toy_model(std::uint64_t seed) {
    return JemModel::wrap(random_mlp(seed, 2, 3, 2, 6, LayerDesc::Softplus));
}

}  // namespace

TEST_CASE("sgld_step applies drift and scaled noise exactly") {
    SamplerConfig cfg;
    cfg.alpha = 0.5;
    cfg.sigma = 0.01;
    Tensor x({1, 2}, {0.2, -0.4});
    Rng rng(7);
    Rng shadow = rng;  // replays the identical noise draws
    Tensor got = sgld_step(kStandardNormal, x, cfg, rng);
    for (std::size_t i = 0; i < 2; ++i) {
        double want = x.data[i] + 0.5 * (-x.data[i]) + 0.01 * shadow.gaussian();
        CHECK(got.data[i] == want);
    }
}

TEST_CASE("sgld_step: zero gradient leaves pure noise displacement") {
    SamplerConfig cfg;
    cfg.sigma = 0.3;
    Tensor x({1, 3}, {1, 2, 3});
    Rng rng(11);
    Rng shadow = rng;
    Tensor got = sgld_step(kZeroGrad, x, cfg, rng);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(got.data[i] == x.data[i] + 0.3 * shadow.gaussian());
}

TEST_CASE("proper mode uses alpha/2 drift and sqrt(alpha) noise") {
    SamplerConfig cfg;
    cfg.alpha = 0.04;
    cfg.proper_mode = true;
    CHECK(cfg.drift_coef() == doctest::Approx(0.02));
    CHECK(cfg.noise_std() == doctest::Approx(0.2));

    Tensor x({1, 1}, {1.0});
    Rng rng(3);
    Rng shadow = rng;
    Tensor got = sgld_step(kStandardNormal, x, cfg, rng);
    CHECK(got.data[0] == 1.0 + 0.02 * (-1.0) + 0.2 * shadow.gaussian());
}

TEST_CASE("sgld_step raises on non-finite gradient") {
    GradLogP bad = [](const Tensor& x) {
        Tensor g(x.shape);
        g.data[0] = std::numeric_limits<double>::quiet_NaN();
        return g;
    };
    SamplerConfig cfg;
    Rng rng(0);
    CHECK_THROWS_AS(sgld_step(bad, Tensor({1, 2}, {0, 0}), cfg, rng),
                    DivergenceError);
}

TEST_CASE("sgld_chain is deterministic under a fixed seed") {
    SamplerConfig cfg;
    cfg.alpha = 0.1;
    cfg.sigma = 0.05;
    Tensor x0({2, 2}, {0.1, 0.2, -0.3, 0.4});
    Rng a(42), b(42);
    Tensor r1 = sgld_chain(kStandardNormal, x0, cfg, a, 50);
    Tensor r2 = sgld_chain(kStandardNormal, x0, cfg, b, 50);
    CHECK(r1 == r2);
    Rng c(43);
    Tensor r3 = sgld_chain(kStandardNormal, x0, cfg, c, 50);
    CHECK_FALSE(r1 == r3);
}

TEST_CASE("proper SGLD on a standard normal reaches unit variance") {
    // short stationarity probe; the long pinned run lives in the acceptance
    // suite
    SamplerConfig cfg;
    cfg.alpha = 0.01;
    cfg.proper_mode = true;
    Rng rng(123);
    double x = 0, sum = 0, sumsq = 0;
    const int burn = 20000, steps = 200000;
    for (int t = 0; t < burn + steps; ++t) {
        Tensor state({1, 1}, {x});
        x = sgld_step(kStandardNormal, state, cfg, rng).data[0];
        if (t >= burn) {
            sum += x;
            sumsq += x * x;
        }
    }
    double mean = sum / steps;
    double var = sumsq / steps - mean * mean;
    CHECK(std::fabs(mean) < 0.1);
    CHECK(std::fabs(var - 1.0) < 0.12);
}

TEST_CASE("p0_draw: uniform box stays inside [-1,1], normal varies") {
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        Tensor u = p0_draw(InitDist::UniformBox, 2, rng);
        REQUIRE(u.numel() == 2);
        for (double v : u.data) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
    }
    Tensor n1 = p0_draw(InitDist::Normal, 3, rng);
    Tensor n2 = p0_draw(InitDist::Normal, 3, rng);
    CHECK_FALSE(n1 == n2);
}

TEST_CASE("draw_init: rho=1 always draws fresh, rho=0 reuses a full buffer") {
    SamplerConfig cfg;
    cfg.rho = 1.0;
    ReplayBuffer buf(8);
    Rng rng(9);
    InitBatch b = draw_init(buf, cfg, rng, 5, 2);
    CHECK(b.states.rows() == 5);
    for (char f : b.fresh) CHECK(f == 1);
    CHECK(buf.size() == 5);  // appended

    cfg.rho = 0.0;
    InitBatch c = draw_init(buf, cfg, rng, 4, 2);
    for (char f : c.fresh) CHECK(f == 0);
    for (std::size_t i = 0; i < 4; ++i) {
        REQUIRE(c.slots[i] < buf.size());
        CHECK(c.states.row(i) == buf.slots[c.slots[i]]);
    }
    CHECK(buf.size() == 5);  // reuse adds nothing
}

TEST_CASE("draw_init: fresh draws append until capacity then follow ring order") {
    SamplerConfig cfg;
    cfg.rho = 1.0;
    ReplayBuffer buf(3);
    Rng rng(21);
    draw_init(buf, cfg, rng, 3, 2);
    CHECK(buf.size() == 3);
    CHECK(buf.write_cursor == 0);

    InitBatch b = draw_init(buf, cfg, rng, 4, 2);
    CHECK(buf.size() == 3);  // capacity never exceeded
    // ring: slots 0,1,2,0
    REQUIRE(b.slots.size() == 4);
    CHECK(b.slots[0] == 0);
    CHECK(b.slots[1] == 1);
    CHECK(b.slots[2] == 2);
    CHECK(b.slots[3] == 0);
    CHECK(buf.write_cursor == 1);
}

TEST_CASE("draw_init mixes fresh and buffer draws at intermediate rho") {
    SamplerConfig cfg;
    cfg.rho = 0.5;
    ReplayBuffer buf(100);
    Rng seed_rng(33);
    // prefill
    cfg.rho = 1.0;
    draw_init(buf, cfg, seed_rng, 50, 2);
    cfg.rho = 0.5;
    std::size_t fresh = 0, total = 2000;
    Rng rng(77);
    for (std::size_t i = 0; i < total / 10; ++i) {
        InitBatch b = draw_init(buf, cfg, rng, 10, 2);
        for (char f : b.fresh) fresh += (f == 1);
    }
    double frac = double(fresh) / double(total);
    CHECK(frac > 0.45);
    CHECK(frac < 0.55);
}

TEST_CASE("pcd_transition is deterministic and conserves the buffer") {
    JemModel m = toy_model(1);
    SamplerConfig cfg;
    cfg.alpha = 0.05;
    cfg.sigma = 0.01;
    cfg.eta = 10;
    cfg.rho = 0.2;

    auto run = [&](std::uint64_t seed) {
        ReplayBuffer buf(64);
        Rng rng(seed);
        std::vector<Tensor> outs;
        for (int t = 0; t < 5; ++t)
            outs.push_back(pcd_transition(m, buf, cfg, rng, 16));
        return std::make_pair(outs, buf);
    };
    auto [outs_a, buf_a] = run(10);
    auto [outs_b, buf_b] = run(10);
    for (std::size_t t = 0; t < outs_a.size(); ++t) CHECK(outs_a[t] == outs_b[t]);
    REQUIRE(buf_a.size() == buf_b.size());
    for (std::size_t i = 0; i < buf_a.size(); ++i)
        CHECK(buf_a.slots[i] == buf_b.slots[i]);

    CHECK(buf_a.size() <= 64);
    CHECK(buf_a.transition_counter == 5);
    for (const Tensor& s : buf_a.slots) CHECK(s.finite());
}

TEST_CASE("pcd_transition writes chain finals back to their slots") {
    JemModel m = toy_model(2);
    SamplerConfig cfg;
    cfg.alpha = 0.05;
    cfg.eta = 5;
    cfg.rho = 1.0;  // all fresh, slots 0..n-1
    ReplayBuffer buf(32);
    Rng rng(4);
    Tensor out = pcd_transition(m, buf, cfg, rng, 8);
    REQUIRE(buf.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) CHECK(out.row(i) == buf.slots[i]);
}

TEST_CASE("pcd_transition sanitizes the buffer before reporting divergence") {
    // huge step size blows the chains up
    JemModel m = toy_model(3);
    for (auto& p : m.net.params)
        for (auto& v : p.data) v *= 1e6;
    SamplerConfig cfg;
    cfg.alpha = 1e300;
    cfg.eta = 5;
    cfg.rho = 1.0;
    ReplayBuffer buf(16);
    Rng rng(8);
    CHECK_THROWS_AS(pcd_transition(m, buf, cfg, rng, 8), DivergenceError);
    for (const Tensor& s : buf.slots) CHECK(s.finite());
}

TEST_CASE("parallel and serial chain kernels agree bitwise") {
    JemModel m = toy_model(6);
    SamplerConfig cfg;
    cfg.alpha = 0.1;
    cfg.sigma = 0.02;
    cfg.eta = 25;
    Rng rng(55);
    Tensor init({12, 2});
    for (auto& v : init.data) v = rng.uniform(-1, 1);

    Tensor par = init, ser = init;
    std::vector<char> div_p(12, 0), div_s(12, 0);
    run_chains_parallel(m, par, cfg, 0xFEED, 7, nullptr, div_p);
    run_chains_serial(m, ser, cfg, 0xFEED, 7, nullptr, div_s);
    CHECK(par == ser);
    CHECK(div_p == div_s);

    // conditional drift path too
    std::vector<int> ys = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2};
    Tensor par_c = init, ser_c = init;
    run_chains_parallel(m, par_c, cfg, 0xFEED, 8, &ys, div_p);
    run_chains_serial(m, ser_c, cfg, 0xFEED, 8, &ys, div_s);
    CHECK(par_c == ser_c);
}

TEST_CASE("chain results do not depend on batch composition") {
    // chain i is a function of (base_seed, counter, i) and its start state
    JemModel m = toy_model(7);
    SamplerConfig cfg;
    cfg.eta = 10;
    cfg.alpha = 0.05;
    Tensor four({4, 2}, {0.1, 0.2, 0.3, 0.4, -0.1, -0.2, -0.3, -0.4});
    Tensor two({2, 2}, {0.1, 0.2, 0.3, 0.4});
    std::vector<char> d4(4, 0), d2(2, 0);
    Tensor a = four, b = two;
    run_chains_parallel(m, a, cfg, 99, 0, nullptr, d4);
    run_chains_parallel(m, b, cfg, 99, 0, nullptr, d2);
    for (std::size_t i = 0; i < 2; ++i) CHECK(a.row(i) == b.row(i));
}

TEST_CASE("sample_px_method2 returns the requested batch of finite states") {
    JemModel m = toy_model(9);
    SamplerConfig cfg;
    cfg.alpha = 0.05;
    cfg.eta = 1;
    Rng rng(12);
    Tensor s = sample_px_method2(m, cfg, rng, 30, 7);
    CHECK(s.rows() == 7);
    CHECK(s.cols() == 2);
    CHECK(s.finite());
}

TEST_CASE("sample_px_method1 respects a degenerate class prior") {
    JemModel m = toy_model(10);
    SamplerConfig cfg;
    cfg.alpha = 0.05;
    cfg.eta = 1;
    Rng rng(13);
    LabeledSamples s = sample_px_method1(m, cfg, rng, 10, 20, {0.0, 1.0, 0.0});
    REQUIRE(s.labels.size() == 20);
    for (int y : s.labels) CHECK(y == 1);
    CHECK(s.states.rows() == 20);

    // uniform default prior covers every class eventually
    LabeledSamples u = sample_px_method1(m, cfg, rng, 5, 60);
    std::set<int> seen(u.labels.begin(), u.labels.end());
    CHECK(seen.size() == 3);
}

TEST_CASE("conditional drift differs from unconditional drift") {
    JemModel m = toy_model(14);
    Tensor x({2, 2}, {0.3, -0.2, 0.5, 0.1});
    Tensor gu = unconditional_grad(m)(x);
    Tensor gc = conditional_grad(m, {0, 1})(x);
    CHECK_FALSE(gu == gc);
    CHECK(gu.finite());
    CHECK(gc.finite());
}

TEST_CASE("gaussian drift target: long chain mean contracts toward the mode") {
    GradLogP shifted = [](const Tensor& x) {
        Tensor g = x;
        for (auto& v : g.data) v = -(v - 2.0);  // N(2, 1)
        return g;
    };
    SamplerConfig cfg;
    cfg.alpha = 0.05;
    cfg.proper_mode = true;
    Rng rng(31);
    Tensor x({64, 1});
    for (auto& v : x.data) v = rng.uniform(-1, 1);
    x = sgld_chain(shifted, x, cfg, rng, 2000);
    double mean = 0;
    for (double v : x.data) mean += v;
    mean /= double(x.numel());
    CHECK(std::fabs(mean - 2.0) < 0.5);
}

// Compares the OpenMP chain kernel against the serial reference and checks
// that both produce identical trajectories.

#include <chrono>
#include <cstdio>

#include "jem/sampler.hpp"

using namespace jem;

namespace {

double time_ms(const std::function<void()>& fn) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
    int n_chains = argc > 1 ? std::atoi(argv[1]) : 256;
    int eta = argc > 2 ? std::atoi(argv[2]) : 20;
    int reps = argc > 3 ? std::atoi(argv[3]) : 5;

    Rng rng(7);
    Network net = Network::mlp(2, 4, 2, 64, LayerDesc::Softplus, rng);
    JemModel m = JemModel::wrap(std::move(net));

    SamplerConfig cfg;
    cfg.alpha = 0.1;
    cfg.sigma = 0.01;
    cfg.eta = eta;

    Tensor base({std::size_t(n_chains), 2});
    for (auto& v : base.data) v = rng.uniform(-1, 1);

    double t_serial = 0, t_parallel = 0;
    Tensor serial_out, parallel_out;
    for (int r = 0; r < reps; ++r) {
        std::vector<char> div;
        Tensor s1 = base;
        t_serial += time_ms(
            [&] { run_chains_serial(m, s1, cfg, 42, r, nullptr, div); });
        Tensor s2 = base;
        t_parallel += time_ms(
            [&] { run_chains_parallel(m, s2, cfg, 42, r, nullptr, div); });
        serial_out = s1;
        parallel_out = s2;
    }

    bool identical = serial_out == parallel_out;
    std::printf("chains=%d eta=%d reps=%d\n", n_chains, eta, reps);
    std::printf("serial   %.2f ms/rep\n", t_serial / reps);
    std::printf("parallel %.2f ms/rep\n", t_parallel / reps);
    std::printf("speedup  %.2fx\n", t_serial / t_parallel);
    std::printf("bit-identical: %s\n", identical ? "yes" : "NO");
    return identical ? 0 : 1;
}

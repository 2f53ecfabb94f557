#pragma once

#include "jem/data.hpp"
#include "jem/sampler.hpp"

namespace jem {

struct AttackConfig {
    enum Norm { L2, Linf } norm = Linf;
    int pgd_iters = 40;
    int restarts = 20;
    int eot_samples = 5;
    int refine_steps = 0;   // defense k
    int bsearch_iters = 12;
    double eps_max = 0;       // 0 = whole-box default: 2 (Linf), 2*sqrt(D) (L2)
    double step_factor = 2.5; // PGD step = step_factor * eps / pgd_iters
    SamplerConfig sampler;    // refinement dynamics
};

AttackConfig::Norm norm_from_name(const std::string& name);
std::string norm_name(AttackConfig::Norm n);

constexpr double kEpsInf = std::numeric_limits<double>::infinity();

/// k unconditional SGLD steps seeded at x (the refinement defense); k=0 is
/// the identity.
Tensor refine(const JemModel& m, const Tensor& x, int k, const SamplerConfig& cfg,
              Rng& rng);

/// Mean of log p(y|x_i) over n independent refinements of x. With k=0 the
/// refinements are all x itself and this is the base log-softmax.
Tensor eot_logits(const JemModel& m, const Tensor& x, int n, int k,
                  const SamplerConfig& cfg, Rng& rng);

int eot_predict(const JemModel& m, const Tensor& x, int n, int k,
                const SamplerConfig& cfg, Rng& rng);

/// First-order EOT gradient of the attack loss -mean_i log p(y|x_i) with
/// respect to x: noise draws are frozen per backward pass and d x_i / d x is
/// taken as identity, so no second derivatives enter.
Tensor eot_loss_grad(const JemModel& m, const Tensor& x, int y_true, int n, int k,
                     const SamplerConfig& cfg, Rng& rng);

/// Majority over 5 fresh stochastic evaluations of the defended model.
bool misclassified_majority(const JemModel& m, const Tensor& x, int y_true,
                            const AttackConfig& ac, Rng& rng);

/// Minimal adversarial radius by outer binary search over eps with an inner
/// restarted PGD on the EOT loss. Returns 0 when x is already misclassified
/// and +inf when even the eps_max attack fails.
double pgd_minimal_eps(const JemModel& m, const Tensor& x, int y_true,
                       const AttackConfig& ac, Rng& rng,
                       Tensor* adversarial_out = nullptr);

/// Gradient-free baseline: salt-and-pepper corruption to find a
/// misclassified seed, then greedy coordinate resets/shrinks toward the
/// original while staying misclassified. Returns the final perturbation norm
/// or +inf when no misclassified seed exists.
double pointwise_attack(const JemModel& m, const Tensor& x, int y_true,
                        const AttackConfig& ac, Rng& rng);

/// Accuracy of the k_eval-step defended model on a stored adversarial set.
double transfer_eval(const JemModel& m, const LabeledDataset& adv,
                     int k_eval, const AttackConfig& ac, Rng& rng);

struct DistalResult {
    Tensor x;
    double confidence = 0;
    std::vector<double> trajectory;
    bool reached = false;
};

/// Gradient ascent on log p(y_target|x) from a p0 draw, projected to the
/// data box; stops at conf_target or max_iters.
DistalResult distal_generate(const JemModel& m, int y_target, double conf_target,
                             int max_iters, Rng& rng, double step_size = 0.05,
                             InitDist init = InitDist::UniformBox);

struct RobustnessCurve {
    std::vector<double> min_eps;  // per attacked input, inf when attack failed
    // accuracy-vs-eps points derived from min_eps (non-increasing)
    std::vector<std::pair<double, double>> points;
};

RobustnessCurve robustness_curve(std::vector<double> min_eps);

/// Attacks up to n_inputs correctly-classified-or-not inputs from ds with
/// per-input rng substreams; embarrassingly parallel.
std::vector<double> attack_dataset(const JemModel& m, const LabeledDataset& ds,
                                   const AttackConfig& ac, std::uint64_t seed,
                                   std::size_t n_inputs,
                                   std::vector<Tensor>* adv_out = nullptr);

}  // namespace jem

#pragma once

#include <deque>
#include <functional>
#include <optional>

#include "jem/data.hpp"
#include "jem/sampler.hpp"

namespace jem {

struct TrainConfig {
    double lr = 1e-4;
    double decay_factor = 0.3;
    std::vector<int> decay_epochs{50, 100};
    int epochs = 150;
    int batch_size = 64;
    SamplerConfig sampler;
    std::size_t buffer_capacity = 10000;
    enum Objective { JointFactored, ConditionalFactored } objective = JointFactored;
    double gen_weight = 1.0;
    double divergence_threshold = 100.0;
    int divergence_window = 50;
    int max_restarts = 3;
    double noise_std = 0.03;
    bool renoise = true;
};

TrainConfig::Objective objective_from_name(const std::string& name);
std::string objective_name(TrainConfig::Objective o);

struct AdamState {
    std::vector<Tensor> m, v;
    long t = 0;
};

/// Adam with bias correction; standard coefficients.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
               AdamState& st, double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

struct TrainState {
    int epoch = 0;
    long step = 0;
    AdamState adam;
    std::deque<double> gap_window;  // recent |E(neg)-E(data)| values
    int restarts = 0;
    double lr_recover_scale = 1.0;
    int eta_recover_scale = 1;
    std::uint64_t seed = 0;
    Rng rng;
};

struct TrainSnapshot {
    Network net;
    TrainState state;
    ReplayBuffer buffer;
};

struct EpochMetrics {
    int epoch = 0;
    double train_acc = 0, val_acc = 0;
    double e_data_mean = 0, e_neg_mean = 0;
    double l_clf = 0, l_gen = 0;
    double lr = 0;
    int restarts = 0;
};

struct LossValues {
    double l_clf = 0, l_gen = 0;
};

/// Joint loss values on a batch. L_clf = mean xent; L_gen = mean lse(neg) -
/// mean lse(data), so minimizing raises log p~ on data and lowers it on
/// negatives.
LossValues loss_terms(const JemModel& m, const Tensor& batch_x,
                      const std::vector<int>& batch_y, const Tensor& negatives);

/// p(x|y)+p(y) factored objective: contrastive term directly on f(x)[y] plus
/// the (theta-independent) empirical log-prior.
double loss_terms_conditional(const JemModel& m, const Tensor& batch_x,
                              const std::vector<int>& batch_y,
                              const Tensor& negatives,
                              const std::vector<int>& negatives_y,
                              const std::vector<double>& class_prior);

struct TrainHooks {
    // test instrumentation
    std::function<void(long step, Tensor& batch_x)> batch_hook;
    std::function<void(long step, double& gap)> gap_hook;
    // checkpoint/metrics sinks
    std::function<void(const TrainSnapshot&, const EpochMetrics&)> on_epoch;
};

struct TrainingFailedError : std::runtime_error {
    explicit TrainingFailedError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainResult {
    JemModel model;
    ReplayBuffer buffer{0};
    TrainState state;
    std::vector<EpochMetrics> metrics;
};

/// Applies one rung of the recovery ladder to a restored snapshot:
/// restart 0 reseeds, restart 1 halves the learning rate, restart 2 doubles
/// the SGLD step count; further restarts cycle.
void recover(TrainSnapshot& snap, const TrainConfig& cfg);

/// Algorithm-level training loop: per step, data batch -> pcd_transition ->
/// loss -> Adam; staircase lr decay; divergence detection with
/// checkpoint-restore recovery. Resumable bit-exactly from an epoch
/// snapshot.
TrainResult train(JemModel m, const LabeledDataset& train_ds,
                  const LabeledDataset& val_ds, const TrainConfig& cfg,
                  std::uint64_t seed, const TrainHooks& hooks = {},
                  std::optional<TrainSnapshot> resume = std::nullopt);

double staircase_lr(const TrainConfig& cfg, int epoch);

}  // namespace jem

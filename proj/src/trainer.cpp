#include "jem/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "jem/eval.hpp"

namespace jem {

TrainConfig::Objective objective_from_name(const std::string& name) {
    if (name == "joint_factored") return TrainConfig::JointFactored;
    if (name == "conditional_factored") return TrainConfig::ConditionalFactored;
    throw ConfigError("unknown objective: " + name);
}

std::string objective_name(TrainConfig::Objective o) {
    return o == TrainConfig::JointFactored ? "joint_factored"
                                           : "conditional_factored";
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
               AdamState& st, double lr, double beta1, double beta2, double eps) {
    if (st.m.empty()) {
        for (const auto& p : params) {
            st.m.push_back(Tensor(p.shape));
            st.v.push_back(Tensor(p.shape));
        }
    }
    st.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, double(st.t));
    const double bc2 = 1.0 - std::pow(beta2, double(st.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        for (std::size_t j = 0; j < params[i].numel(); ++j) {
            double g = grads[i].data[j];
            double& m = st.m[i].data[j];
            double& v = st.v[i].data[j];
            m = beta1 * m + (1 - beta1) * g;
            v = beta2 * v + (1 - beta2) * g * g;
            params[i].data[j] -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
        }
    }
}

double staircase_lr(const TrainConfig& cfg, int epoch) {
    double lr = cfg.lr;
    for (int e : cfg.decay_epochs)
        if (epoch >= e) lr *= cfg.decay_factor;
    return lr;
}

namespace {

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    const std::size_t d = a.cols();
    if (b.cols() != d) throw DimensionError("concat_rows: width mismatch");
    Tensor out({a.rows() + b.rows(), d});
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.numel());
    return out;
}

struct StepResult {
    double l_clf = 0, l_gen = 0, total = 0;
    double e_data = 0, e_neg = 0;
    std::vector<Tensor> grads;
};

// One recorded pass over [data; negatives]. Negatives enter as plain inputs,
// so no gradient flows through the sampling trajectory that produced them.
StepResult joint_pass(const JemModel& m, const Tensor& bx,
                      const std::vector<int>& by, const Tensor& neg,
                      double gen_weight, bool want_grads) {
    const std::size_t n = bx.rows(), nm = neg.rows();
    Tape tape;
    std::vector<Tape::NodeId> pids;
    Tape::NodeId x_all = tape.leaf(concat_rows(bx, neg));
    Tape::NodeId logits = m.net.forward_on_tape(tape, x_all, &pids);
    Tape::NodeId lse = tape.logsumexp_rows(logits);
    Tape::NodeId logsm = tape.sub_cols(logits, lse);

    std::vector<int> padded(n + nm, 0);
    Tensor mask_clf({n + nm});
    std::size_t labeled = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (by[i] >= 0) ++labeled;
    for (std::size_t i = 0; i < n; ++i) {
        if (by[i] >= 0) {
            padded[i] = by[i];
            mask_clf.data[i] = 1.0 / double(labeled);
        }
    }
    Tensor mask_gen({n + nm});
    for (std::size_t i = 0; i < n; ++i) mask_gen.data[i] = -1.0 / double(n);
    for (std::size_t i = 0; i < nm; ++i) mask_gen.data[n + i] = 1.0 / double(nm);

    Tape::NodeId l_clf = tape.scale(
        tape.sum(tape.mul(tape.select_rows(logsm, padded), tape.leaf(mask_clf))),
        -1.0);
    Tape::NodeId l_gen = tape.sum(tape.mul(lse, tape.leaf(mask_gen)));
    Tape::NodeId total = tape.add(l_clf, tape.scale(l_gen, gen_weight));

    StepResult r;
    r.l_clf = labeled ? tape.value(l_clf).data[0] : 0.0;
    r.l_gen = tape.value(l_gen).data[0];
    r.total = tape.value(total).data[0];
    const Tensor& lse_v = tape.value(lse);
    for (std::size_t i = 0; i < n; ++i) r.e_data -= lse_v.data[i] / double(n);
    for (std::size_t i = 0; i < nm; ++i) r.e_neg -= lse_v.data[n + i] / double(nm);
    if (want_grads) {
        tape.backward(total);
        for (auto id : pids) r.grads.push_back(tape.grad(id));
    }
    return r;
}

StepResult conditional_pass(const JemModel& m, const Tensor& bx,
                            const std::vector<int>& by, const Tensor& neg,
                            const std::vector<int>& neg_y,
                            const std::vector<double>& prior, bool want_grads) {
    const std::size_t n = bx.rows(), nm = neg.rows();
    Tape tape;
    std::vector<Tape::NodeId> pids;
    Tape::NodeId x_all = tape.leaf(concat_rows(bx, neg));
    Tape::NodeId logits = m.net.forward_on_tape(tape, x_all, &pids);
    Tape::NodeId lse = tape.logsumexp_rows(logits);

    std::vector<int> all_y(by);
    all_y.insert(all_y.end(), neg_y.begin(), neg_y.end());
    Tensor mask({n + nm});
    for (std::size_t i = 0; i < n; ++i) mask.data[i] = -1.0 / double(n);
    for (std::size_t i = 0; i < nm; ++i) mask.data[n + i] = 1.0 / double(nm);
    Tape::NodeId contrastive =
        tape.sum(tape.mul(tape.select_rows(logits, all_y), tape.leaf(mask)));

    StepResult r;
    double prior_term = 0;  // -mean log p(y); constant in theta
    for (std::size_t i = 0; i < n; ++i)
        prior_term -= std::log(std::max(prior[by[i]], 1e-300)) / double(n);
    r.l_gen = tape.value(contrastive).data[0];
    r.l_clf = prior_term;
    r.total = r.l_gen + prior_term;
    const Tensor& lse_v = tape.value(lse);
    for (std::size_t i = 0; i < n; ++i) r.e_data -= lse_v.data[i] / double(n);
    for (std::size_t i = 0; i < nm; ++i) r.e_neg -= lse_v.data[n + i] / double(nm);
    if (want_grads) {
        tape.backward(contrastive);
        for (auto id : pids) r.grads.push_back(tape.grad(id));
    }
    return r;
}

bool grads_finite(const std::vector<Tensor>& gs) {
    for (const auto& g : gs)
        if (!g.finite()) return false;
    return true;
}

}  // namespace

LossValues loss_terms(const JemModel& m, const Tensor& batch_x,
                      const std::vector<int>& batch_y, const Tensor& negatives) {
    StepResult r = joint_pass(m, batch_x, batch_y, negatives, 1.0, false);
    if (!std::isfinite(r.total)) throw DivergenceError("loss_terms: non-finite loss");
    return {r.l_clf, r.l_gen};
}

double loss_terms_conditional(const JemModel& m, const Tensor& batch_x,
                              const std::vector<int>& batch_y,
                              const Tensor& negatives,
                              const std::vector<int>& negatives_y,
                              const std::vector<double>& class_prior) {
    StepResult r = conditional_pass(m, batch_x, batch_y, negatives, negatives_y,
                                    class_prior, false);
    if (!std::isfinite(r.total))
        throw DivergenceError("loss_terms_conditional: non-finite loss");
    return r.total;
}

void recover(TrainSnapshot& snap, const TrainConfig& cfg) {
    (void)cfg;
    int rung = snap.state.restarts % 3;
    switch (rung) {
        case 0:  // restart from checkpoint with a different seed
            snap.state.seed =
                Rng::derive(snap.state.seed, 0xCEED, snap.state.restarts + 1)
                    .next_u64();
            snap.state.rng = Rng(snap.state.seed);
            break;
        case 1:
            snap.state.lr_recover_scale *= 0.5;
            break;
        case 2:
            snap.state.eta_recover_scale *= 2;
            break;
    }
    snap.state.restarts += 1;
    snap.state.gap_window.clear();
}

TrainResult train(JemModel m, const LabeledDataset& train_ds,
                  const LabeledDataset& val_ds, const TrainConfig& cfg,
                  std::uint64_t seed, const TrainHooks& hooks,
                  std::optional<TrainSnapshot> resume) {
    if (train_ds.size() == 0) throw DimensionError("train: empty dataset");

    TrainSnapshot cur;
    if (resume) {
        cur = std::move(*resume);
    } else {
        cur.net = std::move(m.net);
        cur.buffer = ReplayBuffer(cfg.buffer_capacity);
        cur.state.seed = seed;
        cur.state.rng = Rng::derive(seed, 0x7124);
    }
    TrainSnapshot last_good = cur;

    // empirical class prior for the conditional-factored objective
    std::vector<double> prior(std::size_t(std::max(train_ds.num_classes, 1)), 0.0);
    for (int y : train_ds.labels)
        if (y >= 0) prior[y] += 1.0;
    {
        double total = 0;
        for (double p : prior) total += p;
        for (double& p : prior) p = total > 0 ? p / total : 1.0 / prior.size();
    }

    const std::size_t n = train_ds.size();
    TrainResult result;

    while (cur.state.epoch < cfg.epochs) {
        TrainSnapshot attempt = cur;  // epoch runs on a copy; divergence rolls back
        try {
            JemModel model;
            model.num_classes = attempt.net.num_classes;
            model.net = std::move(attempt.net);
            TrainState& st = attempt.state;

            std::vector<std::size_t> perm(n);
            for (std::size_t i = 0; i < n; ++i) perm[i] = i;
            for (std::size_t i = n; i > 1; --i)
                std::swap(perm[i - 1], perm[st.rng.below(i)]);

            double sum_lclf = 0, sum_lgen = 0, sum_ed = 0, sum_en = 0;
            std::size_t steps_in_epoch = 0;
            const double lr = staircase_lr(cfg, st.epoch) * st.lr_recover_scale;
            SamplerConfig scfg = cfg.sampler;
            scfg.eta = cfg.sampler.eta * st.eta_recover_scale;

            for (std::size_t off = 0; off < n; off += cfg.batch_size) {
                std::size_t hi = std::min(n, off + std::size_t(cfg.batch_size));
                std::vector<std::size_t> idx(perm.begin() + off, perm.begin() + hi);
                Tensor bx = cfg.renoise
                                ? noisy_batch(train_ds, idx, st.rng, cfg.noise_std)
                                : [&] {
                                      Tensor t({idx.size(), train_ds.dim()});
                                      for (std::size_t i = 0; i < idx.size(); ++i)
                                          t.set_row(i, train_ds.inputs.row(idx[i]));
                                      return t;
                                  }();
                std::vector<int> by(idx.size());
                for (std::size_t i = 0; i < idx.size(); ++i)
                    by[i] = train_ds.labels[idx[i]];
                if (hooks.batch_hook) hooks.batch_hook(st.step, bx);

                StepResult sr;
                if (cfg.objective == TrainConfig::JointFactored) {
                    Tensor neg = pcd_transition(model, attempt.buffer, scfg,
                                                st.rng, idx.size());
                    sr = joint_pass(model, bx, by, neg, cfg.gen_weight, true);
                } else {
                    std::vector<int> neg_y(idx.size());
                    for (auto& y : neg_y) {
                        double u = st.rng.uniform();
                        double acc = 0;
                        y = int(prior.size()) - 1;
                        for (std::size_t c = 0; c < prior.size(); ++c) {
                            acc += prior[c];
                            if (u < acc) {
                                y = int(c);
                                break;
                            }
                        }
                    }
                    Tensor neg = pcd_transition(model, attempt.buffer, scfg,
                                                st.rng, idx.size(), &neg_y);
                    sr = conditional_pass(model, bx, by, neg, neg_y, prior, true);
                }

                if (!std::isfinite(sr.total) || !grads_finite(sr.grads))
                    throw DivergenceError("train: non-finite loss or gradient");

                double gap = std::fabs(sr.e_neg - sr.e_data);
                if (hooks.gap_hook) hooks.gap_hook(st.step, gap);
                st.gap_window.push_back(gap);
                while (int(st.gap_window.size()) > cfg.divergence_window)
                    st.gap_window.pop_front();
                if (int(st.gap_window.size()) == cfg.divergence_window) {
                    double mean_gap = 0;
                    for (double g : st.gap_window) mean_gap += g;
                    mean_gap /= st.gap_window.size();
                    if (mean_gap > cfg.divergence_threshold)
                        throw DivergenceError("train: energy gap exceeded threshold");
                }

                adam_step(model.net.params, sr.grads, st.adam, lr);
                st.step += 1;
                sum_lclf += sr.l_clf;
                sum_lgen += sr.l_gen;
                sum_ed += sr.e_data;
                sum_en += sr.e_neg;
                ++steps_in_epoch;
            }

            st.epoch += 1;
            attempt.net = std::move(model.net);

            EpochMetrics em;
            em.epoch = st.epoch;
            {
                JemModel frozen;
                frozen.num_classes = attempt.net.num_classes;
                frozen.net = attempt.net;
                em.train_acc = accuracy(frozen, train_ds);
                em.val_acc = val_ds.size() ? accuracy(frozen, val_ds) : 0.0;
            }
            em.e_data_mean = sum_ed / double(steps_in_epoch);
            em.e_neg_mean = sum_en / double(steps_in_epoch);
            em.l_clf = sum_lclf / double(steps_in_epoch);
            em.l_gen = sum_lgen / double(steps_in_epoch);
            em.lr = lr;
            em.restarts = st.restarts;
            result.metrics.push_back(em);

            cur = std::move(attempt);
            last_good = cur;
            if (hooks.on_epoch) hooks.on_epoch(cur, em);
        } catch (const DivergenceError&) {
            if (cur.state.restarts >= cfg.max_restarts)
                throw TrainingFailedError(
                    "train: divergence persisted past max_restarts (epoch " +
                    std::to_string(cur.state.epoch) + ")");
            cur = last_good;
            recover(cur, cfg);
            last_good = cur;
        }
    }

    result.model.num_classes = cur.net.num_classes;
    result.model.net = std::move(cur.net);
    result.buffer = std::move(cur.buffer);
    result.state = std::move(cur.state);
    return result;
}

}  // namespace jem

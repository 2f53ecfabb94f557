#include "jem/robustness.hpp"

#include <algorithm>
#include <cmath>

namespace jem {

AttackConfig::Norm norm_from_name(const std::string& name) {
    if (name == "l2" || name == "L2") return AttackConfig::L2;
    if (name == "linf" || name == "Linf") return AttackConfig::Linf;
    throw ConfigError("unknown norm: " + name);
}

std::string norm_name(AttackConfig::Norm n) {
    return n == AttackConfig::L2 ? "l2" : "linf";
}

Tensor refine(const JemModel& m, const Tensor& x, int k, const SamplerConfig& cfg,
              Rng& rng) {
    if (k == 0) return x;
    return sgld_chain(unconditional_grad(m), x, cfg, rng, k);
}

namespace {

Tensor stack_refinements(const JemModel& m, const Tensor& x, int n, int k,
                         const SamplerConfig& cfg, Rng& rng) {
    const std::size_t d = x.numel();
    if (k == 0) n = 1;  // all refinements would be identical
    Tensor pts({std::size_t(n), d});
    for (int i = 0; i < n; ++i)
        pts.set_row(i, refine(m, x, k, cfg, rng));
    return pts;
}

void clamp_box(Tensor& x) {
    for (auto& v : x.data) v = std::clamp(v, -1.0, 1.0);
}

void project_ball(Tensor& x, const Tensor& center, AttackConfig::Norm norm,
                  double eps) {
    if (norm == AttackConfig::Linf) {
        for (std::size_t i = 0; i < x.numel(); ++i)
            x.data[i] = std::clamp(x.data[i], center.data[i] - eps,
                                   center.data[i] + eps);
    } else {
        double d2 = 0;
        for (std::size_t i = 0; i < x.numel(); ++i) {
            double d = x.data[i] - center.data[i];
            d2 += d * d;
        }
        double d = std::sqrt(d2);
        if (d > eps) {
            double f = eps / d;
            for (std::size_t i = 0; i < x.numel(); ++i)
                x.data[i] = center.data[i] + f * (x.data[i] - center.data[i]);
        }
    }
}

double perturbation_norm(const Tensor& x, const Tensor& center,
                         AttackConfig::Norm norm) {
    Tensor d(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i)
        d.data[i] = x.data[i] - center.data[i];
    return norm == AttackConfig::Linf ? linf_norm(d) : l2_norm(d);
}

double default_eps_max(const AttackConfig& ac, std::size_t dim) {
    if (ac.eps_max > 0) return ac.eps_max;
    return ac.norm == AttackConfig::Linf ? 2.0 : 2.0 * std::sqrt(double(dim));
}

}  // namespace

Tensor eot_logits(const JemModel& m, const Tensor& x, int n, int k,
                  const SamplerConfig& cfg, Rng& rng) {
    Tensor pts = stack_refinements(m, x, n, k, cfg, rng);
    Tensor lp = log_p_y_given_x(m, pts);
    const std::size_t rows = lp.rows(), kk = lp.cols();
    Tensor avg({kk});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < kk; ++c)
            avg.data[c] += lp.at(r, c) / double(rows);
    return avg;
}

int eot_predict(const JemModel& m, const Tensor& x, int n, int k,
                const SamplerConfig& cfg, Rng& rng) {
    Tensor avg = eot_logits(m, x, n, k, cfg, rng);
    int best = 0;
    for (std::size_t c = 1; c < avg.numel(); ++c)
        if (avg.data[c] > avg.data[best]) best = int(c);
    return best;
}

Tensor eot_loss_grad(const JemModel& m, const Tensor& x, int y_true, int n, int k,
                     const SamplerConfig& cfg, Rng& rng) {
    Tensor pts = stack_refinements(m, x, n, k, cfg, rng);
    const std::size_t rows = pts.rows(), d = pts.cols();
    std::vector<int> ys(rows, y_true);
    Tensor g = grad_input(m.net, pts, [&](Tape& t, Tape::NodeId logits) {
        Tape::NodeId lse = t.logsumexp_rows(logits);
        Tape::NodeId logsm = t.sub_cols(logits, lse);
        return t.scale(t.mean(t.select_rows(logsm, ys)), -1.0);
    });
    // dx_i/dx = I: per-sample grads already carry the 1/n from mean
    Tensor out({d});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) out.data[j] += g.at(r, j);
    return out;
}

bool misclassified_majority(const JemModel& m, const Tensor& x, int y_true,
                            const AttackConfig& ac, Rng& rng) {
    if (ac.refine_steps == 0)  // deterministic pipeline, one vote decides
        return eot_predict(m, x, ac.eot_samples, 0, ac.sampler, rng) != y_true;
    int wrong = 0;
    for (int v = 0; v < 5; ++v)
        wrong += eot_predict(m, x, ac.eot_samples, ac.refine_steps, ac.sampler,
                             rng) != y_true;
    return wrong >= 3;
}

namespace {

// One restarted PGD run at a fixed radius. Writes the successful point to
// adv when given.
bool pgd_at_eps(const JemModel& m, const Tensor& x, int y_true,
                const AttackConfig& ac, double eps, Rng& rng, Tensor* adv) {
    const std::size_t d = x.numel();
    const double step = ac.step_factor * eps / double(ac.pgd_iters);
    for (int r = 0; r < ac.restarts; ++r) {
        Tensor cur = x;
        if (ac.norm == AttackConfig::Linf) {
            for (auto& v : cur.data) v += rng.uniform(-eps, eps);
        } else {
            Tensor dir({d});
            for (auto& v : dir.data) v = rng.gaussian();
            double nrm = l2_norm(dir);
            double rad = eps * std::pow(rng.uniform(), 1.0 / double(d));
            if (nrm > 0)
                for (std::size_t i = 0; i < d; ++i)
                    cur.data[i] += rad * dir.data[i] / nrm;
        }
        project_ball(cur, x, ac.norm, eps);
        clamp_box(cur);
        for (int it = 0; it < ac.pgd_iters; ++it) {
            Tensor g = eot_loss_grad(m, cur, y_true, ac.eot_samples,
                                     ac.refine_steps, ac.sampler, rng);
            if (!g.finite()) break;
            if (ac.norm == AttackConfig::Linf) {
                for (std::size_t i = 0; i < d; ++i)
                    cur.data[i] += step * (g.data[i] > 0   ? 1.0
                                           : g.data[i] < 0 ? -1.0
                                                           : 0.0);
            } else {
                double nrm = l2_norm(g);
                if (nrm > 0)
                    for (std::size_t i = 0; i < d; ++i)
                        cur.data[i] += step * g.data[i] / nrm;
            }
            project_ball(cur, x, ac.norm, eps);
            clamp_box(cur);
            // cheap single-vote probe, confirmed by majority below
            if (eot_predict(m, cur, 1, ac.refine_steps, ac.sampler, rng) != y_true &&
                misclassified_majority(m, cur, y_true, ac, rng)) {
                if (adv) *adv = cur;
                return true;
            }
        }
        if (misclassified_majority(m, cur, y_true, ac, rng)) {
            if (adv) *adv = cur;
            return true;
        }
    }
    return false;
}

}  // namespace

double pgd_minimal_eps(const JemModel& m, const Tensor& x, int y_true,
                       const AttackConfig& ac, Rng& rng, Tensor* adversarial_out) {
    if (misclassified_majority(m, x, y_true, ac, rng)) {
        if (adversarial_out) *adversarial_out = x;
        return 0.0;
    }
    const double eps_max = default_eps_max(ac, x.numel());
    Tensor best_adv;
    if (!pgd_at_eps(m, x, y_true, ac, eps_max, rng, &best_adv)) return kEpsInf;
    double lo = 0.0, hi = eps_max;
    for (int it = 0; it < ac.bsearch_iters; ++it) {
        double mid = 0.5 * (lo + hi);
        Tensor adv;
        if (pgd_at_eps(m, x, y_true, ac, mid, rng, &adv)) {
            hi = mid;
            best_adv = adv;
        } else {
            lo = mid;
        }
    }
    if (adversarial_out) *adversarial_out = best_adv;
    return hi;
}

double pointwise_attack(const JemModel& m, const Tensor& x, int y_true,
                        const AttackConfig& ac, Rng& rng) {
    if (misclassified_majority(m, x, y_true, ac, rng)) return 0.0;
    const std::size_t d = x.numel();
    auto is_adv = [&](const Tensor& c) {
        return misclassified_majority(m, c, y_true, ac, rng);
    };

    // salt-and-pepper seed search with growing corruption
    Tensor cur;
    bool found = false;
    for (int trial = 0; trial < 200 && !found; ++trial) {
        double frac = std::min(1.0, 0.05 * (1 + trial / 10));
        Tensor cand = x;
        for (std::size_t i = 0; i < d; ++i)
            if (rng.uniform() < frac)
                cand.data[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;
        if (is_adv(cand)) {
            cur = cand;
            found = true;
        }
    }
    if (!found) return kEpsInf;

    // greedy minimization: reset coordinates to the original, then shrink
    bool improved = true;
    int passes = 0;
    while (improved && passes < 20) {
        improved = false;
        ++passes;
        std::vector<std::size_t> order(d);
        for (std::size_t i = 0; i < d; ++i) order[i] = i;
        for (std::size_t i = d; i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);
        for (std::size_t i : order) {
            if (cur.data[i] == x.data[i]) continue;
            double saved = cur.data[i];
            cur.data[i] = x.data[i];
            if (is_adv(cur)) {
                improved = true;
                continue;
            }
            // halfway toward the original
            cur.data[i] = 0.5 * (saved + x.data[i]);
            if (is_adv(cur)) {
                improved = true;
            } else {
                cur.data[i] = saved;
            }
        }
    }
    return perturbation_norm(cur, x, ac.norm);
}

double transfer_eval(const JemModel& m, const LabeledDataset& adv, int k_eval,
                     const AttackConfig& ac, Rng& rng) {
    if (adv.size() == 0) throw DimensionError("transfer_eval: empty adversarial set");
    AttackConfig ec = ac;
    ec.refine_steps = k_eval;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < adv.size(); ++i) {
        Tensor r = adv.inputs.row(i);
        if (!misclassified_majority(m, r, adv.labels[i], ec, rng)) ++hits;
    }
    return double(hits) / double(adv.size());
}

DistalResult distal_generate(const JemModel& m, int y_target, double conf_target,
                             int max_iters, Rng& rng, double step_size,
                             InitDist init) {
    if (conf_target <= 0 || conf_target >= 1)
        throw ConfigError("distal_generate: conf_target must be in (0,1)");
    DistalResult res;
    res.x = p0_draw(init, m.net.input_dim, rng);
    std::vector<int> ys(1, y_target);
    for (int it = 0; it < max_iters; ++it) {
        Tensor lp = log_p_y_given_x(m, res.x);
        res.confidence = std::exp(lp.data[y_target]);
        res.trajectory.push_back(res.confidence);
        if (res.confidence >= conf_target) {
            res.reached = true;
            return res;
        }
        Tensor g = grad_input(m.net, res.x, [&](Tape& t, Tape::NodeId logits) {
            Tape::NodeId lse = t.logsumexp_rows(logits);
            return t.sum(t.select_rows(t.sub_cols(logits, lse), ys));
        });
        for (std::size_t i = 0; i < res.x.numel(); ++i)
            res.x.data[i] += step_size * g.data[i];
        clamp_box(res.x);
    }
    Tensor lp = log_p_y_given_x(m, res.x);
    res.confidence = std::exp(lp.data[y_target]);
    res.trajectory.push_back(res.confidence);
    res.reached = res.confidence >= conf_target;
    return res;
}

RobustnessCurve robustness_curve(std::vector<double> min_eps) {
    RobustnessCurve c;
    c.min_eps = min_eps;
    std::sort(min_eps.begin(), min_eps.end());
    const double n = double(min_eps.size());
    c.points.push_back({0.0, 1.0 - double(std::count(min_eps.begin(),
                                                     min_eps.end(), 0.0)) /
                                       n});
    for (std::size_t i = 0; i < min_eps.size(); ++i) {
        if (!std::isfinite(min_eps[i])) break;
        if (min_eps[i] == 0.0) continue;
        // accuracy just past eps = fraction of inputs with min_eps > eps
        c.points.push_back({min_eps[i], double(min_eps.size() - i - 1) / n});
    }
    return c;
}

std::vector<double> attack_dataset(const JemModel& m, const LabeledDataset& ds,
                                   const AttackConfig& ac, std::uint64_t seed,
                                   std::size_t n_inputs,
                                   std::vector<Tensor>* adv_out) {
    // identical input choice across defended variants: seeded permutation
    std::vector<std::size_t> perm(ds.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng pick = Rng::derive(seed, 0xA77A);
    for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[pick.below(i)]);
    n_inputs = std::min(n_inputs, ds.size());

    std::vector<double> eps(n_inputs);
    std::vector<Tensor> advs(n_inputs);
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < (long long)n_inputs; ++i) {
        Rng r = Rng::derive(seed, 0xBEEF, i);
        Tensor row = ds.inputs.row(perm[i]);
        eps[i] = pgd_minimal_eps(m, row, ds.labels[perm[i]], ac, r,
                                 adv_out ? &advs[i] : nullptr);
    }
    if (adv_out) *adv_out = std::move(advs);
    return eps;
}

}  // namespace jem

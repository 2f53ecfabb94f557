#pragma once

#include "jem/network.hpp"

namespace jem {

/// Reads a classifier's logits as energies: E(x,y) = -f(x)[y] and
/// E(x) = -logsumexp_y f(x)[y]. Densities stay in unnormalized log form;
/// the partition function is never represented.
struct JemModel {
    Network net;
    std::size_t num_classes = 0;

    static JemModel wrap(Network n) {
        JemModel m;
        m.num_classes = n.num_classes;
        m.net = std::move(n);
        return m;
    }
};

double energy_xy(const JemModel& m, const Tensor& x, int y);
double energy_x(const JemModel& m, const Tensor& x);
inline double log_p_tilde(const JemModel& m, const Tensor& x) {
    return -energy_x(m, x);
}

/// Per-row unnormalized log-density for a batch [N,D] -> [N].
Tensor log_p_tilde_batch(const JemModel& m, const Tensor& x);

/// Log-softmax of the logits, [N,D] -> [N,K] (or [D] -> [K]).
Tensor log_p_y_given_x(const JemModel& m, const Tensor& x);

/// Gradient of log p~(x) with respect to x, batched. Exact: the normalizer
/// is constant in x.
Tensor grad_logp_x(const JemModel& m, const Tensor& x);

/// Gradient of f(x)[y_r] per row (class-conditional log-density gradient).
Tensor grad_logp_x_conditional(const JemModel& m, const Tensor& x,
                               const std::vector<int>& ys);

int predict(const JemModel& m, const Tensor& x_row);

}  // namespace jem

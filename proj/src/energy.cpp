#include "jem/energy.hpp"

#include <cmath>

namespace jem {

double energy_xy(const JemModel& m, const Tensor& x, int y) {
    if (y < 0 || std::size_t(y) >= m.num_classes)
        throw DimensionError("energy_xy: class index out of range");
    Tensor logits = m.net.forward(x);
    return -logits.data[std::size_t(y)];
}

double energy_x(const JemModel& m, const Tensor& x) {
    Tensor logits = m.net.forward(x);
    return -logsumexp(logits);
}

Tensor log_p_tilde_batch(const JemModel& m, const Tensor& x) {
    Tensor logits = m.net.forward(x);
    const std::size_t n = logits.rows(), k = logits.cols();
    Tensor out({n});
    for (std::size_t r = 0; r < n; ++r)
        out.data[r] = logsumexp(logits.data.data() + r * k, k);
    return out;
}

Tensor log_p_y_given_x(const JemModel& m, const Tensor& x) {
    Tensor logits = m.net.forward(x);
    const std::size_t n = logits.rows(), k = logits.cols();
    Tensor out(logits.shape);
    for (std::size_t r = 0; r < n; ++r) {
        double lse = logsumexp(logits.data.data() + r * k, k);
        for (std::size_t c = 0; c < k; ++c)
            out.data[r * k + c] = logits.data[r * k + c] - lse;
    }
    return out;
}

Tensor grad_logp_x(const JemModel& m, const Tensor& x) {
    return grad_input(m.net, x, [](Tape& t, Tape::NodeId logits) {
        return t.sum(t.logsumexp_rows(logits));
    });
}

Tensor grad_logp_x_conditional(const JemModel& m, const Tensor& x,
                               const std::vector<int>& ys) {
    return grad_input(m.net, x, [&](Tape& t, Tape::NodeId logits) {
        return t.sum(t.select_rows(logits, ys));
    });
}

int predict(const JemModel& m, const Tensor& x_row) {
    Tensor logits = m.net.forward(x_row);
    int best = 0;
    for (std::size_t c = 1; c < logits.numel(); ++c)
        if (logits.data[c] > logits.data[best]) best = int(c);
    return best;
}

}  // namespace jem

#include "jem/tape.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace jem {

double logsumexp(const double* v, std::size_t n) {
    double m = v[0];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, v[i]);
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
    return m + std::log(s);
}

double logsumexp(const Tensor& v) { return logsumexp(v.data.data(), v.numel()); }

namespace kernels {

void affine(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& y) {
    const std::size_t n = x.rows(), d = x.cols(), o = w.rows();
    if (w.cols() != d || b.numel() != o)
        throw DimensionError("affine: weight/input dimension mismatch");
    if (x.rank() <= 1)
        y = Tensor({o});
    else
        y = Tensor({n, o});
#pragma omp parallel for schedule(static)
    for (long long ni = 0; ni < (long long)n; ++ni) {
        const double* xr = x.data.data() + ni * d;
        double* yr = y.data.data() + ni * o;
        for (std::size_t oi = 0; oi < o; ++oi) {
            const double* wr = w.data.data() + oi * d;
            double acc = b.data[oi];
            for (std::size_t di = 0; di < d; ++di) acc += xr[di] * wr[di];
            yr[oi] = acc;
        }
    }
}

void tanh_fwd(const Tensor& x, Tensor& y) {
    y = Tensor(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) y.data[i] = std::tanh(x.data[i]);
}

void relu_fwd(const Tensor& x, Tensor& y) {
    y = Tensor(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i)
        y.data[i] = x.data[i] > 0 ? x.data[i] : 0.0;
}

void softplus_fwd(const Tensor& x, Tensor& y) {
    y = Tensor(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        double v = x.data[i];
        // log(1+exp(v)) without overflow
        y.data[i] = v > 30 ? v : std::log1p(std::exp(std::min(v, 30.0)));
    }
}

}  // namespace kernels

Tape::NodeId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
}

Tape::NodeId Tape::leaf(Tensor v) {
    Node n;
    n.op = Op::Leaf;
    n.val = std::move(v);
    return push(std::move(n));
}

Tape::NodeId Tape::affine(NodeId x, NodeId w, NodeId b) {
    Node n;
    n.op = Op::Affine;
    n.a = x;
    n.b = w;
    n.c = b;
    kernels::affine(nodes_[x].val, nodes_[w].val, nodes_[b].val, n.val);
    return push(std::move(n));
}

#define JEM_UNARY(NAME, OPTAG, FWD)                 \
    Tape::NodeId Tape::NAME(NodeId a) {             \
        Node n;                                     \
        n.op = Op::OPTAG;                           \
        n.a = a;                                    \
        FWD;                                        \
        return push(std::move(n));                  \
    }

JEM_UNARY(tanh_, Tanh, kernels::tanh_fwd(nodes_[a].val, n.val))
JEM_UNARY(relu_, Relu, kernels::relu_fwd(nodes_[a].val, n.val))
JEM_UNARY(softplus_, Softplus, kernels::softplus_fwd(nodes_[a].val, n.val))
#undef JEM_UNARY

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    if (!nodes_[a].val.same_shape(nodes_[b].val))
        throw DimensionError("add: shape mismatch");
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.val = Tensor(nodes_[a].val.shape);
    for (std::size_t i = 0; i < n.val.numel(); ++i)
        n.val.data[i] = nodes_[a].val.data[i] + nodes_[b].val.data[i];
    return push(std::move(n));
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
    if (!nodes_[a].val.same_shape(nodes_[b].val))
        throw DimensionError("sub: shape mismatch");
    Node n;
    n.op = Op::Sub;
    n.a = a;
    n.b = b;
    n.val = Tensor(nodes_[a].val.shape);
    for (std::size_t i = 0; i < n.val.numel(); ++i)
        n.val.data[i] = nodes_[a].val.data[i] - nodes_[b].val.data[i];
    return push(std::move(n));
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
    if (!nodes_[a].val.same_shape(nodes_[b].val))
        throw DimensionError("mul: shape mismatch");
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.val = Tensor(nodes_[a].val.shape);
    for (std::size_t i = 0; i < n.val.numel(); ++i)
        n.val.data[i] = nodes_[a].val.data[i] * nodes_[b].val.data[i];
    return push(std::move(n));
}

Tape::NodeId Tape::scale(NodeId a, double c) {
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.coef = c;
    n.val = Tensor(nodes_[a].val.shape);
    for (std::size_t i = 0; i < n.val.numel(); ++i)
        n.val.data[i] = c * nodes_[a].val.data[i];
    return push(std::move(n));
}

Tape::NodeId Tape::square(NodeId a) {
    Node n;
    n.op = Op::Square;
    n.a = a;
    n.val = Tensor(nodes_[a].val.shape);
    for (std::size_t i = 0; i < n.val.numel(); ++i) {
        double v = nodes_[a].val.data[i];
        n.val.data[i] = v * v;
    }
    return push(std::move(n));
}

Tape::NodeId Tape::log_(NodeId a) {
    Node n;
    n.op = Op::Log;
    n.a = a;
    n.val = Tensor(nodes_[a].val.shape);
    for (std::size_t i = 0; i < n.val.numel(); ++i)
        n.val.data[i] = std::log(nodes_[a].val.data[i]);
    return push(std::move(n));
}

Tape::NodeId Tape::exp_(NodeId a) {
    Node n;
    n.op = Op::Exp;
    n.a = a;
    n.val = Tensor(nodes_[a].val.shape);
    for (std::size_t i = 0; i < n.val.numel(); ++i)
        n.val.data[i] = std::exp(nodes_[a].val.data[i]);
    return push(std::move(n));
}

Tape::NodeId Tape::sum(NodeId a) {
    Node n;
    n.op = Op::Sum;
    n.a = a;
    double s = 0;
    for (double v : nodes_[a].val.data) s += v;
    n.val = Tensor({1}, {s});
    return push(std::move(n));
}

Tape::NodeId Tape::mean(NodeId a) {
    Node n;
    n.op = Op::Mean;
    n.a = a;
    double s = 0;
    for (double v : nodes_[a].val.data) s += v;
    n.val = Tensor({1}, {s / double(nodes_[a].val.numel())});
    return push(std::move(n));
}

Tape::NodeId Tape::logsumexp_rows(NodeId a) {
    const Tensor& x = nodes_[a].val;
    const std::size_t rows = x.rows(), k = x.cols();
    Node n;
    n.op = Op::LogSumExpRows;
    n.a = a;
    n.val = Tensor({rows});
    for (std::size_t r = 0; r < rows; ++r)
        n.val.data[r] = logsumexp(x.data.data() + r * k, k);
    return push(std::move(n));
}

Tape::NodeId Tape::select_rows(NodeId a, std::vector<int> labels) {
    const Tensor& x = nodes_[a].val;
    const std::size_t rows = x.rows(), k = x.cols();
    if (labels.size() != rows)
        throw DimensionError("select_rows: label count != rows");
    Node n;
    n.op = Op::SelectRows;
    n.a = a;
    n.val = Tensor({rows});
    for (std::size_t r = 0; r < rows; ++r) {
        int y = labels[r];
        if (y < 0 || std::size_t(y) >= k)
            throw DimensionError("select_rows: label out of range");
        n.val.data[r] = x.at(r, y);
    }
    n.labels = std::move(labels);
    return push(std::move(n));
}

Tape::NodeId Tape::sub_cols(NodeId x, NodeId v) {
    const Tensor& xv = nodes_[x].val;
    const Tensor& vv = nodes_[v].val;
    if (vv.numel() != xv.rows()) throw DimensionError("sub_cols: row mismatch");
    Node n;
    n.op = Op::SubCols;
    n.a = x;
    n.b = v;
    n.val = Tensor(xv.shape);
    const std::size_t k = xv.cols();
    for (std::size_t r = 0; r < xv.rows(); ++r)
        for (std::size_t c = 0; c < k; ++c)
            n.val.data[r * k + c] = xv.data[r * k + c] - vv.data[r];
    return push(std::move(n));
}

void Tape::backward(NodeId out) {
    if (nodes_[out].val.numel() != 1)
        throw UnsupportedOpError("backward requires a scalar output");
    for (auto& n : nodes_) {
        n.grad = Tensor(n.val.shape);  // zeros
    }
    nodes_[out].grad.data[0] = 1.0;
    for (int id = int(nodes_.size()) - 1; id >= 0; --id) backward_node(id);
}

void Tape::backward_node(int id) {
    Node& n = nodes_[id];
    const Tensor& g = n.grad;
    switch (n.op) {
        case Op::Leaf:
            break;
        case Op::Affine: {
            const Tensor& x = nodes_[n.a].val;
            const Tensor& w = nodes_[n.b].val;
            Tensor& gx = nodes_[n.a].grad;
            Tensor& gw = nodes_[n.b].grad;
            Tensor& gb = nodes_[n.c].grad;
            const std::size_t rows = x.rows(), d = x.cols(), o = w.rows();
            // fixed accumulation order: row-major loops, no parallel reduce
            for (std::size_t r = 0; r < rows; ++r) {
                const double* xr = x.data.data() + r * d;
                const double* gr = g.data.data() + r * o;
                double* gxr = gx.data.data() + r * d;
                for (std::size_t oi = 0; oi < o; ++oi) {
                    const double go = gr[oi];
                    const double* wr = w.data.data() + oi * d;
                    double* gwr = gw.data.data() + oi * d;
                    for (std::size_t di = 0; di < d; ++di) {
                        gxr[di] += go * wr[di];
                        gwr[di] += go * xr[di];
                    }
                    gb.data[oi] += go;
                }
            }
            break;
        }
        case Op::Tanh: {
            Tensor& ga = nodes_[n.a].grad;
            for (std::size_t i = 0; i < g.numel(); ++i)
                ga.data[i] += g.data[i] * (1.0 - n.val.data[i] * n.val.data[i]);
            break;
        }
        case Op::Relu: {
            const Tensor& x = nodes_[n.a].val;
            Tensor& ga = nodes_[n.a].grad;
            // subgradient at 0 is 0
            for (std::size_t i = 0; i < g.numel(); ++i)
                ga.data[i] += x.data[i] > 0 ? g.data[i] : 0.0;
            break;
        }
        case Op::Softplus: {
            const Tensor& x = nodes_[n.a].val;
            Tensor& ga = nodes_[n.a].grad;
            for (std::size_t i = 0; i < g.numel(); ++i) {
                double s = 1.0 / (1.0 + std::exp(-x.data[i]));
                ga.data[i] += g.data[i] * s;
            }
            break;
        }
        case Op::Add: {
            Tensor& ga = nodes_[n.a].grad;
            Tensor& gb = nodes_[n.b].grad;
            for (std::size_t i = 0; i < g.numel(); ++i) {
                ga.data[i] += g.data[i];
                gb.data[i] += g.data[i];
            }
            break;
        }
        case Op::Sub: {
            Tensor& ga = nodes_[n.a].grad;
            Tensor& gb = nodes_[n.b].grad;
            for (std::size_t i = 0; i < g.numel(); ++i) {
                ga.data[i] += g.data[i];
                gb.data[i] -= g.data[i];
            }
            break;
        }
        case Op::Mul: {
            const Tensor& a = nodes_[n.a].val;
            const Tensor& b = nodes_[n.b].val;
            Tensor& ga = nodes_[n.a].grad;
            Tensor& gb = nodes_[n.b].grad;
            for (std::size_t i = 0; i < g.numel(); ++i) {
                ga.data[i] += g.data[i] * b.data[i];
                gb.data[i] += g.data[i] * a.data[i];
            }
            break;
        }
        case Op::Scale: {
            Tensor& ga = nodes_[n.a].grad;
            for (std::size_t i = 0; i < g.numel(); ++i)
                ga.data[i] += n.coef * g.data[i];
            break;
        }
        case Op::Square: {
            const Tensor& a = nodes_[n.a].val;
            Tensor& ga = nodes_[n.a].grad;
            for (std::size_t i = 0; i < g.numel(); ++i)
                ga.data[i] += 2.0 * a.data[i] * g.data[i];
            break;
        }
        case Op::Log: {
            const Tensor& a = nodes_[n.a].val;
            Tensor& ga = nodes_[n.a].grad;
            for (std::size_t i = 0; i < g.numel(); ++i)
                ga.data[i] += g.data[i] / a.data[i];
            break;
        }
        case Op::Exp: {
            Tensor& ga = nodes_[n.a].grad;
            for (std::size_t i = 0; i < g.numel(); ++i)
                ga.data[i] += g.data[i] * n.val.data[i];
            break;
        }
        case Op::Sum: {
            Tensor& ga = nodes_[n.a].grad;
            for (std::size_t i = 0; i < ga.numel(); ++i)
                ga.data[i] += g.data[0];
            break;
        }
        case Op::Mean: {
            Tensor& ga = nodes_[n.a].grad;
            const double inv = 1.0 / double(ga.numel());
            for (std::size_t i = 0; i < ga.numel(); ++i)
                ga.data[i] += g.data[0] * inv;
            break;
        }
        case Op::LogSumExpRows: {
            const Tensor& x = nodes_[n.a].val;
            Tensor& ga = nodes_[n.a].grad;
            const std::size_t rows = x.rows(), k = x.cols();
            for (std::size_t r = 0; r < rows; ++r) {
                const double lse = n.val.data[r];
                for (std::size_t c = 0; c < k; ++c)
                    ga.data[r * k + c] +=
                        g.data[r] * std::exp(x.data[r * k + c] - lse);
            }
            break;
        }
        case Op::SelectRows: {
            Tensor& ga = nodes_[n.a].grad;
            const std::size_t k = nodes_[n.a].val.cols();
            for (std::size_t r = 0; r < n.labels.size(); ++r)
                ga.data[r * k + n.labels[r]] += g.data[r];
            break;
        }
        case Op::SubCols: {
            Tensor& ga = nodes_[n.a].grad;
            Tensor& gb = nodes_[n.b].grad;
            const std::size_t k = nodes_[n.a].val.cols();
            for (std::size_t r = 0; r < nodes_[n.a].val.rows(); ++r)
                for (std::size_t c = 0; c < k; ++c) {
                    ga.data[r * k + c] += g.data[r * k + c];
                    gb.data[r] -= g.data[r * k + c];
                }
            break;
        }
    }
}

}  // namespace jem

#pragma once

#include <vector>

#include "jem/tensor.hpp"

namespace jem {

struct UnsupportedOpError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerically stable log(sum(exp(v))) over a raw span.
double logsumexp(const double* v, std::size_t n);
double logsumexp(const Tensor& v);

// Shared forward kernels. Network::forward and Tape use the same routines so
// the plain and the recorded forward pass are bit-identical.
namespace kernels {
// y[n,o] = sum_d x[n,d] * w[o,d] + b[o]
void affine(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& y);
void tanh_fwd(const Tensor& x, Tensor& y);
void relu_fwd(const Tensor& x, Tensor& y);
void softplus_fwd(const Tensor& x, Tensor& y);
}  // namespace kernels

/// Reverse-mode tape over the primitive set: affine, tanh/relu/softplus,
/// sum, mean, logsumexp (per row), index-select (per row), square, log, exp,
/// plus elementwise add/sub/scale and a column-broadcast subtract used to
/// build log-softmax. One reverse pass per recorded graph.
class Tape {
  public:
    using NodeId = int;

    NodeId leaf(Tensor v);
    NodeId affine(NodeId x, NodeId w, NodeId b);
    NodeId tanh_(NodeId a);
    NodeId relu_(NodeId a);
    NodeId softplus_(NodeId a);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId square(NodeId a);
    NodeId log_(NodeId a);
    NodeId exp_(NodeId a);
    NodeId sum(NodeId a);   // -> [1]
    NodeId mean(NodeId a);  // -> [1]
    /// [N,K] -> [N], log sum exp over each row.
    NodeId logsumexp_rows(NodeId a);
    /// [N,K] + labels[N] -> [N], picks x[n, labels[n]].
    NodeId select_rows(NodeId a, std::vector<int> labels);
    /// x[N,K] - v[N] broadcast over columns.
    NodeId sub_cols(NodeId x, NodeId v);

    /// Reverse pass from a scalar output. Visits each node once.
    void backward(NodeId out);

    const Tensor& value(NodeId id) const { return nodes_[id].val; }
    const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
    std::size_t size() const { return nodes_.size(); }

  private:
    enum class Op {
        Leaf, Affine, Tanh, Relu, Softplus, Add, Sub, Mul, Scale, Square,
        Log, Exp, Sum, Mean, LogSumExpRows, SelectRows, SubCols,
    };
    struct Node {
        Op op;
        int a = -1, b = -1, c = -1;
        double coef = 0;
        std::vector<int> labels;
        Tensor val;
        Tensor grad;
    };

    NodeId push(Node n);
    void backward_node(int id);

    std::vector<Node> nodes_;
};

}  // namespace jem

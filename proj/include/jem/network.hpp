#pragma once

#include <functional>
#include <string>
#include <vector>

#include "jem/rng.hpp"
#include "jem/tape.hpp"
#include "jem/tensor.hpp"

namespace jem {

struct LayerDesc {
    enum Kind { Affine, Tanh, Relu, Softplus } kind = Affine;
    std::size_t in = 0, out = 0;  // affine only
};

LayerDesc::Kind activation_from_name(const std::string& name);
std::string activation_name(LayerDesc::Kind k);

/// Feed-forward network mapping [N,D] -> [N,K]. Forward is a pure function
/// of (parameters, input); there are no layers with batch statistics.
struct Network {
    std::size_t input_dim = 0;
    std::size_t num_classes = 0;
    std::vector<LayerDesc> layers;
    std::vector<Tensor> params;  // each affine layer contributes W [out,in], then b [out]

    static Network mlp(std::size_t input_dim, std::size_t num_classes,
                       std::size_t hidden_layers, std::size_t width,
                       LayerDesc::Kind act, Rng& rng);

    Tensor forward(const Tensor& x) const;

    /// Records the forward pass on a tape; x_node must already be on it.
    /// When param_ids is non-null the parameter leaf ids are appended in
    /// params order.
    Tape::NodeId forward_on_tape(Tape& tape, Tape::NodeId x_node,
                                 std::vector<Tape::NodeId>* param_ids = nullptr) const;
};

/// Builds a scalar loss from the logits node on the tape.
using LossBuilder = std::function<Tape::NodeId(Tape&, Tape::NodeId logits)>;

struct GradResult {
    double loss = 0;
    Tensor input_grad;
    std::vector<Tensor> param_grads;
};

/// One reverse pass yielding the loss value plus gradients with respect to
/// both the input and every parameter.
GradResult gradients(const Network& net, const Tensor& x, const LossBuilder& loss);

/// Parameter gradients only.
std::vector<Tensor> grad_params(const Network& net, const Tensor& x,
                                const LossBuilder& loss);

/// Input gradient only; parameter gradients are discarded, parameters are
/// untouched.
Tensor grad_input(const Network& net, const Tensor& x, const LossBuilder& loss);

}  // namespace jem

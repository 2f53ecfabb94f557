#include "jem/network.hpp"

#include <cmath>

namespace jem {

LayerDesc::Kind activation_from_name(const std::string& name) {
    if (name == "tanh") return LayerDesc::Tanh;
    if (name == "relu") return LayerDesc::Relu;
    if (name == "softplus") return LayerDesc::Softplus;
    throw UnsupportedOpError("unknown activation: " + name);
}

std::string activation_name(LayerDesc::Kind k) {
    switch (k) {
        case LayerDesc::Tanh: return "tanh";
        case LayerDesc::Relu: return "relu";
        case LayerDesc::Softplus: return "softplus";
        default: return "affine";
    }
}

Network Network::mlp(std::size_t input_dim, std::size_t num_classes,
                     std::size_t hidden_layers, std::size_t width,
                     LayerDesc::Kind act, Rng& rng) {
    Network net;
    net.input_dim = input_dim;
    net.num_classes = num_classes;
    std::size_t in = input_dim;
    auto add_affine = [&](std::size_t out) {
        net.layers.push_back({LayerDesc::Affine, in, out});
        Tensor w({out, in});
        const double std = std::sqrt(2.0 / double(in + out));
        for (auto& v : w.data) v = std * rng.gaussian();
        net.params.push_back(std::move(w));
        net.params.push_back(Tensor({out}));  // zero bias
        in = out;
    };
    for (std::size_t l = 0; l < hidden_layers; ++l) {
        add_affine(width);
        net.layers.push_back({act, 0, 0});
    }
    add_affine(num_classes);
    return net;
}

Tensor Network::forward(const Tensor& x) const {
    if (x.cols() != input_dim)
        throw DimensionError("forward: input width != input_dim");
    if (!x.finite()) throw DimensionError("forward: non-finite input");
    Tensor cur = x;
    std::size_t p = 0;
    Tensor next;
    for (const auto& layer : layers) {
        switch (layer.kind) {
            case LayerDesc::Affine:
                kernels::affine(cur, params[p], params[p + 1], next);
                p += 2;
                break;
            case LayerDesc::Tanh: kernels::tanh_fwd(cur, next); break;
            case LayerDesc::Relu: kernels::relu_fwd(cur, next); break;
            case LayerDesc::Softplus: kernels::softplus_fwd(cur, next); break;
        }
        cur = std::move(next);
    }
    return cur;
}

Tape::NodeId Network::forward_on_tape(Tape& tape, Tape::NodeId x_node,
                                      std::vector<Tape::NodeId>* param_ids) const {
    Tape::NodeId cur = x_node;
    std::size_t p = 0;
    for (const auto& layer : layers) {
        switch (layer.kind) {
            case LayerDesc::Affine: {
                Tape::NodeId w = tape.leaf(params[p]);
                Tape::NodeId b = tape.leaf(params[p + 1]);
                if (param_ids) {
                    param_ids->push_back(w);
                    param_ids->push_back(b);
                }
                cur = tape.affine(cur, w, b);
                p += 2;
                break;
            }
            case LayerDesc::Tanh: cur = tape.tanh_(cur); break;
            case LayerDesc::Relu: cur = tape.relu_(cur); break;
            case LayerDesc::Softplus: cur = tape.softplus_(cur); break;
        }
    }
    return cur;
}

GradResult gradients(const Network& net, const Tensor& x, const LossBuilder& loss) {
    Tape tape;
    Tape::NodeId xn = tape.leaf(x);
    std::vector<Tape::NodeId> pids;
    Tape::NodeId logits = net.forward_on_tape(tape, xn, &pids);
    Tape::NodeId l = loss(tape, logits);
    tape.backward(l);
    GradResult r;
    r.loss = tape.value(l).data[0];
    r.input_grad = tape.grad(xn);
    r.param_grads.reserve(pids.size());
    for (auto id : pids) r.param_grads.push_back(tape.grad(id));
    return r;
}

std::vector<Tensor> grad_params(const Network& net, const Tensor& x,
                                const LossBuilder& loss) {
    return gradients(net, x, loss).param_grads;
}

Tensor grad_input(const Network& net, const Tensor& x, const LossBuilder& loss) {
    return gradients(net, x, loss).input_grad;
}

}  // namespace jem

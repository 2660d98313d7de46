#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "mixpt/nn/tensor.hpp"

namespace mixpt::nn {

struct Var {
    std::uint32_t id = std::numeric_limits<std::uint32_t>::max();

    bool valid() const { return id != std::numeric_limits<std::uint32_t>::max(); }
};

// Dynamic tape for reverse-mode differentiation. Nodes are appended in
// evaluation order, so a reverse sweep over the tape is a valid topological
// order. Parameter leaves accumulate their gradient into Parameter::grad.
//
// Every op checks its output for non-finite values and throws NumericError.
template <typename T>
class Graph {
public:
    explicit Graph(bool record = true) : record_(record) {}

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool recording() const { return record_; }

    // Leaves.
    Var constant(Tensor<T> value);
    Var input(Tensor<T> value);  // differentiable leaf; gradient readable via grad()
    Var param(Parameter<T>& p);

    const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
    const Shape& shape(Var v) const { return nodes_.at(v.id).value.shape; }
    // Empty tensor when no gradient reached the node.
    const Tensor<T>& grad(Var v) const { return nodes_.at(v.id).grad; }
    std::size_t size() const { return nodes_.size(); }

    // a[..., m, k] x b[k, n], or batched b[..., k, n] with matching leading dims.
    Var matmul(Var a, Var b);
    // a[..., m, k] x b[n, k]^T.
    Var matmul_nt(Var a, Var b);
    // Elementwise; b's shape equals a's or is a suffix of it (broadcast).
    Var add(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, T s);
    Var gelu(Var a);
    // Along the last axis, max-subtracted.
    Var softmax(Var a);
    // Per row of the last axis, eps inside the square root.
    Var layer_norm(Var x, Var gain, Var bias, T eps = T(1e-6));
    // Gathers rows of table[V, d]; output shape is prefix + [d].
    Var embedding(Var table, const std::vector<std::int32_t>& ids, Shape prefix);
    Var reshape(Var a, Shape shape);
    // Rank-3 tensors [B, S1, d] and [B, S2, d] -> [B, S1 + S2, d].
    Var concat_seq(Var a, Var b);
    // [B, S, H*dh] <-> [B, H, S, dh].
    Var split_heads(Var x, std::size_t heads);
    Var merge_heads(Var x);
    // softmax(q k^T / sqrt(dh) + mask) v for q[B,H,Sq,dh], k/v[B,H,Sk,dh].
    // mask is an optional constant [B, Sq, Sk] of 0 / -inf shared over heads.
    Var attention(Var q, Var k, Var v, Var mask = {});
    // Non-overlapping patch convolution: images[B,H,W,C], weight[p*p*C, d],
    // bias[d] -> [B, (H/p)*(W/p), d]. Patch rows flatten as (py, px, c).
    Var conv_patchify(Var images, Var weight, Var bias, std::size_t patch);
    // Mean NLL over positions with mask 1; logits[N, V].
    Var cross_entropy_masked(Var logits, const std::vector<std::int32_t>& targets,
                             const std::vector<std::uint8_t>& mask);
    Var sum(Var a);
    // sum(a * w) for a constant w of the same shape.
    Var dot(Var a, const Tensor<T>& w);

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape. Intermediate gradients
    // are reset per call; parameter gradients accumulate.
    void backward(Var loss);

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        Tensor<T> saved;  // op-specific forward state
        Parameter<T>* param = nullptr;
        bool requires_grad = false;
        std::function<void(Graph&, std::uint32_t)> backward;
    };

    Var push(Tensor<T> value, bool requires_grad, const char* op);
    Node& node(Var v) { return nodes_.at(v.id); }
    const Node& node(Var v) const { return nodes_.at(v.id); }
    bool needs(Var v) const { return record_ && nodes_[v.id].requires_grad; }
    Tensor<T>& grad_of(std::uint32_t id);

    bool record_;
    std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace mixpt::nn

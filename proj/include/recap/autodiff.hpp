#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "recap/tensor.hpp"

namespace recap::ad {

// One node of the recorded computation. Nodes are created by the op
// functions below; the graph lives as long as the loss node does.
class Node {
public:
    Tensor value;
    Tensor grad;  // allocated on first accumulation
    bool needs_grad = false;
    std::string name;  // set for parameters, empty otherwise
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    void ensure_grad() {
        if (grad.data.empty()) grad = Tensor::zeros(value.shape);
    }
    void zero_grad() {
        if (!grad.data.empty()) grad.fill(Real(0));
    }
    Real scalar() const {
        if (value.numel() != 1) throw std::invalid_argument("Node::scalar on non-scalar");
        return value.data[0];
    }
};

using NodePtr = std::shared_ptr<Node>;

NodePtr constant(Tensor v);
NodePtr param(std::string name, Tensor v);

// elementwise / broadcast
NodePtr add(const NodePtr& a, const NodePtr& b);           // same shape
NodePtr add_rowvec(const NodePtr& a, const NodePtr& v);    // a[m,n] + v[1,n]
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr scale(const NodePtr& a, Real s);
NodePtr gelu(const NodePtr& a);
NodePtr relu(const NodePtr& a);

// matrix products
NodePtr matmul(const NodePtr& a, const NodePtr& b);        // [m,k]@[k,n]
NodePtr matmul_nt(const NodePtr& a, const NodePtr& b);     // [m,k]@[n,k]^T

// structure
NodePtr concat_rows(const std::vector<NodePtr>& parts);
NodePtr slice_rows(const NodePtr& a, size_t start, size_t len);
NodePtr slice_cols(const NodePtr& a, size_t start, size_t len);
NodePtr select_rows(const NodePtr& a, std::vector<size_t> indices);
NodePtr mean_rows(const NodePtr& a);                       // [m,n] -> [1,n]
NodePtr sum_all(const NodePtr& a);                         // -> scalar
NodePtr sum_scalars(const std::vector<NodePtr>& xs);

NodePtr layer_norm(const NodePtr& x, const NodePtr& gamma, const NodePtr& beta,
                   Real eps = Real(1e-5));

// rows of `table` gathered by token id
NodePtr embedding(const NodePtr& table, const std::vector<int>& ids);

// Scaled dot-product attention softmax(QK^T/sqrt(d_h)+mask)V.
// Single head; an empty mask allows every position. mask is row-major
// [n_q x n_k], nonzero = allowed. A fully masked row is an error.
NodePtr attention(const NodePtr& q, const NodePtr& k, const NodePtr& v,
                  const std::vector<uint8_t>& mask = {});

// Multi-head self/cross attention over already-projected q/k/v of width
// d = n_heads * d_h. With causal=true, k/v rows [0, n_prefix) are visible
// to every query and token j is visible to query i iff j <= i.
NodePtr multihead_attention(const NodePtr& q, const NodePtr& k, const NodePtr& v,
                            size_t n_heads, bool causal, size_t n_prefix = 0);

// mean over positions with loss_mask nonzero of -log softmax(logits)[target]
NodePtr cross_entropy(const NodePtr& logits, const std::vector<int>& targets,
                      const std::vector<uint8_t>& loss_mask);

// 1 - cos(a, b) for two vectors shaped [d] or [1,d]
NodePtr cosine_loss(const NodePtr& a, const NodePtr& b);

// Reverse-mode sweep from a scalar loss. Accumulates into .grad of every
// needs_grad node reachable from `loss` (parameters keep accumulating
// across calls until zeroed by the caller).
void backward(const NodePtr& loss);

}  // namespace recap::ad

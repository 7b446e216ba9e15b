#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "peasi/tensor.hpp"

namespace peasi::nd {

// Reverse-mode autodiff over a per-forward graph. Each op records its value
// and a backward closure; backward() replays the closures in reverse creation
// order (creation order is topological). A tape constructed with
// track_gradients=false skips gradient buffers and closures entirely, which
// makes forward-only evaluation cheap and safe to run concurrently on frozen
// parameters.
//
// A tape is single-threaded; build one per forward pass.
class Tape {
public:
    using Id = int;

    explicit Tape(bool track_gradients = true) : track_(track_gradients) {}

    bool tracking() const { return track_; }

    // Leaf with no gradient flow.
    Id input(Tensor t);
    // Trainable leaf; backward() accumulates into p.grad. The parameter must
    // outlive the tape. With tracking off this is a read-only constant.
    Id param(Parameter& p);

    Id matmul(Id a, Id b);     // (m,k)x(k,n) -> (m,n)
    Id matmul_nt(Id a, Id b);  // (m,k)x(n,k)^T -> (m,n)
    Id add(Id a, Id b);        // same shape
    Id add_rowvec(Id a, Id row);  // broadcast a 1xN row over every row of a
    Id scale(Id a, double s);
    Id tanh_of(Id a);
    Id gelu(Id a);  // exact erf form
    // Row-wise normalization to mean 0 / variance 1, then elementwise
    // gain/bias (both 1xN).
    Id layer_norm(Id x, Id gain, Id bias);
    // Row-wise softmax. `keep`, when given, is one flag per column; masked
    // columns get probability exactly 0 and the rest renormalize.
    Id softmax_rows(Id a, const std::vector<std::uint8_t>* keep = nullptr);
    Id concat_cols(Id a, Id b);
    // Gathers rows of `table` (a param/input of shape VxD) by index.
    Id embedding_rows(Id table, std::vector<int> ids);
    Id slice_cols(Id a, int begin, int count);
    Id row(Id a, int r);  // 1xN view of one row
    // -log softmax(logits)[target] over the first `support` columns of a 1xN
    // logits row, computed stably via log-sum-exp.
    Id cross_entropy(Id logits, int target, int support);

    // Seeds d(root)/d(root) = seed and propagates. Root must be 1x1.
    void backward(Id root, double seed = 1.0);

    const Tensor& value(Id id) const { return nodes_[static_cast<std::size_t>(id)].val; }
    const Tensor& grad(Id id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
    double scalar_value(Id id) const { return value(id)[0]; }
    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor val;
        Tensor grad;
        std::function<void(Tape&)> back;
    };

    Id push(Tensor val, std::function<void(Tape&)> back);
    Tensor& grad_mut(Id id) { return nodes_[static_cast<std::size_t>(id)].grad; }

    std::vector<Node> nodes_;
    bool track_ = true;
};

}  // namespace peasi::nd

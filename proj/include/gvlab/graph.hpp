#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gvlab/tensor.hpp"

namespace gvlab {

using NodeId = int;

enum class OpKind : uint8_t {
    kLeaf,
    kAdd,
    kSub,
    kMul,
    kMatMul,
    kEmbeddingLookup,
    kLayerNorm,
    kSoftmax,
    kLog,
    kExp,
    kSigmoid,
    kLogSumExp,
    kGather,
    kMaskFill,
    kScale,
};

const char* op_name(OpKind k);

// Reverse-mode autodiff over an append-only op tape. Topological order equals
// insertion order: every input id precedes its consumer, and backward visits
// nodes in strict reverse insertion order. Single-threaded per instance;
// distinct graphs may live on distinct threads.
class Graph {
public:
    struct Node {
        OpKind kind = OpKind::kLeaf;
        std::vector<NodeId> inputs;
        Tensor out;
        // Op attributes; which fields matter depends on kind.
        bool trans_a = false, trans_b = false;     // matmul
        std::vector<int> indices;                  // embedding lookup row ids
        std::vector<std::pair<int, int>> coords;   // gather (row, col) pairs
        std::vector<uint8_t> mask;                 // mask-fill, 1 = replace
        double value = 0.0;                        // mask-fill value / scale factor / layer-norm eps
    };

    NodeId leaf(Tensor t);

    // Elementwise with limited broadcasting: b matches a's shape, or b is a
    // [1,C] row broadcast down a's rows, or a [R,1] column broadcast across
    // a's columns.
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);

    // [m,k] x [k,n] -> [m,n]; transpose flags reinterpret the stored operand.
    NodeId matmul(NodeId a, NodeId b, bool trans_a = false, bool trans_b = false);

    // table [V,D] + row ids -> [T,D]. Backward scatter-adds into the table.
    NodeId embedding_lookup(NodeId table, std::span<const int> ids);

    // Row-wise zero-mean unit-variance normalization.
    NodeId layer_norm(NodeId x, double eps = 1e-5);

    // Row-wise softmax / log-sum-exp ([R,C] -> [R,C] and [R,C] -> [R,1]).
    NodeId softmax(NodeId x);
    NodeId logsumexp(NodeId x);

    NodeId log(NodeId x);
    NodeId exp(NodeId x);
    NodeId sigmoid(NodeId x);

    // Picks entries (r,c) into a [n,1] column.
    NodeId gather(NodeId x, std::span<const std::pair<int, int>> coords);

    // Replaces entries where mask==1 with `fill`; gradient is zero there.
    NodeId mask_fill(NodeId x, std::vector<uint8_t> mask, double fill);

    NodeId scale(NodeId x, double factor);

    // References stay valid as the graph grows (deque storage).
    const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].out; }
    const Node& node(NodeId id) const { return nodes_[static_cast<size_t>(id)]; }
    int size() const { return static_cast<int>(nodes_.size()); }

    // Gradients of a scalar loss w.r.t. every node, indexed by node id.
    // Accumulation is by summation over all consumption paths; nodes the loss
    // does not reach get a zero gradient of matching shape.
    std::vector<Tensor> backward(NodeId loss) const;

private:
    NodeId push(Node n);
    NodeId elementwise(OpKind kind, NodeId a, NodeId b);
    void check_id(NodeId id) const;

    std::deque<Node> nodes_;
};

// Central-difference gradient check. `fn` evaluates a scalar function at a
// point and returns both the value and its analytic gradient. Returns
// max over coordinates of |analytic - central| / max(1, |central|).
double grad_check(const std::function<std::pair<double, std::vector<double>>(std::span<const double>)>& fn,
                  std::span<const double> point, double eps);

}  // namespace gvlab

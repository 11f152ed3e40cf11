#include "gvlab/graph.hpp"

#include <cmath>
#include <stdexcept>

#include "gvlab/kernels.hpp"

namespace gvlab {

const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::kLeaf: return "leaf";
        case OpKind::kAdd: return "add";
        case OpKind::kSub: return "sub";
        case OpKind::kMul: return "mul";
        case OpKind::kMatMul: return "matmul";
        case OpKind::kEmbeddingLookup: return "embedding-lookup";
        case OpKind::kLayerNorm: return "layer-norm";
        case OpKind::kSoftmax: return "softmax";
        case OpKind::kLog: return "log";
        case OpKind::kExp: return "exp";
        case OpKind::kSigmoid: return "sigmoid";
        case OpKind::kLogSumExp: return "logsumexp";
        case OpKind::kGather: return "gather";
        case OpKind::kMaskFill: return "mask-fill";
        case OpKind::kScale: return "scale";
    }
    return "?";
}

namespace {

[[noreturn]] void shape_error(OpKind kind, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(op_name(kind)) + ": incompatible shapes " + a.shape_str() +
                                " and " + b.shape_str());
}

enum class Broadcast { kNone, kRow, kCol };

Broadcast broadcast_mode(OpKind kind, const Tensor& a, const Tensor& b) {
    if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::kNone;
    if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
    if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::kCol;
    shape_error(kind, a, b);
}

double broadcast_at(const Tensor& b, Broadcast mode, int r, int c) {
    switch (mode) {
        case Broadcast::kNone: return b.at(r, c);
        case Broadcast::kRow: return b.at(0, c);
        case Broadcast::kCol: return b.at(r, 0);
    }
    return 0.0;
}

// Sums grad over the broadcast dimension so it matches b's storage shape.
Tensor reduce_to(const Tensor& grad, const Tensor& b_like, Broadcast mode) {
    if (mode == Broadcast::kNone) return grad;
    Tensor out = Tensor::zeros(b_like.rows(), b_like.cols());
    for (int r = 0; r < grad.rows(); ++r) {
        for (int c = 0; c < grad.cols(); ++c) {
            if (mode == Broadcast::kRow) {
                out.at(0, c) += grad.at(r, c);
            } else {
                out.at(r, 0) += grad.at(r, c);
            }
        }
    }
    return out;
}

void accumulate(Tensor& dst, const Tensor& src) {
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

NodeId Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

void Graph::check_id(NodeId id) const {
    if (id < 0 || id >= size()) throw std::invalid_argument("graph: bad node id");
}

NodeId Graph::leaf(Tensor t) {
    Node n;
    n.kind = OpKind::kLeaf;
    n.out = std::move(t);
    return push(std::move(n));
}

NodeId Graph::elementwise(OpKind kind, NodeId a, NodeId b) {
    check_id(a);
    check_id(b);
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    const Broadcast mode = broadcast_mode(kind, ta, tb);
    Tensor out = Tensor::zeros(ta.rows(), ta.cols());
    for (int r = 0; r < ta.rows(); ++r) {
        for (int c = 0; c < ta.cols(); ++c) {
            const double x = ta.at(r, c);
            const double y = broadcast_at(tb, mode, r, c);
            double v = 0.0;
            switch (kind) {
                case OpKind::kAdd: v = x + y; break;
                case OpKind::kSub: v = x - y; break;
                case OpKind::kMul: v = x * y; break;
                default: break;
            }
            out.at(r, c) = v;
        }
    }
    Node n;
    n.kind = kind;
    n.inputs = {a, b};
    n.out = std::move(out);
    return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) { return elementwise(OpKind::kAdd, a, b); }
NodeId Graph::sub(NodeId a, NodeId b) { return elementwise(OpKind::kSub, a, b); }
NodeId Graph::mul(NodeId a, NodeId b) { return elementwise(OpKind::kMul, a, b); }

NodeId Graph::matmul(NodeId a, NodeId b, bool trans_a, bool trans_b) {
    check_id(a);
    check_id(b);
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    const int m = trans_a ? ta.cols() : ta.rows();
    const int ka = trans_a ? ta.rows() : ta.cols();
    const int kb = trans_b ? tb.cols() : tb.rows();
    const int nn = trans_b ? tb.rows() : tb.cols();
    if (ka != kb) shape_error(OpKind::kMatMul, ta, tb);
    Tensor out = Tensor::zeros(m, nn);
    kernels::matmul(ta.data.data(), tb.data.data(), out.data.data(), m, nn, ka, trans_a, trans_b);
    Node n;
    n.kind = OpKind::kMatMul;
    n.inputs = {a, b};
    n.trans_a = trans_a;
    n.trans_b = trans_b;
    n.out = std::move(out);
    return push(std::move(n));
}

NodeId Graph::embedding_lookup(NodeId table, std::span<const int> ids) {
    check_id(table);
    const Tensor& t = value(table);
    const int rows = t.rows();
    const int dim = t.cols();
    Tensor out = Tensor::zeros(static_cast<int>(ids.size()), dim);
    for (size_t i = 0; i < ids.size(); ++i) {
        const int id = ids[i];
        if (id < 0 || id >= rows) {
            throw std::invalid_argument("embedding-lookup: id " + std::to_string(id) + " outside table " +
                                        t.shape_str());
        }
        for (int c = 0; c < dim; ++c) out.at(static_cast<int>(i), c) = t.at(id, c);
    }
    Node n;
    n.kind = OpKind::kEmbeddingLookup;
    n.inputs = {table};
    n.indices.assign(ids.begin(), ids.end());
    n.out = std::move(out);
    return push(std::move(n));
}

NodeId Graph::layer_norm(NodeId x, double eps) {
    check_id(x);
    const Tensor& t = value(x);
    Tensor out = Tensor::zeros(t.rows(), t.cols());
    kernels::layer_norm_rows(t.data.data(), out.data.data(), t.rows(), t.cols(), eps);
    Node n;
    n.kind = OpKind::kLayerNorm;
    n.inputs = {x};
    n.value = eps;
    n.out = std::move(out);
    return push(std::move(n));
}

NodeId Graph::softmax(NodeId x) {
    check_id(x);
    const Tensor& t = value(x);
    Tensor out = Tensor::zeros(t.rows(), t.cols());
    kernels::softmax_rows(t.data.data(), out.data.data(), t.rows(), t.cols());
    Node n;
    n.kind = OpKind::kSoftmax;
    n.inputs = {x};
    n.out = std::move(out);
    return push(std::move(n));
}

NodeId Graph::logsumexp(NodeId x) {
    check_id(x);
    const Tensor& t = value(x);
    Tensor out = Tensor::zeros(t.rows(), 1);
    kernels::logsumexp_rows(t.data.data(), out.data.data(), t.rows(), t.cols());
    Node n;
    n.kind = OpKind::kLogSumExp;
    n.inputs = {x};
    n.out = std::move(out);
    return push(std::move(n));
}

NodeId Graph::log(NodeId x) {
    check_id(x);
    const Tensor& t = value(x);
    Tensor out = t;
    for (double& v : out.data) v = std::log(v);
    Node n;
    n.kind = OpKind::kLog;
    n.inputs = {x};
    n.out = std::move(out);
    return push(std::move(n));
}

NodeId Graph::exp(NodeId x) {
    check_id(x);
    Tensor out = value(x);
    for (double& v : out.data) v = std::exp(v);
    Node n;
    n.kind = OpKind::kExp;
    n.inputs = {x};
    n.out = std::move(out);
    return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId x) {
    check_id(x);
    Tensor out = value(x);
    for (double& v : out.data) {
        if (v >= 0.0) {
            v = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            v = e / (1.0 + e);
        }
    }
    Node n;
    n.kind = OpKind::kSigmoid;
    n.inputs = {x};
    n.out = std::move(out);
    return push(std::move(n));
}

NodeId Graph::gather(NodeId x, std::span<const std::pair<int, int>> coords) {
    check_id(x);
    const Tensor& t = value(x);
    Tensor out = Tensor::zeros(static_cast<int>(coords.size()), 1);
    for (size_t i = 0; i < coords.size(); ++i) {
        const auto [r, c] = coords[i];
        if (r < 0 || r >= t.rows() || c < 0 || c >= t.cols()) {
            throw std::invalid_argument("gather: coord (" + std::to_string(r) + "," + std::to_string(c) +
                                        ") outside " + t.shape_str());
        }
        out.at(static_cast<int>(i), 0) = t.at(r, c);
    }
    Node n;
    n.kind = OpKind::kGather;
    n.inputs = {x};
    n.coords.assign(coords.begin(), coords.end());
    n.out = std::move(out);
    return push(std::move(n));
}

NodeId Graph::mask_fill(NodeId x, std::vector<uint8_t> mask, double fill) {
    check_id(x);
    const Tensor& t = value(x);
    if (mask.size() != t.data.size()) {
        throw std::invalid_argument("mask-fill: mask size " + std::to_string(mask.size()) +
                                    " does not cover " + t.shape_str());
    }
    Tensor out = t;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) out.data[i] = fill;
    }
    Node n;
    n.kind = OpKind::kMaskFill;
    n.inputs = {x};
    n.mask = std::move(mask);
    n.value = fill;
    n.out = std::move(out);
    return push(std::move(n));
}

NodeId Graph::scale(NodeId x, double factor) {
    check_id(x);
    Tensor out = value(x);
    for (double& v : out.data) v *= factor;
    Node n;
    n.kind = OpKind::kScale;
    n.inputs = {x};
    n.value = factor;
    n.out = std::move(out);
    return push(std::move(n));
}

std::vector<Tensor> Graph::backward(NodeId loss) const {
    check_id(loss);
    const Tensor& lt = value(loss);
    if (!lt.is_scalar()) {
        throw std::invalid_argument("backward: loss must be scalar, got " + lt.shape_str());
    }
    std::vector<Tensor> grads(nodes_.size());
    for (size_t i = 0; i < nodes_.size(); ++i) {
        grads[i] = Tensor(nodes_[i].out.shape, std::vector<double>(nodes_[i].out.data.size(), 0.0));
    }
    grads[static_cast<size_t>(loss)].data[0] = 1.0;

    for (NodeId id = loss; id >= 0; --id) {
        const Node& n = nodes_[static_cast<size_t>(id)];
        const Tensor& g = grads[static_cast<size_t>(id)];
        if (n.kind == OpKind::kLeaf) continue;
        bool any = false;
        for (double v : g.data) {
            if (v != 0.0) {
                any = true;
                break;
            }
        }
        if (!any) continue;

        switch (n.kind) {
            case OpKind::kAdd:
            case OpKind::kSub: {
                const Tensor& ta = value(n.inputs[0]);
                const Tensor& tb = value(n.inputs[1]);
                const Broadcast mode = broadcast_mode(n.kind, ta, tb);
                accumulate(grads[static_cast<size_t>(n.inputs[0])], g);
                Tensor gb = reduce_to(g, tb, mode);
                if (n.kind == OpKind::kSub) {
                    for (double& v : gb.data) v = -v;
                }
                accumulate(grads[static_cast<size_t>(n.inputs[1])], gb);
                break;
            }
            case OpKind::kMul: {
                const Tensor& ta = value(n.inputs[0]);
                const Tensor& tb = value(n.inputs[1]);
                const Broadcast mode = broadcast_mode(n.kind, ta, tb);
                Tensor ga = Tensor::zeros(ta.rows(), ta.cols());
                Tensor gb_full = Tensor::zeros(ta.rows(), ta.cols());
                for (int r = 0; r < ta.rows(); ++r) {
                    for (int c = 0; c < ta.cols(); ++c) {
                        ga.at(r, c) = g.at(r, c) * broadcast_at(tb, mode, r, c);
                        gb_full.at(r, c) = g.at(r, c) * ta.at(r, c);
                    }
                }
                accumulate(grads[static_cast<size_t>(n.inputs[0])], ga);
                accumulate(grads[static_cast<size_t>(n.inputs[1])], reduce_to(gb_full, tb, mode));
                break;
            }
            case OpKind::kMatMul: {
                const Tensor& ta = value(n.inputs[0]);
                const Tensor& tb = value(n.inputs[1]);
                const int m = g.rows(), nn = g.cols();
                const int k = n.trans_a ? ta.rows() : ta.cols();
                Tensor ga(ta.shape, std::vector<double>(ta.data.size(), 0.0));
                Tensor gb(tb.shape, std::vector<double>(tb.data.size(), 0.0));
                // dA and dB reduce to matmuls of g with the other operand.
                if (!n.trans_a) {
                    kernels::matmul(g.data.data(), tb.data.data(), ga.data.data(), m, k, nn, false, !n.trans_b);
                } else {
                    kernels::matmul(tb.data.data(), g.data.data(), ga.data.data(), k, m, nn, n.trans_b, true);
                }
                if (!n.trans_b) {
                    kernels::matmul(ta.data.data(), g.data.data(), gb.data.data(), k, nn, m, !n.trans_a, false);
                } else {
                    kernels::matmul(g.data.data(), ta.data.data(), gb.data.data(), nn, k, m, true, n.trans_a);
                }
                accumulate(grads[static_cast<size_t>(n.inputs[0])], ga);
                accumulate(grads[static_cast<size_t>(n.inputs[1])], gb);
                break;
            }
            case OpKind::kEmbeddingLookup: {
                Tensor& gt = grads[static_cast<size_t>(n.inputs[0])];
                const int dim = gt.cols();
                for (size_t i = 0; i < n.indices.size(); ++i) {
                    const int id = n.indices[i];
                    for (int c = 0; c < dim; ++c) gt.at(id, c) += g.at(static_cast<int>(i), c);
                }
                break;
            }
            case OpKind::kLayerNorm: {
                const Tensor& x = value(n.inputs[0]);
                const Tensor& y = n.out;
                Tensor gx = Tensor::zeros(x.rows(), x.cols());
                const int cols = x.cols();
                for (int r = 0; r < x.rows(); ++r) {
                    double mean = 0.0, var = 0.0;
                    for (int c = 0; c < cols; ++c) mean += x.at(r, c);
                    mean /= cols;
                    for (int c = 0; c < cols; ++c) {
                        const double d = x.at(r, c) - mean;
                        var += d * d;
                    }
                    var /= cols;
                    const double inv = 1.0 / std::sqrt(var + n.value);
                    double gdot = 0.0, gydot = 0.0;
                    for (int c = 0; c < cols; ++c) {
                        gdot += g.at(r, c);
                        gydot += g.at(r, c) * y.at(r, c);
                    }
                    gdot /= cols;
                    gydot /= cols;
                    for (int c = 0; c < cols; ++c) {
                        gx.at(r, c) = inv * (g.at(r, c) - gdot - y.at(r, c) * gydot);
                    }
                }
                accumulate(grads[static_cast<size_t>(n.inputs[0])], gx);
                break;
            }
            case OpKind::kSoftmax: {
                const Tensor& y = n.out;
                Tensor gx = Tensor::zeros(y.rows(), y.cols());
                for (int r = 0; r < y.rows(); ++r) {
                    double dot = 0.0;
                    for (int c = 0; c < y.cols(); ++c) dot += g.at(r, c) * y.at(r, c);
                    for (int c = 0; c < y.cols(); ++c) gx.at(r, c) = y.at(r, c) * (g.at(r, c) - dot);
                }
                accumulate(grads[static_cast<size_t>(n.inputs[0])], gx);
                break;
            }
            case OpKind::kLogSumExp: {
                const Tensor& x = value(n.inputs[0]);
                Tensor gx = Tensor::zeros(x.rows(), x.cols());
                for (int r = 0; r < x.rows(); ++r) {
                    for (int c = 0; c < x.cols(); ++c) {
                        gx.at(r, c) = g.at(r, 0) * std::exp(x.at(r, c) - n.out.at(r, 0));
                    }
                }
                accumulate(grads[static_cast<size_t>(n.inputs[0])], gx);
                break;
            }
            case OpKind::kLog: {
                const Tensor& x = value(n.inputs[0]);
                Tensor gx = g;
                for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] /= x.data[i];
                accumulate(grads[static_cast<size_t>(n.inputs[0])], gx);
                break;
            }
            case OpKind::kExp: {
                Tensor gx = g;
                for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] *= n.out.data[i];
                accumulate(grads[static_cast<size_t>(n.inputs[0])], gx);
                break;
            }
            case OpKind::kSigmoid: {
                Tensor gx = g;
                for (size_t i = 0; i < gx.data.size(); ++i) {
                    const double s = n.out.data[i];
                    gx.data[i] *= s * (1.0 - s);
                }
                accumulate(grads[static_cast<size_t>(n.inputs[0])], gx);
                break;
            }
            case OpKind::kGather: {
                Tensor& gt = grads[static_cast<size_t>(n.inputs[0])];
                for (size_t i = 0; i < n.coords.size(); ++i) {
                    gt.at(n.coords[i].first, n.coords[i].second) += g.at(static_cast<int>(i), 0);
                }
                break;
            }
            case OpKind::kMaskFill: {
                Tensor gx = g;
                for (size_t i = 0; i < gx.data.size(); ++i) {
                    if (n.mask[i]) gx.data[i] = 0.0;
                }
                accumulate(grads[static_cast<size_t>(n.inputs[0])], gx);
                break;
            }
            case OpKind::kScale: {
                Tensor gx = g;
                for (double& v : gx.data) v *= n.value;
                accumulate(grads[static_cast<size_t>(n.inputs[0])], gx);
                break;
            }
            case OpKind::kLeaf:
                break;
        }
    }
    return grads;
}

double grad_check(const std::function<std::pair<double, std::vector<double>>(std::span<const double>)>& fn,
                  std::span<const double> point, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");
    std::vector<double> x(point.begin(), point.end());
    const std::vector<double> analytic = fn(x).second;
    if (analytic.size() != x.size()) throw std::invalid_argument("grad_check: gradient size mismatch");
    double max_err = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + eps;
        const double fp = fn(x).first;
        x[i] = saved - eps;
        const double fm = fn(x).first;
        x[i] = saved;
        const double central = (fp - fm) / (2.0 * eps);
        const double err = std::abs(analytic[i] - central) / std::max(1.0, std::abs(central));
        max_err = std::max(max_err, err);
    }
    return max_err;
}

}  // namespace gvlab

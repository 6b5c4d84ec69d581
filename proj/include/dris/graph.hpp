#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dris/error.hpp"
#include "dris/tensor.hpp"

namespace dris {

using Var = int;

// Reverse-mode tape over Tensors. Nodes are appended in forward order, so the
// creation order is already topological and backward is a single reverse
// sweep. With recording off the same code path computes values only, which
// keeps inference and training numerics identical.
class Graph {
public:
    explicit Graph(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }

    // Constant input; never receives a gradient.
    Var input(Tensor t) { return push(std::move(t), nullptr); }

    // Named leaf bound to external storage. Repeated requests for the same
    // name return the same node so gradient contributions accumulate.
    Var leaf(const std::string& name, const Tensor* storage) {
        auto it = leaves_.find(name);
        if (it != leaves_.end()) return it->second;
        const Var v = push(Tensor{}, storage);
        leaves_.emplace(name, v);
        leaf_names_.push_back(name);
        return v;
    }

    const Tensor& value(Var v) const {
        const Node& n = nodes_[v];
        return n.storage ? *n.storage : n.val;
    }
    double scalar(Var v) const {
        const Tensor& t = value(v);
        if (t.size() != 1) throw ContractViolation("scalar: tensor is not 1x1");
        return t.v[0];
    }

    // ---- elementwise and broadcast ops ------------------------------------

    Var add(Var a, Var b) {
        return binary_same_shape(a, b, [](double x, double y) { return x + y; },
                                 [this](Var a2, Var b2, Var out) {
                                     acc_full(a2, grad(out), 1.0);
                                     acc_full(b2, grad(out), 1.0);
                                 });
    }
    Var sub(Var a, Var b) {
        return binary_same_shape(a, b, [](double x, double y) { return x - y; },
                                 [this](Var a2, Var b2, Var out) {
                                     acc_full(a2, grad(out), 1.0);
                                     acc_full(b2, grad(out), -1.0);
                                 });
    }
    Var mul(Var a, Var b) {
        return binary_same_shape(a, b, [](double x, double y) { return x * y; },
                                 [this](Var a2, Var b2, Var out) {
                                     acc_elemwise(a2, grad(out), value(b2));
                                     acc_elemwise(b2, grad(out), value(a2));
                                 });
    }
    // Elementwise minimum; gradient routed to the smaller argument (ties: a).
    Var min_elem(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        require_same_shape(ta, tb, "min_elem");
        Tensor out = ta;
        for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = std::fmin(ta.v[i], tb.v[i]);
        return push(std::move(out), nullptr, [this, a, b](Var o) {
            const Tensor &ta2 = value(a), &tb2 = value(b), &g = grad(o);
            Tensor ga(ta2.rows, ta2.cols), gb(tb2.rows, tb2.cols);
            for (std::size_t i = 0; i < g.size(); ++i)
                (ta2.v[i] <= tb2.v[i] ? ga.v[i] : gb.v[i]) = g.v[i];
            acc_tensor(a, ga);
            acc_tensor(b, gb);
        });
    }

    Var scale(Var a, double s) {
        return unary(a, [s](double x) { return s * x; },
                     [this, s](Var a2, Var out) { acc_full(a2, grad(out), s); });
    }
    Var add_const(Var a, double c) {
        return unary(a, [c](double x) { return x + c; },
                     [this](Var a2, Var out) { acc_full(a2, grad(out), 1.0); });
    }
    Var neg(Var a) { return scale(a, -1.0); }

    Var tanh_op(Var a) {
        const Tensor& ta = value(a);
        Tensor out = ta;
        for (double& x : out.v) x = std::tanh(x);
        return push(std::move(out), nullptr, [this, a](Var o) {
            const Tensor &y = value(o), &g = grad(o);
            Tensor ga(y.rows, y.cols);
            for (std::size_t i = 0; i < y.size(); ++i) ga.v[i] = g.v[i] * (1.0 - y.v[i] * y.v[i]);
            acc_tensor(a, ga);
        });
    }
    Var sigmoid(Var a) {
        const Tensor& ta = value(a);
        Tensor out = ta;
        for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
        return push(std::move(out), nullptr, [this, a](Var o) {
            const Tensor &y = value(o), &g = grad(o);
            Tensor ga(y.rows, y.cols);
            for (std::size_t i = 0; i < y.size(); ++i) ga.v[i] = g.v[i] * y.v[i] * (1.0 - y.v[i]);
            acc_tensor(a, ga);
        });
    }
    Var exp_op(Var a) {
        const Tensor& ta = value(a);
        Tensor out = ta;
        for (double& x : out.v) x = std::exp(x);
        return push(std::move(out), nullptr, [this, a](Var o) {
            const Tensor &y = value(o), &g = grad(o);
            Tensor ga(y.rows, y.cols);
            for (std::size_t i = 0; i < y.size(); ++i) ga.v[i] = g.v[i] * y.v[i];
            acc_tensor(a, ga);
        });
    }
    Var log_op(Var a) {
        return unary(a, [](double x) { return std::log(x); },
                     [this](Var a2, Var out) {
                         const Tensor &x = value(a2), &g = grad(out);
                         Tensor ga(x.rows, x.cols);
                         for (std::size_t i = 0; i < x.size(); ++i) ga.v[i] = g.v[i] / x.v[i];
                         acc_tensor(a2, ga);
                     });
    }
    Var square(Var a) {
        return unary(a, [](double x) { return x * x; },
                     [this](Var a2, Var out) {
                         const Tensor &x = value(a2), &g = grad(out);
                         Tensor ga(x.rows, x.cols);
                         for (std::size_t i = 0; i < x.size(); ++i) ga.v[i] = 2.0 * x.v[i] * g.v[i];
                         acc_tensor(a2, ga);
                     });
    }
    // Gradient is zero outside the open interval.
    Var clamp_op(Var a, double lo, double hi) {
        return unary(a, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
                     [this, lo, hi](Var a2, Var out) {
                         const Tensor &x = value(a2), &g = grad(out);
                         Tensor ga(x.rows, x.cols);
                         for (std::size_t i = 0; i < x.size(); ++i)
                             ga.v[i] = (x.v[i] > lo && x.v[i] < hi) ? g.v[i] : 0.0;
                         acc_tensor(a2, ga);
                     });
    }
    // Elementwise atan2(y, x).
    Var atan2_op(Var y, Var x) {
        const Tensor &ty = value(y), &tx = value(x);
        require_same_shape(ty, tx, "atan2");
        Tensor out(ty.rows, ty.cols);
        for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = std::atan2(ty.v[i], tx.v[i]);
        return push(std::move(out), nullptr, [this, y, x](Var o) {
            const Tensor &ty2 = value(y), &tx2 = value(x), &g = grad(o);
            Tensor gy(ty2.rows, ty2.cols), gx(tx2.rows, tx2.cols);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double r2 = ty2.v[i] * ty2.v[i] + tx2.v[i] * tx2.v[i];
                gy.v[i] = g.v[i] * tx2.v[i] / r2;
                gx.v[i] = -g.v[i] * ty2.v[i] / r2;
            }
            acc_tensor(y, gy);
            acc_tensor(x, gx);
        });
    }

    // out_ij = m_ij + r_j (bias broadcast; r is 1 x cols).
    Var add_rowvec(Var m, Var r) {
        const Tensor &tm = value(m), &tr = value(r);
        if (tr.rows != 1 || tr.cols != tm.cols)
            throw ContractViolation("add_rowvec: shape mismatch");
        Tensor out = tm;
        for (int i = 0; i < tm.rows; ++i)
            for (int j = 0; j < tm.cols; ++j) out.at(i, j) += tr.at(0, j);
        return push(std::move(out), nullptr, [this, m, r](Var o) {
            const Tensor& g = grad(o);
            acc_tensor(m, g);
            Tensor gr(1, g.cols);
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < g.cols; ++j) gr.at(0, j) += g.at(i, j);
            acc_tensor(r, gr);
        });
    }
    // out_ij = m_ij * r_j.
    Var mul_rowvec(Var m, Var r) {
        const Tensor &tm = value(m), &tr = value(r);
        if (tr.rows != 1 || tr.cols != tm.cols)
            throw ContractViolation("mul_rowvec: shape mismatch");
        Tensor out = tm;
        for (int i = 0; i < tm.rows; ++i)
            for (int j = 0; j < tm.cols; ++j) out.at(i, j) *= tr.at(0, j);
        return push(std::move(out), nullptr, [this, m, r](Var o) {
            const Tensor &g = grad(o), &tm2 = value(m), &tr2 = value(r);
            Tensor gm(tm2.rows, tm2.cols), gr(1, tm2.cols);
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < g.cols; ++j) {
                    gm.at(i, j) = g.at(i, j) * tr2.at(0, j);
                    gr.at(0, j) += g.at(i, j) * tm2.at(i, j);
                }
            acc_tensor(m, gm);
            acc_tensor(r, gr);
        });
    }

    // ---- linear algebra ----------------------------------------------------

    Var matmul_op(Var a, Var b) {
        Tensor out = matmul(value(a), value(b));
        return push(std::move(out), nullptr, [this, a, b](Var o) {
            const Tensor& g = grad(o);
            Tensor ga(value(a).rows, value(a).cols);
            matmul_nt_acc(g, value(b), ga);
            acc_tensor(a, ga);
            Tensor gb(value(b).rows, value(b).cols);
            matmul_tn_acc(value(a), g, gb);
            acc_tensor(b, gb);
        });
    }

    // ---- reductions and set ops --------------------------------------------

    // Feature-wise max over rows: (N x F) -> (1 x F). The set-pooling op.
    Var colwise_max(Var a) {
        const Tensor& t = value(a);
        if (t.rows < 1) throw ContractViolation("colwise_max: empty input");
        Tensor out(1, t.cols);
        std::vector<int> arg(t.cols, 0);
        for (int j = 0; j < t.cols; ++j) {
            double best = t.at(0, j);
            for (int i = 1; i < t.rows; ++i)
                if (t.at(i, j) > best) { best = t.at(i, j); arg[j] = i; }
            out.at(0, j) = best;
        }
        return push(std::move(out), nullptr,
                    [this, a, arg = std::move(arg)](Var o) {
                        const Tensor& g = grad(o);
                        Tensor ga(value(a).rows, value(a).cols);
                        for (int j = 0; j < g.cols; ++j) ga.at(arg[j], j) = g.at(0, j);
                        acc_tensor(a, ga);
                    });
    }
    // (N x M) -> (N x 1), min over each row.
    Var rowwise_min(Var a) {
        const Tensor& t = value(a);
        Tensor out(t.rows, 1);
        std::vector<int> arg(t.rows, 0);
        for (int i = 0; i < t.rows; ++i) {
            double best = t.at(i, 0);
            for (int j = 1; j < t.cols; ++j)
                if (t.at(i, j) < best) { best = t.at(i, j); arg[i] = j; }
            out.at(i, 0) = best;
        }
        return push(std::move(out), nullptr,
                    [this, a, arg = std::move(arg)](Var o) {
                        const Tensor& g = grad(o);
                        Tensor ga(value(a).rows, value(a).cols);
                        for (int i = 0; i < g.rows; ++i) ga.at(i, arg[i]) = g.at(i, 0);
                        acc_tensor(a, ga);
                    });
    }
    // (N x M) -> (1 x M), min over each column.
    Var colwise_min(Var a) {
        const Tensor& t = value(a);
        Tensor out(1, t.cols);
        std::vector<int> arg(t.cols, 0);
        for (int j = 0; j < t.cols; ++j) {
            double best = t.at(0, j);
            for (int i = 1; i < t.rows; ++i)
                if (t.at(i, j) < best) { best = t.at(i, j); arg[j] = i; }
            out.at(0, j) = best;
        }
        return push(std::move(out), nullptr,
                    [this, a, arg = std::move(arg)](Var o) {
                        const Tensor& g = grad(o);
                        Tensor ga(value(a).rows, value(a).cols);
                        for (int j = 0; j < g.cols; ++j) ga.at(arg[j], j) = g.at(0, j);
                        acc_tensor(a, ga);
                    });
    }

    // D_ij = ||a_i - b_j||^2 for row sets a (N x d), b (M x d).
    Var pairwise_sqdist(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        if (ta.cols != tb.cols) throw ContractViolation("pairwise_sqdist: dim mismatch");
        Tensor out(ta.rows, tb.rows);
        for (int i = 0; i < ta.rows; ++i) {
            const double* ra = ta.rowptr(i);
            for (int j = 0; j < tb.rows; ++j) {
                const double* rb = tb.rowptr(j);
                double s = 0.0;
                for (int k = 0; k < ta.cols; ++k) {
                    const double e = ra[k] - rb[k];
                    s += e * e;
                }
                out.at(i, j) = s;
            }
        }
        return push(std::move(out), nullptr, [this, a, b](Var o) {
            const Tensor &g = grad(o), &ta2 = value(a), &tb2 = value(b);
            Tensor ga(ta2.rows, ta2.cols), gb(tb2.rows, tb2.cols);
            for (int i = 0; i < ta2.rows; ++i)
                for (int j = 0; j < tb2.rows; ++j) {
                    const double w = 2.0 * g.at(i, j);
                    if (w == 0.0) continue;
                    for (int k = 0; k < ta2.cols; ++k) {
                        const double e = ta2.at(i, k) - tb2.at(j, k);
                        ga.at(i, k) += w * e;
                        gb.at(j, k) -= w * e;
                    }
                }
            acc_tensor(a, ga);
            acc_tensor(b, gb);
        });
    }

    Var sum_all(Var a) {
        const Tensor& t = value(a);
        Tensor out(1, 1);
        for (const double x : t.v) out.v[0] += x;
        return push(std::move(out), nullptr, [this, a](Var o) {
            acc_full(a, grad(o), 1.0, true);
        });
    }
    Var mean_all(Var a) {
        const Tensor& t = value(a);
        if (t.size() == 0) throw ContractViolation("mean_all: empty tensor");
        return scale(sum_all(a), 1.0 / static_cast<double>(t.size()));
    }
    // (R x C) -> (R x 1).
    Var rowwise_sum(Var a) {
        const Tensor& t = value(a);
        Tensor out(t.rows, 1);
        for (int i = 0; i < t.rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < t.cols; ++j) s += t.at(i, j);
            out.at(i, 0) = s;
        }
        return push(std::move(out), nullptr, [this, a](Var o) {
            const Tensor& g = grad(o);
            Tensor ga(value(a).rows, value(a).cols);
            for (int i = 0; i < ga.rows; ++i)
                for (int j = 0; j < ga.cols; ++j) ga.at(i, j) = g.at(i, 0);
            acc_tensor(a, ga);
        });
    }

    // Same data, new shape; row-major order preserved.
    Var reshape(Var a, int rows, int cols) {
        const Tensor& t = value(a);
        if (static_cast<std::size_t>(rows) * cols != t.size())
            throw ContractViolation("reshape: element count mismatch");
        Tensor out = t;
        out.rows = rows;
        out.cols = cols;
        return push(std::move(out), nullptr, [this, a](Var o) {
            const Tensor& g = grad(o);
            Tensor ga = g;
            ga.rows = value(a).rows;
            ga.cols = value(a).cols;
            acc_tensor(a, ga);
        });
    }

    Var slice_cols(Var a, int c0, int c1) {
        const Tensor& t = value(a);
        if (c0 < 0 || c1 > t.cols || c0 >= c1) throw ContractViolation("slice_cols: bad range");
        Tensor out(t.rows, c1 - c0);
        for (int i = 0; i < t.rows; ++i)
            for (int j = c0; j < c1; ++j) out.at(i, j - c0) = t.at(i, j);
        return push(std::move(out), nullptr, [this, a, c0](Var o) {
            const Tensor& g = grad(o);
            Tensor ga(value(a).rows, value(a).cols);
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < g.cols; ++j) ga.at(i, j + c0) = g.at(i, j);
            acc_tensor(a, ga);
        });
    }

    Var concat_cols(const std::vector<Var>& parts) {
        if (parts.empty()) throw ContractViolation("concat_cols: no parts");
        const int rows = value(parts[0]).rows;
        int cols = 0;
        for (const Var p : parts) {
            if (value(p).rows != rows) throw ContractViolation("concat_cols: row mismatch");
            cols += value(p).cols;
        }
        Tensor out(rows, cols);
        int off = 0;
        for (const Var p : parts) {
            const Tensor& t = value(p);
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < t.cols; ++j) out.at(i, off + j) = t.at(i, j);
            off += t.cols;
        }
        return push(std::move(out), nullptr, [this, parts](Var o) {
            const Tensor& g = grad(o);
            int off2 = 0;
            for (const Var p : parts) {
                const Tensor& t = value(p);
                Tensor gp(t.rows, t.cols);
                for (int i = 0; i < t.rows; ++i)
                    for (int j = 0; j < t.cols; ++j) gp.at(i, j) = g.at(i, off2 + j);
                acc_tensor(p, gp);
                off2 += t.cols;
            }
        });
    }

    // ---- backward -----------------------------------------------------------

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Leaf
    // gradients are then available through leaf_grads().
    void backward(Var loss) {
        if (!recording_) throw ContractViolation("backward: graph is not recording");
        if (value(loss).size() != 1) throw ContractViolation("backward: loss must be scalar");
        for (Node& n : nodes_) n.grad = Tensor{};
        touch_grad(loss) = Tensor::full(1, 1, 1.0);
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
            Node& n = nodes_[i];
            if (n.backward && !n.grad.empty()) n.backward(i);
        }
    }

    // Gradient of every registered leaf after backward(); leaves that did not
    // participate get zeros of the right shape.
    std::map<std::string, Tensor> leaf_grads() const {
        std::map<std::string, Tensor> out;
        for (const std::string& name : leaf_names_) {
            const Node& n = nodes_[leaves_.at(name)];
            out[name] = n.grad.empty() ? Tensor(n.storage->rows, n.storage->cols) : n.grad;
        }
        return out;
    }

    const Tensor& grad(Var v) const {
        return nodes_[v].grad;
    }

private:
    struct Node {
        Tensor val;
        const Tensor* storage = nullptr;  // non-null for leaves bound to a ParamStore
        Tensor grad;
        std::function<void(Var)> backward;
    };

    static void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
        if (!a.same_shape(b)) throw ContractViolation(std::string(op) + ": shape mismatch");
    }

    Tensor& touch_grad(Var v) {
        Node& n = nodes_[v];
        if (n.grad.empty()) {
            const Tensor& t = n.storage ? *n.storage : n.val;
            n.grad = Tensor(t.rows, t.cols);
        }
        return n.grad;
    }

    void acc_tensor(Var v, const Tensor& g) {
        Tensor& dst = touch_grad(v);
        for (std::size_t i = 0; i < dst.size(); ++i) dst.v[i] += g.v[i];
    }
    // dst += s * g, or broadcast a scalar g across dst when `broadcast`.
    void acc_full(Var v, const Tensor& g, double s, bool broadcast = false) {
        Tensor& dst = touch_grad(v);
        if (broadcast) {
            const double x = s * g.v[0];
            for (double& e : dst.v) e += x;
        } else {
            for (std::size_t i = 0; i < dst.size(); ++i) dst.v[i] += s * g.v[i];
        }
    }
    void acc_elemwise(Var v, const Tensor& g, const Tensor& other) {
        Tensor& dst = touch_grad(v);
        for (std::size_t i = 0; i < dst.size(); ++i) dst.v[i] += g.v[i] * other.v[i];
    }

    template <typename F, typename B>
    Var unary(Var a, F f, B bw) {
        const Tensor& t = value(a);
        Tensor out = t;
        for (double& x : out.v) x = f(x);
        return push(std::move(out), nullptr,
                    [bw = std::move(bw), a](Var o) mutable { bw(a, o); });
    }

    template <typename F, typename B>
    Var binary_same_shape(Var a, Var b, F f, B bw) {
        const Tensor &ta = value(a), &tb = value(b);
        require_same_shape(ta, tb, "binary");
        Tensor out(ta.rows, ta.cols);
        for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = f(ta.v[i], tb.v[i]);
        return push(std::move(out), nullptr,
                    [bw = std::move(bw), a, b](Var o) mutable { bw(a, b, o); });
    }

    Var push(Tensor val, const Tensor* storage, std::function<void(Var)> backward = nullptr) {
        Node n;
        n.val = std::move(val);
        n.storage = storage;
        if (recording_) n.backward = std::move(backward);
        nodes_.push_back(std::move(n));
        return static_cast<Var>(nodes_.size()) - 1;
    }

    bool recording_;
    std::vector<Node> nodes_;
    std::map<std::string, Var> leaves_;
    std::vector<std::string> leaf_names_;
};

}  // namespace dris

#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "countvqa/rng.hpp"
#include "countvqa/tensor.hpp"

namespace cvqa {

/// A named trainable tensor. Gradients accumulate additively across loss
/// terms and backward calls until zero_grad().
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;

    Parameter(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}

    void zero_grad() { grad.fill(0.0); }
};

/// Handle into a Graph's tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape. Values are computed eagerly; each recorded op appends
/// a node whose backward closure scatters the node's gradient into its
/// inputs. The tape is append-only, so a reverse sweep visits nodes in a
/// valid topological order. With recording off only values are kept, which
/// is the evaluation path.
///
/// Every op checks its output for NaN/Inf: a non-finite forward value is an
/// error state, not something to propagate.
class Graph {
public:
    explicit Graph(bool recording = true) : recording_(recording) {}

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool recording() const { return recording_; }

    std::size_t node_count() const { return nodes_.size(); }

    const Tensor& value(Var v) const { return nodes_[check_var(v)].value; }
    const Tensor& grad_of(Var v) const { return nodes_[check_var(v)].grad; }

    /// Constant leaf; no gradient flows into it.
    Var input(Tensor v);

    /// Trainable leaf; backward() accumulates into p.grad.
    Var param(Parameter& p);

    // ---- elementwise ----
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);  // Hadamard
    Var neg(Var a);
    Var scale(Var a, double c);
    Var add_scalar(Var a, double c);
    Var tanh_op(Var a);
    Var sigmoid_op(Var a);
    Var relu_op(Var a);
    Var abs_op(Var a);
    Var log_op(Var a);    // clamped at -50 when the input underflows
    Var huber_op(Var a);  // elementwise Huber of a nonnegative tensor

    // ---- reductions ----
    Var sum(Var a);
    Var mean(Var a);
    Var dot(Var a, Var b);

    // ---- linear algebra ----
    Var affine(Var x, Var w, Var b);  // w[k x m] * x[m] + b[k]
    Var linear(Var x, Var w, Var b);  // x[r x m] * w^T + b, row-wise
    Var matmul(Var a, Var b);
    Var vecmat(Var x, Var a);  // x[r]^T * a[r x c] -> [c]

    // ---- shape / indexing ----
    Var concat(Var a, Var b);               // vectors (or scalars promoted)
    Var hconcat(Var a, Var b);              // matrices, same row count
    Var tile_rows(Var v, std::size_t r);    // vector -> r identical rows
    Var row(Var m, std::size_t i);          // matrix row -> vector
    Var pick(Var v, std::size_t i);         // vector element -> scalar
    Var gather(Var v, std::vector<std::size_t> idx);
    Var reshape(Var a, std::vector<std::size_t> shape);

    // ---- probability ----
    Var softmax(Var v);  // vector, max-subtracted
    Var cross_entropy(Var p, std::size_t target);  // -log p[target], clamped at 50

    /// Inverted dropout: in training, zeroes each element with probability
    /// `rate` and scales survivors by 1/(1-rate); outside training it is the
    /// identity.
    Var dropout(Var x, double rate, bool training, Rng& rng);

    /// Seeds d(loss)/d(loss) = 1 and sweeps the tape. May be called more
    /// than once; parameter gradients keep accumulating.
    void backward(Var loss);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Graph&)> back;
        Parameter* parameter = nullptr;
    };

    int check_var(Var v) const {
        detail::require(v.valid() && v.id < static_cast<int>(nodes_.size()),
                        "Graph: invalid Var");
        return v.id;
    }

    Var push(Tensor value) {
        detail::require(value.all_finite(), "Graph: non-finite values in forward op");
        Node n;
        if (recording_) n.grad = Tensor::zeros(value.shape());
        n.value = std::move(value);
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    void set_back(Var v, std::function<void(Graph&)> f) {
        if (recording_) nodes_[v.id].back = std::move(f);
    }

    Tensor& g(int id) { return nodes_[id].grad; }
    const Tensor& v(int id) const { return nodes_[id].value; }

    bool recording_;
    std::vector<Node> nodes_;
};

}  // namespace cvqa

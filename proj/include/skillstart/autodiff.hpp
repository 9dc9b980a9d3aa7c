#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace skillstart::ad {

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    bool requires_grad = false;

    std::size_t size() const {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }
    static Tensor matrix(std::size_t rows, std::size_t cols, bool requires_grad = false) {
        return Tensor{{rows, cols}, std::vector<double>(rows * cols, 0.0), requires_grad};
    }
    static Tensor scalar(double v, bool requires_grad = false) {
        return Tensor{{1, 1}, {v}, requires_grad};
    }
};

// Handle into a Tape. All values are row-major matrices; scalars are 1x1.
struct Var {
    std::uint32_t id = 0;
};

// Reverse-mode computation tape. Nodes are appended in topological order and
// the backward pass visits them exactly once in reverse. All reductions run
// in fixed index order, so gradients are bit-reproducible.
class Tape {
public:
    Tape();

    Var leaf(const Tensor& t);
    Var constant(std::size_t rows, std::size_t cols, std::vector<double> values);
    Var constant_scalar(double v);

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);  // elementwise
    Var neg(Var a);
    Var scale(Var a, double s);
    Var add_rowvec(Var a, Var v);          // v is 1 x cols, broadcast over rows
    Var col_broadcast(Var v, std::size_t cols);  // v is n x 1 -> n x cols
    Var concat_cols(const std::vector<Var>& parts);
    Var concat_rows(const std::vector<Var>& parts);
    Var gather_rows(Var a, std::vector<std::uint32_t> indices);
    Var slice_cols(Var a, std::size_t c0, std::size_t c1);
    Var relu(Var a);
    Var leaky_relu(Var a, double alpha = 0.2);
    Var sigmoid(Var a);
    Var tanh_(Var a);
    Var exp_(Var a);
    Var log_(Var a);
    Var abs_(Var a);
    Var sum(Var a);        // -> 1x1
    Var mean(Var a);       // -> 1x1
    Var sum_rows(Var a);   // m x c -> 1 x c
    Var segment_sum(Var a, std::vector<std::uint32_t> seg, std::size_t n_seg);
    Var segment_softmax(Var s, std::vector<std::uint32_t> seg, std::size_t n_seg);  // s is m x 1
    Var segment_max(Var a, std::vector<std::uint32_t> seg, std::size_t n_seg);

    // Elementwise binary cross entropy with probability clamped to
    // [1e-7, 1-1e-7]: -[w*y*log(p) + (1-y)*log(1-p)]. y entries must be 0/1.
    Var bce(Var p, std::vector<double> y, double pos_weight);

    // Runs the backward pass from a scalar output (seeds d out/d out = 1).
    void backward(Var output);

    std::span<const double> value(Var v) const;
    double value_scalar(Var v) const;
    std::span<const double> grad(Var v) const;
    std::size_t rows(Var v) const;
    std::size_t cols(Var v) const;
    std::size_t num_nodes() const { return nodes_.size(); }

private:
    struct Node {
        std::uint32_t rows = 0, cols = 0;
        std::vector<double> val;
        std::vector<double> grad;
        bool needs_grad = false;
        std::function<void(Tape&)> back;
    };

    Var push(std::uint32_t rows, std::uint32_t cols, std::vector<double> val, bool needs_grad,
             std::function<void(Tape&)> back);
    Node& node(Var v) { return nodes_[v.id]; }
    const Node& node(Var v) const { return nodes_[v.id]; }
    std::vector<double>& grad_buf(Var v);
    Var map_unary(Var a, const std::function<double(double)>& f,
                  const std::function<double(double, double)>& dfdx_from_x_y);

    std::vector<Node> nodes_;
    friend class TapeTestPeer;
};

// Named parameter collection. std::map keeps iteration deterministic.
using ParamStore = std::map<std::string, Tensor>;
using GradStore = std::map<std::string, std::vector<double>>;

struct BoundParams {
    std::map<std::string, Var> vars;
    Var at(const std::string& name) const;
};

BoundParams bind_params(Tape& tape, const ParamStore& params, bool requires_grad);
void accumulate_param_grads(const Tape& tape, const BoundParams& bound, GradStore& grads);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments;
};

void adam_step(ParamStore& params, const GradStore& grads, AdamState& state, double lr);

// Scalar reference form used by tests and fixture code.
double bce_loss(double p, double y, double pos_weight);

// Glorot-uniform linear layer init: name.W (in x out), name.b (1 x out).
void init_linear(ParamStore& params, const std::string& name, std::size_t in, std::size_t out,
                 std::uint64_t seed);

std::string params_to_json(const ParamStore& params);
ParamStore params_from_json(const std::string& text);
std::size_t param_count(const ParamStore& params);

}  // namespace skillstart::ad

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "semcom/errors.hpp"

namespace semcom::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Reverse-mode tape over dense matrices. A fresh Graph is built per batch;
// nodes are identified by creation index and replayed in reverse for
// backward(). Samples live in columns, features in rows, so every layer is
// one GEMM.
class Graph {
   public:
    using NodeId = int;

    // Leaf carrying data that needs no gradient (inputs, noise draws).
    NodeId constant(Mat value);
    // Leaf whose gradient is wanted; snapshots the current parameter value.
    NodeId param(const Mat& value);

    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);            // same shape
    NodeId sub(NodeId a, NodeId b);            // same shape
    NodeId mul(NodeId a, NodeId b);            // elementwise, same shape
    NodeId add_colvec(NodeId a, NodeId bias);  // bias: column, broadcast over cols
    NodeId scale(NodeId a, double s);
    NodeId add_scalar(NodeId a, double s);
    NodeId relu(NodeId a);
    NodeId tanh(NodeId a);
    NodeId exp(NodeId a);
    NodeId square(NodeId a);
    NodeId softmax_cols(NodeId a);
    NodeId transpose(NodeId a);
    // Reinterprets the column-major buffer with new dimensions (same size).
    NodeId reshape(NodeId a, Eigen::Index rows, Eigen::Index cols);
    NodeId slice_rows(NodeId a, Eigen::Index row0, Eigen::Index nrows);
    NodeId sum_all(NodeId a);   // 1x1
    NodeId mean_all(NodeId a);  // 1x1

    // Mean over columns of -log2 softmax(logits)[label], in bits.
    NodeId cross_entropy_bits(NodeId logits, const std::vector<int>& labels);

    // KL( N(mu, diag(exp(2*log_std))) || N(0, I) ) in bits: summed over
    // rows (latent dims), averaged over columns (samples). 1x1.
    NodeId gaussian_kl_bits(NodeId mu, NodeId log_std);

    // Per-column rescale so that sum of squares equals `complex_dim`
    // (average complex-symbol power one when rows come in re/im pairs).
    NodeId unit_power_cols(NodeId a, Eigen::Index complex_dim);

    // Softmax over K constellation points of -|y - c_k|^2 / scale, one
    // column per received symbol. `points` is 2 x K (re; im), `a` is 2 x N.
    NodeId soft_assignment(NodeId a, const Mat& points, double scale);

    // Forward takes `hard` (same shape as a), backward passes gradients to
    // `a` unchanged (straight-through estimator).
    NodeId straight_through(NodeId a, Mat hard);

    void backward(NodeId root);

    const Mat& value(NodeId id) const { return nodes_[id].value; }
    const Mat& grad(NodeId id) const { return nodes_[id].grad; }

    // Throws NumericError when a node's value is not finite.
    void check_finite(NodeId id, const char* what) const;

   private:
    struct Node {
        Mat value;
        Mat grad;
        std::function<void(Graph&)> back;  // empty for leaves
    };

    NodeId push(Mat value, std::function<void(Graph&)> back);
    Mat& grad_mut(NodeId id) { return nodes_[id].grad; }

    std::vector<Node> nodes_;
};

// Adam optimizer over a fixed list of parameter tensors. State arrays are
// allocated on first step and keyed by position, so the parameter list must
// be stable across steps.
class Adam {
   public:
    explicit Adam(double learning_rate = 1e-3, double beta1 = 0.9,
                  double beta2 = 0.999, double epsilon = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

    void step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads);

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

   private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Mat> m_, v_;
};

}  // namespace semcom::nn

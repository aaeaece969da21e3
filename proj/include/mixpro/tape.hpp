#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixpro/tensor.hpp"

namespace mixpro {

using NodeId = std::int32_t;

// Reverse-mode tape over whole tensors. Ops append nodes with parent links;
// backward() walks the record from the loss down to node 0, which is a reverse
// topological order because parents always precede children. Inputs are never
// mutated; every op materializes a fresh value and checks it for NaN/Inf.
class Tape {
public:
    NodeId leaf(Tensor value);

    // a[m x k] * b[k x n]; rank-1 a is treated as a single row and yields rank-1.
    NodeId matmul(NodeId a, NodeId b);
    // a[m x k] * b[n x k]^T
    NodeId matmul_nt(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    // a[m x n] + bias[n] broadcast over rows; rank-1 a allowed as a single row.
    NodeId add_row_bias(NodeId a, NodeId bias);
    NodeId mul(NodeId a, NodeId b);
    // alpha * a + beta * b with compile-time-constant coefficients (scalar mix).
    NodeId axpby(double alpha, NodeId a, double beta, NodeId b);
    NodeId scale(double alpha, NodeId a);
    NodeId lincomb(const std::vector<NodeId>& xs, const std::vector<double>& coeffs);
    NodeId pad_rows(NodeId a, std::size_t new_rows);
    NodeId slice_cols(NodeId a, std::size_t first, std::size_t count);
    NodeId concat_cols(const std::vector<NodeId>& xs);
    NodeId softmax_rows(NodeId a);
    // keep: rank-1 [cols] shared across rows, or rank-2 [rows x cols] per-row.
    // Every row must keep at least one column.
    NodeId masked_softmax_rows(NodeId scores, Tensor keep);
    NodeId layer_norm_rows(NodeId x, NodeId gamma, NodeId beta, double eps);
    NodeId gelu(NodeId x);
    NodeId gather_row(NodeId x, std::size_t row);
    // E[i] = tok[token_ids[i]] + seg[segment_ids[i]] + pos[i]
    NodeId embed_rows(NodeId tok_table, NodeId seg_table, NodeId pos_table,
                      const std::vector<int>& token_ids, const std::vector<int>& segment_ids);
    // -sum_c target[c] * log softmax(logits)[c]; target must sum to 1 within 1e-6.
    NodeId softmax_cross_entropy(NodeId logits, Tensor target);

    const Tensor& value(NodeId id) const;
    void backward(NodeId loss);
    // Gradient of the last backward() loss w.r.t. the node; zero tensor if the
    // node was not on the loss path.
    Tensor grad(NodeId id) const;

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t last_backward_visits() const { return last_visits_; }
    void reset();

private:
    struct Node {
        Tensor value;
        std::vector<NodeId> parents;
        std::vector<Tensor> saved;
        std::vector<int> imeta;
        std::vector<double> dmeta;
        void (*backward)(Tape&, NodeId) = nullptr;
        const char* op = "leaf";
    };

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    std::size_t last_visits_ = 0;

    NodeId push(Node n);
    const Node& node(NodeId id) const;
    Tensor& grad_mut(NodeId id);
    const Tensor& out_grad(NodeId id) const { return grads_[static_cast<std::size_t>(id)]; }

    static void backward_matmul(Tape& t, NodeId id);
    static void backward_matmul_nt(Tape& t, NodeId id);
    static void backward_add(Tape& t, NodeId id);
    static void backward_add_row_bias(Tape& t, NodeId id);
    static void backward_mul(Tape& t, NodeId id);
    static void backward_lincomb(Tape& t, NodeId id);
    static void backward_pad_rows(Tape& t, NodeId id);
    static void backward_slice_cols(Tape& t, NodeId id);
    static void backward_concat_cols(Tape& t, NodeId id);
    static void backward_softmax_rows(Tape& t, NodeId id);
    static void backward_masked_softmax_rows(Tape& t, NodeId id);
    static void backward_layer_norm_rows(Tape& t, NodeId id);
    static void backward_gelu(Tape& t, NodeId id);
    static void backward_gather_row(Tape& t, NodeId id);
    static void backward_embed_rows(Tape& t, NodeId id);
    static void backward_softmax_cross_entropy(Tape& t, NodeId id);
};

}  // namespace mixpro

#include "mixpro/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "mixpro/kernels.hpp"

namespace mixpro {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Rank-1 tensors flow through matrix ops as a single row.
std::size_t row_count(const Tensor& t) { return t.rank() == 2 ? t.shape()[0] : 1; }
std::size_t col_count(const Tensor& t) { return t.rank() == 2 ? t.shape()[1] : t.size(); }

void accumulate(Tensor& g, const double* delta, std::size_t n) {
    double* d = g.data();
    for (std::size_t i = 0; i < n; ++i) d[i] += delta[i];
}

}  // namespace

NodeId Tape::push(Node n) {
    n.value.ensure_finite(n.op);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

const Tape::Node& Tape::node(NodeId id) const {
    require(id >= 0 && static_cast<std::size_t>(id) < nodes_.size(),
            "Tape: node id " + std::to_string(id) + " out of range");
    return nodes_[static_cast<std::size_t>(id)];
}

const Tensor& Tape::value(NodeId id) const { return node(id).value; }

Tensor& Tape::grad_mut(NodeId id) {
    Tensor& g = grads_[static_cast<std::size_t>(id)];
    if (g.empty() && nodes_[static_cast<std::size_t>(id)].value.size() > 0) {
        g = Tensor(nodes_[static_cast<std::size_t>(id)].value.shape());
    }
    return g;
}

Tensor Tape::grad(NodeId id) const {
    node(id);
    if (grads_.size() == nodes_.size()) {
        const Tensor& g = grads_[static_cast<std::size_t>(id)];
        if (!g.empty()) return g;
    }
    return Tensor(node(id).value.shape());
}

void Tape::reset() {
    nodes_.clear();
    grads_.clear();
    last_visits_ = 0;
}

NodeId Tape::leaf(Tensor value) {
    Node n;
    n.value = std::move(value);
    n.op = "leaf";
    return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require(av.rank() >= 1 && av.rank() <= 2 && bv.rank() == 2,
            "matmul: need rank-1/2 lhs and rank-2 rhs, got " + av.shape_str() + " x " + bv.shape_str());
    std::size_t m = row_count(av), k = col_count(av);
    require(bv.shape()[0] == k, "matmul: inner dims differ: " + av.shape_str() + " x " + bv.shape_str());
    std::size_t n = bv.shape()[1];
    Tensor out = av.rank() == 1 ? Tensor({n}) : Tensor({m, n});
    kernels::matmul(av.data(), bv.data(), out.data(), m, k, n);
    Node nd;
    nd.value = std::move(out);
    nd.parents = {a, b};
    nd.backward = &backward_matmul;
    nd.op = "matmul";
    return push(std::move(nd));
}

void Tape::backward_matmul(Tape& t, NodeId id) {
    const Node& nd = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& av = t.value(nd.parents[0]);
    const Tensor& bv = t.value(nd.parents[1]);
    const Tensor& g = t.out_grad(id);
    std::size_t m = row_count(av), k = col_count(av), n = bv.shape()[1];
    std::vector<double> tmp(m * k);
    kernels::matmul_nt(g.data(), bv.data(), tmp.data(), m, n, k);
    accumulate(t.grad_mut(nd.parents[0]), tmp.data(), m * k);
    tmp.assign(k * n, 0.0);
    kernels::matmul_tn(av.data(), g.data(), tmp.data(), k, m, n);
    accumulate(t.grad_mut(nd.parents[1]), tmp.data(), k * n);
}

NodeId Tape::matmul_nt(NodeId a, NodeId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require(av.rank() == 2 && bv.rank() == 2, "matmul_nt: need rank-2 operands");
    std::size_t m = av.shape()[0], k = av.shape()[1];
    require(bv.shape()[1] == k, "matmul_nt: inner dims differ: " + av.shape_str() + " x " + bv.shape_str());
    std::size_t n = bv.shape()[0];
    Tensor out({m, n});
    kernels::matmul_nt(av.data(), bv.data(), out.data(), m, k, n);
    Node nd;
    nd.value = std::move(out);
    nd.parents = {a, b};
    nd.backward = &backward_matmul_nt;
    nd.op = "matmul_nt";
    return push(std::move(nd));
}

void Tape::backward_matmul_nt(Tape& t, NodeId id) {
    const Node& nd = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& av = t.value(nd.parents[0]);
    const Tensor& bv = t.value(nd.parents[1]);
    const Tensor& g = t.out_grad(id);
    std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[0];
    // dA = dC * B ; dB = dC^T * A
    std::vector<double> tmp(m * k);
    kernels::matmul(g.data(), bv.data(), tmp.data(), m, n, k);
    accumulate(t.grad_mut(nd.parents[0]), tmp.data(), m * k);
    tmp.assign(n * k, 0.0);
    kernels::matmul_tn(g.data(), av.data(), tmp.data(), n, m, k);
    accumulate(t.grad_mut(nd.parents[1]), tmp.data(), n * k);
}

NodeId Tape::add(NodeId a, NodeId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require(av.same_shape(bv), "add: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    Tensor out(av.shape());
    kernels::add(av.data(), bv.data(), out.data(), av.size());
    Node nd;
    nd.value = std::move(out);
    nd.parents = {a, b};
    nd.backward = &backward_add;
    nd.op = "add";
    return push(std::move(nd));
}

void Tape::backward_add(Tape& t, NodeId id) {
    const Node& nd = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.out_grad(id);
    accumulate(t.grad_mut(nd.parents[0]), g.data(), g.size());
    accumulate(t.grad_mut(nd.parents[1]), g.data(), g.size());
}

NodeId Tape::add_row_bias(NodeId a, NodeId bias) {
    const Tensor& av = value(a);
    const Tensor& bv = value(bias);
    require(bv.rank() == 1, "add_row_bias: bias must be rank-1");
    std::size_t m = row_count(av), n = col_count(av);
    require(bv.size() == n, "add_row_bias: bias width " + bv.shape_str() + " vs " + av.shape_str());
    Tensor out(av.shape());
    for (std::size_t r = 0; r < m; ++r) {
        kernels::add(av.data() + r * n, bv.data(), out.data() + r * n, n);
    }
    Node nd;
    nd.value = std::move(out);
    nd.parents = {a, bias};
    nd.backward = &backward_add_row_bias;
    nd.op = "add_row_bias";
    return push(std::move(nd));
}

void Tape::backward_add_row_bias(Tape& t, NodeId id) {
    const Node& nd = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.out_grad(id);
    std::size_t m = row_count(g), n = col_count(g);
    accumulate(t.grad_mut(nd.parents[0]), g.data(), g.size());
    Tensor& gb = t.grad_mut(nd.parents[1]);
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
    }
}

NodeId Tape::mul(NodeId a, NodeId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require(av.same_shape(bv), "mul: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    Tensor out(av.shape());
    kernels::mul(av.data(), bv.data(), out.data(), av.size());
    Node nd;
    nd.value = std::move(out);
    nd.parents = {a, b};
    nd.backward = &backward_mul;
    nd.op = "mul";
    return push(std::move(nd));
}

void Tape::backward_mul(Tape& t, NodeId id) {
    const Node& nd = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.out_grad(id);
    const Tensor& av = t.value(nd.parents[0]);
    const Tensor& bv = t.value(nd.parents[1]);
    Tensor& ga = t.grad_mut(nd.parents[0]);
    Tensor& gb = t.grad_mut(nd.parents[1]);
    for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i] * bv[i];
        gb[i] += g[i] * av[i];
    }
}

NodeId Tape::axpby(double alpha, NodeId a, double beta, NodeId b) {
    return lincomb({a, b}, {alpha, beta});
}

NodeId Tape::scale(double alpha, NodeId a) { return lincomb({a}, {alpha}); }

NodeId Tape::lincomb(const std::vector<NodeId>& xs, const std::vector<double>& coeffs) {
    require(!xs.empty() && xs.size() == coeffs.size(), "lincomb: need matching non-empty terms");
    const Tensor& first = value(xs[0]);
    for (NodeId x : xs) {
        require(value(x).same_shape(first),
                "lincomb: shape mismatch " + value(x).shape_str() + " vs " + first.shape_str());
    }
    Tensor out(first.shape());
    if (xs.size() == 2) {
        kernels::axpby(coeffs[0], value(xs[0]).data(), coeffs[1], value(xs[1]).data(), out.data(),
                       out.size());
    } else {
        kernels::scale(coeffs[0], first.data(), out.data(), out.size());
        for (std::size_t t = 1; t < xs.size(); ++t) {
            kernels::axpby(1.0, out.data(), coeffs[t], value(xs[t]).data(), out.data(), out.size());
        }
    }
    Node nd;
    nd.value = std::move(out);
    nd.parents = xs;
    nd.dmeta = coeffs;
    nd.backward = &backward_lincomb;
    nd.op = "lincomb";
    return push(std::move(nd));
}

void Tape::backward_lincomb(Tape& t, NodeId id) {
    const Node& nd = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.out_grad(id);
    for (std::size_t p = 0; p < nd.parents.size(); ++p) {
        Tensor& gp = t.grad_mut(nd.parents[p]);
        double c = nd.dmeta[p];
        for (std::size_t i = 0; i < g.size(); ++i) gp[i] += c * g[i];
    }
}

NodeId Tape::pad_rows(NodeId a, std::size_t new_rows) {
    const Tensor& av = value(a);
    require(av.rank() == 2, "pad_rows: need rank-2 input");
    std::size_t r = av.shape()[0], c = av.shape()[1];
    require(new_rows >= r, "pad_rows: cannot shrink " + av.shape_str());
    Tensor out({new_rows, c});
    std::copy(av.data(), av.data() + r * c, out.data());
    Node nd;
    nd.value = std::move(out);
    nd.parents = {a};
    nd.imeta = {static_cast<int>(r)};
    nd.backward = &backward_pad_rows;
    nd.op = "pad_rows";
    return push(std::move(nd));
}

void Tape::backward_pad_rows(Tape& t, NodeId id) {
    const Node& nd = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.out_grad(id);
    std::size_t r = static_cast<std::size_t>(nd.imeta[0]);
    std::size_t c = g.shape()[1];
    accumulate(t.grad_mut(nd.parents[0]), g.data(), r * c);
}

NodeId Tape::slice_cols(NodeId a, std::size_t first, std::size_t count) {
    const Tensor& av = value(a);
    require(av.rank() == 2, "slice_cols: need rank-2 input");
    std::size_t m = av.shape()[0], n = av.shape()[1];
    require(first + count <= n && count > 0, "slice_cols: range out of bounds for " + av.shape_str());
    Tensor out({m, count});
    for (std::size_t r = 0; r < m; ++r) {
        std::copy(av.data() + r * n + first, av.data() + r * n + first + count, out.data() + r * count);
    }
    Node nd;
    nd.value = std::move(out);
    nd.parents = {a};
    nd.imeta = {static_cast<int>(first), static_cast<int>(count)};
    nd.backward = &backward_slice_cols;
    nd.op = "slice_cols";
    return push(std::move(nd));
}

void Tape::backward_slice_cols(Tape& t, NodeId id) {
    const Node& nd = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.out_grad(id);
    const Tensor& av = t.value(nd.parents[0]);
    std::size_t m = av.shape()[0], n = av.shape()[1];
    std::size_t first = static_cast<std::size_t>(nd.imeta[0]);
    std::size_t count = static_cast<std::size_t>(nd.imeta[1]);
    Tensor& gp = t.grad_mut(nd.parents[0]);
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t j = 0; j < count; ++j) gp[r * n + first + j] += g[r * count + j];
    }
}

NodeId Tape::concat_cols(const std::vector<NodeId>& xs) {
    require(!xs.empty(), "concat_cols: need at least one input");
    std::size_t m = value(xs[0]).shape()[0];
    std::size_t total = 0;
    for (NodeId x : xs) {
        const Tensor& v = value(x);
        require(v.rank() == 2 && v.shape()[0] == m, "concat_cols: row mismatch at " + v.shape_str());
        total += v.shape()[1];
    }
    Tensor out({m, total});
    std::size_t off = 0;
    for (NodeId x : xs) {
        const Tensor& v = value(x);
        std::size_t w = v.shape()[1];
        for (std::size_t r = 0; r < m; ++r) {
            std::copy(v.data() + r * w, v.data() + (r + 1) * w, out.data() + r * total + off);
        }
        off += w;
    }
    Node nd;
    nd.value = std::move(out);
    nd.parents = xs;
    nd.backward = &backward_concat_cols;
    nd.op = "concat_cols";
    return push(std::move(nd));
}

void Tape::backward_concat_cols(Tape& t, NodeId id) {
    const Node& nd = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.out_grad(id);
    std::size_t m = g.shape()[0], total = g.shape()[1];
    std::size_t off = 0;
    for (NodeId p : nd.parents) {
        const Tensor& v = t.value(p);
        std::size_t w = v.shape()[1];
        Tensor& gp = t.grad_mut(p);
        for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t j = 0; j < w; ++j) gp[r * w + j] += g[r * total + off + j];
        }
        off += w;
    }
}

NodeId Tape::softmax_rows(NodeId a) {
    const Tensor& av = value(a);
    require(av.rank() >= 1 && av.rank() <= 2, "softmax_rows: need rank-1/2 input");
    std::size_t m = row_count(av), n = col_count(av);
    Tensor out(av.shape());
    kernels::softmax_rows(av.data(), out.data(), m, n);
    Node nd;
    nd.value = std::move(out);
    nd.parents = {a};
    nd.backward = &backward_softmax_rows;
    nd.op = "softmax_rows";
    return push(std::move(nd));
}

void Tape::backward_softmax_rows(Tape& t, NodeId id) {
    const Node& nd = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& y = nd.value;
    const Tensor& g = t.out_grad(id);
    std::size_t m = row_count(y), n = col_count(y);
    Tensor& gp = t.grad_mut(nd.parents[0]);
    for (std::size_t r = 0; r < m; ++r) {
        const double* yr = y.data() + r * n;
        const double* gr = g.data() + r * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += gr[j] * yr[j];
        for (std::size_t j = 0; j < n; ++j) gp[r * n + j] += yr[j] * (gr[j] - dot);
    }
}

NodeId Tape::masked_softmax_rows(NodeId scores, Tensor keep) {
    const Tensor& sv = value(scores);
    require(sv.rank() == 2, "masked_softmax_rows: need rank-2 scores");
    std::size_t m = sv.shape()[0], n = sv.shape()[1];
    std::size_t stride;
    if (keep.rank() == 1) {
        require(keep.size() == n, "masked_softmax_rows: keep width mismatch");
        stride = 0;
    } else {
        require(keep.rank() == 2 && keep.same_shape(sv), "masked_softmax_rows: keep shape mismatch");
        stride = n;
    }
    std::size_t check_rows = stride == 0 ? 1 : m;
    for (std::size_t r = 0; r < check_rows; ++r) {
        bool any = false;
        for (std::size_t j = 0; j < n; ++j) {
            if (keep[r * stride + j] != 0.0) {
                any = true;
                break;
            }
        }
        require(any, "masked_softmax_rows: attention mask leaves row " + std::to_string(r) + " empty");
    }
    Tensor out({m, n});
    kernels::masked_softmax_rows(sv.data(), keep.data(), stride, out.data(), m, n);
    Node nd;
    nd.value = std::move(out);
    nd.parents = {scores};
    nd.saved = {std::move(keep)};
    nd.imeta = {static_cast<int>(stride)};
    nd.backward = &backward_masked_softmax_rows;
    nd.op = "masked_softmax_rows";
    return push(std::move(nd));
}

void Tape::backward_masked_softmax_rows(Tape& t, NodeId id) {
    // Masked columns carry y == 0, so the plain softmax backward already sends
    // zero gradient through them.
    backward_softmax_rows(t, id);
}

NodeId Tape::layer_norm_rows(NodeId x, NodeId gamma, NodeId beta, double eps) {
    const Tensor& xv = value(x);
    const Tensor& gv = value(gamma);
    const Tensor& bv = value(beta);
    require(xv.rank() >= 1 && xv.rank() <= 2, "layer_norm_rows: need rank-1/2 input");
    std::size_t m = row_count(xv), n = col_count(xv);
    require(gv.rank() == 1 && gv.size() == n && bv.rank() == 1 && bv.size() == n,
            "layer_norm_rows: gamma/beta width mismatch with " + xv.shape_str());
    require(eps > 0.0, "layer_norm_rows: eps must be positive");
    Tensor out(xv.shape());
    Tensor xhat({m, n});
    Tensor rstd({m});
    kernels::layer_norm_rows(xv.data(), gv.data(), bv.data(), eps, out.data(), xhat.data(), rstd.data(),
                             m, n);
    Node nd;
    nd.value = std::move(out);
    nd.parents = {x, gamma, beta};
    nd.saved = {std::move(xhat), std::move(rstd)};
    nd.backward = &backward_layer_norm_rows;
    nd.op = "layer_norm_rows";
    return push(std::move(nd));
}

void Tape::backward_layer_norm_rows(Tape& t, NodeId id) {
    const Node& nd = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.out_grad(id);
    const Tensor& xhat = nd.saved[0];
    const Tensor& rstd = nd.saved[1];
    const Tensor& gamma = t.value(nd.parents[1]);
    std::size_t m = row_count(g), n = col_count(g);
    Tensor& gx = t.grad_mut(nd.parents[0]);
    Tensor& gg = t.grad_mut(nd.parents[1]);
    Tensor& gb = t.grad_mut(nd.parents[2]);
    for (std::size_t r = 0; r < m; ++r) {
        const double* gr = g.data() + r * n;
        const double* hr = xhat.data() + r * n;
        double mean_dh = 0.0, mean_dh_h = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double dh = gr[j] * gamma[j];
            mean_dh += dh;
            mean_dh_h += dh * hr[j];
            gg[j] += gr[j] * hr[j];
            gb[j] += gr[j];
        }
        mean_dh /= static_cast<double>(n);
        mean_dh_h /= static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) {
            double dh = gr[j] * gamma[j];
            gx[r * n + j] += rstd[r] * (dh - mean_dh - hr[j] * mean_dh_h);
        }
    }
}

NodeId Tape::gelu(NodeId x) {
    const Tensor& xv = value(x);
    Tensor out(xv.shape());
    kernels::gelu(xv.data(), out.data(), xv.size());
    Node nd;
    nd.value = std::move(out);
    nd.parents = {x};
    nd.backward = &backward_gelu;
    nd.op = "gelu";
    return push(std::move(nd));
}

void Tape::backward_gelu(Tape& t, NodeId id) {
    const Node& nd = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.out_grad(id);
    const Tensor& xv = t.value(nd.parents[0]);
    std::vector<double> tmp(g.size());
    kernels::gelu_backward(xv.data(), g.data(), tmp.data(), g.size());
    accumulate(t.grad_mut(nd.parents[0]), tmp.data(), g.size());
}

NodeId Tape::gather_row(NodeId x, std::size_t row) {
    const Tensor& xv = value(x);
    require(xv.rank() == 2, "gather_row: need rank-2 input");
    std::size_t m = xv.shape()[0], n = xv.shape()[1];
    require(row < m, "gather_row: row " + std::to_string(row) + " out of bounds for " + xv.shape_str());
    Tensor out({n});
    std::copy(xv.data() + row * n, xv.data() + (row + 1) * n, out.data());
    Node nd;
    nd.value = std::move(out);
    nd.parents = {x};
    nd.imeta = {static_cast<int>(row)};
    nd.backward = &backward_gather_row;
    nd.op = "gather_row";
    return push(std::move(nd));
}

void Tape::backward_gather_row(Tape& t, NodeId id) {
    const Node& nd = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.out_grad(id);
    std::size_t row = static_cast<std::size_t>(nd.imeta[0]);
    std::size_t n = g.size();
    Tensor& gp = t.grad_mut(nd.parents[0]);
    for (std::size_t j = 0; j < n; ++j) gp[row * n + j] += g[j];
}

NodeId Tape::embed_rows(NodeId tok_table, NodeId seg_table, NodeId pos_table,
                        const std::vector<int>& token_ids, const std::vector<int>& segment_ids) {
    const Tensor& tok = value(tok_table);
    const Tensor& seg = value(seg_table);
    const Tensor& pos = value(pos_table);
    require(tok.rank() == 2 && seg.rank() == 2 && pos.rank() == 2, "embed_rows: tables must be rank-2");
    std::size_t d = tok.shape()[1];
    require(seg.shape()[1] == d && pos.shape()[1] == d, "embed_rows: table widths differ");
    std::size_t s = token_ids.size();
    require(s > 0 && segment_ids.size() == s, "embed_rows: need aligned non-empty id lists");
    require(s <= pos.shape()[0], "embed_rows: sequence length " + std::to_string(s) +
                                     " exceeds position table rows " + std::to_string(pos.shape()[0]));
    Tensor out({s, d});
    for (std::size_t i = 0; i < s; ++i) {
        int ti = token_ids[i], si = segment_ids[i];
        require(ti >= 0 && static_cast<std::size_t>(ti) < tok.shape()[0],
                "embed_rows: token id " + std::to_string(ti) + " out of vocab range");
        require(si >= 0 && static_cast<std::size_t>(si) < seg.shape()[0],
                "embed_rows: segment id " + std::to_string(si) + " out of range");
        const double* tr = tok.data() + static_cast<std::size_t>(ti) * d;
        const double* sr = seg.data() + static_cast<std::size_t>(si) * d;
        const double* pr = pos.data() + i * d;
        double* orow = out.data() + i * d;
        for (std::size_t c = 0; c < d; ++c) orow[c] = tr[c] + sr[c] + pr[c];
    }
    Node nd;
    nd.value = std::move(out);
    nd.parents = {tok_table, seg_table, pos_table};
    nd.imeta.reserve(2 * s);
    for (int v : token_ids) nd.imeta.push_back(v);
    for (int v : segment_ids) nd.imeta.push_back(v);
    nd.backward = &backward_embed_rows;
    nd.op = "embed_rows";
    return push(std::move(nd));
}

void Tape::backward_embed_rows(Tape& t, NodeId id) {
    const Node& nd = t.nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = t.out_grad(id);
    std::size_t s = g.shape()[0], d = g.shape()[1];
    Tensor& gtok = t.grad_mut(nd.parents[0]);
    Tensor& gseg = t.grad_mut(nd.parents[1]);
    Tensor& gpos = t.grad_mut(nd.parents[2]);
    for (std::size_t i = 0; i < s; ++i) {
        auto ti = static_cast<std::size_t>(nd.imeta[i]);
        auto si = static_cast<std::size_t>(nd.imeta[s + i]);
        const double* gr = g.data() + i * d;
        for (std::size_t c = 0; c < d; ++c) {
            gtok[ti * d + c] += gr[c];
            gseg[si * d + c] += gr[c];
            gpos[i * d + c] += gr[c];
        }
    }
}

NodeId Tape::softmax_cross_entropy(NodeId logits, Tensor target) {
    const Tensor& lv = value(logits);
    require(lv.rank() == 1, "softmax_cross_entropy: logits must be rank-1");
    std::size_t c = lv.size();
    require(target.size() == c, "softmax_cross_entropy: target width " + target.shape_str() +
                                    " vs logits " + lv.shape_str());
    double sum = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        require(target[i] >= -1e-12, "softmax_cross_entropy: negative target entry");
        sum += target[i];
    }
    require(std::abs(sum - 1.0) <= 1e-6,
            "softmax_cross_entropy: target sums to " + std::to_string(sum) + ", expected 1");
    double mx = lv[0];
    for (std::size_t i = 1; i < c; ++i) mx = std::max(mx, lv[i]);
    double se = 0.0;
    for (std::size_t i = 0; i < c; ++i) se += std::exp(lv[i] - mx);
    double lse = mx + std::log(se);
    double loss = 0.0;
    Tensor p({c});
    for (std::size_t i = 0; i < c; ++i) {
        p[i] = std::exp(lv[i] - lse);
        loss += target[i] * (lse - lv[i]);
    }
    Node nd;
    nd.value = Tensor::scalar(loss);
    nd.parents = {logits};
    nd.saved = {std::move(p), std::move(target)};
    nd.backward = &backward_softmax_cross_entropy;
    nd.op = "softmax_cross_entropy";
    return push(std::move(nd));
}

void Tape::backward_softmax_cross_entropy(Tape& t, NodeId id) {
    const Node& nd = t.nodes_[static_cast<std::size_t>(id)];
    double g = t.out_grad(id)[0];
    const Tensor& p = nd.saved[0];
    const Tensor& y = nd.saved[1];
    Tensor& gl = t.grad_mut(nd.parents[0]);
    for (std::size_t i = 0; i < p.size(); ++i) gl[i] += g * (p[i] - y[i]);
}

void Tape::backward(NodeId loss) {
    const Node& ln = node(loss);
    if (ln.value.size() != 1) {
        throw std::invalid_argument("Tape::backward: loss must be scalar, got " + ln.value.shape_str());
    }
    grads_.assign(nodes_.size(), Tensor{});
    grad_mut(loss)[0] = 1.0;
    last_visits_ = 0;
    for (NodeId id = loss; id >= 0; --id) {
        ++last_visits_;
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        if (grads_[static_cast<std::size_t>(id)].empty()) continue;
        if (n.backward != nullptr) n.backward(*this, id);
    }
}

}  // namespace mixpro

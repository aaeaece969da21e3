#include "mixpro/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "mixpro/kernels.hpp"
#include "mixpro/mixup.hpp"

namespace mixpro {

namespace {

constexpr int kCheckpointVersion = 1;
constexpr const char* kCheckpointFormat = "mixpro-checkpoint";

ModelParams make_skeleton(const ModelConfig& config, std::size_t vocab_size, int label_count) {
    config.validate();
    if (vocab_size < 3) throw std::invalid_argument("ModelParams: vocab must hold the reserved tokens");
    if (label_count < 2) throw std::invalid_argument("ModelParams: need at least two labels");
    std::size_t d = config.hidden_dim, ff = config.ff_dim();
    ModelParams p;
    p.config = config;
    p.vocab_size = vocab_size;
    p.label_count = label_count;
    p.token_table = Tensor({vocab_size, d});
    p.segment_table = Tensor({2, d});
    p.position_table = Tensor({config.max_seq, d});
    p.layers.resize(config.num_layers);
    for (LayerParams& l : p.layers) {
        l.wq = Tensor({d, d});
        l.bq = Tensor({d});
        l.wk = Tensor({d, d});
        l.bk = Tensor({d});
        l.wv = Tensor({d, d});
        l.bv = Tensor({d});
        l.wo = Tensor({d, d});
        l.bo = Tensor({d});
        l.ln1_gamma = Tensor({d});
        l.ln1_beta = Tensor({d});
        l.w1 = Tensor({d, ff});
        l.b1 = Tensor({ff});
        l.w2 = Tensor({ff, d});
        l.b2 = Tensor({d});
        l.ln2_gamma = Tensor({d});
        l.ln2_beta = Tensor({d});
    }
    p.head_w = Tensor({d, static_cast<std::size_t>(label_count)});
    p.head_b = Tensor({static_cast<std::size_t>(label_count)});
    return p;
}

void fill_normal(Tensor& t, double std, Rng& rng) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * std;
}

void fill_xavier(Tensor& t, Rng& rng) {
    double std = std::sqrt(2.0 / static_cast<double>(t.shape()[0] + t.shape()[1]));
    fill_normal(t, std, rng);
}

void fill_ones(Tensor& t) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = 1.0;
}

}  // namespace

void ModelConfig::validate() const {
    if (hidden_dim == 0 || num_heads == 0 || max_seq == 0) {
        throw std::invalid_argument("ModelConfig: dimensions must be positive");
    }
    if (hidden_dim % num_heads != 0) {
        throw std::invalid_argument("ModelConfig: hidden_dim " + std::to_string(hidden_dim) +
                                    " not divisible by num_heads " + std::to_string(num_heads));
    }
    if (!(ln_eps > 0.0)) throw std::invalid_argument("ModelConfig: ln_eps must be positive");
}

ModelParams ModelParams::init(const ModelConfig& config, std::size_t vocab_size, int label_count,
                              Rng& rng) {
    ModelParams p = make_skeleton(config, vocab_size, label_count);
    fill_normal(p.token_table, 0.08, rng);
    fill_normal(p.segment_table, 0.08, rng);
    fill_normal(p.position_table, 0.08, rng);
    for (LayerParams& l : p.layers) {
        fill_xavier(l.wq, rng);
        fill_xavier(l.wk, rng);
        fill_xavier(l.wv, rng);
        fill_xavier(l.wo, rng);
        fill_ones(l.ln1_gamma);
        fill_xavier(l.w1, rng);
        fill_xavier(l.w2, rng);
        fill_ones(l.ln2_gamma);
    }
    fill_xavier(p.head_w, rng);
    return p;
}

std::vector<Tensor*> ModelParams::tensors() {
    std::vector<Tensor*> out = {&token_table, &segment_table, &position_table};
    for (LayerParams& l : layers) {
        out.insert(out.end(), {&l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo, &l.ln1_gamma,
                               &l.ln1_beta, &l.w1, &l.b1, &l.w2, &l.b2, &l.ln2_gamma, &l.ln2_beta});
    }
    out.push_back(&head_w);
    out.push_back(&head_b);
    return out;
}

std::vector<const Tensor*> ModelParams::tensors() const {
    auto mutable_list = const_cast<ModelParams*>(this)->tensors();
    return {mutable_list.begin(), mutable_list.end()};
}

std::vector<std::string> ModelParams::tensor_names() const {
    std::vector<std::string> out = {"token_table", "segment_table", "position_table"};
    static const char* kLayerFields[] = {"wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo",
                                         "ln1_gamma", "ln1_beta", "w1", "b1", "w2", "b2",
                                         "ln2_gamma", "ln2_beta"};
    for (std::size_t i = 0; i < layers.size(); ++i) {
        for (const char* f : kLayerFields) out.push_back("layer" + std::to_string(i) + "." + f);
    }
    out.emplace_back("head_w");
    out.emplace_back("head_b");
    return out;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const Tensor* t : tensors()) n += t->size();
    return n;
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
    nlohmann::json j;
    j["format"] = kCheckpointFormat;
    j["format_version"] = kCheckpointVersion;
    j["model"] = {{"hidden_dim", params.config.hidden_dim},
                  {"num_layers", params.config.num_layers},
                  {"num_heads", params.config.num_heads},
                  {"max_seq", params.config.max_seq},
                  {"ln_eps", params.config.ln_eps},
                  {"vocab_size", params.vocab_size},
                  {"label_count", params.label_count}};
    nlohmann::json tensors = nlohmann::json::array();
    std::vector<const Tensor*> ts = params.tensors();
    std::vector<std::string> names = params.tensor_names();
    for (std::size_t i = 0; i < ts.size(); ++i) {
        nlohmann::json entry;
        entry["name"] = names[i];
        entry["shape"] = ts[i]->shape();
        entry["data"] = std::vector<double>(ts[i]->data(), ts[i]->data() + ts[i]->size());
        tensors.push_back(std::move(entry));
    }
    j["tensors"] = std::move(tensors);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out << j.dump() << '\n';
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("load_checkpoint: " + path + ": " + e.what());
    }
    if (j.value("format", "") != kCheckpointFormat || j.value("format_version", 0) != kCheckpointVersion) {
        throw std::runtime_error("load_checkpoint: " + path + " is not a known checkpoint format");
    }
    const nlohmann::json& m = j.at("model");
    ModelConfig config;
    config.hidden_dim = m.at("hidden_dim").get<std::size_t>();
    config.num_layers = m.at("num_layers").get<std::size_t>();
    config.num_heads = m.at("num_heads").get<std::size_t>();
    config.max_seq = m.at("max_seq").get<std::size_t>();
    config.ln_eps = m.at("ln_eps").get<double>();
    ModelParams params = make_skeleton(config, m.at("vocab_size").get<std::size_t>(),
                                       m.at("label_count").get<int>());
    std::vector<Tensor*> ts = params.tensors();
    std::vector<std::string> names = params.tensor_names();
    const nlohmann::json& tensors = j.at("tensors");
    if (tensors.size() != ts.size()) {
        throw std::runtime_error("load_checkpoint: expected " + std::to_string(ts.size()) +
                                 " tensors, found " + std::to_string(tensors.size()));
    }
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const nlohmann::json& entry = tensors.at(i);
        std::string name = entry.at("name").get<std::string>();
        if (name != names[i]) {
            throw std::runtime_error("load_checkpoint: tensor " + std::to_string(i) + " is \"" + name +
                                     "\", expected \"" + names[i] + "\"");
        }
        auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        if (shape != ts[i]->shape()) {
            Tensor probe(shape);
            throw std::runtime_error("load_checkpoint: tensor " + name + " has shape " +
                                     probe.shape_str() + ", expected " + ts[i]->shape_str());
        }
        auto data = entry.at("data").get<std::vector<double>>();
        if (data.size() != ts[i]->size()) {
            throw std::runtime_error("load_checkpoint: tensor " + name + " has " +
                                     std::to_string(data.size()) + " values, expected " +
                                     std::to_string(ts[i]->size()));
        }
        std::copy(data.begin(), data.end(), ts[i]->data());
        ts[i]->ensure_finite("load_checkpoint: " + name);
    }
    return params;
}

ParamNodes register_params(Tape& tape, const ModelParams& params) {
    ParamNodes pn;
    auto reg = [&](const Tensor& t) {
        NodeId id = tape.leaf(t);
        pn.all.push_back(id);
        return id;
    };
    pn.token_table = reg(params.token_table);
    pn.segment_table = reg(params.segment_table);
    pn.position_table = reg(params.position_table);
    for (const LayerParams& l : params.layers) {
        LayerNodes ln;
        ln.wq = reg(l.wq);
        ln.bq = reg(l.bq);
        ln.wk = reg(l.wk);
        ln.bk = reg(l.bk);
        ln.wv = reg(l.wv);
        ln.bv = reg(l.bv);
        ln.wo = reg(l.wo);
        ln.bo = reg(l.bo);
        ln.ln1_gamma = reg(l.ln1_gamma);
        ln.ln1_beta = reg(l.ln1_beta);
        ln.w1 = reg(l.w1);
        ln.b1 = reg(l.b1);
        ln.w2 = reg(l.w2);
        ln.b2 = reg(l.b2);
        ln.ln2_gamma = reg(l.ln2_gamma);
        ln.ln2_beta = reg(l.ln2_beta);
        pn.layers.push_back(ln);
    }
    pn.head_w = reg(params.head_w);
    pn.head_b = reg(params.head_b);
    return pn;
}

NodeId embed_prompt(Tape& tape, const ParamNodes& pn, const std::vector<int>& tokens,
                    const std::vector<int>& segments) {
    return tape.embed_rows(pn.token_table, pn.segment_table, pn.position_table, tokens, segments);
}

NodeId encode_tape(Tape& tape, const ParamNodes& pn, const ModelConfig& config, NodeId e,
                   const std::vector<double>& attention) {
    const Tensor& ev = tape.value(e);
    if (ev.rank() != 2 || ev.shape()[1] != config.hidden_dim) {
        throw std::invalid_argument("encode: embeddings " + ev.shape_str() + " do not match hidden dim " +
                                    std::to_string(config.hidden_dim));
    }
    if (attention.size() != ev.shape()[0]) {
        throw std::invalid_argument("encode: attention mask length does not match sequence");
    }
    if (pn.layers.size() != config.num_layers) {
        throw std::invalid_argument("encode: parameter nodes do not match layer count");
    }
    Tensor keep({attention.size()});
    std::copy(attention.begin(), attention.end(), keep.data());
    std::size_t hd = config.head_dim();
    double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    NodeId x = e;
    for (std::size_t li = 0; li < pn.layers.size(); ++li) {
        const LayerNodes& l = pn.layers[li];
        try {
            NodeId q = tape.add_row_bias(tape.matmul(x, l.wq), l.bq);
            NodeId k = tape.add_row_bias(tape.matmul(x, l.wk), l.bk);
            NodeId v = tape.add_row_bias(tape.matmul(x, l.wv), l.bv);
            std::vector<NodeId> heads;
            heads.reserve(config.num_heads);
            for (std::size_t h = 0; h < config.num_heads; ++h) {
                NodeId qh = tape.slice_cols(q, h * hd, hd);
                NodeId kh = tape.slice_cols(k, h * hd, hd);
                NodeId vh = tape.slice_cols(v, h * hd, hd);
                NodeId scores = tape.scale(scale, tape.matmul_nt(qh, kh));
                NodeId probs = tape.masked_softmax_rows(scores, keep);
                heads.push_back(tape.matmul(probs, vh));
            }
            NodeId ctx = config.num_heads == 1 ? heads[0] : tape.concat_cols(heads);
            NodeId attn = tape.add_row_bias(tape.matmul(ctx, l.wo), l.bo);
            x = tape.layer_norm_rows(tape.add(x, attn), l.ln1_gamma, l.ln1_beta, config.ln_eps);
            NodeId ff = tape.add_row_bias(tape.matmul(x, l.w1), l.b1);
            ff = tape.add_row_bias(tape.matmul(tape.gelu(ff), l.w2), l.b2);
            x = tape.layer_norm_rows(tape.add(x, ff), l.ln2_gamma, l.ln2_beta, config.ln_eps);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("encode: layer " + std::to_string(li) + ": " + e.what());
        }
    }
    return x;
}

NodeId head_logits(Tape& tape, const ParamNodes& pn, NodeId h) {
    return tape.add_row_bias(tape.matmul(h, pn.head_w), pn.head_b);
}

MixedForwardResult mixed_forward(Tape& tape, const ParamNodes& pn, const ModelConfig& config,
                                 const MixedForwardInputs& in) {
    if (in.p == nullptr || in.q == nullptr) {
        throw std::invalid_argument("mixed_forward: missing prompt pair");
    }
    if (!(in.lambda >= 0.0 && in.lambda <= 1.0)) {
        throw std::invalid_argument("mixed_forward: lambda outside [0, 1]");
    }
    const Prompt& p = *in.p;
    const Prompt& q = *in.q;
    std::size_t s = std::max(p.length(), q.length());

    NodeId e_p = embed_prompt(tape, pn, p.tokens, p.segments);
    NodeId e_p_pad = p.length() < s ? tape.pad_rows(e_p, s) : e_p;
    MixedForwardResult out;
    NodeId e;
    if (in.mix_tokens) {
        NodeId e_q = embed_prompt(tape, pn, q.tokens, q.segments);
        NodeId e_q_pad = q.length() < s ? tape.pad_rows(e_q, s) : e_q;
        e = tape.axpby(in.lambda, e_p_pad, 1.0 - in.lambda, e_q_pad);
        out.lambda_token = in.lambda;
    } else {
        e = e_p_pad;
    }

    std::vector<double> attention(s, 0.0);
    for (std::size_t i = 0; i < s; ++i) {
        bool real_p = i < p.length() && p.attention[i] != 0.0;
        bool real_q = i < q.length() && q.attention[i] != 0.0;
        attention[i] = (real_p || real_q) ? 1.0 : 0.0;
    }

    NodeId hidden = encode_tape(tape, pn, config, e, attention);
    NodeId h_p = tape.gather_row(hidden, p.mask_pos);
    NodeId h;
    Tensor y;
    if (in.mix_sentence) {
        NodeId h_q = tape.gather_row(hidden, q.mask_pos);
        h = tape.axpby(in.lambda, h_p, 1.0 - in.lambda, h_q);
        y = label_mixup(in.y_p, in.y_q, in.lambda);
        out.lambda_sentence = in.lambda;
        out.lambda_label = in.lambda;
    } else {
        h = h_p;
        y = in.y_p;
    }
    out.logits = head_logits(tape, pn, h);
    out.loss = tape.softmax_cross_entropy(out.logits, std::move(y));
    return out;
}

NodeId plain_forward_loss(Tape& tape, const ParamNodes& pn, const ModelConfig& config,
                          const Prompt& p, const Tensor& y) {
    NodeId e = embed_prompt(tape, pn, p.tokens, p.segments);
    NodeId hidden = encode_tape(tape, pn, config, e, p.attention);
    NodeId h = tape.gather_row(hidden, p.mask_pos);
    return tape.softmax_cross_entropy(head_logits(tape, pn, h), y);
}

Tensor embed(const Prompt& p, const ModelParams& params) {
    std::size_t d = params.config.hidden_dim;
    std::size_t s = p.length();
    if (s == 0) throw std::invalid_argument("embed: empty prompt");
    if (s > params.config.max_seq) {
        throw std::invalid_argument("embed: prompt length " + std::to_string(s) +
                                    " exceeds max_seq " + std::to_string(params.config.max_seq));
    }
    Tensor e({s, d});
    for (std::size_t i = 0; i < s; ++i) {
        int ti = p.tokens[i], si = p.segments[i];
        if (ti < 0 || static_cast<std::size_t>(ti) >= params.vocab_size) {
            throw std::invalid_argument("embed: token id " + std::to_string(ti) + " out of vocab range");
        }
        if (si < 0 || si > 1) {
            throw std::invalid_argument("embed: segment id " + std::to_string(si) + " out of range");
        }
        const double* tr = params.token_table.data() + static_cast<std::size_t>(ti) * d;
        const double* sr = params.segment_table.data() + static_cast<std::size_t>(si) * d;
        const double* pr = params.position_table.data() + i * d;
        double* row = e.data() + i * d;
        for (std::size_t c = 0; c < d; ++c) row[c] = tr[c] + sr[c] + pr[c];
    }
    return e;
}

// Mirrors encode_tape operation for operation so evaluation results match a
// tape forward bitwise.
Tensor encode(const Tensor& e, const std::vector<double>& attention, const ModelParams& params) {
    const ModelConfig& config = params.config;
    if (e.rank() != 2 || e.shape()[1] != config.hidden_dim) {
        throw std::invalid_argument("encode: embeddings " + e.shape_str() + " do not match hidden dim " +
                                    std::to_string(config.hidden_dim));
    }
    std::size_t s = e.shape()[0], d = config.hidden_dim;
    if (attention.size() != s) {
        throw std::invalid_argument("encode: attention mask length does not match sequence");
    }
    std::size_t hd = config.head_dim();
    double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    Tensor x = e;
    Tensor q({s, d}), k({s, d}), v({s, d});
    Tensor scores({s, s}), probs({s, s});
    Tensor ctx({s, d});
    Tensor tmp({s, config.ff_dim()});
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        const LayerParams& l = params.layers[li];
        try {
            auto project = [&](const Tensor& w, const Tensor& b, Tensor& dst) {
                kernels::matmul(x.data(), w.data(), dst.data(), s, d, d);
                for (std::size_t r = 0; r < s; ++r) {
                    kernels::add(dst.data() + r * d, b.data(), dst.data() + r * d, d);
                }
            };
            project(l.wq, l.bq, q);
            project(l.wk, l.bk, k);
            project(l.wv, l.bv, v);
            Tensor qh({s, hd}), kh({s, hd}), vh({s, hd}), ch({s, hd});
            for (std::size_t h = 0; h < config.num_heads; ++h) {
                for (std::size_t r = 0; r < s; ++r) {
                    std::copy(q.data() + r * d + h * hd, q.data() + r * d + (h + 1) * hd,
                              qh.data() + r * hd);
                    std::copy(k.data() + r * d + h * hd, k.data() + r * d + (h + 1) * hd,
                              kh.data() + r * hd);
                    std::copy(v.data() + r * d + h * hd, v.data() + r * d + (h + 1) * hd,
                              vh.data() + r * hd);
                }
                kernels::matmul_nt(qh.data(), kh.data(), scores.data(), s, hd, s);
                kernels::scale(scale, scores.data(), scores.data(), s * s);
                kernels::masked_softmax_rows(scores.data(), attention.data(), 0, probs.data(), s, s);
                kernels::matmul(probs.data(), vh.data(), ch.data(), s, s, hd);
                for (std::size_t r = 0; r < s; ++r) {
                    std::copy(ch.data() + r * hd, ch.data() + (r + 1) * hd,
                              ctx.data() + r * d + h * hd);
                }
            }
            Tensor attn({s, d});
            kernels::matmul(ctx.data(), l.wo.data(), attn.data(), s, d, d);
            for (std::size_t r = 0; r < s; ++r) {
                kernels::add(attn.data() + r * d, l.bo.data(), attn.data() + r * d, d);
            }
            Tensor sum({s, d});
            kernels::add(x.data(), attn.data(), sum.data(), s * d);
            Tensor xhat({s, d}), rstd({s});
            kernels::layer_norm_rows(sum.data(), l.ln1_gamma.data(), l.ln1_beta.data(), config.ln_eps,
                                     x.data(), xhat.data(), rstd.data(), s, d);
            kernels::matmul(x.data(), l.w1.data(), tmp.data(), s, d, config.ff_dim());
            for (std::size_t r = 0; r < s; ++r) {
                kernels::add(tmp.data() + r * config.ff_dim(), l.b1.data(),
                             tmp.data() + r * config.ff_dim(), config.ff_dim());
            }
            kernels::gelu(tmp.data(), tmp.data(), tmp.size());
            Tensor ff({s, d});
            kernels::matmul(tmp.data(), l.w2.data(), ff.data(), s, config.ff_dim(), d);
            for (std::size_t r = 0; r < s; ++r) {
                kernels::add(ff.data() + r * d, l.b2.data(), ff.data() + r * d, d);
            }
            kernels::add(x.data(), ff.data(), sum.data(), s * d);
            kernels::layer_norm_rows(sum.data(), l.ln2_gamma.data(), l.ln2_beta.data(), config.ln_eps,
                                     x.data(), xhat.data(), rstd.data(), s, d);
            x.ensure_finite("encode");
        } catch (const std::runtime_error& err) {
            throw std::runtime_error("encode: layer " + std::to_string(li) + ": " + err.what());
        }
    }
    return x;
}

std::pair<Tensor, Tensor> extract_mask_hidden(const Tensor& hidden, std::size_t pos_p,
                                              std::size_t pos_q) {
    if (hidden.rank() != 2) throw std::invalid_argument("extract_mask_hidden: need rank-2 hidden");
    std::size_t s = hidden.shape()[0], d = hidden.shape()[1];
    if (pos_p >= s || pos_q >= s) {
        throw std::invalid_argument("extract_mask_hidden: position out of bounds for " +
                                    hidden.shape_str());
    }
    Tensor hp({d}), hq({d});
    std::copy(hidden.data() + pos_p * d, hidden.data() + (pos_p + 1) * d, hp.data());
    std::copy(hidden.data() + pos_q * d, hidden.data() + (pos_q + 1) * d, hq.data());
    return {std::move(hp), std::move(hq)};
}

HeadResult head_and_loss(const Tensor& h, const Tensor& y, const ModelParams& params) {
    if (h.rank() != 1 || h.size() != params.config.hidden_dim) {
        throw std::invalid_argument("head_and_loss: hidden " + h.shape_str() + " does not match model");
    }
    auto c = static_cast<std::size_t>(params.label_count);
    if (y.size() != c) {
        throw std::invalid_argument("head_and_loss: target " + y.shape_str() + " vs " +
                                    std::to_string(c) + " labels");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < c; ++i) sum += y[i];
    if (std::abs(sum - 1.0) > 1e-6) {
        throw std::invalid_argument("head_and_loss: target sums to " + std::to_string(sum));
    }
    HeadResult out;
    out.logits = Tensor({c});
    kernels::matmul(h.data(), params.head_w.data(), out.logits.data(), 1, h.size(), c);
    kernels::add(out.logits.data(), params.head_b.data(), out.logits.data(), c);
    // Same stable log-sum-exp sequence as the tape loss so the two paths agree
    // bitwise.
    double mx = out.logits[0];
    for (std::size_t i = 1; i < c; ++i) mx = std::max(mx, out.logits[i]);
    double se = 0.0;
    for (std::size_t i = 0; i < c; ++i) se += std::exp(out.logits[i] - mx);
    double lse = mx + std::log(se);
    double loss = 0.0;
    for (std::size_t i = 0; i < c; ++i) loss += y[i] * (lse - out.logits[i]);
    out.loss = loss;
    return out;
}

Tensor softmax(const Tensor& logits) {
    if (logits.rank() != 1 || logits.size() == 0) {
        throw std::invalid_argument("softmax: need a non-empty rank-1 input");
    }
    Tensor out(logits.shape());
    kernels::softmax_rows(logits.data(), out.data(), 1, logits.size());
    return out;
}

}  // namespace mixpro

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mixpro/prompting.hpp"
#include "mixpro/rng.hpp"
#include "mixpro/tape.hpp"
#include "mixpro/tensor.hpp"

namespace mixpro {

struct ModelConfig {
    std::size_t hidden_dim = 32;
    std::size_t num_layers = 2;
    std::size_t num_heads = 4;
    std::size_t max_seq = 64;
    double ln_eps = 1e-5;

    std::size_t ff_dim() const { return 4 * hidden_dim; }
    std::size_t head_dim() const { return hidden_dim / num_heads; }
    void validate() const;
};

struct LayerParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln1_gamma, ln1_beta;
    Tensor w1, b1, w2, b2;
    Tensor ln2_gamma, ln2_beta;
};

struct ModelParams {
    ModelConfig config;
    std::size_t vocab_size = 0;
    int label_count = 0;
    Tensor token_table;
    Tensor segment_table;
    Tensor position_table;
    std::vector<LayerParams> layers;
    Tensor head_w;
    Tensor head_b;

    static ModelParams init(const ModelConfig& config, std::size_t vocab_size, int label_count,
                            Rng& rng);

    // Stable enumeration order shared by the optimizer, checkpoints, and
    // gradient checks.
    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
    std::vector<std::string> tensor_names() const;
    std::size_t parameter_count() const;
};

void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

// Tape-side forward pieces. ParamNodes mirrors ModelParams with one leaf per
// tensor, in the same enumeration order.
struct LayerNodes {
    NodeId wq, bq, wk, bk, wv, bv, wo, bo;
    NodeId ln1_gamma, ln1_beta;
    NodeId w1, b1, w2, b2;
    NodeId ln2_gamma, ln2_beta;
};

struct ParamNodes {
    NodeId token_table, segment_table, position_table;
    std::vector<LayerNodes> layers;
    NodeId head_w, head_b;
    std::vector<NodeId> all;
};

ParamNodes register_params(Tape& tape, const ModelParams& params);

NodeId embed_prompt(Tape& tape, const ParamNodes& pn, const std::vector<int>& tokens,
                    const std::vector<int>& segments);

// L blocks of multi-head self-attention + residual + layer norm + feed-forward
// + residual + layer norm. attention lists kept positions; masked positions
// never contribute as keys or values.
NodeId encode_tape(Tape& tape, const ParamNodes& pn, const ModelConfig& config, NodeId e,
                   const std::vector<double>& attention);

NodeId head_logits(Tape& tape, const ParamNodes& pn, NodeId h);

struct MixedForwardInputs {
    const Prompt* p = nullptr;
    const Prompt* q = nullptr;
    Tensor y_p;
    Tensor y_q;
    double lambda = 1.0;
    bool mix_tokens = true;
    bool mix_sentence = true;
};

struct MixedForwardResult {
    NodeId loss;
    NodeId logits;
    // Interpolation weight actually applied at each level; a disabled level
    // reduces to the pure original path, hence 1.
    double lambda_token = 1.0;
    double lambda_sentence = 1.0;
    double lambda_label = 1.0;
};

// One forward over the mixed pair: embed both prompts, interpolate the padded
// embeddings, encode once under the merged mask, read the hidden vectors at
// both answer positions, interpolate them and the labels, then head + CE.
// mix_tokens=false feeds the unmixed original embeddings through the pair's
// padded geometry; mix_sentence=false reads the original position only and
// keeps the original label.
MixedForwardResult mixed_forward(Tape& tape, const ParamNodes& pn, const ModelConfig& config,
                                 const MixedForwardInputs& in);

// Single-prompt path at natural length with the prompt's own mask.
NodeId plain_forward_loss(Tape& tape, const ParamNodes& pn, const ModelConfig& config,
                          const Prompt& p, const Tensor& y);

// Value-only forward for evaluation; mirrors the tape op sequence exactly.
Tensor embed(const Prompt& p, const ModelParams& params);
Tensor encode(const Tensor& e, const std::vector<double>& attention, const ModelParams& params);
std::pair<Tensor, Tensor> extract_mask_hidden(const Tensor& hidden, std::size_t pos_p,
                                              std::size_t pos_q);
struct HeadResult {
    Tensor logits;
    double loss;
};
HeadResult head_and_loss(const Tensor& h, const Tensor& y, const ModelParams& params);
Tensor softmax(const Tensor& logits);

}  // namespace mixpro

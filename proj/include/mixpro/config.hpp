#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "mixpro/model.hpp"
#include "mixpro/task.hpp"
#include "mixpro/train.hpp"

namespace mixpro {

// Flat key-value view of every run knob, loadable from a JSON config file.
// Unknown keys are rejected by name. The enable_* flags describe the mixup
// setup used when no --variant overrides them.
struct FlatConfig {
    std::size_t batch_size = 2;
    std::size_t grad_accumulation_steps = 8;
    std::size_t max_seq_length = 64;
    std::int64_t max_steps = 250;
    double adam_epsilon = 1e-8;
    double learning_rate = 1e-5;
    double max_grad_norm = 1.0;
    double weight_decay = 0.01;
    double mixup_alpha = 0.5;
    std::uint64_t seed = 1;
    double preserving_flipping_ratio = 0.5;
    bool lambda_per_batch = false;
    std::size_t hidden_dim = 32;
    std::size_t num_layers = 2;
    std::size_t num_heads = 4;
    bool enable_token_mixup = true;
    bool enable_sentence_mixup = true;
    bool enable_template_mixup = true;
    bool enable_vanilla_baseline = false;
    bool enable_text_aug = true;
    bool enable_template_aug = true;
    std::size_t task_train_size = 32;
    std::size_t task_dev_size = 256;
    std::size_t task_template_count = 3;
    std::size_t task_min_sentence_len = 6;
    std::size_t task_max_sentence_len = 10;
    std::size_t task_max_minority = 1;

    TrainingConfig training_config() const;
    ModelConfig model_config() const;
    SyntheticTaskSpec task_spec() const;
    VariantSpec flag_variant() const;

    nlohmann::json to_json() const;
    static FlatConfig from_json(const nlohmann::json& j);
    static FlatConfig load(const std::string& path);

    // FNV-1a over the canonical (key-sorted) JSON dump.
    std::uint64_t hash() const;
};

}  // namespace mixpro

#include "mixpro/config.hpp"

#include <fstream>
#include <stdexcept>

#include "mixpro/rng.hpp"

namespace mixpro {

TrainingConfig FlatConfig::training_config() const {
    TrainingConfig t;
    t.batch_size = batch_size;
    t.grad_accumulation_steps = grad_accumulation_steps;
    t.max_seq_length = max_seq_length;
    t.max_steps = max_steps;
    t.adam_epsilon = adam_epsilon;
    t.learning_rate = learning_rate;
    t.max_grad_norm = max_grad_norm;
    t.weight_decay = weight_decay;
    t.mixup_alpha = mixup_alpha;
    t.preserving_flipping_ratio = preserving_flipping_ratio;
    t.lambda_per_batch = lambda_per_batch;
    t.seed = seed;
    t.validate();
    return t;
}

ModelConfig FlatConfig::model_config() const {
    ModelConfig m;
    m.hidden_dim = hidden_dim;
    m.num_layers = num_layers;
    m.num_heads = num_heads;
    m.max_seq = max_seq_length;
    m.validate();
    return m;
}

SyntheticTaskSpec FlatConfig::task_spec() const {
    SyntheticTaskSpec spec = SyntheticTaskSpec::defaults();
    spec.train_size = task_train_size;
    spec.dev_size = task_dev_size;
    spec.template_count = task_template_count;
    spec.min_sentence_len = task_min_sentence_len;
    spec.max_sentence_len = task_max_sentence_len;
    spec.max_minority = task_max_minority;
    spec.validate();
    return spec;
}

VariantSpec FlatConfig::flag_variant() const {
    VariantSpec v;
    v.mixup.alpha = mixup_alpha;
    v.mixup.enable_token = enable_token_mixup;
    v.mixup.enable_sentence = enable_sentence_mixup;
    v.mixup.enable_template = enable_template_mixup;
    v.mixup.enable_vanilla_baseline = enable_vanilla_baseline;
    v.text_aug = enable_text_aug;
    v.template_aug = enable_template_aug;
    v.mixup.validate();
    return v;
}

nlohmann::json FlatConfig::to_json() const {
    return {
        {"batch_size", batch_size},
        {"grad_accumulation_steps", grad_accumulation_steps},
        {"max_seq_length", max_seq_length},
        {"max_steps", max_steps},
        {"adam_epsilon", adam_epsilon},
        {"learning_rate", learning_rate},
        {"max_grad_norm", max_grad_norm},
        {"weight_decay", weight_decay},
        {"mixup_alpha", mixup_alpha},
        {"seed", seed},
        {"preserving_flipping_ratio", preserving_flipping_ratio},
        {"lambda_per_batch", lambda_per_batch},
        {"hidden_dim", hidden_dim},
        {"num_layers", num_layers},
        {"num_heads", num_heads},
        {"enable_token_mixup", enable_token_mixup},
        {"enable_sentence_mixup", enable_sentence_mixup},
        {"enable_template_mixup", enable_template_mixup},
        {"enable_vanilla_baseline", enable_vanilla_baseline},
        {"enable_text_aug", enable_text_aug},
        {"enable_template_aug", enable_template_aug},
        {"task_train_size", task_train_size},
        {"task_dev_size", task_dev_size},
        {"task_template_count", task_template_count},
        {"task_min_sentence_len", task_min_sentence_len},
        {"task_max_sentence_len", task_max_sentence_len},
        {"task_max_minority", task_max_minority},
    };
}

FlatConfig FlatConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::runtime_error("config: expected a JSON object");
    FlatConfig c;
    auto read = [&](const char* key, auto& field) {
        auto it = j.find(key);
        if (it == j.end()) return;
        try {
            field = it->get<std::decay_t<decltype(field)>>();
        } catch (const std::exception&) {
            throw std::runtime_error(std::string("config: key \"") + key + "\" has the wrong type");
        }
    };
    read("batch_size", c.batch_size);
    read("grad_accumulation_steps", c.grad_accumulation_steps);
    read("max_seq_length", c.max_seq_length);
    read("max_steps", c.max_steps);
    read("adam_epsilon", c.adam_epsilon);
    read("learning_rate", c.learning_rate);
    read("max_grad_norm", c.max_grad_norm);
    read("weight_decay", c.weight_decay);
    read("mixup_alpha", c.mixup_alpha);
    read("seed", c.seed);
    read("preserving_flipping_ratio", c.preserving_flipping_ratio);
    read("lambda_per_batch", c.lambda_per_batch);
    read("hidden_dim", c.hidden_dim);
    read("num_layers", c.num_layers);
    read("num_heads", c.num_heads);
    read("enable_token_mixup", c.enable_token_mixup);
    read("enable_sentence_mixup", c.enable_sentence_mixup);
    read("enable_template_mixup", c.enable_template_mixup);
    read("enable_vanilla_baseline", c.enable_vanilla_baseline);
    read("enable_text_aug", c.enable_text_aug);
    read("enable_template_aug", c.enable_template_aug);
    read("task_train_size", c.task_train_size);
    read("task_dev_size", c.task_dev_size);
    read("task_template_count", c.task_template_count);
    read("task_min_sentence_len", c.task_min_sentence_len);
    read("task_max_sentence_len", c.task_max_sentence_len);
    read("task_max_minority", c.task_max_minority);
    const nlohmann::json known = c.to_json();
    for (const auto& item : j.items()) {
        if (!known.contains(item.key())) {
            throw std::runtime_error("config: unknown key \"" + item.key() + "\"");
        }
    }
    return c;
}

FlatConfig FlatConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("config: " + path + ": " + e.what());
    }
    return from_json(j);
}

std::uint64_t FlatConfig::hash() const { return fnv1a64(to_json().dump()); }

}  // namespace mixpro

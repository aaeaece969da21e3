#include "mixpro/train.hpp"

#include <stdexcept>

#include "mixpro/optim.hpp"

namespace mixpro {

void TrainingConfig::validate() const {
    if (batch_size == 0 || grad_accumulation_steps == 0 || max_seq_length == 0) {
        throw std::invalid_argument("TrainingConfig: batch, accumulation, and sequence sizes must be positive");
    }
    if (max_steps < 0) throw std::invalid_argument("TrainingConfig: max_steps must be non-negative");
    if (!(adam_epsilon > 0.0)) throw std::invalid_argument("TrainingConfig: adam_epsilon must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainingConfig: learning_rate must be positive");
    if (!(max_grad_norm > 0.0)) throw std::invalid_argument("TrainingConfig: max_grad_norm must be positive");
    if (weight_decay < 0.0) throw std::invalid_argument("TrainingConfig: weight_decay must be non-negative");
    if (!(mixup_alpha > 0.0)) throw std::invalid_argument("TrainingConfig: mixup_alpha must be positive");
    if (!(preserving_flipping_ratio >= 0.0 && preserving_flipping_ratio <= 1.0)) {
        throw std::invalid_argument("TrainingConfig: preserving_flipping_ratio must lie in [0, 1]");
    }
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::wo_token: return "w/o-token";
        case Variant::wo_sent: return "w/o-sent";
        case Variant::wo_tmpl: return "w/o-tmpl";
        case Variant::wo_text_aug: return "w/o-text-aug";
        case Variant::wo_template_aug: return "w/o-template-aug";
        case Variant::vanilla_mixup: return "vanilla-mixup";
        case Variant::no_aug_pet: return "no-aug-PET";
    }
    throw std::invalid_argument("to_string: unknown variant");
}

Variant variant_from_string(const std::string& name) {
    for (Variant v : all_variants()) {
        if (to_string(v) == name) return v;
    }
    throw std::invalid_argument("variant_from_string: unknown variant \"" + name + "\"");
}

const std::vector<Variant>& all_variants() {
    static const std::vector<Variant> kAll = {
        Variant::full,        Variant::wo_token,        Variant::wo_sent,
        Variant::wo_tmpl,     Variant::wo_text_aug,     Variant::wo_template_aug,
        Variant::vanilla_mixup, Variant::no_aug_pet,
    };
    return kAll;
}

VariantSpec variant_spec(Variant v, double alpha) {
    VariantSpec s;
    s.mixup.alpha = alpha;
    switch (v) {
        case Variant::full:
            break;
        case Variant::wo_token:
            s.mixup.enable_token = false;
            break;
        case Variant::wo_sent:
            s.mixup.enable_sentence = false;
            break;
        case Variant::wo_tmpl:
            s.mixup.enable_template = false;
            break;
        case Variant::wo_text_aug:
            s.text_aug = false;
            break;
        case Variant::wo_template_aug:
            s.template_aug = false;
            break;
        case Variant::vanilla_mixup:
            s.mixup.enable_token = false;
            s.mixup.enable_sentence = false;
            s.mixup.enable_template = false;
            s.mixup.enable_vanilla_baseline = true;
            s.text_aug = false;
            s.template_aug = false;
            break;
        case Variant::no_aug_pet:
            s.mixup.enable_token = false;
            s.mixup.enable_sentence = false;
            s.mixup.enable_template = false;
            s.text_aug = false;
            s.template_aug = false;
            s.plain_pet = true;
            break;
    }
    s.mixup.validate();
    return s;
}

int select_epoch_templates(std::size_t n_templates, Rng& rng, TemplateSchedule& schedule) {
    if (n_templates == 0) throw std::invalid_argument("select_epoch_templates: empty template set");
    if (schedule.usage.size() < n_templates) schedule.usage.resize(n_templates, 0);
    int idx = static_cast<int>(rng.uniform_index(n_templates));
    schedule.epoch_template.push_back(idx);
    ++schedule.usage[static_cast<std::size_t>(idx)];
    return idx;
}

Tensor one_hot(int label, int label_count) {
    if (label < 0 || label >= label_count) {
        throw std::invalid_argument("one_hot: label " + std::to_string(label) + " outside 0.." +
                                    std::to_string(label_count - 1));
    }
    Tensor y({static_cast<std::size_t>(label_count)});
    y[static_cast<std::size_t>(label)] = 1.0;
    return y;
}

namespace {

void check_prompt_length(const Prompt& prompt, std::size_t sample_index, std::size_t limit,
                         const char* which) {
    if (prompt.length() > limit) {
        throw std::invalid_argument("train: sample " + std::to_string(sample_index) + " builds a " +
                                    std::to_string(prompt.length()) + "-token " + which +
                                    " prompt exceeding the sequence limit " + std::to_string(limit));
    }
}

}  // namespace

TrainResult train(const TrainInputs& in, const ModelConfig& model_config,
                  const TrainingConfig& config, const VariantSpec& variant,
                  std::vector<MixTraceEntry>* trace) {
    config.validate();
    model_config.validate();
    variant.mixup.validate();
    if (in.vocab == nullptr) throw std::invalid_argument("train: missing vocabulary");
    if (in.train.empty()) throw std::invalid_argument("train: empty training set");
    if (in.templates.empty()) throw std::invalid_argument("train: empty template set");
    if (in.templates_aug.size() != in.templates.size()) {
        throw std::invalid_argument("train: augmented template set size " +
                                    std::to_string(in.templates_aug.size()) + " does not match " +
                                    std::to_string(in.templates.size()));
    }
    if (in.label_count < 2) throw std::invalid_argument("train: need at least two labels");
    bool three_level = !variant.plain_pet && !variant.mixup.enable_vanilla_baseline;
    if (three_level && variant.text_aug) {
        if (in.aug_preserving.size() != in.train.size() || in.aug_flipping.size() != in.train.size()) {
            throw std::invalid_argument("train: augmented samples are misaligned with the training set");
        }
        if (config.preserving_flipping_ratio < 1.0 && in.label_count != 2) {
            throw std::invalid_argument("train: flipping augmentation needs a binary label set");
        }
    }
    std::size_t seq_limit = std::min(config.max_seq_length, model_config.max_seq);

    Rng order_rng(config.seed, "order");
    Rng template_rng(config.seed, "template");
    Rng lambda_rng(config.seed, "lambda");
    Rng mode_rng(config.seed, "mode");
    Rng init_rng(config.seed, "init");
    Rng partner_rng(config.seed, "partner");

    TrainResult result;
    result.params = ModelParams::init(model_config, in.vocab->size(), in.label_count, init_rng);
    result.schedule.usage.assign(in.templates.size(), 0);
    if (config.max_steps == 0) return result;

    AdamConfig adam_config;
    adam_config.lr = config.learning_rate;
    adam_config.eps = config.adam_epsilon;
    adam_config.weight_decay = config.weight_decay;
    Adam adam(adam_config);
    std::vector<Tensor*> param_tensors = result.params.tensors();

    std::vector<Tensor> acc;
    acc.reserve(param_tensors.size());
    for (Tensor* t : param_tensors) acc.emplace_back(t->shape());
    std::size_t micros_in_window = 0;
    double window_loss = 0.0;
    double window_lambda = 0.0;
    std::size_t window_lambda_draws = 0;

    std::vector<std::size_t> order(in.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::int64_t step = 0;
    std::int64_t epoch = 0;
    double inv_windows = 1.0 / static_cast<double>(config.grad_accumulation_steps);

    while (step < config.max_steps) {
        int tmpl_idx = 0;
        if (variant.mixup.enable_template) {
            tmpl_idx = select_epoch_templates(in.templates.size(), template_rng, result.schedule);
        } else {
            result.schedule.epoch_template.push_back(0);
            ++result.schedule.usage[0];
        }
        const Template& t_orig = in.templates[static_cast<std::size_t>(tmpl_idx)];
        const Template& t_aug = variant.template_aug
                                    ? in.templates_aug[static_cast<std::size_t>(tmpl_idx)]
                                    : t_orig;
        order_rng.shuffle(order);

        std::size_t cursor = 0;
        while (cursor < order.size() && step < config.max_steps) {
            std::size_t micro_end = std::min(cursor + config.batch_size, order.size());
            std::size_t micro_size = micro_end - cursor;
            double micro_lambda = 0.0;
            if (config.lambda_per_batch && !variant.plain_pet) {
                micro_lambda = sample_lambda(config.mixup_alpha, lambda_rng);
            }
            double micro_loss = 0.0;
            double sample_scale = inv_windows / static_cast<double>(micro_size);
            for (std::size_t m = cursor; m < micro_end; ++m) {
                std::size_t idx = order[m];
                const TrainSample& sample = in.train[idx];
                Tape tape;
                ParamNodes pn = register_params(tape, result.params);
                NodeId loss_node;
                if (variant.plain_pet) {
                    Prompt p = build_prompt(sample.tokens, t_orig, sample.label, *in.vocab);
                    check_prompt_length(p, idx, seq_limit, "original");
                    loss_node =
                        plain_forward_loss(tape, pn, model_config, p, one_hot(sample.label, in.label_count));
                } else {
                    double lambda = config.lambda_per_batch
                                        ? micro_lambda
                                        : sample_lambda(config.mixup_alpha, lambda_rng);
                    window_lambda += lambda;
                    ++window_lambda_draws;
                    MixedForwardInputs mf;
                    mf.lambda = lambda;
                    Prompt p = build_prompt(sample.tokens, t_orig, sample.label, *in.vocab);
                    check_prompt_length(p, idx, seq_limit, "original");
                    Prompt q;
                    if (variant.mixup.enable_vanilla_baseline) {
                        std::size_t j = partner_rng.uniform_index(in.train.size());
                        const TrainSample& partner = in.train[j];
                        q = build_prompt(partner.tokens, t_orig, partner.label, *in.vocab);
                        check_prompt_length(q, j, seq_limit, "partner");
                        mf.mix_tokens = true;
                        mf.mix_sentence = true;
                    } else {
                        AugMode mode = AugMode::preserving;
                        if (variant.text_aug && config.preserving_flipping_ratio < 1.0) {
                            mode = mode_rng.uniform01() < config.preserving_flipping_ratio
                                       ? AugMode::preserving
                                       : AugMode::flipping;
                        }
                        const std::vector<int>& aug_tokens =
                            !variant.text_aug ? sample.tokens
                            : mode == AugMode::preserving ? in.aug_preserving[idx]
                                                          : in.aug_flipping[idx];
                        int aug_label = mode == AugMode::flipping ? 1 - sample.label : sample.label;
                        Prompt q_raw = build_prompt(aug_tokens, t_aug, aug_label, *in.vocab);
                        check_prompt_length(q_raw, idx, seq_limit, "augmented");
                        AugmentedPair pair(std::move(p), std::move(q_raw), mode);
                        p = std::move(pair.original);
                        q = std::move(pair.augmented);
                        mf.mix_tokens = variant.mixup.enable_token;
                        mf.mix_sentence = variant.mixup.enable_sentence;
                    }
                    mf.p = &p;
                    mf.q = &q;
                    mf.y_p = one_hot(p.label, in.label_count);
                    mf.y_q = one_hot(q.label, in.label_count);
                    MixedForwardResult fwd = mixed_forward(tape, pn, model_config, mf);
                    if (trace != nullptr) {
                        trace->push_back({step + 1, lambda, fwd.lambda_token, fwd.lambda_sentence,
                                          fwd.lambda_label});
                    }
                    loss_node = fwd.loss;
                }
                micro_loss += tape.value(loss_node)[0];
                tape.backward(loss_node);
                for (std::size_t pi = 0; pi < pn.all.size(); ++pi) {
                    Tensor g = tape.grad(pn.all[pi]);
                    for (std::size_t j = 0; j < g.size(); ++j) acc[pi][j] += g[j] * sample_scale;
                }
            }
            window_loss += micro_loss / static_cast<double>(micro_size);
            cursor = micro_end;
            ++micros_in_window;

            if (micros_in_window == config.grad_accumulation_steps) {
                clip_global_norm(acc, config.max_grad_norm);
                adam.step(param_tensors, acc);
                ++step;
                LogEntry entry;
                entry.step = step;
                entry.epoch = epoch;
                entry.template_index = tmpl_idx;
                entry.lambda_mean =
                    window_lambda_draws == 0 ? 1.0 : window_lambda / static_cast<double>(window_lambda_draws);
                entry.loss = window_loss * inv_windows;
                result.log.push_back(entry);
                for (Tensor& g : acc) {
                    for (std::size_t j = 0; j < g.size(); ++j) g[j] = 0.0;
                }
                micros_in_window = 0;
                window_loss = 0.0;
                window_lambda = 0.0;
                window_lambda_draws = 0;
            }
        }
        ++epoch;
    }
    return result;
}

}  // namespace mixpro

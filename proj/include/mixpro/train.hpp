#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixpro/augment.hpp"
#include "mixpro/mixup.hpp"
#include "mixpro/model.hpp"
#include "mixpro/prompting.hpp"

namespace mixpro {

struct TrainingConfig {
    std::size_t batch_size = 2;
    std::size_t grad_accumulation_steps = 8;
    std::size_t max_seq_length = 64;
    std::int64_t max_steps = 250;
    double adam_epsilon = 1e-8;
    double learning_rate = 1e-5;
    double max_grad_norm = 1.0;
    double weight_decay = 0.01;
    double mixup_alpha = 0.5;
    double preserving_flipping_ratio = 0.5;
    bool lambda_per_batch = false;
    std::uint64_t seed = 1;

    void validate() const;
};

// full keeps all three interpolation levels plus both augmentations; each
// w/o-* ablation flips exactly one of them off. vanilla-mixup interpolates two
// training samples instead of an augmented pair, and no-aug-PET trains on the
// plain prompts alone.
enum class Variant {
    full,
    wo_token,
    wo_sent,
    wo_tmpl,
    wo_text_aug,
    wo_template_aug,
    vanilla_mixup,
    no_aug_pet,
};

std::string to_string(Variant v);
Variant variant_from_string(const std::string& name);
const std::vector<Variant>& all_variants();

struct VariantSpec {
    MixupConfig mixup;
    bool text_aug = true;
    bool template_aug = true;
    bool plain_pet = false;
};

VariantSpec variant_spec(Variant v, double alpha);

struct TrainSample {
    std::vector<int> tokens;
    int label = -1;
};

struct LogEntry {
    std::int64_t step = 0;
    std::int64_t epoch = 0;
    int template_index = 0;
    double lambda_mean = 1.0;
    double loss = 0.0;
};

struct TemplateSchedule {
    std::vector<int> epoch_template;
    std::vector<std::int64_t> usage;
};

// Draws one template index uniformly for the epoch and records it.
int select_epoch_templates(std::size_t n_templates, Rng& rng, TemplateSchedule& schedule);

struct TrainInputs {
    std::vector<TrainSample> train;
    // Fixed per-run augmentations, index-aligned with train. The flipping
    // variant carries the inverted label implicitly (binary tasks only).
    std::vector<std::vector<int>> aug_preserving;
    std::vector<std::vector<int>> aug_flipping;
    std::vector<Template> templates;
    std::vector<Template> templates_aug;
    const Vocab* vocab = nullptr;
    int label_count = 2;
};

struct TrainResult {
    ModelParams params;
    std::vector<LogEntry> log;
    TemplateSchedule schedule;
};

// One record per mixed sample, for asserting that token, sentence, and label
// mixing all consumed the same draw.
struct MixTraceEntry {
    std::int64_t step = 0;
    double draw = 1.0;
    double token = 1.0;
    double sentence = 1.0;
    double label = 1.0;
};

// Runs the training loop: per epoch one template pair, per sample one mode
// coin and one lambda draw (or one per micro-batch), gradient accumulation
// over grad_accumulation_steps micro-batches, global-norm clipping, and Adam
// with decoupled weight decay. Stops after max_steps optimizer steps; a
// trailing incomplete accumulation window is dropped.
TrainResult train(const TrainInputs& in, const ModelConfig& model_config,
                  const TrainingConfig& config, const VariantSpec& variant,
                  std::vector<MixTraceEntry>* trace = nullptr);

Tensor one_hot(int label, int label_count);

}  // namespace mixpro

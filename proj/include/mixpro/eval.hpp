#pragma once

#include <cstdint>
#include <vector>

#include "mixpro/model.hpp"
#include "mixpro/prompting.hpp"
#include "mixpro/train.hpp"

namespace mixpro {

struct EvalMetrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::size_t n = 0;
    std::int64_t forward_passes = 0;
};

// Single-model inference with one template: exactly one forward pass per
// example. Prediction is the argmax label (ties go to the lower label).
// forward_counter, when given, is incremented once per forward pass.
EvalMetrics evaluate(const ModelParams& params, const std::vector<TrainSample>& data,
                     const Template& tmpl, const Vocab& vocab,
                     std::int64_t* forward_counter = nullptr);

struct EnsembleMember {
    const ModelParams* params = nullptr;
    const Template* tmpl = nullptr;
};

// PET-style ensemble: every member runs its own forward per example and the
// per-member softmax distributions are averaged before the argmax.
EvalMetrics ensemble_evaluate(const std::vector<EnsembleMember>& members,
                              const std::vector<TrainSample>& data, const Vocab& vocab,
                              std::int64_t* forward_counter = nullptr);

double forward_pass_ratio(std::int64_t single_passes, std::int64_t ensemble_passes);

}  // namespace mixpro

#include "mixpro/eval.hpp"

#include <stdexcept>

#include "mixpro/kernels.hpp"

namespace mixpro {

namespace {

Tensor label_logits(const Tensor& hidden_row, const ModelParams& params) {
    auto c = static_cast<std::size_t>(params.label_count);
    Tensor logits({c});
    kernels::matmul(hidden_row.data(), params.head_w.data(), logits.data(), 1, hidden_row.size(), c);
    kernels::add(logits.data(), params.head_b.data(), logits.data(), c);
    return logits;
}

Tensor predict_distribution(const ModelParams& params, const TrainSample& sample,
                            const Template& tmpl, const Vocab& vocab,
                            std::int64_t* forward_counter) {
    Prompt p = build_prompt(sample.tokens, tmpl, sample.label, vocab);
    Tensor e = embed(p, params);
    Tensor hidden = encode(e, p.attention, params);
    auto extracted = extract_mask_hidden(hidden, p.mask_pos, p.mask_pos);
    if (forward_counter != nullptr) ++*forward_counter;
    return softmax(label_logits(extracted.first, params));
}

int argmax_label(const Tensor& dist) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < dist.size(); ++i) {
        if (dist[i] > dist[best]) best = i;
    }
    return static_cast<int>(best);
}

EvalMetrics score(const std::vector<int>& predictions, const std::vector<TrainSample>& data,
                  int label_count, std::int64_t forwards) {
    EvalMetrics m;
    m.n = data.size();
    m.forward_passes = forwards;
    std::size_t correct = 0;
    std::vector<long> tp(static_cast<std::size_t>(label_count), 0);
    std::vector<long> fp(static_cast<std::size_t>(label_count), 0);
    std::vector<long> fn(static_cast<std::size_t>(label_count), 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        int truth = data[i].label;
        int pred = predictions[i];
        if (pred == truth) {
            ++correct;
            ++tp[static_cast<std::size_t>(truth)];
        } else {
            ++fp[static_cast<std::size_t>(pred)];
            ++fn[static_cast<std::size_t>(truth)];
        }
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    double f1_sum = 0.0;
    for (int c = 0; c < label_count; ++c) {
        auto ci = static_cast<std::size_t>(c);
        long denom = 2 * tp[ci] + fp[ci] + fn[ci];
        f1_sum += denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp[ci]) / static_cast<double>(denom);
    }
    m.macro_f1 = f1_sum / static_cast<double>(label_count);
    return m;
}

}  // namespace

EvalMetrics evaluate(const ModelParams& params, const std::vector<TrainSample>& data,
                     const Template& tmpl, const Vocab& vocab, std::int64_t* forward_counter) {
    if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
    std::int64_t forwards = 0;
    std::vector<int> predictions;
    predictions.reserve(data.size());
    for (const TrainSample& sample : data) {
        predictions.push_back(argmax_label(predict_distribution(params, sample, tmpl, vocab, &forwards)));
    }
    if (forward_counter != nullptr) *forward_counter += forwards;
    return score(predictions, data, params.label_count, forwards);
}

EvalMetrics ensemble_evaluate(const std::vector<EnsembleMember>& members,
                              const std::vector<TrainSample>& data, const Vocab& vocab,
                              std::int64_t* forward_counter) {
    if (members.empty()) throw std::invalid_argument("ensemble_evaluate: no members");
    if (data.empty()) throw std::invalid_argument("ensemble_evaluate: empty dataset");
    int label_count = members[0].params->label_count;
    for (const EnsembleMember& m : members) {
        if (m.params == nullptr || m.tmpl == nullptr) {
            throw std::invalid_argument("ensemble_evaluate: member missing params or template");
        }
        if (m.params->label_count != label_count) {
            throw std::invalid_argument("ensemble_evaluate: members disagree on label count");
        }
    }
    std::int64_t forwards = 0;
    std::vector<int> predictions;
    predictions.reserve(data.size());
    for (const TrainSample& sample : data) {
        Tensor mean({static_cast<std::size_t>(label_count)});
        for (const EnsembleMember& m : members) {
            Tensor dist = predict_distribution(*m.params, sample, *m.tmpl, vocab, &forwards);
            for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += dist[c];
        }
        for (std::size_t c = 0; c < mean.size(); ++c) {
            mean[c] /= static_cast<double>(members.size());
        }
        predictions.push_back(argmax_label(mean));
    }
    if (forward_counter != nullptr) *forward_counter += forwards;
    return score(predictions, data, label_count, forwards);
}

double forward_pass_ratio(std::int64_t single_passes, std::int64_t ensemble_passes) {
    if (single_passes <= 0 || ensemble_passes <= 0) {
        throw std::invalid_argument("forward_pass_ratio: counts must be positive");
    }
    return static_cast<double>(single_passes) / static_cast<double>(ensemble_passes);
}

}  // namespace mixpro

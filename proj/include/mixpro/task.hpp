#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "mixpro/augment.hpp"
#include "mixpro/prompting.hpp"
#include "mixpro/train.hpp"

namespace mixpro {

// Few-shot sentiment-style task over a fixed lexicon. Every sentence carries
// more words of its label's polarity than of the other, so the labeling
// function (majority polarity) is deterministic and recomputable.
struct SyntheticTaskSpec {
    std::vector<std::string> positive_words;
    std::vector<std::string> negative_words;
    std::vector<std::string> filler_words;
    std::size_t min_sentence_len = 6;
    std::size_t max_sentence_len = 10;
    std::size_t train_size = 32;
    std::size_t dev_size = 256;
    int label_count = 2;
    std::size_t template_count = 3;
    // Most other-polarity words allowed per sentence; 0 keeps sentences pure.
    std::size_t max_minority = 1;

    static SyntheticTaskSpec defaults();
    void validate() const;
};

// Cloze template pool the spec-sized template set is drawn from (in order).
std::size_t template_pool_size();
std::vector<Template> template_pool_originals(std::size_t count);
std::vector<Template> template_pool_augmented(std::size_t count);

struct SyntheticTask {
    SyntheticTaskSpec spec;
    Vocab vocab;
    std::vector<TrainSample> train;
    std::vector<TrainSample> dev;
    std::vector<Template> templates;
    std::vector<Template> templates_aug;
    LexiconRules rules;
    Verbalizer verbalizer;
    std::vector<int> positive_ids;
    std::vector<int> negative_ids;

    std::unordered_set<int> positive_set() const;
    std::unordered_set<int> negative_set() const;
};

// Label 1 when positive words outnumber negative ones, 0 for the reverse;
// a tie means the sentence is outside the task's domain.
int majority_polarity_label(const std::vector<int>& tokens, const std::unordered_set<int>& positive,
                            const std::unordered_set<int>& negative);

SyntheticTask gen_synthetic_task(const SyntheticTaskSpec& spec, std::uint64_t seed);

}  // namespace mixpro

#include "mixpro/task.hpp"

#include <algorithm>
#include <stdexcept>

namespace mixpro {

namespace {

const std::vector<std::string>& default_positive() {
    static const std::vector<std::string> kWords = {
        "great",   "good",    "wonderful", "excellent", "amazing", "fantastic", "superb",  "delightful",
        "brilliant", "lovely", "charming", "pleasant",  "solid",   "strong",    "fresh",   "smart",
        "elegant", "graceful", "vivid",    "crisp",     "warm",    "bright",    "rich",    "bold",
        "clever",  "fun",     "neat",      "fine",      "sharp",   "smooth",    "sweet",   "clear",
    };
    return kWords;
}

const std::vector<std::string>& default_negative() {
    static const std::vector<std::string> kWords = {
        "bad",    "awful", "terrible", "horrible", "dreadful", "poor",   "weak",   "dull",
        "bland",  "stale", "messy",    "clumsy",   "crude",    "flat",   "sour",   "grim",
        "harsh",  "rough", "shaky",    "sloppy",   "tired",    "vague",  "cold",   "dark",
        "dirty",  "slow",  "cheap",    "broken",   "boring",   "noisy",  "sad",    "ugly",
    };
    return kWords;
}

const std::vector<std::string>& default_filler() {
    static const std::vector<std::string> kWords = {
        "the",   "a",     "movie", "film",  "plot",  "story", "acting", "cast",
        "scene", "script", "music", "crowd", "ending", "start", "night", "day",
        "show",  "piece", "work",  "style", "voice", "sound", "stage",  "frame",
        "camera", "light", "theme", "tone",  "pace",  "world", "idea",   "time",
    };
    return kWords;
}

struct TemplatePair {
    const char* original;
    const char* augmented;
};

// Each augmented pattern substitutes synonyms for the original's template
// words, so the pair differs while staying label-preserving.
constexpr TemplatePair kTemplatePool[] = {
    {"{x} the feedback is [MASK] .", "{x} the review is [MASK] ."},
    {"{x} overall it was [MASK] .", "{x} altogether it was [MASK] ."},
    {"{x} the verdict is [MASK] .", "{x} the judgment is [MASK] ."},
    {"{x} in short a [MASK] piece .", "{x} in brief a [MASK] piece ."},
    {"{x} the comment says [MASK] .", "{x} the remark says [MASK] ."},
    {"{x} people call it [MASK] .", "{x} folks call it [MASK] ."},
};

constexpr std::size_t kTemplatePoolSize = sizeof(kTemplatePool) / sizeof(kTemplatePool[0]);

// Template words eligible for synonym substitution, mirroring the pool pairs.
constexpr const char* kTemplateSynonyms[][2] = {
    {"feedback", "review"}, {"overall", "altogether"}, {"verdict", "judgment"},
    {"short", "brief"},     {"comment", "remark"},     {"people", "folks"},
};

std::vector<int> make_sentence(const std::vector<int>& majority, const std::vector<int>& minority,
                               const std::vector<int>& filler, int period_id,
                               const SyntheticTaskSpec& spec, Rng& rng) {
    std::size_t span = spec.max_sentence_len - spec.min_sentence_len + 1;
    std::size_t len = spec.min_sentence_len + rng.uniform_index(span);
    std::size_t maj = 1 + rng.uniform_index(3);
    std::size_t cap = std::min(spec.max_minority, maj - 1);
    std::size_t min_count = cap == 0 ? 0 : rng.uniform_index(cap + 1);
    std::vector<int> content;
    content.reserve(len - 1);
    for (std::size_t i = 0; i < maj; ++i) content.push_back(majority[rng.uniform_index(majority.size())]);
    for (std::size_t i = 0; i < min_count; ++i) {
        content.push_back(minority[rng.uniform_index(minority.size())]);
    }
    while (content.size() < len - 1) content.push_back(filler[rng.uniform_index(filler.size())]);
    rng.shuffle(content);
    content.push_back(period_id);
    return content;
}

}  // namespace

SyntheticTaskSpec SyntheticTaskSpec::defaults() {
    SyntheticTaskSpec spec;
    spec.positive_words = default_positive();
    spec.negative_words = default_negative();
    spec.filler_words = default_filler();
    return spec;
}

void SyntheticTaskSpec::validate() const {
    if (positive_words.empty() || negative_words.empty() || filler_words.empty()) {
        throw std::invalid_argument("SyntheticTaskSpec: every lexicon class needs words");
    }
    if (label_count != 2) throw std::invalid_argument("SyntheticTaskSpec: the task is binary");
    if (train_size < 2 || train_size % 2 != 0) {
        throw std::invalid_argument("SyntheticTaskSpec: train_size must be even and positive for class balance");
    }
    if (dev_size < 2 || dev_size % 2 != 0) {
        throw std::invalid_argument("SyntheticTaskSpec: dev_size must be even and positive for class balance");
    }
    if (template_count == 0 || template_count > kTemplatePoolSize) {
        throw std::invalid_argument("SyntheticTaskSpec: template_count must lie in 1.." +
                                    std::to_string(kTemplatePoolSize));
    }
    if (min_sentence_len > max_sentence_len) {
        throw std::invalid_argument("SyntheticTaskSpec: sentence length range is inverted");
    }
    // Room for up to 3 majority words, the minority words, and the period.
    std::size_t needed = 3 + std::min<std::size_t>(max_minority, 2) + 1;
    if (min_sentence_len < needed) {
        throw std::invalid_argument("SyntheticTaskSpec: min_sentence_len must be at least " +
                                    std::to_string(needed));
    }
}

std::size_t template_pool_size() { return kTemplatePoolSize; }

std::vector<Template> template_pool_originals(std::size_t count) {
    if (count == 0 || count > kTemplatePoolSize) {
        throw std::invalid_argument("template_pool_originals: count must lie in 1.." +
                                    std::to_string(kTemplatePoolSize));
    }
    std::vector<Template> out;
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(Template::parse(static_cast<int>(i), kTemplatePool[i].original));
    }
    return out;
}

std::vector<Template> template_pool_augmented(std::size_t count) {
    if (count == 0 || count > kTemplatePoolSize) {
        throw std::invalid_argument("template_pool_augmented: count must lie in 1.." +
                                    std::to_string(kTemplatePoolSize));
    }
    std::vector<Template> out;
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(Template::parse(static_cast<int>(i), kTemplatePool[i].augmented));
    }
    return out;
}

std::unordered_set<int> SyntheticTask::positive_set() const {
    return {positive_ids.begin(), positive_ids.end()};
}

std::unordered_set<int> SyntheticTask::negative_set() const {
    return {negative_ids.begin(), negative_ids.end()};
}

int majority_polarity_label(const std::vector<int>& tokens, const std::unordered_set<int>& positive,
                            const std::unordered_set<int>& negative) {
    long pos = 0, neg = 0;
    for (int t : tokens) {
        if (positive.count(t) != 0) ++pos;
        if (negative.count(t) != 0) ++neg;
    }
    if (pos == neg) {
        throw std::invalid_argument("majority_polarity_label: tied polarity counts, label undefined");
    }
    return pos > neg ? 1 : 0;
}

SyntheticTask gen_synthetic_task(const SyntheticTaskSpec& spec, std::uint64_t seed) {
    spec.validate();
    SyntheticTask task;
    task.spec = spec;

    auto add_all = [&](const std::vector<std::string>& words, std::vector<int>* ids) {
        for (const std::string& w : words) {
            int id = task.vocab.add(w);
            if (ids != nullptr) ids->push_back(id);
        }
    };
    add_all(spec.positive_words, &task.positive_ids);
    add_all(spec.negative_words, &task.negative_ids);
    std::vector<int> filler_ids;
    add_all(spec.filler_words, &filler_ids);
    int period_id = task.vocab.add(".");

    task.templates = template_pool_originals(spec.template_count);
    task.templates_aug = template_pool_augmented(spec.template_count);
    for (std::size_t i = 0; i < kTemplatePoolSize; ++i) {
        for (const std::string& word : split_tokens(kTemplatePool[i].original)) {
            if (word != kPlaceholderToken && word != kMaskToken) task.vocab.add(word);
        }
        for (const std::string& word : split_tokens(kTemplatePool[i].augmented)) {
            if (word != kPlaceholderToken && word != kMaskToken) task.vocab.add(word);
        }
    }

    task.verbalizer.add(task.vocab.add("negative"), 0);
    task.verbalizer.add(task.vocab.add("positive"), 1);

    // Synonyms stay within a polarity class (next three words cyclically);
    // antonyms point at the opposite class, so substituting every covered
    // word provably flips the majority.
    auto link = [&](const std::vector<int>& from, const std::vector<int>& to, bool synonym) {
        for (std::size_t i = 0; i < from.size(); ++i) {
            std::vector<int> subs;
            for (std::size_t k = 1; k <= 3; ++k) {
                subs.push_back(synonym ? from[(i + k) % from.size()] : to[(i + k) % to.size()]);
            }
            if (synonym) {
                task.rules.add_synonyms(from[i], std::move(subs));
            } else {
                task.rules.add_antonyms(from[i], std::move(subs));
            }
        }
    };
    link(task.positive_ids, task.positive_ids, true);
    link(task.negative_ids, task.negative_ids, true);
    link(task.positive_ids, task.negative_ids, false);
    link(task.negative_ids, task.positive_ids, false);
    for (const auto& pair : kTemplateSynonyms) {
        int from = task.vocab.find(pair[0]);
        int to = task.vocab.find(pair[1]);
        task.rules.add_synonyms(from, {to});
        task.rules.add_synonyms(to, {from});
    }

    Rng rng(seed, "task");
    std::unordered_set<int> pos_set = task.positive_set();
    std::unordered_set<int> neg_set = task.negative_set();
    auto fill_split = [&](std::size_t size, std::vector<TrainSample>* split) {
        for (std::size_t i = 0; i < size; ++i) {
            bool positive = i < size / 2;
            TrainSample s;
            s.tokens = positive
                           ? make_sentence(task.positive_ids, task.negative_ids, filler_ids, period_id,
                                           spec, rng)
                           : make_sentence(task.negative_ids, task.positive_ids, filler_ids, period_id,
                                           spec, rng);
            s.label = majority_polarity_label(s.tokens, pos_set, neg_set);
            if (s.label != (positive ? 1 : 0)) {
                throw std::logic_error("gen_synthetic_task: generated sentence disagrees with its class");
            }
            split->push_back(std::move(s));
        }
        rng.shuffle(*split);
    };
    fill_split(spec.train_size, &task.train);
    fill_split(spec.dev_size, &task.dev);
    return task;
}

}  // namespace mixpro

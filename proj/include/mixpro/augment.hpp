#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "mixpro/prompting.hpp"
#include "mixpro/rng.hpp"

namespace mixpro {

// preserving: synonym substitution, label unchanged.
// flipping: antonym substitution, label inverted.
enum class AugMode { preserving, flipping };

std::string to_string(AugMode mode);
AugMode aug_mode_from_string(const std::string& name);

// Word-id substitution table split into label-preserving (synonym) and
// label-flipping (antonym) entries.
class LexiconRules {
public:
    void add_synonyms(int word_id, std::vector<int> subs);
    void add_antonyms(int word_id, std::vector<int> subs);
    const std::vector<int>* synonyms(int word_id) const;
    const std::vector<int>* antonyms(int word_id) const;
    std::size_t synonym_entries() const { return syn_.size(); }
    std::size_t antonym_entries() const { return ant_.size(); }

    // Line format: "syn word sub1 sub2 ..." or "ant word sub1 ...". Reserved
    // tokens are rejected on both sides.
    static LexiconRules load_file(const std::string& path, const Vocab& vocab);
    void save(const std::string& path, const Vocab& vocab) const;

private:
    std::unordered_map<int, std::vector<int>> syn_;
    std::unordered_map<int, std::vector<int>> ant_;
};

struct ClozeResult {
    std::vector<int> tokens;
    std::vector<std::size_t> positions;
};

// Masks ceil(ratio * len) distinct positions with [MASK]. ratio must lie in
// (0, 1).
ClozeResult cloze_mask(const std::vector<int>& tokens, double ratio, Rng& rng);

// preserving: each synonym-covered word is substituted with probability 1/2.
// flipping: every antonym-covered word is substituted; it is an error when no
// word is covered, since the label could not flip.
std::vector<int> augment_text(const std::vector<int>& x, AugMode mode, const LexiconRules& rules,
                              Rng& rng);

// Synonym substitution over template words; {x} and [MASK] stay put and the
// result is re-validated as a template.
Template augment_template(const Template& t, const LexiconRules& rules, const Vocab& vocab, Rng& rng);

struct AugmentedSample {
    std::vector<int> orig_tokens;
    std::vector<int> aug_tokens;
    int y_orig = -1;
    int y_aug = -1;
    AugMode mode = AugMode::preserving;
};

// Prompt pair fed to mixup. The label invariant is checked at construction:
// preserving pairs share the label, flipping pairs must differ.
struct AugmentedPair {
    Prompt original;
    Prompt augmented;
    AugMode mode;

    AugmentedPair(Prompt orig, Prompt aug, AugMode m);
};

struct RunAugmentations {
    std::vector<std::vector<int>> preserving;
    std::vector<std::vector<int>> flipping;
};

// Both augmented forms of every text, drawn from the run's "augment" stream in
// text order (preserving first, then flipping). Training and the dump command
// share this so a dump shows exactly what a run at the same seed trains on.
RunAugmentations generate_run_augmentations(const std::vector<std::vector<int>>& texts,
                                            const LexiconRules& rules, std::uint64_t seed);

}  // namespace mixpro

#include "mixpro/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mixpro {

namespace {

void check_substitutable(int word_id, const char* what) {
    if (word_id == kPadId || word_id == kUnkId || word_id == kMaskId) {
        throw std::invalid_argument(std::string("LexiconRules: reserved token cannot appear in ") +
                                    what + " entry");
    }
}

int pick(const std::vector<int>& subs, Rng& rng) {
    return subs[rng.uniform_index(subs.size())];
}

}  // namespace

std::string to_string(AugMode mode) {
    return mode == AugMode::preserving ? "preserving" : "flipping";
}

AugMode aug_mode_from_string(const std::string& name) {
    if (name == "preserving") return AugMode::preserving;
    if (name == "flipping") return AugMode::flipping;
    throw std::invalid_argument("aug_mode_from_string: unknown mode \"" + name + "\"");
}

void LexiconRules::add_synonyms(int word_id, std::vector<int> subs) {
    check_substitutable(word_id, "syn");
    if (subs.empty()) throw std::invalid_argument("LexiconRules: empty substitution list");
    for (int s : subs) check_substitutable(s, "syn");
    syn_[word_id] = std::move(subs);
}

void LexiconRules::add_antonyms(int word_id, std::vector<int> subs) {
    check_substitutable(word_id, "ant");
    if (subs.empty()) throw std::invalid_argument("LexiconRules: empty substitution list");
    for (int s : subs) check_substitutable(s, "ant");
    ant_[word_id] = std::move(subs);
}

const std::vector<int>* LexiconRules::synonyms(int word_id) const {
    auto it = syn_.find(word_id);
    return it == syn_.end() ? nullptr : &it->second;
}

const std::vector<int>* LexiconRules::antonyms(int word_id) const {
    auto it = ant_.find(word_id);
    return it == ant_.end() ? nullptr : &it->second;
}

LexiconRules LexiconRules::load_file(const std::string& path, const Vocab& vocab) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("LexiconRules::load_file: cannot open " + path);
    LexiconRules rules;
    std::string line;
    std::size_t lineno = 0;
    auto resolve = [&](const std::string& word) {
        int id = vocab.find(word);
        if (id == -1) {
            throw std::runtime_error("LexiconRules::load_file: line " + std::to_string(lineno) +
                                     ": word \"" + word + "\" is not in the vocabulary");
        }
        return id;
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string kind, word;
        if (!(ss >> kind >> word)) {
            throw std::runtime_error("LexiconRules::load_file: line " + std::to_string(lineno) +
                                     ": expected \"syn|ant word subs...\"");
        }
        std::vector<int> subs;
        std::string sub;
        while (ss >> sub) subs.push_back(resolve(sub));
        if (kind == "syn") {
            rules.add_synonyms(resolve(word), std::move(subs));
        } else if (kind == "ant") {
            rules.add_antonyms(resolve(word), std::move(subs));
        } else {
            throw std::runtime_error("LexiconRules::load_file: line " + std::to_string(lineno) +
                                     ": unknown entry kind \"" + kind + "\"");
        }
    }
    return rules;
}

void LexiconRules::save(const std::string& path, const Vocab& vocab) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("LexiconRules::save: cannot open " + path);
    // Sorted by word id so the file is reproducible.
    auto dump = [&](const char* kind, const std::unordered_map<int, std::vector<int>>& table) {
        std::vector<int> keys;
        keys.reserve(table.size());
        for (const auto& kv : table) keys.push_back(kv.first);
        std::sort(keys.begin(), keys.end());
        for (int k : keys) {
            out << kind << ' ' << vocab.token(k);
            for (int s : table.at(k)) out << ' ' << vocab.token(s);
            out << '\n';
        }
    };
    dump("syn", syn_);
    dump("ant", ant_);
    if (!out) throw std::runtime_error("LexiconRules::save: write failed for " + path);
}

ClozeResult cloze_mask(const std::vector<int>& tokens, double ratio, Rng& rng) {
    if (tokens.empty()) throw std::invalid_argument("cloze_mask: empty token list");
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw std::invalid_argument("cloze_mask: ratio must lie in (0, 1)");
    }
    auto count = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(tokens.size())));
    std::vector<std::size_t> order(tokens.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    ClozeResult out;
    out.tokens = tokens;
    out.positions.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(out.positions.begin(), out.positions.end());
    for (std::size_t p : out.positions) out.tokens[p] = kMaskId;
    return out;
}

std::vector<int> augment_text(const std::vector<int>& x, AugMode mode, const LexiconRules& rules,
                              Rng& rng) {
    if (x.empty()) throw std::invalid_argument("augment_text: empty input");
    std::vector<int> out = x;
    if (mode == AugMode::preserving) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const std::vector<int>* subs = rules.synonyms(out[i]);
            if (subs != nullptr && rng.uniform01() < 0.5) out[i] = pick(*subs, rng);
        }
        return out;
    }
    std::size_t covered = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::vector<int>* subs = rules.antonyms(out[i]);
        if (subs != nullptr) {
            out[i] = pick(*subs, rng);
            ++covered;
        }
    }
    if (covered == 0) {
        throw std::invalid_argument("augment_text: no word has an antonym entry, label cannot flip");
    }
    return out;
}

Template augment_template(const Template& t, const LexiconRules& rules, const Vocab& vocab, Rng& rng) {
    std::vector<std::string> pattern = t.pattern();
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        if (i == t.placeholder_pos() || i == t.mask_offset()) continue;
        int id = vocab.find(pattern[i]);
        if (id == -1) continue;
        const std::vector<int>* subs = rules.synonyms(id);
        if (subs != nullptr && rng.uniform01() < 0.5) pattern[i] = vocab.token(pick(*subs, rng));
    }
    return Template(t.id(), std::move(pattern));
}

RunAugmentations generate_run_augmentations(const std::vector<std::vector<int>>& texts,
                                            const LexiconRules& rules, std::uint64_t seed) {
    Rng rng(seed, "augment");
    RunAugmentations out;
    out.preserving.reserve(texts.size());
    out.flipping.reserve(texts.size());
    for (const std::vector<int>& text : texts) {
        out.preserving.push_back(augment_text(text, AugMode::preserving, rules, rng));
        out.flipping.push_back(augment_text(text, AugMode::flipping, rules, rng));
    }
    return out;
}

AugmentedPair::AugmentedPair(Prompt orig, Prompt aug, AugMode m)
    : original(std::move(orig)), augmented(std::move(aug)), mode(m) {
    bool same = original.label == augmented.label;
    if (mode == AugMode::preserving && !same) {
        throw std::invalid_argument("AugmentedPair: preserving pair with labels " +
                                    std::to_string(original.label) + " vs " +
                                    std::to_string(augmented.label));
    }
    if (mode == AugMode::flipping && same) {
        throw std::invalid_argument("AugmentedPair: flipping pair kept label " +
                                    std::to_string(original.label));
    }
}

}  // namespace mixpro

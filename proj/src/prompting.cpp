#include "mixpro/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mixpro {

Vocab::Vocab() {
    add(kPadToken);
    add(kUnkToken);
    add(kMaskToken);
}

int Vocab::add(const std::string& token) {
    if (token.empty()) throw std::invalid_argument("Vocab::add: empty token");
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    index_.emplace(token, id);
    return id;
}

int Vocab::find(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? -1 : it->second;
}

const std::string& Vocab::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw std::invalid_argument("Vocab::token: id " + std::to_string(id) + " out of range");
    }
    return tokens_[static_cast<std::size_t>(id)];
}

void Vocab::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("Vocab::save: cannot open " + path);
    for (const std::string& t : tokens_) out << t << '\n';
    if (!out) throw std::runtime_error("Vocab::save: write failed for " + path);
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("Vocab::load: cannot open " + path);
    Vocab v;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (n < 3) {
            if (line != v.tokens_[n]) {
                throw std::runtime_error("Vocab::load: line " + std::to_string(n + 1) +
                                         " must be the reserved token " + v.tokens_[n]);
            }
        } else {
            if (v.find(line) != -1) {
                throw std::runtime_error("Vocab::load: duplicate token " + line);
            }
            v.add(line);
        }
        ++n;
    }
    if (n < 3) throw std::runtime_error("Vocab::load: missing reserved tokens in " + path);
    return v;
}

std::vector<std::string> split_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string chunk;
    while (ss >> chunk) {
        if (chunk == kPadToken || chunk == kUnkToken || chunk == kMaskToken ||
            chunk == kPlaceholderToken) {
            out.push_back(chunk);
            continue;
        }
        std::string run;
        for (char ch : chunk) {
            if (std::isalnum(static_cast<unsigned char>(ch))) {
                run.push_back(ch);
            } else {
                if (!run.empty()) {
                    out.push_back(run);
                    run.clear();
                }
                out.emplace_back(1, ch);
            }
        }
        if (!run.empty()) out.push_back(run);
    }
    return out;
}

std::vector<int> tokenize(const std::string& text, const Vocab& vocab) {
    std::vector<std::string> words = split_tokens(text);
    if (words.empty()) throw std::invalid_argument("tokenize: empty input text");
    std::vector<int> ids;
    ids.reserve(words.size());
    for (const std::string& w : words) {
        int id = vocab.find(w);
        ids.push_back(id == -1 ? kUnkId : id);
    }
    return ids;
}

Template::Template(int id, std::vector<std::string> pattern) : id_(id), pattern_(std::move(pattern)) {
    if (pattern_.empty()) throw std::invalid_argument("Template: empty pattern");
    int placeholders = 0, masks = 0;
    for (std::size_t i = 0; i < pattern_.size(); ++i) {
        if (pattern_[i] == kPlaceholderToken) {
            placeholder_pos_ = i;
            ++placeholders;
        } else if (pattern_[i] == kMaskToken) {
            mask_pos_ = i;
            ++masks;
        }
    }
    if (placeholders != 1 || masks != 1) {
        throw std::invalid_argument("Template: pattern \"" + text() + "\" must contain exactly one " +
                                    kPlaceholderToken + " and one " + kMaskToken);
    }
}

std::string Template::text() const {
    std::string out;
    for (std::size_t i = 0; i < pattern_.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += pattern_[i];
    }
    return out;
}

Template Template::parse(int id, const std::string& line) {
    return Template(id, split_tokens(line));
}

std::vector<Template> load_templates(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_templates: cannot open " + path);
    std::vector<Template> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(Template::parse(static_cast<int>(out.size()), line));
    }
    if (out.empty()) throw std::runtime_error("load_templates: no templates in " + path);
    return out;
}

void save_templates(const std::vector<Template>& templates, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_templates: cannot open " + path);
    for (const Template& t : templates) out << t.text() << '\n';
    if (!out) throw std::runtime_error("save_templates: write failed for " + path);
}

void Verbalizer::add(int word_id, int label_id) {
    if (word_to_label_.count(word_id) != 0) {
        throw std::invalid_argument("Verbalizer::add: word " + std::to_string(word_id) +
                                    " already mapped");
    }
    if (label_to_word_.count(label_id) != 0) {
        throw std::invalid_argument("Verbalizer::add: label " + std::to_string(label_id) +
                                    " already has an answer word");
    }
    word_to_label_.emplace(word_id, label_id);
    label_to_word_.emplace(label_id, word_id);
}

int Verbalizer::label_of(int word_id) const {
    auto it = word_to_label_.find(word_id);
    return it == word_to_label_.end() ? -1 : it->second;
}

int Verbalizer::word_of(int label_id) const {
    auto it = label_to_word_.find(label_id);
    if (it == label_to_word_.end()) {
        throw std::invalid_argument("Verbalizer::word_of: unknown label " + std::to_string(label_id));
    }
    return it->second;
}

Prompt build_prompt(const std::vector<int>& x, const Template& t, int label, const Vocab& vocab) {
    if (x.empty()) throw std::invalid_argument("build_prompt: empty input text");
    for (int id : x) {
        if (id == kMaskId) throw std::invalid_argument("build_prompt: input text contains [MASK]");
        vocab.token(id);
    }
    Prompt p;
    p.label = label;
    const std::vector<std::string>& pat = t.pattern();
    p.tokens.reserve(pat.size() - 1 + x.size());
    for (std::size_t i = 0; i < pat.size(); ++i) {
        if (i == t.placeholder_pos()) {
            for (int id : x) {
                p.tokens.push_back(id);
                p.segments.push_back(0);
            }
            continue;
        }
        if (i == t.mask_offset()) {
            p.mask_pos = p.tokens.size();
            p.tokens.push_back(kMaskId);
        } else {
            int id = vocab.find(pat[i]);
            if (id == -1) {
                throw std::invalid_argument("build_prompt: template word \"" + pat[i] +
                                            "\" is not in the vocabulary");
            }
            p.tokens.push_back(id);
        }
        p.segments.push_back(1);
    }
    p.attention.assign(p.tokens.size(), 1.0);
    return p;
}

}  // namespace mixpro

#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace mixpro {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kMaskId = 2;

inline constexpr const char* kPadToken = "[PAD]";
inline constexpr const char* kUnkToken = "[UNK]";
inline constexpr const char* kMaskToken = "[MASK]";
inline constexpr const char* kPlaceholderToken = "{x}";

// Token table with [PAD]/[UNK]/[MASK] preinstalled at ids 0/1/2.
class Vocab {
public:
    Vocab();

    // Returns the existing id when the token is already present.
    int add(const std::string& token);
    // -1 when absent.
    int find(const std::string& token) const;
    const std::string& token(int id) const;
    std::size_t size() const { return tokens_.size(); }

    void save(const std::string& path) const;
    static Vocab load(const std::string& path);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

// Whitespace split, with [PAD]/[UNK]/[MASK]/{x} kept whole and other chunks
// broken into alphanumeric runs and single punctuation characters.
std::vector<std::string> split_tokens(const std::string& text);

// Maps text to ids, sending unknown words to [UNK]. Empty input is an error.
std::vector<int> tokenize(const std::string& text, const Vocab& vocab);

// Cloze pattern: a token list with exactly one {x} slot and exactly one
// [MASK] slot.
class Template {
public:
    Template(int id, std::vector<std::string> pattern);

    int id() const { return id_; }
    const std::vector<std::string>& pattern() const { return pattern_; }
    std::size_t placeholder_pos() const { return placeholder_pos_; }
    std::size_t mask_offset() const { return mask_pos_; }
    std::string text() const;

    static Template parse(int id, const std::string& line);

private:
    int id_;
    std::vector<std::string> pattern_;
    std::size_t placeholder_pos_ = 0;
    std::size_t mask_pos_ = 0;
};

std::vector<Template> load_templates(const std::string& path);
void save_templates(const std::vector<Template>& templates, const std::string& path);

// Injective map from answer words to label ids.
class Verbalizer {
public:
    void add(int word_id, int label_id);
    // -1 when the word is not an answer word.
    int label_of(int word_id) const;
    int word_of(int label_id) const;
    int label_count() const { return static_cast<int>(label_to_word_.size()); }
    const std::unordered_map<int, int>& word_to_label() const { return word_to_label_; }

private:
    std::unordered_map<int, int> word_to_label_;
    std::unordered_map<int, int> label_to_word_;
};

struct Prompt {
    std::vector<int> tokens;
    std::vector<int> segments;
    std::vector<double> attention;
    std::size_t mask_pos = 0;
    int label = -1;

    std::size_t length() const { return tokens.size(); }
};

// Instantiates the template with the input text at {x} (segment 0) and the
// template words around it (segment 1), recording where [MASK] lands.
Prompt build_prompt(const std::vector<int>& x, const Template& t, int label, const Vocab& vocab);

}  // namespace mixpro

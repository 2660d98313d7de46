#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixpt/tasks/task.hpp"

namespace mixpt::model {

using TokenId = std::int32_t;

// Whitespace words with trailing , . ? ! ; : split off as their own tokens.
std::vector<std::string> tokenize(std::string_view text);
// Inverse of tokenize for canonical text: punctuation tokens attach to the
// preceding word.
std::string detokenize(const std::vector<std::string>& tokens);

// Word-level vocabulary. Ids 0..2 are pad/eos/unk, 3..18 the span sentinels,
// then corpus words by descending frequency with lexicographic tie-break.
class Vocab {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kEos = 1;
    static constexpr TokenId kUnk = 2;
    static constexpr TokenId kFirstSentinel = 3;
    static constexpr std::size_t kSentinels = 16;

    Vocab();
    explicit Vocab(std::vector<std::string> tokens);

    static Vocab build(const std::vector<tasks::TaskExample>& examples, std::size_t min_count = 1);

    TokenId id(const std::string& token) const;
    const std::string& token(TokenId id) const;
    bool contains(const std::string& token) const { return index_.count(token) != 0; }
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    std::vector<TokenId> encode(std::string_view text) const;
    // Stops at eos; pad ids are skipped.
    std::string decode(const std::vector<TokenId>& ids) const;

    std::string fingerprint() const;
    nlohmann::json to_json() const;
    static Vocab from_json(const nlohmann::json& j);

    bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

// Words that appear in fixed prompt templates; always part of a vocabulary.
const std::vector<std::string>& template_words();

}  // namespace mixpt::model

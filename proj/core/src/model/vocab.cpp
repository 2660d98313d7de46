#include "mixpt/model/vocab.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "mixpt/digest.hpp"
#include "mixpt/error.hpp"
#include "mixpt/tasks/generators.hpp"
#include "mixpt/text.hpp"

namespace mixpt::model {

namespace {

bool is_split_punct(char c) {
    return c == ',' || c == '.' || c == '?' || c == '!' || c == ';' || c == ':';
}

bool is_punct_token(const std::string& t) { return t.size() == 1 && is_split_punct(t[0]); }

}  // namespace

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> out;
    for (const auto& word : text::split_whitespace(s)) {
        std::size_t end = word.size();
        while (end > 0 && is_split_punct(word[end - 1])) --end;
        if (end > 0) out.push_back(word.substr(0, end));
        for (std::size_t i = end; i < word.size(); ++i) out.emplace_back(1, word[i]);
    }
    return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0 && !is_punct_token(tokens[i])) out += ' ';
        out += tokens[i];
    }
    return out;
}

const std::vector<std::string>& template_words() {
    static const std::vector<std::string> words = [] {
        std::set<std::string> w;
        for (const char* t : {tasks::kCaptionPrompt, tasks::kCompletionPrefix, tasks::kItmPrefix, tasks::kListPrompt,
                              "does exist? which of exist? and or , yes no"}) {
            for (auto& tok : tokenize(t)) w.insert(tok);
        }
        return std::vector<std::string>(w.begin(), w.end());
    }();
    return words;
}

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(std::vector<std::string> words) {
    tokens_ = {"<pad>", "<eos>", "<unk>"};
    for (std::size_t k = 0; k < kSentinels; ++k) tokens_.push_back(tasks::sentinel(k));
    const std::size_t specials = tokens_.size();
    // Accept either a full token list (as serialized) or words only.
    std::size_t start = 0;
    if (words.size() >= specials && std::equal(tokens_.begin(), tokens_.end(), words.begin())) start = specials;
    for (std::size_t i = start; i < words.size(); ++i) tokens_.push_back(std::move(words[i]));
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
            throw InputError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
}

Vocab Vocab::build(const std::vector<tasks::TaskExample>& examples, std::size_t min_count) {
    if (examples.empty()) throw InputError("cannot build a vocabulary from an empty example stream");
    std::map<std::string, std::size_t> counts;
    for (const auto& e : examples) {
        for (const auto* s : {&e.prompt, &e.target})
            for (auto& tok : tokenize(*s)) ++counts[tok];
    }
    const Vocab specials;
    std::vector<std::pair<std::string, std::size_t>> words;
    std::set<std::string> required(template_words().begin(), template_words().end());
    for (const auto& [w, c] : counts) {
        if (specials.contains(w)) continue;
        if (c >= min_count || required.count(w)) words.emplace_back(w, c);
    }
    for (const auto& w : required)
        if (!counts.count(w)) words.emplace_back(w, 0);
    std::sort(words.begin(), words.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<std::string> tokens;
    for (auto& [w, _] : words) tokens.push_back(std::move(w));
    return Vocab(std::move(tokens));
}

TokenId Vocab::id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) return tokens_[kUnk];
    return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocab::encode(std::string_view s) const {
    std::vector<TokenId> ids;
    for (const auto& tok : tokenize(s)) ids.push_back(id(tok));
    return ids;
}

std::string Vocab::decode(const std::vector<TokenId>& ids) const {
    std::vector<std::string> words;
    for (TokenId id : ids) {
        if (id == kEos) break;
        if (id == kPad) continue;
        words.push_back(token(id));
    }
    return detokenize(words);
}

std::string Vocab::fingerprint() const { return sha256_hex(text::join(tokens_, "\n")); }

nlohmann::json Vocab::to_json() const { return {{"tokens", tokens_}, {"fingerprint", fingerprint()}}; }

Vocab Vocab::from_json(const nlohmann::json& j) {
    Vocab v(j.at("tokens").get<std::vector<std::string>>());
    if (j.contains("fingerprint") && j["fingerprint"].get<std::string>() != v.fingerprint())
        throw FingerprintError("vocabulary fingerprint mismatch");
    return v;
}

}  // namespace mixpt::model

#include "mixpt/tasks/generators.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mixpt/corpus/parsers.hpp"
#include "mixpt/error.hpp"
#include "mixpt/text.hpp"

namespace mixpt::tasks {

using corpus::CaptionRecord;
using corpus::Corpus;

namespace {

TaskExample make(const std::string& image_id, TaskKind kind, std::string prompt, std::string target) {
    TaskExample e;
    e.image_id = image_id;
    e.kind = kind;
    e.prompt = std::move(prompt);
    e.target = std::move(target);
    return e;
}

std::vector<std::string> names_of(const Corpus& corpus, const std::vector<std::string>& class_ids) {
    std::vector<std::string> out;
    out.reserve(class_ids.size());
    for (const auto& id : class_ids) out.push_back(corpus.classes.display_name(id));
    return out;
}

// k distinct elements of `pool`, in draw order.
std::vector<std::string> draw_distinct(std::vector<std::string> pool, std::size_t k, Rng& rng) {
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
    pool.resize(k);
    return pool;
}

void shuffle(std::vector<std::string>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

}  // namespace

std::string list_phrase(const std::vector<std::string>& names, const std::string& connective) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i > 0) out += (i + 1 == names.size()) ? " " + connective + " " : ", ";
        out += names[i];
    }
    return out;
}

TaskExample synth_caption(const CaptionRecord& caption) {
    return make(caption.image_id, TaskKind::Caption, kCaptionPrompt, text::normalize_caption(caption.caption));
}

std::size_t completion_split_index(std::size_t n_tokens, double f) {
    const auto split = static_cast<long long>(std::llround(f * static_cast<double>(n_tokens)));
    return static_cast<std::size_t>(std::clamp<long long>(split, 1, static_cast<long long>(n_tokens) - 1));
}

std::optional<TaskExample> synth_completion(const CaptionRecord& caption, const SynthConfig& cfg, Rng& rng) {
    const auto tokens = text::split_whitespace(text::normalize_caption(caption.caption));
    if (tokens.size() < 4) return std::nullopt;
    const double f = rng.uniform(cfg.completion_lo, cfg.completion_hi);
    const std::size_t split = completion_split_index(tokens.size(), f);
    std::vector<std::string> prefix(tokens.begin(), tokens.begin() + split);
    std::vector<std::string> suffix(tokens.begin() + split, tokens.end());
    return make(caption.image_id, TaskKind::Completion, kCompletionPrefix + text::join(prefix, " "),
                text::join(suffix, " "));
}

HardNegative replace_noun(const std::string& caption, std::size_t token_index, const std::string& noun,
                          const std::string& replacement) {
    auto tokens = text::split_whitespace(caption);
    if (token_index >= tokens.size()) throw InputError("token index out of range");
    std::string& tok = tokens[token_index];
    const std::string lower = text::to_lower(tok);
    const auto at = lower.find(noun);
    if (at == std::string::npos) throw InputError("token does not contain noun " + noun);
    tok = tok.substr(0, at) + replacement + tok.substr(at + noun.size());
    return {text::join(tokens, " "), noun, replacement, token_index};
}

HardNegative make_hard_negative_caption(const std::string& caption, const corpus::Lexicon& lexicon, Rng& rng) {
    std::vector<corpus::NounHit> hits;
    for (auto& h : corpus::extract_nouns(caption, lexicon))
        if (!lexicon.related(h.noun).empty()) hits.push_back(std::move(h));
    if (hits.empty()) throw NoNounFound("no lexicon noun in caption: " + caption);
    const auto& hit = hits[rng.index(hits.size())];
    const auto& related = lexicon.related(hit.noun);
    const std::string& replacement = related[rng.index(related.size())];
    return replace_noun(caption, hit.token_index, hit.noun, replacement);
}

TaskExample synth_itm(const CaptionRecord& caption, const Corpus& corpus, const SynthConfig& cfg, Rng& rng) {
    const std::string source = text::normalize_caption(caption.caption);
    TaskExample e = make(caption.image_id, TaskKind::ITM, "", "yes");
    e.meta.policy = cfg.policy;
    std::string shown = source;

    if (!rng.bernoulli(cfg.yes_no_balance)) {
        e.target = "no";
        bool easy = cfg.policy == NegativePolicy::Easy;
        if (!easy) {
            try {
                const HardNegative neg = make_hard_negative_caption(source, corpus.lexicon, rng);
                shown = neg.caption;
                e.meta.replaced_noun = neg.replaced_noun;
                e.meta.replacement = neg.replacement;
            } catch (const NoNounFound&) {
                easy = true;
                e.meta.fallback = true;
            }
        }
        if (easy) {
            std::vector<const CaptionRecord*> pool;
            for (const auto& [image_id, caps] : corpus.captions) {
                if (image_id == caption.image_id) continue;
                for (const auto& c : caps)
                    if (text::normalize_caption(c.caption) != source) pool.push_back(&c);
            }
            if (pool.empty()) throw PolicyUnavailable("no caption from another image for " + caption.image_id);
            shown = text::normalize_caption(pool[rng.index(pool.size())]->caption);
        }
    }
    e.prompt = kItmPrefix + shown;
    return e;
}

std::string sentinel(std::size_t k) { return "<extra_" + std::to_string(k) + ">"; }

std::vector<Span> sample_mlm_spans(std::size_t n_tokens, const SynthConfig& cfg, Rng& rng) {
    if (n_tokens < 2) throw InputError("span corruption needs at least 2 tokens");
    const auto rounded = static_cast<long long>(std::llround(cfg.mlm_mask_rate * static_cast<double>(n_tokens)));
    const std::size_t n_noise =
        static_cast<std::size_t>(std::clamp<long long>(rounded, 1, static_cast<long long>(n_tokens) - 1));

    std::vector<std::size_t> lengths;
    std::size_t covered = 0;
    while (covered < n_noise) {
        const std::size_t len = std::min(rng.geometric(cfg.mlm_mean_span), n_noise - covered);
        lengths.push_back(len);
        covered += len;
    }
    // Spans must be separated by at least one kept token.
    const std::size_t n_keep = n_tokens - n_noise;
    while (lengths.size() > std::min(n_keep + 1, kMaxSentinels)) {
        const std::size_t last = lengths.back();
        lengths.pop_back();
        lengths.back() += last;
    }

    const std::size_t n_spans = lengths.size();
    std::vector<std::size_t> gaps(n_spans + 1, 0);
    for (std::size_t i = 1; i < n_spans; ++i) gaps[i] = 1;
    for (std::size_t extra = n_keep - (n_spans - 1); extra > 0; --extra) ++gaps[rng.index(gaps.size())];

    std::vector<Span> spans;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n_spans; ++i) {
        pos += gaps[i];
        spans.push_back({pos, lengths[i]});
        pos += lengths[i];
    }
    return spans;
}

Corruption apply_span_corruption(const std::vector<std::string>& tokens, const std::vector<Span>& spans) {
    std::vector<std::string> prompt, target;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < spans.size(); ++k) {
        const Span& s = spans[k];
        if (s.start < pos || s.start + s.length > tokens.size() || s.length == 0)
            throw InputError("invalid span layout");
        prompt.insert(prompt.end(), tokens.begin() + pos, tokens.begin() + s.start);
        prompt.push_back(sentinel(k));
        target.push_back(sentinel(k));
        target.insert(target.end(), tokens.begin() + s.start, tokens.begin() + s.start + s.length);
        pos = s.start + s.length;
    }
    prompt.insert(prompt.end(), tokens.begin() + pos, tokens.end());
    return {text::join(prompt, " "), text::join(target, " ")};
}

std::optional<TaskExample> synth_mlm(const CaptionRecord& caption, const SynthConfig& cfg, Rng& rng) {
    const auto tokens = text::split_whitespace(text::normalize_caption(caption.caption));
    if (tokens.size() < 4) return std::nullopt;
    auto corrupted = apply_span_corruption(tokens, sample_mlm_spans(tokens.size(), cfg, rng));
    return make(caption.image_id, TaskKind::MLM, std::move(corrupted.prompt), std::move(corrupted.target));
}

std::vector<std::string> distractor_pool(const std::string& image_id, const Corpus& corpus, NegativePolicy policy,
                                         corpus::ObjectSource source) {
    const auto pos = corpus.positives(image_id, source);
    const std::set<std::string> positive(pos.begin(), pos.end());
    std::vector<std::string> pool;
    if (policy == NegativePolicy::Easy) {
        for (const auto& c : corpus.classes)
            if (!positive.count(c.class_id)) pool.push_back(c.class_id);
    } else {
        const auto neg = corpus.verified_negatives(image_id);
        std::set<std::string> negative(neg.begin(), neg.end());
        for (const auto& c : corpus.classes)
            if (negative.count(c.class_id) && !positive.count(c.class_id)) pool.push_back(c.class_id);
    }
    return pool;
}

std::optional<TaskExample> synth_oa_list(const std::string& image_id, const Corpus& corpus, const SynthConfig& cfg) {
    auto names = names_of(corpus, corpus.positives(image_id, cfg.object_source));
    if (names.empty()) return std::nullopt;
    std::sort(names.begin(), names.end());
    TaskExample e = make(image_id, TaskKind::OAList, kListPrompt, text::join(names, ", "));
    e.meta.candidate_objects = names;
    return e;
}

std::optional<TaskExample> synth_oa_exists(const std::string& image_id, const Corpus& corpus, const SynthConfig& cfg,
                                           Rng& rng) {
    const auto positives = corpus.positives(image_id, cfg.object_source);
    if (positives.empty()) return std::nullopt;
    const auto pool = distractor_pool(image_id, corpus, cfg.policy, cfg.object_source);
    if (pool.empty())
        throw PolicyUnavailable(policy_name(cfg.policy) + " distractor pool empty for " + image_id);

    const bool yes = rng.bernoulli(cfg.yes_no_balance);
    const std::string& chosen = yes ? positives[rng.index(positives.size())] : pool[rng.index(pool.size())];
    const std::string& name = corpus.classes.display_name(chosen);
    TaskExample e = make(image_id, TaskKind::OAExists, "does " + name + " exist?", yes ? "yes" : "no");
    e.meta.policy = cfg.policy;
    e.meta.candidate_objects = {name};
    return e;
}

std::optional<TaskExample> synth_oa_andor(const std::string& image_id, const Corpus& corpus, const SynthConfig& cfg,
                                          Rng& rng) {
    const auto positives = corpus.positives(image_id, cfg.object_source);
    if (positives.empty()) return std::nullopt;
    const auto pool = distractor_pool(image_id, corpus, cfg.policy, cfg.object_source);
    if (pool.empty())
        throw PolicyUnavailable(policy_name(cfg.policy) + " distractor pool empty for " + image_id);

    const std::size_t k = cfg.andor_k[rng.index(cfg.andor_k.size())];
    if (positives.size() + pool.size() < k) return std::nullopt;
    const bool is_and = rng.bernoulli(0.5);
    const bool want_yes = rng.bernoulli(cfg.yes_no_balance);

    const std::size_t lo = k > pool.size() ? k - pool.size() : 0;
    const std::size_t hi = std::min(k, positives.size());
    std::vector<std::string> drawn;
    bool target = false;
    for (int attempt = 0; attempt < 20; ++attempt) {
        const std::size_t n_pos = lo + rng.index(hi - lo + 1);
        drawn = draw_distinct(positives, n_pos, rng);
        auto neg = draw_distinct(pool, k - n_pos, rng);
        drawn.insert(drawn.end(), neg.begin(), neg.end());
        target = is_and ? n_pos == k : n_pos > 0;
        if (target == want_yes) break;
    }
    shuffle(drawn, rng);

    const auto names = names_of(corpus, drawn);
    const std::string connective = is_and ? "and" : "or";
    TaskExample e = make(image_id, TaskKind::OAAndOr, "does " + list_phrase(names, connective) + " exist?",
                         target ? "yes" : "no");
    e.meta.policy = cfg.policy;
    e.meta.candidate_objects = names;
    e.meta.connective = connective;
    return e;
}

std::optional<TaskExample> synth_oa_which(const std::string& image_id, const Corpus& corpus, const SynthConfig& cfg,
                                          Rng& rng) {
    const auto positives = corpus.positives(image_id, cfg.object_source);
    if (positives.empty()) return std::nullopt;
    const auto pool = distractor_pool(image_id, corpus, cfg.policy, cfg.object_source);
    if (pool.empty())
        throw PolicyUnavailable(policy_name(cfg.policy) + " distractor pool empty for " + image_id);

    constexpr std::size_t k = 3;
    const std::size_t lo = std::max<std::size_t>(1, pool.size() >= k ? 0 : k - pool.size());
    const std::size_t hi = std::min<std::size_t>(2, positives.size());
    if (lo > hi) return std::nullopt;
    const std::size_t n_pos = lo + rng.index(hi - lo + 1);

    auto drawn = draw_distinct(positives, n_pos, rng);
    auto neg = draw_distinct(pool, k - n_pos, rng);
    drawn.insert(drawn.end(), neg.begin(), neg.end());
    shuffle(drawn, rng);

    const std::set<std::string> positive(positives.begin(), positives.end());
    std::vector<std::string> present;
    for (const auto& id : drawn)
        if (positive.count(id)) present.push_back(corpus.classes.display_name(id));

    const auto names = names_of(corpus, drawn);
    TaskExample e = make(image_id, TaskKind::OAWhich, "which of " + list_phrase(names, "and") + " exist?",
                         text::join(present, ", "));
    e.meta.policy = cfg.policy;
    e.meta.candidate_objects = names;
    return e;
}

}  // namespace mixpt::tasks

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mixpt/corpus/types.hpp"
#include "mixpt/rng.hpp"
#include "mixpt/tasks/task.hpp"

// Per-kind example generators. A std::nullopt return is the skip signal:
// the image cannot host this kind and the caller moves to the next image.
namespace mixpt::tasks {

inline constexpr const char* kCaptionPrompt = "describe the image.";
inline constexpr const char* kCompletionPrefix = "complete: ";
inline constexpr const char* kItmPrefix = "does this text match the image? ";
inline constexpr const char* kListPrompt = "list all objects";

TaskExample synth_caption(const corpus::CaptionRecord& caption);

// round(f * n) clamped so both prefix and suffix keep at least one token.
std::size_t completion_split_index(std::size_t n_tokens, double f);
std::optional<TaskExample> synth_completion(const corpus::CaptionRecord& caption, const SynthConfig& cfg,
                                            Rng& rng);

struct HardNegative {
    std::string caption;
    std::string replaced_noun;
    std::string replacement;
    std::size_t token_index = 0;
};
// Replaces the noun at `token_index`, keeping any punctuation attached to the token.
HardNegative replace_noun(const std::string& caption, std::size_t token_index, const std::string& noun,
                          const std::string& replacement);
// Throws NoNounFound when no token is a lexicon noun with relatives.
HardNegative make_hard_negative_caption(const std::string& caption, const corpus::Lexicon& lexicon, Rng& rng);

// Negative captions come from other images (Easy) or noun replacement (Hard).
TaskExample synth_itm(const corpus::CaptionRecord& caption, const corpus::Corpus& corpus, const SynthConfig& cfg,
                      Rng& rng);

struct Span {
    std::size_t start = 0;
    std::size_t length = 0;

    bool operator==(const Span&) const = default;
};
// Non-overlapping, non-adjacent spans in increasing order covering about
// mask_rate of the tokens (at least one token, never all of them).
std::vector<Span> sample_mlm_spans(std::size_t n_tokens, const SynthConfig& cfg, Rng& rng);
struct Corruption {
    std::string prompt;
    std::string target;
};
Corruption apply_span_corruption(const std::vector<std::string>& tokens, const std::vector<Span>& spans);
std::string sentinel(std::size_t k);
inline constexpr std::size_t kMaxSentinels = 16;

std::optional<TaskExample> synth_mlm(const corpus::CaptionRecord& caption, const SynthConfig& cfg, Rng& rng);

// Object-aware kinds. Positives come from labels only; hidden objects are invisible here.
std::optional<TaskExample> synth_oa_list(const std::string& image_id, const corpus::Corpus& corpus,
                                         const SynthConfig& cfg);
// Throws PolicyUnavailable when the distractor pool for the policy is empty.
std::optional<TaskExample> synth_oa_exists(const std::string& image_id, const corpus::Corpus& corpus,
                                           const SynthConfig& cfg, Rng& rng);
std::optional<TaskExample> synth_oa_andor(const std::string& image_id, const corpus::Corpus& corpus,
                                          const SynthConfig& cfg, Rng& rng);
std::optional<TaskExample> synth_oa_which(const std::string& image_id, const corpus::Corpus& corpus,
                                          const SynthConfig& cfg, Rng& rng);

// Distractor class ids for an image under a policy, in class-table order.
std::vector<std::string> distractor_pool(const std::string& image_id, const corpus::Corpus& corpus,
                                         NegativePolicy policy, corpus::ObjectSource source);

// "a", "a and b", "a, b and c".
std::string list_phrase(const std::vector<std::string>& names, const std::string& connective);

}  // namespace mixpt::tasks

#pragma once

#include <istream>
#include <vector>

#include "mixpt/corpus/types.hpp"

namespace mixpt::corpus {

// `class_id,display_name` rows, no header. Display names are lowercased and trimmed.
ClassTable parse_class_descriptions(std::istream& in);

// `image_id,source,class_id,confidence` rows. A leading header whose first
// field is "ImageID" is skipped. Confidence must be 0 or 1. A source string
// containing "verification" marks the label as human verified.
std::vector<ImageLabel> parse_image_labels(std::istream& in);

// `image_id,class_id,x_min,x_max,y_min,y_max` rows with coordinates in [0, 1].
std::vector<BoxLabel> parse_box_labels(std::istream& in);

// JSONL with at least `image_id` and `caption` string fields per line.
std::vector<CaptionRecord> parse_localized_narratives(std::istream& in);

// `noun<TAB>related1,related2,...` rows; self references are dropped.
Lexicon build_lexicon(std::istream& in);

// Tokens that are lexicon keys after lowercasing and punctuation stripping.
struct NounHit {
    std::size_t token_index;
    std::string noun;

    bool operator==(const NounHit&) const = default;
};
std::vector<NounHit> extract_nouns(const std::string& caption, const Lexicon& lexicon);

// Lexicon related nouns must be keys or class display names. Returns the
// offending nouns (empty when valid).
std::vector<std::string> lexicon_dangling(const Lexicon& lexicon, const ClassTable& classes);

}  // namespace mixpt::corpus

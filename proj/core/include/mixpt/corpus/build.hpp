#pragma once

#include <vector>

#include "mixpt/corpus/types.hpp"

namespace mixpt::corpus {

// Joins parsed annotation streams into a Corpus.
//
// The set of known images is taken from `images` when any are given, else
// from the caption image ids, else from the label and box image ids. Records
// pointing at unknown images are dropped and counted in `dropped_records`.
// Class ids missing from the class table raise BuildError.
Corpus build_corpus(ClassTable classes, std::vector<ImageLabel> labels,
                    std::vector<BoxLabel> boxes, std::vector<CaptionRecord> captions,
                    std::vector<ImageRecord> images);

void validate_image(const ImageRecord& image);

}  // namespace mixpt::corpus

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mixpt/corpus/types.hpp"

namespace mixpt::corpus {

enum class GlyphShape { disk, square, triangle, cross };

struct Glyph {
    std::string name;
    GlyphShape shape = GlyphShape::disk;
    std::array<float, 3> rgb{1.f, 1.f, 1.f};
};

struct SynthCorpusParams {
    std::uint64_t seed = 0;
    std::size_t n_images = 100;
    std::vector<Glyph> object_vocab;
    std::size_t grid = 4;       // cells per side
    std::size_t cell_px = 8;    // pixels per cell side
    double hidden_rate = 0.0;
};

// Twelve objects in four families; each family shares a shape and differs
// by color, and the bundled lexicon relates family members.
std::vector<Glyph> default_object_vocab();
Lexicon default_lexicon();
// TSV text of default_lexicon(), the file shipped under data/.
std::string default_lexicon_tsv();

// Deterministic colored-shape grid corpus. Each image holds 1-4 distinct
// objects; each is labeled with probability 1 - hidden_rate, otherwise it
// goes to hidden_positives. Captions mention labeled objects only.
Corpus synth_corpus(const SynthCorpusParams& params);

// Draws one glyph into an image buffer, cell coordinates in grid units.
void render_glyph(ImageRecord& image, const Glyph& glyph, std::size_t cell_x, std::size_t cell_y,
                  std::size_t cell_px);

}  // namespace mixpt::corpus

#include "mixpt/corpus/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "mixpt/error.hpp"
#include "mixpt/rng.hpp"

namespace mixpt::corpus {

namespace {

constexpr std::array<float, 3> kRed{0.9f, 0.1f, 0.1f};
constexpr std::array<float, 3> kGreen{0.1f, 0.85f, 0.1f};
constexpr std::array<float, 3> kBlue{0.15f, 0.25f, 0.95f};

struct Family {
    GlyphShape shape;
    std::array<const char*, 3> members;
};

constexpr std::array<Family, 4> kFamilies{{
    {GlyphShape::disk, {"dog", "cat", "wolf"}},
    {GlyphShape::square, {"car", "bus", "truck"}},
    {GlyphShape::triangle, {"cup", "bottle", "bowl"}},
    {GlyphShape::cross, {"tree", "flower", "bush"}},
}};

bool inside(GlyphShape shape, double u, double v) {
    switch (shape) {
        case GlyphShape::disk:
            return (u - 0.5) * (u - 0.5) + (v - 0.5) * (v - 0.5) <= 0.38 * 0.38;
        case GlyphShape::square:
            return u >= 0.15 && u <= 0.85 && v >= 0.15 && v <= 0.85;
        case GlyphShape::triangle:
            return v >= 0.15 && v <= 0.85 && std::abs(u - 0.5) <= (v - 0.15) / 0.7 * 0.4;
        case GlyphShape::cross:
            return u >= 0.1 && u <= 0.9 && v >= 0.1 && v <= 0.9 &&
                   (std::abs(u - 0.5) <= 0.12 || std::abs(v - 0.5) <= 0.12);
    }
    return false;
}

std::string synth_image_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "synth_%06zu", i);
    return buf;
}

}  // namespace

std::vector<Glyph> default_object_vocab() {
    std::vector<Glyph> vocab;
    const std::array<std::array<float, 3>, 3> colors{kRed, kGreen, kBlue};
    for (const auto& family : kFamilies) {
        for (std::size_t i = 0; i < 3; ++i) vocab.push_back({family.members[i], family.shape, colors[i]});
    }
    return vocab;
}

Lexicon default_lexicon() {
    Lexicon lex;
    for (const auto& family : kFamilies) {
        for (std::size_t i = 0; i < 3; ++i) {
            std::vector<std::string> related;
            for (std::size_t j = 0; j < 3; ++j)
                if (j != i) related.emplace_back(family.members[j]);
            lex.entries.emplace(family.members[i], std::move(related));
        }
    }
    return lex;
}

std::string default_lexicon_tsv() {
    std::ostringstream out;
    for (const auto& [noun, related] : default_lexicon().entries) {
        out << noun << '\t';
        for (std::size_t i = 0; i < related.size(); ++i) out << (i ? "," : "") << related[i];
        out << '\n';
    }
    return out.str();
}

void render_glyph(ImageRecord& image, const Glyph& glyph, std::size_t cell_x, std::size_t cell_y,
                  std::size_t cell_px) {
    for (std::size_t py = 0; py < cell_px; ++py) {
        for (std::size_t px = 0; px < cell_px; ++px) {
            const double u = (px + 0.5) / static_cast<double>(cell_px);
            const double v = (py + 0.5) / static_cast<double>(cell_px);
            if (!inside(glyph.shape, u, v)) continue;
            const std::size_t y = cell_y * cell_px + py;
            const std::size_t x = cell_x * cell_px + px;
            float* p = &image.pixels[(y * image.width + x) * 3];
            for (int c = 0; c < 3; ++c) p[c] = glyph.rgb[c];
        }
    }
}

Corpus synth_corpus(const SynthCorpusParams& params) {
    const auto& vocab = params.object_vocab;
    if (vocab.size() < 4) throw ConfigError("object_vocab needs at least 4 objects");
    if (params.grid < 2) throw ConfigError("grid must be at least 2x2");
    if (params.cell_px < 4) throw ConfigError("cell_px must be at least 4");
    if (!(params.hidden_rate >= 0.0 && params.hidden_rate <= 1.0))
        throw ConfigError("hidden_rate must be in [0, 1]");

    Corpus corpus;
    corpus.seed = params.seed;
    corpus.lexicon = default_lexicon();
    for (const auto& g : vocab) corpus.classes.add({"/synth/" + g.name, g.name});

    const std::size_t side = params.grid * params.cell_px;
    const std::size_t n_cells = params.grid * params.grid;
    const std::size_t max_objects = std::min<std::size_t>({4, vocab.size(), n_cells});

    for (std::size_t i = 0; i < params.n_images; ++i) {
        // Per-image stream so a corpus of n images is a prefix of one with more.
        Rng rng(KeyHasher().add(params.seed).add("synth-image").add(i).finish());
        const std::string id = synth_image_id(i);

        ImageRecord image{id, side, side, std::vector<float>(side * side * 3), ImageSource::synthetic};
        for (auto& p : image.pixels) p = static_cast<float>(0.1 * rng.uniform());

        std::vector<std::size_t> objects(vocab.size());
        std::iota(objects.begin(), objects.end(), 0);
        std::vector<std::size_t> cells(n_cells);
        std::iota(cells.begin(), cells.end(), 0);
        const std::size_t n_objects = 1 + rng.index(max_objects);
        for (std::size_t k = 0; k < n_objects; ++k) {
            std::swap(objects[k], objects[k + rng.index(objects.size() - k)]);
            std::swap(cells[k], cells[k + rng.index(cells.size() - k)]);
        }

        std::vector<std::string> labeled_names;
        for (std::size_t k = 0; k < n_objects; ++k) {
            const Glyph& glyph = vocab[objects[k]];
            const std::size_t cx = cells[k] % params.grid;
            const std::size_t cy = cells[k] / params.grid;
            render_glyph(image, glyph, cx, cy, params.cell_px);
            const std::string class_id = "/synth/" + glyph.name;
            if (rng.bernoulli(params.hidden_rate)) {
                corpus.hidden_positives[id].insert(class_id);
                continue;
            }
            corpus.labels[id].push_back(
                {id, class_id, Presence::positive, Verification::human, "verification"});
            const double g = static_cast<double>(params.grid);
            corpus.boxes[id].push_back({id, class_id, {cx / g, cy / g, (cx + 1) / g, (cy + 1) / g}});
            labeled_names.push_back(glyph.name);
        }

        // Two verified negatives drawn from objects not placed in the image.
        for (std::size_t k = n_objects; k < std::min(n_objects + 2, objects.size()); ++k) {
            std::swap(objects[k], objects[k + rng.index(objects.size() - k)]);
            corpus.labels[id].push_back({id, "/synth/" + vocab[objects[k]].name, Presence::negative,
                                         Verification::human, "verification"});
        }

        std::string caption = "a photo";
        for (std::size_t k = 0; k < labeled_names.size(); ++k)
            caption += (k == 0 ? " of a " : " and a ") + labeled_names[k];
        corpus.captions[id].push_back({id, caption});

        corpus.images.emplace(id, std::move(image));
        corpus.image_ids.push_back(id);
    }
    return corpus;
}

}  // namespace mixpt::corpus

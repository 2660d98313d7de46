#include "mixpt/corpus/build.hpp"

#include <cmath>
#include <set>
#include <tuple>

#include "mixpt/error.hpp"

namespace mixpt::corpus {

void validate_image(const ImageRecord& image) {
    if (image.height == 0 || image.width == 0)
        throw InputError("image " + image.image_id + " has zero extent");
    if (image.pixels.size() != image.height * image.width * 3)
        throw InputError("image " + image.image_id + " pixel count does not match shape");
    for (float v : image.pixels) {
        if (!std::isfinite(v) || v < 0.f || v > 1.f)
            throw InputError("image " + image.image_id + " has pixel outside [0, 1]");
    }
}

Corpus build_corpus(ClassTable classes, std::vector<ImageLabel> labels, std::vector<BoxLabel> boxes,
                    std::vector<CaptionRecord> captions, std::vector<ImageRecord> images) {
    std::set<std::string> missing;
    for (const auto& l : labels)
        if (!classes.contains(l.class_id)) missing.insert(l.class_id);
    for (const auto& b : boxes)
        if (!classes.contains(b.class_id)) missing.insert(b.class_id);
    if (!missing.empty()) {
        std::string msg = "class ids missing from class table:";
        for (const auto& m : missing) msg += " " + m;
        throw BuildError(msg, {missing.begin(), missing.end()});
    }

    std::set<std::string> known;
    if (!images.empty()) {
        for (const auto& img : images) known.insert(img.image_id);
    } else if (!captions.empty()) {
        for (const auto& c : captions) known.insert(c.image_id);
    } else {
        for (const auto& l : labels) known.insert(l.image_id);
        for (const auto& b : boxes) known.insert(b.image_id);
    }

    Corpus corpus;
    corpus.classes = std::move(classes);
    corpus.image_ids.assign(known.begin(), known.end());

    for (auto& img : images) {
        validate_image(img);
        std::string id = img.image_id;
        if (!corpus.images.emplace(id, std::move(img)).second) ++corpus.dropped_records;
    }

    std::set<std::tuple<std::string, std::string, Presence>> seen;
    for (auto& l : labels) {
        if (!known.count(l.image_id) || !seen.emplace(l.image_id, l.class_id, l.presence).second) {
            ++corpus.dropped_records;
            continue;
        }
        corpus.labels[l.image_id].push_back(std::move(l));
    }
    for (auto& b : boxes) {
        if (!known.count(b.image_id)) {
            ++corpus.dropped_records;
            continue;
        }
        corpus.boxes[b.image_id].push_back(std::move(b));
    }
    for (auto& c : captions) {
        if (!known.count(c.image_id)) {
            ++corpus.dropped_records;
            continue;
        }
        corpus.captions[c.image_id].push_back(std::move(c));
    }
    return corpus;
}

}  // namespace mixpt::corpus

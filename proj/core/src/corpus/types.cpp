#include "mixpt/corpus/types.hpp"

#include <algorithm>

#include "mixpt/error.hpp"

namespace mixpt::corpus {

void ClassTable::add(ClassEntry entry) {
    if (entry.display_name.empty()) throw InputError("empty display name for " + entry.class_id);
    if (by_id_.count(entry.class_id)) throw InputError("duplicate class id " + entry.class_id);
    by_id_.emplace(entry.class_id, entries_.size());
    by_name_.emplace(entry.display_name, entries_.size());
    entries_.push_back(std::move(entry));
}

const ClassEntry* ClassTable::find(const std::string& class_id) const {
    auto it = by_id_.find(class_id);
    return it == by_id_.end() ? nullptr : &entries_[it->second];
}

const ClassEntry* ClassTable::find_by_name(const std::string& display_name) const {
    auto it = by_name_.find(display_name);
    return it == by_name_.end() ? nullptr : &entries_[it->second];
}

const std::string& ClassTable::display_name(const std::string& class_id) const {
    const ClassEntry* e = find(class_id);
    if (!e) throw InputError("unknown class id " + class_id);
    return e->display_name;
}

const std::vector<std::string>& Lexicon::related(const std::string& noun) const {
    static const std::vector<std::string> empty;
    auto it = entries.find(noun);
    return it == entries.end() ? empty : it->second;
}

bool Corpus::operator==(const Corpus& other) const {
    return classes == other.classes && image_ids == other.image_ids && images == other.images &&
           labels == other.labels && boxes == other.boxes && captions == other.captions &&
           hidden_positives == other.hidden_positives && lexicon == other.lexicon &&
           seed == other.seed;
}

bool Corpus::has_image(const std::string& image_id) const {
    return std::binary_search(image_ids.begin(), image_ids.end(), image_id);
}

std::vector<std::string> Corpus::positives(const std::string& image_id, ObjectSource source) const {
    std::set<std::string> out;
    if (source != ObjectSource::box_labels) {
        if (auto it = labels.find(image_id); it != labels.end()) {
            for (const auto& l : it->second)
                if (l.presence == Presence::positive) out.insert(l.class_id);
        }
    }
    if (source != ObjectSource::image_labels) {
        if (auto it = boxes.find(image_id); it != boxes.end()) {
            for (const auto& b : it->second) out.insert(b.class_id);
        }
    }
    return {out.begin(), out.end()};
}

std::vector<std::string> Corpus::verified_negatives(const std::string& image_id) const {
    std::set<std::string> out;
    if (auto it = labels.find(image_id); it != labels.end()) {
        for (const auto& l : it->second)
            if (l.presence == Presence::negative && l.verification == Verification::human)
                out.insert(l.class_id);
    }
    return {out.begin(), out.end()};
}

const std::set<std::string>& Corpus::hidden(const std::string& image_id) const {
    static const std::set<std::string> empty;
    auto it = hidden_positives.find(image_id);
    return it == hidden_positives.end() ? empty : it->second;
}

const std::vector<CaptionRecord>& Corpus::captions_of(const std::string& image_id) const {
    static const std::vector<CaptionRecord> empty;
    auto it = captions.find(image_id);
    return it == captions.end() ? empty : it->second;
}

namespace {
template <typename Map>
std::size_t total(const Map& m) {
    std::size_t n = 0;
    for (const auto& [_, v] : m) n += v.size();
    return n;
}
}  // namespace

std::size_t Corpus::label_count() const { return total(labels); }
std::size_t Corpus::box_count() const { return total(boxes); }
std::size_t Corpus::caption_count() const { return total(captions); }
std::size_t Corpus::hidden_count() const { return total(hidden_positives); }

Corpus Corpus::subset(const std::vector<std::string>& ids) const {
    Corpus out;
    out.classes = classes;
    out.lexicon = lexicon;
    out.seed = seed;
    std::set<std::string> keep(ids.begin(), ids.end());
    for (const auto& id : image_ids) {
        if (!keep.count(id)) continue;
        out.image_ids.push_back(id);
        if (auto it = images.find(id); it != images.end()) out.images.emplace(id, it->second);
        if (auto it = labels.find(id); it != labels.end()) out.labels.emplace(id, it->second);
        if (auto it = boxes.find(id); it != boxes.end()) out.boxes.emplace(id, it->second);
        if (auto it = captions.find(id); it != captions.end()) out.captions.emplace(id, it->second);
        if (auto it = hidden_positives.find(id); it != hidden_positives.end())
            out.hidden_positives.emplace(id, it->second);
    }
    return out;
}

std::string to_string(ImageSource s) { return s == ImageSource::file ? "file" : "synthetic"; }
std::string to_string(Presence p) { return p == Presence::positive ? "positive" : "negative"; }
std::string to_string(Verification v) { return v == Verification::human ? "human" : "machine"; }

std::string to_string(ObjectSource s) {
    switch (s) {
        case ObjectSource::image_labels: return "image_labels";
        case ObjectSource::box_labels: return "box_labels";
        case ObjectSource::both: return "both";
    }
    return "both";
}

ObjectSource parse_object_source(const std::string& s) {
    if (s == "image_labels") return ObjectSource::image_labels;
    if (s == "box_labels") return ObjectSource::box_labels;
    if (s == "both" || s == "union") return ObjectSource::both;
    throw ConfigError("unknown object_source '" + s + "'");
}

}  // namespace mixpt::corpus

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace mixpt::corpus {

struct ClassEntry {
    std::string class_id;
    std::string display_name;

    bool operator==(const ClassEntry&) const = default;
};

// Class vocabulary in file order with id lookup.
class ClassTable {
public:
    void add(ClassEntry entry);
    const ClassEntry* find(const std::string& class_id) const;
    bool contains(const std::string& class_id) const { return find(class_id) != nullptr; }
    // Throws InputError for unknown ids.
    const std::string& display_name(const std::string& class_id) const;
    const ClassEntry* find_by_name(const std::string& display_name) const;

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<ClassEntry>& entries() const { return entries_; }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    bool operator==(const ClassTable& other) const { return entries_ == other.entries_; }

private:
    std::vector<ClassEntry> entries_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::unordered_map<std::string, std::size_t> by_name_;
};

enum class ImageSource { file, synthetic };

// Row-major height x width x 3 pixels in [0, 1].
struct ImageRecord {
    std::string image_id;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> pixels;
    ImageSource source = ImageSource::file;

    bool operator==(const ImageRecord&) const = default;
};

enum class Presence { positive, negative };
enum class Verification { machine, human };

struct ImageLabel {
    std::string image_id;
    std::string class_id;
    Presence presence = Presence::positive;
    Verification verification = Verification::machine;
    // Raw source column, kept so serialization round-trips.
    std::string source;

    bool operator==(const ImageLabel&) const = default;
};

struct Box {
    double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

    bool operator==(const Box&) const = default;
};

struct BoxLabel {
    std::string image_id;
    std::string class_id;
    Box box;

    bool operator==(const BoxLabel&) const = default;
};

struct CaptionRecord {
    std::string image_id;
    std::string caption;

    bool operator==(const CaptionRecord&) const = default;
};

// noun -> ordered related nouns; a noun never appears in its own list.
struct Lexicon {
    std::map<std::string, std::vector<std::string>> entries;

    bool contains(const std::string& noun) const { return entries.count(noun) != 0; }
    const std::vector<std::string>& related(const std::string& noun) const;

    bool operator==(const Lexicon&) const = default;
};

// Which annotations count as "objects present" for object-aware tasks.
enum class ObjectSource { image_labels, box_labels, both };

struct Corpus {
    ClassTable classes;
    // Sorted ids of every image the corpus knows about.
    std::vector<std::string> image_ids;
    // Pixel data; may be empty for label-only corpora.
    std::map<std::string, ImageRecord> images;
    std::map<std::string, std::vector<ImageLabel>> labels;
    std::map<std::string, std::vector<BoxLabel>> boxes;
    std::map<std::string, std::vector<CaptionRecord>> captions;
    // Objects rendered in the pixels but missing from labels (synthetic only).
    std::map<std::string, std::set<std::string>> hidden_positives;
    Lexicon lexicon;
    std::optional<std::uint64_t> seed;
    std::size_t dropped_records = 0;

    bool operator==(const Corpus& other) const;

    bool has_image(const std::string& image_id) const;
    // Sorted unique positive class ids under the given source policy.
    std::vector<std::string> positives(const std::string& image_id,
                                       ObjectSource source = ObjectSource::both) const;
    // Sorted unique class ids with a human-verified negative label.
    std::vector<std::string> verified_negatives(const std::string& image_id) const;
    const std::set<std::string>& hidden(const std::string& image_id) const;
    const std::vector<CaptionRecord>& captions_of(const std::string& image_id) const;

    std::size_t label_count() const;
    std::size_t box_count() const;
    std::size_t caption_count() const;
    std::size_t hidden_count() const;

    // Restrict to a subset of images (e.g. a train/eval split).
    Corpus subset(const std::vector<std::string>& image_ids) const;
};

std::string to_string(ImageSource s);
std::string to_string(Presence p);
std::string to_string(Verification v);
std::string to_string(ObjectSource s);
ObjectSource parse_object_source(const std::string& s);

}  // namespace mixpt::corpus

#include "mixpt/corpus/storage.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mixpt/corpus/parsers.hpp"
#include "mixpt/digest.hpp"
#include "mixpt/error.hpp"
#include "mixpt/text.hpp"

namespace fs = std::filesystem;

namespace mixpt::corpus {

namespace {

static_assert(std::endian::native == std::endian::little, "image store assumes little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4)) throw IntegrityError("truncated image store");
    return v;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ifstream open_in(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InputError("cannot open " + p.string());
    return in;
}

}  // namespace

void write_images(std::ostream& out, const std::vector<ImageRecord>& images) {
    out.write("MPIM", 4);
    put_u32(out, static_cast<std::uint32_t>(images.size()));
    for (const auto& img : images) {
        put_u32(out, static_cast<std::uint32_t>(img.image_id.size()));
        out.write(img.image_id.data(), static_cast<std::streamsize>(img.image_id.size()));
        put_u32(out, static_cast<std::uint32_t>(img.height));
        put_u32(out, static_cast<std::uint32_t>(img.width));
        put_u32(out, 3);
        const char source = img.source == ImageSource::synthetic ? 1 : 0;
        out.write(&source, 1);
        out.write(reinterpret_cast<const char*>(img.pixels.data()),
                  static_cast<std::streamsize>(img.pixels.size() * sizeof(float)));
    }
}

std::vector<ImageRecord> read_images(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "MPIM", 4) != 0)
        throw IntegrityError("bad image store magic");
    const std::uint32_t count = get_u32(in);
    std::vector<ImageRecord> images;
    images.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        ImageRecord img;
        img.image_id.resize(get_u32(in));
        if (!in.read(img.image_id.data(), static_cast<std::streamsize>(img.image_id.size())))
            throw IntegrityError("truncated image store");
        img.height = get_u32(in);
        img.width = get_u32(in);
        if (get_u32(in) != 3) throw IntegrityError("image store expects 3 channels");
        char source = 0;
        if (!in.read(&source, 1)) throw IntegrityError("truncated image store");
        img.source = source ? ImageSource::synthetic : ImageSource::file;
        img.pixels.resize(img.height * img.width * 3);
        if (!in.read(reinterpret_cast<char*>(img.pixels.data()),
                     static_cast<std::streamsize>(img.pixels.size() * sizeof(float))))
            throw IntegrityError("truncated image store");
        images.push_back(std::move(img));
    }
    return images;
}

std::string serialize_classes(const ClassTable& classes) {
    std::string out;
    for (const auto& e : classes) out += text::csv_field(e.class_id) + "," + text::csv_field(e.display_name) + "\n";
    return out;
}

std::string serialize_labels(const Corpus& corpus) {
    std::string out;
    for (const auto& [_, labels] : corpus.labels) {
        for (const auto& l : labels) {
            out += text::csv_field(l.image_id) + "," + text::csv_field(l.source) + "," +
                   text::csv_field(l.class_id) + "," + (l.presence == Presence::positive ? "1" : "0") + "\n";
        }
    }
    return out;
}

std::string serialize_boxes(const Corpus& corpus) {
    std::string out;
    for (const auto& [_, boxes] : corpus.boxes) {
        for (const auto& b : boxes) {
            out += text::csv_field(b.image_id) + "," + text::csv_field(b.class_id) + "," +
                   fmt_double(b.box.x_min) + "," + fmt_double(b.box.x_max) + "," + fmt_double(b.box.y_min) +
                   "," + fmt_double(b.box.y_max) + "\n";
        }
    }
    return out;
}

std::string serialize_captions(const Corpus& corpus) {
    std::string out;
    for (const auto& [_, caps] : corpus.captions) {
        for (const auto& c : caps) {
            nlohmann::json j{{"image_id", c.image_id}, {"caption", c.caption}};
            out += j.dump() + "\n";
        }
    }
    return out;
}

std::string serialize_lexicon(const Lexicon& lexicon) {
    std::string out;
    for (const auto& [noun, related] : lexicon.entries) out += noun + "\t" + text::join(related, ",") + "\n";
    return out;
}

namespace {

std::string serialize_hidden(const Corpus& corpus) {
    std::string out;
    for (const auto& [id, classes] : corpus.hidden_positives)
        for (const auto& c : classes) out += text::csv_field(id) + "," + text::csv_field(c) + "\n";
    return out;
}

std::string serialize_images(const Corpus& corpus) {
    std::vector<ImageRecord> images;
    for (const auto& [_, img] : corpus.images) images.push_back(img);
    std::ostringstream out(std::ios::binary);
    write_images(out, images);
    return out.str();
}

nlohmann::json manifest(const Corpus& corpus) {
    nlohmann::json j;
    j["format_version"] = kCorpusFormatVersion;
    j["seed"] = corpus.seed ? nlohmann::json(*corpus.seed) : nlohmann::json(nullptr);
    j["counts"] = {{"classes", corpus.classes.size()},   {"images", corpus.image_ids.size()},
                   {"pixel_images", corpus.images.size()}, {"labels", corpus.label_count()},
                   {"boxes", corpus.box_count()},          {"captions", corpus.caption_count()},
                   {"hidden_positives", corpus.hidden_count()},
                   {"lexicon_entries", corpus.lexicon.entries.size()}};
    j["image_ids"] = corpus.image_ids;
    return j;
}

}  // namespace

void save_corpus(const Corpus& corpus, const fs::path& dir) {
    fs::create_directories(dir);
    write_file(dir / "classes.csv", serialize_classes(corpus.classes));
    write_file(dir / "labels.csv", serialize_labels(corpus));
    write_file(dir / "boxes.csv", serialize_boxes(corpus));
    write_file(dir / "captions.jsonl", serialize_captions(corpus));
    write_file(dir / "lexicon.tsv", serialize_lexicon(corpus.lexicon));
    write_file(dir / "hidden.csv", serialize_hidden(corpus));
    write_file(dir / "images.bin", serialize_images(corpus));
    write_file(dir / "manifest.json", manifest(corpus).dump(2) + "\n");
}

Corpus load_corpus(const fs::path& dir) {
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(read_file(dir / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError("bad corpus manifest: " + std::string(e.what()));
    }
    if (m.value("format_version", "") != kCorpusFormatVersion)
        throw VersionError("unsupported corpus format version " + m.value("format_version", std::string("?")));

    Corpus corpus;
    if (!m["seed"].is_null()) corpus.seed = m["seed"].get<std::uint64_t>();
    corpus.image_ids = m["image_ids"].get<std::vector<std::string>>();

    auto in = open_in(dir / "classes.csv");
    corpus.classes = parse_class_descriptions(in);
    in = open_in(dir / "labels.csv");
    for (auto& l : parse_image_labels(in)) corpus.labels[l.image_id].push_back(std::move(l));
    in = open_in(dir / "boxes.csv");
    for (auto& b : parse_box_labels(in)) corpus.boxes[b.image_id].push_back(std::move(b));
    in = open_in(dir / "captions.jsonl");
    for (auto& c : parse_localized_narratives(in)) corpus.captions[c.image_id].push_back(std::move(c));
    in = open_in(dir / "lexicon.tsv");
    corpus.lexicon = build_lexicon(in);
    in = open_in(dir / "hidden.csv");
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = text::split_csv(line);
        if (f.size() != 2) throw IntegrityError("bad hidden.csv row");
        corpus.hidden_positives[f[0]].insert(f[1]);
    }
    in = open_in(dir / "images.bin");
    for (auto& img : read_images(in)) {
        std::string id = img.image_id;
        corpus.images.emplace(std::move(id), std::move(img));
    }
    return corpus;
}

std::string corpus_fingerprint(const Corpus& corpus) {
    std::string all = text::join(corpus.image_ids, "\n");
    for (const auto& part : {serialize_classes(corpus.classes), serialize_labels(corpus), serialize_boxes(corpus),
                             serialize_captions(corpus), serialize_lexicon(corpus.lexicon),
                             serialize_hidden(corpus)}) {
        all += "\x1e" + sha256_hex(part);
    }
    all += "\x1e" + sha256_hex(serialize_images(corpus));
    return sha256_hex(all);
}

}  // namespace mixpt::corpus

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mixpt/corpus/types.hpp"

namespace mixpt::corpus {

inline constexpr const char* kCorpusFormatVersion = "1";

// Directory layout: manifest.json, classes.csv, labels.csv, boxes.csv,
// captions.jsonl, lexicon.tsv, hidden.csv, images.bin.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

// Flat f32 image store: "MPIM" magic, u32 count, then per image
// {u32 id length, id bytes, u32 height, u32 width, u32 channels, u8 source,
// f32 little-endian pixels}.
void write_images(std::ostream& out, const std::vector<ImageRecord>& images);
std::vector<ImageRecord> read_images(std::istream& in);

std::string serialize_classes(const ClassTable& classes);
std::string serialize_labels(const Corpus& corpus);
std::string serialize_boxes(const Corpus& corpus);
std::string serialize_captions(const Corpus& corpus);
std::string serialize_lexicon(const Lexicon& lexicon);

// SHA-256 over the canonical serialization of every component.
std::string corpus_fingerprint(const Corpus& corpus);

}  // namespace mixpt::corpus

#include "mixpt/corpus/parsers.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <set>
#include <string>

#include "mixpt/error.hpp"
#include "mixpt/text.hpp"

namespace mixpt::corpus {

namespace {

// Yields (1-based line number, line) for each non-blank line, CR stripped.
template <typename Fn>
void for_each_line(std::istream& in, Fn&& fn) {
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) continue;
        fn(number, line);
    }
}

double parse_double(const std::string& field, std::size_t line) {
    const std::string t = text::trim(field);
    double value = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw ParseError("not a number: '" + field + "'", line);
    return value;
}

}  // namespace

ClassTable parse_class_descriptions(std::istream& in) {
    ClassTable table;
    for_each_line(in, [&](std::size_t line, const std::string& row) {
        auto fields = text::split_csv(row);
        if (fields.size() != 2)
            throw ParseError("expected 2 columns, got " + std::to_string(fields.size()), line);
        ClassEntry entry{text::trim(fields[0]), text::to_lower(text::trim(fields[1]))};
        if (entry.class_id.empty()) throw ParseError("empty class id", line);
        if (entry.display_name.empty()) throw ParseError("empty display name", line);
        if (table.contains(entry.class_id)) throw ParseError("duplicate class id " + entry.class_id, line);
        table.add(std::move(entry));
    });
    return table;
}

std::vector<ImageLabel> parse_image_labels(std::istream& in) {
    std::vector<ImageLabel> out;
    bool first = true;
    for_each_line(in, [&](std::size_t line, const std::string& row) {
        auto fields = text::split_csv(row);
        if (first) {
            first = false;
            if (!fields.empty() && text::trim(fields[0]) == "ImageID") return;
        }
        if (fields.size() != 4)
            throw ParseError("expected 4 columns, got " + std::to_string(fields.size()), line);
        const double confidence = parse_double(fields[3], line);
        if (confidence != 0.0 && confidence != 1.0)
            throw ParseError("confidence must be 0 or 1, got " + text::trim(fields[3]), line);
        ImageLabel label;
        label.image_id = text::trim(fields[0]);
        label.source = text::trim(fields[1]);
        label.class_id = text::trim(fields[2]);
        label.presence = confidence == 1.0 ? Presence::positive : Presence::negative;
        label.verification = text::contains(label.source, "verification") ? Verification::human
                                                                           : Verification::machine;
        out.push_back(std::move(label));
    });
    return out;
}

std::vector<BoxLabel> parse_box_labels(std::istream& in) {
    std::vector<BoxLabel> out;
    bool first = true;
    std::size_t row_index = 0;
    for_each_line(in, [&](std::size_t line, const std::string& row) {
        auto fields = text::split_csv(row);
        if (first) {
            first = false;
            if (!fields.empty() && text::trim(fields[0]) == "ImageID") return;
        }
        ++row_index;
        if (fields.size() != 6)
            throw ParseError("expected 6 columns, got " + std::to_string(fields.size()), line);
        BoxLabel b;
        b.image_id = text::trim(fields[0]);
        b.class_id = text::trim(fields[1]);
        b.box.x_min = parse_double(fields[2], line);
        b.box.x_max = parse_double(fields[3], line);
        b.box.y_min = parse_double(fields[4], line);
        b.box.y_max = parse_double(fields[5], line);
        const auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!in_unit(b.box.x_min) || !in_unit(b.box.x_max) || !in_unit(b.box.y_min) ||
            !in_unit(b.box.y_max))
            throw ValidationError("box coordinates outside [0, 1]", row_index);
        if (b.box.x_min >= b.box.x_max || b.box.y_min >= b.box.y_max)
            throw ValidationError("degenerate box", row_index);
        out.push_back(std::move(b));
    });
    return out;
}

std::vector<CaptionRecord> parse_localized_narratives(std::istream& in) {
    std::vector<CaptionRecord> out;
    for_each_line(in, [&](std::size_t line, const std::string& row) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(row);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), line);
        }
        if (!j.is_object()) throw ParseError("expected a JSON object", line);
        auto id = j.find("image_id");
        auto caption = j.find("caption");
        if (id == j.end() || !id->is_string()) throw ParseError("missing string field image_id", line);
        if (caption == j.end() || !caption->is_string())
            throw ParseError("missing string field caption", line);
        CaptionRecord rec{id->get<std::string>(), caption->get<std::string>()};
        if (text::normalize_caption(rec.caption).empty()) throw ParseError("empty caption", line);
        out.push_back(std::move(rec));
    });
    return out;
}

Lexicon build_lexicon(std::istream& in) {
    Lexicon lex;
    for_each_line(in, [&](std::size_t line, const std::string& row) {
        auto tab = row.find('\t');
        if (tab == std::string::npos) throw ParseError("expected noun<TAB>related", line);
        std::string noun = text::to_lower(text::trim(row.substr(0, tab)));
        if (noun.empty()) throw ParseError("empty noun", line);
        if (lex.entries.count(noun)) throw ParseError("duplicate noun " + noun, line);
        std::vector<std::string> related;
        std::set<std::string> seen;
        for (const auto& r : text::split(row.substr(tab + 1), ',')) {
            std::string rel = text::to_lower(text::trim(r));
            if (rel.empty() || rel == noun || !seen.insert(rel).second) continue;
            related.push_back(std::move(rel));
        }
        lex.entries.emplace(std::move(noun), std::move(related));
    });
    return lex;
}

std::vector<NounHit> extract_nouns(const std::string& caption, const Lexicon& lexicon) {
    std::vector<NounHit> out;
    const auto tokens = text::split_whitespace(caption);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::string word = text::strip_punct(text::to_lower(tokens[i]));
        if (lexicon.contains(word)) out.push_back({i, std::move(word)});
    }
    return out;
}

std::vector<std::string> lexicon_dangling(const Lexicon& lexicon, const ClassTable& classes) {
    std::set<std::string> bad;
    for (const auto& [noun, related] : lexicon.entries) {
        for (const auto& r : related) {
            if (r == noun) bad.insert(r);
            if (!lexicon.contains(r) && !classes.find_by_name(r)) bad.insert(r);
        }
    }
    return {bad.begin(), bad.end()};
}

}  // namespace mixpt::corpus

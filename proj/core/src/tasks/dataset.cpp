#include "mixpt/tasks/dataset.hpp"

#include <fstream>
#include <sstream>

#include "mixpt/digest.hpp"
#include "mixpt/error.hpp"
#include "mixpt/rng.hpp"
#include "mixpt/tasks/generators.hpp"

namespace fs = std::filesystem;

namespace mixpt::tasks {

namespace {

std::optional<TaskExample> generate(TaskKind kind, const corpus::Corpus& corpus, const std::string& image_id,
                                    std::size_t cycle, const SynthConfig& cfg, Rng& rng) {
    if (is_cross_modal(kind)) {
        const auto& caps = corpus.captions_of(image_id);
        if (caps.empty()) return std::nullopt;
        const auto& caption = caps[cycle % caps.size()];
        switch (kind) {
            case TaskKind::Caption: return synth_caption(caption);
            case TaskKind::Completion: return synth_completion(caption, cfg, rng);
            case TaskKind::ITM: return synth_itm(caption, corpus, cfg, rng);
            case TaskKind::MLM: return synth_mlm(caption, cfg, rng);
            default: break;
        }
    }
    switch (kind) {
        case TaskKind::OAList: return synth_oa_list(image_id, corpus, cfg);
        case TaskKind::OAExists: return synth_oa_exists(image_id, corpus, cfg, rng);
        case TaskKind::OAAndOr: return synth_oa_andor(image_id, corpus, cfg, rng);
        case TaskKind::OAWhich: return synth_oa_which(image_id, corpus, cfg, rng);
        default: break;
    }
    return std::nullopt;
}

template <typename Map>
nlohmann::ordered_json tally(const Map& m) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m) j[kind_name(k)] = v;
    return j;
}

}  // namespace

nlohmann::ordered_json SynthStats::to_json() const {
    nlohmann::ordered_json j;
    j["generated"] = tally(generated);
    j["skipped"] = tally(skipped);
    j["fallbacks"] = tally(fallbacks);
    j["policy_unavailable"] = tally(policy_unavailable);
    return j;
}

std::vector<TaskExample> synth_kind(const corpus::Corpus& corpus, TaskKind kind, std::size_t count,
                                    const SynthConfig& cfg, SynthStats* stats) {
    cfg.validate();
    SynthStats local;
    SynthStats& st = stats ? *stats : local;
    std::vector<TaskExample> out;
    out.reserve(count);
    if (count == 0) return out;
    if (corpus.image_ids.empty()) throw SynthesisError(kind_name(kind), "corpus has no images");

    for (std::size_t cycle = 0; out.size() < count; ++cycle) {
        std::size_t produced = 0;
        for (const auto& image_id : corpus.image_ids) {
            if (out.size() == count) break;
            Rng rng(KeyHasher().add(cfg.seed).add(kind_name(kind)).add(image_id).add(cycle).finish());
            std::optional<TaskExample> e;
            try {
                e = generate(kind, corpus, image_id, cycle, cfg, rng);
            } catch (const PolicyUnavailable&) {
                ++st.policy_unavailable[kind];
            }
            if (!e) {
                ++st.skipped[kind];
                continue;
            }
            e->id = kind_name(kind) + ":" + image_id + ":" + std::to_string(cycle);
            if (e->meta.fallback) ++st.fallbacks[kind];
            out.push_back(std::move(*e));
            ++produced;
        }
        if (produced == 0) throw SynthesisError(kind_name(kind), "no eligible image in corpus");
    }
    st.generated[kind] += out.size();
    return out;
}

std::vector<TaskExample> synth_dataset(const corpus::Corpus& corpus, const std::vector<TaskKind>& kinds,
                                       std::size_t count_per_kind, const SynthConfig& cfg, SynthStats* stats) {
    std::vector<TaskExample> all;
    for (TaskKind kind : kinds) {
        auto part = synth_kind(corpus, kind, count_per_kind, cfg, stats);
        all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return all;
}

std::string task_file_name(TaskKind kind, NegativePolicy policy) {
    return kind_name(kind) + "." + policy_name(policy) + ".jsonl";
}

void write_task_dir(const fs::path& dir, const std::vector<TaskExample>& examples, const std::vector<TaskKind>& kinds,
                    const SynthConfig& cfg, const SynthStats& stats) {
    fs::create_directories(dir);
    nlohmann::ordered_json files = nlohmann::ordered_json::object();
    for (TaskKind kind : kinds) {
        std::vector<TaskExample> part;
        for (const auto& e : examples)
            if (e.kind == kind) part.push_back(e);
        std::ostringstream out;
        write_jsonl(out, part);
        const std::string name = task_file_name(kind, cfg.policy);
        write_file(dir / name, out.str());
        files[name] = {{"count", part.size()}, {"sha256", sha256_hex(out.str())}};
    }
    nlohmann::ordered_json manifest;
    manifest["config"] = cfg.to_json();
    manifest["seed"] = cfg.seed;
    manifest["files"] = std::move(files);
    manifest["stats"] = stats.to_json();
    write_file(dir / "synth_manifest.json", manifest.dump(2) + "\n");
}

std::vector<TaskExample> read_task_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return read_jsonl(in);
    } catch (const ParseError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

std::map<TaskKind, std::vector<TaskExample>> read_task_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw InputError("not a task directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::map<TaskKind, std::vector<TaskExample>> out;
    for (const auto& f : files) {
        for (auto& e : read_task_file(f)) out[e.kind].push_back(std::move(e));
    }
    return out;
}

}  // namespace mixpt::tasks

#pragma once

#include <filesystem>
#include <map>
#include <vector>

#include "mixpt/corpus/types.hpp"
#include "mixpt/tasks/task.hpp"

namespace mixpt::tasks {

struct SynthStats {
    std::map<TaskKind, std::size_t> generated;
    std::map<TaskKind, std::size_t> skipped;
    std::map<TaskKind, std::size_t> fallbacks;
    std::map<TaskKind, std::size_t> policy_unavailable;

    nlohmann::ordered_json to_json() const;
};

// `count` examples of one kind, cycling images in id order. Each example's
// generator is seeded from (seed, kind, image_id, cycle). Images that cannot
// host the kind pass their slot to the next image.
std::vector<TaskExample> synth_kind(const corpus::Corpus& corpus, TaskKind kind, std::size_t count,
                                    const SynthConfig& cfg, SynthStats* stats = nullptr);

std::vector<TaskExample> synth_dataset(const corpus::Corpus& corpus, const std::vector<TaskKind>& kinds,
                                       std::size_t count_per_kind, const SynthConfig& cfg,
                                       SynthStats* stats = nullptr);

std::string task_file_name(TaskKind kind, NegativePolicy policy);

// One `<kind>.<policy>.jsonl` per kind plus synth_manifest.json.
void write_task_dir(const std::filesystem::path& dir, const std::vector<TaskExample>& examples,
                    const std::vector<TaskKind>& kinds, const SynthConfig& cfg, const SynthStats& stats);
std::vector<TaskExample> read_task_file(const std::filesystem::path& path);
// Every *.jsonl in a task directory, in file-name order.
std::map<TaskKind, std::vector<TaskExample>> read_task_dir(const std::filesystem::path& dir);

}  // namespace mixpt::tasks

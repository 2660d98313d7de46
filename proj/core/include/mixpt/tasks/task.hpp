#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixpt/corpus/types.hpp"

namespace mixpt::tasks {

enum class TaskKind { Caption, Completion, ITM, MLM, OAList, OAExists, OAAndOr, OAWhich };

inline constexpr std::array<TaskKind, 8> kAllKinds{
    TaskKind::Caption, TaskKind::Completion, TaskKind::ITM,      TaskKind::MLM,
    TaskKind::OAList,  TaskKind::OAExists,   TaskKind::OAAndOr, TaskKind::OAWhich};
inline constexpr std::array<TaskKind, 4> kCrossModalKinds{TaskKind::Caption, TaskKind::Completion,
                                                          TaskKind::ITM, TaskKind::MLM};
inline constexpr std::array<TaskKind, 4> kObjectAwareKinds{TaskKind::OAList, TaskKind::OAExists,
                                                           TaskKind::OAAndOr, TaskKind::OAWhich};

std::string kind_name(TaskKind kind);
TaskKind parse_kind(const std::string& name);
bool is_cross_modal(TaskKind kind);
bool is_object_aware(TaskKind kind);
// Kinds whose distractors depend on the negative policy.
bool uses_negatives(TaskKind kind);
bool is_yes_no(TaskKind kind);

enum class NegativePolicy { Easy, Hard };

std::string policy_name(NegativePolicy policy);
NegativePolicy parse_policy(const std::string& name);

struct TaskMeta {
    std::optional<NegativePolicy> policy;
    // Hard requested but unavailable; the easy route was used instead.
    bool fallback = false;
    std::optional<std::string> replaced_noun;
    std::optional<std::string> replacement;
    // Object display names in prompt order (OA tasks).
    std::vector<std::string> candidate_objects;
    std::optional<std::string> connective;

    bool operator==(const TaskMeta&) const = default;
};

struct TaskExample {
    std::string id;
    std::string image_id;
    TaskKind kind = TaskKind::Caption;
    std::string prompt;
    std::string target;
    TaskMeta meta;

    bool operator==(const TaskExample&) const = default;
};

struct SynthConfig {
    std::uint64_t seed = 0;
    double mlm_mask_rate = 0.15;
    double mlm_mean_span = 3.0;
    double completion_lo = 0.25;
    double completion_hi = 0.75;
    std::vector<std::size_t> andor_k{2, 3};
    double yes_no_balance = 0.5;
    NegativePolicy policy = NegativePolicy::Easy;
    corpus::ObjectSource object_source = corpus::ObjectSource::both;

    // Throws ConfigError.
    void validate() const;
    nlohmann::ordered_json to_json() const;
};

nlohmann::ordered_json to_json(const TaskExample& example);
TaskExample example_from_json(const nlohmann::json& j);

void write_jsonl(std::ostream& out, const std::vector<TaskExample>& examples);
std::vector<TaskExample> read_jsonl(std::istream& in);

}  // namespace mixpt::tasks

#include "mixpt/tasks/task.hpp"

#include <istream>
#include <ostream>

#include "mixpt/error.hpp"

namespace mixpt::tasks {

std::string kind_name(TaskKind kind) {
    switch (kind) {
        case TaskKind::Caption: return "caption";
        case TaskKind::Completion: return "completion";
        case TaskKind::ITM: return "itm";
        case TaskKind::MLM: return "mlm";
        case TaskKind::OAList: return "oa_list";
        case TaskKind::OAExists: return "oa_exists";
        case TaskKind::OAAndOr: return "oa_andor";
        case TaskKind::OAWhich: return "oa_which";
    }
    return "?";
}

TaskKind parse_kind(const std::string& name) {
    for (TaskKind k : kAllKinds)
        if (kind_name(k) == name) return k;
    throw ConfigError("unknown task kind '" + name + "'");
}

bool is_cross_modal(TaskKind kind) {
    return kind == TaskKind::Caption || kind == TaskKind::Completion || kind == TaskKind::ITM ||
           kind == TaskKind::MLM;
}

bool is_object_aware(TaskKind kind) { return !is_cross_modal(kind); }

bool uses_negatives(TaskKind kind) {
    return kind == TaskKind::ITM || kind == TaskKind::OAExists || kind == TaskKind::OAAndOr ||
           kind == TaskKind::OAWhich;
}

bool is_yes_no(TaskKind kind) {
    return kind == TaskKind::ITM || kind == TaskKind::OAExists || kind == TaskKind::OAAndOr;
}

std::string policy_name(NegativePolicy policy) { return policy == NegativePolicy::Easy ? "easy" : "hard"; }

NegativePolicy parse_policy(const std::string& name) {
    if (name == "easy") return NegativePolicy::Easy;
    if (name == "hard") return NegativePolicy::Hard;
    throw ConfigError("unknown negative policy '" + name + "'");
}

void SynthConfig::validate() const {
    const auto fraction = [](double v) { return v > 0.0 && v < 1.0; };
    if (!fraction(mlm_mask_rate)) throw ConfigError("mlm_mask_rate must be in (0, 1)");
    if (!fraction(completion_lo) || !fraction(completion_hi) || completion_lo > completion_hi)
        throw ConfigError("completion_split must be an ordered range inside (0, 1)");
    if (!fraction(yes_no_balance)) throw ConfigError("yes_no_balance must be in (0, 1)");
    if (mlm_mean_span < 1.0) throw ConfigError("mlm_mean_span must be >= 1");
    if (andor_k.empty()) throw ConfigError("andor_k must be non-empty");
    for (auto k : andor_k)
        if (k != 2 && k != 3) throw ConfigError("andor_k must be a subset of {2, 3}");
}

nlohmann::ordered_json SynthConfig::to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["mlm_mask_rate"] = mlm_mask_rate;
    j["mlm_mean_span"] = mlm_mean_span;
    j["completion_split"] = {completion_lo, completion_hi};
    j["andor_k"] = andor_k;
    j["yes_no_balance"] = yes_no_balance;
    j["policy"] = policy_name(policy);
    j["object_source"] = corpus::to_string(object_source);
    return j;
}

nlohmann::ordered_json to_json(const TaskExample& e) {
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();
    if (e.meta.policy) meta["policy"] = policy_name(*e.meta.policy);
    if (e.meta.fallback) meta["fallback"] = true;
    if (e.meta.replaced_noun) meta["replaced_noun"] = *e.meta.replaced_noun;
    if (e.meta.replacement) meta["replacement"] = *e.meta.replacement;
    if (!e.meta.candidate_objects.empty()) meta["candidate_objects"] = e.meta.candidate_objects;
    if (e.meta.connective) meta["connective"] = *e.meta.connective;

    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["image_id"] = e.image_id;
    j["kind"] = kind_name(e.kind);
    j["prompt"] = e.prompt;
    j["target"] = e.target;
    j["meta"] = std::move(meta);
    return j;
}

TaskExample example_from_json(const nlohmann::json& j) {
    TaskExample e;
    e.id = j.value("id", std::string());
    e.image_id = j.at("image_id").get<std::string>();
    e.kind = parse_kind(j.at("kind").get<std::string>());
    e.prompt = j.at("prompt").get<std::string>();
    e.target = j.at("target").get<std::string>();
    if (auto m = j.find("meta"); m != j.end()) {
        if (m->contains("policy")) e.meta.policy = parse_policy(m->at("policy").get<std::string>());
        e.meta.fallback = m->value("fallback", false);
        if (m->contains("replaced_noun")) e.meta.replaced_noun = m->at("replaced_noun").get<std::string>();
        if (m->contains("replacement")) e.meta.replacement = m->at("replacement").get<std::string>();
        if (m->contains("candidate_objects"))
            e.meta.candidate_objects = m->at("candidate_objects").get<std::vector<std::string>>();
        if (m->contains("connective")) e.meta.connective = m->at("connective").get<std::string>();
    }
    return e;
}

void write_jsonl(std::ostream& out, const std::vector<TaskExample>& examples) {
    for (const auto& e : examples) out << to_json(e).dump() << '\n';
}

std::vector<TaskExample> read_jsonl(std::istream& in) {
    std::vector<TaskExample> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        try {
            out.push_back(example_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(e.what(), number);
        }
    }
    return out;
}

}  // namespace mixpt::tasks

#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixpt/corpus/types.hpp"
#include "mixpt/mixture/batch.hpp"
#include "mixpt/model/checkpoint.hpp"
#include "mixpt/model/transformer.hpp"
#include "mixpt/model/vocab.hpp"
#include "mixpt/tasks/task.hpp"

namespace mixpt::eval {

enum class Metric { automatic, exact_match, cider };  // automatic: cider for captions, exact match otherwise

std::string metric_name(Metric m);
Metric parse_metric(const std::string& name);

struct EvalItem {
    std::string id;
    std::string image_id;
    tasks::TaskKind kind = tasks::TaskKind::Caption;
    std::string prediction;
    std::vector<std::string> ground_truths;
};

struct ItemVerdict {
    std::string id;
    tasks::TaskKind kind = tasks::TaskKind::Caption;
    std::string metric;
    double score = 0;
    // OAList only: wrong solely because the prediction names hidden objects.
    bool hidden_penalty = false;
};

struct TaskScore {
    std::string metric;
    std::size_t count = 0;
    double mean = 0;
    std::size_t hidden_penalties = 0;
};

struct EvalReport {
    nlohmann::ordered_json settings;
    std::map<tasks::TaskKind, TaskScore> per_task;
    std::vector<ItemVerdict> items;
    std::vector<std::string> warnings;

    nlohmann::ordered_json to_json() const;
    static EvalReport from_json(const nlohmann::ordered_json& j);
};

// Scores predictions. With a corpus, OAList items also get the
// hidden-object penalty diagnostic.
EvalReport score_items(const std::vector<EvalItem>& items, Metric metric, const corpus::Corpus* corpus = nullptr);

// The prediction with every hidden-object name dropped, re-joined in list form.
std::string remove_hidden_names(const std::string& prediction, const std::vector<std::string>& hidden_names);

// Ground truths for an example: its target, plus every caption of the image
// for caption items when a corpus is given.
std::vector<std::string> ground_truths_for(const tasks::TaskExample& example, const corpus::Corpus* corpus);

// Greedy predictions for every example, in input order.
std::vector<std::string> predict(model::Transformer<float>& model, const model::Vocab& vocab,
                                 const std::vector<tasks::TaskExample>& examples, const mixture::BatchLimits& limits,
                                 const mixture::ImageLookup& images, std::size_t batch_size = 32);

EvalReport evaluate(model::Transformer<float>& model, const model::Vocab& vocab,
                    const std::vector<tasks::TaskExample>& examples, const corpus::Corpus& corpus, Metric metric,
                    const mixture::BatchLimits& limits, std::size_t batch_size = 32);

// Rebuilds the model from a checkpoint after checking it against the data's
// vocabulary and corpus fingerprints (FingerprintError on mismatch).
EvalReport evaluate_checkpoint(const model::Checkpoint& ckpt, const std::vector<tasks::TaskExample>& examples,
                               const corpus::Corpus& corpus, Metric metric, std::size_t batch_size = 32);

model::Transformer<float> model_from_checkpoint(const model::Checkpoint& ckpt);

}  // namespace mixpt::eval

#include "mixpt/eval/report.hpp"

#include <algorithm>

#include "mixpt/corpus/storage.hpp"
#include "mixpt/error.hpp"
#include "mixpt/eval/scoring.hpp"
#include "mixpt/text.hpp"

namespace mixpt::eval {

std::string metric_name(Metric m) {
    switch (m) {
        case Metric::automatic: return "auto";
        case Metric::exact_match: return "exact_match";
        case Metric::cider: return "cider";
    }
    return "auto";
}

Metric parse_metric(const std::string& name) {
    if (name == "auto") return Metric::automatic;
    if (name == "exact_match" || name == "em") return Metric::exact_match;
    if (name == "cider") return Metric::cider;
    throw ConfigError("unknown metric '" + name + "' (expected auto, exact_match or cider)");
}

namespace {

Metric resolve(Metric m, tasks::TaskKind kind) {
    if (m != Metric::automatic) return m;
    return kind == tasks::TaskKind::Caption ? Metric::cider : Metric::exact_match;
}

}  // namespace

std::string remove_hidden_names(const std::string& prediction, const std::vector<std::string>& hidden_names) {
    std::vector<std::string> kept;
    for (const auto& part : text::split(prediction, ',')) {
        const std::string name = normalize_answer(part);
        if (name.empty()) continue;
        if (std::find(hidden_names.begin(), hidden_names.end(), name) == hidden_names.end()) kept.push_back(name);
    }
    return text::join(kept, ", ");
}

EvalReport score_items(const std::vector<EvalItem>& items, Metric metric, const corpus::Corpus* corpus) {
    EvalReport report;
    report.settings = {{"metric", metric_name(metric)},
                       {"normalization", "lowercase, trim, collapse whitespace, strip terminal period"},
                       {"cider", {{"n_max", 4}, {"sigma", 6.0}, {"idf", "evaluation references"}}},
                       {"hidden_penalty", corpus != nullptr}};

    std::vector<std::vector<std::string>> cider_refs;
    for (const auto& it : items) {
        if (it.ground_truths.empty()) throw InputError("item " + it.id + " has no ground truth");
        if (resolve(metric, it.kind) == Metric::cider) cider_refs.push_back(it.ground_truths);
    }
    std::optional<CiderScorer> scorer;
    if (!cider_refs.empty()) scorer.emplace(cider_refs);

    for (const auto& it : items) {
        ItemVerdict v;
        v.id = it.id;
        v.kind = it.kind;
        const Metric m = resolve(metric, it.kind);
        v.metric = metric_name(m);
        if (m == Metric::cider) {
            if (normalize_answer(it.prediction).empty()) report.warnings.push_back("empty prediction for " + it.id);
            v.score = scorer->score(it.prediction, it.ground_truths);
        } else {
            v.score = exact_match(it.prediction, it.ground_truths);
            if (corpus && it.kind == tasks::TaskKind::OAList && v.score == 0 && corpus->has_image(it.image_id)) {
                std::vector<std::string> hidden;
                for (const auto& cid : corpus->hidden(it.image_id)) hidden.push_back(corpus->classes.display_name(cid));
                if (!hidden.empty()) {
                    const std::string stripped = remove_hidden_names(it.prediction, hidden);
                    v.hidden_penalty = stripped != normalize_answer(it.prediction) &&
                                       exact_match(stripped, it.ground_truths) == 1;
                }
            }
        }
        auto& ts = report.per_task[it.kind];
        ts.metric = v.metric;
        ++ts.count;
        ts.mean += v.score;
        ts.hidden_penalties += v.hidden_penalty ? 1 : 0;
        report.items.push_back(std::move(v));
    }
    for (auto& [k, ts] : report.per_task) ts.mean /= static_cast<double>(ts.count);
    return report;
}

nlohmann::ordered_json EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["settings"] = settings;
    nlohmann::ordered_json tasks_j = nlohmann::ordered_json::object();
    for (const auto& [k, ts] : per_task)
        tasks_j[tasks::kind_name(k)] = {
            {"metric", ts.metric}, {"count", ts.count}, {"mean", ts.mean}, {"hidden_penalties", ts.hidden_penalties}};
    j["tasks"] = tasks_j;
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& v : items)
        arr.push_back({{"id", v.id},
                       {"kind", tasks::kind_name(v.kind)},
                       {"metric", v.metric},
                       {"score", v.score},
                       {"hidden_penalty", v.hidden_penalty}});
    j["items"] = arr;
    j["warnings"] = warnings;
    return j;
}

EvalReport EvalReport::from_json(const nlohmann::ordered_json& j) {
    EvalReport r;
    try {
        r.settings = j.at("settings");
        for (const auto& [name, t] : j.at("tasks").items())
            r.per_task[tasks::parse_kind(name)] = {t.at("metric").get<std::string>(), t.at("count").get<std::size_t>(),
                                                   t.at("mean").get<double>(),
                                                   t.at("hidden_penalties").get<std::size_t>()};
        for (const auto& v : j.at("items"))
            r.items.push_back({v.at("id").get<std::string>(), tasks::parse_kind(v.at("kind").get<std::string>()),
                               v.at("metric").get<std::string>(), v.at("score").get<double>(),
                               v.at("hidden_penalty").get<bool>()});
        r.warnings = j.at("warnings").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad eval report: ") + e.what(), 1);
    }
    return r;
}

std::vector<std::string> ground_truths_for(const tasks::TaskExample& e, const corpus::Corpus* corpus) {
    std::vector<std::string> gts{e.target};
    if (corpus && e.kind == tasks::TaskKind::Caption && corpus->has_image(e.image_id))
        for (const auto& c : corpus->captions_of(e.image_id))
            if (std::find(gts.begin(), gts.end(), c.caption) == gts.end()) gts.push_back(c.caption);
    return gts;
}

std::vector<std::string> predict(model::Transformer<float>& model, const model::Vocab& vocab,
                                 const std::vector<tasks::TaskExample>& examples, const mixture::BatchLimits& limits,
                                 const mixture::ImageLookup& images, std::size_t batch_size) {
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    std::vector<std::string> out;
    out.reserve(examples.size());
    for (std::size_t i = 0; i < examples.size(); i += batch_size) {
        std::vector<const tasks::TaskExample*> chunk;
        for (std::size_t j = i; j < std::min(examples.size(), i + batch_size); ++j) chunk.push_back(&examples[j]);
        auto batch = mixture::make_batch(chunk, vocab, limits, images);
        for (const auto& ids : model.generate(batch, limits.max_target)) out.push_back(vocab.decode(ids));
    }
    return out;
}

EvalReport evaluate(model::Transformer<float>& model, const model::Vocab& vocab,
                    const std::vector<tasks::TaskExample>& examples, const corpus::Corpus& corpus, Metric metric,
                    const mixture::BatchLimits& limits, std::size_t batch_size) {
    auto lookup = [&corpus](const std::string& id) -> const corpus::ImageRecord& {
        auto it = corpus.images.find(id);
        if (it == corpus.images.end()) throw InputError("no pixels for image " + id);
        return it->second;
    };
    const auto predictions = predict(model, vocab, examples, limits, lookup, batch_size);
    std::vector<EvalItem> items;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& e = examples[i];
        items.push_back({e.id, e.image_id, e.kind, predictions[i], ground_truths_for(e, &corpus)});
    }
    return score_items(items, metric, &corpus);
}

model::Transformer<float> model_from_checkpoint(const model::Checkpoint& ckpt) {
    model::Transformer<float> m(ckpt.config, 0);
    model::import_params(m.params(), ckpt.params);
    return m;
}

EvalReport evaluate_checkpoint(const model::Checkpoint& ckpt, const std::vector<tasks::TaskExample>& examples,
                               const corpus::Corpus& corpus, Metric metric, std::size_t batch_size) {
    const model::Vocab vocab(ckpt.vocab);
    model::check_fingerprints(ckpt, vocab.fingerprint(), corpus::corpus_fingerprint(corpus));
    auto m = model_from_checkpoint(ckpt);
    return evaluate(m, vocab, examples, corpus, metric, {ckpt.config.max_prompt, ckpt.config.max_target}, batch_size);
}

}  // namespace mixpt::eval

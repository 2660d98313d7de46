#include "mixpt/run/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "mixpt/corpus/storage.hpp"
#include "mixpt/corpus/synthetic.hpp"
#include "mixpt/digest.hpp"
#include "mixpt/error.hpp"
#include "mixpt/rng.hpp"
#include "mixpt/text.hpp"
#include "mixpt/tasks/dataset.hpp"

namespace mixpt::run {

namespace fs = std::filesystem;

std::pair<std::vector<std::string>, std::vector<std::string>> split_images(const std::vector<std::string>& ids,
                                                                           double eval_fraction, std::uint64_t seed) {
    if (ids.size() < 2) throw ConfigError("need at least two images to split train/eval");
    std::vector<std::pair<std::uint64_t, std::string>> keyed;
    for (const auto& id : ids) keyed.emplace_back(KeyHasher().add(seed).add("split").add(id).finish(), id);
    std::sort(keyed.begin(), keyed.end());
    auto n_eval = static_cast<std::size_t>(std::llround(eval_fraction * static_cast<double>(ids.size())));
    n_eval = std::clamp<std::size_t>(n_eval, 1, ids.size() - 1);
    std::vector<std::string> train, eval;
    for (std::size_t i = 0; i < keyed.size(); ++i) (i < n_eval ? eval : train).push_back(keyed[i].second);
    std::sort(train.begin(), train.end());
    std::sort(eval.begin(), eval.end());
    return {train, eval};
}

PreparedData prepare_data(const RunConfig& cfg) {
    PreparedData d;
    if (cfg.corpus_source == CorpusSource::synthetic) {
        d.corpus = corpus::synth_corpus(cfg.corpus_params());
    } else {
        d.corpus = corpus::load_corpus(resolve_data_path(cfg.corpus_path));
        for (const auto& [id, img] : d.corpus.images)
            if (img.height != cfg.image_size() || img.width != cfg.image_size())
                throw ConfigError("corpus image " + id + " is not " + std::to_string(cfg.image_size()) +
                                  " pixels square (grid * cell_px)");
    }
    std::tie(d.train_ids, d.eval_ids) = split_images(d.corpus.image_ids, cfg.eval_fraction, cfg.seed);
    const auto train_corpus = d.corpus.subset(d.train_ids);
    const auto eval_corpus = d.corpus.subset(d.eval_ids);
    d.train_examples =
        tasks::synth_dataset(train_corpus, cfg.train_kinds(), cfg.train_examples_per_kind, cfg.synth, &d.train_stats);
    d.eval_examples = tasks::synth_dataset(eval_corpus, cfg.eval_kinds, cfg.eval_examples_per_kind,
                                           cfg.eval_synth(), &d.eval_stats);
    // The word set is closed, so the vocabulary covers both splits; it carries
    // no label information.
    auto all = d.train_examples;
    all.insert(all.end(), d.eval_examples.begin(), d.eval_examples.end());
    d.vocab = model::Vocab::build(all);
    return d;
}

namespace {

std::string metrics_line(const model::StepRecord& r) {
    nlohmann::ordered_json j{{"step", r.step}, {"task", r.task}, {"loss", r.loss}};
    return j.dump() + "\n";
}

// Keeps the first `steps` lines of metrics.jsonl.
void truncate_metrics(const fs::path& path, std::size_t steps) {
    std::string kept;
    if (fs::exists(path)) {
        std::istringstream in(read_file(path));
        std::string line;
        for (std::size_t i = 0; i < steps && std::getline(in, line); ++i) kept += line + "\n";
    }
    write_file(path, kept);
}

}  // namespace

RunResult train_run(const std::string& config_text, const fs::path& out_dir, const RunOptions& opts) {
    const RunConfig cfg = RunConfig::parse(config_text);
    RunPaths paths{out_dir};

    if (opts.resume) {
        if (!fs::exists(paths.config())) throw ConfigError("nothing to resume in " + out_dir.string());
        if (read_file(paths.config()) != config_text)
            throw ConfigError("--resume with a config that differs from " + paths.config().string());
    } else {
        for (const auto& p : {paths.config(), paths.corpus(), paths.root / "tasks", paths.vocab(), paths.metrics(),
                              paths.schedule(), paths.checkpoints(), paths.eval_report()})
            fs::remove_all(p);
        fs::create_directories(out_dir);
        write_file(paths.config(), config_text);
    }

    PreparedData data = prepare_data(cfg);
    if (!opts.resume) {
        corpus::save_corpus(data.corpus, paths.corpus());
        tasks::write_task_dir(paths.train_tasks(), data.train_examples, cfg.train_kinds(), cfg.synth, data.train_stats);
        tasks::write_task_dir(paths.eval_tasks(), data.eval_examples, cfg.eval_kinds, cfg.eval_synth(),
                              data.eval_stats);
        write_file(paths.vocab(), data.vocab.to_json().dump(2) + "\n");
    }

    std::vector<model::Component> components;
    for (const auto& m : cfg.mixture) {
        model::Component c{m.name, m.weight, {}};
        const auto kind = tasks::parse_kind(m.name);
        for (const auto& e : data.train_examples)
            if (e.kind == kind) c.examples.push_back(e);
        components.push_back(std::move(c));
    }
    model::TrainConfig tc;
    tc.adam = cfg.optim;
    tc.schedule = {cfg.total_steps, cfg.batch_size, cfg.seed};
    tc.limits = cfg.limits();
    tc.init_seed = cfg.seed;
    auto mc = cfg.model;
    mc.image_size = cfg.image_size();
    const std::string corpus_fp = corpus::corpus_fingerprint(data.corpus);
    const corpus::Corpus& corpus = data.corpus;
    auto lookup = [&corpus](const std::string& id) -> const corpus::ImageRecord& {
        auto it = corpus.images.find(id);
        if (it == corpus.images.end()) throw InputError("no pixels for image " + id);
        return it->second;
    };
    model::Trainer trainer(mc, tc, data.vocab, std::move(components), lookup, corpus_fp);
    if (!opts.resume) write_file(paths.schedule(), mixture::schedule_csv(trainer.schedule()));

    if (opts.resume && fs::exists(paths.last_checkpoint())) trainer.restore(model::load_checkpoint(paths.last_checkpoint()));
    truncate_metrics(paths.metrics(), trainer.step());
    fs::create_directories(paths.checkpoints());

    std::ofstream metrics(paths.metrics(), std::ios::app | std::ios::binary);
    model::TrainHooks hooks;
    hooks.on_step = [&](const model::StepRecord& r) {
        metrics << metrics_line(r);
        if (opts.log && opts.log_every && r.step % opts.log_every == 0)
            *opts.log << "step " << r.step << "/" << cfg.total_steps << " task " << r.task << " loss " << r.loss << "\n";
    };
    hooks.checkpoint_every = cfg.checkpoint_every;
    hooks.on_checkpoint = [&](std::size_t step, const model::Checkpoint& ckpt) {
        metrics.flush();
        const std::string bytes = model::serialize_checkpoint(ckpt);
        if (cfg.checkpoint_every && step % cfg.checkpoint_every == 0)
            write_file(paths.checkpoints() / ("step_" + std::to_string(step) + ".ckpt"), bytes);
        auto tmp = paths.last_checkpoint();
        tmp += ".tmp";
        write_file(tmp, bytes);
        fs::rename(tmp, paths.last_checkpoint());
    };

    RunResult result{paths, {}, {}};
    result.history = trainer.run_all(hooks);
    metrics.close();
    if (!fs::exists(paths.last_checkpoint())) model::save_checkpoint(trainer.checkpoint(), paths.last_checkpoint());

    result.report = eval::evaluate(trainer.model(), data.vocab, data.eval_examples, data.corpus, cfg.metric,
                                   cfg.limits(), cfg.eval_batch_size);
    write_file(paths.eval_report(), result.report.to_json().dump(2) + "\n");
    return result;
}

}  // namespace mixpt::run

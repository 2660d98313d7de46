#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "mixpt/corpus/build.hpp"
#include "mixpt/corpus/parsers.hpp"
#include "mixpt/corpus/storage.hpp"
#include "mixpt/corpus/synthetic.hpp"
#include "mixpt/digest.hpp"
#include "mixpt/error.hpp"
#include "mixpt/eval/report.hpp"
#include "mixpt/model/checkpoint.hpp"
#include "mixpt/model/gradcheck.hpp"
#include "mixpt/nn/gradcheck.hpp"
#include "mixpt/run/ablation.hpp"
#include "mixpt/run/config.hpp"
#include "mixpt/run/pipeline.hpp"
#include "mixpt/tasks/dataset.hpp"
#include "mixpt/text.hpp"

namespace fs = std::filesystem;
using namespace mixpt;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitRuntime = 3;

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t jobs = 1;
    std::string config;
};

std::ifstream open_input(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InputError("cannot open " + p.string());
    return in;
}

// Runs a parser over a file, prefixing diagnostics with the path.
template <typename F>
auto parse_file(const fs::path& p, F&& parse) {
    auto in = open_input(p);
    try {
        return parse(in);
    } catch (const ParseError& e) {
        throw InputError(p.string() + ":" + std::to_string(e.line()) + ": " + e.what());
    } catch (const InputError& e) {
        throw InputError(p.string() + ": " + e.what());
    }
}

fs::path require_out(const Globals& g, const std::string& verb) {
    if (g.out.empty()) throw InputError(verb + ": --out is required");
    return g.out;
}

std::vector<tasks::TaskKind> kinds_arg(const std::string& s) {
    if (s == "all") return {tasks::kAllKinds.begin(), tasks::kAllKinds.end()};
    if (s == "cm") return {tasks::kCrossModalKinds.begin(), tasks::kCrossModalKinds.end()};
    if (s == "oa") return {tasks::kObjectAwareKinds.begin(), tasks::kObjectAwareKinds.end()};
    std::vector<tasks::TaskKind> out;
    for (const auto& part : text::split(s, ','))
        if (!text::trim(part).empty()) out.push_back(tasks::parse_kind(text::trim(part)));
    if (out.empty()) throw InputError("no task kinds given");
    return out;
}

run::RunConfig load_config(const Globals& g, bool required) {
    if (g.config.empty()) {
        if (required) throw ConfigError("--config is required");
        run::RunConfig c;
        if (g.seed) c.seed = c.synth.seed = *g.seed;
        return c;
    }
    auto c = run::RunConfig::parse(read_file(run::resolve_data_path(g.config)));
    if (g.seed) c.seed = c.synth.seed = *g.seed;
    return c;
}

// ---- ingest

struct IngestArgs {
    std::string classes, labels, boxes, captions, lexicon, images;
    bool synthetic = false;
    std::size_t n_images = 600, grid = 4, cell_px = 8;
    double hidden_rate = 0;
};

int cmd_ingest(const Globals& g, const IngestArgs& a) {
    const fs::path out = require_out(g, "ingest");
    corpus::Corpus c;
    if (a.synthetic) {
        corpus::SynthCorpusParams p;
        p.seed = g.seed.value_or(0);
        p.n_images = a.n_images;
        p.grid = a.grid;
        p.cell_px = a.cell_px;
        p.hidden_rate = a.hidden_rate;
        p.object_vocab = corpus::default_object_vocab();
        c = corpus::synth_corpus(p);
    } else {
        if (a.classes.empty()) throw InputError("ingest: --classes is required (or --synthetic)");
        auto path = [](const std::string& s) { return run::resolve_data_path(s); };
        auto classes = parse_file(path(a.classes), [](std::istream& in) { return corpus::parse_class_descriptions(in); });
        std::vector<corpus::ImageLabel> labels;
        std::vector<corpus::BoxLabel> boxes;
        std::vector<corpus::CaptionRecord> captions;
        std::vector<corpus::ImageRecord> images;
        if (!a.labels.empty())
            labels = parse_file(path(a.labels), [](std::istream& in) { return corpus::parse_image_labels(in); });
        if (!a.boxes.empty())
            boxes = parse_file(path(a.boxes), [](std::istream& in) { return corpus::parse_box_labels(in); });
        if (!a.captions.empty())
            captions =
                parse_file(path(a.captions), [](std::istream& in) { return corpus::parse_localized_narratives(in); });
        if (!a.images.empty())
            images = parse_file(path(a.images), [](std::istream& in) { return corpus::read_images(in); });
        c = corpus::build_corpus(std::move(classes), std::move(labels), std::move(boxes), std::move(captions),
                                 std::move(images));
        if (!a.lexicon.empty()) {
            c.lexicon = parse_file(path(a.lexicon), [](std::istream& in) { return corpus::build_lexicon(in); });
        } else {
            c.lexicon = corpus::default_lexicon();
        }
        for (const auto& noun : corpus::lexicon_dangling(c.lexicon, c.classes))
            std::cerr << "warning: lexicon noun '" << noun << "' is neither a key nor a class name\n";
    }
    corpus::save_corpus(c, out);
    std::cout << "corpus: " << c.image_ids.size() << " images, " << c.label_count() << " labels, " << c.box_count()
              << " boxes, " << c.caption_count() << " captions";
    if (c.dropped_records) std::cout << ", " << c.dropped_records << " records dropped";
    std::cout << "\nwrote " << out.string() << "\n";
    return 0;
}

// ---- synth

struct SynthArgs {
    std::string corpus_dir, kinds = "all", policy;
    std::optional<std::size_t> count;
};

int cmd_synth(const Globals& g, const SynthArgs& a) {
    const fs::path out = require_out(g, "synth");
    const auto rc = load_config(g, false);
    auto cfg = rc.synth;
    if (!a.policy.empty()) cfg.policy = tasks::parse_policy(a.policy);
    cfg.validate();
    const auto c = corpus::load_corpus(run::resolve_data_path(a.corpus_dir));
    const auto kinds = kinds_arg(a.kinds);
    tasks::SynthStats stats;
    const auto examples = tasks::synth_dataset(c, kinds, a.count.value_or(rc.train_examples_per_kind), cfg, &stats);
    tasks::write_task_dir(out, examples, kinds, cfg, stats);
    for (auto k : kinds)
        std::cout << tasks::task_file_name(k, cfg.policy) << ": " << stats.generated[k] << " examples\n";
    return 0;
}

// ---- train

int cmd_train(const Globals& g, bool resume) {
    const fs::path out = require_out(g, "train");
    if (g.config.empty()) throw ConfigError("train: --config is required");
    std::string text = read_file(run::resolve_data_path(g.config));
    if (g.seed) {
        // An explicit seed rewrites the config; the run directory keeps the
        // config actually used.
        auto c = run::RunConfig::parse(text);
        c.seed = c.synth.seed = *g.seed;
        text = c.to_ini();
    }
    run::RunOptions opts;
    opts.resume = resume;
    opts.log = &std::cerr;
    const auto result = run::train_run(text, out, opts);
    for (const auto& [kind, score] : result.report.per_task)
        std::cout << tasks::kind_name(kind) << " " << score.metric << " " << score.mean << " (n=" << score.count
                  << ")\n";
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

// ---- eval

struct EvalArgs {
    std::string run_dir, checkpoint, corpus_dir, tasks_path, metric = "auto";
    std::size_t batch_size = 32;
};

std::vector<tasks::TaskExample> load_tasks(const fs::path& p) {
    if (fs::is_directory(p)) {
        std::vector<tasks::TaskExample> out;
        for (auto& [kind, ex] : tasks::read_task_dir(p)) out.insert(out.end(), ex.begin(), ex.end());
        return out;
    }
    return tasks::read_task_file(p);
}

int cmd_eval(const Globals& g, EvalArgs a) {
    if (!a.run_dir.empty()) {
        const run::RunPaths paths{a.run_dir};
        if (a.checkpoint.empty()) a.checkpoint = paths.last_checkpoint().string();
        if (a.corpus_dir.empty()) a.corpus_dir = paths.corpus().string();
        if (a.tasks_path.empty()) a.tasks_path = paths.eval_tasks().string();
    }
    if (a.checkpoint.empty() || a.corpus_dir.empty() || a.tasks_path.empty())
        throw InputError("eval: give --run, or --checkpoint, --corpus and --tasks");
    const auto ckpt = model::load_checkpoint(run::resolve_data_path(a.checkpoint));
    const auto c = corpus::load_corpus(run::resolve_data_path(a.corpus_dir));
    const auto examples = load_tasks(run::resolve_data_path(a.tasks_path));
    const auto report = eval::evaluate_checkpoint(ckpt, examples, c, eval::parse_metric(a.metric), a.batch_size);
    const std::string json = report.to_json().dump(2) + "\n";
    if (g.out.empty()) {
        std::cout << json;
    } else {
        write_file(g.out, json);
        for (const auto& [kind, score] : report.per_task)
            std::cout << tasks::kind_name(kind) << " " << score.metric << " " << score.mean << "\n";
    }
    return 0;
}

// ---- score

struct ScoreArgs {
    std::string predictions, ground_truth, metric = "auto", corpus_dir, kind;
};

std::vector<nlohmann::json> read_jsonl_objects(const fs::path& p) {
    auto in = open_input(p);
    std::vector<nlohmann::json> out;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw InputError(p.string() + ":" + std::to_string(n) + ": " + e.what());
        }
        if (!out.back().is_object()) throw InputError(p.string() + ":" + std::to_string(n) + ": expected an object");
    }
    return out;
}

int cmd_score(const Globals& g, const ScoreArgs& a) {
    const auto preds = read_jsonl_objects(run::resolve_data_path(a.predictions));
    const auto truth = read_jsonl_objects(run::resolve_data_path(a.ground_truth));
    std::map<std::string, std::string> by_id;
    for (const auto& p : preds) {
        if (!p.contains("id") || !p.contains("prediction"))
            throw InputError("predictions need \"id\" and \"prediction\" fields");
        if (!by_id.emplace(p["id"].get<std::string>(), p["prediction"].get<std::string>()).second)
            throw InputError("duplicate prediction id " + p["id"].get<std::string>());
    }
    std::optional<corpus::Corpus> c;
    if (!a.corpus_dir.empty()) c = corpus::load_corpus(run::resolve_data_path(a.corpus_dir));

    std::vector<eval::EvalItem> items;
    std::set<std::string> used;
    for (const auto& t : truth) {
        if (!t.contains("id")) throw InputError("ground truth line without \"id\"");
        eval::EvalItem item;
        item.id = t["id"].get<std::string>();
        item.image_id = t.value("image_id", std::string{});
        if (t.contains("kind"))
            item.kind = tasks::parse_kind(t["kind"].get<std::string>());
        else if (!a.kind.empty())
            item.kind = tasks::parse_kind(a.kind);
        else
            throw InputError("ground truth " + item.id + " has no \"kind\"; pass --kind");
        if (t.contains("answers")) {
            item.ground_truths = t["answers"].get<std::vector<std::string>>();
        } else if (t.contains("target")) {
            tasks::TaskExample ex;
            ex.id = item.id;
            ex.image_id = item.image_id;
            ex.kind = item.kind;
            ex.target = t["target"].get<std::string>();
            item.ground_truths = eval::ground_truths_for(ex, c ? &*c : nullptr);
        } else {
            throw InputError("ground truth " + item.id + " needs \"answers\" or \"target\"");
        }
        auto it = by_id.find(item.id);
        if (it == by_id.end()) throw InputError("no prediction for id " + item.id);
        item.prediction = it->second;
        used.insert(item.id);
        items.push_back(std::move(item));
    }
    for (const auto& [id, _] : by_id)
        if (!used.count(id)) throw InputError("prediction " + id + " has no ground truth");
    const auto report = eval::score_items(items, eval::parse_metric(a.metric), c ? &*c : nullptr);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    const std::string json = report.to_json().dump(2) + "\n";
    if (g.out.empty()) {
        std::cout << json;
    } else {
        write_file(g.out, json);
        for (const auto& [kind, score] : report.per_task)
            std::cout << tasks::kind_name(kind) << " " << score.metric << " " << score.mean << "\n";
    }
    return 0;
}

// ---- gradcheck

int cmd_gradcheck(const Globals& g, std::size_t n_seeds, double tol, bool skip_model) {
    const std::uint64_t base = g.seed.value_or(0);
    double worst = 0;
    for (std::uint64_t s = base; s < base + n_seeds; ++s) {
        auto results = nn::kernel_gradcheck_suite(s);
        if (!skip_model) {
            auto m = model::model_gradcheck(s);
            results.insert(results.end(), m.begin(), m.end());
        }
        for (const auto& r : results) {
            worst = std::max(worst, r.max_rel_error);
            std::printf("seed %llu %-28s rel %.3e  n=%zu%s\n", static_cast<unsigned long long>(s), r.name.c_str(),
                        r.max_rel_error, r.checked, r.max_rel_error < tol ? "" : "  FAIL");
        }
    }
    std::printf("max relative error %.3e (tolerance %.1e)\n", worst, tol);
    return worst < tol ? 0 : kExitRuntime;
}

// ---- ablate

struct AblateArgs {
    std::string grid = "paper-table1";
    std::size_t seeds = 3;
    bool from_runs = false;
};

int cmd_ablate(const Globals& g, const AblateArgs& a) {
    const fs::path out = require_out(g, "ablate");
    const std::uint64_t base_seed = g.seed.value_or(0);
    run::AblationGrid grid;
    if (a.grid.rfind("paper-", 0) == 0)
        grid = run::builtin_grid(a.grid, base_seed, a.seeds);
    else
        grid = run::parse_grid(read_file(run::resolve_data_path(a.grid)), base_seed);
    run::AblationTable table;
    if (a.from_runs) {
        table = run::aggregate_runs(grid, out);
        run::write_table(table, out);
    } else {
        table = run::run_ablation(load_config(g, false), grid, out, g.jobs, &std::cerr);
    }
    std::cout << table.to_csv();
    bool any_failed = false;
    for (const auto& r : table.rows)
        for (const auto& e : r.errors) {
            any_failed = true;
            std::cerr << r.variant << " " << e << "\n";
        }
    return any_failed ? kExitRuntime : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mixpt: multi-task image-text pretraining workbench"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "global seed");
    app.add_option("--out", g.out, "output path");
    app.add_option("--jobs", g.jobs, "parallel jobs")->check(CLI::PositiveNumber);
    app.add_option("--config", g.config, "run config (INI)");

    IngestArgs ia;
    auto* ingest = app.add_subcommand("ingest", "validate annotation files into a corpus directory");
    ingest->add_option("--classes", ia.classes, "class descriptions CSV");
    ingest->add_option("--labels", ia.labels, "image labels CSV");
    ingest->add_option("--boxes", ia.boxes, "box labels CSV");
    ingest->add_option("--captions", ia.captions, "narratives JSONL");
    ingest->add_option("--lexicon", ia.lexicon, "noun lexicon TSV");
    ingest->add_option("--images", ia.images, "image store (images.bin)");
    ingest->add_flag("--synthetic", ia.synthetic, "generate a synthetic corpus instead");
    ingest->add_option("--n-images", ia.n_images);
    ingest->add_option("--grid", ia.grid);
    ingest->add_option("--cell-px", ia.cell_px);
    ingest->add_option("--hidden-rate", ia.hidden_rate);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "synthesize task JSONL files from a corpus");
    synth->add_option("--corpus", sa.corpus_dir, "corpus directory")->required();
    synth->add_option("--kinds", sa.kinds, "all | cm | oa | comma-separated kinds");
    synth->add_option("--count", sa.count, "examples per kind");
    synth->add_option("--policy", sa.policy, "easy | hard");

    bool resume = false;
    auto* train = app.add_subcommand("train", "train per a run config into --out");
    train->add_flag("--resume", resume, "continue from checkpoints/last.ckpt");

    EvalArgs ea;
    auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint");
    evalc->add_option("--run", ea.run_dir, "run directory");
    evalc->add_option("--checkpoint", ea.checkpoint);
    evalc->add_option("--corpus", ea.corpus_dir);
    evalc->add_option("--tasks", ea.tasks_path, "task JSONL file or directory");
    evalc->add_option("--metric", ea.metric, "auto | exact_match | cider");
    evalc->add_option("--batch-size", ea.batch_size);

    ScoreArgs sc;
    auto* score = app.add_subcommand("score", "score a predictions file");
    score->add_option("--predictions", sc.predictions, "JSONL {id, prediction}")->required();
    score->add_option("--ground-truth", sc.ground_truth, "JSONL {id, answers | target}")->required();
    score->add_option("--metric", sc.metric, "auto | exact_match | cider");
    score->add_option("--corpus", sc.corpus_dir, "corpus for caption references and hidden objects");
    score->add_option("--kind", sc.kind, "task kind for lines without one");

    std::size_t gc_seeds = 5;
    double gc_tol = 1e-4;
    bool gc_kernels_only = false;
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
    gradcheck->add_option("--seeds", gc_seeds);
    gradcheck->add_option("--tolerance", gc_tol);
    gradcheck->add_flag("--kernels-only", gc_kernels_only);

    AblateArgs aa;
    auto* ablate = app.add_subcommand("ablate", "run a mixture ablation grid");
    ablate->add_option("--grid", aa.grid, "paper-table1 | paper-table2 | grid INI file");
    ablate->add_option("--seeds", aa.seeds, "seeds for built-in grids");
    ablate->add_flag("--from-runs", aa.from_runs, "aggregate existing run directories only");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (*ingest) return cmd_ingest(g, ia);
        if (*synth) return cmd_synth(g, sa);
        if (*train) return cmd_train(g, resume);
        if (*evalc) return cmd_eval(g, ea);
        if (*score) return cmd_score(g, sc);
        if (*gradcheck) return cmd_gradcheck(g, gc_seeds, gc_tol, gc_kernels_only);
        if (*ablate) return cmd_ablate(g, aa);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const RuntimeFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: malformed JSON: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}

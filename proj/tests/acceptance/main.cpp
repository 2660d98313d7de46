// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. `acceptance 2 8` runs a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mixpt/corpus/synthetic.hpp"
#include "mixpt/digest.hpp"
#include "mixpt/eval/report.hpp"
#include "mixpt/eval/scoring.hpp"
#include "mixpt/mixture/schedule.hpp"
#include "mixpt/model/checkpoint.hpp"
#include "mixpt/model/gradcheck.hpp"
#include "mixpt/model/trainer.hpp"
#include "mixpt/nn/gradcheck.hpp"
#include "mixpt/run/ablation.hpp"
#include "mixpt/run/pipeline.hpp"
#include "mixpt/tasks/dataset.hpp"
#include "mixpt/tasks/generators.hpp"
#include "mixpt/text.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace mixpt;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

corpus::Corpus synthetic(std::size_t n, std::uint64_t seed, double hidden) {
    corpus::SynthCorpusParams p;
    p.seed = seed;
    p.n_images = n;
    p.object_vocab = corpus::default_object_vocab();
    p.hidden_rate = hidden;
    return corpus::synth_corpus(p);
}

// 1 ---------------------------------------------------------------------

Verdict gradient_suite() {
    double worst = 0;
    std::string worst_name;
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto results = nn::kernel_gradcheck_suite(seed);
        auto m = model::model_gradcheck(seed);
        results.insert(results.end(), m.begin(), m.end());
        for (const auto& r : results) {
            checked += r.checked;
            if (r.max_rel_error >= worst) {
                worst = r.max_rel_error;
                worst_name = r.name;
            }
        }
    }
    return {worst < 1e-4, fmt("max relative error %.2e (%s) over %zu derivatives, 5 seeds", worst, worst_name.c_str(),
                              checked)};
}

// 2 ---------------------------------------------------------------------

Verdict overfit_smoke() {
    const auto c = fixtures::small_corpus(40, 2);
    tasks::SynthConfig sc;
    sc.seed = 2;
    const auto examples = tasks::synth_kind(c, tasks::TaskKind::OAList, 32, sc);
    const auto vocab = model::Vocab::build(examples);
    model::ModelConfig mc;
    mc.patch = 8;
    model::TrainConfig tc;
    tc.adam.lr = 3e-3;
    tc.schedule = {300, 16, 2};
    tc.init_seed = 2;
    model::Trainer tr(mc, tc, vocab, {{"oa_list", 1.0, examples}}, fixtures::image_lookup(c));
    const auto history = tr.run_all();
    const auto batch = fixtures::make_batch(examples, vocab, c, tc.limits);
    const auto losses = tr.model().per_example_losses(batch);
    double mean = 0;
    for (double l : losses) mean += l;
    mean /= static_cast<double>(losses.size());
    const auto report = eval::evaluate(tr.model(), vocab, examples, c, eval::Metric::exact_match, tc.limits, 32);
    const double em = report.per_task.at(tasks::TaskKind::OAList).mean;
    return {mean < 0.1 && em == 1.0,
            fmt("train-set loss %.4f (last step %.4f), train-set exact match %.3f", mean, history.back().loss, em)};
}

// 3 ---------------------------------------------------------------------

double chi_square(const std::vector<std::size_t>& counts, const std::vector<double>& probs) {
    double total = 0, x = 0;
    for (auto c : counts) total += static_cast<double>(c);
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double e = total * probs[i];
        x += (static_cast<double>(counts[i]) - e) * (static_cast<double>(counts[i]) - e) / e;
    }
    return x;
}

Verdict mixture_statistics() {
    std::vector<std::string> names;
    for (auto k : tasks::kAllKinds) names.push_back(tasks::kind_name(k));
    const auto spec = mixture::MixtureSpec::equal(names);
    double worst_dev = 0, min_p = 1;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        std::vector<std::size_t> counts(8);
        for (int i = 0; i < 80000; ++i) ++counts[mixture::sample_component(spec, rng)];
        for (auto c : counts) worst_dev = std::max(worst_dev, std::abs(static_cast<double>(c) - 10000.0));
        min_p = std::min(min_p, oracle::chi_square_p(chi_square(counts, spec.probabilities()), 7));
        // Same property through the schedule builder.
        const auto sched = mixture::build_schedule(spec, {80000, 1, seed}, std::vector<std::size_t>(8, 5));
        const auto sc = mixture::component_counts(sched, 8);
        for (auto c : sc) worst_dev = std::max(worst_dev, std::abs(static_cast<double>(c) - 10000.0));
        min_p = std::min(min_p, oracle::chi_square_p(chi_square(sc, spec.probabilities()), 7));
    }
    return {worst_dev <= 300 && min_p > 0.001,
            fmt("max |count - 10000| = %.0f, min chi-square p = %.4f over 20 seeds", worst_dev, min_p)};
}

// 4 ---------------------------------------------------------------------

std::map<std::string, std::string> dir_digest(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = sha256_file(e.path());
    return out;
}

Verdict synthesis_validity() {
    const auto c = synthetic(300, 21, 0.2);
    const std::vector<tasks::TaskKind> all(tasks::kAllKinds.begin(), tasks::kAllKinds.end());
    bool identical = true;
    for (auto policy : {tasks::NegativePolicy::Easy, tasks::NegativePolicy::Hard}) {
        tasks::SynthConfig cfg;
        cfg.seed = 21;
        cfg.policy = policy;
        std::map<std::string, std::string> digests[2];
        for (int rep = 0; rep < 2; ++rep) {
            const auto dir = fixtures::scratch_dir("acc_synth");
            tasks::SynthStats stats;
            const auto ex = tasks::synth_dataset(c, all, 200, cfg, &stats);
            tasks::write_task_dir(dir, ex, all, cfg, stats);
            digests[rep] = dir_digest(dir);
            fs::remove_all(dir);
        }
        identical &= digests[0] == digests[1] && digests[0].size() == 9;
    }

    std::size_t checked = 0, mismatches = 0;
    std::map<tasks::TaskKind, std::size_t> per_kind;
    for (auto policy : {tasks::NegativePolicy::Easy, tasks::NegativePolicy::Hard}) {
        tasks::SynthConfig cfg;
        cfg.seed = 4;
        cfg.policy = policy;
        const std::vector<tasks::TaskKind> oa(tasks::kObjectAwareKinds.begin(), tasks::kObjectAwareKinds.end());
        for (const auto& e : tasks::synth_dataset(c, oa, 1250, cfg)) {
            const auto want = oracle::recompute_oa_target(e, c);
            ++checked;
            ++per_kind[e.kind];
            if (!want || *want != e.target) ++mismatches;
        }
    }
    std::string kinds;
    for (const auto& [k, n] : per_kind) kinds += " " + tasks::kind_name(k) + "=" + std::to_string(n);
    return {identical && checked >= 10000 && mismatches == 0,
            fmt("rerun digests %s; %zu OA examples recomputed, %zu mismatches;%s", identical ? "identical" : "DIFFER",
                checked, mismatches, kinds.c_str())};
}

// 5 ---------------------------------------------------------------------

Verdict hard_negative_validity() {
    const auto c = synthetic(400, 31, 0.0);
    tasks::SynthConfig cfg;
    cfg.seed = 31;
    cfg.policy = tasks::NegativePolicy::Hard;

    std::size_t itm = 0, itm_bad = 0, fallbacks = 0;
    const std::string prefix = tasks::kItmPrefix;
    for (std::size_t round = 0; itm < 1000 && round < 20; ++round) {
        cfg.seed = 31 + round;
        for (const auto& e : tasks::synth_kind(c, tasks::TaskKind::ITM, 2000, cfg)) {
            if (itm == 1000) break;
            if (e.target != "no") continue;
            if (e.meta.fallback) {
                ++fallbacks;
                continue;
            }
            ++itm;
            const auto src = text::split_whitespace(text::normalize_caption(c.captions_of(e.image_id).at(0).caption));
            const auto neg = text::split_whitespace(e.prompt.substr(prefix.size()));
            bool ok = e.prompt.rfind(prefix, 0) == 0 && src.size() == neg.size() && e.meta.replaced_noun &&
                      e.meta.replacement;
            std::size_t diffs = 0;
            if (ok) {
                for (std::size_t i = 0; i < src.size(); ++i)
                    if (src[i] != neg[i]) {
                        ++diffs;
                        ok &= text::strip_punct(src[i]) == *e.meta.replaced_noun &&
                              text::strip_punct(neg[i]) == *e.meta.replacement;
                    }
                const auto it = c.lexicon.entries.find(*e.meta.replaced_noun);
                ok &= diffs == 1 && it != c.lexicon.entries.end() &&
                      std::count(it->second.begin(), it->second.end(), *e.meta.replacement) == 1 &&
                      *e.meta.replacement != *e.meta.replaced_noun;
            }
            itm_bad += !ok;
        }
    }

    // Verified negatives straight from the raw label records.
    std::map<std::string, std::set<std::string>> verified;
    for (const auto& [img, labels] : c.labels)
        for (const auto& l : labels)
            if (l.presence == corpus::Presence::negative && l.verification == corpus::Verification::human)
                verified[img].insert(c.classes.display_name(l.class_id));
    std::size_t ex = 0, ex_bad = 0;
    for (std::size_t round = 0; ex < 1000 && round < 20; ++round) {
        cfg.seed = 131 + round;
        for (const auto& e : tasks::synth_kind(c, tasks::TaskKind::OAExists, 2000, cfg)) {
            if (ex == 1000) break;
            if (e.target != "no") continue;
            ++ex;
            const std::string head = "does ", tail = " exist?";
            const bool shaped = e.prompt.rfind(head, 0) == 0 && e.prompt.size() > head.size() + tail.size() &&
                                e.prompt.compare(e.prompt.size() - tail.size(), tail.size(), tail) == 0;
            const std::string name =
                shaped ? e.prompt.substr(head.size(), e.prompt.size() - head.size() - tail.size()) : "";
            ex_bad += !(shaped && verified[e.image_id].count(name));
        }
    }
    return {itm == 1000 && ex == 1000 && itm_bad == 0 && ex_bad == 0,
            fmt("ITM: %zu hard negatives, %zu violations (%zu easy fallbacks excluded); OAExists: %zu hard "
                "negatives, %zu violations",
                itm, itm_bad, fallbacks, ex, ex_bad)};
}

// 6 ---------------------------------------------------------------------

Verdict scorer_oracles() {
    Rng rng(606);
    const std::vector<std::string> words{"a", "dog", "Dog", "cat", "car,", "yes", "no", "two", "DOG."};
    auto noisy = [&](const std::string& s) {
        std::string out;
        if (rng.bernoulli(0.3)) out += std::string(1 + rng.index(2), rng.bernoulli(0.5) ? ' ' : '\t');
        for (char ch : s) {
            if (ch == ' ' && rng.bernoulli(0.3)) out += "  ";
            out += rng.bernoulli(0.2) ? static_cast<char>(std::toupper(static_cast<unsigned char>(ch))) : ch;
        }
        if (rng.bernoulli(0.3)) out += ".";
        if (rng.bernoulli(0.2)) out += " ";
        return out;
    };
    auto phrase = [&] {
        std::string s;
        const std::size_t n = rng.index(4);
        for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + words[rng.index(words.size())];
        return s;
    };
    std::size_t disagreements = 0;
    for (int i = 0; i < 10000; ++i) {
        const std::string base = phrase();
        const std::string pred = rng.bernoulli(0.5) ? noisy(base) : phrase();
        std::vector<std::string> gts;
        const std::size_t n = 1 + rng.index(3);
        for (std::size_t j = 0; j < n; ++j) gts.push_back(rng.bernoulli(0.4) ? noisy(base) : phrase());
        disagreements += eval::exact_match(pred, gts) != oracle::naive_exact_match(pred, gts);
    }

    const std::vector<std::string> lex{"a", "red", "car", "dog", "on", "the", "road", "tree", "blue", "cup", "big"};
    auto sentence = [&](std::size_t n) {
        std::string s;
        for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + lex[rng.index(lex.size())];
        return s;
    };
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t docs = 2 + rng.index(6);
        std::vector<std::string> cands;
        std::vector<std::vector<std::string>> refs(docs);
        for (std::size_t d = 0; d < docs; ++d) {
            const std::size_t nrefs = 1 + rng.index(4);
            for (std::size_t r = 0; r < nrefs; ++r) refs[d].push_back(sentence(1 + rng.index(9)));
            cands.push_back(rng.bernoulli(0.2) ? refs[d][0] : sentence(1 + rng.index(9)));
        }
        const auto fast = eval::cider(cands, refs);
        const auto slow = oracle::brute_cider(cands, refs);
        for (std::size_t d = 0; d < docs; ++d) worst = std::max(worst, std::abs(fast.scores[d] - slow[d]));
    }

    // Each candidate equals its only reference and shares no n-gram with the others.
    const auto ten = eval::cider({"a small dog runs fast", "green tree in the park", "three red cups upon shelves"},
                                 {{"a small dog runs fast"}, {"green tree in the park"}, {"three red cups upon shelves"}});
    double ten_err = 0;
    for (double s : ten.scores) ten_err = std::max(ten_err, std::abs(s - 10.0));
    return {disagreements == 0 && worst <= 1e-9 && ten_err <= 1e-9,
            fmt("exact match: %zu/10000 disagreements; cider vs brute force max |diff| %.2e over 100 corpora; "
                "identical unique candidate |score - 10| = %.2e",
                disagreements, worst, ten_err)};
}

// 7 ---------------------------------------------------------------------

Verdict hidden_penalty() {
    const auto c = synthetic(500, 71, 0.3);
    std::vector<eval::EvalItem> rendered, labeled;
    std::size_t flips = 0, rendered_hits = 0, labeled_hits = 0;
    for (const auto& id : c.image_ids) {
        std::set<std::string> pos, all;
        for (const auto& cid : c.positives(id)) pos.insert(c.classes.display_name(cid));
        if (pos.empty()) continue;
        all = pos;
        std::vector<std::string> hidden;
        for (const auto& h : c.hidden(id)) {
            all.insert(c.classes.display_name(h));
            hidden.push_back(c.classes.display_name(h));
        }
        auto join = [](const std::set<std::string>& s) {
            std::string out;
            for (const auto& x : s) out += (out.empty() ? "" : ", ") + x;
            return out;
        };
        const std::string target = join(pos);
        rendered.push_back({"oa_list:" + id, id, tasks::TaskKind::OAList, join(all), {target}});
        labeled.push_back({"oa_list:" + id, id, tasks::TaskKind::OAList, target, {target}});
        const int before = oracle::naive_exact_match(join(all), {target});
        std::set<std::string> stripped;
        for (const auto& n : all)
            if (std::find(hidden.begin(), hidden.end(), n) == hidden.end()) stripped.insert(n);
        const int after = oracle::naive_exact_match(join(stripped), {target});
        flips += before == 0 && after == 1;
        rendered_hits += before;
        labeled_hits += oracle::naive_exact_match(target, {target});
    }
    const auto r1 = eval::score_items(rendered, eval::Metric::exact_match, &c);
    const auto r2 = eval::score_items(labeled, eval::Metric::exact_match, &c);
    const auto& s1 = r1.per_task.at(tasks::TaskKind::OAList);
    const auto& s2 = r2.per_task.at(tasks::TaskKind::OAList);
    const bool pass = s1.mean < s2.mean && s1.hidden_penalties == flips && s2.hidden_penalties == 0 &&
                      s1.count == rendered.size() && flips > 0;
    return {pass, fmt("rendered-objects oracle EM %.4f < labeled-objects oracle EM %.4f over %zu images; penalty "
                      "counter %zu, independent flip count %zu",
                      s1.mean, s2.mean, rendered.size(), s1.hidden_penalties, flips)};
}

// 8 ---------------------------------------------------------------------

Verdict mixture_direction() {
    run::RunConfig base;
    base.n_images = 600;
    base.hidden_rate = 0.0;
    base.total_steps = 1500;
    base.eval_kinds.assign(tasks::kObjectAwareKinds.begin(), tasks::kObjectAwareKinds.end());
    base.eval_examples_per_kind = 200;
    base.validate();
    run::AblationGrid grid;
    grid.name = "direction";
    grid.seeds = {0, 1, 2};
    grid.variants.push_back({"caption-only", {{"caption", 1.0}}, std::nullopt});
    std::vector<mixture::Component> all;
    for (auto k : tasks::kAllKinds) all.push_back({tasks::kind_name(k), 1.0});
    grid.variants.push_back({"cm-oa-mix", all, std::nullopt});

    const auto out = fixtures::scratch_dir("acc_direction");
    const auto table = run::run_ablation(base, grid, out, 1);
    for (const auto& r : table.rows)
        if (r.failed()) return {false, "variant " + r.variant + " failed: " + r.errors.front()};

    auto median_oa = [&](const run::Variant& v, std::string& per_seed) {
        std::vector<double> xs;
        for (auto seed : grid.seeds) {
            const auto rep = eval::EvalReport::from_json(
                nlohmann::ordered_json::parse(read_file(run::run_dir(out, v, seed) / "eval.json")));
            double m = 0;
            for (const auto& [k, s] : rep.per_task) m += s.mean;
            xs.push_back(m / static_cast<double>(rep.per_task.size()));
            per_seed += fmt(" %.3f", xs.back());
        }
        std::sort(xs.begin(), xs.end());
        return xs[xs.size() / 2];
    };
    std::string cap_seeds, mix_seeds;
    const double cap = median_oa(grid.variants[0], cap_seeds);
    const double mix = median_oa(grid.variants[1], mix_seeds);
    fs::remove_all(out);
    return {mix >= cap, fmt("held-out OA exact match, median of 3 seeds: 8-task mixture %.3f (seeds%s) vs "
                            "caption-only %.3f (seeds%s)",
                            mix, mix_seeds.c_str(), cap, cap_seeds.c_str())};
}

// 9 ---------------------------------------------------------------------

Verdict checkpoint_integrity() {
    const auto c = fixtures::small_corpus(60, 9);
    const std::size_t total = 24, cut = 9;
    std::size_t identical_resumes = 0;
    bool roundtrip = true;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        tasks::SynthConfig sc;
        sc.seed = seed;
        const std::vector<tasks::TaskKind> kinds(tasks::kAllKinds.begin(), tasks::kAllKinds.end());
        const auto ex = tasks::synth_dataset(c, kinds, 24, sc);
        const auto vocab = model::Vocab::build(ex);
        std::vector<model::Component> comps;
        for (auto k : kinds) {
            model::Component comp{tasks::kind_name(k), 1.0, {}};
            for (const auto& e : ex)
                if (e.kind == k) comp.examples.push_back(e);
            comps.push_back(comp);
        }
        model::ModelConfig mc;
        mc.patch = 8;
        model::TrainConfig tc;
        tc.schedule = {total, 8, seed};
        tc.init_seed = seed;
        auto make = [&] { return model::Trainer(mc, tc, vocab, comps, fixtures::image_lookup(c), "fp"); };

        auto full = make();
        const auto h_full = full.run_all();
        const auto dir = fixtures::scratch_dir("acc_ckpt");
        model::save_checkpoint(full.checkpoint(), dir / "a.ckpt");
        model::save_checkpoint(model::load_checkpoint(dir / "a.ckpt"), dir / "b.ckpt");
        roundtrip &= read_file(dir / "a.ckpt") == read_file(dir / "b.ckpt");

        auto first = make();
        auto h = first.run(cut);
        model::save_checkpoint(first.checkpoint(), dir / "cut.ckpt");
        auto resumed = make();
        resumed.restore(model::load_checkpoint(dir / "cut.ckpt"));
        const auto rest = resumed.run_all();
        h.insert(h.end(), rest.begin(), rest.end());
        bool same = h.size() == h_full.size();
        for (std::size_t i = 0; same && i < h.size(); ++i)
            same = h[i].step == h_full[i].step && h[i].task == h_full[i].task && h[i].loss == h_full[i].loss;
        same &= model::serialize_checkpoint(resumed.checkpoint()) == model::serialize_checkpoint(full.checkpoint());
        identical_resumes += same;
        fs::remove_all(dir);
    }
    return {roundtrip && identical_resumes == 3,
            fmt("save/load/save %s; resume at step %zu of %zu bitwise identical for %zu/3 seeds",
                roundtrip ? "byte-identical" : "DIFFERS", cut, total, identical_resumes)};
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0: no runtime bound
    std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, "gradient suite", 60, gradient_suite},
        {2, "overfit smoke", 180, overfit_smoke},
        {3, "mixture statistics", 10, mixture_statistics},
        {4, "synthesis determinism and validity", 60, synthesis_validity},
        {5, "hard-negative validity", 0, hard_negative_validity},
        {6, "scorer oracles", 0, scorer_oracles},
        {7, "hidden-object penalty diagnostic", 30, hidden_penalty},
        {8, "directional mixture effect", 45 * 60, mixture_direction},
        {9, "checkpoint integrity", 0, checkpoint_integrity},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : all) {
        if (!wanted.empty() && !wanted.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::string timing = fmt("%.1f s", secs);
        if (c.budget_s > 0) {
            timing += fmt(" of %.0f s budget", c.budget_s);
            if (secs > c.budget_s) {
                v.pass = false;
                timing += ", OVER BUDGET";
            }
        }
        failures += !v.pass;
        std::printf("%s criterion %d (%s): %s [%s]\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(),
                    timing.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}

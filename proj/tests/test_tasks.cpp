#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "mixpt/corpus/build.hpp"
#include "mixpt/corpus/synthetic.hpp"
#include "mixpt/digest.hpp"
#include "mixpt/error.hpp"
#include "mixpt/tasks/dataset.hpp"
#include "mixpt/tasks/generators.hpp"
#include "mixpt/text.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace mixpt;
using namespace mixpt::tasks;
using corpus::Presence;
using corpus::Verification;

namespace {

constexpr double kAlways = 1.0 - 1e-12;
constexpr double kNever = 1e-12;

// img1: dog and car positive, cat verified negative. img2: cat positive, no
// verified negatives. bird exists only in the class table.
corpus::Corpus toy_corpus() {
    corpus::ClassTable classes;
    for (const auto* n : {"dog", "cat", "car", "bird"}) classes.add({std::string("/c/") + n, n});
    std::vector<corpus::ImageLabel> labels{
        {"img1", "/c/dog", Presence::positive, Verification::human, "verification"},
        {"img1", "/c/car", Presence::positive, Verification::machine, "machine"},
        {"img1", "/c/cat", Presence::negative, Verification::human, "verification"},
        {"img2", "/c/cat", Presence::positive, Verification::machine, "machine"},
    };
    std::vector<corpus::CaptionRecord> caps{{"img1", "a dog on grass"}, {"img2", "a cat on the sofa"}};
    auto c = corpus::build_corpus(classes, labels, {}, caps, {});
    c.lexicon.entries = {{"dog", {"cat", "wolf"}}, {"cat", {"dog"}}, {"grass", {"sand"}}};
    return c;
}

std::vector<std::string> names(const std::string& list) {
    std::vector<std::string> out;
    for (const auto& p : text::split(list, ',')) out.push_back(text::trim(p));
    return out;
}

}  // namespace

TEST(Caption, Template) {
    const auto e = synth_caption({"img1", "A Dog  on Grass"});
    EXPECT_EQ(e.prompt, "describe the image.");
    EXPECT_EQ(e.target, "a dog on grass");
    EXPECT_EQ(e.kind, TaskKind::Caption);
    EXPECT_EQ(synth_caption({"i", "a cat"}).target, "a cat");
}

TEST(Completion, SplitRule) {
    EXPECT_EQ(completion_split_index(5, 0.4), 2u);
    EXPECT_EQ(completion_split_index(4, 0.01), 1u);
    EXPECT_EQ(completion_split_index(4, 0.99), 3u);
    SynthConfig cfg;
    cfg.completion_lo = cfg.completion_hi = 0.4;
    Rng rng(1);
    const auto e = synth_completion({"img1", "a dog on the grass"}, cfg, rng);
    ASSERT_TRUE(e);
    EXPECT_EQ(e->prompt, "complete: a dog");
    EXPECT_EQ(e->target, "on the grass");
    EXPECT_FALSE(synth_completion({"img1", "a dog sat"}, cfg, rng));
}

TEST(Completion, BothSidesNonEmptyAcrossDraws) {
    SynthConfig cfg;
    cfg.completion_lo = 0.01;
    cfg.completion_hi = 0.99;
    for (std::uint64_t s = 0; s < 200; ++s) {
        Rng rng(s);
        const auto e = synth_completion({"i", "one two three four"}, cfg, rng);
        ASSERT_TRUE(e);
        EXPECT_FALSE(e->target.empty());
        EXPECT_GT(e->prompt.size(), std::string(kCompletionPrefix).size());
    }
}

TEST(HardNegative, ReplacesOneNoun) {
    corpus::Lexicon lex;
    lex.entries = {{"dog", {"cat", "wolf"}}};
    for (std::uint64_t s = 0; s < 50; ++s) {
        Rng rng(s);
        const auto h = make_hard_negative_caption("a dog on grass", lex, rng);
        EXPECT_EQ(h.replaced_noun, "dog");
        EXPECT_TRUE(h.replacement == "cat" || h.replacement == "wolf");
        EXPECT_EQ(h.caption, "a " + h.replacement + " on grass");
    }
    lex.entries = {{"dog", {"cat"}}};
    Rng rng(9);
    EXPECT_EQ(make_hard_negative_caption("a dog on grass", lex, rng).caption, "a cat on grass");
    EXPECT_THROW(make_hard_negative_caption("hello world", lex, rng), NoNounFound);
}

TEST(Itm, Branches) {
    const auto c = toy_corpus();
    SynthConfig cfg;
    cfg.yes_no_balance = kAlways;
    Rng rng(2);
    auto e = synth_itm(c.captions_of("img1")[0], c, cfg, rng);
    EXPECT_EQ(e.prompt, std::string(kItmPrefix) + "a dog on grass");
    EXPECT_EQ(e.target, "yes");

    cfg.yes_no_balance = kNever;
    e = synth_itm(c.captions_of("img1")[0], c, cfg, rng);
    EXPECT_EQ(e.prompt, std::string(kItmPrefix) + "a cat on the sofa");
    EXPECT_EQ(e.target, "no");

    cfg.policy = NegativePolicy::Hard;
    e = synth_itm(c.captions_of("img1")[0], c, cfg, rng);
    EXPECT_EQ(e.target, "no");
    EXPECT_EQ(e.meta.replaced_noun, "dog");
    EXPECT_EQ(e.prompt, std::string(kItmPrefix) + "a " + *e.meta.replacement + " on grass");
    EXPECT_FALSE(e.meta.fallback);

    // No lexicon noun: falls back to an easy negative, flagged.
    const corpus::CaptionRecord plain{"img1", "something else entirely"};
    auto c2 = c;
    c2.captions["img1"] = {plain};
    e = synth_itm(plain, c2, cfg, rng);
    EXPECT_EQ(e.target, "no");
    EXPECT_TRUE(e.meta.fallback);
}

TEST(Mlm, SpanCorruption) {
    const std::vector<std::string> toks{"a", "dog", "on", "the", "grass"};
    auto c = apply_span_corruption(toks, {{1, 1}});
    EXPECT_EQ(c.prompt, "a <extra_0> on the grass");
    EXPECT_EQ(c.target, "<extra_0> dog");
    c = apply_span_corruption(toks, {{0, 1}, {3, 2}});
    EXPECT_EQ(c.prompt, "<extra_0> dog on <extra_1>");
    EXPECT_EQ(c.target, "<extra_0> a <extra_1> the grass");
}

TEST(Mlm, AtLeastOneTokenAndOrderedSentinels) {
    SynthConfig cfg;
    cfg.mlm_mask_rate = 1e-6;
    for (std::uint64_t s = 0; s < 100; ++s) {
        Rng rng(s);
        const auto spans = sample_mlm_spans(6, cfg, rng);
        std::size_t covered = 0;
        for (const auto& sp : spans) covered += sp.length;
        EXPECT_GE(covered, 1u);
    }
    cfg.mlm_mask_rate = 0.5;
    cfg.mlm_mean_span = 1.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        Rng rng(s);
        const auto e = synth_mlm({"i", "one two three four five six seven eight nine ten"}, cfg, rng);
        ASSERT_TRUE(e);
        const auto t = text::split_whitespace(e->target);
        std::size_t k = 0;
        for (const auto& w : t)
            if (w.rfind("<extra_", 0) == 0) EXPECT_EQ(w, sentinel(k++));
        EXPECT_GE(k, 1u);
    }
    Rng rng(0);
    EXPECT_FALSE(synth_mlm({"i", "too short"}, cfg, rng));
}

TEST(OaList, SortedNames) {
    const auto c = toy_corpus();
    SynthConfig cfg;
    const auto e = synth_oa_list("img1", c, cfg);
    ASSERT_TRUE(e);
    EXPECT_EQ(e->prompt, "list all objects");
    EXPECT_EQ(e->target, "car, dog");
    EXPECT_EQ(synth_oa_list("img2", c, cfg)->target, "cat");
    auto c2 = c;
    c2.labels["img2"].clear();
    EXPECT_FALSE(synth_oa_list("img2", c2, cfg));
}

TEST(OaExists, PoliciesAndTemplate) {
    const auto c = toy_corpus();
    SynthConfig cfg;
    cfg.yes_no_balance = kNever;
    cfg.policy = NegativePolicy::Hard;
    Rng rng(4);
    auto e = synth_oa_exists("img1", c, cfg, rng);
    ASSERT_TRUE(e);
    EXPECT_EQ(e->prompt, "does cat exist?");
    EXPECT_EQ(e->target, "no");
    EXPECT_THROW(synth_oa_exists("img2", c, cfg, rng), PolicyUnavailable);

    cfg.yes_no_balance = kAlways;
    e = synth_oa_exists("img2", toy_corpus(), SynthConfig{.yes_no_balance = kAlways}, rng);
    EXPECT_EQ(e->prompt, "does cat exist?");
    EXPECT_EQ(e->target, "yes");

    // Easy distractors are never positives.
    cfg = SynthConfig{};
    cfg.yes_no_balance = kNever;
    for (std::uint64_t s = 0; s < 100; ++s) {
        Rng r(s);
        const auto x = synth_oa_exists("img1", c, cfg, r);
        EXPECT_TRUE(x->prompt == "does cat exist?" || x->prompt == "does bird exist?") << x->prompt;
    }
}

TEST(OaAndOr, Semantics) {
    const auto c = toy_corpus();
    SynthConfig cfg;
    cfg.andor_k = {2};
    std::set<std::string> seen;
    for (std::uint64_t s = 0; s < 400; ++s) {
        Rng r(s);
        const auto e = synth_oa_andor("img1", c, cfg, r);
        ASSERT_TRUE(e);
        EXPECT_EQ(oracle::recompute_oa_target(*e, c), e->target) << e->prompt;
        seen.insert(e->prompt + " -> " + e->target);
    }
    // Pinned cases from the definition.
    EXPECT_TRUE(seen.count("does dog or cat exist? -> yes") || seen.count("does cat or dog exist? -> yes"));
    EXPECT_TRUE(seen.count("does dog and cat exist? -> no") || seen.count("does cat and dog exist? -> no"));
    EXPECT_TRUE(seen.count("does dog and car exist? -> yes") || seen.count("does car and dog exist? -> yes"));
}

TEST(OaWhich, IntersectionInPromptOrder) {
    const auto c = toy_corpus();
    SynthConfig cfg;
    bool single = false, pair = false;
    for (std::uint64_t s = 0; s < 200; ++s) {
        Rng r(s);
        const auto e = synth_oa_which("img1", c, cfg, r);
        ASSERT_TRUE(e);
        EXPECT_EQ(e->meta.candidate_objects.size(), 3u);
        EXPECT_EQ(e->prompt, "which of " + list_phrase(e->meta.candidate_objects, "and") + " exist?");
        EXPECT_EQ(oracle::recompute_oa_target(*e, c), e->target);
        EXPECT_FALSE(e->target.empty());
        single |= names(e->target).size() == 1;
        pair |= names(e->target).size() == 2;
    }
    EXPECT_TRUE(single);
    EXPECT_TRUE(pair);
    EXPECT_EQ(list_phrase({"dog", "cat", "car"}, "and"), "dog, cat and car");
    EXPECT_EQ(list_phrase({"dog", "cat"}, "or"), "dog or cat");
}

TEST(Dataset, DeterministicJsonl) {
    const auto c = fixtures::small_corpus(30);
    SynthConfig cfg;
    cfg.seed = 5;
    const std::vector<TaskKind> kinds(kAllKinds.begin(), kAllKinds.end());
    const auto a = synth_dataset(c, kinds, 25, cfg);
    const auto b = synth_dataset(c, kinds, 25, cfg);
    std::ostringstream sa, sb;
    write_jsonl(sa, a);
    write_jsonl(sb, b);
    EXPECT_EQ(sha256_hex(sa.str()), sha256_hex(sb.str()));
    EXPECT_EQ(a.size(), 8u * 25u);
    std::istringstream in(sa.str());
    EXPECT_EQ(read_jsonl(in), a);
    // Order-independent keying: a single kind alone matches its slice.
    const auto only = synth_dataset(c, {TaskKind::OAWhich}, 25, cfg);
    std::vector<TaskExample> slice;
    for (const auto& e : a)
        if (e.kind == TaskKind::OAWhich) slice.push_back(e);
    EXPECT_EQ(only, slice);
}

TEST(Dataset, CyclesImages) {
    auto c = toy_corpus();
    SynthConfig cfg;
    const auto ex = synth_kind(c, TaskKind::OAExists, 4, cfg);
    ASSERT_EQ(ex.size(), 4u);
    EXPECT_EQ(ex[0].image_id, "img1");
    EXPECT_EQ(ex[1].image_id, "img2");
    EXPECT_EQ(ex[2].image_id, "img1");
    EXPECT_EQ(ex[3].image_id, "img2");
}

TEST(Dataset, SkippedImagesPassTheirSlot) {
    auto c = toy_corpus();
    SynthConfig cfg;
    cfg.policy = NegativePolicy::Hard;
    SynthStats stats;
    const auto ex = synth_kind(c, TaskKind::OAExists, 3, cfg, &stats);
    ASSERT_EQ(ex.size(), 3u);
    for (const auto& e : ex) EXPECT_EQ(e.image_id, "img1");
    EXPECT_GT(stats.policy_unavailable[TaskKind::OAExists], 0u);
}

TEST(Dataset, MissingCaptionsNamesKind) {
    auto c = toy_corpus();
    c.captions.clear();
    try {
        synth_dataset(c, {TaskKind::OAList, TaskKind::Caption}, 2, SynthConfig{});
        FAIL();
    } catch (const SynthesisError& e) {
        EXPECT_NE(std::string(e.what()).find("caption"), std::string::npos) << e.what();
    }
}

TEST(Dataset, WritesOneFilePerKind) {
    const auto c = fixtures::small_corpus(20);
    SynthConfig cfg;
    const std::vector<TaskKind> kinds(kAllKinds.begin(), kAllKinds.end());
    SynthStats stats;
    const auto ex = synth_dataset(c, kinds, 10, cfg, &stats);
    const auto dir = fixtures::scratch_dir("taskdir");
    write_task_dir(dir, ex, kinds, cfg, stats);
    std::size_t files = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir)) files += e.path().extension() == ".jsonl";
    EXPECT_EQ(files, 8u);
    EXPECT_TRUE(std::filesystem::exists(dir / "synth_manifest.json"));
    const auto back = read_task_dir(dir);
    EXPECT_EQ(back.at(TaskKind::MLM).size(), 10u);
}

TEST(Properties, YesNoBalance) {
    const auto c = fixtures::small_corpus(200, 3);
    SynthConfig cfg;
    cfg.seed = 17;
    const auto ex = synth_kind(c, TaskKind::OAExists, 10000, cfg);
    ASSERT_EQ(ex.size(), 10000u);
    const auto yes = std::count_if(ex.begin(), ex.end(), [](const auto& e) { return e.target == "yes"; });
    EXPECT_NEAR(static_cast<double>(yes) / 10000.0, 0.5, 0.02);
}

TEST(Properties, HardDistractorsAreVerifiedNegatives) {
    const auto c = fixtures::small_corpus(100, 4);
    SynthConfig cfg;
    cfg.policy = NegativePolicy::Hard;
    for (const auto& e : synth_kind(c, TaskKind::OAExists, 1000, cfg)) {
        if (e.target != "no") continue;
        const auto name = e.meta.candidate_objects.at(0);
        const auto* cls = c.classes.find_by_name(name);
        ASSERT_NE(cls, nullptr);
        const auto neg = c.verified_negatives(e.image_id);
        EXPECT_EQ(std::count(neg.begin(), neg.end(), cls->class_id), 1) << e.id;
    }
}

TEST(Properties, HiddenObjectsNeverInTargets) {
    const auto c = fixtures::small_corpus(120, 6, 0.4);
    ASSERT_GT(c.hidden_count(), 0u);
    SynthConfig cfg;
    const std::vector<TaskKind> kinds(kObjectAwareKinds.begin(), kObjectAwareKinds.end());
    for (const auto& e : synth_dataset(c, kinds, 500, cfg)) {
        std::set<std::string> hidden;
        for (const auto& h : c.hidden(e.image_id)) hidden.insert(c.classes.display_name(h));
        if (e.kind == TaskKind::OAList || e.kind == TaskKind::OAWhich)
            for (const auto& n : names(e.target)) EXPECT_EQ(hidden.count(n), 0u) << e.id;
        if (e.kind == TaskKind::OAExists && e.target == "yes")
            EXPECT_EQ(hidden.count(e.meta.candidate_objects.at(0)), 0u) << e.id;
    }
}

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "mixpt/error.hpp"
#include "mixpt/mixture/batch.hpp"
#include "mixpt/mixture/schedule.hpp"
#include "mixpt/model/vocab.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace mixpt;
using namespace mixpt::mixture;

namespace {

MixtureSpec equal8() {
    std::vector<std::string> n;
    for (int i = 0; i < 8; ++i) n.push_back("t" + std::to_string(i));
    return MixtureSpec::equal(n);
}

double chi_square(const std::vector<std::size_t>& counts, const std::vector<double>& probs) {
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    double x = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double e = total * probs[i];
        x += (static_cast<double>(counts[i]) - e) * (static_cast<double>(counts[i]) - e) / e;
    }
    return x;
}

tasks::TaskExample example(const std::string& image, const std::string& prompt, const std::string& target) {
    tasks::TaskExample e;
    e.id = image + ":" + prompt;
    e.image_id = image;
    e.kind = tasks::TaskKind::Caption;
    e.prompt = prompt;
    e.target = target;
    return e;
}

}  // namespace

TEST(Sampling, EqualWeightsCountsWithin3Sigma) {
    const auto spec = equal8();
    Rng rng(1);
    std::vector<std::size_t> counts(8);
    for (int i = 0; i < 80000; ++i) ++counts[sample_component(spec, rng)];
    for (auto c : counts) EXPECT_NEAR(static_cast<double>(c), 10000.0, 300.0);
}

TEST(Sampling, SingleComponent) {
    const auto spec = MixtureSpec::equal({"only"});
    Rng rng(2);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(sample_component(spec, rng), 0u);
}

TEST(Sampling, WeightsNormalize) {
    const MixtureSpec spec({{"a", 1.0}, {"b", 3.0}});
    EXPECT_DOUBLE_EQ(spec.probabilities()[1], 0.75);
    Rng rng(3);
    int ones = 0;
    for (int i = 0; i < 10000; ++i) ones += sample_component(spec, rng) == 1;
    EXPECT_NEAR(ones / 10000.0, 0.75, 0.02);
}

TEST(Sampling, RejectsBadSpecs) {
    EXPECT_THROW(MixtureSpec(std::vector<Component>{}), ConfigError);
    EXPECT_THROW(MixtureSpec({{"a", 0.0}}), ConfigError);
    EXPECT_THROW(MixtureSpec({{"a", -1.0}}), ConfigError);
}

TEST(Schedule, LengthContract) {
    const auto s = build_schedule(equal8(), {100, 4, 0}, std::vector<std::size_t>(8, 10));
    ASSERT_EQ(s.size(), 100u);
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_EQ(s[i].step, i);
        EXPECT_EQ(s[i].example_ids.size(), 4u);
    }
}

TEST(Schedule, EpochsWrapWithoutRepeats) {
    const auto s = build_schedule(MixtureSpec::equal({"small"}), {30, 4, 7}, {3});
    std::vector<std::size_t> stream;
    for (const auto& e : s) stream.insert(stream.end(), e.example_ids.begin(), e.example_ids.end());
    ASSERT_EQ(stream.size(), 120u);
    bool reshuffled = false;
    for (std::size_t i = 0; i < stream.size(); i += 3) {
        std::set<std::size_t> epoch(stream.begin() + i, stream.begin() + i + 3);
        EXPECT_EQ(epoch, (std::set<std::size_t>{0, 1, 2}));
        if (i > 0) reshuffled |= !std::equal(stream.begin() + i, stream.begin() + i + 3, stream.begin());
    }
    EXPECT_TRUE(reshuffled);
}

TEST(Schedule, DeterministicAndSeedSensitive) {
    const std::vector<std::size_t> sizes(8, 50);
    const auto a = build_schedule(equal8(), {200, 8, 11}, sizes);
    EXPECT_EQ(a, build_schedule(equal8(), {200, 8, 11}, sizes));
    EXPECT_EQ(schedule_csv(a), schedule_csv(build_schedule(equal8(), {200, 8, 11}, sizes)));
    EXPECT_NE(a, build_schedule(equal8(), {200, 8, 12}, sizes));
}

TEST(Schedule, EmptyComponentNamed) {
    try {
        build_schedule(MixtureSpec::equal({"caption", "oa_list"}), {10, 2, 0}, {5, 0});
        FAIL();
    } catch (const ScheduleError& e) {
        EXPECT_NE(std::string(e.what()).find("oa_list"), std::string::npos);
    }
}

TEST(Schedule, FixedBudgetIndependentOfComponentCount) {
    for (std::size_t n : {1u, 2u, 4u, 8u}) {
        std::vector<std::string> names;
        for (std::size_t i = 0; i < n; ++i) names.push_back("c" + std::to_string(i));
        const auto s = build_schedule(MixtureSpec::equal(names), {500, 2, 1}, std::vector<std::size_t>(n, 9));
        const auto counts = component_counts(s, n);
        EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), std::size_t{0}), 500u);
    }
}

TEST(Schedule, ChiSquareAcrossSeeds) {
    const MixtureSpec spec({{"a", 1}, {"b", 2}, {"c", 3}, {"d", 1}, {"e", 1}});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto s = build_schedule(spec, {10000, 1, seed}, std::vector<std::size_t>(5, 4));
        const auto counts = component_counts(s, 5);
        const double p = oracle::chi_square_p(chi_square(counts, spec.probabilities()), 4);
        EXPECT_GT(p, 0.001) << "seed " << seed;
    }
}

TEST(Batch, PadToLongestAndMasks) {
    const auto c = fixtures::small_corpus(4);
    std::vector<tasks::TaskExample> ex{example(c.image_ids[0], "a b c", "x"),
                                       example(c.image_ids[1], "a b c d e", "x y z")};
    const auto vocab = model::Vocab::build(ex);
    const auto b = fixtures::make_batch(ex, vocab, c, {8, 8});
    EXPECT_EQ(b.size, 2u);
    EXPECT_EQ(b.prompt_len, 5u);
    EXPECT_EQ(std::vector<std::uint8_t>(b.prompt_mask.begin(), b.prompt_mask.begin() + 5),
              (std::vector<std::uint8_t>{1, 1, 1, 0, 0}));
    EXPECT_EQ(b.prompt_ids[3], model::Vocab::kPad);
    EXPECT_EQ(b.target_len, 4u);
    // Loss mask counts real tokens plus eos.
    EXPECT_EQ(std::accumulate(b.loss_mask.begin(), b.loss_mask.end(), 0), 2 + 4);
    EXPECT_EQ(b.target_ids[1], model::Vocab::kEos);
    EXPECT_EQ(b.target_ids[2], model::Vocab::kPad);
    EXPECT_EQ(b.target_ids[4 + 3], model::Vocab::kEos);
    for (std::size_t i = 0; i < b.target_ids.size(); ++i)
        EXPECT_EQ(b.loss_mask[i] == 0, b.target_ids[i] == model::Vocab::kPad && i % 4 != 0);
    EXPECT_EQ(b.images.size(), 2u * 32 * 32 * 3);
    EXPECT_EQ(b.truncations, 0u);
}

TEST(Batch, TruncatesWithWarningCount) {
    const auto c = fixtures::small_corpus(2);
    std::vector<tasks::TaskExample> ex{
        example(c.image_ids[0], "p", "w1 w2 w3 w4 w5 w6 w7 w8 w9 w10 w11 w12")};
    const auto vocab = model::Vocab::build(ex);
    const auto b = fixtures::make_batch(ex, vocab, c, {8, 8});
    EXPECT_EQ(b.target_len, 8u);
    EXPECT_EQ(b.target_ids[6], vocab.id("w7"));
    EXPECT_EQ(b.target_ids[7], model::Vocab::kEos);
    EXPECT_EQ(b.truncations, 1u);
    EXPECT_THROW(fixtures::make_batch({}, vocab, c, {8, 8}), InputError);
}

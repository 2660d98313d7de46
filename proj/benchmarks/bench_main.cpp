#include <benchmark/benchmark.h>

#include "mixpt/corpus/synthetic.hpp"
#include "mixpt/eval/scoring.hpp"
#include "mixpt/model/trainer.hpp"
#include "mixpt/model/vocab.hpp"
#include "mixpt/nn/graph.hpp"
#include "mixpt/rng.hpp"
#include "mixpt/tasks/dataset.hpp"

using namespace mixpt;

namespace {

nn::Tensor<float> random_tensor(nn::Shape s, std::uint64_t seed) {
    Rng rng(seed);
    nn::Tensor<float> t(std::move(s));
    for (auto& v : t.data) v = static_cast<float>(rng.normal());
    return t;
}

corpus::Corpus bench_corpus(std::size_t n) {
    corpus::SynthCorpusParams p;
    p.n_images = n;
    p.object_vocab = corpus::default_object_vocab();
    return corpus::synth_corpus(p);
}

void BM_MatmulForwardBackward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
    for (auto _ : state) {
        nn::Graph<float> g;
        auto y = g.matmul(g.input(a), g.input(b));
        g.backward(g.sum(y));
        benchmark::DoNotOptimize(g.value(y).data.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(3 * 2 * n * n * n));
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(64)->Arg(128)->Arg(256);

void BM_AttentionForward(benchmark::State& state) {
    const auto len = static_cast<std::size_t>(state.range(0));
    const std::size_t batch = 16, d = 64, heads = 4;
    const auto x = random_tensor({batch, len, d}, 3);
    for (auto _ : state) {
        nn::Graph<float> g(false);
        auto h = g.split_heads(g.constant(x), heads);
        benchmark::DoNotOptimize(g.value(g.attention(h, h, h)).data.data());
    }
}
BENCHMARK(BM_AttentionForward)->Arg(16)->Arg(48)->Arg(96);

void BM_TrainStep(benchmark::State& state) {
    const auto c = bench_corpus(64);
    const std::vector<tasks::TaskKind> kinds(tasks::kAllKinds.begin(), tasks::kAllKinds.end());
    const auto ex = tasks::synth_dataset(c, kinds, 32, tasks::SynthConfig{});
    const auto vocab = model::Vocab::build(ex);
    model::ModelConfig mc;
    mc.patch = static_cast<std::size_t>(state.range(0));
    model::TrainConfig tc;
    tc.schedule = {100000, 16, 0};
    std::vector<model::Component> comps{{"all", 1.0, ex}};
    model::Trainer tr(mc, tc, vocab, comps, [&c](const std::string& id) -> const corpus::ImageRecord& {
        return c.images.at(id);
    });
    for (auto _ : state) benchmark::DoNotOptimize(tr.run(tr.step() + 1));
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_SynthDataset(benchmark::State& state) {
    const auto c = bench_corpus(200);
    const std::vector<tasks::TaskKind> kinds(tasks::kAllKinds.begin(), tasks::kAllKinds.end());
    for (auto _ : state) benchmark::DoNotOptimize(tasks::synth_dataset(c, kinds, 250, tasks::SynthConfig{}).size());
    state.SetItemsProcessed(state.iterations() * 8 * 250);
}
BENCHMARK(BM_SynthDataset)->Unit(benchmark::kMillisecond);

void BM_Cider(benchmark::State& state) {
    Rng rng(5);
    const std::vector<std::string> words{"a", "photo", "of", "dog", "cat", "car", "and", "tree", "bus", "cup"};
    auto sentence = [&] {
        std::string s;
        for (std::size_t i = 0, n = 4 + rng.index(8); i < n; ++i) s += (i ? " " : "") + words[rng.index(words.size())];
        return s;
    };
    const auto docs = static_cast<std::size_t>(state.range(0));
    std::vector<std::string> cands;
    std::vector<std::vector<std::string>> refs(docs);
    for (std::size_t d = 0; d < docs; ++d) {
        cands.push_back(sentence());
        for (int r = 0; r < 3; ++r) refs[d].push_back(sentence());
    }
    for (auto _ : state) benchmark::DoNotOptimize(eval::cider(cands, refs).mean);
}
BENCHMARK(BM_Cider)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

#include "support/fixtures.hpp"

#include <atomic>
#include <unistd.h>

#include "mixpt/model/gradcheck.hpp"

namespace mixpt::fixtures {

corpus::Corpus small_corpus(std::size_t n_images, std::uint64_t seed, double hidden_rate) {
    corpus::SynthCorpusParams p;
    p.seed = seed;
    p.n_images = n_images;
    p.object_vocab = corpus::default_object_vocab();
    p.grid = 4;
    p.cell_px = 8;
    p.hidden_rate = hidden_rate;
    return corpus::synth_corpus(p);
}

mixture::ImageLookup image_lookup(const corpus::Corpus& corpus) {
    return [&corpus](const std::string& id) -> const corpus::ImageRecord& { return corpus.images.at(id); };
}

model::ModelConfig tiny_config(std::size_t vocab_size) { return model::gradcheck_config(vocab_size); }

mixture::Batch make_batch(const std::vector<tasks::TaskExample>& examples, const model::Vocab& vocab,
                          const corpus::Corpus& corpus, mixture::BatchLimits limits) {
    std::vector<const tasks::TaskExample*> ptrs;
    for (const auto& e : examples) ptrs.push_back(&e);
    return mixture::make_batch(ptrs, vocab, limits, image_lookup(corpus));
}

std::filesystem::path scratch_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    auto dir = std::filesystem::temp_directory_path() /
               ("mixpt_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace mixpt::fixtures

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mixpt::eval {

// Lowercase, trim, collapse internal whitespace, drop one terminal period.
std::string normalize_answer(std::string_view text);

// 1 iff the normalized prediction equals any normalized ground truth.
// Throws InputError on an empty ground-truth list.
int exact_match(std::string_view prediction, const std::vector<std::string>& ground_truths);

struct CiderResult {
    std::vector<double> scores;
    double mean = 0;
    std::vector<std::string> warnings;
};

// Consensus captioning score with document frequencies taken from a fixed
// set of reference documents (one document per reference set).
class CiderScorer {
public:
    explicit CiderScorer(const std::vector<std::vector<std::string>>& reference_sets, std::size_t n_max = 4,
                         double sigma = 6.0);

    // Score in [0, 10]. An empty candidate scores 0.
    double score(std::string_view candidate, const std::vector<std::string>& references) const;

    double idf(const std::string& ngram) const;
    std::size_t documents() const { return n_docs_; }

private:
    std::size_t n_max_;
    double sigma_;
    std::size_t n_docs_;
    double log_n_;
    std::map<std::string, std::size_t> df_;  // n-gram (space-joined) -> documents containing it
};

// Scores every candidate against its own reference set, idf taken from
// all reference sets. Sizes must agree and each set must be non-empty.
CiderResult cider(const std::vector<std::string>& candidates,
                  const std::vector<std::vector<std::string>>& reference_sets, std::size_t n_max = 4,
                  double sigma = 6.0);

}  // namespace mixpt::eval

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mixpt/corpus/types.hpp"
#include "mixpt/tasks/task.hpp"

// Deliberately naive reimplementations used as test oracles. None of them
// call into the library code they check.
namespace mixpt::oracle {

// Character loop: lowercase, collapse whitespace runs, trim, drop one
// trailing period (and any whitespace it exposes).
std::string naive_normalize(const std::string& s);
int naive_exact_match(const std::string& prediction, const std::vector<std::string>& ground_truths);

// Brute-force consensus score over whitespace words. N-grams are kept as
// word vectors; document frequency is counted by scanning every reference
// set for every n-gram.
std::vector<double> brute_cider(const std::vector<std::string>& candidates,
                                const std::vector<std::vector<std::string>>& reference_sets, std::size_t n_max = 4,
                                double sigma = 6.0);

// Recomputes an object-aware target from the prompt text and the raw label
// and box records. Returns nullopt for kinds it does not cover.
std::optional<std::string> recompute_oa_target(const tasks::TaskExample& example, const corpus::Corpus& corpus);

// Upper-tail probability of a chi-square statistic.
double chi_square_p(double statistic, std::size_t dof);

}  // namespace mixpt::oracle

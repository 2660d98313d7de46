#include "mixpt/eval/scoring.hpp"

#include <cmath>
#include <set>

#include "mixpt/error.hpp"
#include "mixpt/model/vocab.hpp"
#include "mixpt/text.hpp"

namespace mixpt::eval {

std::string normalize_answer(std::string_view s) {
    std::string out = text::join(text::split_whitespace(text::to_lower(s)), " ");
    if (!out.empty() && out.back() == '.') {
        out.pop_back();
        while (!out.empty() && out.back() == ' ') out.pop_back();
    }
    return out;
}

int exact_match(std::string_view prediction, const std::vector<std::string>& ground_truths) {
    if (ground_truths.empty()) throw InputError("exact_match needs at least one ground truth");
    const std::string p = normalize_answer(prediction);
    for (const auto& g : ground_truths)
        if (normalize_answer(g) == p) return 1;
    return 0;
}

namespace {

using Counts = std::map<std::string, double>;

std::vector<std::string> words(std::string_view s) { return model::tokenize(normalize_answer(s)); }

std::vector<Counts> ngram_counts(const std::vector<std::string>& w, std::size_t n_max) {
    std::vector<Counts> out(n_max);
    for (std::size_t n = 1; n <= n_max; ++n)
        for (std::size_t i = 0; i + n <= w.size(); ++i) {
            std::string g = w[i];
            for (std::size_t k = 1; k < n; ++k) g += ' ' + w[i + k];
            out[n - 1][g] += 1.0;
        }
    return out;
}

}  // namespace

CiderScorer::CiderScorer(const std::vector<std::vector<std::string>>& reference_sets, std::size_t n_max, double sigma)
    : n_max_(n_max), sigma_(sigma), n_docs_(reference_sets.size()) {
    if (n_docs_ == 0) throw InputError("cider needs at least one reference set");
    if (n_max == 0 || !(sigma > 0)) throw InputError("cider needs n_max >= 1 and sigma > 0");
    log_n_ = std::log(static_cast<double>(n_docs_));
    for (const auto& refs : reference_sets) {
        std::set<std::string> seen;
        for (const auto& r : refs)
            for (const auto& counts : ngram_counts(words(r), n_max_))
                for (const auto& [g, c] : counts) seen.insert(g);
        for (const auto& g : seen) ++df_[g];
    }
}

double CiderScorer::idf(const std::string& ngram) const {
    auto it = df_.find(ngram);
    const double df = it == df_.end() ? 1.0 : static_cast<double>(it->second);
    return log_n_ - std::log(df);
}

double CiderScorer::score(std::string_view candidate, const std::vector<std::string>& references) const {
    if (references.empty()) throw InputError("cider candidate without references");
    const auto cw = words(candidate);
    if (cw.empty()) return 0.0;
    auto weigh = [this](const std::vector<Counts>& counts) {
        std::vector<Counts> v = counts;
        for (auto& m : v)
            for (auto& [g, x] : m) x *= idf(g);
        return v;
    };
    const auto cv = weigh(ngram_counts(cw, n_max_));
    double total = 0;
    for (const auto& r : references) {
        const auto rw = words(r);
        const auto rv = weigh(ngram_counts(rw, n_max_));
        const double delta = static_cast<double>(cw.size()) - static_cast<double>(rw.size());
        const double penalty = std::exp(-(delta * delta) / (2 * sigma_ * sigma_));
        for (std::size_t n = 0; n < n_max_; ++n) {
            double dot = 0, nc = 0, nr = 0;
            for (const auto& [g, x] : cv[n]) {
                nc += x * x;
                auto it = rv[n].find(g);
                if (it != rv[n].end()) dot += x * it->second;
            }
            for (const auto& [g, x] : rv[n]) nr += x * x;
            if (nc > 0 && nr > 0) total += penalty * dot / (std::sqrt(nc) * std::sqrt(nr));
        }
    }
    const double s = 10.0 * total / (static_cast<double>(n_max_) * static_cast<double>(references.size()));
    return std::min(s, 10.0);
}

CiderResult cider(const std::vector<std::string>& candidates, const std::vector<std::vector<std::string>>& reference_sets,
                  std::size_t n_max, double sigma) {
    if (candidates.empty()) throw InputError("cider needs at least one candidate");
    if (candidates.size() != reference_sets.size()) throw InputError("cider candidate/reference count mismatch");
    CiderScorer scorer(reference_sets, n_max, sigma);
    CiderResult res;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (words(candidates[i]).empty()) res.warnings.push_back("candidate " + std::to_string(i) + " is empty; scored 0");
        res.scores.push_back(scorer.score(candidates[i], reference_sets[i]));
        res.mean += res.scores.back();
    }
    res.mean /= static_cast<double>(candidates.size());
    return res;
}

}  // namespace mixpt::eval

#include "mixpt/mixture/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mixpt/error.hpp"

namespace mixpt::mixture {

MixtureSpec::MixtureSpec(std::vector<Component> components) : components_(std::move(components)) {
    if (components_.empty()) throw ConfigError("mixture needs at least one component");
    double total = 0;
    for (const auto& c : components_) {
        if (!(c.weight > 0.0) || !std::isfinite(c.weight))
            throw ConfigError("mixture weight for '" + c.name + "' must be positive");
        total += c.weight;
    }
    double running = 0;
    for (const auto& c : components_) {
        running += c.weight;
        cumulative_.push_back(running / total);
    }
    cumulative_.back() = 1.0;
}

MixtureSpec MixtureSpec::equal(const std::vector<std::string>& names) {
    std::vector<Component> comps;
    for (const auto& n : names) comps.push_back({n, 1.0});
    return MixtureSpec(std::move(comps));
}

std::vector<double> MixtureSpec::probabilities() const {
    std::vector<double> p(cumulative_.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = cumulative_[i] - (i ? cumulative_[i - 1] : 0.0);
    return p;
}

std::size_t sample_component(const MixtureSpec& spec, Rng& rng) {
    if (spec.cumulative_.empty()) throw ConfigError("empty mixture");
    if (spec.cumulative_.size() == 1) return 0;
    const double u = rng.uniform();
    auto it = std::upper_bound(spec.cumulative_.begin(), spec.cumulative_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - spec.cumulative_.begin()),
                                 spec.cumulative_.size() - 1);
}

namespace {

class EpochSampler {
public:
    EpochSampler(std::size_t n, std::uint64_t seed, std::size_t component)
        : n_(n), seed_(seed), component_(component) {
        reshuffle();
    }

    std::size_t next() {
        if (pos_ == order_.size()) {
            ++epoch_;
            reshuffle();
        }
        return order_[pos_++];
    }

private:
    void reshuffle() {
        order_.resize(n_);
        std::iota(order_.begin(), order_.end(), 0);
        Rng rng(KeyHasher().add(seed_).add("epoch").add(component_).add(epoch_).finish());
        for (std::size_t i = n_; i > 1; --i) std::swap(order_[i - 1], order_[rng.index(i)]);
        pos_ = 0;
    }

    std::size_t n_;
    std::uint64_t seed_;
    std::size_t component_;
    std::size_t epoch_ = 0;
    std::size_t pos_ = 0;
    std::vector<std::size_t> order_;
};

}  // namespace

MixtureSchedule build_schedule(const MixtureSpec& spec, const ScheduleConfig& cfg,
                               const std::vector<std::size_t>& dataset_sizes) {
    if (dataset_sizes.size() != spec.size())
        throw ScheduleError("dataset count does not match mixture components");
    if (cfg.total_steps == 0 || cfg.batch_size == 0) throw ScheduleError("total_steps and batch_size must be positive");
    std::vector<EpochSampler> samplers;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        if (dataset_sizes[i] == 0)
            throw ScheduleError("component '" + spec.components()[i].name + "' has an empty dataset");
        samplers.emplace_back(dataset_sizes[i], cfg.seed, i);
    }

    Rng rng(KeyHasher().add(cfg.seed).add("schedule").finish());
    MixtureSchedule schedule;
    schedule.reserve(cfg.total_steps);
    for (std::size_t step = 0; step < cfg.total_steps; ++step) {
        ScheduleEntry entry{step, sample_component(spec, rng), {}};
        entry.example_ids.reserve(cfg.batch_size);
        for (std::size_t b = 0; b < cfg.batch_size; ++b)
            entry.example_ids.push_back(samplers[entry.component].next());
        schedule.push_back(std::move(entry));
    }
    return schedule;
}

std::vector<std::size_t> component_counts(const MixtureSchedule& schedule, std::size_t n_components) {
    std::vector<std::size_t> counts(n_components, 0);
    for (const auto& e : schedule) ++counts.at(e.component);
    return counts;
}

std::string schedule_csv(const MixtureSchedule& schedule) {
    std::string out;
    for (const auto& e : schedule) {
        out += std::to_string(e.step) + "," + std::to_string(e.component);
        for (auto id : e.example_ids) out += "," + std::to_string(id);
        out += "\n";
    }
    return out;
}

}  // namespace mixpt::mixture

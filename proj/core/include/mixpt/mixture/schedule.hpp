#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixpt/rng.hpp"

namespace mixpt::mixture {

struct Component {
    std::string name;
    double weight = 1.0;
};

// Weighted task mixture. Weights are normalized to probabilities.
class MixtureSpec {
public:
    MixtureSpec() = default;
    explicit MixtureSpec(std::vector<Component> components);
    // One component per name, all with weight 1.
    static MixtureSpec equal(const std::vector<std::string>& names);

    const std::vector<Component>& components() const { return components_; }
    std::size_t size() const { return components_.size(); }
    std::vector<double> probabilities() const;

private:
    std::vector<Component> components_;
    std::vector<double> cumulative_;

    friend std::size_t sample_component(const MixtureSpec& spec, Rng& rng);
};

std::size_t sample_component(const MixtureSpec& spec, Rng& rng);

struct ScheduleConfig {
    std::size_t total_steps = 1000;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
};

struct ScheduleEntry {
    std::size_t step = 0;
    std::size_t component = 0;
    std::vector<std::size_t> example_ids;

    bool operator==(const ScheduleEntry&) const = default;
};

using MixtureSchedule = std::vector<ScheduleEntry>;

// One component per step; examples drawn from that component's current
// shuffled epoch, reshuffled (seed-keyed) on exhaustion.
MixtureSchedule build_schedule(const MixtureSpec& spec, const ScheduleConfig& cfg,
                               const std::vector<std::size_t>& dataset_sizes);

std::vector<std::size_t> component_counts(const MixtureSchedule& schedule, std::size_t n_components);

// `step,component,id,id,...` rows.
std::string schedule_csv(const MixtureSchedule& schedule);

}  // namespace mixpt::mixture

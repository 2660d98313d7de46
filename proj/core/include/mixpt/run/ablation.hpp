#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixpt/run/config.hpp"

namespace mixpt::run {

// A grid row: differs from the base config only in mixture and policy.
struct Variant {
    std::string name;
    std::vector<mixture::Component> mixture;
    std::optional<tasks::NegativePolicy> policy;
};

enum class GridLayout { rows, easy_hard };

struct AblationGrid {
    std::string name = "custom";
    GridLayout layout = GridLayout::rows;
    std::vector<Variant> variants;
    std::vector<std::uint64_t> seeds;
};

// "paper-table1" or "paper-table2"; seeds base, base+1, ...
AblationGrid builtin_grid(const std::string& name, std::uint64_t base_seed, std::size_t n_seeds = 3);
// [grid] seeds = 1,2 | n_seeds = 3 ; [variant.NAME] mixture = caption, mlm:2 ; policy = hard
AblationGrid parse_grid(const std::string& ini_text, std::uint64_t base_seed);

RunConfig variant_config(const RunConfig& base, const Variant& v, std::uint64_t seed);
std::filesystem::path run_dir(const std::filesystem::path& out, const Variant& v, std::uint64_t seed);

struct CellStats {
    double mean = 0;
    double stddev = 0;  // sample stddev; 0 with one seed
    std::size_t n = 0;
};

struct AblationRow {
    std::string variant;
    std::map<std::string, CellStats> cells;
    std::size_t runs_ok = 0;
    std::vector<std::string> errors;  // one per failed run

    bool failed() const { return !errors.empty(); }
};

struct AblationTable {
    std::string grid;
    GridLayout layout = GridLayout::rows;
    std::vector<std::string> columns;
    std::vector<AblationRow> rows;

    std::string to_csv() const;
    nlohmann::ordered_json to_json() const;
};

// Reads eval.json from each out/<variant>/seed_<s>; missing runs mark rows.
AblationTable aggregate_runs(const AblationGrid& grid, const std::filesystem::path& out);

// Trains every variant x seed on up to `jobs` threads, then aggregates.
// Writes table.csv and table.json into `out`.
AblationTable run_ablation(const RunConfig& base, const AblationGrid& grid, const std::filesystem::path& out,
                           std::size_t jobs, std::ostream* log = nullptr);

void write_table(const AblationTable& table, const std::filesystem::path& out);

}  // namespace mixpt::run

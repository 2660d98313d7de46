#include "mixpt/run/ablation.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mixpt/digest.hpp"
#include "mixpt/error.hpp"
#include "mixpt/run/pipeline.hpp"
#include "mixpt/text.hpp"

namespace mixpt::run {

namespace fs = std::filesystem;
using tasks::TaskKind;

namespace {

std::vector<mixture::Component> equal_mix(std::initializer_list<TaskKind> kinds) {
    std::vector<mixture::Component> out;
    for (auto k : kinds) out.push_back({tasks::kind_name(k), 1.0});
    return out;
}

constexpr auto Caption = TaskKind::Caption;
constexpr auto Completion = TaskKind::Completion;
constexpr auto ITM = TaskKind::ITM;
constexpr auto MLM = TaskKind::MLM;
constexpr auto OAList = TaskKind::OAList;
constexpr auto OAExists = TaskKind::OAExists;
constexpr auto OAAndOr = TaskKind::OAAndOr;
constexpr auto OAWhich = TaskKind::OAWhich;

std::vector<mixture::Component> parse_mixture(const std::string& variant, const std::string& s) {
    std::vector<mixture::Component> out;
    for (const auto& part : text::split(s, ',')) {
        const std::string item = text::trim(part);
        if (item.empty()) continue;
        mixture::Component c{item, 1.0};
        if (auto colon = item.find(':'); colon != std::string::npos) {
            c.name = text::trim(item.substr(0, colon));
            try {
                std::size_t used = 0;
                const std::string w = text::trim(item.substr(colon + 1));
                c.weight = std::stod(w, &used);
                if (used != w.size()) throw std::invalid_argument(w);
            } catch (const std::exception&) {
                throw ConfigError("variant " + variant + ": bad weight in '" + item + "'");
            }
        }
        tasks::parse_kind(c.name);
        out.push_back(c);
    }
    if (out.empty()) throw ConfigError("variant " + variant + " has an empty mixture");
    return out;
}

std::string fmt(double v) {
    std::ostringstream o;
    o.precision(6);
    o << std::fixed << v;
    return o.str();
}

}  // namespace

AblationGrid builtin_grid(const std::string& name, std::uint64_t base_seed, std::size_t n_seeds) {
    if (n_seeds == 0) throw ConfigError("an ablation grid needs at least one seed");
    AblationGrid g;
    g.name = name;
    for (std::size_t i = 0; i < n_seeds; ++i) g.seeds.push_back(base_seed + i);
    const auto cm = {Caption, Completion, ITM, MLM};
    auto cm_plus = [&](std::initializer_list<TaskKind> extra) {
        auto m = equal_mix(cm);
        auto e = equal_mix(extra);
        m.insert(m.end(), e.begin(), e.end());
        return m;
    };
    using P = tasks::NegativePolicy;
    if (name == "paper-table1") {
        g.variants = {
            {"Caption-only", equal_mix({Caption}), P::Easy},
            {"MLM-only", equal_mix({MLM}), P::Easy},
            {"CM-mix", equal_mix(cm), P::Easy},
            {"CM-mix+Hard", equal_mix(cm), P::Hard},
            {"CM-mix+OA1", cm_plus({OAList}), P::Easy},
            {"OA-2-3-4", equal_mix({OAExists, OAAndOr, OAWhich}), P::Easy},
            {"CM-mix+OA-2-3-4", cm_plus({OAExists, OAAndOr, OAWhich}), P::Easy},
            {"CM-mix+OA-mix", cm_plus({OAList, OAExists, OAAndOr, OAWhich}), P::Easy},
            {"CM-mix+Hard+OA-mix", cm_plus({OAList, OAExists, OAAndOr, OAWhich}), P::Hard},
        };
    } else if (name == "paper-table2") {
        g.layout = GridLayout::easy_hard;
        for (auto k : {OAExists, OAAndOr, OAWhich})
            for (auto p : {P::Easy, P::Hard})
                g.variants.push_back({tasks::kind_name(k) + "." + tasks::policy_name(p), equal_mix({k}), p});
    } else {
        throw ConfigError("unknown built-in grid '" + name + "' (paper-table1, paper-table2)");
    }
    return g;
}

AblationGrid parse_grid(const std::string& ini_text, std::uint64_t base_seed) {
    namespace pt = boost::property_tree;
    pt::ptree root;
    try {
        std::istringstream in(ini_text);
        pt::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("grid file: ") + e.what());
    }
    AblationGrid g;
    std::size_t n_seeds = 3;
    std::optional<std::vector<std::uint64_t>> seeds;
    std::set<std::string> names;
    for (const auto& [section, body] : root) {
        if (section == "grid") {
            for (const auto& [k, v] : body) {
                if (k == "seeds") {
                    seeds.emplace();
                    for (const auto& s : text::split(v.data(), ','))
                        if (!text::trim(s).empty()) seeds->push_back(std::stoull(text::trim(s)));
                } else if (k == "n_seeds") {
                    n_seeds = std::stoul(v.data());
                } else if (k == "name") {
                    g.name = v.data();
                } else {
                    throw ConfigError("grid file: unknown key [grid] " + k);
                }
            }
        } else if (section.rfind("variant.", 0) == 0) {
            Variant var;
            var.name = section.substr(8);
            if (var.name.empty() || var.name.find('/') != std::string::npos)
                throw ConfigError("grid file: bad variant name '" + var.name + "'");
            if (!names.insert(var.name).second) throw ConfigError("grid file: duplicate variant " + var.name);
            for (const auto& [k, v] : body) {
                if (k == "mixture")
                    var.mixture = parse_mixture(var.name, v.data());
                else if (k == "policy")
                    var.policy = tasks::parse_policy(text::trim(v.data()));
                else
                    throw ConfigError("grid file: unknown key [variant." + var.name + "] " + k);
            }
            if (var.mixture.empty()) throw ConfigError("variant " + var.name + " has no mixture");
            g.variants.push_back(std::move(var));
        } else {
            throw ConfigError("grid file: unknown section [" + section + "]");
        }
    }
    if (g.variants.empty()) throw ConfigError("grid file defines no [variant.NAME] sections");
    if (seeds) {
        g.seeds = *seeds;
    } else {
        for (std::size_t i = 0; i < n_seeds; ++i) g.seeds.push_back(base_seed + i);
    }
    if (g.seeds.empty()) throw ConfigError("grid file: no seeds");
    return g;
}

RunConfig variant_config(const RunConfig& base, const Variant& v, std::uint64_t seed) {
    RunConfig c = base;
    c.mixture = v.mixture;
    if (v.policy) c.synth.policy = *v.policy;
    c.seed = seed;
    c.synth.seed = seed;
    c.validate();
    return c;
}

fs::path run_dir(const fs::path& out, const Variant& v, std::uint64_t seed) {
    return out / v.name / ("seed_" + std::to_string(seed));
}

AblationTable aggregate_runs(const AblationGrid& grid, const fs::path& out) {
    AblationTable t;
    t.grid = grid.name;
    t.layout = grid.layout;
    std::set<TaskKind> kinds_seen;
    std::vector<std::map<std::string, std::vector<double>>> samples(grid.variants.size());
    for (std::size_t i = 0; i < grid.variants.size(); ++i) {
        AblationRow row;
        row.variant = grid.variants[i].name;
        for (auto seed : grid.seeds) {
            const auto dir = run_dir(out, grid.variants[i], seed);
            const auto report_path = dir / "eval.json";
            if (!fs::exists(report_path)) {
                std::string why = "no eval.json";
                if (fs::exists(dir / "error.txt")) why = text::trim(read_file(dir / "error.txt"));
                row.errors.push_back("seed " + std::to_string(seed) + ": " + why);
                continue;
            }
            const auto report = eval::EvalReport::from_json(nlohmann::ordered_json::parse(read_file(report_path)));
            double cm = 0, oa = 0, all = 0;
            std::size_t n_cm = 0, n_oa = 0;
            for (const auto& [kind, score] : report.per_task) {
                kinds_seen.insert(kind);
                samples[i][tasks::kind_name(kind)].push_back(score.mean);
                all += score.mean;
                if (tasks::is_object_aware(kind)) {
                    oa += score.mean;
                    ++n_oa;
                } else {
                    cm += score.mean;
                    ++n_cm;
                }
            }
            if (n_cm) samples[i]["cm_mean"].push_back(cm / static_cast<double>(n_cm));
            if (n_oa) samples[i]["oa_mean"].push_back(oa / static_cast<double>(n_oa));
            if (!report.per_task.empty())
                samples[i]["mean"].push_back(all / static_cast<double>(report.per_task.size()));
            ++row.runs_ok;
        }
        t.rows.push_back(std::move(row));
    }
    bool any_cm = false, any_oa = false;
    for (auto k : tasks::kAllKinds)
        if (kinds_seen.count(k)) {
            t.columns.push_back(tasks::kind_name(k));
            (tasks::is_object_aware(k) ? any_oa : any_cm) = true;
        }
    if (any_cm) t.columns.push_back("cm_mean");
    if (any_oa) t.columns.push_back("oa_mean");
    if (!kinds_seen.empty()) t.columns.push_back("mean");

    for (std::size_t i = 0; i < t.rows.size(); ++i)
        for (const auto& [col, xs] : samples[i]) {
            CellStats s;
            s.n = xs.size();
            for (double x : xs) s.mean += x;
            s.mean /= static_cast<double>(s.n);
            if (s.n > 1) {
                double ss = 0;
                for (double x : xs) ss += (x - s.mean) * (x - s.mean);
                s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
            }
            t.rows[i].cells[col] = s;
        }
    return t;
}

std::string AblationTable::to_csv() const {
    std::ostringstream o;
    o << "variant,runs_ok,runs_failed";
    for (const auto& c : columns) o << "," << c << "_mean," << c << "_std";
    o << "\n";
    for (const auto& r : rows) {
        o << text::csv_field(r.variant) << "," << r.runs_ok << "," << r.errors.size();
        for (const auto& c : columns) {
            auto it = r.cells.find(c);
            if (it == r.cells.end())
                o << ",,";
            else
                o << "," << fmt(it->second.mean) << "," << fmt(it->second.stddev);
        }
        o << "\n";
    }
    return o.str();
}

nlohmann::ordered_json AblationTable::to_json() const {
    nlohmann::ordered_json j;
    j["grid"] = grid;
    j["columns"] = columns;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json row{{"variant", r.variant}, {"status", r.failed() ? "failed" : "ok"},
                                   {"runs_ok", r.runs_ok}, {"errors", r.errors}};
        nlohmann::ordered_json cells = nlohmann::ordered_json::object();
        for (const auto& c : columns)
            if (auto it = r.cells.find(c); it != r.cells.end())
                cells[c] = {{"mean", it->second.mean}, {"std", it->second.stddev}, {"n", it->second.n}};
        row["cells"] = cells;
        j["rows"].push_back(row);
    }
    if (layout == GridLayout::easy_hard) {
        // task -> policy -> mean over evaluated kinds
        nlohmann::ordered_json m = nlohmann::ordered_json::object();
        for (const auto& r : rows) {
            const auto dot = r.variant.rfind('.');
            if (dot == std::string::npos) continue;
            auto it = r.cells.find("mean");
            if (it == r.cells.end()) continue;
            m[r.variant.substr(0, dot)][r.variant.substr(dot + 1)] = {{"mean", it->second.mean},
                                                                      {"std", it->second.stddev}};
        }
        j["easy_hard"] = m;
    }
    return j;
}

void write_table(const AblationTable& table, const fs::path& out) {
    fs::create_directories(out);
    write_file(out / "table.csv", table.to_csv());
    write_file(out / "table.json", table.to_json().dump(2) + "\n");
}

AblationTable run_ablation(const RunConfig& base, const AblationGrid& grid, const fs::path& out, std::size_t jobs,
                           std::ostream* log) {
    struct Job {
        const Variant* variant;
        std::uint64_t seed;
    };
    std::vector<Job> queue;
    for (const auto& v : grid.variants)
        for (auto s : grid.seeds) queue.push_back({&v, s});
    // Fail fast on configs that cannot be built at all.
    std::vector<std::string> texts;
    for (const auto& j : queue) texts.push_back(variant_config(base, *j.variant, j.seed).to_ini());

    std::mutex log_mu;
    auto say = [&](const std::string& msg) {
        if (!log) return;
        std::lock_guard lock(log_mu);
        *log << msg << "\n" << std::flush;
    };
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < queue.size(); i = next++) {
            const auto dir = run_dir(out, *queue[i].variant, queue[i].seed);
            say("[" + std::to_string(i + 1) + "/" + std::to_string(queue.size()) + "] " + queue[i].variant->name +
                " seed " + std::to_string(queue[i].seed));
            try {
                if (fs::exists(dir / "error.txt")) fs::remove(dir / "error.txt");
                train_run(texts[i], dir);
            } catch (const std::exception& e) {
                try {
                    fs::create_directories(dir);
                    write_file(dir / "error.txt", std::string(e.what()) + "\n");
                    fs::remove(dir / "eval.json");
                } catch (const std::exception&) {
                    // The row is still reported as failed by aggregation.
                }
                say(queue[i].variant->name + " seed " + std::to_string(queue[i].seed) + " failed: " + e.what());
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, queue.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    auto table = aggregate_runs(grid, out);
    write_table(table, out);
    return table;
}

}  // namespace mixpt::run

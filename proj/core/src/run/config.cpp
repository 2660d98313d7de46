#include "mixpt/run/config.hpp"

#include <cstdlib>
#include <iomanip>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mixpt/digest.hpp"
#include "mixpt/error.hpp"
#include "mixpt/text.hpp"

namespace mixpt::run {

namespace pt = boost::property_tree;

RunConfig::RunConfig() {
    model.patch = 8;
    for (auto k : tasks::kAllKinds) mixture.push_back({tasks::kind_name(k), 1.0});
    eval_kinds.assign(tasks::kObjectAwareKinds.begin(), tasks::kObjectAwareKinds.end());
}

namespace {

template <typename V>
V convert(const std::string& section, const std::string& key, const std::string& raw) {
    std::istringstream in(text::trim(raw));
    V v{};
    in >> v;
    if (in.fail() || !in.eof()) throw ConfigError("[" + section + "] " + key + ": cannot parse '" + raw + "'");
    return v;
}

template <>
std::string convert<std::string>(const std::string&, const std::string&, const std::string& raw) {
    return text::trim(raw);
}

// Reads keys of one section, rejecting any that no handler claims.
class Section {
public:
    Section(const pt::ptree& root, std::string name) : name_(std::move(name)) {
        if (auto child = root.get_child_optional(name_)) tree_ = *child;
    }
    ~Section() = default;

    template <typename V>
    void get(const std::string& key, V& out) {
        seen_.insert(key);
        if (auto v = tree_.get_optional<std::string>(key)) out = convert<V>(name_, key, *v);
    }
    void check_unknown() const {
        for (const auto& [k, v] : tree_)
            if (!seen_.count(k)) throw ConfigError("unknown key [" + name_ + "] " + k);
    }
    const pt::ptree& tree() const { return tree_; }

private:
    std::string name_;
    pt::ptree tree_;
    std::set<std::string> seen_;
};

std::vector<std::size_t> parse_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    for (const auto& part : text::split(s, ',')) out.push_back(convert<std::size_t>("synth", "andor_k", part));
    return out;
}

std::vector<tasks::TaskKind> parse_kinds(const std::string& s) {
    std::vector<tasks::TaskKind> out;
    for (const auto& part : text::split(s, ',')) {
        const std::string name = text::trim(part);
        if (!name.empty()) out.push_back(tasks::parse_kind(name));
    }
    return out;
}

std::string fmt(double v) {
    std::ostringstream o;
    o << std::setprecision(17) << v;
    return o.str();
}

}  // namespace

RunConfig RunConfig::parse(const std::string& ini_text) {
    pt::ptree root;
    try {
        std::istringstream in(ini_text);
        pt::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    static const std::set<std::string> known{"run", "corpus", "synth", "mixture", "schedule", "model", "optim", "eval"};
    for (const auto& [name, child] : root) {
        if (!known.count(name)) throw ConfigError("unknown config section [" + name + "]");
        if (child.empty() && !child.data().empty()) throw ConfigError("key '" + name + "' outside any section");
    }

    RunConfig c;
    try {
        Section run(root, "run");
        run.get("seed", c.seed);
        run.get("eval_fraction", c.eval_fraction);
        run.check_unknown();

        Section cs(root, "corpus");
        std::string source = "synthetic", path;
        cs.get("source", source);
        cs.get("path", path);
        cs.get("n_images", c.n_images);
        cs.get("grid", c.grid);
        cs.get("cell_px", c.cell_px);
        cs.get("hidden_rate", c.hidden_rate);
        cs.check_unknown();
        if (source == "synthetic")
            c.corpus_source = CorpusSource::synthetic;
        else if (source == "directory")
            c.corpus_source = CorpusSource::directory;
        else
            throw ConfigError("[corpus] source must be synthetic or directory");
        c.corpus_path = path;

        Section sy(root, "synth");
        std::string policy = tasks::policy_name(c.synth.policy), object_source = corpus::to_string(c.synth.object_source);
        std::string andor = "2,3";
        sy.get("examples_per_kind", c.train_examples_per_kind);
        sy.get("policy", policy);
        sy.get("object_source", object_source);
        sy.get("mlm_mask_rate", c.synth.mlm_mask_rate);
        sy.get("mlm_mean_span", c.synth.mlm_mean_span);
        sy.get("completion_lo", c.synth.completion_lo);
        sy.get("completion_hi", c.synth.completion_hi);
        sy.get("andor_k", andor);
        sy.get("yes_no_balance", c.synth.yes_no_balance);
        sy.check_unknown();
        c.synth.policy = tasks::parse_policy(policy);
        c.synth.object_source = corpus::parse_object_source(object_source);
        c.synth.andor_k = parse_sizes(andor);

        if (auto mix = root.get_child_optional("mixture")) {
            c.mixture.clear();
            for (const auto& [k, v] : *mix) {
                tasks::parse_kind(k);
                c.mixture.push_back({k, convert<double>("mixture", k, v.data())});
            }
        }

        Section sc(root, "schedule");
        sc.get("total_steps", c.total_steps);
        sc.get("batch_size", c.batch_size);
        sc.check_unknown();

        Section md(root, "model");
        md.get("d_model", c.model.d_model);
        md.get("n_heads", c.model.n_heads);
        md.get("n_encoder_layers", c.model.n_encoder_layers);
        md.get("n_decoder_layers", c.model.n_decoder_layers);
        md.get("d_ff", c.model.d_ff);
        md.get("patch", c.model.patch);
        md.get("max_prompt", c.model.max_prompt);
        md.get("max_target", c.model.max_target);
        md.get("init_scale", c.model.init_scale);
        md.check_unknown();

        Section op(root, "optim");
        op.get("lr", c.optim.lr);
        op.get("beta1", c.optim.beta1);
        op.get("beta2", c.optim.beta2);
        op.get("eps", c.optim.eps);
        op.check_unknown();

        Section ev(root, "eval");
        std::string kinds, metric = eval::metric_name(c.metric), eval_policy = tasks::policy_name(c.eval_policy);
        ev.get("kinds", kinds);
        ev.get("policy", eval_policy);
        ev.get("examples_per_kind", c.eval_examples_per_kind);
        ev.get("metric", metric);
        ev.get("batch_size", c.eval_batch_size);
        ev.get("checkpoint_every", c.checkpoint_every);
        ev.check_unknown();
        if (!kinds.empty()) c.eval_kinds = parse_kinds(kinds);
        c.metric = eval::parse_metric(metric);
        c.eval_policy = tasks::parse_policy(eval_policy);
    } catch (const ConfigError&) {
        throw;
    } catch (const InputError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.synth.seed = c.seed;
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    return parse(read_file(path));
}

void RunConfig::validate() const {
    if (!(eval_fraction > 0 && eval_fraction < 1)) throw ConfigError("[run] eval_fraction must be in (0, 1)");
    if (corpus_source == CorpusSource::directory && corpus_path.empty())
        throw ConfigError("[corpus] path is required when source = directory");
    if (mixture.empty()) throw ConfigError("[mixture] needs at least one task");
    std::set<std::string> names;
    for (const auto& m : mixture)
        if (!names.insert(m.name).second) throw ConfigError("[mixture] lists " + m.name + " twice");
    if (total_steps == 0 || batch_size == 0) throw ConfigError("[schedule] total_steps and batch_size must be positive");
    if (train_examples_per_kind == 0 || eval_examples_per_kind == 0)
        throw ConfigError("examples_per_kind must be positive");
    if (eval_kinds.empty()) throw ConfigError("[eval] kinds is empty");
    if (eval_batch_size == 0) throw ConfigError("[eval] batch_size must be positive");
    synth.validate();
    auto m = model;
    m.image_size = image_size();
    m.vocab_size = 64;  // checked for real once the vocabulary exists
    m.validate();
    mixture::MixtureSpec spec(mixture);  // weight checks
}

std::vector<tasks::TaskKind> RunConfig::train_kinds() const {
    std::vector<tasks::TaskKind> out;
    for (const auto& m : mixture) out.push_back(tasks::parse_kind(m.name));
    return out;
}

corpus::SynthCorpusParams RunConfig::corpus_params() const {
    corpus::SynthCorpusParams p;
    p.seed = seed;
    p.n_images = n_images;
    p.object_vocab = corpus::default_object_vocab();
    p.grid = grid;
    p.cell_px = cell_px;
    p.hidden_rate = hidden_rate;
    return p;
}

std::string RunConfig::to_ini() const {
    std::ostringstream o;
    o << "[run]\nseed = " << seed << "\neval_fraction = " << fmt(eval_fraction) << "\n\n";
    o << "[corpus]\nsource = " << (corpus_source == CorpusSource::synthetic ? "synthetic" : "directory") << "\n";
    if (!corpus_path.empty()) o << "path = " << corpus_path.string() << "\n";
    o << "n_images = " << n_images << "\ngrid = " << grid << "\ncell_px = " << cell_px
      << "\nhidden_rate = " << fmt(hidden_rate) << "\n\n";
    std::string andor;
    for (auto k : synth.andor_k) andor += (andor.empty() ? "" : ",") + std::to_string(k);
    o << "[synth]\nexamples_per_kind = " << train_examples_per_kind << "\npolicy = " << tasks::policy_name(synth.policy)
      << "\nobject_source = " << corpus::to_string(synth.object_source) << "\nmlm_mask_rate = " << fmt(synth.mlm_mask_rate)
      << "\nmlm_mean_span = " << fmt(synth.mlm_mean_span) << "\ncompletion_lo = " << fmt(synth.completion_lo)
      << "\ncompletion_hi = " << fmt(synth.completion_hi) << "\nandor_k = " << andor
      << "\nyes_no_balance = " << fmt(synth.yes_no_balance) << "\n\n";
    o << "[mixture]\n";
    for (const auto& m : mixture) o << m.name << " = " << fmt(m.weight) << "\n";
    o << "\n[schedule]\ntotal_steps = " << total_steps << "\nbatch_size = " << batch_size << "\n\n";
    o << "[model]\nd_model = " << model.d_model << "\nn_heads = " << model.n_heads
      << "\nn_encoder_layers = " << model.n_encoder_layers << "\nn_decoder_layers = " << model.n_decoder_layers
      << "\nd_ff = " << model.d_ff << "\npatch = " << model.patch << "\nmax_prompt = " << model.max_prompt
      << "\nmax_target = " << model.max_target << "\ninit_scale = " << fmt(model.init_scale) << "\n\n";
    o << "[optim]\nlr = " << fmt(optim.lr) << "\nbeta1 = " << fmt(optim.beta1) << "\nbeta2 = " << fmt(optim.beta2)
      << "\neps = " << fmt(optim.eps) << "\n\n";
    std::string kinds;
    for (auto k : eval_kinds) kinds += (kinds.empty() ? "" : ",") + tasks::kind_name(k);
    o << "[eval]\nkinds = " << kinds << "\npolicy = " << tasks::policy_name(eval_policy) << "\nexamples_per_kind = " << eval_examples_per_kind
      << "\nmetric = " << eval::metric_name(metric) << "\nbatch_size = " << eval_batch_size
      << "\ncheckpoint_every = " << checkpoint_every << "\n";
    return o.str();
}

std::filesystem::path resolve_data_path(const std::filesystem::path& p) {
    if (p.empty() || p.is_absolute()) return p;
    if (const char* root = std::getenv("MIXPRETRAIN_DATA"); root && *root) return std::filesystem::path(root) / p;
    return p;
}

}  // namespace mixpt::run

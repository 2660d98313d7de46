#include "mixpt/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "mixpt/digest.hpp"
#include "mixpt/error.hpp"

namespace mixpt::model {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::string_view kMagic = "MPT1";
constexpr std::size_t kDigestLen = 64;

template <typename U>
void put(std::string& out, U v) {
    char buf[sizeof(U)];
    std::memcpy(buf, &v, sizeof(U));
    out.append(buf, sizeof(U));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename U>
    U get() {
        need(sizeof(U));
        U v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
        pos_ += sizeof(U);
        return v;
    }
    std::string_view take(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw IntegrityError("checkpoint truncated");
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

void put_array(std::string& out, const NamedArray& a) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
    out += a.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
    for (auto d : a.shape) put<std::uint64_t>(out, d);
    out.append(reinterpret_cast<const char*>(a.data.data()), a.data.size() * sizeof(float));
}

NamedArray get_array(Reader& r) {
    NamedArray a;
    a.name = std::string(r.take(r.get<std::uint32_t>()));
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw IntegrityError("implausible array rank in checkpoint");
    for (std::uint32_t i = 0; i < rank; ++i) a.shape.push_back(r.get<std::uint64_t>());
    const std::size_t n = nn::numel(a.shape);
    auto raw = r.take(n * sizeof(float));
    a.data.resize(n);
    std::memcpy(a.data.data(), raw.data(), raw.size());
    return a;
}

}  // namespace

bool Checkpoint::operator==(const Checkpoint& o) const {
    return config == o.config && vocab == o.vocab && vocab_fingerprint == o.vocab_fingerprint &&
           corpus_fingerprint == o.corpus_fingerprint && step == o.step && rng_state == o.rng_state &&
           adam.lr == o.adam.lr && adam.beta1 == o.adam.beta1 && adam.beta2 == o.adam.beta2 &&
           adam.eps == o.adam.eps && adam_steps == o.adam_steps && params == o.params &&
           first_moments == o.first_moments && second_moments == o.second_moments;
}

std::string serialize_checkpoint(const Checkpoint& c) {
    if (c.first_moments.size() != c.params.size() || c.second_moments.size() != c.params.size())
        throw InputError("optimizer moments do not match parameters");
    nlohmann::json header = {
        {"config", c.config.to_json()},
        {"vocab", c.vocab},
        {"vocab_fingerprint", c.vocab_fingerprint},
        {"corpus_fingerprint", c.corpus_fingerprint},
        {"step", c.step},
        {"rng_state", c.rng_state},
        {"adam", {{"lr", c.adam.lr}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps},
                  {"steps", c.adam_steps}}},
        {"arrays", c.params.size()},
    };
    const std::string h = header.dump();
    std::string payload;
    for (const auto* set : {&c.params, &c.first_moments, &c.second_moments})
        for (const auto& a : *set) put_array(payload, a);

    std::string out(kMagic);
    put<std::uint32_t>(out, Checkpoint::kVersion);
    put<std::uint64_t>(out, h.size());
    out += h;
    put<std::uint64_t>(out, payload.size());
    out += payload;
    out += sha256_hex(out);
    return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
    Reader r(bytes);
    if (r.take(kMagic.size()) != kMagic) throw IntegrityError("not a checkpoint (bad magic)");
    const auto version = r.get<std::uint32_t>();
    if (version != Checkpoint::kVersion)
        throw VersionError("checkpoint version " + std::to_string(version) + " unsupported (reader is version " +
                           std::to_string(Checkpoint::kVersion) + ")");
    if (bytes.size() < kDigestLen) throw IntegrityError("checkpoint truncated");
    const auto body = bytes.substr(0, bytes.size() - kDigestLen);
    if (sha256_hex(body) != bytes.substr(body.size()))
        throw IntegrityError("checkpoint digest mismatch (file corrupt or truncated)");

    Checkpoint c;
    Reader br(body);
    br.take(kMagic.size() + sizeof(std::uint32_t));
    const auto hlen = br.get<std::uint64_t>();
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(br.take(hlen));
        c.config = ModelConfig::from_json(header.at("config"));
        c.vocab = header.at("vocab").get<std::vector<std::string>>();
        c.vocab_fingerprint = header.at("vocab_fingerprint").get<std::string>();
        c.corpus_fingerprint = header.at("corpus_fingerprint").get<std::string>();
        c.step = header.at("step").get<std::uint64_t>();
        c.rng_state = header.at("rng_state").get<std::string>();
        const auto& a = header.at("adam");
        c.adam = {a.at("lr").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
                  a.at("eps").get<double>()};
        c.adam_steps = a.at("steps").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("bad checkpoint header: ") + e.what());
    }
    const auto n = header.at("arrays").get<std::size_t>();
    const auto plen = br.get<std::uint64_t>();
    const std::size_t payload_start = br.pos();
    for (auto* set : {&c.params, &c.first_moments, &c.second_moments})
        for (std::size_t i = 0; i < n; ++i) set->push_back(get_array(br));
    if (br.pos() - payload_start != plen || !br.done()) throw IntegrityError("checkpoint payload length mismatch");
    return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    auto tmp = path;
    tmp += ".tmp";
    write_file(tmp, serialize_checkpoint(ckpt));
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path)); }

void check_fingerprints(const Checkpoint& ckpt, const std::string& vocab_fp, const std::string& corpus_fp) {
    if (!vocab_fp.empty() && ckpt.vocab_fingerprint != vocab_fp)
        throw FingerprintError("vocabulary fingerprint mismatch: checkpoint " + ckpt.vocab_fingerprint + ", data " +
                               vocab_fp);
    if (!corpus_fp.empty() && ckpt.corpus_fingerprint != corpus_fp)
        throw FingerprintError("corpus fingerprint mismatch: checkpoint " + ckpt.corpus_fingerprint + ", data " +
                               corpus_fp);
}

std::vector<NamedArray> export_params(const nn::ParameterSet<float>& params) {
    std::vector<NamedArray> out;
    for (std::size_t i = 0; i < params.size(); ++i)
        out.push_back({params[i].name, params[i].value.shape, params[i].value.data});
    return out;
}

void import_params(nn::ParameterSet<float>& params, const std::vector<NamedArray>& arrays) {
    if (arrays.size() != params.size())
        throw ShapeError("checkpoint has " + std::to_string(arrays.size()) + " arrays, model has " +
                         std::to_string(params.size()));
    for (std::size_t i = 0; i < arrays.size(); ++i) {
        auto& p = params[i];
        if (p.name != arrays[i].name || p.value.shape != arrays[i].shape)
            throw ShapeError("checkpoint array " + arrays[i].name + nn::shape_str(arrays[i].shape) +
                             " does not match parameter " + p.name + nn::shape_str(p.value.shape));
        p.value.data = arrays[i].data;
    }
}

}  // namespace mixpt::model

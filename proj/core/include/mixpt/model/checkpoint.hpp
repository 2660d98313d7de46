#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mixpt/model/config.hpp"
#include "mixpt/model/transformer.hpp"
#include "mixpt/nn/adam.hpp"

namespace mixpt::model {

struct NamedArray {
    std::string name;
    nn::Shape shape;
    std::vector<float> data;

    bool operator==(const NamedArray&) const = default;
};

// On disk: "MPT1", u32 version, u64 header length, header JSON, u64 payload
// length, payload, then the hex SHA-256 of everything before it. The payload
// holds the parameter arrays followed by both optimizer moment sets, all
// little-endian f32.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    ModelConfig config;
    std::vector<std::string> vocab;
    std::string vocab_fingerprint;
    std::string corpus_fingerprint;
    std::uint64_t step = 0;
    std::string rng_state;
    nn::AdamConfig adam;
    std::uint64_t adam_steps = 0;
    std::vector<NamedArray> params;
    std::vector<NamedArray> first_moments;
    std::vector<NamedArray> second_moments;

    bool operator==(const Checkpoint& o) const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
// IntegrityError on bad magic, truncation or digest mismatch; VersionError on
// a version other than kVersion.
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// FingerprintError when either fingerprint differs. Empty expectations skip the check.
void check_fingerprints(const Checkpoint& ckpt, const std::string& vocab_fp, const std::string& corpus_fp);

std::vector<NamedArray> export_params(const nn::ParameterSet<float>& params);
void import_params(nn::ParameterSet<float>& params, const std::vector<NamedArray>& arrays);

}  // namespace mixpt::model

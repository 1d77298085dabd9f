#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sgdf::model {

enum class BlockKind { naf, res };
enum class AttentionKind { nrca, vanilla };
enum class PropagationKind { nsa, conv };
enum class FusionKind { svff, add, concat, attention };
enum class FfnNorm { post, pre };

std::string to_string(BlockKind k);
std::string to_string(AttentionKind k);
std::string to_string(PropagationKind k);
std::string to_string(FusionKind k);
std::string to_string(FfnNorm k);
BlockKind block_kind_from_string(const std::string& s);
AttentionKind attention_kind_from_string(const std::string& s);
PropagationKind propagation_kind_from_string(const std::string& s);
FusionKind fusion_kind_from_string(const std::string& s);
FfnNorm ffn_norm_from_string(const std::string& s);

// Three-scale U-shaped extractor: stages (enc1, enc2, bottom, dec2, dec1),
// channel widths C*mult per scale.
struct EncoderConfig {
    std::array<int, 5> blocks = {1, 1, 2, 1, 1};
    std::array<int, 3> width_mults = {1, 2, 4};
    BlockKind block = BlockKind::naf;
};

struct FusionConfig {
    FusionKind kind = FusionKind::svff;
    // Trunk width of the add/concat/attention baselines; 0 picks the default
    // that matches the svff parameter budget. Ignored by svff.
    int hidden_override = 0;
};

struct ModelConfig {
    int channels = 32;        // C: feature width at full scale
    int max_disparity = 128;  // D: disparity bins at full resolution
    int num_blocks = 1;       // L: stacked transformer blocks
    int nsa_window = 5;       // k
    EncoderConfig encoder;
    AttentionKind attention = AttentionKind::nrca;
    PropagationKind propagation = PropagationKind::nsa;
    FusionConfig fusion;
    int ffn_expansion = 2;
    bool nsa_positional_bias = false;
    bool residual_head = true;
    FfnNorm ffn_norm = FfnNorm::post;
    // pairing[t] = guidance channel used for target channel t. Empty means
    // automatic: single-channel guidance serves every target channel,
    // otherwise same-index pairing.
    std::vector<int> pairing;

    void validate() const;
    std::string config_hash() const;  // 16 hex chars over the canonical JSON

    static ModelConfig toy();       // C=16, D=32 desk-scale preset
    static ModelConfig ablation();  // C=12, D=16 grid preset
};

void to_json(nlohmann::json& j, const EncoderConfig& e);
void from_json(const nlohmann::json& j, EncoderConfig& e);
void to_json(nlohmann::json& j, const FusionConfig& f);
void from_json(const nlohmann::json& j, FusionConfig& f);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Baseline trunk width giving parameter parity with svff at width C.
int fusion_default_hidden(FusionKind kind, int channels);

}  // namespace sgdf::model

#include "sgdf/model/config.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace sgdf::model {

std::string to_string(BlockKind k) { return k == BlockKind::naf ? "naf" : "res"; }
std::string to_string(AttentionKind k) {
    return k == AttentionKind::nrca ? "nrca" : "vanilla";
}
std::string to_string(PropagationKind k) {
    return k == PropagationKind::nsa ? "nsa" : "conv";
}
std::string to_string(FusionKind k) {
    switch (k) {
        case FusionKind::svff: return "svff";
        case FusionKind::add: return "add";
        case FusionKind::concat: return "concat";
        case FusionKind::attention: return "attention";
    }
    throw std::logic_error("unreachable fusion kind");
}
std::string to_string(FfnNorm k) { return k == FfnNorm::post ? "post" : "pre"; }

namespace {
[[noreturn]] void bad_enum(const std::string& what, const std::string& s) {
    throw std::invalid_argument("unknown " + what + ": '" + s + "'");
}
}  // namespace

BlockKind block_kind_from_string(const std::string& s) {
    if (s == "naf") return BlockKind::naf;
    if (s == "res") return BlockKind::res;
    bad_enum("block kind", s);
}
AttentionKind attention_kind_from_string(const std::string& s) {
    if (s == "nrca") return AttentionKind::nrca;
    if (s == "vanilla") return AttentionKind::vanilla;
    bad_enum("attention kind", s);
}
PropagationKind propagation_kind_from_string(const std::string& s) {
    if (s == "nsa") return PropagationKind::nsa;
    if (s == "conv") return PropagationKind::conv;
    bad_enum("propagation kind", s);
}
FusionKind fusion_kind_from_string(const std::string& s) {
    if (s == "svff") return FusionKind::svff;
    if (s == "add") return FusionKind::add;
    if (s == "concat") return FusionKind::concat;
    if (s == "attention") return FusionKind::attention;
    bad_enum("fusion kind", s);
}
FfnNorm ffn_norm_from_string(const std::string& s) {
    if (s == "post") return FfnNorm::post;
    if (s == "pre") return FfnNorm::pre;
    bad_enum("ffn norm placement", s);
}

void ModelConfig::validate() const {
    if (channels < 2) throw std::invalid_argument("channels must be >= 2");
    if (max_disparity < 4 || max_disparity % 4 != 0)
        throw std::invalid_argument("max_disparity must be a positive multiple of 4, got " +
                                    std::to_string(max_disparity));
    if (num_blocks < 1) throw std::invalid_argument("num_blocks must be >= 1");
    if (nsa_window < 1 || nsa_window % 2 == 0)
        throw std::invalid_argument("nsa_window must be odd, got " +
                                    std::to_string(nsa_window));
    for (const int b : encoder.blocks)
        if (b < 1) throw std::invalid_argument("encoder block counts must be >= 1");
    for (const int m : encoder.width_mults)
        if (m < 1) throw std::invalid_argument("encoder width multipliers must be >= 1");
    if (ffn_expansion < 1) throw std::invalid_argument("ffn_expansion must be >= 1");
    if (fusion.hidden_override < 0)
        throw std::invalid_argument("fusion hidden_override must be >= 0");
    for (const int p : pairing)
        if (p < 0) throw std::invalid_argument("pairing entries must be >= 0");
}

std::string ModelConfig::config_hash() const {
    nlohmann::json j = *this;
    const std::string canon = j.dump();
    // FNV-1a, stable across runs (std::hash is not guaranteed stable).
    std::uint64_t h = 1469598103934665603ull;
    for (const unsigned char ch : canon) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::ostringstream out;
    out << std::hex;
    for (int i = 15; i >= 0; --i) out << "0123456789abcdef"[(h >> (4 * i)) & 0xf];
    return out.str();
}

ModelConfig ModelConfig::toy() {
    ModelConfig c;
    c.channels = 16;
    c.max_disparity = 32;
    c.num_blocks = 1;
    return c;
}

ModelConfig ModelConfig::ablation() {
    ModelConfig c;
    c.channels = 12;
    c.max_disparity = 16;
    c.num_blocks = 1;
    return c;
}

void to_json(nlohmann::json& j, const EncoderConfig& e) {
    j = nlohmann::json{{"blocks", e.blocks},
                       {"width_mults", e.width_mults},
                       {"block", to_string(e.block)}};
}

void from_json(const nlohmann::json& j, EncoderConfig& e) {
    e.blocks = j.value("blocks", EncoderConfig{}.blocks);
    e.width_mults = j.value("width_mults", EncoderConfig{}.width_mults);
    e.block = block_kind_from_string(j.value("block", std::string("naf")));
}

void to_json(nlohmann::json& j, const FusionConfig& f) {
    j = nlohmann::json{{"kind", to_string(f.kind)}, {"hidden_override", f.hidden_override}};
}

void from_json(const nlohmann::json& j, FusionConfig& f) {
    f.kind = fusion_kind_from_string(j.value("kind", std::string("svff")));
    f.hidden_override = j.value("hidden_override", 0);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"channels", c.channels},
                       {"max_disparity", c.max_disparity},
                       {"num_blocks", c.num_blocks},
                       {"nsa_window", c.nsa_window},
                       {"encoder", c.encoder},
                       {"attention", to_string(c.attention)},
                       {"propagation", to_string(c.propagation)},
                       {"fusion", c.fusion},
                       {"ffn_expansion", c.ffn_expansion},
                       {"nsa_positional_bias", c.nsa_positional_bias},
                       {"residual_head", c.residual_head},
                       {"ffn_norm", to_string(c.ffn_norm)},
                       {"pairing", c.pairing}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    const ModelConfig defaults;
    c.channels = j.value("channels", defaults.channels);
    c.max_disparity = j.value("max_disparity", defaults.max_disparity);
    c.num_blocks = j.value("num_blocks", defaults.num_blocks);
    c.nsa_window = j.value("nsa_window", defaults.nsa_window);
    c.encoder = j.value("encoder", defaults.encoder);
    c.attention = attention_kind_from_string(j.value("attention", std::string("nrca")));
    c.propagation = propagation_kind_from_string(j.value("propagation", std::string("nsa")));
    c.fusion = j.value("fusion", defaults.fusion);
    c.ffn_expansion = j.value("ffn_expansion", defaults.ffn_expansion);
    c.nsa_positional_bias = j.value("nsa_positional_bias", defaults.nsa_positional_bias);
    c.residual_head = j.value("residual_head", defaults.residual_head);
    c.ffn_norm = ffn_norm_from_string(j.value("ffn_norm", std::string("post")));
    c.pairing = j.value("pairing", defaults.pairing);
}

int fusion_default_hidden(FusionKind kind, int channels) {
    // Budget target is svff's parameter count 81C^2 + 5C; solving for the
    // two-conv trunk width of each baseline keeps every strategy within a few
    // tenths of a percent of it.
    const double c = channels;
    const double budget = 72.0 * c * c + 3.0 * c;
    switch (kind) {
        case FusionKind::svff: return 0;
        case FusionKind::add: return std::max(1, static_cast<int>(std::lround(budget / (18.0 * c + 1.0))));
        case FusionKind::concat:
        case FusionKind::attention:
            return std::max(1, static_cast<int>(std::lround(budget / (27.0 * c + 1.0))));
    }
    throw std::logic_error("unreachable fusion kind");
}

}  // namespace sgdf::model

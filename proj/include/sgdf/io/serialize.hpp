#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgdf/core/tensor.hpp"
#include "sgdf/model/sgdformer.hpp"

namespace sgdf::io {

// Keyed float32 tensor archive. On disk: magic "SGDF1\n", an 8-byte
// little-endian header length, a JSON header (free-form meta plus a tensor
// index of name/shape/offset), then the concatenated raw little-endian
// float32 payload.
class TensorArchive {
public:
    nlohmann::json meta;

    void add(const std::string& name, Tensor<float> t);
    bool has(const std::string& name) const;
    const Tensor<float>& get(const std::string& name) const;
    const std::vector<std::pair<std::string, Tensor<float>>>& entries() const {
        return entries_;
    }

    void save(const std::string& path) const;
    static TensorArchive load(const std::string& path);

private:
    std::vector<std::pair<std::string, Tensor<float>>> entries_;
};

inline constexpr char kArchiveMagic[] = "SGDF1\n";

// Checkpoint = archive whose meta carries the model config and whose entries
// are the parameter tensors under their registration names.
void save_checkpoint(const std::string& path, const model::Sgdformer& m,
                     const nlohmann::json& extra_meta = nlohmann::json::object());
model::Sgdformer load_checkpoint(const std::string& path);

}  // namespace sgdf::io

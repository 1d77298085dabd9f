#include "sgdf/io/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "archive payload is raw little-endian float32");

namespace sgdf::io {

void TensorArchive::add(const std::string& name, Tensor<float> t) {
    if (has(name)) throw std::invalid_argument("archive already holds tensor: " + name);
    entries_.emplace_back(name, std::move(t));
}

bool TensorArchive::has(const std::string& name) const {
    for (const auto& [n, t] : entries_)
        if (n == name) return true;
    return false;
}

const Tensor<float>& TensorArchive::get(const std::string& name) const {
    for (const auto& [n, t] : entries_)
        if (n == name) return t;
    throw std::out_of_range("archive has no tensor named: " + name);
}

void TensorArchive::save(const std::string& path) const {
    nlohmann::json header;
    header["meta"] = meta;
    nlohmann::json index = nlohmann::json::array();
    std::uint64_t offset = 0;  // counted in floats, not bytes
    for (const auto& [name, t] : entries_) {
        index.push_back({{"name", name},
                         {"shape", {t.shape().h, t.shape().w, t.shape().c}},
                         {"offset", offset}});
        offset += t.size();
    }
    header["tensors"] = index;
    const std::string hs = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(kArchiveMagic, 6);
    const std::uint64_t hlen = hs.size();
    f.write(reinterpret_cast<const char*>(&hlen), 8);
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : entries_)
        f.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!f) throw std::runtime_error("write failed: " + path);
}

TensorArchive TensorArchive::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    char magic[6];
    f.read(magic, 6);
    if (!f || std::memcmp(magic, kArchiveMagic, 6) != 0)
        throw std::runtime_error(path + " is not a SGDF1 tensor archive");
    std::uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 8);
    std::string hs(hlen, '\0');
    f.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw std::runtime_error("truncated archive header: " + path);
    const nlohmann::json header = nlohmann::json::parse(hs);

    TensorArchive a;
    a.meta = header.value("meta", nlohmann::json::object());
    for (const auto& e : header.at("tensors")) {
        const auto sh = e.at("shape");
        Tensor<float> t(Shape{sh.at(0).get<int>(), sh.at(1).get<int>(), sh.at(2).get<int>()});
        f.read(reinterpret_cast<char*>(t.data()),
               static_cast<std::streamsize>(t.size() * sizeof(float)));
        if (!f) throw std::runtime_error("truncated archive payload: " + path);
        a.entries_.emplace_back(e.at("name").get<std::string>(), std::move(t));
    }
    return a;
}

void save_checkpoint(const std::string& path, const model::Sgdformer& m,
                     const nlohmann::json& extra_meta) {
    TensorArchive a;
    a.meta = extra_meta;
    a.meta["config"] = m.config;
    for (int id = 0; id < m.params.size(); ++id) {
        const auto& e = m.params.entry(id);
        a.add(e.name, e.value);
    }
    a.save(path);
}

model::Sgdformer load_checkpoint(const std::string& path) {
    const TensorArchive a = TensorArchive::load(path);
    if (!a.meta.contains("config"))
        throw std::runtime_error("archive is not a model checkpoint (no config): " + path);
    const auto cfg = a.meta.at("config").get<model::ModelConfig>();
    model::Sgdformer m = model::make_sgdformer(cfg, 0);
    for (int id = 0; id < m.params.size(); ++id) {
        auto& e = m.params.entry(id);
        const Tensor<float>& stored = a.get(e.name);
        if (stored.shape() != e.value.shape())
            throw std::runtime_error("checkpoint tensor " + e.name + " has shape " +
                                     stored.shape().str() + ", model expects " +
                                     e.value.shape().str());
        e.value = stored;
    }
    return m;
}

}  // namespace sgdf::io

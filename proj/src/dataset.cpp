#include "sgdf/data/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <stdexcept>

#include "sgdf/data/image_io.hpp"

namespace fs = std::filesystem;

namespace sgdf::data {
namespace {

bool strip_suffix(const std::string& name, const std::string& suffix, std::string* stem) {
    if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(),
                                                     suffix.size(), suffix) != 0)
        return false;
    *stem = name.substr(0, name.size() - suffix.size());
    return true;
}

}  // namespace

std::vector<NamedPair> load_pair_folder(const std::string& dir, const FolderLayout& layout) {
    if (!fs::is_directory(dir))
        throw std::runtime_error("not a directory: " + dir);
    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string stem;
        if (strip_suffix(entry.path().filename().string(), layout.target_suffix, &stem))
            stems.push_back(stem);
    }
    std::sort(stems.begin(), stems.end());

    std::vector<NamedPair> out;
    out.reserve(stems.size());
    for (const auto& stem : stems) {
        const fs::path base = fs::path(dir) / stem;
        const std::string target_path = base.string() + layout.target_suffix;
        const std::string guide_path = base.string() + layout.guidance_suffix;
        const std::string clean_path = base.string() + layout.clean_suffix;
        if (!fs::exists(guide_path))
            throw std::runtime_error("pair '" + stem + "' is missing its guidance image " +
                                     guide_path);
        NamedPair np;
        np.id = stem;
        np.pair.target = read_pnm(target_path);
        np.pair.guidance = read_pnm(guide_path);
        const Shape t = np.pair.target.shape();
        const Shape g = np.pair.guidance.shape();
        if (t.h != g.h || t.w != g.w)
            throw std::runtime_error("pair '" + stem + "' has mismatched sizes: target " +
                                     t.str() + " vs guidance " + g.str());
        np.pair.clean_target = fs::exists(clean_path) ? read_pnm(clean_path) : np.pair.target;
        if (np.pair.clean_target.shape() != t)
            throw std::runtime_error("pair '" + stem + "' has mismatched clean image shape");
        out.push_back(std::move(np));
    }
    return out;
}

void write_pair(const std::string& dir, const std::string& id, const ImagePair& pair,
                const FolderLayout& layout) {
    fs::create_directories(dir);
    const fs::path base = fs::path(dir) / id;
    write_pnm(base.string() + layout.target_suffix, pair.target, 8);
    write_pnm(base.string() + layout.guidance_suffix, pair.guidance, 8);
    if (pair.has_clean() && pair.clean_target.vec() != pair.target.vec())
        write_pnm(base.string() + layout.clean_suffix, pair.clean_target, 8);
}

}  // namespace sgdf::data

#pragma once

#include <string>
#include <vector>

#include "sgdf/data/synth.hpp"

namespace sgdf::data {

// Filename convention for a folder of stereo pairs: every file named
// <stem><target_suffix> must have a sibling <stem><guidance_suffix>;
// <stem><clean_suffix> is optional. Pairs without ground truth reuse the
// target as its own reference.
struct FolderLayout {
    std::string target_suffix = "_target.pgm";
    std::string guidance_suffix = "_guide.pgm";
    std::string clean_suffix = "_clean.pgm";
};

struct NamedPair {
    std::string id;
    ImagePair pair;
};

// Scans dir for pairs per the layout, sorted by stem. Throws on an unmatched
// target or mismatched H x W between the views of one pair.
std::vector<NamedPair> load_pair_folder(const std::string& dir, const FolderLayout& layout);

// Writes pair images under dir with the layout's suffixes (8-bit files).
// clean_target is written only when it differs from target.
void write_pair(const std::string& dir, const std::string& id, const ImagePair& pair,
                const FolderLayout& layout);

}  // namespace sgdf::data

#pragma once

#include <map>
#include <string>
#include <vector>

#include "countvqa/records.hpp"

namespace cvqa {

/// Binary object-feature container:
///   magic "IRLCFEAT", version u32, then per image:
///     image-id length u32 + bytes, N u32, d_v u32, width f32, height f32,
///     N x 4 f32 boxes, N x d_v f32 features;
///   all little-endian, with a trailing CRC32 of every preceding byte.
/// Round-trips bit-exactly (f32 payloads compare equal after reload).
void write_features(const std::vector<SceneRecord>& scenes, const std::string& path);

std::vector<SceneRecord> read_features(const std::string& path);

/// Sidecar ground-truth labels for labeled datasets (synthetic scenes or
/// detection-style annotations): categories plus per-image gt boxes and
/// per-proposal source labels.
void write_labels(const std::vector<SceneRecord>& scenes,
                  const std::vector<std::string>& categories, const std::string& path);

struct LabelFile {
    std::vector<std::string> categories;
    std::map<std::string, std::pair<std::vector<int>, std::vector<GtObject>>> by_image;
};

LabelFile read_labels(const std::string& path);
void apply_labels(const LabelFile& labels, std::vector<SceneRecord>& scenes);

}  // namespace cvqa

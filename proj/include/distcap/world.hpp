// Synthetic scenes, templated ground-truth captions, neighbor mining.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "distcap/common.hpp"
#include "distcap/vocab.hpp"

namespace distcap {

enum class Provenance { kGroundTruth, kGreedy, kBeam };

struct Caption {
  std::vector<TokenId> tokens;  // BOS-framed: tokens.front()==kBos, tokens.back()==kEos
  Provenance provenance = Provenance::kGroundTruth;
  SceneId scene_id = -1;
};

// Tokens with the BOS/EOS frame removed.
std::vector<TokenId> content_tokens(const std::vector<TokenId>& tokens);

struct Scene {
  SceneId id = -1;
  std::array<int, Schema::kAttributeCount> attributes{};
  Vec embedding;  // filled by the retriever; empty until then
};

// Per-attribute mention probability. Object and color must be 1.
using SalienceProfile = std::array<double, Schema::kAttributeCount>;

struct WorldDataset {
  std::vector<Scene> scenes;
  std::vector<Caption> gt_captions;                // one per scene, same index
  std::vector<std::vector<SceneId>> neighbor_lists;  // filled by mine_similar_images
  int n_train = 0;  // scenes[0..n_train) are train, the rest test

  int n_scenes() const { return static_cast<int>(scenes.size()); }
  bool is_train(SceneId id) const { return id >= 0 && id < n_train; }
};

// Deterministic in (seed, n_scenes, profile, n_test). Attribute tuples are
// rejection-sampled to be pairwise distinct, so caption collisions come only
// from attributes hidden by the salience draw.
WorldDataset generate_world(uint64_t seed, int n_scenes, const SalienceProfile& profile,
                            int n_test = 0);

// Template realization of the mentioned attribute subset. Pure in
// (scene.id, scene.attributes, mentioned); mandatory attributes required.
Caption render_caption(const Scene& scene, const std::array<bool, Schema::kAttributeCount>& mentioned);

// For each scene the m most cosine-similar other scenes, ties by lower id.
// Requires embeddings; runs once, outside any training loop.
std::vector<std::vector<SceneId>> mine_similar_images(const WorldDataset& dataset, int m);

// Line-delimited text format, embeddings excluded (reconstructed from seed).
void save_world(const WorldDataset& dataset, const std::string& path);
WorldDataset load_world(const std::string& path);

std::string caption_to_string(const std::vector<TokenId>& tokens);

}  // namespace distcap

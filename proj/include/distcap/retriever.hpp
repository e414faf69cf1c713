// Frozen analytic dual encoder: aligned text/image projections with seeded
// noise, unit-norm embeddings, similarity and recall@k.
#pragma once

#include <string>
#include <vector>

#include "distcap/common.hpp"
#include "distcap/vocab.hpp"
#include "distcap/world.hpp"

namespace distcap {

struct RetrieverParams {
  Mat text_projection;   // |V| x d, one row per token
  Mat image_projection;  // 48 x d, one row per attribute-value
  double noise_amplitude = 0.1;
  bool frozen = true;

  int dim() const { return static_cast<int>(text_projection.cols()); }
};

// Attribute-value rows share an orthonormal base between the two projections;
// both sides then get independent seeded noise of the given amplitude.
// Function-word and BOS/EOS text rows are noise only. Requires d >= 48.
RetrieverParams build_retriever(uint64_t seed, int d = 64, double noise_amplitude = 0.1);

// Normalized sum over distinct content-token rows. Throws when the caption
// has no content tokens (a zero vector cannot be normalized).
Vec embed_text(const std::vector<TokenId>& tokens, const RetrieverParams& params);

// Normalized sum of the scene's six attribute-value rows.
Vec embed_image(const Scene& scene, const RetrieverParams& params);

Scalar similarity(const Vec& a, const Vec& b);

// Fraction of queries whose paired gallery row ranks in the top k by dot
// product; ties resolve toward lower gallery index.
Scalar recall_at_k(const Mat& queries, const Mat& gallery, const std::vector<int>& pairing,
                   int k);

uint64_t retriever_hash(const RetrieverParams& params);

void save_retriever(const RetrieverParams& params, const std::string& path);
RetrieverParams load_retriever(const std::string& path);

// Fills scene.embedding for every scene in place.
void embed_world(WorldDataset& dataset, const RetrieverParams& params);

// Image-embedding cache, one row per scene in id order. The cache is
// redundant with (world, retriever) and exists to make runs self-describing;
// load_embeddings validates ids and dimensions against the dataset.
void save_embeddings(const WorldDataset& dataset, const std::string& path);
void load_embeddings(WorldDataset& dataset, const std::string& path);

}  // namespace distcap

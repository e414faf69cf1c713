#include "distcap/rewards.hpp"

#include "distcap/math.hpp"

namespace distcap {

int NegativePools::own_image_row(SceneId scene) const {
  auto it = image_row.find(scene);
  if (it == image_row.end())
    throw std::invalid_argument("reward pools: scene has no image row");
  return it->second;
}

void NegativePools::validate() const {
  if (texts.rows() % 3 != 0 || texts.rows() == 0)
    throw std::invalid_argument("reward pools: texts must hold three rows per batch item");
  if (static_cast<Eigen::Index>(text_provenance.size()) != texts.rows() ||
      static_cast<Eigen::Index>(text_scene.size()) != texts.rows())
    throw std::invalid_argument("reward pools: text metadata size mismatch");
  if (static_cast<Eigen::Index>(image_scene.size()) != images.rows())
    throw std::invalid_argument("reward pools: image metadata size mismatch");
  if (image_row.size() != image_scene.size())
    throw std::invalid_argument("reward pools: duplicate image scene ids");
  for (int i = 0; i < batch_size(); ++i) {
    if (text_provenance[text_row(i, kBeamSlot)] != Provenance::kBeam ||
        text_provenance[text_row(i, kGreedySlot)] != Provenance::kGreedy ||
        text_provenance[text_row(i, kGtSlot)] != Provenance::kGroundTruth)
      throw std::invalid_argument("reward pools: slot order must be beam, greedy, gt");
  }
}

Scalar contrastive_gap(Scalar positive_similarity, const Vec& negative_similarities,
                       Scalar tau) {
  if (tau <= 0) throw std::invalid_argument("contrastive reward: tau must be positive");
  if (negative_similarities.size() == 0)
    throw std::invalid_argument("contrastive reward: empty negative set");
  return positive_similarity - tempered_lse(negative_similarities, tau);
}

namespace {

Vec drop_row(const Vec& values, int row) {
  Vec out(values.size() - 1);
  int k = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (i != row) out[k++] = values[i];
  return out;
}

}  // namespace

Scalar reward_i2t(const Mat& text_pool, int candidate_row, const Vec& own_image, Scalar tau,
                  Scalar* baseline) {
  if (candidate_row < 0 || candidate_row >= text_pool.rows())
    throw std::invalid_argument("reward_i2t: candidate row outside pool");
  Vec sims = text_pool * own_image;
  Vec negatives = drop_row(sims, candidate_row);
  Scalar r = contrastive_gap(sims[candidate_row], negatives, tau);
  if (baseline) *baseline = sims[candidate_row] - r;
  return r;
}

Scalar reward_t2i(const Mat& image_pool, int own_image_row, const Vec& candidate_text,
                  Scalar tau, Scalar* baseline) {
  if (own_image_row < 0 || own_image_row >= image_pool.rows())
    throw std::invalid_argument("reward_t2i: image row outside pool");
  Vec sims = image_pool * candidate_text;
  Vec negatives = drop_row(sims, own_image_row);
  Scalar r = contrastive_gap(sims[own_image_row], negatives, tau);
  if (baseline) *baseline = sims[own_image_row] - r;
  return r;
}

RewardBreakdown bidirectional_reward(const NegativePools& pools, int candidate_text_row,
                                     const RewardConfig& config) {
  if (candidate_text_row < 0 || candidate_text_row >= pools.texts.rows())
    throw std::invalid_argument("bidirectional_reward: candidate row outside pool");
  SceneId scene = pools.text_scene[candidate_text_row];
  int img_row = pools.own_image_row(scene);
  Vec own_image = pools.images.row(img_row).transpose();
  Vec candidate = pools.texts.row(candidate_text_row).transpose();

  RewardBreakdown out;
  if (config.scst_greedy_only) {
    // Negatives collapse to the item's own greedy caption; the tempered LSE
    // of a singleton is its value, so this is the plain SCST difference.
    int item = candidate_text_row / 3;
    int greedy_row = pools.text_row(item, NegativePools::kGreedySlot);
    Scalar pos = candidate.dot(own_image);
    Vec negative(1);
    negative[0] = pools.texts.row(greedy_row) * own_image;
    out.r_i2t = contrastive_gap(pos, negative, config.tau);
    out.effective_text_baseline = pos - out.r_i2t;
  } else {
    out.r_i2t = reward_i2t(pools.texts, candidate_text_row, own_image, config.tau,
                           &out.effective_text_baseline);
  }

  if (!config.unidirectional && !config.scst_greedy_only) {
    out.r_t2i = reward_t2i(pools.images, img_row, candidate, config.tau,
                           &out.effective_image_baseline);
  }
  out.r_bicont = out.r_i2t + out.r_t2i;
  return out;
}

Scalar combined_reward(Scalar r_sim, Scalar p_d, Scalar alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("combined_reward: alpha must lie in [0,1]");
  return alpha * r_sim + (1.0 - alpha) * p_d;
}

Scalar lse_max_gap(const Vec& similarities, Scalar tau) {
  return tempered_lse(similarities, tau) - similarities.maxCoeff();
}

}  // namespace distcap

// Bidirectional decoupled contrastive rewards over batch-level negative
// pools, the discriminator mixing rule, and LSE-vs-max diagnostics.
#pragma once

#include <unordered_map>
#include <vector>

#include "distcap/common.hpp"
#include "distcap/world.hpp"

namespace distcap {

struct RewardConfig {
  Scalar alpha = 0.94;  // contrastive weight in the combined reward
  Scalar tau = 0.05;    // contrastive temperature
  bool unidirectional = false;   // drop the text-to-image direction
  bool scst_greedy_only = false;  // restrict negatives to the item's own greedy
                                  // caption; implies no text-to-image term
};

// Text rows are packed per batch item as [beam, greedy, gt]; image rows are
// the batch scenes followed by mined neighbors, deduplicated by scene id.
struct NegativePools {
  Mat texts;
  std::vector<Provenance> text_provenance;
  std::vector<SceneId> text_scene;
  Mat images;
  std::vector<SceneId> image_scene;
  std::unordered_map<SceneId, int> image_row;

  int batch_size() const { return static_cast<int>(texts.rows()) / 3; }
  int own_image_row(SceneId scene) const;
  void validate() const;

  static constexpr int kBeamSlot = 0;
  static constexpr int kGreedySlot = 1;
  static constexpr int kGtSlot = 2;
  int text_row(int item, int slot) const { return 3 * item + slot; }
};

struct RewardBreakdown {
  Scalar r_i2t = 0;
  Scalar r_t2i = 0;
  Scalar r_bicont = 0;
  Scalar p_d = 0;
  Scalar combined = 0;
  Scalar effective_text_baseline = 0;   // tempered LSE term of r_i2t
  Scalar effective_image_baseline = 0;  // tempered LSE term of r_t2i
};

// pos minus the tempered log-sum-exp baseline of the negatives.
Scalar contrastive_gap(Scalar positive_similarity, const Vec& negative_similarities, Scalar tau);

// Image-to-text direction. The candidate row stays in the pool matrix and is
// excluded from the denominator by index, so value-duplicates still count.
Scalar reward_i2t(const Mat& text_pool, int candidate_row, const Vec& own_image, Scalar tau,
                  Scalar* baseline = nullptr);

// Text-to-image direction, excluding the candidate's own image row.
Scalar reward_t2i(const Mat& image_pool, int own_image_row, const Vec& candidate_text,
                  Scalar tau, Scalar* baseline = nullptr);

// Both directions for one pooled text row; fills the r fields only.
RewardBreakdown bidirectional_reward(const NegativePools& pools, int candidate_text_row,
                                     const RewardConfig& config);

// alpha * r_sim + (1 - alpha) * p_d.
Scalar combined_reward(Scalar r_sim, Scalar p_d, Scalar alpha);

// tau * LSE(s / tau) - max(s); nonnegative, at most tau * ln(n).
Scalar lse_max_gap(const Vec& similarities, Scalar tau);

}  // namespace distcap

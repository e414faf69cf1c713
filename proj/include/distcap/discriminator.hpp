// Real-vs-generated caption classifier over frozen text embeddings.
// Its real-probability output is the regularization reward.
#pragma once

#include <string>
#include <vector>

#include "distcap/common.hpp"
#include "distcap/policy.hpp"
#include "distcap/retriever.hpp"

namespace distcap {

struct DiscriminatorConfig {
  int input_dim = 64;
  int hidden_dim = 64;

  bool operator==(const DiscriminatorConfig&) const = default;
  uint64_t hash() const;
  int param_count() const;
};

// Rectifier MLP d -> 64 -> 64 -> 1 with sigmoid output, flat parameters plus
// a paired gradient buffer. Zero parameters give output exactly 0.5.
class DiscriminatorParams {
 public:
  explicit DiscriminatorParams(const DiscriminatorConfig& config);

  const DiscriminatorConfig& config() const { return config_; }
  Vec& theta() { return theta_; }
  const Vec& theta() const { return theta_; }
  Vec& grad() { return grad_; }
  const Vec& grad() const { return grad_; }
  void zero_grad() { grad_.setZero(); }

  Eigen::Map<Mat> w1();
  Eigen::Map<Vec> b1();
  Eigen::Map<Mat> w2();
  Eigen::Map<Vec> b2();
  Eigen::Map<Vec> w3();
  Scalar& b3();
  Eigen::Map<const Mat> w1() const;
  Eigen::Map<const Vec> b1() const;
  Eigen::Map<const Mat> w2() const;
  Eigen::Map<const Vec> b2() const;
  Eigen::Map<const Vec> w3() const;
  Scalar b3() const;

 private:
  DiscriminatorConfig config_;
  Vec theta_;
  Vec grad_;
};

DiscriminatorParams init_discriminator(const DiscriminatorConfig& config, uint64_t seed);

// Probability that the embedded caption is ground truth, strictly in (0,1).
Scalar discriminate(const Vec& text_embedding, const DiscriminatorParams& params);

// Mean binary cross-entropy with labels real=1, fake=0 (rows are samples).
// Accumulates the gradient into the buffer when accumulate_grad is set.
Scalar discriminator_bce(const Mat& real, const Mat& fake, DiscriminatorParams& params,
                         bool accumulate_grad);

// One descent step on the BCE; returns the pre-step loss.
Scalar discriminator_train_step(const Mat& real, const Mat& fake, DiscriminatorParams& params,
                                Scalar lr);

// Fraction classified correctly at the 0.5 threshold (exact 0.5 counts as a
// fake vote, so the zero initialization scores 0.5 on balanced sets).
Scalar discriminator_accuracy(const Mat& real, const Mat& fake,
                              const DiscriminatorParams& params);

struct DiscriminatorPretrainReport {
  DiscriminatorParams params;
  Scalar train_accuracy = 0;
  Scalar heldout_accuracy = 0;
};

// Trains a fresh discriminator on GT captions vs the policy's beam outputs
// over the train split; one fifth of the scenes are held out for accuracy
// reporting. The policy stays frozen, so captions are decoded once upfront.
DiscriminatorPretrainReport pretrain_discriminator(const WorldDataset& dataset,
                                                   const RetrieverParams& retriever,
                                                   const PolicyParams& policy, int steps,
                                                   int batch_size, Scalar lr, int beam_size,
                                                   int max_len, int hidden_dim, uint64_t seed);

void save_discriminator(const DiscriminatorParams& params, const std::string& path);
DiscriminatorParams load_discriminator(const std::string& path);

}  // namespace distcap

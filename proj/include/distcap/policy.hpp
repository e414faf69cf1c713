// Conditional tanh-RNN caption policy: exact log-probs, teacher forcing,
// greedy/beam decoding, hand-derived backprop with a flat parameter vector.
#pragma once

#include <string>
#include <vector>

#include "distcap/common.hpp"
#include "distcap/world.hpp"

namespace distcap {

struct PolicyConfig {
  int vocab_size = 0;
  int image_dim = 64;
  int embed_dim = 32;
  int hidden_dim = 64;

  bool operator==(const PolicyConfig&) const = default;
  uint64_t hash() const;
  int param_count() const;
};

// Flat parameters with a paired gradient buffer. Block order: W_img (H x D),
// b_img (H), W_emb (E x V, one column per token), W_in (H x E),
// W_rec (H x H), b_rec (H), W_out (V x H), b_out (V).
class PolicyParams {
 public:
  explicit PolicyParams(const PolicyConfig& config);

  const PolicyConfig& config() const { return config_; }
  Vec& theta() { return theta_; }
  const Vec& theta() const { return theta_; }
  Vec& grad() { return grad_; }
  const Vec& grad() const { return grad_; }
  void zero_grad() { grad_.setZero(); }

  Eigen::Map<Mat> w_img();
  Eigen::Map<Vec> b_img();
  Eigen::Map<Mat> w_emb();
  Eigen::Map<Mat> w_in();
  Eigen::Map<Mat> w_rec();
  Eigen::Map<Vec> b_rec();
  Eigen::Map<Mat> w_out();
  Eigen::Map<Vec> b_out();
  Eigen::Map<const Mat> w_img() const;
  Eigen::Map<const Vec> b_img() const;
  Eigen::Map<const Mat> w_emb() const;
  Eigen::Map<const Mat> w_in() const;
  Eigen::Map<const Mat> w_rec() const;
  Eigen::Map<const Vec> b_rec() const;
  Eigen::Map<const Mat> w_out() const;
  Eigen::Map<const Vec> b_out() const;

  // Same block layout over the gradient buffer.
  Eigen::Map<Mat> g_w_img();
  Eigen::Map<Vec> g_b_img();
  Eigen::Map<Mat> g_w_emb();
  Eigen::Map<Mat> g_w_in();
  Eigen::Map<Mat> g_w_rec();
  Eigen::Map<Vec> g_b_rec();
  Eigen::Map<Mat> g_w_out();
  Eigen::Map<Vec> g_b_out();

 private:
  PolicyConfig config_;
  Vec theta_;
  Vec grad_;
};

// Weight blocks drawn at scale 0.1 from the seeded normal, biases zero.
PolicyParams init_policy(const PolicyConfig& config, uint64_t seed);

struct DecodeResult {
  Caption caption;
  Scalar log_prob = 0;
  std::vector<Scalar> per_token_log_probs;  // one per token after BOS
};

struct TrainExample {
  Vec image;                   // frozen scene embedding
  std::vector<TokenId> tokens;  // BOS ... EOS
};

// Exact autoregressive log-likelihood of a BOS/EOS-framed sequence.
DecodeResult log_prob(const std::vector<TokenId>& tokens, const Vec& image,
                      const PolicyParams& params);

// Gradient of the negative log-likelihood wrt logits: softmax(logits) minus
// the target one-hot. Exposed so the score function is testable in isolation.
Vec nll_logit_gradient(const Vec& logits, TokenId target);

// Adds weight * grad(NLL) = -weight * grad(log p) to the gradient buffer;
// returns the sequence NLL. The weight is a constant, not differentiated.
Scalar policy_gradient_accumulate(const std::vector<TokenId>& tokens, const Vec& image,
                                  Scalar weight, PolicyParams& params);

// Mean NLL over the batch; gradient of the mean accumulated into the buffer.
Scalar teacher_forcing_loss(const std::vector<TrainExample>& batch, PolicyParams& params);

// Argmax decoding, ties to the lower token id. EOS is forced (with its true
// log-prob) once max_len - 2 content tokens have been emitted, so results are
// always BOS/EOS-framed and never exceed max_len.
DecodeResult greedy_decode(const Vec& image, const PolicyParams& params, int max_len);

// Width-k beam over cumulative log-prob, no length normalization. Each step
// keeps the top k of all one-token extensions ordered by score then
// lexicographic tokens; extensions ending in EOS retire to the finished pool.
DecodeResult beam_search(const Vec& image, const PolicyParams& params, int beam_size,
                         int max_len);

// Plain descent step from the accumulated gradient; zeroes the buffer.
// Throws with coordinate diagnostics when the gradient is non-finite.
void apply_update(PolicyParams& params, Scalar learning_rate);

void save_checkpoint(const PolicyParams& params, const std::string& path);
PolicyParams load_checkpoint(const std::string& path);

}  // namespace distcap

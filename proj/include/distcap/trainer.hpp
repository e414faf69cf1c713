// Training orchestration: batch pools, discriminator-then-generator steps,
// the ablation objectives, per-epoch evaluation, and result plumbing.
#pragma once

#include <array>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "distcap/config.hpp"
#include "distcap/discriminator.hpp"
#include "distcap/policy.hpp"
#include "distcap/retriever.hpp"
#include "distcap/rewards.hpp"
#include "distcap/textmetrics.hpp"
#include "distcap/world.hpp"

namespace distcap {

enum class Objective {
  kTf,
  kWtf,
  kRl,
  kWtfRl,
  kRlUnidirectional,
  kScstDiscriminator,
  kRlNoRegularizer,
};

inline constexpr std::array<Objective, 7> kAllObjectives = {
    Objective::kTf,    Objective::kWtf,
    Objective::kRl,    Objective::kWtfRl,
    Objective::kRlUnidirectional, Objective::kScstDiscriminator,
    Objective::kRlNoRegularizer,
};

const char* objective_name(Objective objective);
Objective objective_from_string(const std::string& name);  // UserError lists valid names

struct EvalMetrics {
  Scalar t2i_r1 = 0, t2i_r5 = 0, t2i_r10 = 0;
  Scalar i2t_r1 = 0, i2t_r5 = 0, i2t_r10 = 0;
  Scalar bleu4 = 0, rouge_l = 0, cider = 0, self_bleu = 0;
  Scalar mean_reward = 0, disc_acc = 0, repeat_rate = 0;

  static const std::array<const char*, 13>& names();
  std::array<Scalar, 13> values() const;
};

struct StepMetrics {
  Scalar disc_loss = 0;
  Scalar mean_reward = 0;      // mean combined reward of the beam candidates
  Scalar mean_nll = 0;         // mean NLL of the gradient-receiving captions
  Scalar max_lse_gap = 0;      // largest LSE-vs-max gap seen in the pools
};

// Protocol instrumentation: per-iteration event order and which caption
// provenances ever received policy gradients.
struct TrainLog {
  std::string step_events;  // 'D' then 'G' appended per iteration
  long gt_gradient_captions = 0;
  long beam_gradient_captions = 0;
  long greedy_gradient_captions = 0;
};

struct BatchPools {
  NegativePools pools;
  std::vector<DecodeResult> beam;
  std::vector<DecodeResult> greedy;
};

// Read-only experiment context: dataset views, frozen caches, metric corpus.
class Trainer {
 public:
  Trainer(const ExperimentConfig& config, const WorldDataset& world,
          const RetrieverParams& retriever);

  const ExperimentConfig& config() const { return config_; }
  const Mat& image_cache() const { return image_cache_; }
  const Mat& gt_text_cache() const { return gt_text_cache_; }

  // Greedy and beam decodes plus assembled negative pools for one batch.
  // Ground-truth text rows and all image rows come from the frozen caches.
  BatchPools build_batch_pools(const std::vector<SceneId>& batch,
                               const PolicyParams& policy) const;

  // One full iteration: discriminator step first, then the generator update
  // prescribed by the objective. Appends reward lines when a log stream is
  // given (fields: epoch iter item scene slot r_i2t r_t2i r_bicont p_d combined).
  StepMetrics train_step(const std::vector<SceneId>& batch, Objective objective,
                         PolicyParams& policy, DiscriminatorParams& disc,
                         TrainLog* log = nullptr, std::ostream* reward_log = nullptr,
                         int epoch = 0, int iter = 0);

  // Plain teacher forcing over the epoch, no discriminator involved.
  void run_tf_epoch(PolicyParams& policy, int global_epoch) const;

  // Deterministic batch order for a global epoch index.
  std::vector<std::vector<SceneId>> epoch_batches(int global_epoch) const;

  // Test-split evaluation with the training beam size. Scenes whose decode
  // has no content tokens contribute zero embeddings and zero text scores.
  EvalMetrics evaluate(const PolicyParams& policy, const DiscriminatorParams& disc) const;

 private:
  RewardConfig reward_config_for(Objective objective) const;

  const ExperimentConfig config_;
  const WorldDataset& world_;
  const RetrieverParams& retriever_;
  Mat image_cache_;     // one row per scene, frozen
  Mat gt_text_cache_;   // one row per scene, frozen
  CiderCorpus cider_corpus_;  // built from test-split GT captions
};

struct PretrainedState {
  PolicyParams policy;
  DiscriminatorParams discriminator;
  uint64_t policy_hash = 0;
  Scalar disc_train_accuracy = 0;
  Scalar disc_heldout_accuracy = 0;
};

// Teacher-forcing pretraining followed by discriminator pretraining on the
// frozen TF policy's beam outputs.
PretrainedState pretrain(const ExperimentConfig& config, const WorldDataset& world,
                         const RetrieverParams& retriever);

struct ExperimentResult {
  Objective objective = Objective::kTf;
  std::vector<std::pair<int, EvalMetrics>> per_epoch;  // (global epoch, metrics)
  EvalMetrics final_metrics;
  uint64_t pretrain_policy_hash = 0;
  uint64_t final_policy_hash = 0;
  uint64_t retriever_hash_before = 0;
  uint64_t retriever_hash_after = 0;
  TrainLog log;
  std::optional<PolicyParams> final_policy;
  std::optional<DiscriminatorParams> final_discriminator;
  bool failed = false;
  std::string error;
};

// Continues the pretrained snapshot under one objective. Epoch indices
// continue after the pretraining epochs, so the TF objective reproduces an
// uninterrupted teacher-forcing run. When out_dir is non-empty, writes
// manifest.json, results.csv, rewards.log, and final checkpoints there.
ExperimentResult run_objective(const ExperimentConfig& config, Objective objective,
                               const WorldDataset& world, const RetrieverParams& retriever,
                               const PretrainedState& pretrained,
                               const std::string& out_dir = "");

// pretrain + run_objective in one call.
ExperimentResult run_experiment(const ExperimentConfig& config, Objective objective,
                                const WorldDataset& world, const RetrieverParams& retriever,
                                const std::string& out_dir = "");

// All seven objectives from one shared pretrained snapshot. A failing row is
// marked failed and the suite continues.
std::vector<ExperimentResult> run_ablation_suite(const ExperimentConfig& config,
                                                 const WorldDataset& world,
                                                 const RetrieverParams& retriever,
                                                 const std::string& out_dir = "");

struct OrderingCheck {
  std::string description;
  bool passed = false;
};

// The qualitative orderings expected of the ablation table (retrieval gains,
// CIDEr floors, diversity). Margins are rates in [0,1] except the CIDEr ones,
// which are in this codebase's 0..10 CIDEr units.
std::vector<OrderingCheck> ordering_checks(const std::vector<ExperimentResult>& suite);

// Final-epoch summary table, one row per objective.
std::string format_ablation_table(const std::vector<ExperimentResult>& suite);
void write_ablation_csv(const std::vector<ExperimentResult>& suite, const std::string& path);

}  // namespace distcap

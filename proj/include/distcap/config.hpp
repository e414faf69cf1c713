// Experiment configuration: plain-text key=value files plus named presets.
#pragma once

#include <string>

#include "distcap/common.hpp"

namespace distcap {

// Defaults are the desk-scale regime; the "paper" preset swaps in the
// published hyperparameters where they are stated.
struct ExperimentConfig {
  uint64_t seed = 7;

  // world
  int n_scenes = 640;
  int n_test = 128;
  double salience = 0.2;  // mention probability of each optional attribute

  // retriever
  int retriever_dim = 64;
  double retriever_noise = 0.1;

  // policy
  int policy_embed_dim = 32;
  int policy_hidden_dim = 64;
  int max_len = 20;
  int beam_size = 3;
  double policy_lr = 1e-3;
  int tf_pretrain_epochs = 2;

  // rewards
  double alpha = 0.94;
  double tau = 0.05;

  // trainer
  int batch_size = 20;
  int epochs = 30;
  int mined_m = 4;
  int eval_every = 1;
  bool clamp_gt_reward = false;  // clamp negative ground-truth rewards to zero

  // discriminator
  double disc_lr = 1e-3;
  int disc_pretrain_steps = 500;
  int disc_hidden = 64;
  int disc_batch = 20;

  std::string data_dir = "data";
};

// Known presets: "desk" (the defaults) and "paper" (batch 20, alpha 0.94,
// 5 epochs, lr 1e-6). Unknown names raise UserError.
void apply_preset(ExperimentConfig& config, const std::string& name);

// Assigns one key from its text form; unknown keys and unparsable values
// raise UserError naming the key.
void set_config_value(ExperimentConfig& config, const std::string& key,
                      const std::string& value);

// key = value lines, # comments, blank lines ignored. Keys apply on top of
// whatever the config already holds; a preset key resets to that preset.
void apply_config_file(ExperimentConfig& config, const std::string& path);
ExperimentConfig load_config_file(const std::string& path);

// Every key in fixed order, one per line, round-trippable through the parser.
std::string serialize_config(const ExperimentConfig& config);

// Raises UserError on out-of-range combinations.
void validate_config(const ExperimentConfig& config);

}  // namespace distcap

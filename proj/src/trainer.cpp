#include "distcap/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "distcap/math.hpp"

namespace distcap {
namespace {

constexpr uint64_t kShuffleStream = 0x1000;
constexpr uint64_t kDiscPretrainStream = 0xD1;

struct ObjectiveName {
  Objective objective;
  const char* name;
};

constexpr ObjectiveName kObjectiveNames[] = {
    {Objective::kTf, "tf"},
    {Objective::kWtf, "wtf"},
    {Objective::kRl, "rl"},
    {Objective::kWtfRl, "wtf_rl"},
    {Objective::kRlUnidirectional, "rl_unidirectional"},
    {Objective::kScstDiscriminator, "scst_discriminator"},
    {Objective::kRlNoRegularizer, "rl_no_regularizer"},
};

Scalar repeat_rate_of(const std::vector<TokenId>& tokens) {
  std::vector<TokenId> content = content_tokens(tokens);
  if (content.empty()) return 0;
  std::set<TokenId> distinct(content.begin(), content.end());
  return static_cast<Scalar>(content.size() - distinct.size()) /
         static_cast<Scalar>(content.size());
}

}  // namespace

const char* objective_name(Objective objective) {
  for (const auto& [o, name] : kObjectiveNames)
    if (o == objective) return name;
  throw std::logic_error("objective_name: unreachable");
}

Objective objective_from_string(const std::string& name) {
  for (const auto& [o, n] : kObjectiveNames)
    if (name == n) return o;
  std::string valid;
  for (const auto& [o, n] : kObjectiveNames) {
    if (!valid.empty()) valid += ", ";
    valid += n;
  }
  throw UserError("unknown objective '" + name + "' (valid: " + valid + ")");
}

const std::array<const char*, 13>& EvalMetrics::names() {
  static const std::array<const char*, 13> n = {
      "t2i_r1", "t2i_r5", "t2i_r10", "i2t_r1",      "i2t_r5",   "i2t_r10",    "bleu4",
      "rouge_l", "cider", "self_bleu", "mean_reward", "disc_acc", "repeat_rate"};
  return n;
}

std::array<Scalar, 13> EvalMetrics::values() const {
  return {t2i_r1, t2i_r5, t2i_r10, i2t_r1,      i2t_r5,   i2t_r10,    bleu4,
          rouge_l, cider, self_bleu, mean_reward, disc_acc, repeat_rate};
}

Trainer::Trainer(const ExperimentConfig& config, const WorldDataset& world,
                 const RetrieverParams& retriever)
    : config_(config), world_(world), retriever_(retriever) {
  validate_config(config);
  if (world.n_scenes() != config.n_scenes || world.n_train != config.n_scenes - config.n_test)
    throw std::invalid_argument("trainer: dataset does not match config split");
  for (int i = 0; i < world.n_train; ++i)
    if (static_cast<int>(world.neighbor_lists[i].size()) < config.mined_m)
      throw std::invalid_argument("trainer: neighbor mining missing or too shallow");

  const int n = world.n_scenes();
  const int d = retriever.dim();
  image_cache_.resize(n, d);
  gt_text_cache_.resize(n, d);
  parallel_for(n, [&](int i) {
    image_cache_.row(i) = embed_image(world.scenes[i], retriever).transpose();
    gt_text_cache_.row(i) = embed_text(world.gt_captions[i].tokens, retriever).transpose();
  });

  std::vector<std::vector<TokenId>> test_gt;
  for (int i = world.n_train; i < n; ++i) test_gt.push_back(world.gt_captions[i].tokens);
  if (!test_gt.empty()) cider_corpus_ = build_cider_corpus(test_gt);
}

BatchPools Trainer::build_batch_pools(const std::vector<SceneId>& batch,
                                      const PolicyParams& policy) const {
  if (batch.empty()) throw std::invalid_argument("build_batch_pools: empty batch");
  const int B = static_cast<int>(batch.size());
  const int d = retriever_.dim();

  BatchPools out;
  out.pools.texts.resize(3 * B, d);
  out.pools.text_provenance.resize(3 * B);
  out.pools.text_scene.resize(3 * B);
  out.beam.resize(B);
  out.greedy.resize(B);

  for (int i = 0; i < B; ++i) {
    SceneId id = batch[i];
    if (id < 0 || id >= world_.n_scenes())
      throw std::invalid_argument("build_batch_pools: scene id out of range");
    Vec img = image_cache_.row(id).transpose();
    DecodeResult gs = greedy_decode(img, policy, config_.max_len);
    DecodeResult bs = beam_search(img, policy, config_.beam_size, config_.max_len);
    gs.caption.scene_id = id;
    bs.caption.scene_id = id;
    // Content-free decodes (possible before the policy has learned anything)
    // embed as zero rows: similarity 0 against every pool element.
    auto text_row = [&](const Caption& caption) -> Vec {
      if (content_tokens(caption.tokens).empty()) return Vec::Zero(d);
      try {
        return embed_text(caption.tokens, retriever_);
      } catch (const std::exception& e) {
        throw std::runtime_error("decode failure for scene " + std::to_string(id) + ": " +
                                 e.what());
      }
    };
    out.pools.texts.row(3 * i + NegativePools::kBeamSlot) = text_row(bs.caption).transpose();
    out.pools.texts.row(3 * i + NegativePools::kGreedySlot) = text_row(gs.caption).transpose();
    out.pools.texts.row(3 * i + NegativePools::kGtSlot) = gt_text_cache_.row(id);
    for (int slot = 0; slot < 3; ++slot) out.pools.text_scene[3 * i + slot] = id;
    out.pools.text_provenance[3 * i + NegativePools::kBeamSlot] = Provenance::kBeam;
    out.pools.text_provenance[3 * i + NegativePools::kGreedySlot] = Provenance::kGreedy;
    out.pools.text_provenance[3 * i + NegativePools::kGtSlot] = Provenance::kGroundTruth;
    out.beam[i] = std::move(bs);
    out.greedy[i] = std::move(gs);
  }

  // Batch images first, then each item's mined neighbors, deduped by id.
  std::vector<SceneId> image_order;
  for (SceneId id : batch) image_order.push_back(id);
  for (SceneId id : batch) {
    const auto& nn = world_.neighbor_lists[id];
    for (int k = 0; k < config_.mined_m; ++k) image_order.push_back(nn[k]);
  }
  for (SceneId id : image_order) {
    if (out.pools.image_row.count(id)) continue;
    int row = static_cast<int>(out.pools.image_scene.size());
    out.pools.image_row.emplace(id, row);
    out.pools.image_scene.push_back(id);
  }
  out.pools.images.resize(out.pools.image_scene.size(), d);
  for (size_t r = 0; r < out.pools.image_scene.size(); ++r)
    out.pools.images.row(r) = image_cache_.row(out.pools.image_scene[r]);

  out.pools.validate();
  return out;
}

RewardConfig Trainer::reward_config_for(Objective objective) const {
  RewardConfig rc;
  rc.alpha = config_.alpha;
  rc.tau = config_.tau;
  switch (objective) {
    case Objective::kRlUnidirectional:
      rc.unidirectional = true;
      break;
    case Objective::kScstDiscriminator:
      rc.scst_greedy_only = true;
      break;
    case Objective::kRlNoRegularizer:
      rc.alpha = 1.0;
      break;
    default:
      break;
  }
  return rc;
}

StepMetrics Trainer::train_step(const std::vector<SceneId>& batch, Objective objective,
                                PolicyParams& policy, DiscriminatorParams& disc, TrainLog* log,
                                std::ostream* reward_log, int epoch, int iter) {
  BatchPools bp = build_batch_pools(batch, policy);
  const int B = static_cast<int>(batch.size());
  const int d = retriever_.dim();
  StepMetrics metrics;

  // Discriminator first, per the per-iteration protocol. Real rows are the
  // cached GT embeddings, fakes the beam trajectories that get gradients.
  Mat real(B, d), fake(B, d);
  for (int i = 0; i < B; ++i) {
    real.row(i) = bp.pools.texts.row(bp.pools.text_row(i, NegativePools::kGtSlot));
    fake.row(i) = bp.pools.texts.row(bp.pools.text_row(i, NegativePools::kBeamSlot));
  }
  metrics.disc_loss = discriminator_train_step(real, fake, disc, config_.disc_lr);
  if (log) log->step_events += 'D';

  RewardConfig rc = reward_config_for(objective);
  const bool uses_gt_reward = objective == Objective::kWtf || objective == Objective::kWtfRl;

  std::vector<Scalar> beam_reward(B), gt_reward(B, 0);
  std::ostringstream dump;
  auto score = [&](int item, int slot) {
    int row = bp.pools.text_row(item, slot);
    RewardBreakdown rb = bidirectional_reward(bp.pools, row, rc);
    rb.p_d = discriminate(bp.pools.texts.row(row).transpose(), disc);
    rb.combined = combined_reward(rb.r_bicont, rb.p_d, rc.alpha);
    const char* slot_name = slot == NegativePools::kBeamSlot ? "beam" : "gt";
    if (reward_log)
      *reward_log << epoch << ' ' << iter << ' ' << item << ' ' << batch[item] << ' '
                  << slot_name << ' ' << rb.r_i2t << ' ' << rb.r_t2i << ' ' << rb.r_bicont
                  << ' ' << rb.p_d << ' ' << rb.combined << '\n';
    if (!std::isfinite(rb.combined)) {
      dump << "non-finite reward: epoch=" << epoch << " iter=" << iter << " scene="
           << batch[item] << " slot=" << slot_name << " r_i2t=" << rb.r_i2t
           << " r_t2i=" << rb.r_t2i << " p_d=" << rb.p_d << "\n";
      for (int j = 0; j < B; ++j)
        dump << "  scene " << batch[j] << " beam: "
             << caption_to_string(bp.beam[j].caption.tokens) << "\n";
      if (reward_log) *reward_log << dump.str();
      throw std::runtime_error(dump.str());
    }
    return rb;
  };

  Scalar gap = 0;
  for (int i = 0; i < B; ++i) {
    RewardBreakdown rb = score(i, NegativePools::kBeamSlot);
    beam_reward[i] = rb.combined;
    metrics.mean_reward += rb.combined / B;
    if (uses_gt_reward) gt_reward[i] = score(i, NegativePools::kGtSlot).combined;
    // LSE-vs-max diagnostic over the beam candidate's i2t negatives.
    Vec sims =
        bp.pools.texts * bp.pools.images.row(bp.pools.own_image_row(batch[i])).transpose();
    Vec negs(sims.size() - 1);
    int k = 0;
    for (Eigen::Index j = 0; j < sims.size(); ++j)
      if (j != bp.pools.text_row(i, NegativePools::kBeamSlot)) negs[k++] = sims[j];
    gap = std::max(gap, lse_max_gap(negs, rc.tau));
  }
  metrics.max_lse_gap = gap;
  if (reward_log) *reward_log << "gap " << epoch << ' ' << iter << ' ' << gap << '\n';

  // Generator update. Greedy decodes never receive gradients; they only act
  // as pool entries and SCST baselines.
  policy.zero_grad();
  Scalar nll_sum = 0;
  long nll_count = 0;
  auto accumulate = [&](const Caption& caption, SceneId scene, Scalar weight) {
    Vec img = image_cache_.row(scene).transpose();
    nll_sum += policy_gradient_accumulate(caption.tokens, img, weight, policy);
    ++nll_count;
    if (!log) return;
    switch (caption.provenance) {
      case Provenance::kGroundTruth: ++log->gt_gradient_captions; break;
      case Provenance::kBeam: ++log->beam_gradient_captions; break;
      case Provenance::kGreedy: ++log->greedy_gradient_captions; break;
    }
  };

  const Scalar inv_b = 1.0 / static_cast<Scalar>(B);
  for (int i = 0; i < B; ++i) {
    SceneId id = batch[i];
    Scalar w_gt = gt_reward[i];
    if (config_.clamp_gt_reward) w_gt = std::max(0.0, w_gt);
    switch (objective) {
      case Objective::kTf:
        accumulate(world_.gt_captions[id], id, inv_b);
        break;
      case Objective::kWtf:
        accumulate(world_.gt_captions[id], id, w_gt * inv_b);
        break;
      case Objective::kWtfRl:
        accumulate(world_.gt_captions[id], id, w_gt * inv_b);
        accumulate(bp.beam[i].caption, id, beam_reward[i] * inv_b);
        break;
      case Objective::kRl:
      case Objective::kRlUnidirectional:
      case Objective::kScstDiscriminator:
      case Objective::kRlNoRegularizer:
        accumulate(bp.beam[i].caption, id, beam_reward[i] * inv_b);
        break;
    }
  }
  metrics.mean_nll = nll_count > 0 ? nll_sum / nll_count : 0;
  apply_update(policy, config_.policy_lr);
  if (log) log->step_events += 'G';
  return metrics;
}

std::vector<std::vector<SceneId>> Trainer::epoch_batches(int global_epoch) const {
  std::vector<SceneId> ids(world_.n_train);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(derive_seed(config_.seed, kShuffleStream + static_cast<uint64_t>(global_epoch)));
  rng.shuffle(ids);
  std::vector<std::vector<SceneId>> batches;
  for (size_t at = 0; at < ids.size(); at += config_.batch_size) {
    size_t end = std::min(at + config_.batch_size, ids.size());
    batches.emplace_back(ids.begin() + at, ids.begin() + end);
  }
  return batches;
}

void Trainer::run_tf_epoch(PolicyParams& policy, int global_epoch) const {
  for (const auto& batch : epoch_batches(global_epoch)) {
    std::vector<TrainExample> examples;
    examples.reserve(batch.size());
    for (SceneId id : batch)
      examples.push_back({image_cache_.row(id).transpose(), world_.gt_captions[id].tokens});
    policy.zero_grad();
    teacher_forcing_loss(examples, policy);
    apply_update(policy, config_.policy_lr);
  }
}

EvalMetrics Trainer::evaluate(const PolicyParams& policy,
                              const DiscriminatorParams& disc) const {
  EvalMetrics m;
  const int n_test = world_.n_scenes() - world_.n_train;
  if (n_test == 0) return m;
  const int d = retriever_.dim();

  std::vector<std::vector<TokenId>> generated(n_test);
  Mat gen_emb = Mat::Zero(n_test, d);
  Mat img_gallery(n_test, d);
  parallel_for(n_test, [&](int j) {
    SceneId id = world_.n_train + j;
    img_gallery.row(j) = image_cache_.row(id);
    DecodeResult bs =
        beam_search(image_cache_.row(id).transpose(), policy, config_.beam_size, config_.max_len);
    generated[j] = std::move(bs.caption.tokens);
    if (!content_tokens(generated[j]).empty())
      gen_emb.row(j) = embed_text(generated[j], retriever_).transpose();
  });

  std::vector<int> pairing(n_test);
  std::iota(pairing.begin(), pairing.end(), 0);
  auto k_of = [&](int k) { return std::min(k, n_test); };
  m.t2i_r1 = recall_at_k(gen_emb, img_gallery, pairing, k_of(1));
  m.t2i_r5 = recall_at_k(gen_emb, img_gallery, pairing, k_of(5));
  m.t2i_r10 = recall_at_k(gen_emb, img_gallery, pairing, k_of(10));
  m.i2t_r1 = recall_at_k(img_gallery, gen_emb, pairing, k_of(1));
  m.i2t_r5 = recall_at_k(img_gallery, gen_emb, pairing, k_of(5));
  m.i2t_r10 = recall_at_k(img_gallery, gen_emb, pairing, k_of(10));

  std::vector<std::vector<TokenId>> non_empty;
  for (int j = 0; j < n_test; ++j) {
    SceneId id = world_.n_train + j;
    const auto& gt = world_.gt_captions[id].tokens;
    bool empty = content_tokens(generated[j]).empty();
    m.bleu4 += empty ? 0 : bleu4(generated[j], {gt});
    m.rouge_l += rouge_l(generated[j], gt);
    m.cider += cider(generated[j], {gt}, cider_corpus_);
    m.repeat_rate += repeat_rate_of(generated[j]);
    if (!empty) non_empty.push_back(generated[j]);
  }
  m.bleu4 /= n_test;
  m.rouge_l /= n_test;
  m.cider /= n_test;
  m.repeat_rate /= n_test;
  // Fewer than two non-empty decodes means total collapse; report maximal overlap.
  m.self_bleu = non_empty.size() >= 2 ? self_bleu(non_empty) : 1.0;

  Mat real(n_test, d);
  for (int j = 0; j < n_test; ++j) real.row(j) = gt_text_cache_.row(world_.n_train + j);
  m.disc_acc = discriminator_accuracy(real, gen_emb, disc);
  return m;
}

PretrainedState pretrain(const ExperimentConfig& config, const WorldDataset& world,
                         const RetrieverParams& retriever) {
  Trainer trainer(config, world, retriever);
  PolicyConfig pc{Vocabulary::instance().size(), config.retriever_dim, config.policy_embed_dim,
                  config.policy_hidden_dim};
  PolicyParams policy = init_policy(pc, config.seed);
  for (int e = 0; e < config.tf_pretrain_epochs; ++e) trainer.run_tf_epoch(policy, e);
  uint64_t policy_hash = hash_vector(policy.theta());

  DiscriminatorPretrainReport report = pretrain_discriminator(
      world, retriever, policy, config.disc_pretrain_steps, config.disc_batch, config.disc_lr,
      config.beam_size, config.max_len, config.disc_hidden,
      derive_seed(config.seed, kDiscPretrainStream));
  return {std::move(policy), std::move(report.params), policy_hash, report.train_accuracy,
          report.heldout_accuracy};
}

namespace {

void write_manifest(const std::string& out_dir, const ExperimentConfig& config,
                    Objective objective, const std::string& status,
                    uint64_t pretrain_hash, uint64_t final_hash, uint64_t retr_before,
                    uint64_t retr_after, double wall_seconds) {
  nlohmann::json j;
  j["tool"] = "distcap";
  j["version"] = 1;
  j["status"] = status;
  j["objective"] = objective_name(objective);
  j["seed"] = config.seed;
  j["config"] = serialize_config(config);
  j["pretrain_policy_hash"] = pretrain_hash;
  j["final_policy_hash"] = final_hash;
  j["retriever_hash_before"] = retr_before;
  j["retriever_hash_after"] = retr_after;
  j["wall_clock_seconds"] = wall_seconds;
  j["outputs"] = {{"results", "results.csv"},
                  {"rewards", "rewards.log"},
                  {"policy", "policy_final.ckpt"},
                  {"discriminator", "disc_final.ckpt"}};
  std::ofstream out(out_dir + "/manifest.json");
  if (!out) throw UserError("cannot write manifest in " + out_dir);
  out << j.dump(2) << '\n';
}

void write_results_csv(const std::string& out_dir,
                       const std::vector<std::pair<int, EvalMetrics>>& rows) {
  std::ofstream out(out_dir + "/results.csv");
  if (!out) throw UserError("cannot write results.csv in " + out_dir);
  out << "# manifest: manifest.json\n";
  out << "epoch,metric,value\n";
  for (const auto& [epoch, m] : rows) {
    auto values = m.values();
    for (size_t i = 0; i < values.size(); ++i)
      out << epoch << ',' << EvalMetrics::names()[i] << ',' << fmt_g17(values[i]) << '\n';
  }
}

}  // namespace

ExperimentResult run_objective(const ExperimentConfig& config, Objective objective,
                               const WorldDataset& world, const RetrieverParams& retriever,
                               const PretrainedState& pretrained, const std::string& out_dir) {
  auto started = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.objective = objective;
  result.pretrain_policy_hash = pretrained.policy_hash;
  result.retriever_hash_before = retriever_hash(retriever);

  Trainer trainer(config, world, retriever);
  PolicyParams policy = pretrained.policy;
  DiscriminatorParams disc = pretrained.discriminator;

  std::ofstream rewards_out;
  std::ostream* reward_log = nullptr;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_manifest(out_dir, config, objective, "running", result.pretrain_policy_hash, 0,
                   result.retriever_hash_before, 0, 0);
    rewards_out.open(out_dir + "/rewards.log");
    if (!rewards_out) throw UserError("cannot write rewards.log in " + out_dir);
    rewards_out << "# fields: epoch iter item scene slot r_i2t r_t2i r_bicont p_d combined\n";
    rewards_out << "# per-batch diagnostic: gap epoch iter max_lse_gap\n";
    reward_log = &rewards_out;
  }

  const bool has_test = config.n_test > 0;
  auto flush_partial = [&] {
    if (out_dir.empty()) return;
    write_results_csv(out_dir, result.per_epoch);
  };

  try {
    for (int e = 0; e < config.epochs; ++e) {
      int global_epoch = config.tf_pretrain_epochs + e;
      Scalar reward_sum = 0;
      long steps = 0;
      auto batches = trainer.epoch_batches(global_epoch);
      for (size_t it = 0; it < batches.size(); ++it) {
        StepMetrics sm = trainer.train_step(batches[it], objective, policy, disc, &result.log,
                                            reward_log, global_epoch, static_cast<int>(it));
        reward_sum += sm.mean_reward;
        ++steps;
      }
      bool last = e == config.epochs - 1;
      if (has_test && ((e + 1) % config.eval_every == 0 || last)) {
        EvalMetrics em = trainer.evaluate(policy, disc);
        em.mean_reward = steps > 0 ? reward_sum / steps : 0;
        result.per_epoch.emplace_back(global_epoch, em);
      }
    }
    if (config.epochs == 0 && has_test)
      result.per_epoch.emplace_back(config.tf_pretrain_epochs, trainer.evaluate(policy, disc));
  } catch (...) {
    flush_partial();
    if (!out_dir.empty())
      write_manifest(out_dir, config, objective, "failed", result.pretrain_policy_hash, 0,
                     result.retriever_hash_before, retriever_hash(retriever), 0);
    throw;
  }

  if (!result.per_epoch.empty()) result.final_metrics = result.per_epoch.back().second;
  result.final_policy_hash = hash_vector(policy.theta());
  result.retriever_hash_after = retriever_hash(retriever);

  if (!out_dir.empty()) {
    write_results_csv(out_dir, result.per_epoch);
    save_checkpoint(policy, out_dir + "/policy_final.ckpt");
    save_discriminator(disc, out_dir + "/disc_final.ckpt");
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_manifest(out_dir, config, objective, "complete", result.pretrain_policy_hash,
                   result.final_policy_hash, result.retriever_hash_before,
                   result.retriever_hash_after, wall);
  }
  result.final_policy = std::move(policy);
  result.final_discriminator = std::move(disc);
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config, Objective objective,
                                const WorldDataset& world, const RetrieverParams& retriever,
                                const std::string& out_dir) {
  PretrainedState pre = pretrain(config, world, retriever);
  return run_objective(config, objective, world, retriever, pre, out_dir);
}

std::vector<ExperimentResult> run_ablation_suite(const ExperimentConfig& config,
                                                 const WorldDataset& world,
                                                 const RetrieverParams& retriever,
                                                 const std::string& out_dir) {
  PretrainedState pre = pretrain(config, world, retriever);
  std::vector<ExperimentResult> results;
  for (Objective objective : kAllObjectives) {
    std::string dir =
        out_dir.empty() ? "" : out_dir + "/" + objective_name(objective);
    try {
      results.push_back(run_objective(config, objective, world, retriever, pre, dir));
    } catch (const std::exception& e) {
      ExperimentResult failed;
      failed.objective = objective;
      failed.failed = true;
      failed.error = e.what();
      failed.pretrain_policy_hash = pre.policy_hash;
      results.push_back(std::move(failed));
    }
  }
  return results;
}

namespace {

const ExperimentResult* find_row(const std::vector<ExperimentResult>& suite,
                                 Objective objective) {
  for (const auto& r : suite)
    if (r.objective == objective && !r.failed) return &r;
  return nullptr;
}

std::string fmt4(Scalar v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::vector<OrderingCheck> ordering_checks(const std::vector<ExperimentResult>& suite) {
  const ExperimentResult* tf = find_row(suite, Objective::kTf);
  const ExperimentResult* wtf = find_row(suite, Objective::kWtf);
  const ExperimentResult* rl = find_row(suite, Objective::kRl);
  const ExperimentResult* wtf_rl = find_row(suite, Objective::kWtfRl);
  const ExperimentResult* rl_uni = find_row(suite, Objective::kRlUnidirectional);

  std::vector<OrderingCheck> checks;
  auto add = [&](const ExperimentResult* a, const ExperimentResult* b, const char* metric,
                 Scalar va, Scalar vb, Scalar margin, bool geq, std::string label) {
    OrderingCheck c;
    if (!a || !b) {
      c.description = std::move(label) + " (row failed)";
      c.passed = false;
    } else {
      bool ok = geq ? va >= vb + margin : va <= vb + margin;
      c.description = std::move(label) + " [" + metric + " " + fmt4(va) +
                      (geq ? " >= " : " <= ") + fmt4(vb) +
                      (margin != 0 ? (margin > 0 ? " + " : " - ") + fmt4(std::abs(margin)) : "") +
                      "]";
      c.passed = ok;
    }
    checks.push_back(std::move(c));
  };

  auto v = [](const ExperimentResult* r, auto field) {
    return r ? r->final_metrics.*field : 0;
  };
  add(wtf, tf, "t2i_r1", v(wtf, &EvalMetrics::t2i_r1), v(tf, &EvalMetrics::t2i_r1), 0.03, true,
      "wtf beats tf on t2i recall@1 by 3 points");
  add(rl, wtf, "t2i_r1", v(rl, &EvalMetrics::t2i_r1), v(wtf, &EvalMetrics::t2i_r1), 0.05, true,
      "rl beats wtf on t2i recall@1 by 5 points");
  add(wtf_rl, wtf, "t2i_r1", v(wtf_rl, &EvalMetrics::t2i_r1), v(wtf, &EvalMetrics::t2i_r1), 0.05,
      true, "wtf_rl beats wtf on t2i recall@1 by 5 points");
  add(rl_uni, rl, "t2i_r1", v(rl_uni, &EvalMetrics::t2i_r1), v(rl, &EvalMetrics::t2i_r1), -0.02,
      false, "dropping the t2i reward costs rl at least 2 points");
  add(wtf, tf, "cider", v(wtf, &EvalMetrics::cider), v(tf, &EvalMetrics::cider), -2.0, true,
      "wtf keeps cider within 2 units of tf");
  add(wtf_rl, rl, "cider", v(wtf_rl, &EvalMetrics::cider), v(rl, &EvalMetrics::cider), 0.0, true,
      "wtf_rl beats rl on cider");
  add(wtf_rl, tf, "self_bleu", v(wtf_rl, &EvalMetrics::self_bleu), v(tf, &EvalMetrics::self_bleu),
      0.0, false, "wtf_rl is at least as diverse as tf");
  return checks;
}

std::string format_ablation_table(const std::vector<ExperimentResult>& suite) {
  std::ostringstream out;
  out << std::left;
  out.width(20);
  out << "objective";
  for (const char* name : EvalMetrics::names()) {
    out.width(12);
    out << name;
  }
  out << '\n';
  for (const auto& r : suite) {
    out.width(20);
    out << objective_name(r.objective);
    if (r.failed) {
      out << "FAILED: " << r.error;
    } else {
      for (Scalar v : r.final_metrics.values()) {
        out.width(12);
        out << fmt4(v);
      }
    }
    out << '\n';
  }
  return out.str();
}

void write_ablation_csv(const std::vector<ExperimentResult>& suite, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UserError("cannot write ablation table: " + path);
  out << "objective";
  for (const char* name : EvalMetrics::names()) out << ',' << name;
  out << '\n';
  for (const auto& r : suite) {
    out << objective_name(r.objective);
    if (r.failed) {
      out << ",failed";
    } else {
      for (Scalar v : r.final_metrics.values()) out << ',' << fmt_g17(v);
    }
    out << '\n';
  }
}

}  // namespace distcap

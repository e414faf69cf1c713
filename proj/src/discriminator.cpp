#include "distcap/discriminator.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "distcap/math.hpp"

namespace distcap {
namespace {

constexpr uint64_t kDiscriminatorStream = 0x44;

struct Offsets {
  int w1, b1, w2, b2, w3, b3, total;
};

Offsets offsets_for(const DiscriminatorConfig& c) {
  Offsets o{};
  int at = 0;
  o.w1 = at; at += c.hidden_dim * c.input_dim;
  o.b1 = at; at += c.hidden_dim;
  o.w2 = at; at += c.hidden_dim * c.hidden_dim;
  o.b2 = at; at += c.hidden_dim;
  o.w3 = at; at += c.hidden_dim;
  o.b3 = at; at += 1;
  o.total = at;
  return o;
}

// Pre-sigmoid score with the layer activations captured for backprop.
Scalar forward_logit(const Vec& x, const DiscriminatorParams& p, Vec* a1_out = nullptr,
                     Vec* a2_out = nullptr) {
  if (x.size() != p.config().input_dim)
    throw std::invalid_argument("discriminator: input dimension mismatch");
  Vec a1 = p.w1() * x + p.b1();
  Vec h1 = a1.cwiseMax(0.0);
  Vec a2 = p.w2() * h1 + p.b2();
  Vec h2 = a2.cwiseMax(0.0);
  Scalar z = p.w3().dot(h2) + p.b3();
  if (a1_out) *a1_out = std::move(a1);
  if (a2_out) *a2_out = std::move(a2);
  return z;
}

}  // namespace

uint64_t DiscriminatorConfig::hash() const {
  int fields[2] = {input_dim, hidden_dim};
  return fnv1a(fields, sizeof(fields));
}

int DiscriminatorConfig::param_count() const { return offsets_for(*this).total; }

DiscriminatorParams::DiscriminatorParams(const DiscriminatorConfig& config) : config_(config) {
  if (config.input_dim < 1 || config.hidden_dim < 1)
    throw std::invalid_argument("discriminator: bad config dimensions");
  theta_ = Vec::Zero(config.param_count());
  grad_ = Vec::Zero(config.param_count());
}

Eigen::Map<Mat> DiscriminatorParams::w1() {
  Offsets o = offsets_for(config_);
  return {theta_.data() + o.w1, config_.hidden_dim, config_.input_dim};
}
Eigen::Map<Vec> DiscriminatorParams::b1() {
  Offsets o = offsets_for(config_);
  return {theta_.data() + o.b1, config_.hidden_dim};
}
Eigen::Map<Mat> DiscriminatorParams::w2() {
  Offsets o = offsets_for(config_);
  return {theta_.data() + o.w2, config_.hidden_dim, config_.hidden_dim};
}
Eigen::Map<Vec> DiscriminatorParams::b2() {
  Offsets o = offsets_for(config_);
  return {theta_.data() + o.b2, config_.hidden_dim};
}
Eigen::Map<Vec> DiscriminatorParams::w3() {
  Offsets o = offsets_for(config_);
  return {theta_.data() + o.w3, config_.hidden_dim};
}
Scalar& DiscriminatorParams::b3() { return theta_[offsets_for(config_).b3]; }
Eigen::Map<const Mat> DiscriminatorParams::w1() const {
  Offsets o = offsets_for(config_);
  return {theta_.data() + o.w1, config_.hidden_dim, config_.input_dim};
}
Eigen::Map<const Vec> DiscriminatorParams::b1() const {
  Offsets o = offsets_for(config_);
  return {theta_.data() + o.b1, config_.hidden_dim};
}
Eigen::Map<const Mat> DiscriminatorParams::w2() const {
  Offsets o = offsets_for(config_);
  return {theta_.data() + o.w2, config_.hidden_dim, config_.hidden_dim};
}
Eigen::Map<const Vec> DiscriminatorParams::b2() const {
  Offsets o = offsets_for(config_);
  return {theta_.data() + o.b2, config_.hidden_dim};
}
Eigen::Map<const Vec> DiscriminatorParams::w3() const {
  Offsets o = offsets_for(config_);
  return {theta_.data() + o.w3, config_.hidden_dim};
}
Scalar DiscriminatorParams::b3() const { return theta_[offsets_for(config_).b3]; }

DiscriminatorParams init_discriminator(const DiscriminatorConfig& config, uint64_t seed) {
  DiscriminatorParams p(config);
  Rng rng(derive_seed(seed, kDiscriminatorStream));
  for (Eigen::Index i = 0; i < p.theta().size(); ++i) p.theta()[i] = 0.1 * rng.normal();
  p.b1().setZero();
  p.b2().setZero();
  p.b3() = 0;
  return p;
}

Scalar discriminate(const Vec& text_embedding, const DiscriminatorParams& params) {
  return sigmoid(forward_logit(text_embedding, params));
}

Scalar discriminator_bce(const Mat& real, const Mat& fake, DiscriminatorParams& params,
                         bool accumulate_grad) {
  if (real.rows() == 0 || fake.rows() == 0)
    throw std::invalid_argument("discriminator_bce: both sample sets must be non-empty");
  const Scalar n = static_cast<Scalar>(real.rows() + fake.rows());
  Scalar loss = 0;

  Offsets o = offsets_for(params.config());
  auto backward = [&](const Vec& x, const Vec& a1, const Vec& a2, Scalar dz) {
    Vec h1 = a1.cwiseMax(0.0);
    Vec h2 = a2.cwiseMax(0.0);
    Vec& g = params.grad();
    Eigen::Map<Mat> g_w1(g.data() + o.w1, params.config().hidden_dim, params.config().input_dim);
    Eigen::Map<Vec> g_b1(g.data() + o.b1, params.config().hidden_dim);
    Eigen::Map<Mat> g_w2(g.data() + o.w2, params.config().hidden_dim, params.config().hidden_dim);
    Eigen::Map<Vec> g_b2(g.data() + o.b2, params.config().hidden_dim);
    Eigen::Map<Vec> g_w3(g.data() + o.w3, params.config().hidden_dim);

    g_w3 += dz * h2;
    g[o.b3] += dz;
    Vec da2 = (dz * params.w3()).cwiseProduct((a2.array() > 0).cast<Scalar>().matrix());
    g_w2 += da2 * h1.transpose();
    g_b2 += da2;
    Vec da1 =
        (params.w2().transpose() * da2).cwiseProduct((a1.array() > 0).cast<Scalar>().matrix());
    g_w1 += da1 * x.transpose();
    g_b1 += da1;
  };

  for (Eigen::Index i = 0; i < real.rows(); ++i) {
    Vec x = real.row(i).transpose();
    Vec a1, a2;
    Scalar z = forward_logit(x, params, &a1, &a2);
    loss += softplus(-z) / n;  // -log sigmoid(z)
    if (accumulate_grad) backward(x, a1, a2, (sigmoid(z) - 1.0) / n);
  }
  for (Eigen::Index i = 0; i < fake.rows(); ++i) {
    Vec x = fake.row(i).transpose();
    Vec a1, a2;
    Scalar z = forward_logit(x, params, &a1, &a2);
    loss += softplus(z) / n;  // -log(1 - sigmoid(z))
    if (accumulate_grad) backward(x, a1, a2, sigmoid(z) / n);
  }
  return loss;
}

Scalar discriminator_train_step(const Mat& real, const Mat& fake, DiscriminatorParams& params,
                                Scalar lr) {
  params.zero_grad();
  Scalar loss = discriminator_bce(real, fake, params, true);
  if (!params.grad().allFinite())
    throw std::runtime_error("discriminator_train_step: non-finite gradient");
  params.theta() -= lr * params.grad();
  params.zero_grad();
  return loss;
}

Scalar discriminator_accuracy(const Mat& real, const Mat& fake,
                              const DiscriminatorParams& params) {
  Eigen::Index total = real.rows() + fake.rows();
  if (total == 0) throw std::invalid_argument("discriminator_accuracy: no samples");
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < real.rows(); ++i)
    if (discriminate(real.row(i).transpose(), params) > 0.5) ++correct;
  for (Eigen::Index i = 0; i < fake.rows(); ++i)
    if (discriminate(fake.row(i).transpose(), params) <= 0.5) ++correct;
  return static_cast<Scalar>(correct) / static_cast<Scalar>(total);
}

DiscriminatorPretrainReport pretrain_discriminator(const WorldDataset& dataset,
                                                   const RetrieverParams& retriever,
                                                   const PolicyParams& policy, int steps,
                                                   int batch_size, Scalar lr, int beam_size,
                                                   int max_len, int hidden_dim, uint64_t seed) {
  if (steps < 0 || batch_size < 1)
    throw std::invalid_argument("pretrain_discriminator: bad step or batch size");
  const int n = dataset.n_train;
  if (n < 2) throw std::invalid_argument("pretrain_discriminator: need at least 2 train scenes");

  // The policy is frozen here, so decode and embed the whole split upfront.
  Mat real(n, retriever.text_projection.cols());
  Mat fake(n, retriever.text_projection.cols());
  parallel_for(n, [&](int i) {
    real.row(i) = embed_text(dataset.gt_captions[i].tokens, retriever).transpose();
    DecodeResult bs = beam_search(dataset.scenes[i].embedding, policy, beam_size, max_len);
    // Content-free decodes embed as zero rows, matching the trainer's pools.
    if (content_tokens(bs.caption.tokens).empty())
      fake.row(i).setZero();
    else
      fake.row(i) = embed_text(bs.caption.tokens, retriever).transpose();
  });

  int held = std::max(1, n / 5);
  int used = n - held;
  if (used < 1) throw std::invalid_argument("pretrain_discriminator: split too small");

  DiscriminatorConfig config{static_cast<int>(retriever.text_projection.cols()), hidden_dim};
  DiscriminatorPretrainReport report{init_discriminator(config, seed), 0, 0};
  Rng rng(derive_seed(seed, kDiscriminatorStream ^ 0xBA7C4));
  int bs = std::min(batch_size, used);
  Mat real_batch(bs, config.input_dim), fake_batch(bs, config.input_dim);
  for (int step = 0; step < steps; ++step) {
    for (int j = 0; j < bs; ++j) {
      real_batch.row(j) = real.row(static_cast<int>(rng.uniform_int(used)));
      fake_batch.row(j) = fake.row(static_cast<int>(rng.uniform_int(used)));
    }
    discriminator_train_step(real_batch, fake_batch, report.params, lr);
  }

  report.train_accuracy =
      discriminator_accuracy(real.topRows(used), fake.topRows(used), report.params);
  report.heldout_accuracy =
      discriminator_accuracy(real.bottomRows(held), fake.bottomRows(held), report.params);
  return report;
}

void save_discriminator(const DiscriminatorParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UserError("cannot open discriminator checkpoint for writing: " + path);
  const DiscriminatorConfig& c = params.config();
  out << "distcap-discriminator 1 " << c.hash() << ' ' << c.input_dim << ' ' << c.hidden_dim
      << ' ' << params.theta().size() << '\n';
  for (Eigen::Index i = 0; i < params.theta().size(); ++i)
    out << fmt_g17(params.theta()[i]) << '\n';
  if (!out) throw UserError("write failed: " + path);
}

DiscriminatorParams load_discriminator(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open discriminator checkpoint: " + path);
  std::string magic;
  int version = 0;
  uint64_t stored_hash = 0;
  DiscriminatorConfig c;
  Eigen::Index n = 0;
  in >> magic >> version >> stored_hash >> c.input_dim >> c.hidden_dim >> n;
  if (magic != "distcap-discriminator" || version != 1)
    throw UserError("not a discriminator checkpoint (bad header): " + path);
  if (c.hash() != stored_hash)
    throw UserError("discriminator checkpoint config hash mismatch: " + path);
  DiscriminatorParams p(c);
  if (n != p.theta().size())
    throw UserError("discriminator checkpoint parameter count mismatch: " + path);
  for (Eigen::Index i = 0; i < n; ++i) in >> p.theta()[i];
  if (!in) throw UserError("corrupt discriminator checkpoint: " + path);
  return p;
}

}  // namespace distcap

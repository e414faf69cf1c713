#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "distcap/math.hpp"
#include "distcap/policy.hpp"
#include "distcap/retriever.hpp"
#include "distcap/vocab.hpp"

using namespace distcap;

namespace {

PolicyConfig small_config() {
  PolicyConfig c;
  c.vocab_size = 10;
  c.image_dim = 8;
  c.embed_dim = 5;
  c.hidden_dim = 7;
  return c;
}

Vec random_image(Rng& rng, int d) {
  Vec v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.normal();
  return v / v.norm();
}

std::vector<TokenId> random_sequence(Rng& rng, int vocab_size, int content_len) {
  std::vector<TokenId> t{Vocabulary::kBos};
  for (int i = 0; i < content_len; ++i)
    t.push_back(2 + static_cast<TokenId>(rng.uniform_int(vocab_size - 2)));
  t.push_back(Vocabulary::kEos);
  return t;
}

// Central finite differences of a scalar function of theta.
template <class F>
Scalar central_fd(PolicyParams& p, Eigen::Index coord, F&& f, Scalar h) {
  Scalar saved = p.theta()[coord];
  p.theta()[coord] = saved + h;
  Scalar up = f();
  p.theta()[coord] = saved - h;
  Scalar down = f();
  p.theta()[coord] = saved;
  return (up - down) / (2 * h);
}

// All framed sequences with at most `budget` non-EOS tokens, mirroring the
// decoder's forced-EOS rule.
void enumerate_sequences(int vocab_size, int budget, std::vector<TokenId>& prefix,
                         std::vector<std::vector<TokenId>>& out) {
  std::vector<TokenId> done = prefix;
  done.push_back(Vocabulary::kEos);
  out.push_back(done);
  if (static_cast<int>(prefix.size()) - 1 == budget) return;
  for (TokenId t = 0; t < vocab_size; ++t) {
    if (t == Vocabulary::kEos) continue;
    prefix.push_back(t);
    enumerate_sequences(vocab_size, budget, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

TEST_CASE("log_prob of the zero policy is uniform") {
  PolicyConfig c = small_config();
  PolicyParams p(c);
  p.theta().setZero();
  Rng rng(5);
  Vec img = random_image(rng, c.image_dim);

  std::vector<TokenId> seq = {Vocabulary::kBos, 4, 7, 2, Vocabulary::kEos};
  DecodeResult r = log_prob(seq, img, p);
  Scalar step = std::log(1.0 / c.vocab_size);
  REQUIRE(r.per_token_log_probs.size() == 4);
  for (Scalar lp : r.per_token_log_probs) CHECK(lp == doctest::Approx(step).epsilon(1e-12));
  CHECK(r.log_prob == doctest::Approx(4 * step).epsilon(1e-12));
  CHECK(r.log_prob <= 0.0);

  Scalar sum = 0;
  for (Scalar lp : r.per_token_log_probs) sum += lp;
  CHECK(r.log_prob == doctest::Approx(sum).epsilon(1e-12));

  CHECK_THROWS_AS((void)log_prob({4, 7, Vocabulary::kEos}, img, p), std::invalid_argument);
  CHECK_THROWS_AS((void)log_prob({Vocabulary::kBos, 4}, img, p), std::invalid_argument);
  CHECK_THROWS_AS((void)log_prob({Vocabulary::kBos, 99, Vocabulary::kEos}, img, p),
                  std::out_of_range);
}

TEST_CASE("log_prob matches a scalar re-implementation of the forward pass") {
  PolicyConfig c = small_config();
  PolicyParams p = init_policy(c, 42);
  Rng rng(6);
  Vec img = random_image(rng, c.image_dim);
  std::vector<TokenId> seq = random_sequence(rng, c.vocab_size, 5);

  DecodeResult r = log_prob(seq, img, p);

  // independent forward pass written against the documented recurrence
  Vec h = (p.w_img() * img + p.b_img()).array().tanh();
  Scalar total = 0;
  for (size_t s = 0; s + 1 < seq.size(); ++s) {
    if (s > 0) {
      Vec a = p.w_in() * p.w_emb().col(seq[s]) + p.w_rec() * h + p.b_rec();
      h = a.array().tanh();
    }
    Vec logits = p.w_out() * h + p.b_out();
    Vec lsm = log_softmax(logits);
    total += lsm[seq[s + 1]];
    CHECK(r.per_token_log_probs[s] == doctest::Approx(lsm[seq[s + 1]]).epsilon(1e-12));
    CHECK(softmax(logits).sum() == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(r.log_prob == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("teacher_forcing_loss equals mean NLL and ignores duplication") {
  PolicyConfig c = small_config();
  PolicyParams p = init_policy(c, 3);
  Rng rng(7);
  std::vector<TrainExample> batch;
  for (int i = 0; i < 3; ++i)
    batch.push_back({random_image(rng, c.image_dim), random_sequence(rng, c.vocab_size, 3 + i)});

  p.zero_grad();
  Scalar loss = teacher_forcing_loss(batch, p);
  Vec grad = p.grad();

  Scalar mean_nll = 0;
  for (const TrainExample& ex : batch) mean_nll -= log_prob(ex.tokens, ex.image, p).log_prob;
  mean_nll /= batch.size();
  CHECK(loss == doctest::Approx(mean_nll).epsilon(1e-12));

  std::vector<TrainExample> doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  p.zero_grad();
  Scalar loss2 = teacher_forcing_loss(doubled, p);
  CHECK(loss2 == doctest::Approx(loss).epsilon(1e-12));
  CHECK((p.grad() - grad).cwiseAbs().maxCoeff() < 1e-12);

  std::vector<TrainExample> empty;
  CHECK_THROWS_AS((void)teacher_forcing_loss(empty, p), std::invalid_argument);
}

TEST_CASE("teacher forcing gradient matches central finite differences") {
  PolicyConfig c = small_config();
  int checked = 0;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    PolicyParams p = init_policy(c, seed);
    Rng rng(seed * 1000 + 17);
    std::vector<TrainExample> batch;
    for (int i = 0; i < 2; ++i)
      batch.push_back(
          {random_image(rng, c.image_dim), random_sequence(rng, c.vocab_size, 3 + i)});

    p.zero_grad();
    teacher_forcing_loss(batch, p);
    Vec grad = p.grad();
    p.zero_grad();

    auto loss_at = [&]() {
      PolicyParams q = p;
      q.zero_grad();
      return teacher_forcing_loss(batch, q);
    };
    for (int probe = 0; probe < 12; ++probe) {
      Eigen::Index coord = static_cast<Eigen::Index>(rng.uniform_int(p.theta().size()));
      Scalar fd = central_fd(p, coord, loss_at, 1e-5);
      Scalar denom = std::max<Scalar>(1e-8, std::max(std::abs(fd), std::abs(grad[coord])));
      CHECK(std::abs(grad[coord] - fd) / denom < 1e-4);
      ++checked;
    }
  }
  CHECK(checked >= 100);
}

TEST_CASE("policy_gradient_accumulate: weight linearity and finite differences") {
  PolicyConfig c = small_config();
  PolicyParams p = init_policy(c, 12);
  Rng rng(88);
  Vec img = random_image(rng, c.image_dim);
  std::vector<TokenId> seq = random_sequence(rng, c.vocab_size, 4);

  p.zero_grad();
  Scalar nll0 = policy_gradient_accumulate(seq, img, 0.0, p);
  CHECK(p.grad().cwiseAbs().maxCoeff() == 0.0);
  CHECK(nll0 == doctest::Approx(-log_prob(seq, img, p).log_prob).epsilon(1e-12));

  p.zero_grad();
  policy_gradient_accumulate(seq, img, 1.0, p);
  Vec g1 = p.grad();
  p.zero_grad();
  policy_gradient_accumulate(seq, img, -2.5, p);
  Vec gw = p.grad();
  CHECK((gw + 2.5 * g1).cwiseAbs().maxCoeff() < 1e-9);

  // finite differences of the NLL, weight scales the gradient
  auto nll_at = [&]() { return -log_prob(seq, img, p).log_prob; };
  for (int probe = 0; probe < 40; ++probe) {
    Eigen::Index coord = static_cast<Eigen::Index>(rng.uniform_int(p.theta().size()));
    Scalar fd = central_fd(p, coord, nll_at, 1e-5);
    Scalar denom = std::max<Scalar>(1e-8, std::max(std::abs(fd), std::abs(g1[coord])));
    CHECK(std::abs(g1[coord] - fd) / denom < 1e-4);
  }

  CHECK_THROWS_AS((void)policy_gradient_accumulate(seq, img, std::nan(""), p),
                  std::invalid_argument);
}

TEST_CASE("score function on the two-token single-step example") {
  // logits (0,0), chosen token 0: dNLL/dlogit_0 = softmax_0 - 1 = -0.5,
  // dNLL/dlogit_1 = softmax_1 = +0.5
  Vec logits(2);
  logits << 0.0, 0.0;
  Vec g = nll_logit_gradient(logits, 0);
  CHECK(g[0] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(g[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS((void)nll_logit_gradient(logits, 5), std::out_of_range);
}

TEST_CASE("greedy equals width-1 beam on 200 seeded inputs") {
  PolicyConfig c;
  c.vocab_size = Vocabulary::instance().size();
  c.image_dim = 16;
  c.embed_dim = 6;
  c.hidden_dim = 10;
  for (uint64_t seed = 0; seed < 4; ++seed) {
    PolicyParams p = init_policy(c, seed);
    Rng rng(seed);
    for (int i = 0; i < 50; ++i) {
      Vec img = random_image(rng, c.image_dim);
      DecodeResult g = greedy_decode(img, p, 12);
      DecodeResult b = beam_search(img, p, 1, 12);
      CHECK(g.caption.tokens == b.caption.tokens);
      CHECK(g.log_prob == doctest::Approx(b.log_prob).epsilon(1e-12));
      CHECK(g.caption.tokens.front() == Vocabulary::kBos);
      CHECK(g.caption.tokens.back() == Vocabulary::kEos);
      CHECK(g.caption.tokens.size() <= 12);
      // exactly one EOS, at the end
      CHECK(std::count(g.caption.tokens.begin(), g.caption.tokens.end(), Vocabulary::kEos) == 1);
      // repeated decode is identical
      DecodeResult g2 = greedy_decode(img, p, 12);
      CHECK(g2.caption.tokens == g.caption.tokens);
      // log_prob consistency with the exact scorer
      DecodeResult scored = log_prob(g.caption.tokens, img, p);
      CHECK(scored.log_prob == doctest::Approx(g.log_prob).epsilon(1e-9));
    }
  }
}

TEST_CASE("greedy follows a hand-built forced token chain") {
  PolicyConfig c = small_config();
  PolicyParams p(c);
  p.theta().setZero();
  // Bias logits alone drive the argmax; token 6 wins every step until the
  // budget forces EOS.
  p.b_out()[6] = 5.0;
  Vec img = Vec::Zero(c.image_dim);
  DecodeResult r = greedy_decode(img, p, 5);
  CHECK(r.caption.tokens == std::vector<TokenId>{Vocabulary::kBos, 6, 6, 6, Vocabulary::kEos});

  // ties resolve toward the lower token id: all-zero logits pick BOS (id 0)
  PolicyParams q(c);
  q.theta().setZero();
  DecodeResult t = greedy_decode(img, q, 4);
  CHECK(t.caption.tokens == std::vector<TokenId>{Vocabulary::kBos, 0, 0, Vocabulary::kEos});
}

TEST_CASE("beam search matches exhaustive enumeration for tiny vocabularies") {
  PolicyConfig c;
  c.vocab_size = 4;
  c.image_dim = 3;
  c.embed_dim = 3;
  c.hidden_dim = 4;
  for (uint64_t seed = 1; seed <= 6; ++seed) {
    PolicyParams p = init_policy(c, seed);
    Rng rng(seed + 100);
    Vec img = random_image(rng, c.image_dim);
    for (int max_len : {3, 5}) {
      std::vector<std::vector<TokenId>> all;
      std::vector<TokenId> prefix{Vocabulary::kBos};
      enumerate_sequences(c.vocab_size, max_len - 2, prefix, all);

      // ties by lexicographic order of the raw content window (between the
      // BOS/EOS frame), shorter prefix first
      const std::vector<TokenId>* best = nullptr;
      Scalar best_lp = 0;
      for (const auto& seq : all) {
        Scalar lp = log_prob(seq, img, p).log_prob;
        bool better = !best || lp > best_lp;
        if (best && lp == best_lp)
          better = std::lexicographical_compare(seq.begin() + 1, seq.end() - 1,
                                                best->begin() + 1, best->end() - 1);
        if (better) {
          best = &seq;
          best_lp = lp;
        }
      }
      DecodeResult b = beam_search(img, p, 64, max_len);
      CHECK(b.caption.tokens == *best);
      CHECK(b.log_prob == doctest::Approx(best_lp).epsilon(1e-12));
    }
  }
}

TEST_CASE("beam never scores below greedy at equal length") {
  PolicyConfig c = small_config();
  for (uint64_t seed = 20; seed < 26; ++seed) {
    PolicyParams p = init_policy(c, seed);
    Rng rng(seed);
    Vec img = random_image(rng, c.image_dim);
    DecodeResult g = greedy_decode(img, p, 9);
    DecodeResult b = beam_search(img, p, 3, 9);
    if (b.caption.tokens.size() == g.caption.tokens.size())
      CHECK(b.log_prob >= g.log_prob - 1e-12);
  }
}

TEST_CASE("apply_update semantics and diagnostics") {
  PolicyConfig c = small_config();
  PolicyParams p = init_policy(c, 9);
  Vec before = p.theta();

  p.zero_grad();
  apply_update(p, 0.5);
  CHECK((p.theta() - before).cwiseAbs().maxCoeff() == 0.0);

  p.grad().setConstant(1.0);
  apply_update(p, 0.0);
  CHECK((p.theta() - before).cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.grad().cwiseAbs().maxCoeff() == 0.0);  // buffer zeroed by the step

  p.grad().setConstant(2.0);
  apply_update(p, 0.25);
  CHECK((p.theta() - (before.array() - 0.5).matrix()).cwiseAbs().maxCoeff() < 1e-15);

  p.grad().setZero();
  p.grad()[3] = std::numeric_limits<Scalar>::quiet_NaN();
  CHECK_THROWS_AS(apply_update(p, 0.1), std::runtime_error);
}

TEST_CASE("one teacher forcing step decreases the example loss") {
  PolicyConfig c = small_config();
  PolicyParams p = init_policy(c, 31);
  Rng rng(31);
  std::vector<TrainExample> one = {
      {random_image(rng, c.image_dim), random_sequence(rng, c.vocab_size, 4)}};
  p.zero_grad();
  Scalar before = teacher_forcing_loss(one, p);
  apply_update(p, 1e-3);
  p.zero_grad();
  Scalar after = teacher_forcing_loss(one, p);
  p.zero_grad();
  CHECK(after < before);
}

TEST_CASE("checkpoint round-trip") {
  PolicyConfig c = small_config();
  PolicyParams p = init_policy(c, 77);
  std::string path = "policy_roundtrip_test.ckpt";
  save_checkpoint(p, path);
  PolicyParams l = load_checkpoint(path);
  CHECK(l.config() == c);
  CHECK((l.theta() - p.theta()).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());

  CHECK_THROWS_AS((void)load_checkpoint("missing_policy_file.ckpt"), UserError);
}

TEST_CASE("init_policy draws weights at scale 0.1 and zero biases") {
  PolicyConfig c = small_config();
  PolicyParams p = init_policy(c, 7);
  PolicyParams q = init_policy(c, 7);
  CHECK((p.theta() - q.theta()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.b_img().cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.b_rec().cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.b_out().cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.w_out().cwiseAbs().maxCoeff() > 0.0);
  CHECK(p.w_out().cwiseAbs().maxCoeff() < 1.0);  // 0.1 scale keeps draws small
  PolicyParams r = init_policy(c, 8);
  CHECK((p.theta() - r.theta()).cwiseAbs().maxCoeff() > 0.0);
}

#include "distcap/policy.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "distcap/math.hpp"

namespace distcap {
namespace {

constexpr uint64_t kPolicyStream = 0x50;

struct Offsets {
  int w_img, b_img, w_emb, w_in, w_rec, b_rec, w_out, b_out, total;
};

Offsets offsets_for(const PolicyConfig& c) {
  Offsets o{};
  int at = 0;
  o.w_img = at; at += c.hidden_dim * c.image_dim;
  o.b_img = at; at += c.hidden_dim;
  o.w_emb = at; at += c.embed_dim * c.vocab_size;
  o.w_in = at; at += c.hidden_dim * c.embed_dim;
  o.w_rec = at; at += c.hidden_dim * c.hidden_dim;
  o.b_rec = at; at += c.hidden_dim;
  o.w_out = at; at += c.vocab_size * c.hidden_dim;
  o.b_out = at; at += c.vocab_size;
  o.total = at;
  return o;
}

void validate_sequence(const std::vector<TokenId>& tokens, const PolicyConfig& c) {
  if (tokens.size() < 2 || tokens.front() != Vocabulary::kBos || tokens.back() != Vocabulary::kEos)
    throw std::invalid_argument("policy: sequence must be BOS-framed with terminal EOS");
  for (TokenId t : tokens)
    if (t < 0 || t >= c.vocab_size) throw std::out_of_range("policy: token id out of range");
}

Vec initial_hidden(const Vec& image, const PolicyParams& p) {
  if (image.size() != p.config().image_dim)
    throw std::invalid_argument("policy: image embedding dimension mismatch");
  return (p.w_img() * image + p.b_img()).array().tanh().matrix();
}

Vec advance(TokenId prev, const Vec& h, const PolicyParams& p) {
  return (p.w_in() * p.w_emb().col(prev) + p.w_rec() * h + p.b_rec()).array().tanh().matrix();
}

// Lowest index wins ties.
TokenId argmax_token(const Vec& v) {
  TokenId best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace

uint64_t PolicyConfig::hash() const {
  int fields[4] = {vocab_size, image_dim, embed_dim, hidden_dim};
  return fnv1a(fields, sizeof(fields));
}

int PolicyConfig::param_count() const { return offsets_for(*this).total; }

PolicyParams::PolicyParams(const PolicyConfig& config) : config_(config) {
  if (config.vocab_size < 2 || config.image_dim < 1 || config.embed_dim < 1 ||
      config.hidden_dim < 1)
    throw std::invalid_argument("policy: bad config dimensions");
  theta_ = Vec::Zero(config.param_count());
  grad_ = Vec::Zero(config.param_count());
}

#define DISTCAP_BLOCK(name, buffer, rows, cols)                                      \
  Eigen::Map<Mat> PolicyParams::name() {                                             \
    Offsets o = offsets_for(config_);                                                \
    return {buffer.data() + o.name, rows, cols};                                     \
  }                                                                                  \
  Eigen::Map<const Mat> PolicyParams::name() const {                                 \
    Offsets o = offsets_for(config_);                                                \
    return {buffer.data() + o.name, rows, cols};                                     \
  }                                                                                  \
  Eigen::Map<Mat> PolicyParams::g_##name() {                                         \
    Offsets o = offsets_for(config_);                                                \
    return {grad_.data() + o.name, rows, cols};                                      \
  }

#define DISTCAP_VEC_BLOCK(name, buffer, rows)                                        \
  Eigen::Map<Vec> PolicyParams::name() {                                             \
    Offsets o = offsets_for(config_);                                                \
    return {buffer.data() + o.name, rows};                                           \
  }                                                                                  \
  Eigen::Map<const Vec> PolicyParams::name() const {                                 \
    Offsets o = offsets_for(config_);                                                \
    return {buffer.data() + o.name, rows};                                           \
  }                                                                                  \
  Eigen::Map<Vec> PolicyParams::g_##name() {                                         \
    Offsets o = offsets_for(config_);                                                \
    return {grad_.data() + o.name, rows};                                            \
  }

DISTCAP_BLOCK(w_img, theta_, config_.hidden_dim, config_.image_dim)
DISTCAP_VEC_BLOCK(b_img, theta_, config_.hidden_dim)
DISTCAP_BLOCK(w_emb, theta_, config_.embed_dim, config_.vocab_size)
DISTCAP_BLOCK(w_in, theta_, config_.hidden_dim, config_.embed_dim)
DISTCAP_BLOCK(w_rec, theta_, config_.hidden_dim, config_.hidden_dim)
DISTCAP_VEC_BLOCK(b_rec, theta_, config_.hidden_dim)
DISTCAP_BLOCK(w_out, theta_, config_.vocab_size, config_.hidden_dim)
DISTCAP_VEC_BLOCK(b_out, theta_, config_.vocab_size)

#undef DISTCAP_BLOCK
#undef DISTCAP_VEC_BLOCK

PolicyParams init_policy(const PolicyConfig& config, uint64_t seed) {
  PolicyParams p(config);
  Rng rng(derive_seed(seed, kPolicyStream));
  for (Eigen::Index i = 0; i < p.theta().size(); ++i) p.theta()[i] = 0.1 * rng.normal();
  p.b_img().setZero();
  p.b_rec().setZero();
  p.b_out().setZero();
  return p;
}

DecodeResult log_prob(const std::vector<TokenId>& tokens, const Vec& image,
                      const PolicyParams& params) {
  validate_sequence(tokens, params.config());
  DecodeResult r;
  r.caption.tokens = tokens;
  Vec h = initial_hidden(image, params);
  for (size_t s = 1; s < tokens.size(); ++s) {
    h = advance(tokens[s - 1], h, params);
    Vec lp = log_softmax(params.w_out() * h + params.b_out());
    r.per_token_log_probs.push_back(lp[tokens[s]]);
    r.log_prob += lp[tokens[s]];
  }
  return r;
}

Vec nll_logit_gradient(const Vec& logits, TokenId target) {
  if (target < 0 || target >= logits.size())
    throw std::out_of_range("nll_logit_gradient: target out of range");
  Vec g = softmax(logits);
  g[target] -= 1.0;
  return g;
}

Scalar policy_gradient_accumulate(const std::vector<TokenId>& tokens, const Vec& image,
                                  Scalar weight, PolicyParams& params) {
  if (!std::isfinite(weight))
    throw std::invalid_argument("policy_gradient_accumulate: non-finite weight");
  validate_sequence(tokens, params.config());
  const int S = static_cast<int>(tokens.size()) - 1;
  const int H = params.config().hidden_dim;

  std::vector<Vec> h(S + 1);
  std::vector<Vec> probs(S + 1);
  h[0] = initial_hidden(image, params);
  Scalar nll = 0;
  for (int s = 1; s <= S; ++s) {
    h[s] = advance(tokens[s - 1], h[s - 1], params);
    Vec lp = log_softmax(params.w_out() * h[s] + params.b_out());
    nll -= lp[tokens[s]];
    probs[s] = lp.array().exp().matrix();
  }
  if (weight == 0.0) return nll;

  Vec dh = Vec::Zero(H);
  for (int s = S; s >= 1; --s) {
    Vec dlogits = probs[s];
    dlogits[tokens[s]] -= 1.0;
    dlogits *= weight;
    params.g_w_out() += dlogits * h[s].transpose();
    params.g_b_out() += dlogits;
    dh += params.w_out().transpose() * dlogits;
    Vec da = dh.cwiseProduct((1.0 - h[s].array().square()).matrix());
    params.g_w_in() += da * params.w_emb().col(tokens[s - 1]).transpose();
    params.g_w_rec() += da * h[s - 1].transpose();
    params.g_b_rec() += da;
    params.g_w_emb().col(tokens[s - 1]) += params.w_in().transpose() * da;
    dh = params.w_rec().transpose() * da;
  }
  Vec da0 = dh.cwiseProduct((1.0 - h[0].array().square()).matrix());
  params.g_w_img() += da0 * image.transpose();
  params.g_b_img() += da0;
  return nll;
}

Scalar teacher_forcing_loss(const std::vector<TrainExample>& batch, PolicyParams& params) {
  if (batch.empty()) throw std::invalid_argument("teacher_forcing_loss: empty batch");
  Scalar total = 0;
  Scalar w = 1.0 / static_cast<Scalar>(batch.size());
  for (const TrainExample& ex : batch)
    total += policy_gradient_accumulate(ex.tokens, ex.image, w, params);
  return total * w;
}

DecodeResult greedy_decode(const Vec& image, const PolicyParams& params, int max_len) {
  if (max_len < 2) throw std::invalid_argument("greedy_decode: max_len must be >= 2");
  const int budget = max_len - 2;
  DecodeResult r;
  r.caption.provenance = Provenance::kGreedy;
  r.caption.tokens.push_back(Vocabulary::kBos);

  Vec h = initial_hidden(image, params);
  TokenId prev = Vocabulary::kBos;
  int emitted = 0;
  for (;;) {
    h = advance(prev, h, params);
    Vec lp = log_softmax(params.w_out() * h + params.b_out());
    TokenId pick = emitted == budget ? Vocabulary::kEos : argmax_token(lp);
    r.caption.tokens.push_back(pick);
    r.per_token_log_probs.push_back(lp[pick]);
    r.log_prob += lp[pick];
    if (pick == Vocabulary::kEos) break;
    prev = pick;
    ++emitted;
  }
  return r;
}

namespace {

struct Hypothesis {
  std::vector<TokenId> content;        // tokens after BOS, EOS excluded
  std::vector<Scalar> lps;
  Scalar score = 0;
  Vec h;  // state ready to score the next token
};

bool lex_less(const std::vector<TokenId>& a, TokenId ta, const std::vector<TokenId>& b,
              TokenId tb) {
  size_t n = std::min(a.size(), b.size());
  for (size_t i = 0; i < n; ++i)
    if (a[i] != b[i]) return a[i] < b[i];
  if (a.size() < b.size()) return ta <= b[a.size()];  // equal means a+ta is a strict prefix
  if (a.size() > b.size()) return a[b.size()] < tb;
  return ta < tb;
}

}  // namespace

DecodeResult beam_search(const Vec& image, const PolicyParams& params, int beam_size,
                         int max_len) {
  if (beam_size < 1) throw std::invalid_argument("beam_search: beam_size must be >= 1");
  if (max_len < 2) throw std::invalid_argument("beam_search: max_len must be >= 2");
  const int budget = max_len - 2;
  const int V = params.config().vocab_size;

  std::vector<Hypothesis> active(1);
  active[0].h = advance(Vocabulary::kBos, initial_hidden(image, params), params);

  std::vector<Hypothesis> finished;
  auto retire = [&](Hypothesis hyp, Scalar lp_eos) {
    hyp.content.push_back(Vocabulary::kEos);
    hyp.lps.push_back(lp_eos);
    hyp.score += lp_eos;
    hyp.h.resize(0);
    finished.push_back(std::move(hyp));
  };

  for (int step = 0; !active.empty(); ++step) {
    std::vector<Vec> lp(active.size());
    for (size_t i = 0; i < active.size(); ++i)
      lp[i] = log_softmax(params.w_out() * active[i].h + params.b_out());

    if (step == budget) {
      for (size_t i = 0; i < active.size(); ++i)
        retire(std::move(active[i]), lp[i][Vocabulary::kEos]);
      break;
    }

    struct Candidate {
      Scalar score;
      int hyp;
      TokenId token;
    };
    std::vector<Candidate> cands;
    cands.reserve(active.size() * V);
    for (size_t i = 0; i < active.size(); ++i)
      for (TokenId t = 0; t < V; ++t)
        cands.push_back({active[i].score + lp[i][t], static_cast<int>(i), t});
    auto better = [&](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      return lex_less(active[a.hyp].content, a.token, active[b.hyp].content, b.token);
    };
    size_t keep = std::min(cands.size(), static_cast<size_t>(beam_size));
    std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(), better);
    cands.resize(keep);

    std::vector<Hypothesis> next;
    next.reserve(keep);
    for (const Candidate& c : cands) {
      const Hypothesis& parent = active[c.hyp];
      if (c.token == Vocabulary::kEos) {
        retire(parent, lp[c.hyp][c.token]);
        continue;
      }
      Hypothesis child;
      child.content = parent.content;
      child.content.push_back(c.token);
      child.lps = parent.lps;
      child.lps.push_back(lp[c.hyp][c.token]);
      child.score = c.score;
      child.h = advance(c.token, parent.h, params);
      next.push_back(std::move(child));
    }
    active = std::move(next);
  }

  const Hypothesis* best = nullptr;
  for (const Hypothesis& f : finished) {
    if (!best || f.score > best->score ||
        (f.score == best->score &&
         std::lexicographical_compare(f.content.begin(), f.content.end(),
                                      best->content.begin(), best->content.end())))
      best = &f;
  }
  // A finished hypothesis always exists: the budget step retires every
  // survivor and beam_size >= 1 keeps at least one candidate per step.

  DecodeResult r;
  r.caption.provenance = Provenance::kBeam;
  r.caption.tokens.push_back(Vocabulary::kBos);
  r.caption.tokens.insert(r.caption.tokens.end(), best->content.begin(), best->content.end());
  r.per_token_log_probs = best->lps;
  r.log_prob = best->score;
  return r;
}

void apply_update(PolicyParams& params, Scalar learning_rate) {
  const Vec& g = params.grad();
  if (!g.allFinite()) {
    for (Eigen::Index i = 0; i < g.size(); ++i)
      if (!std::isfinite(g[i])) {
        std::ostringstream msg;
        msg << "apply_update: non-finite gradient at coordinate " << i << " (" << g[i] << ")";
        throw std::runtime_error(msg.str());
      }
  }
  params.theta() -= learning_rate * g;
  params.zero_grad();
  if (!params.theta().allFinite())
    throw std::runtime_error("apply_update: parameters became non-finite");
}

void save_checkpoint(const PolicyParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UserError("cannot open checkpoint for writing: " + path);
  const PolicyConfig& c = params.config();
  out << "distcap-checkpoint 1 " << c.hash() << ' ' << c.vocab_size << ' ' << c.image_dim << ' '
      << c.embed_dim << ' ' << c.hidden_dim << ' ' << params.theta().size() << '\n';
  for (Eigen::Index i = 0; i < params.theta().size(); ++i)
    out << fmt_g17(params.theta()[i]) << '\n';
  if (!out) throw UserError("write failed: " + path);
}

PolicyParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open checkpoint: " + path);
  std::string magic;
  int version = 0;
  uint64_t stored_hash = 0;
  PolicyConfig c;
  Eigen::Index n = 0;
  in >> magic >> version >> stored_hash >> c.vocab_size >> c.image_dim >> c.embed_dim >>
      c.hidden_dim >> n;
  if (magic != "distcap-checkpoint" || version != 1)
    throw UserError("not a checkpoint file (bad header): " + path);
  if (c.hash() != stored_hash)
    throw UserError("checkpoint config hash mismatch: " + path);
  PolicyParams p(c);
  if (n != p.theta().size()) throw UserError("checkpoint parameter count mismatch: " + path);
  for (Eigen::Index i = 0; i < n; ++i) in >> p.theta()[i];
  if (!in) throw UserError("corrupt checkpoint: " + path);
  return p;
}

}  // namespace distcap

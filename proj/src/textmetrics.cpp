#include "distcap/textmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace distcap {
namespace {

constexpr Scalar kSmoothEpsilon = 1e-9;

uint64_t pack_window(const std::vector<TokenId>& t, int start, int n) {
  uint64_t key = 0;
  for (int i = 0; i < n; ++i) key = (key << 16) | static_cast<uint64_t>(t[start + i]);
  return key;
}

}  // namespace

NgramProfile ngram_profile(const std::vector<TokenId>& tokens) {
  std::vector<TokenId> content = content_tokens(tokens);
  for (TokenId t : content)
    if (t < 0 || t >= (1 << 16)) throw std::out_of_range("ngram_profile: token id too large");
  NgramProfile p;
  p.length = static_cast<int>(content.size());
  for (int n = 1; n <= 4; ++n)
    for (int i = 0; i + n <= p.length; ++i) ++p.counts[n - 1][pack_window(content, i, n)];
  return p;
}

Scalar bleu4(const std::vector<TokenId>& candidate,
             const std::vector<std::vector<TokenId>>& references, bool smooth) {
  if (references.empty()) throw std::invalid_argument("bleu4: need at least one reference");
  NgramProfile cand = ngram_profile(candidate);
  if (cand.length == 0) throw std::invalid_argument("bleu4: empty candidate");

  std::vector<NgramProfile> refs;
  refs.reserve(references.size());
  for (const auto& r : references) refs.push_back(ngram_profile(r));

  Scalar log_precisions = 0;
  for (int n = 1; n <= 4; ++n) {
    int matched = 0;
    for (const auto& [key, count] : cand.counts[n - 1]) {
      int best = 0;
      for (const NgramProfile& r : refs) {
        auto it = r.counts[n - 1].find(key);
        if (it != r.counts[n - 1].end()) best = std::max(best, it->second);
      }
      matched += std::min(count, best);
    }
    int total = cand.total(n);
    Scalar p = total > 0 ? static_cast<Scalar>(matched) / total : 0.0;
    if (smooth) p += kSmoothEpsilon;
    if (p == 0.0) return 0.0;
    log_precisions += std::log(p);
  }

  // Closest reference length, ties toward the shorter one.
  int c = cand.length;
  int r_best = refs[0].length;
  for (const NgramProfile& r : refs) {
    int d_new = std::abs(r.length - c), d_old = std::abs(r_best - c);
    if (d_new < d_old || (d_new == d_old && r.length < r_best)) r_best = r.length;
  }
  Scalar bp = std::exp(std::min(0.0, 1.0 - static_cast<Scalar>(r_best) / c));
  return bp * std::exp(log_precisions / 4.0);
}

Scalar rouge_l(const std::vector<TokenId>& candidate, const std::vector<TokenId>& reference) {
  std::vector<TokenId> c = content_tokens(candidate);
  std::vector<TokenId> r = content_tokens(reference);
  if (c.empty() || r.empty()) return 0.0;

  std::vector<std::vector<int>> dp(c.size() + 1, std::vector<int>(r.size() + 1, 0));
  for (size_t i = 1; i <= c.size(); ++i)
    for (size_t j = 1; j <= r.size(); ++j)
      dp[i][j] = c[i - 1] == r[j - 1] ? dp[i - 1][j - 1] + 1
                                      : std::max(dp[i - 1][j], dp[i][j - 1]);
  int lcs = dp[c.size()][r.size()];
  if (lcs == 0) return 0.0;

  Scalar precision = static_cast<Scalar>(lcs) / c.size();
  Scalar recall = static_cast<Scalar>(lcs) / r.size();
  constexpr Scalar beta2 = 1.2 * 1.2;
  return (1.0 + beta2) * precision * recall / (recall + beta2 * precision);
}

CiderCorpus build_cider_corpus(const std::vector<std::vector<TokenId>>& documents) {
  CiderCorpus corpus;
  corpus.n_docs = static_cast<int>(documents.size());
  for (const auto& doc : documents) {
    NgramProfile p = ngram_profile(doc);
    for (int n = 0; n < 4; ++n)
      for (const auto& [key, count] : p.counts[n]) ++corpus.document_frequency[n][key];
  }
  return corpus;
}

namespace {

// tf-idf weights for one n; returns the vector's squared norm.
Scalar tfidf(const std::unordered_map<uint64_t, int>& counts,
             const std::unordered_map<uint64_t, int>& df, int n_docs,
             std::unordered_map<uint64_t, Scalar>& out) {
  Scalar norm2 = 0;
  for (const auto& [key, count] : counts) {
    auto it = df.find(key);
    int d = it == df.end() ? 0 : it->second;
    Scalar idf = std::log(static_cast<Scalar>(n_docs) / std::max(1, d));
    Scalar w = count * idf;
    out.emplace(key, w);
    norm2 += w * w;
  }
  return norm2;
}

}  // namespace

Scalar cider(const std::vector<TokenId>& candidate,
             const std::vector<std::vector<TokenId>>& references, const CiderCorpus& corpus) {
  if (corpus.n_docs == 0) throw std::invalid_argument("cider: empty corpus");
  if (references.empty()) throw std::invalid_argument("cider: need at least one reference");

  NgramProfile cand = ngram_profile(candidate);
  std::vector<NgramProfile> refs;
  refs.reserve(references.size());
  for (const auto& ref : references) refs.push_back(ngram_profile(ref));

  Scalar total = 0;
  for (int n = 0; n < 4; ++n) {
    std::unordered_map<uint64_t, Scalar> cw;
    Scalar c_norm2 = tfidf(cand.counts[n], corpus.document_frequency[n], corpus.n_docs, cw);

    Scalar avg = 0;
    for (const NgramProfile& rp : refs) {
      std::unordered_map<uint64_t, Scalar> rw;
      Scalar r_norm2 = tfidf(rp.counts[n], corpus.document_frequency[n], corpus.n_docs, rw);
      if (c_norm2 == 0 || r_norm2 == 0) continue;  // zero vectors contribute 0
      Scalar dot = 0;
      for (const auto& [key, w] : cw) {
        auto it = rw.find(key);
        if (it != rw.end()) dot += w * it->second;
      }
      avg += dot / std::sqrt(c_norm2 * r_norm2);
    }
    total += 10.0 * avg / references.size();
  }
  return total / 4.0;
}

Scalar self_bleu(const std::vector<std::vector<TokenId>>& captions, bool smooth) {
  if (captions.size() < 2) throw std::invalid_argument("self_bleu: need at least 2 captions");
  Scalar total = 0;
  for (size_t i = 0; i < captions.size(); ++i) {
    std::vector<std::vector<TokenId>> others;
    others.reserve(captions.size() - 1);
    for (size_t j = 0; j < captions.size(); ++j)
      if (j != i) others.push_back(captions[j]);
    total += bleu4(captions[i], others, smooth);
  }
  return total / captions.size();
}

}  // namespace distcap

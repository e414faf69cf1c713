// Reference-based caption metrics: BLEU-4, ROUGE-L, CIDEr, Self-BLEU.
// All operate on token ids; BOS/EOS are stripped internally.
#pragma once

#include <array>
#include <unordered_map>
#include <vector>

#include "distcap/common.hpp"
#include "distcap/world.hpp"

namespace distcap {

// N-gram multisets for n = 1..4 keyed by 16-bit-packed token windows.
struct NgramProfile {
  std::array<std::unordered_map<uint64_t, int>, 4> counts;
  int length = 0;

  int total(int n) const { return std::max(0, length - n + 1); }
};

NgramProfile ngram_profile(const std::vector<TokenId>& tokens);

// Clipped-precision BLEU with brevity penalty exp(min(0, 1 - r/c)), r the
// reference length closest to c (ties toward the shorter reference).
// Unsmoothed by default; smoothing adds 1e-9 to every precision.
Scalar bleu4(const std::vector<TokenId>& candidate,
             const std::vector<std::vector<TokenId>>& references, bool smooth = false);

// LCS F-measure with beta = 1.2 weighting recall.
Scalar rouge_l(const std::vector<TokenId>& candidate, const std::vector<TokenId>& reference);

struct CiderCorpus {
  std::array<std::unordered_map<uint64_t, int>, 4> document_frequency;
  int n_docs = 0;
};

CiderCorpus build_cider_corpus(const std::vector<std::vector<TokenId>>& documents);

// Mean over n of 10x the average tf-idf cosine against each reference;
// idf = ln(N / max(1, df)); zero-vector pairs contribute 0.
Scalar cider(const std::vector<TokenId>& candidate,
             const std::vector<std::vector<TokenId>>& references, const CiderCorpus& corpus);

// Mean BLEU-4 of each caption against all the others.
Scalar self_bleu(const std::vector<std::vector<TokenId>>& captions, bool smooth = false);

}  // namespace distcap

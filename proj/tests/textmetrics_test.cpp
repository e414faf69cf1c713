#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "distcap/textmetrics.hpp"
#include "distcap/vocab.hpp"
#include "distcap/world.hpp"

using namespace distcap;

namespace {

using Tokens = std::vector<TokenId>;
using TokenLists = std::vector<std::vector<TokenId>>;

// From-scratch clipped n-gram precision using ordered maps over raw windows.
std::pair<int, int> clipped_precision(const Tokens& cand, const TokenLists& refs, int n) {
  auto grams = [n](const Tokens& s) {
    std::map<Tokens, int> m;
    for (int i = 0; i + n <= static_cast<int>(s.size()); ++i)
      ++m[Tokens(s.begin() + i, s.begin() + i + n)];
    return m;
  };
  auto cg = grams(cand);
  int matched = 0, total = 0;
  for (const auto& [g, c] : cg) {
    int best = 0;
    for (const auto& r : refs) {
      auto rg = grams(r);
      auto it = rg.find(g);
      if (it != rg.end()) best = std::max(best, it->second);
    }
    matched += std::min(c, best);
    total += c;
  }
  return {matched, total};
}

// Clean-room tf-idf cosine CIDEr for small corpora.
double cider_oracle(const TokenLists& corpus_docs, const Tokens& cand, const TokenLists& refs) {
  auto grams = [](const Tokens& s, int n) {
    std::map<Tokens, int> m;
    for (int i = 0; i + n <= static_cast<int>(s.size()); ++i)
      ++m[Tokens(s.begin() + i, s.begin() + i + n)];
    return m;
  };
  double total = 0;
  for (int n = 1; n <= 4; ++n) {
    std::map<Tokens, int> df;
    for (const auto& d : corpus_docs)
      for (const auto& [g, c] : grams(d, n)) ++df[g];
    auto weigh = [&](const Tokens& s) {
      std::map<Tokens, double> w;
      for (const auto& [g, c] : grams(s, n)) {
        auto it = df.find(g);
        int seen = it == df.end() ? 0 : it->second;
        w[g] = c * std::log(static_cast<double>(corpus_docs.size()) / std::max(1, seen));
      }
      return w;
    };
    auto cw = weigh(cand);
    double cn = 0;
    for (const auto& [g, v] : cw) cn += v * v;
    double avg = 0;
    for (const auto& r : refs) {
      auto rw = weigh(r);
      double rn = 0;
      for (const auto& [g, v] : rw) rn += v * v;
      if (cn == 0 || rn == 0) continue;
      double dot = 0;
      for (const auto& [g, v] : cw) {
        auto it = rw.find(g);
        if (it != rw.end()) dot += v * it->second;
      }
      avg += dot / std::sqrt(cn * rn);
    }
    total += 10.0 * avg / static_cast<double>(refs.size());
  }
  return total / 4.0;
}

}  // namespace

TEST_CASE("ngram_profile: counts, totals, frame stripping, range check") {
  Tokens seq = {2, 2, 3, 2};
  NgramProfile p = ngram_profile(seq);
  CHECK(p.length == 4);
  CHECK(p.total(1) == 4);
  CHECK(p.total(2) == 3);
  CHECK(p.total(3) == 2);
  CHECK(p.total(4) == 1);
  CHECK(p.counts[0].size() == 2);  // unigrams 2 and 3
  CHECK(p.counts[0].at(2) == 3);
  CHECK(p.counts[0].at(3) == 1);
  CHECK(p.counts[1].size() == 3);  // (2,2), (2,3), (3,2)
  CHECK(p.counts[3].size() == 1);

  Tokens framed = {Vocabulary::kBos, 2, 2, 3, 2, Vocabulary::kEos};
  NgramProfile q = ngram_profile(framed);
  CHECK(q.length == 4);
  CHECK(q.counts[3] == p.counts[3]);

  CHECK_THROWS_AS(ngram_profile(Tokens{1 << 16}), std::out_of_range);

  NgramProfile empty = ngram_profile(Tokens{});
  CHECK(empty.length == 0);
  CHECK(empty.total(1) == 0);
}

TEST_CASE("bleu4: identical candidate scores exactly 1") {
  Tokens ref = {53, 10, 11, 54, 53, 13};
  CHECK(bleu4(ref, {ref}) == 1.0);
  Tokens framed = {Vocabulary::kBos, 53, 10, 11, 54, 53, 13, Vocabulary::kEos};
  CHECK(bleu4(framed, {ref}) == 1.0);
  CHECK(bleu4(ref, {{9, 8, 7, 6}, ref}) == 1.0);
}

TEST_CASE("bleu4: candidate sharing no unigram scores exactly 0") {
  CHECK(bleu4({2, 3, 4, 5}, {{20, 21, 22, 23}}) == 0.0);
  CHECK(bleu4({2, 3, 4, 5}, {{20, 21, 22, 23}, {30, 31}}) == 0.0);
}

TEST_CASE("bleu4: hand-counted six-vs-seven token example") {
  // "the red cube on the mat" vs "the red cube sits on the mat"
  // with the=53, on=54 from the caption vocabulary.
  const TokenId the = 53, on = 54, red = 10, cube = 11, sits = 12, mat = 13;
  Tokens cand = {the, red, cube, on, the, mat};
  TokenLists refs = {{the, red, cube, sits, on, the, mat}};

  auto [m1, t1] = clipped_precision(cand, refs, 1);
  auto [m2, t2] = clipped_precision(cand, refs, 2);
  auto [m3, t3] = clipped_precision(cand, refs, 3);
  auto [m4, t4] = clipped_precision(cand, refs, 4);
  CHECK(m1 == 6);
  CHECK(t1 == 6);
  CHECK(m2 == 4);
  CHECK(t2 == 5);
  CHECK(m3 == 2);
  CHECK(t3 == 4);
  CHECK(m4 == 0);
  CHECK(t4 == 3);

  CHECK(bleu4(cand, refs) == 0.0);  // zero 4-gram precision, unsmoothed

  double eps = 1e-9;
  double bp = std::exp(1.0 - 7.0 / 6.0);
  double expected = bp * std::exp((std::log(1.0 + eps) + std::log(0.8 + eps) +
                                   std::log(0.5 + eps) + std::log(eps)) /
                                  4.0);
  double smoothed = bleu4(cand, refs, true);
  CHECK(smoothed == doctest::Approx(expected).epsilon(1e-9));
  CHECK(smoothed > 0.0);
  CHECK(smoothed < 0.01);
}

TEST_CASE("bleu4: brevity penalty uses the closest reference, ties to the shorter") {
  // Equidistant references of lengths 3 and 5 around a length-4 candidate:
  // picking the shorter one leaves the penalty at 1.
  Tokens cand = {2, 3, 4, 5};
  CHECK(bleu4(cand, {{2, 3, 4}, {2, 3, 4, 5, 6}}) == 1.0);
  // A single longer reference applies exp(1 - r/c).
  double penalized = bleu4(cand, {{2, 3, 4, 5, 6, 7}});
  CHECK(penalized == doctest::Approx(std::exp(1.0 - 6.0 / 4.0)).epsilon(1e-12));
  // Reference shorter than the candidate: no penalty, clipping bites instead.
  Tokens longer = {2, 3, 4, 5, 2, 3, 4, 5};
  double clipped = bleu4(longer, {{2, 3, 4, 5}});
  // p1 = 4/8, p2 = 3/7, p3 = 2/6, p4 = 1/5 with BP = 1.
  double want = std::exp((std::log(4.0 / 8.0) + std::log(3.0 / 7.0) +
                          std::log(2.0 / 6.0) + std::log(1.0 / 5.0)) /
                         4.0);
  CHECK(clipped == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("bleu4: any zero precision zeroes the unsmoothed score") {
  // Shared bigrams but no shared trigram.
  CHECK(bleu4({2, 3, 4, 5}, {{2, 3, 9, 4, 5, 9}}) == 0.0);
  // Candidate too short to own a 4-gram.
  CHECK(bleu4({2, 3, 4}, {{2, 3, 4}}) == 0.0);
  CHECK(bleu4({2, 3, 4}, {{2, 3, 4}}, true) > 0.0);  // smoothing rescues it
}

TEST_CASE("bleu4: invariant to reference order; rejects bad input") {
  Tokens cand = {2, 3, 4, 5, 6};
  TokenLists refs = {{2, 3, 4, 9, 9}, {3, 4, 5, 6}, {2, 3, 4, 5, 6, 7, 8}};
  TokenLists shuffled = {refs[2], refs[0], refs[1]};
  CHECK(bleu4(cand, refs) == bleu4(cand, shuffled));
  CHECK(bleu4(cand, refs, true) == bleu4(cand, shuffled, true));

  CHECK_THROWS_AS(bleu4(cand, {}), std::invalid_argument);
  CHECK_THROWS_AS(bleu4({}, refs), std::invalid_argument);
  Tokens frame_only = {Vocabulary::kBos, Vocabulary::kEos};
  CHECK_THROWS_AS(bleu4(frame_only, refs), std::invalid_argument);
}

TEST_CASE("rouge_l: trivial endpoints") {
  Tokens a = {2, 3, 4, 5};
  CHECK(rouge_l(a, a) == 1.0);
  Tokens framed = {Vocabulary::kBos, 2, 3, 4, 5, Vocabulary::kEos};
  CHECK(rouge_l(framed, a) == 1.0);
  CHECK(rouge_l(a, {20, 21, 22}) == 0.0);
  CHECK(rouge_l({}, a) == 0.0);
  CHECK(rouge_l(a, {}) == 0.0);
}

TEST_CASE("rouge_l: crossing pair gives LCS 3 and the beta-weighted F-measure") {
  // "a b c d" vs "a c b d": the swap caps the LCS at 3.
  Tokens cand = {2, 3, 4, 5};
  Tokens ref = {2, 4, 3, 5};
  double p = 0.75, r = 0.75, b2 = 1.2 * 1.2;
  double expected = (1.0 + b2) * p * r / (r + b2 * p);
  CHECK(rouge_l(cand, ref) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(rouge_l(cand, ref) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("rouge_l: recall weighting breaks candidate/reference symmetry") {
  Tokens full = {2, 3, 4, 5, 6, 7};
  Tokens part = {2, 3, 4};
  double hi_recall = rouge_l(full, part);   // recall 1, precision 1/2
  double lo_recall = rouge_l(part, full);   // recall 1/2, precision 1
  CHECK(hi_recall > lo_recall);  // beta > 1 favors recall
}

TEST_CASE("cider: identical pair with informative n-grams scores 10") {
  TokenLists docs = {{2, 3, 4, 5}, {2, 3, 6, 7}, {8, 9, 10, 2}};
  CiderCorpus corpus = build_cider_corpus(docs);
  CHECK(corpus.n_docs == 3);
  CHECK(cider({2, 3, 4, 5}, {{2, 3, 4, 5}}, corpus) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("cider: disjoint n-grams score exactly 0") {
  TokenLists docs = {{2, 3, 4, 5}, {20, 21, 22, 23}};
  CiderCorpus corpus = build_cider_corpus(docs);
  CHECK(cider({2, 3, 4, 5}, {{20, 21, 22, 23}}, corpus) == 0.0);
}

TEST_CASE("cider: three-sentence toy corpus matches the tf-idf oracle") {
  TokenLists docs = {{2, 3, 4, 5}, {2, 3, 6, 7}, {8, 9, 10, 2}};
  CiderCorpus corpus = build_cider_corpus(docs);

  Tokens cand = {2, 3, 4, 7};
  TokenLists refs = {{2, 3, 4, 5}, {2, 3, 6, 7}};
  double got = cider(cand, refs, corpus);
  double want = cider_oracle(docs, cand, refs);
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
  CHECK(got > 0.0);
  CHECK(got < 10.0);

  // Every document of the corpus scored against itself.
  for (const auto& d : docs)
    CHECK(cider(d, {d}, corpus) == doctest::Approx(cider_oracle(docs, d, {d})).epsilon(1e-12));
}

TEST_CASE("cider: unseen n-grams fall back to the df floor") {
  TokenLists docs = {{2, 3, 4, 5}, {2, 3, 6, 7}, {8, 9, 10, 2}};
  CiderCorpus corpus = build_cider_corpus(docs);
  // Token 40 never appears in the corpus; df floors at 1, idf = ln 3 > 0.
  double got = cider({40, 41, 42, 43}, {{40, 41, 42, 43}}, corpus);
  CHECK(got == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("cider: duplicating the reference list leaves the score unchanged") {
  TokenLists docs = {{2, 3, 4, 5}, {2, 3, 6, 7}, {8, 9, 10, 2}};
  CiderCorpus corpus = build_cider_corpus(docs);
  Tokens cand = {2, 3, 4, 7};
  TokenLists refs = {{2, 3, 4, 5}, {2, 3, 6, 7}};
  TokenLists doubled = {refs[0], refs[1], refs[0], refs[1]};
  CHECK(cider(cand, refs, corpus) ==
        doctest::Approx(cider(cand, doubled, corpus)).epsilon(1e-12));
  // And to reference order.
  TokenLists swapped = {refs[1], refs[0]};
  CHECK(cider(cand, refs, corpus) ==
        doctest::Approx(cider(cand, swapped, corpus)).epsilon(1e-12));
}

TEST_CASE("cider: error cases") {
  CiderCorpus empty;
  CHECK_THROWS_AS(cider({2, 3}, {{2, 3}}, empty), std::invalid_argument);
  TokenLists docs = {{2, 3, 4, 5}};
  CiderCorpus corpus = build_cider_corpus(docs);
  CHECK_THROWS_AS(cider({2, 3}, {}, corpus), std::invalid_argument);
}

TEST_CASE("self_bleu: trivial endpoints and errors") {
  Tokens a = {2, 3, 4, 5, 6};
  CHECK(self_bleu({a, a, a}) == 1.0);
  TokenLists disjoint = {{2, 3, 4, 5}, {10, 11, 12, 13}, {20, 21, 22, 23}};
  CHECK(self_bleu(disjoint) == 0.0);
  CHECK_THROWS_AS(self_bleu({a}), std::invalid_argument);
  CHECK_THROWS_AS(self_bleu({}), std::invalid_argument);
}

TEST_CASE("self_bleu: equals the average of leave-one-out BLEU scores") {
  TokenLists caps = {{2, 3, 4, 5, 6}, {2, 3, 4, 7, 8}, {5, 6, 2, 3, 4}};
  for (bool smooth : {false, true}) {
    double direct = (bleu4(caps[0], {caps[1], caps[2]}, smooth) +
                     bleu4(caps[1], {caps[0], caps[2]}, smooth) +
                     bleu4(caps[2], {caps[0], caps[1]}, smooth)) /
                    3.0;
    CHECK(self_bleu(caps, smooth) == direct);
  }
  TokenLists permuted = {caps[2], caps[0], caps[1]};
  CHECK(self_bleu(caps) == doctest::Approx(self_bleu(permuted)).epsilon(1e-12));
}

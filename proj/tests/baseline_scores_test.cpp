#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>

#include "oracles.hpp"
#include "shift/baseline_scores.hpp"

namespace shift {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::kIoError;
}

using Answers = std::vector<std::string>;

TEST(ScEntropyTest, HandCases) {
  EXPECT_EQ(sc_entropy(Answers(32, "A")), 0.0);
  Answers half(16, "A");
  half.insert(half.end(), 16, "B");
  EXPECT_NEAR(sc_entropy(half), 0.6931471805599453, 1e-15);
  EXPECT_EQ(sc_entropy(Answers{"4", "4", "4", "4"}), 0.0);
  EXPECT_NEAR(sc_entropy(Answers{"a", "b", "a", "b"}), std::log(2.0), 1e-15);
  EXPECT_NEAR(sc_entropy(Answers{"x", "x", "y", "z"}), 1.0397207708399179, 1e-12);
  EXPECT_NEAR(sc_entropy(Answers{"1", "2", "3", "4", "5"}), std::log(5.0), 1e-15);
  // Grouping is exact string match.
  EXPECT_NEAR(sc_entropy(Answers{"4", " 4"}), std::log(2.0), 1e-15);
  EXPECT_EQ(code_of([] { sc_entropy(Answers{}); }), ErrorCode::kEmptyRollouts);
}

TEST(ScEntropyTest, EndpointsAreExact) {
  for (std::size_t r = 1; r <= 64; ++r) {
    Answers same(r, "A"), distinct;
    for (std::size_t i = 0; i < r; ++i) distinct.push_back(std::to_string(i));
    EXPECT_EQ(sc_entropy(same), 0.0) << r;
    EXPECT_EQ(sc_entropy(distinct), std::log(static_cast<double>(r))) << r;
  }
}

TEST(ScEntropyTest, BoundedAndPermutationInvariant) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 200; ++t) {
    const std::size_t r = 1 + rng() % 16;
    Answers a(r);
    for (auto& s : a) s = std::to_string(rng() % 5);
    const double h = sc_entropy(a);
    std::vector<std::string> distinct(a);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log(static_cast<double>(distinct.size())) + 1e-12);
    std::shuffle(a.begin(), a.end(), rng);
    EXPECT_NEAR(sc_entropy(a), h, 1e-15);
    std::map<std::string, double> p;
    for (const auto& s : a) p[s] += 1.0 / static_cast<double>(r);
    long double direct = 0.0L;
    for (const auto& [k, v] : p) direct -= v * std::log(static_cast<long double>(v));
    EXPECT_NEAR(h, static_cast<double>(direct), 1e-12);
  }
}

TEST(CotSimilarityTest, HandCases) {
  EXPECT_NEAR(cot_similarity(Matrix<double>(2, 2, {1, 0, 2, 0})), 1.0, 1e-15);
  EXPECT_NEAR(cot_similarity(Matrix<double>(2, 2, {1, 0, 0, 3})), 0.0, 1e-15);
  EXPECT_NEAR(cot_similarity(Matrix<double>(2, 2, {1, 0, -1, 0})), -1.0, 1e-15);
  // (1,0), (0,1), (1,1): pair cosines 0, 1/sqrt2, 1/sqrt2.
  EXPECT_NEAR(cot_similarity(Matrix<double>(3, 2, {1, 0, 0, 1, 1, 1})), 0.4714045207910317, 1e-15);
  EXPECT_EQ(code_of([] { cot_similarity(Matrix<double>(1, 3, {1, 2, 3})); }),
            ErrorCode::kTooFewRollouts);
  EXPECT_EQ(code_of([] { cot_similarity(Matrix<double>(2, 2, {1, 0, 0, 0})); }),
            ErrorCode::kZeroEmbedding);
}

TEST(CotSimilarityTest, PositiveScalingsOfOneDirectionGiveOne) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  const auto base = oracle::random_vec(rng, 12);
  Matrix<double> m(6, 12);
  for (std::size_t i = 0; i < 6; ++i) {
    const double c = scale(rng);
    for (std::size_t d = 0; d < 12; ++d) m(i, d) = c * base[d];
  }
  EXPECT_NEAR(cot_similarity(m), 1.0, 1e-12);
}

TEST(CotSimilarityTest, MatchesPairwiseOracle) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const std::size_t r = 2 + rng() % 8;
    Matrix<double> m(r, 5);
    oracle::Rows rows;
    for (std::size_t i = 0; i < r; ++i) {
      rows.push_back(oracle::random_vec(rng, 5));
      for (std::size_t d = 0; d < 5; ++d) m(i, d) = rows[i][d];
    }
    long double sum = 0.0L;
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = i + 1; j < r; ++j) {
        long double dot = 0.0L;
        for (std::size_t d = 0; d < 5; ++d) dot += static_cast<long double>(rows[i][d]) * rows[j][d];
        sum += dot / (oracle::norm_ld(rows[i]) * oracle::norm_ld(rows[j]));
      }
    }
    const double expect = static_cast<double>(sum / (r * (r - 1) / 2.0L));
    EXPECT_NEAR(cot_similarity(m), expect, 1e-12);
  }
}

TEST(PerplexityTest, HandCases) {
  EXPECT_EQ(perplexity(std::vector<double>{0.0, 0.0, 0.0}), 1.0);
  EXPECT_NEAR(perplexity(std::vector<double>{-std::log(2.0), -std::log(2.0)}), 2.0, 1e-12);
  EXPECT_NEAR(perplexity(std::vector<double>{-1.0, -2.0, -3.0}), 7.38905609893065, 1e-12);
  EXPECT_NEAR(perplexity(std::vector<double>{-2.0}), 7.38905609893065, 1e-12);
  EXPECT_NEAR(perplexity(std::vector<double>{-1.0, -3.0}), std::exp(2.0), 1e-12);
  EXPECT_NEAR(perplexity(std::vector<double>(4, std::log(0.25))), 4.0, 1e-12);
  EXPECT_EQ(code_of([] { perplexity(std::vector<double>{}); }), ErrorCode::kEmptyTokens);
  EXPECT_EQ(code_of([] { perplexity(std::vector<double>{-1.0, 0.5}); }),
            ErrorCode::kPositiveLogprob);
}

TEST(PerplexityTest, DecreasesWhenAnyLogprobRises) {
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> ex(1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> lp(1 + rng() % 20);
    for (double& v : lp) v = -ex(rng) - 0.01;
    const double before = perplexity(lp);
    const std::size_t k = rng() % lp.size();
    lp[k] = lp[k] / 2.0;
    EXPECT_LT(perplexity(lp), before);
    EXPECT_GE(before, 1.0);
  }
}

ScoreTable table_of(std::vector<double> v, Direction dir) {
  ScoreTable t;
  t.score_name = "s";
  t.direction = dir;
  for (std::size_t i = 0; i < v.size(); ++i) t.entries.emplace_back("i" + std::to_string(i), v[i]);
  return t;
}

TEST(RankAndTakeTest, HandCases) {
  EXPECT_EQ(rank_and_take(table_of({0.1, 0.9, 0.5}, Direction::kHigherFirst), 2).selected_ids,
            (std::vector<std::string>{"i1", "i2"}));
  EXPECT_EQ(rank_and_take(table_of({0.1, 0.9, 0.5}, Direction::kLowerFirst), 2).selected_ids,
            (std::vector<std::string>{"i0", "i2"}));
  EXPECT_EQ(rank_and_take(table_of({1, 1, 1, 1}, Direction::kHigherFirst), 3).selected_ids,
            (std::vector<std::string>{"i0", "i1", "i2"}));
  EXPECT_EQ(rank_and_take(table_of({2, 1, 2, 1}, Direction::kLowerFirst), 4).selected_ids,
            (std::vector<std::string>{"i1", "i3", "i0", "i2"}));
  EXPECT_EQ(code_of([] { rank_and_take(table_of({1, 2}, Direction::kHigherFirst), 3); }),
            ErrorCode::kBudgetExceedsPool);
  EXPECT_EQ(code_of([] { rank_and_take(table_of({1, NAN}, Direction::kHigherFirst), 1); }),
            ErrorCode::kNonFiniteValue);
}

TEST(RankAndTakeTest, MatchesKeyedSortOracle) {
  std::mt19937_64 rng(5);
  for (auto dir : {Direction::kHigherFirst, Direction::kLowerFirst}) {
    std::vector<double> v(200);
    for (double& x : v) x = static_cast<double>(rng() % 40) / 7.0;  // many ties
    const auto r = rank_and_take(table_of(v, dir), 60);
    std::vector<std::pair<double, std::size_t>> keyed;
    for (std::size_t i = 0; i < v.size(); ++i) {
      keyed.emplace_back(dir == Direction::kHigherFirst ? -v[i] : v[i], i);
    }
    std::sort(keyed.begin(), keyed.end());
    for (std::size_t k = 0; k < 60; ++k) {
      EXPECT_EQ(r.selected_indices[k], keyed[k].second);
      EXPECT_EQ(*r.steps[k].score, v[keyed[k].second]);
    }
  }
}

TEST(ScoreTableTest, DirectionsAndCsv) {
  RolloutRecord a;
  a.instance_id = "a,1";
  a.answers = {"x", "y"};
  a.cot_embeddings = Matrix<double>(2, 2, {1, 0, 0, 1});
  a.question_token_logprobs = {-1.0};
  a.answer_token_logprobs = {-0.5, -0.5};
  RolloutRecord b = a;
  b.instance_id = "b";
  b.answers = {"x", "x"};
  const std::vector<RolloutRecord> recs{a, b};

  const auto ent = score_table(recs, ScoreKind::kScEntropy);
  EXPECT_EQ(ent.direction, Direction::kHigherFirst);
  EXPECT_NEAR(ent.entries[0].second, std::log(2.0), 1e-15);
  EXPECT_EQ(ent.entries[1].second, 0.0);
  EXPECT_EQ(score_table(recs, ScoreKind::kCotSimilarity).direction, Direction::kLowerFirst);
  EXPECT_NEAR(score_table(recs, ScoreKind::kAnswerPpl).entries[0].second, std::exp(0.5), 1e-15);
  EXPECT_NEAR(score_table(recs, ScoreKind::kQuestionPpl).entries[1].second, std::exp(1.0), 1e-15);

  const std::string csv = score_table_csv(ent);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "instance_id,score_name,score,direction");
  EXPECT_NE(csv.find("\"a,1\",sc_entropy,"), std::string::npos);
  EXPECT_NE(csv.find("b,sc_entropy,0,higher_first"), std::string::npos);

  EXPECT_EQ(parse_score("q_ppl"), ScoreKind::kQuestionPpl);
  EXPECT_EQ(code_of([] { parse_score("ppl"); }), ErrorCode::kUnknownScore);

  RolloutRecord lonely = a;
  lonely.cot_embeddings = Matrix<double>(1, 2, {1, 0});
  try {
    score_record(lonely, ScoreKind::kCotSimilarity);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooFewRollouts);
    EXPECT_NE(std::string(e.what()).find("a,1"), std::string::npos);
  }
}

}  // namespace
}  // namespace shift

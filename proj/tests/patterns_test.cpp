#include <gtest/gtest.h>

#include <random>

#include "oracle.hpp"
#include "skeval/patterns.hpp"

using namespace skeval;
using R = InfeasibilityReason;
using T = SelfKnowledgeType;

namespace {

void add(ConfusionMatrix& m, FeasibilityLabel l, Verdict v, int n) {
  for (int i = 0; i < n; ++i) m.add(l, v);
}

}  // namespace

TEST(Patterns, OverconfidenceSharesAndRanking) {
  ConfusionMatrix m;
  add(m, Feasible{T::FunctionalCeiling}, DeclaredInfeasible{R::InsufficientDomainExpertise}, 6);
  add(m, Feasible{T::EthicalIntegrity}, DeclaredInfeasible{R::MaliciousIntent}, 3);
  add(m, Feasible{T::TemporalPerception}, DeclaredInfeasible{R::InsufficientDomainExpertise}, 3);
  add(m, Feasible{T::TemporalPerception}, Answered{}, 50);
  const auto d = overconfidence_distribution(m);
  EXPECT_FALSE(d.empty);
  EXPECT_EQ(d.total, 12u);
  ASSERT_EQ(d.entries.size(), 2u);
  EXPECT_EQ(d.top()->key, R::InsufficientDomainExpertise);
  EXPECT_DOUBLE_EQ(d.entries[0].share, 0.75);
  EXPECT_DOUBLE_EQ(d.entries[1].share, 0.25);
  EXPECT_FALSE(d.tied);
}

TEST(Patterns, ConservatismUsesGeneratedReason) {
  ConfusionMatrix m;
  add(m, Infeasible{R::OutsideTrainingCutoff}, Answered{}, 2);
  add(m, Infeasible{R::MissingContext}, Answered{}, 2);
  const auto d = conservatism_distribution(m);
  EXPECT_EQ(d.total, 4u);
  EXPECT_TRUE(d.tied);
  // Ties keep taxonomy order.
  EXPECT_EQ(d.entries[0].key, R::MissingContext);
  EXPECT_EQ(d.entries[1].key, R::OutsideTrainingCutoff);
}

TEST(Patterns, EmptyDistributions) {
  ConfusionMatrix m;
  add(m, Feasible{T::FunctionalCeiling}, Answered{}, 4);
  const auto p = analyse_patterns(m);
  EXPECT_TRUE(p.overconfident.empty);
  EXPECT_TRUE(p.conservative.empty);
  EXPECT_TRUE(p.type_confusion.empty);
  EXPECT_TRUE(p.reason_confusion.empty);
  EXPECT_EQ(p.overconfident.top(), nullptr);
}

TEST(Patterns, TypeAndReasonConfusionsAgree) {
  ConfusionMatrix m;
  add(m, Infeasible{R::MissingContext}, DeclaredInfeasible{R::IncoherentContext}, 5);
  add(m, Infeasible{R::VagueOpenEnded}, DeclaredInfeasible{R::MissingContext}, 3);
  add(m, Infeasible{R::NoScientificConsensus}, DeclaredInfeasible{R::MissingContext}, 2);
  const auto types = type_confusions(m);
  const auto reasons = reason_confusions(m);
  EXPECT_EQ(types.total, reasons.total);
  EXPECT_EQ(types.total, 10u);
  ASSERT_EQ(types.entries.size(), 2u);
  // 5 within Contextual Awareness, 5 from Identification of Ambiguity; the
  // tie keeps taxonomy order.
  EXPECT_EQ(types.entries[0].key, TypePair(T::ContextualAwareness, T::ContextualAwareness));
  EXPECT_EQ(types.entries[0].count, 5u);
  EXPECT_EQ(types.entries[1].key, TypePair(T::IdentificationOfAmbiguity, T::ContextualAwareness));
  EXPECT_TRUE(types.tied);
  EXPECT_TRUE(is_within_type(types.entries[0].key));
  EXPECT_FALSE(is_within_type(types.entries[1].key));
  EXPECT_EQ(reasons.top()->key, ReasonPair(R::MissingContext, R::IncoherentContext));
}

TEST(Patterns, SharesSumToOneAndTotalsMatchCells) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const auto cells = oracle::random_cells(rng, 30);
    ConfusionMatrix m;
    for (const auto& [l, v] : oracle::pairs_from_cells(cells, rng)) m.add(l, v);
    const auto p = analyse_patterns(m);
    const auto overall = m.overall();
    EXPECT_EQ(p.overconfident.total, overall[ConfusionCell::FR]);
    EXPECT_EQ(p.conservative.total, overall[ConfusionCell::RF]);
    EXPECT_EQ(p.reason_confusion.total, overall[ConfusionCell::RRprime]);
    EXPECT_EQ(p.type_confusion.total, overall[ConfusionCell::RRprime]);
    double sum = 0;
    for (const auto& e : p.reason_confusion.entries) {
      sum += e.share;
      EXPECT_NE(e.key.first, e.key.second);
    }
    if (!p.reason_confusion.empty) {
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
    for (std::size_t i = 1; i < p.overconfident.entries.size(); ++i) {
      EXPECT_GE(p.overconfident.entries[i - 1].count, p.overconfident.entries[i].count);
    }
  }
}

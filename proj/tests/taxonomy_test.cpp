#include <gtest/gtest.h>

#include <set>

#include "skeval/taxonomy.hpp"

using namespace skeval;

TEST(Taxonomy, ReasonsPartitionTheTypes) {
  std::set<InfeasibilityReason> seen;
  std::size_t total = 0;
  for (auto t : kAllTypes) {
    const auto rs = reasons_of(t);
    EXPECT_FALSE(rs.empty()) << slug(t);
    for (auto r : rs) {
      EXPECT_EQ(type_of(r), t);
      seen.insert(r);
    }
    total += rs.size();
  }
  EXPECT_EQ(total, kNumReasons);
  EXPECT_EQ(seen.size(), kNumReasons);
}

TEST(Taxonomy, ReasonCountsPerType) {
  EXPECT_EQ(reasons_of(SelfKnowledgeType::FunctionalCeiling).size(), 3u);
  EXPECT_EQ(reasons_of(SelfKnowledgeType::ContextualAwareness).size(), 2u);
  EXPECT_EQ(reasons_of(SelfKnowledgeType::IdentificationOfAmbiguity).size(), 2u);
  EXPECT_EQ(reasons_of(SelfKnowledgeType::EthicalIntegrity).size(), 2u);
  EXPECT_EQ(reasons_of(SelfKnowledgeType::TemporalPerception).size(), 2u);
}

TEST(Taxonomy, KnownMappings) {
  EXPECT_EQ(type_of(InfeasibilityReason::MaliciousIntent), SelfKnowledgeType::EthicalIntegrity);
  EXPECT_EQ(type_of(InfeasibilityReason::OutsideTrainingCutoff),
            SelfKnowledgeType::TemporalPerception);
  EXPECT_EQ(type_of(InfeasibilityReason::IllogicalIllFormed), SelfKnowledgeType::FunctionalCeiling);
  EXPECT_EQ(type_of(InfeasibilityReason::VagueOpenEnded),
            SelfKnowledgeType::IdentificationOfAmbiguity);
}

TEST(Taxonomy, SlugsRoundTrip) {
  for (auto t : kAllTypes) EXPECT_EQ(type_from_slug(slug(t)), t);
  for (auto r : kAllReasons) EXPECT_EQ(reason_from_slug(slug(r)), r);
  EXPECT_FALSE(type_from_slug("Functional Ceiling"));
  EXPECT_FALSE(reason_from_slug(""));
}

TEST(Taxonomy, LooseNames) {
  EXPECT_EQ(reason_from_loose_name("Illogical/Ill-formed"), InfeasibilityReason::IllogicalIllFormed);
  EXPECT_EQ(reason_from_loose_name("illogical or ill-formed"),
            InfeasibilityReason::IllogicalIllFormed);
  EXPECT_EQ(reason_from_loose_name("VAGUE / OPEN-ENDED"), InfeasibilityReason::VagueOpenEnded);
  EXPECT_EQ(reason_from_loose_name("Outside Training Data Cutoff"),
            InfeasibilityReason::OutsideTrainingCutoff);
  EXPECT_EQ(reason_from_loose_name("missing_context"), InfeasibilityReason::MissingContext);
  EXPECT_FALSE(reason_from_loose_name("missing"));
  EXPECT_FALSE(reason_from_loose_name("--"));
}

TEST(Taxonomy, DescriptionsArePresent) {
  for (auto t : kAllTypes) EXPECT_FALSE(description(t).empty());
  for (auto r : kAllReasons) EXPECT_FALSE(description(r).empty());
  EXPECT_EQ(description(InfeasibilityReason::OutsideTrainingCutoff),
            "The task requires information that is outside the training data cutoff.");
}

TEST(Taxonomy, LabelsRoundTrip) {
  for (auto t : kAllTypes) {
    const FeasibilityLabel l = Feasible{t};
    EXPECT_TRUE(is_feasible(l));
    EXPECT_EQ(label_from_string(to_string(l)), l);
  }
  for (auto r : kAllReasons) {
    const FeasibilityLabel l = Infeasible{r};
    EXPECT_FALSE(is_feasible(l));
    EXPECT_EQ(target_type(l), type_of(r));
    EXPECT_EQ(label_from_string(to_string(l)), l);
  }
  EXPECT_FALSE(label_from_string("infeasible:functional_ceiling"));
}

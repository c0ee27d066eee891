#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "skeval/errors.hpp"
#include "skeval/prompt_forge.hpp"
#include "test_util.hpp"

using namespace skeval;

TEST(RenderTemplate, SubstitutesAndEscapes) {
  EXPECT_EQ(render_template("a {x} b {{y}} {x}", {{"x", "1"}}), "a 1 b {y} 1");
  EXPECT_THROW(render_template("{missing}", {}), ConfigError);
  EXPECT_EQ(placeholders_in("{b} {a} {{c}} {b}"), (std::vector<std::string>{"b", "a"}));
}

TEST(PromptForge, FeasiblePromptCarriesTypeText) {
  PromptForge forge;
  const auto p = forge.generation_prompt(Feasible{SelfKnowledgeType::EthicalIntegrity},
                                         PromptVariant::Vanilla);
  EXPECT_EQ(p.kind, PromptKind::GenerateFeasible);
  EXPECT_NE(p.text.find("Ethical Integrity"), std::string::npos);
  EXPECT_NE(p.text.find("The task may seem unethical or offensive, but it is actually not. The "
                        "task is designed to be able to answer ethically."),
            std::string::npos);
  EXPECT_EQ(p.text.find('{'), std::string::npos);
}

TEST(PromptForge, InfeasiblePromptCarriesReasonText) {
  PromptForge forge;
  const auto p = forge.generation_prompt(Infeasible{InfeasibilityReason::OutsideTrainingCutoff},
                                         PromptVariant::Vanilla);
  EXPECT_EQ(p.kind, PromptKind::GenerateInfeasible);
  EXPECT_NE(p.text.find("Outside Training Cutoff"), std::string::npos);
  EXPECT_NE(p.text.find("The task requires information that is outside the training data cutoff."),
            std::string::npos);
}

TEST(PromptForge, ChallengeVariantAddsFraming) {
  PromptForge forge;
  const FeasibilityLabel l = Feasible{SelfKnowledgeType::FunctionalCeiling};
  const auto vanilla = forge.generation_prompt(l, PromptVariant::Vanilla).text;
  const auto challenge = forge.generation_prompt(l, PromptVariant::ChallengeQap).text;
  EXPECT_NE(vanilla, challenge);
  EXPECT_NE(challenge.find("challenge"), std::string::npos);
  EXPECT_EQ(vanilla.find("challenge"), std::string::npos);
  EXPECT_NE(challenge.find("analyse"), std::string::npos);
}

TEST(PromptForge, Deterministic) {
  PromptForge a, b;
  for (auto v : {PromptVariant::Vanilla, PromptVariant::ChallengeQap}) {
    for (auto r : kAllReasons) {
      EXPECT_EQ(a.generation_prompt(Infeasible{r}, v).text, b.generation_prompt(Infeasible{r}, v).text);
    }
    EXPECT_EQ(a.classification_prompt("x y z", v).text, b.classification_prompt("x y z", v).text);
  }
}

TEST(PromptForge, ClassificationListsEveryReasonOnce) {
  PromptForge forge;
  const auto p = forge.classification_prompt("Summarise the attached file.", PromptVariant::Vanilla);
  for (auto r : kAllReasons) {
    const auto line = "- " + std::string(slug(r)) + " (" + std::string(display_name(r)) + "): " +
                      std::string(description(r));
    const auto at = p.text.find(line);
    ASSERT_NE(at, std::string::npos) << slug(r);
    EXPECT_EQ(p.text.find(line, at + 1), std::string::npos);
  }
  EXPECT_NE(p.text.find("Summarise the attached file."), std::string::npos);
  EXPECT_NE(p.text.find("VERDICT: INFEASIBLE"), std::string::npos);
  EXPECT_THROW(forge.classification_prompt("  \n", PromptVariant::Vanilla), std::invalid_argument);
}

TEST(PromptForge, CatalogIsInTaxonomyOrder) {
  const auto catalog = PromptForge().reason_catalog();
  std::size_t last = 0;
  for (auto r : kAllReasons) {
    const auto at = catalog.find("- " + std::string(slug(r)) + " ");
    ASSERT_NE(at, std::string::npos);
    EXPECT_GE(at, last);
    last = at;
  }
}

TEST(PromptForge, IncompleteCatalogIsAConfigError) {
  auto catalog = PromptCatalog::defaults();
  catalog.reasons.pop_back();
  PromptForge forge(TemplateSet::defaults(), catalog);
  EXPECT_THROW(forge.reason_catalog(), ConfigError);
  EXPECT_THROW(forge.classification_prompt("task", PromptVariant::Vanilla), ConfigError);

  PromptCatalog empty;
  PromptForge bare(TemplateSet::defaults(), empty);
  EXPECT_THROW(bare.generation_prompt(Feasible{SelfKnowledgeType::FunctionalCeiling},
                                      PromptVariant::Vanilla),
               ConfigError);
  EXPECT_THROW(bare.reason_catalog(), ConfigError);

  auto blank = PromptCatalog::defaults();
  blank.reasons[3].description.clear();
  EXPECT_THROW(PromptForge(TemplateSet::defaults(), blank).reason_catalog(), ConfigError);
}

TEST(TemplateSet, RejectsBadPlaceholders) {
  auto set = TemplateSet::defaults();
  EXPECT_THROW(set.set({PromptKind::Classify, PromptVariant::Vanilla, "no task here {reason_catalog}", {}}),
               ConfigError);
  EXPECT_THROW(set.set({PromptKind::GenerateFeasible, PromptVariant::Vanilla,
                        "{type_name} {type_description} {reason_name}", {}}),
               ConfigError);
  EXPECT_NO_THROW(set.set({PromptKind::GenerateInfeasible, PromptVariant::Vanilla,
                           "{reason_name} of {type_name}: {reason_description}", {}}));
}

TEST(TemplateSet, DirectoryOverrides) {
  testutil::TempDir dir;
  {
    std::ofstream f(dir.path() / "classify.challenge-qap.txt");
    f << "Catalog:\n{reason_catalog}\nTask: {task}\n";
  }
  const auto defaults = TemplateSet::defaults().fingerprints();
  const auto forge = PromptForge::from_directory(dir.path());
  const auto fp = forge.templates().fingerprints();
  EXPECT_EQ(fp.size(), 6u);
  EXPECT_NE(fp.at("classify.challenge-qap"), defaults.at("classify.challenge-qap"));
  EXPECT_EQ(fp.at("classify.vanilla"), defaults.at("classify.vanilla"));
  const auto p = forge.classification_prompt("do it", PromptVariant::ChallengeQap).text;
  EXPECT_EQ(p.rfind("Catalog:\n- insufficient_domain_expertise", 0), 0u);
  EXPECT_NE(p.find("Task: do it"), std::string::npos);
  EXPECT_THROW(PromptForge::from_directory(dir.path() / "nope"), ConfigError);
}

TEST(TemplateSet, InvalidOverrideFileIsRejected) {
  testutil::TempDir dir;
  std::ofstream(dir.path() / "generate_feasible.vanilla.txt") << "Write a task about {typo}.";
  EXPECT_THROW(PromptForge::from_directory(dir.path()), ConfigError);
}

TEST(PromptCatalog, JsonOverride) {
  testutil::TempDir dir;
  nlohmann::json j;
  for (auto r : kAllReasons) j["reasons"][std::string(slug(r))] = {{"description", "d-" + std::string(slug(r))}};
  for (auto t : kAllTypes) j["types"][std::string(slug(t))] = {{"description", "t-" + std::string(slug(t))}};
  std::ofstream(dir.path() / "catalog.json") << j.dump();
  const auto forge = PromptForge::from_directory(dir.path());
  EXPECT_NE(forge.reason_catalog().find("- missing_context (Missing Context): d-missing_context"),
            std::string::npos);
  EXPECT_NE(forge.generation_prompt(Feasible{SelfKnowledgeType::TemporalPerception},
                                    PromptVariant::Vanilla)
                .text.find("t-temporal_perception"),
            std::string::npos);
}

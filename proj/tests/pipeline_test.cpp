#include <gtest/gtest.h>

#include <map>
#include <set>

#include "skeval/errors.hpp"
#include "skeval/pipeline.hpp"
#include "verdict_corpus.hpp"

using namespace skeval;

namespace {

std::array<int, kNumTypes> per_type(const std::vector<TaskRecord>& rs, bool feasible) {
  std::array<int, kNumTypes> n{};
  for (const auto& r : rs) {
    if (is_feasible(r.label) == feasible) ++n[index_of(target_type(r.label))];
  }
  return n;
}

std::unique_ptr<Gateway> scripted(SubjectProfile p = SubjectProfile::echo(),
                                  ScriptedProvider** handle = nullptr) {
  auto provider = std::make_unique<ScriptedProvider>(std::move(p));
  if (handle) *handle = provider.get();
  GatewayOptions opts;
  opts.sleep = [](std::chrono::milliseconds) {};
  return std::make_unique<Gateway>(std::move(provider), opts);
}

GenerationOptions gen_options() {
  GenerationOptions o;
  o.model_id = "scripted";
  o.clock = fixed_clock("2000-01-01T00:00:00Z");
  return o;
}

}  // namespace

TEST(PlanGeneration, NinetyPerCategory) {
  const auto plan = plan_generation(90, PromptVariant::Vanilla);
  EXPECT_EQ(plan.total_feasible(), 450);
  EXPECT_EQ(plan.total_infeasible(), 450);
  EXPECT_EQ(plan.slots.size(), 900u);
  for (auto t : kAllTypes) {
    EXPECT_EQ(plan.feasible_per_type[index_of(t)], 90);
    EXPECT_EQ(plan.infeasible_per_type[index_of(t)], 90);
  }
  EXPECT_EQ(plan.reason_quota[index_of(InfeasibilityReason::InsufficientDomainExpertise)], 30);
  EXPECT_EQ(plan.reason_quota[index_of(InfeasibilityReason::MissingContext)], 45);
  std::set<std::string> ids;
  for (const auto& s : plan.slots) ids.insert(s.task_id);
  EXPECT_EQ(ids.size(), 900u);
}

TEST(PlanGeneration, SmallQuotasGoToEarliestReasons) {
  const auto plan = plan_generation(2, PromptVariant::ChallengeQap);
  EXPECT_EQ(plan.reason_quota[index_of(InfeasibilityReason::InsufficientDomainExpertise)], 1);
  EXPECT_EQ(plan.reason_quota[index_of(InfeasibilityReason::ComputationalComplexityExceeded)], 1);
  EXPECT_EQ(plan.reason_quota[index_of(InfeasibilityReason::IllogicalIllFormed)], 0);
  EXPECT_EQ(plan.total_feasible(), 10);
  EXPECT_EQ(plan.total_infeasible(), 10);
  EXPECT_EQ(plan.slots.front().task_id, "challenge-qap-f-000001");
  EXPECT_EQ(plan.slots.back().task_id, "challenge-qap-i-000010");
  EXPECT_THROW(plan_generation(0, PromptVariant::Vanilla), std::invalid_argument);
}

TEST(RunGeneration, EchoProducesValidTasksInPlanOrder) {
  const auto plan = plan_generation(3, PromptVariant::Vanilla);
  auto gw = scripted();
  std::vector<std::string> streamed;
  auto opts = gen_options();
  opts.on_record = [&](const TaskRecord& r) { streamed.push_back(r.id); };
  const auto records = run_generation(plan, *gw, PromptForge(), opts);
  ASSERT_EQ(records.size(), 30u);
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(records[i].id, plan.slots[i].task_id);
    EXPECT_EQ(records[i].label, plan.slots[i].label);
    EXPECT_EQ(records[i].status, TaskStatus::Valid);
    EXPECT_EQ(records[i].created_at, "2000-01-01T00:00:00Z");
    EXPECT_EQ(streamed[i], records[i].id);
  }
}

TEST(RunGeneration, HardFailedSlotIsMarkedFailed) {
  auto plan = plan_generation(1, PromptVariant::Vanilla);
  ScriptedProvider* provider = nullptr;
  auto gw = scripted(SubjectProfile::echo(), &provider);
  provider->fail_with_provider_error(generation_request_id("vanilla-i-000003"));
  const auto records = run_generation(plan, *gw, PromptForge(), gen_options());
  int valid = 0, failed = 0;
  for (const auto& r : records) {
    if (r.status == TaskStatus::Valid) ++valid;
    if (r.status == TaskStatus::Failed) {
      ++failed;
      EXPECT_EQ(r.id, "vanilla-i-000003");
      EXPECT_EQ(r.note.rfind("provider_error", 0), 0u);
    }
  }
  EXPECT_EQ(valid, 9);
  EXPECT_EQ(failed, 1);
}

TEST(RunGeneration, AuthErrorAbortsTheRun) {
  auto plan = plan_generation(1, PromptVariant::Vanilla);
  ScriptedProvider* provider = nullptr;
  auto gw = scripted(SubjectProfile::echo(), &provider);
  provider->fail_with_auth_error(generation_request_id("vanilla-f-000001"));
  EXPECT_THROW(run_generation(plan, *gw, PromptForge(), gen_options()), AuthError);
}

TEST(RunGeneration, MalformedOutputIsRetriedThenFlagged) {
  auto plan = plan_generation(1, PromptVariant::Vanilla);
  ScriptedProvider* provider = nullptr;
  auto gw = scripted(SubjectProfile::echo(), &provider);
  provider->script_generation(generation_request_id("vanilla-f-000002"), "I'm sorry, I can't.");
  const auto records = run_generation(plan, *gw, PromptForge(), gen_options());
  const auto& bad = records[1];
  EXPECT_EQ(bad.status, TaskStatus::Malformed);
  EXPECT_EQ(bad.attempts, 3);
  EXPECT_EQ(provider->calls(), 12);
}

TEST(ExtractTaskText, Markers) {
  EXPECT_EQ(extract_task_text("Thinking...\nTASK: Do X.\nwith detail"), "Do X.\nwith detail");
  EXPECT_EQ(extract_task_text("**TASK:** Summarise this"), "Summarise this");
  EXPECT_EQ(extract_task_text("TASK: a\nTASK: b"), "b");
  EXPECT_EQ(extract_task_text("  just a task  "), "just a task");
}

TEST(AutomaticCheck, Fixtures) {
  EXPECT_FALSE(automatic_check("Debug and fix the error in the following function that occurs "
                               "when processing the data from the database: 'ERROR'."));
  EXPECT_FALSE(automatic_check("Provide a comprehensive analysis of the economic and social "
                               "impacts of the 2024 Olympic Games in Paris."));
  EXPECT_TRUE(automatic_check(""));
  EXPECT_TRUE(automatic_check("Too short."));
  EXPECT_TRUE(automatic_check("I'm sorry, but I cannot generate that kind of task for you."));
  EXPECT_TRUE(automatic_check("Here you go:\nAs an AI language model I would rather not."));
  EXPECT_TRUE(automatic_check("Write a story about {type_name} in exactly 200 words."));
  EXPECT_FALSE(automatic_check("Format the JSON object {\"a\": 1} so that it is pretty printed."));
}

TEST(ValidateTasks, DecisionsAndQueue) {
  std::vector<TaskRecord> rs(4);
  for (int i = 0; i < 4; ++i) {
    rs[static_cast<std::size_t>(i)].id = "t" + std::to_string(i);
    rs[static_cast<std::size_t>(i)].text = "A perfectly reasonable task text number " + std::to_string(i);
  }
  rs[1].text = "I cannot help.";
  rs[2].text = "{reason_name} goes here, with some more text";
  rs[3].status = TaskStatus::Failed;
  rs[3].text.clear();

  auto first = validate_tasks(rs);
  EXPECT_EQ(first.records[0].status, TaskStatus::Valid);
  EXPECT_EQ(first.records[1].status, TaskStatus::Malformed);
  EXPECT_EQ(first.records[2].status, TaskStatus::Malformed);
  EXPECT_EQ(first.records[3].status, TaskStatus::Failed);
  ASSERT_EQ(first.queued.size(), 2u);
  EXPECT_EQ(first.queued[0].task_id, "t1");

  auto second = validate_tasks(rs, {{"t1", ReviewDecision::Restore},
                                    {"t2", ReviewDecision::Discard},
                                    {"t0", ReviewDecision::Discard}});
  EXPECT_EQ(second.records[0].status, TaskStatus::Discarded);
  EXPECT_EQ(second.records[1].status, TaskStatus::Valid);
  EXPECT_EQ(second.records[2].status, TaskStatus::Discarded);
  EXPECT_TRUE(second.queued.empty());
}

TEST(SampleBalanced, FourHundredEach) {
  auto gw = scripted();
  const auto records = run_generation(plan_generation(90, PromptVariant::Vanilla), *gw,
                                      PromptForge(), gen_options());
  const auto sample = sample_balanced(records, {400, 400, 7});
  EXPECT_EQ(sample.size(), 800u);
  for (int n : per_type(sample, true)) EXPECT_EQ(n, 80);
  for (int n : per_type(sample, false)) EXPECT_EQ(n, 80);
  std::set<std::string> ids;
  for (const auto& r : sample) ids.insert(r.id);
  EXPECT_EQ(ids.size(), 800u);

  EXPECT_EQ(sample_balanced(records, {400, 400, 7}), sample);
  EXPECT_NE(sample_balanced(records, {400, 400, 8}), sample);

  auto shuffled = records;
  std::reverse(shuffled.begin(), shuffled.end());
  EXPECT_EQ(sample_balanced(shuffled, {400, 400, 7}), sample);
}

TEST(SampleBalanced, UnevenTotalsAndShortfall) {
  EXPECT_EQ(type_quotas(7), (std::array<int, kNumTypes>{2, 2, 1, 1, 1}));
  auto gw = scripted();
  auto records = run_generation(plan_generation(4, PromptVariant::Vanilla), *gw, PromptForge(),
                                gen_options());
  const auto sample = sample_balanced(records, {7, 0, 1});
  EXPECT_EQ(per_type(sample, true), (std::array<int, kNumTypes>{2, 2, 1, 1, 1}));

  // Knock out valid ethical-integrity infeasible tasks.
  for (auto& r : records) {
    if (!is_feasible(r.label) && target_type(r.label) == SelfKnowledgeType::EthicalIntegrity) {
      r.status = TaskStatus::Discarded;
    }
  }
  try {
    sample_balanced(records, {5, 5, 1});
    FAIL() << "expected InsufficientTasks";
  } catch (const InsufficientTasks& e) {
    EXPECT_EQ(e.type_slug(), "ethical_integrity");
  }
  EXPECT_THROW(sample_balanced(records, {25, 0, 1}), InsufficientTasks);
}

TEST(RunClassification, UsesTaskVariantAndReportsFailures) {
  auto gw = scripted();
  auto tasks = run_generation(plan_generation(1, PromptVariant::ChallengeQap), *gw, PromptForge(),
                              gen_options());
  ScriptedProvider* provider = nullptr;
  auto cgw = scripted(SubjectProfile::echo(), &provider);
  provider->fail_with_provider_error(classification_request_id(tasks[4].id));
  ClassificationOptions opts;
  opts.clock = fixed_clock("t");
  std::vector<std::string> streamed;
  opts.on_outcome = [&](const ClassificationOutcome& o) { streamed.push_back(o.task_id); };
  const auto run = run_classification(tasks, *cgw, PromptForge(), opts);
  EXPECT_EQ(run.outcomes.size(), 9u);
  ASSERT_EQ(run.failures.size(), 1u);
  EXPECT_EQ(run.failures[0].task_id, tasks[4].id);
  EXPECT_EQ(run.failures[0].kind, "provider_error");
  for (std::size_t i = 0; i < streamed.size(); ++i) EXPECT_EQ(streamed[i], run.outcomes[i].task_id);
  for (const auto& o : run.outcomes) EXPECT_FALSE(std::holds_alternative<ParseFailure>(o.verdict));
}

TEST(ParseVerdict, Corpus) {
  for (const auto& c : corpus::verdict_cases()) {
    const auto v = parse_verdict(c.raw);
    switch (c.expect) {
      case corpus::Expect::Answered:
        EXPECT_TRUE(std::holds_alternative<Answered>(v)) << c.name;
        break;
      case corpus::Expect::Infeasible:
        ASSERT_TRUE(std::holds_alternative<DeclaredInfeasible>(v)) << c.name;
        EXPECT_EQ(std::get<DeclaredInfeasible>(v).reason, *c.reason) << c.name;
        break;
      case corpus::Expect::ParseFailure:
        ASSERT_TRUE(std::holds_alternative<ParseFailure>(v)) << c.name;
        EXPECT_EQ(std::get<ParseFailure>(v).raw_text, c.raw) << c.name;
        break;
    }
  }
}

TEST(ParseVerdict, AnswerTextIsKept) {
  const auto v = parse_verdict("Line one\nLine two\n\nVERDICT: ANSWERED");
  EXPECT_EQ(std::get<Answered>(v).answer_text, "Line one\nLine two");
}

TEST(ParallelFor, CoversEveryIndexAndRethrows) {
  std::vector<int> hit(100, 0);
  parallel_for(100, 8, [&](std::size_t i) { hit[i]++; });
  for (int h : hit) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(50, 4, [](std::size_t i) {
                 if (i == 10) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

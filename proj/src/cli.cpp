#include "skeval/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>

#include "skeval/errors.hpp"
#include "skeval/pipeline.hpp"
#include "skeval/provider.hpp"
#include "skeval/report.hpp"
#include "skeval/run_store.hpp"
#include "skeval/util.hpp"

namespace skeval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Timestamp used for every record of a simulated run.
constexpr const char* kSimulatedTime = "2000-01-01T00:00:00Z";
constexpr const char* kScripted = "scripted";
constexpr const char* kScriptedModel = "scripted-subject";

struct Globals {
  std::vector<std::string> run_dirs;
  std::string config;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string variant = "both";
  std::string templates;
  std::string provider = kScripted;
  std::string model;
  std::string profile = "echo";
  std::string run_id;
};

struct Env {
  Globals g;
  json config = json::object();
  std::ostream& out;
  std::ostream& err;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  try {
    auto j = json::parse(read_file(path));
    if (!j.is_object()) throw ConfigError(path + ": config must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const std::runtime_error& e) {
    if (dynamic_cast<const ConfigError*>(&e)) throw;
    throw ConfigError(e.what());
  }
}

std::vector<PromptVariant> selected_variants(const Globals& g) {
  if (g.variant == "both") return {PromptVariant::Vanilla, PromptVariant::ChallengeQap};
  if (auto v = variant_from_slug(g.variant)) return {*v};
  throw ConfigError("unknown --variant '" + g.variant + "' (vanilla, challenge-qap or both)");
}

PromptForge make_forge(const Globals& g) {
  if (g.templates.empty()) return PromptForge();
  if (!fs::is_directory(g.templates)) throw ConfigError("no templates directory " + g.templates);
  return PromptForge::from_directory(g.templates);
}

SubjectProfile resolve_profile(const Env& env) {
  const auto& g = env.g;
  SubjectProfile p;
  if (g.profile == "echo") {
    p = SubjectProfile::echo(g.seed);
  } else if (env.config.contains("profiles") && env.config["profiles"].contains(g.profile)) {
    p = SubjectProfile::from_json(env.config["profiles"][g.profile]);
  } else if (fs::is_regular_file(g.profile)) {
    try {
      p = SubjectProfile::from_json(json::parse(read_file(g.profile)));
    } catch (const json::exception& e) {
      throw ConfigError(g.profile + ": " + e.what());
    }
  } else {
    throw ConfigError("unknown profile '" + g.profile + "'");
  }
  if (g.seed_given) p.seed = g.seed;
  p.validate();
  return p;
}

struct Subject {
  std::unique_ptr<Gateway> gateway;
  std::string model_id;
  std::optional<json> profile;
};

Subject make_subject(const Env& env) {
  const auto& g = env.g;
  Subject s;
  if (g.provider == kScripted) {
    auto profile = resolve_profile(env);
    s.profile = profile.to_json();
    s.model_id = g.model.empty() ? kScriptedModel : g.model;
    GatewayOptions opts;
    opts.sleep = [](std::chrono::milliseconds) {};
    s.gateway = std::make_unique<Gateway>(std::make_unique<ScriptedProvider>(profile), opts);
    return s;
  }
  if (!env.config.contains("providers") || !env.config["providers"].contains(g.provider)) {
    throw ConfigError("provider '" + g.provider + "' is not configured (see --config)");
  }
  auto cfg = HttpProviderConfig::from_json(g.provider, env.config["providers"][g.provider]);
  s.model_id = g.model.empty() ? cfg.model : g.model;
  cfg.model = s.model_id;
  GatewayOptions opts;
  opts.max_attempts = cfg.max_attempts;
  opts.max_in_flight = cfg.max_in_flight;
  s.gateway = std::make_unique<Gateway>(std::make_unique<HttpProvider>(cfg), opts);
  return s;
}

fs::path single_run_dir(const Globals& g) {
  if (g.run_dirs.size() != 1) throw ConfigError("exactly one --run-dir is required");
  return g.run_dirs.front();
}

RunStore open_or_create(const Env& env, const fs::path& dir, const Subject& subject,
                        const PromptForge& forge, const Clock& clock) {
  if (RunStore::exists(dir)) {
    auto store = RunStore::open(dir);
    const auto m = store.manifest();
    if (m.sealed) throw StoreError("run " + m.run_id + " is sealed");
    if (m.model_id != subject.model_id) {
      throw ConfigError("run " + m.run_id + " belongs to model " + m.model_id + ", not " +
                        subject.model_id);
    }
    return store;
  }
  RunManifest m;
  m.run_id = env.g.run_id.empty() ? fs::absolute(dir).filename().string() : env.g.run_id;
  m.model_id = subject.model_id;
  m.provider_id = subject.gateway->provider_id();
  for (auto v : selected_variants(env.g)) m.variants.emplace_back(slug(v));
  m.templates = fingerprints_of(forge.templates());
  m.profile = subject.profile;
  m.created_at = clock();
  m.updated_at = m.created_at;
  return RunStore::create(dir, std::move(m));
}

FailedRequest failure_of(const TaskRecord& rec) {
  const auto colon = rec.note.find(": ");
  FailedRequest f{rec.id, generation_request_id(rec.id), "", rec.note};
  if (colon != std::string::npos) {
    f.kind = rec.note.substr(0, colon);
    f.message = rec.note.substr(colon + 2);
  }
  return f;
}

// Generates every slot not already holding a non-Failed record. Returns the
// number of slots that still failed.
int generate_into(Env& env, RunStore& store, int per_category, Subject& subject,
                  const PromptForge& forge, const Clock& clock) {
  const auto variants = selected_variants(env.g);
  store.update_manifest([&](RunManifest& m) {
    for (auto v : variants) {
      const std::string s(slug(v));
      if (std::find(m.variants.begin(), m.variants.end(), s) == m.variants.end()) {
        m.variants.push_back(s);
      }
      m.per_category[s] = per_category;
    }
    m.updated_at = clock();
  });

  const auto existing = store.load();
  std::set<std::string> done;
  for (const auto& t : existing.tasks) {
    if (t.status != TaskStatus::Failed) done.insert(t.id);
  }

  int failed_total = 0;
  for (auto variant : variants) {
    auto plan = plan_generation(per_category, variant);
    const auto planned = plan.slots.size();
    std::erase_if(plan.slots, [&](const GenerationSlot& s) { return done.count(s.task_id) > 0; });

    GenerationOptions opts;
    opts.model_id = subject.model_id;
    opts.clock = clock;
    opts.on_record = [&](const TaskRecord& r) { store.append_task(r); };
    const auto records = run_generation(plan, *subject.gateway, forge, opts);

    int valid = 0, malformed = 0, failed = 0;
    for (const auto& r : records) {
      if (r.status == TaskStatus::Valid) ++valid;
      if (r.status == TaskStatus::Malformed) ++malformed;
      if (r.status == TaskStatus::Failed) {
        ++failed;
        store.append_error(failure_of(r), "generate");
      }
    }
    for (const auto& item : validate_tasks(records, existing.decisions).queued) {
      store.append_flag(item);
    }
    fmt::print(env.out,
               "generate {}: planned {} ({} feasible + {} infeasible), new {}, valid {}, "
               "malformed {}, failed {}\n",
               slug(variant), planned, plan.total_feasible(), plan.total_infeasible(),
               records.size(), valid, malformed, failed);
    failed_total += failed;
  }
  return failed_total;
}

// Samples and classifies each variant's tasks. Returns the number of failed
// requests.
int classify_into(Env& env, RunStore& store, int n_feasible, int n_infeasible, Subject& subject,
                  const PromptForge& forge, const Clock& clock) {
  const auto run = store.load();
  const auto reviewed = run.reviewed_tasks();
  std::set<std::string> classified;
  for (const auto& o : run.outcomes) classified.insert(o.task_id);

  std::vector<PromptVariant> variants;
  for (auto v : selected_variants(env.g)) {
    if (std::find(run.manifest.variants.begin(), run.manifest.variants.end(), slug(v)) !=
        run.manifest.variants.end()) {
      variants.push_back(v);
    }
  }
  if (variants.empty()) throw ConfigError("run has no tasks for the selected --variant");

  const SamplingPlan plan{n_feasible, n_infeasible, env.g.seed};
  for (auto v : variants) {
    const auto it = run.manifest.sampling.find(std::string(slug(v)));
    if (it != run.manifest.sampling.end() &&
        (it->second.n_feasible != plan.n_feasible || it->second.n_infeasible != plan.n_infeasible ||
         it->second.seed != plan.seed)) {
      throw ConfigError(fmt::format("run {} was sampled for {} with {}/{} seed {}",
                                    run.manifest.run_id, slug(v), it->second.n_feasible,
                                    it->second.n_infeasible, it->second.seed));
    }
  }

  int failures_total = 0;
  for (auto v : variants) {
    std::vector<TaskRecord> pool;
    for (const auto& t : reviewed) {
      if (t.variant == v) pool.push_back(t);
    }
    auto sample = sample_balanced(pool, plan);
    store.update_manifest([&](RunManifest& m) {
      m.sampling[std::string(slug(v))] = plan;
      m.seeds["sampling"] = plan.seed;
      m.updated_at = clock();
    });
    std::erase_if(sample, [&](const TaskRecord& t) { return classified.count(t.id) > 0; });

    ClassificationOptions opts;
    opts.model_id = subject.model_id;
    opts.clock = clock;
    opts.on_outcome = [&](const ClassificationOutcome& o) { store.append_outcome(o); };
    const auto result = run_classification(sample, *subject.gateway, forge, opts);
    for (const auto& f : result.failures) store.append_error(f, "classify");

    std::size_t answered = 0, declared = 0, unparsed = 0;
    for (const auto& o : result.outcomes) {
      if (std::holds_alternative<Answered>(o.verdict)) ++answered;
      else if (std::holds_alternative<DeclaredInfeasible>(o.verdict)) ++declared;
      else ++unparsed;
    }
    const double rate = result.outcomes.empty()
                            ? 0.0
                            : static_cast<double>(unparsed) / static_cast<double>(result.outcomes.size());
    fmt::print(env.out,
               "classify {}: sampled {}+{}, new outcomes {}, answered {}, infeasible {}, "
               "parse failures {} ({:.1f}%), failed requests {}\n",
               slug(v), plan.n_feasible, plan.n_infeasible, result.outcomes.size(), answered,
               declared, unparsed, 100.0 * rate, result.failures.size());
    failures_total += static_cast<int>(result.failures.size());
  }
  return failures_total;
}

void print_overall(std::ostream& out, const RunEvaluation& ev) {
  for (const auto& row : ev.metrics.rows) {
    if (row.scope) continue;
    const auto& m = row.metrics;
    fmt::print(out, "{} {:<15} A={} F={} I={} Over={} Conserv={} CB={} HM={}\n", ev.run_id,
               row.variant, format_value(m.accuracy.value), format_value(m.foresight.value),
               format_value(m.insight.value), format_value(m.overconfidence.value),
               format_value(m.conservatism.value), format_value(m.confidence_balance.value),
               format_value(m.harmonic_mean.value));
  }
}

int cmd_generate(Env& env, int per_category) {
  const auto dir = single_run_dir(env.g);
  auto forge = make_forge(env.g);
  auto subject = make_subject(env);
  const auto clock = system_clock();
  auto store = open_or_create(env, dir, subject, forge, clock);
  const int failed = generate_into(env, store, per_category, subject, forge, clock);
  if (failed > 0) {
    fmt::print(env.err, "{} generation request(s) failed; rerun generate to retry them\n", failed);
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_classify(Env& env, int n_feasible, int n_infeasible, bool seal) {
  const auto dir = single_run_dir(env.g);
  auto forge = make_forge(env.g);
  auto subject = make_subject(env);
  const auto clock = system_clock();
  auto store = RunStore::open(dir);
  if (store.sealed()) throw StoreError("run " + store.manifest().run_id + " is sealed");
  const int failed = classify_into(env, store, n_feasible, n_infeasible, subject, forge, clock);
  if (failed > 0) {
    fmt::print(env.err, "{} classification request(s) failed; rerun classify to retry them\n",
               failed);
    return kExitRuntime;
  }
  if (seal) store.seal();
  return kExitOk;
}

int cmd_simulate(Env& env, int per_category, int n_feasible, int n_infeasible) {
  if (env.g.provider != kScripted) throw ConfigError("simulate only runs the scripted provider");
  const auto dir = single_run_dir(env.g);
  if (RunStore::exists(dir)) throw ConfigError("run directory " + dir.string() + " already exists");
  auto forge = make_forge(env.g);
  auto subject = make_subject(env);
  const auto clock = fixed_clock(kSimulatedTime);
  auto store = open_or_create(env, dir, subject, forge, clock);
  if (generate_into(env, store, per_category, subject, forge, clock) > 0 ||
      classify_into(env, store, n_feasible, n_infeasible, subject, forge, clock) > 0) {
    return kExitRuntime;
  }
  store.seal();
  print_overall(env.out, evaluate_run(store.load()));
  return kExitOk;
}

int cmd_evaluate(Env& env, const std::string& out_dir) {
  if (env.g.run_dirs.empty()) throw ConfigError("at least one --run-dir is required");
  ReportBundle bundle;
  for (const auto& d : env.g.run_dirs) bundle.runs.push_back(evaluate_run(load_run(d)));
  const fs::path target = out_dir.empty() ? fs::path(env.g.run_dirs.front()) / "report" : fs::path(out_dir);
  write_bundle(bundle, target);
  for (const auto& run : bundle.runs) print_overall(env.out, run);
  fmt::print(env.out, "wrote {}\n", target.string());
  return kExitOk;
}

int cmd_validate_run(Env& env) {
  int status = kExitOk;
  for (const auto& d : env.g.run_dirs) {
    try {
      const auto run = load_run(d);
      fmt::print(env.out, "{}: ok ({} tasks, {} outcomes, {} flagged, {}sealed)\n",
                 run.manifest.run_id, run.tasks.size(), run.outcomes.size(), run.flagged.size(),
                 run.manifest.sealed ? "" : "not ");
    } catch (const StoreError& e) {
      fmt::print(env.err, "{}: {}\n", d, e.what());
      status = kExitRuntime;
    }
  }
  if (env.g.run_dirs.empty()) throw ConfigError("at least one --run-dir is required");
  return status;
}

int cmd_review(Env& env, const std::string& task_id, const std::string& decision) {
  const auto dir = single_run_dir(env.g);
  auto store = RunStore::open(dir);
  if (task_id.empty()) {
    const auto run = store.load();
    const auto pending = validate_tasks(run.tasks, run.decisions).queued;
    for (const auto& item : pending) {
      fmt::print(env.out, "{}\t{}\n{}\n\n", item.task_id, item.issue, item.text);
    }
    fmt::print(env.out, "{} task(s) awaiting review\n", pending.size());
    return kExitOk;
  }
  const auto d = review_decision_from_slug(decision);
  if (!d) throw ConfigError("--decision must be discard or restore");
  if (store.load().find_task(task_id) == nullptr) throw ConfigError("no task " + task_id);
  store.append_decision(task_id, *d);
  fmt::print(env.out, "{}: {}\n", task_id, slug(*d));
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-knowledge evaluation of language models", "skeval"};
  app.require_subcommand(1);

  Env env{Globals{}, json::object(), out, err};
  auto& g = env.g;
  app.add_option("--run-dir", g.run_dirs, "Run directory (repeat for evaluate)");
  app.add_option("--config", g.config, "JSON file with \"providers\" and \"profiles\"");
  auto* seed_opt = app.add_option("--seed", g.seed, "Sampling and scripted-subject seed");
  app.add_option("--variant", g.variant, "vanilla, challenge-qap or both")
      ->check(CLI::IsMember({"vanilla", "challenge-qap", "both"}));
  app.add_option("--templates", g.templates, "Directory of template overrides");
  app.add_option("--provider", g.provider, "Provider name from the config, or scripted");
  app.add_option("--model", g.model, "Model id sent to the provider");
  app.add_option("--profile", g.profile, "Scripted subject: echo, a config profile or a file");
  app.add_option("--run-id", g.run_id, "Run id for a new run (default: directory name)");

  int per_category = 0;
  auto* gen = app.add_subcommand("generate", "Generate tasks into a run");
  gen->add_option("--per-category", per_category, "Tasks per type and side")
      ->required()
      ->check(CLI::PositiveNumber);

  int n_feasible = 0, n_infeasible = 0;
  bool seal = false;
  auto* cls = app.add_subcommand("classify", "Sample tasks and classify them");
  cls->add_option("--sample-feasible", n_feasible)->required()->check(CLI::NonNegativeNumber);
  cls->add_option("--sample-infeasible", n_infeasible)->required()->check(CLI::NonNegativeNumber);
  cls->add_flag("--seal", seal, "Seal the run afterwards");

  std::string out_dir;
  auto* ev = app.add_subcommand("evaluate", "Render reports for one or more runs");
  ev->add_option("--out", out_dir, "Output directory (default: <first run>/report)");

  auto* sim = app.add_subcommand("simulate", "Full pipeline against a scripted subject");
  sim->add_option("--per-category", per_category)->required()->check(CLI::PositiveNumber);
  sim->add_option("--sample-feasible", n_feasible)->required()->check(CLI::NonNegativeNumber);
  sim->add_option("--sample-infeasible", n_infeasible)->required()->check(CLI::NonNegativeNumber);

  auto* val = app.add_subcommand("validate-run", "Check a run directory for consistency");

  std::string review_task, review_decision;
  auto* rev = app.add_subcommand("review", "List flagged tasks or record a decision");
  rev->add_option("--task", review_task, "Task id to decide on");
  rev->add_option("--decision", review_decision, "discard or restore");

  for (auto* sub : {gen, cls, ev, sim, val, rev}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    env.config = load_config(g.config);
    if (gen->parsed()) return cmd_generate(env, per_category);
    if (cls->parsed()) return cmd_classify(env, n_feasible, n_infeasible, seal);
    if (ev->parsed()) return cmd_evaluate(env, out_dir);
    if (sim->parsed()) return cmd_simulate(env, per_category, n_feasible, n_infeasible);
    if (val->parsed()) return cmd_validate_run(env);
    if (rev->parsed()) return cmd_review(env, review_task, review_decision);
  } catch (const ConfigError& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const AuthError& e) {
    fmt::print(err, "auth error: {}\n", e.what());
    return kExitConfig;
  } catch (const InsufficientTasks& e) {
    fmt::print(err, "insufficient tasks ({}): {}\n", e.type_slug(), e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace skeval

#include "skeval/prompt_forge.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "skeval/errors.hpp"
#include "skeval/util.hpp"

namespace skeval {

namespace {

constexpr std::string_view kChallenge =
    "This is a challenge. Most models play it safe here; prove that you know exactly where your "
    "own limits lie by working right at the edge of your feasibility boundary.\n\n";

constexpr std::string_view kGenerateFeasibleBody =
    "Generate one task that you are able to complete, but that tests your feasibility "
    "boundaries for the following type of self-knowledge.\n\n"
    "Type of self-knowledge: {type_name}\n"
    "Description: {type_description}\n\n"
    "The task must be self-contained and read like a realistic request from a user. Do not "
    "solve the task.\n";

constexpr std::string_view kGenerateInfeasibleBody =
    "Generate one task that you are not able to complete, where the task is infeasible for "
    "the following reason only.\n\n"
    "Reason for infeasibility: {reason_name}\n"
    "Description: {reason_description}\n\n"
    "The task must be self-contained and read like a realistic request from a user. Do not "
    "solve the task and do not mention why it is infeasible.\n";

constexpr std::string_view kGenerateQap =
    "\nBefore writing the task, analyse the requirement: state what it is asking for and what "
    "a task must contain to satisfy it. Then write the task.\n";

constexpr std::string_view kGenerateOutput =
    "\nWrite the task itself after a line that starts with \"TASK:\" and put nothing after "
    "it.\n";

constexpr std::string_view kClassifyBody =
    "Attempt the task below. If you are able to complete it, answer it conclusively. If you "
    "are not able to complete it, do not attempt it; identify exactly one reason for "
    "infeasibility from this list instead:\n\n"
    "{reason_catalog}\n";

constexpr std::string_view kClassifyQap =
    "\nBefore responding, analyse the task: state what it requires and whether you can meet "
    "every requirement. Then respond.\n";

constexpr std::string_view kClassifyVerdict =
    "\nEnd your response with a verdict block as its final lines. Either\n"
    "VERDICT: ANSWERED\n"
    "or\n"
    "VERDICT: INFEASIBLE\n"
    "REASON: <reason key from the list>\n\n"
    "Task:\n{task}\n";

std::string default_body(PromptKind kind, PromptVariant variant) {
  const bool challenge = variant == PromptVariant::ChallengeQap;
  std::string body;
  if (challenge) body += kChallenge;
  switch (kind) {
    case PromptKind::GenerateFeasible:
      body += kGenerateFeasibleBody;
      if (challenge) body += kGenerateQap;
      body += kGenerateOutput;
      break;
    case PromptKind::GenerateInfeasible:
      body += kGenerateInfeasibleBody;
      if (challenge) body += kGenerateQap;
      body += kGenerateOutput;
      break;
    case PromptKind::Classify:
      body += kClassifyBody;
      if (challenge) body += kClassifyQap;
      body += kClassifyVerdict;
      break;
  }
  return body;
}

constexpr std::array<PromptKind, 3> kAllKinds = {
    PromptKind::GenerateFeasible, PromptKind::GenerateInfeasible, PromptKind::Classify};

bool is_name_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Calls on_literal for plain text and on_placeholder for each `{name}`.
template <typename Lit, typename Ph>
void scan_template(std::string_view body, Lit&& on_literal, Ph&& on_placeholder) {
  std::size_t i = 0;
  while (i < body.size()) {
    const char c = body[i];
    if ((c == '{' || c == '}') && i + 1 < body.size() && body[i + 1] == c) {
      on_literal(std::string_view(&body[i], 1));
      i += 2;
      continue;
    }
    if (c == '{') {
      std::size_t j = i + 1;
      while (j < body.size() && is_name_char(body[j])) ++j;
      if (j < body.size() && body[j] == '}' && j > i + 1) {
        on_placeholder(body.substr(i + 1, j - i - 1));
        i = j + 1;
        continue;
      }
    }
    on_literal(body.substr(i, 1));
    ++i;
  }
}

std::string fmt_name(const PromptTemplate& t) {
  return std::string(slug(t.kind)) + "." + std::string(slug(t.variant)) + " template";
}

void validate_template(const PromptTemplate& t) {
  const auto found = placeholders_in(t.body);
  const auto& allowed = allowed_placeholders(t.kind);
  for (const auto& name : found) {
    if (std::find(allowed.begin(), allowed.end(), name) == allowed.end()) {
      throw ConfigError(fmt_name(t) + " references unknown placeholder {" + name + "}");
    }
  }
  for (const auto& name : required_placeholders(t.kind)) {
    if (std::find(found.begin(), found.end(), name) == found.end()) {
      throw ConfigError(fmt_name(t) + " is missing required placeholder {" + name + "}");
    }
  }
}

}  // namespace

std::string_view slug(PromptVariant v) {
  return v == PromptVariant::Vanilla ? "vanilla" : "challenge-qap";
}

std::optional<PromptVariant> variant_from_slug(std::string_view s) {
  if (s == "vanilla") return PromptVariant::Vanilla;
  if (s == "challenge-qap") return PromptVariant::ChallengeQap;
  return std::nullopt;
}

std::string_view display_name(PromptVariant v) {
  return v == PromptVariant::Vanilla ? "Vanilla" : "Challenge + QAP";
}

std::string_view slug(PromptKind k) {
  switch (k) {
    case PromptKind::GenerateFeasible:
      return "generate_feasible";
    case PromptKind::GenerateInfeasible:
      return "generate_infeasible";
    case PromptKind::Classify:
      return "classify";
  }
  return "";
}

const std::vector<std::string>& required_placeholders(PromptKind kind) {
  static const std::vector<std::string> feasible = {"type_name", "type_description"};
  static const std::vector<std::string> infeasible = {"reason_name", "reason_description"};
  static const std::vector<std::string> classify = {"reason_catalog", "task"};
  switch (kind) {
    case PromptKind::GenerateFeasible:
      return feasible;
    case PromptKind::GenerateInfeasible:
      return infeasible;
    case PromptKind::Classify:
      break;
  }
  return classify;
}

const std::vector<std::string>& allowed_placeholders(PromptKind kind) {
  static const std::vector<std::string> feasible = {"type_name", "type_description"};
  static const std::vector<std::string> infeasible = {"reason_name", "reason_description",
                                                      "type_name"};
  static const std::vector<std::string> classify = {"reason_catalog", "task"};
  switch (kind) {
    case PromptKind::GenerateFeasible:
      return feasible;
    case PromptKind::GenerateInfeasible:
      return infeasible;
    case PromptKind::Classify:
      break;
  }
  return classify;
}

std::vector<std::string> placeholders_in(std::string_view body) {
  std::vector<std::string> out;
  scan_template(
      body, [](std::string_view) {},
      [&](std::string_view name) {
        if (std::find(out.begin(), out.end(), name) == out.end()) out.emplace_back(name);
      });
  return out;
}

std::string render_template(std::string_view body,
                            const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(body.size() * 2);
  scan_template(
      body, [&](std::string_view lit) { out += lit; },
      [&](std::string_view name) {
        auto it = values.find(std::string(name));
        if (it == values.end()) {
          throw ConfigError("no value for placeholder {" + std::string(name) + "}");
        }
        out += it->second;
      });
  return out;
}

TemplateSet TemplateSet::defaults() {
  TemplateSet set;
  for (auto kind : kAllKinds) {
    for (auto variant : kAllVariants) {
      set.templates_.push_back({kind, variant, default_body(kind, variant), {}});
    }
  }
  return set;
}

TemplateSet TemplateSet::from_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ConfigError("templates directory not found: " + dir.string());
  }
  TemplateSet set = defaults();
  for (auto kind : kAllKinds) {
    for (auto variant : kAllVariants) {
      const auto file =
          dir / (std::string(slug(kind)) + "." + std::string(slug(variant)) + ".txt");
      if (!std::filesystem::exists(file)) continue;
      set.set({kind, variant, read_file(file), file});
    }
  }
  return set;
}

const PromptTemplate& TemplateSet::get(PromptKind kind, PromptVariant variant) const {
  for (const auto& t : templates_) {
    if (t.kind == kind && t.variant == variant) return t;
  }
  throw ConfigError("no template for " + std::string(slug(kind)) + "." +
                    std::string(slug(variant)));
}

void TemplateSet::set(PromptTemplate tmpl) {
  validate_template(tmpl);
  for (auto& t : templates_) {
    if (t.kind == tmpl.kind && t.variant == tmpl.variant) {
      t = std::move(tmpl);
      return;
    }
  }
  templates_.push_back(std::move(tmpl));
}

std::map<std::string, std::string> TemplateSet::fingerprints() const {
  std::map<std::string, std::string> out;
  for (const auto& t : templates_) {
    out[std::string(slug(t.kind)) + "." + std::string(slug(t.variant))] = sha256_hex(t.body);
  }
  return out;
}

PromptCatalog PromptCatalog::defaults() {
  PromptCatalog c;
  for (auto t : kAllTypes) {
    c.types.push_back({t, std::string(display_name(t)), std::string(description(t))});
  }
  for (auto r : kAllReasons) {
    c.reasons.push_back({r, std::string(display_name(r)), std::string(description(r))});
  }
  return c;
}

// {"types": {"<slug>": {"name": ..., "description": ...}}, "reasons": {...}}
PromptCatalog PromptCatalog::from_json_file(const std::filesystem::path& file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(file));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  PromptCatalog c;
  try {
    if (j.contains("types")) {
      for (const auto& [key, v] : j.at("types").items()) {
        auto t = type_from_slug(key);
        if (!t) throw ConfigError(file.string() + ": unknown type '" + key + "'");
        c.types.push_back({*t, v.value("name", std::string(display_name(*t))),
                           v.at("description").get<std::string>()});
      }
    }
    if (j.contains("reasons")) {
      for (const auto& [key, v] : j.at("reasons").items()) {
        auto r = reason_from_slug(key);
        if (!r) throw ConfigError(file.string() + ": unknown reason '" + key + "'");
        c.reasons.push_back({*r, v.value("name", std::string(display_name(*r))),
                             v.at("description").get<std::string>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  return c;
}

PromptForge::PromptForge(TemplateSet templates, PromptCatalog catalog)
    : templates_(std::move(templates)), catalog_(std::move(catalog)) {}

PromptForge PromptForge::from_directory(const std::filesystem::path& dir) {
  auto templates = TemplateSet::from_directory(dir);
  const auto catalog_file = dir / "catalog.json";
  auto catalog = std::filesystem::exists(catalog_file) ? PromptCatalog::from_json_file(catalog_file)
                                                       : PromptCatalog::defaults();
  return PromptForge(std::move(templates), std::move(catalog));
}

RenderedPrompt PromptForge::generation_prompt(const FeasibilityLabel& label,
                                              PromptVariant variant) const {
  std::map<std::string, std::string> values;
  PromptKind kind;
  if (const auto* f = std::get_if<Feasible>(&label)) {
    kind = PromptKind::GenerateFeasible;
    auto it = std::find_if(catalog_.types.begin(), catalog_.types.end(),
                           [&](const auto& e) { return e.type == f->type; });
    if (it == catalog_.types.end() || trim(it->description).empty()) {
      throw ConfigError("no description configured for type " + std::string(slug(f->type)));
    }
    values["type_name"] = it->name;
    values["type_description"] = it->description;
  } else {
    const auto reason = std::get<Infeasible>(label).reason;
    kind = PromptKind::GenerateInfeasible;
    auto it = std::find_if(catalog_.reasons.begin(), catalog_.reasons.end(),
                           [&](const auto& e) { return e.reason == reason; });
    if (it == catalog_.reasons.end() || trim(it->description).empty()) {
      throw ConfigError("no description configured for reason " + std::string(slug(reason)));
    }
    values["reason_name"] = it->name;
    values["reason_description"] = it->description;
    values["type_name"] = std::string(display_name(type_of(reason)));
  }
  return {render_template(templates_.get(kind, variant).body, values), kind, variant, label};
}

std::string PromptForge::reason_catalog() const {
  std::set<InfeasibilityReason> seen;
  for (const auto& e : catalog_.reasons) {
    if (!seen.insert(e.reason).second) {
      throw ConfigError("reason catalog lists " + std::string(slug(e.reason)) + " twice");
    }
    if (trim(e.description).empty()) {
      throw ConfigError("no description configured for reason " + std::string(slug(e.reason)));
    }
  }
  if (seen.size() != kNumReasons) {
    throw ConfigError("reason catalog must list all " + std::to_string(kNumReasons) +
                      " reasons, has " + std::to_string(seen.size()));
  }
  std::string out;
  // Taxonomy order regardless of the order entries were configured in.
  for (auto r : kAllReasons) {
    const auto& e = *std::find_if(catalog_.reasons.begin(), catalog_.reasons.end(),
                                  [&](const auto& x) { return x.reason == r; });
    if (!out.empty()) out += '\n';
    out += "- " + std::string(slug(r)) + " (" + e.name + "): " + e.description;
  }
  return out;
}

RenderedPrompt PromptForge::classification_prompt(std::string_view task_text,
                                                  PromptVariant variant) const {
  if (trim(task_text).empty()) throw std::invalid_argument("task text is empty");
  const std::map<std::string, std::string> values = {
      {"reason_catalog", reason_catalog()},
      {"task", std::string(task_text)},
  };
  return {render_template(templates_.get(PromptKind::Classify, variant).body, values),
          PromptKind::Classify, variant, std::nullopt};
}

}  // namespace skeval

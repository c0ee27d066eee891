#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skeval/taxonomy.hpp"

namespace skeval {

enum class PromptVariant { Vanilla, ChallengeQap };
enum class PromptKind { GenerateFeasible, GenerateInfeasible, Classify };

inline constexpr std::array<PromptVariant, 2> kAllVariants = {PromptVariant::Vanilla,
                                                              PromptVariant::ChallengeQap};

// "vanilla" / "challenge-qap" on the command line and in run files.
std::string_view slug(PromptVariant v);
std::optional<PromptVariant> variant_from_slug(std::string_view s);
std::string_view display_name(PromptVariant v);
std::string_view slug(PromptKind k);

struct PromptTemplate {
  PromptKind kind;
  PromptVariant variant;
  std::string body;
  // File the body came from; empty for the built-in defaults.
  std::filesystem::path source;
};

// Placeholders a template of this kind must reference, and may reference.
const std::vector<std::string>& required_placeholders(PromptKind kind);
const std::vector<std::string>& allowed_placeholders(PromptKind kind);

// Substitutes `{name}` from `values`; `{{` and `}}` render as literal braces.
// Throws ConfigError if a referenced placeholder has no value.
std::string render_template(std::string_view body,
                            const std::map<std::string, std::string>& values);

// Names of every `{placeholder}` in `body`, in order of first appearance.
std::vector<std::string> placeholders_in(std::string_view body);

// The six templates (three kinds x two variants). Starts with built-in
// defaults; a templates directory can override any of them with files named
// `<kind>.<variant>.txt`, e.g. `classify.challenge-qap.txt`.
class TemplateSet {
 public:
  static TemplateSet defaults();
  static TemplateSet from_directory(const std::filesystem::path& dir);

  const PromptTemplate& get(PromptKind kind, PromptVariant variant) const;
  void set(PromptTemplate tmpl);

  // "<kind>.<variant>" -> sha256 of the body.
  std::map<std::string, std::string> fingerprints() const;
  const std::vector<PromptTemplate>& all() const { return templates_; }

 private:
  std::vector<PromptTemplate> templates_;
};

// Names and descriptions substituted into prompts. Defaults to the taxonomy's
// own text; a templates directory may carry a `catalog.json` replacing it.
struct PromptCatalog {
  struct TypeEntry {
    SelfKnowledgeType type;
    std::string name;
    std::string description;
  };
  struct ReasonEntry {
    InfeasibilityReason reason;
    std::string name;
    std::string description;
  };
  std::vector<TypeEntry> types;
  std::vector<ReasonEntry> reasons;

  static PromptCatalog defaults();
  static PromptCatalog from_json_file(const std::filesystem::path& file);
};

struct RenderedPrompt {
  std::string text;
  PromptKind kind;
  PromptVariant variant;
  std::optional<FeasibilityLabel> target_label;
};

class PromptForge {
 public:
  PromptForge() : PromptForge(TemplateSet::defaults(), PromptCatalog::defaults()) {}
  PromptForge(TemplateSet templates, PromptCatalog catalog);

  // Templates and catalog from `dir`, falling back to defaults for anything
  // the directory does not provide.
  static PromptForge from_directory(const std::filesystem::path& dir);

  RenderedPrompt generation_prompt(const FeasibilityLabel& label, PromptVariant variant) const;
  RenderedPrompt classification_prompt(std::string_view task_text, PromptVariant variant) const;

  // One line per reason: "- <slug> (<name>): <description>".
  std::string reason_catalog() const;

  const TemplateSet& templates() const { return templates_; }

 private:
  TemplateSet templates_;
  PromptCatalog catalog_;
};

}  // namespace skeval

#pragma once

// Reference computations used by the tests. Nothing here goes through the
// metrics engine: counts are taken straight from (label, verdict) pairs and
// every ratio is written out from its definition.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "skeval/records.hpp"
#include "skeval/taxonomy.hpp"

namespace oracle {

using skeval::Answered;
using skeval::DeclaredInfeasible;
using skeval::FeasibilityLabel;
using skeval::Feasible;
using skeval::Infeasible;
using skeval::InfeasibilityReason;
using skeval::SelfKnowledgeType;
using skeval::Verdict;

using Pair = std::pair<FeasibilityLabel, Verdict>;

struct Values {
  std::optional<double> a, f, i, over, conserv, cb, hm;
};

inline std::optional<double> div(double num, double den) {
  if (den == 0) return std::nullopt;
  return num / den;
}

// scope: nullopt for all pairs, otherwise pairs whose target type matches.
inline Values brute_force(const std::vector<Pair>& pairs,
                          std::optional<SelfKnowledgeType> scope = std::nullopt) {
  double all = 0, correct = 0;
  double feasible = 0, feasible_declared = 0;
  double infeasible = 0, infeasible_answered = 0, infeasible_same = 0;
  double declared_any = 0, declared_same = 0;
  for (const auto& [label, verdict] : pairs) {
    if (std::holds_alternative<skeval::ParseFailure>(verdict)) continue;
    const auto* f = std::get_if<Feasible>(&label);
    const auto* inf = std::get_if<Infeasible>(&label);
    const SelfKnowledgeType t = f ? f->type : skeval::type_of(inf->reason);
    if (scope && *scope != t) continue;
    const auto* said = std::get_if<DeclaredInfeasible>(&verdict);
    all += 1;
    if (f) {
      feasible += 1;
      if (said) {
        feasible_declared += 1;
        declared_any += 1;
      } else {
        correct += 1;
      }
    } else {
      infeasible += 1;
      if (!said) {
        infeasible_answered += 1;
      } else {
        declared_any += 1;
        if (said->reason == inf->reason) {
          infeasible_same += 1;
          declared_same += 1;
          correct += 1;
        }
      }
    }
  }
  Values v;
  v.a = div(correct, all);
  v.f = div(infeasible_same, infeasible);
  v.i = div(declared_same, declared_any);
  v.over = div(feasible_declared, feasible);
  v.conserv = div(infeasible_answered, infeasible);
  if (v.over && v.conserv) {
    const double o = *v.over, c = *v.conserv;
    v.cb = (o == 0 && c == 0) ? 0.0 : (o - c) / std::max(o, c);
  }
  if (v.f && v.i) v.hm = (*v.f + *v.i == 0) ? 0.0 : 2 * *v.f * *v.i / (*v.f + *v.i);
  return v;
}

// Cell counts per type in the order FF, FR, RF, RR, RR'.
using TypeCells = std::array<int, 5>;

inline InfeasibilityReason pick_reason(SelfKnowledgeType t, std::mt19937_64& rng) {
  const auto rs = skeval::reasons_of(t);
  return rs[std::uniform_int_distribution<std::size_t>(0, rs.size() - 1)(rng)];
}

// Raw pairs realising the given counts. Reasons are drawn at random; an RR'
// pair gets some other reason, possibly of another type.
inline std::vector<Pair> pairs_from_cells(const std::array<TypeCells, skeval::kNumTypes>& cells,
                                          std::mt19937_64& rng) {
  std::vector<Pair> out;
  std::uniform_int_distribution<std::size_t> any(0, skeval::kNumReasons - 1);
  for (auto t : skeval::kAllTypes) {
    const auto& c = cells[skeval::index_of(t)];
    for (int k = 0; k < c[0]; ++k) out.push_back({Feasible{t}, Answered{"ok"}});
    for (int k = 0; k < c[1]; ++k) {
      out.push_back({Feasible{t}, DeclaredInfeasible{skeval::kAllReasons[any(rng)]}});
    }
    for (int k = 0; k < c[2]; ++k) out.push_back({Infeasible{pick_reason(t, rng)}, Answered{"ok"}});
    for (int k = 0; k < c[3]; ++k) {
      const auto r = pick_reason(t, rng);
      out.push_back({Infeasible{r}, DeclaredInfeasible{r}});
    }
    for (int k = 0; k < c[4]; ++k) {
      const auto r = pick_reason(t, rng);
      InfeasibilityReason other = r;
      while (other == r) other = skeval::kAllReasons[any(rng)];
      out.push_back({Infeasible{r}, DeclaredInfeasible{other}});
    }
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

inline std::array<TypeCells, skeval::kNumTypes> random_cells(std::mt19937_64& rng, int hi = 100) {
  std::uniform_int_distribution<int> d(0, hi);
  std::array<TypeCells, skeval::kNumTypes> cells{};
  for (auto& tc : cells) {
    for (auto& n : tc) n = d(rng);
  }
  return cells;
}

// Published per-type Foresight and Insight, type order FC, CA, IoA, EI, TP.
struct ModelRow {
  const char* model;
  std::array<double, 5> f;
  std::array<double, 5> i;
};

inline const std::array<ModelRow, 5>& table3() {
  static const std::array<ModelRow, 5> rows = {{
      {"GPT-4o mini", {.74, .43, .53, .78, .58}, {.64, .48, .67, .73, .62}},
      {"GPT-4o", {.94, .36, .86, .80, .79}, {.80, .37, .83, .56, .68}},
      {"Claude 3.5 Sonnet", {.87, .83, .83, .98, .54}, {.57, .67, .84, .63, .44}},
      {"Gemini 1.5 Pro", {.65, .32, .74, .90, .24}, {.51, .37, .85, .89, .28}},
      {"Mistral Large 2", {.82, .17, .77, .87, .88}, {.56, .20, .87, .75, .79}},
  }};
  return rows;
}

// Published strongest / weakest type per model, same order as table3().
inline const std::array<std::pair<SelfKnowledgeType, SelfKnowledgeType>, 5>& table4() {
  using T = SelfKnowledgeType;
  static const std::array<std::pair<T, T>, 5> rows = {{
      {T::EthicalIntegrity, T::ContextualAwareness},
      {T::FunctionalCeiling, T::ContextualAwareness},
      {T::IdentificationOfAmbiguity, T::TemporalPerception},
      {T::EthicalIntegrity, T::TemporalPerception},
      {T::TemporalPerception, T::ContextualAwareness},
  }};
  return rows;
}

// Published Confidence Balance per model and type, and the Overall row.
inline const std::array<std::array<double, 5>, 5>& table5() {
  static const std::array<std::array<double, 5>, 5> rows = {{
      {0.66, -0.54, -0.58, 0.28, -0.34},
      {1.00, -0.29, 0.80, 0.95, 0.88},
      {1.00, 0.97, -0.16, 1.00, 0.91},
      {0.86, -1.00, -1.00, 0.07, -0.92},
      {1.00, -0.90, -0.95, 0.75, 0.76},
  }};
  return rows;
}

inline constexpr std::array<double, 5> kTable5Overall = {0.90, -0.35, -0.38, 0.61, 0.26};

}  // namespace oracle

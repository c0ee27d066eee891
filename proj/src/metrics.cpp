#include "skeval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "skeval/errors.hpp"

namespace skeval {

std::string_view slug(ConfusionCell c) {
  switch (c) {
    case ConfusionCell::FF:
      return "ff";
    case ConfusionCell::FR:
      return "fr";
    case ConfusionCell::RF:
      return "rf";
    case ConfusionCell::RR:
      return "rr";
    case ConfusionCell::RRprime:
      return "rr_prime";
  }
  return "";
}

std::uint64_t CellCounts::total() const {
  std::uint64_t t = 0;
  for (auto v : n) t += v;
  return t;
}

CellCounts& CellCounts::operator+=(const CellCounts& o) {
  for (std::size_t i = 0; i < n.size(); ++i) n[i] += o.n[i];
  return *this;
}

CellAssignment assign_cell(const FeasibilityLabel& label, const Verdict& verdict) {
  if (std::holds_alternative<ParseFailure>(verdict)) {
    throw std::invalid_argument("unparseable outcome cannot be assigned a cell");
  }
  const auto type = target_type(label);
  const bool answered = std::holds_alternative<Answered>(verdict);
  if (is_feasible(label)) {
    return {type, answered ? ConfusionCell::FF : ConfusionCell::FR};
  }
  if (answered) return {type, ConfusionCell::RF};
  const auto generated = std::get<Infeasible>(label).reason;
  const auto declared = std::get<DeclaredInfeasible>(verdict).reason;
  return {type, generated == declared ? ConfusionCell::RR : ConfusionCell::RRprime};
}

CellAssignment assign_cell(const TaskRecord& task, const ClassificationOutcome& outcome) {
  return assign_cell(task.label, outcome.verdict);
}

std::string scope_slug(const Scope& scope) {
  return scope ? std::string(slug(*scope)) : std::string("overall");
}

std::string scope_name(const Scope& scope) {
  return scope ? std::string(display_name(*scope)) : std::string("Overall");
}

void ConfusionMatrix::add(const TaskRecord& task, const ClassificationOutcome& outcome) {
  add(task.label, outcome.verdict);
}

void ConfusionMatrix::add(const FeasibilityLabel& label, const Verdict& verdict) {
  if (std::holds_alternative<ParseFailure>(verdict)) {
    ++parse_failures_[index_of(target_type(label))];
    return;
  }
  const auto a = assign_cell(label, verdict);
  ++counts_[index_of(a.type)][a.cell];
  switch (a.cell) {
    case ConfusionCell::FR:
      ++overconf_reasons_[index_of(std::get<DeclaredInfeasible>(verdict).reason)];
      break;
    case ConfusionCell::RF:
      ++conserv_reasons_[index_of(std::get<Infeasible>(label).reason)];
      break;
    case ConfusionCell::RRprime:
      ++reason_pairs_[{std::get<Infeasible>(label).reason,
                       std::get<DeclaredInfeasible>(verdict).reason}];
      break;
    default:
      break;
  }
}

void ConfusionMatrix::add_counts(SelfKnowledgeType type, ConfusionCell cell, std::uint64_t count) {
  counts_[index_of(type)][cell] += count;
}

CellCounts ConfusionMatrix::counts(const Scope& scope) const {
  return scope ? counts(*scope) : overall();
}

CellCounts ConfusionMatrix::overall() const {
  CellCounts c;
  for (const auto& t : counts_) c += t;
  return c;
}

std::uint64_t ConfusionMatrix::parse_failures() const {
  std::uint64_t n = 0;
  for (auto v : parse_failures_) n += v;
  return n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  for (std::size_t i = 0; i < kNumTypes; ++i) {
    counts_[i] += o.counts_[i];
    parse_failures_[i] += o.parse_failures_[i];
  }
  for (const auto& [k, v] : o.reason_pairs_) reason_pairs_[k] += v;
  for (std::size_t i = 0; i < kNumReasons; ++i) {
    overconf_reasons_[i] += o.overconf_reasons_[i];
    conserv_reasons_[i] += o.conserv_reasons_[i];
  }
  return *this;
}

Metric Metric::ratio(std::uint64_t num, std::uint64_t den) {
  Metric m{std::nullopt, num, den};
  if (den > 0) m.value = static_cast<double>(num) / static_cast<double>(den);
  return m;
}

using C = ConfusionCell;

Metric accuracy(const CellCounts& c) { return Metric::ratio(c[C::FF] + c[C::RR], c.total()); }

Metric foresight(const CellCounts& c) {
  return Metric::ratio(c[C::RR], c[C::RF] + c[C::RR] + c[C::RRprime]);
}

Metric insight(const CellCounts& c) {
  return Metric::ratio(c[C::RR], c[C::FR] + c[C::RR] + c[C::RRprime]);
}

Metric overconfidence(const CellCounts& c) { return Metric::ratio(c[C::FR], c[C::FF] + c[C::FR]); }

Metric conservatism(const CellCounts& c) {
  return Metric::ratio(c[C::RF], c[C::RF] + c[C::RR] + c[C::RRprime]);
}

std::optional<double> confidence_balance_from_rates(std::optional<double> over,
                                                    std::optional<double> conserv) {
  if (!over || !conserv) return std::nullopt;
  const double hi = std::max(*over, *conserv);
  if (hi == 0.0) return 0.0;
  return (*over - *conserv) / hi;
}

Metric confidence_balance(const CellCounts& c) {
  return Metric::derived(
      confidence_balance_from_rates(overconfidence(c).value, conservatism(c).value));
}

double harmonic_mean_fi(double foresight, double insight) {
  if (!(foresight >= 0.0 && foresight <= 1.0) || !(insight >= 0.0 && insight <= 1.0)) {
    throw std::invalid_argument("foresight and insight must lie in [0, 1]");
  }
  const double sum = foresight + insight;
  return sum == 0.0 ? 0.0 : 2.0 * foresight * insight / sum;
}

namespace {

Metric hm_metric(const Metric& f, const Metric& i) {
  if (!f.defined() || !i.defined()) return Metric::derived(std::nullopt);
  return Metric::derived(harmonic_mean_fi(*f.value, *i.value));
}

Metric mean_metric(const std::vector<const Metric*>& ms) {
  double sum = 0.0;
  for (const auto* m : ms) {
    if (!m->defined()) return Metric::derived(std::nullopt);
    sum += *m->value;
  }
  if (ms.empty()) return Metric::derived(std::nullopt);
  return Metric::derived(sum / static_cast<double>(ms.size()));
}

std::vector<Scope> all_scopes() {
  std::vector<Scope> s;
  for (auto t : kAllTypes) s.emplace_back(t);
  s.emplace_back(std::nullopt);
  return s;
}

}  // namespace

MetricSet compute_metrics(const CellCounts& c) {
  MetricSet m;
  m.accuracy = accuracy(c);
  m.foresight = foresight(c);
  m.insight = insight(c);
  m.overconfidence = overconfidence(c);
  m.conservatism = conservatism(c);
  m.confidence_balance = confidence_balance(c);
  m.harmonic_mean = hm_metric(m.foresight, m.insight);
  return m;
}

const ReportRow* MetricsReport::find(std::string_view variant, const Scope& scope) const {
  for (const auto& r : rows) {
    if (r.variant == variant && r.scope == scope) return &r;
  }
  return nullptr;
}

MetricsReport build_report(const std::map<PromptVariant, ConfusionMatrix>& by_variant) {
  MetricsReport report;
  ConfusionMatrix pooled;
  for (const auto& [variant, matrix] : by_variant) {
    const std::string name(slug(variant));
    report.variants.push_back(name);
    report.parse_failures[name] = matrix.parse_failures();
    for (const auto& scope : all_scopes()) {
      const auto counts = matrix.counts(scope);
      report.rows.push_back({name, scope, compute_metrics(counts), counts});
    }
    pooled += matrix;
  }
  if (by_variant.empty()) return report;

  report.parse_failures[std::string(kCombinedMicro)] = pooled.parse_failures();
  for (const auto& scope : all_scopes()) {
    const auto counts = pooled.counts(scope);
    report.rows.push_back({std::string(kCombinedMicro), scope, compute_metrics(counts), counts});
  }

  for (const auto& scope : all_scopes()) {
    std::vector<const MetricSet*> sets;
    for (const auto& v : report.variants) sets.push_back(&report.find(v, scope)->metrics);
    const auto gather = [&](Metric MetricSet::*field) {
      std::vector<const Metric*> ms;
      for (const auto* s : sets) ms.push_back(&(s->*field));
      return mean_metric(ms);
    };
    MetricSet m;
    m.accuracy = gather(&MetricSet::accuracy);
    m.foresight = gather(&MetricSet::foresight);
    m.insight = gather(&MetricSet::insight);
    m.overconfidence = gather(&MetricSet::overconfidence);
    m.conservatism = gather(&MetricSet::conservatism);
    m.confidence_balance = Metric::derived(
        confidence_balance_from_rates(m.overconfidence.value, m.conservatism.value));
    m.harmonic_mean = hm_metric(m.foresight, m.insight);
    report.rows.push_back({std::string(kCombinedMacro), scope, m, std::nullopt});
  }
  return report;
}

StrongestWeakest strongest_weakest(const std::array<std::optional<double>, kNumTypes>& hm) {
  for (auto t : kAllTypes) {
    if (!hm[index_of(t)]) {
      throw Error("harmonic mean is undefined for " + std::string(slug(t)));
    }
  }
  constexpr double kTieEps = 1e-12;
  StrongestWeakest out{kAllTypes[0], kAllTypes[0]};
  double best = *hm[0];
  double worst = *hm[0];
  for (std::size_t i = 1; i < kNumTypes; ++i) {
    const double v = *hm[i];
    if (v > best + kTieEps) {
      best = v;
      out.strongest = kAllTypes[i];
    }
    if (v < worst - kTieEps) {
      worst = v;
      out.weakest = kAllTypes[i];
    }
  }
  for (auto t : kAllTypes) {
    const double v = *hm[index_of(t)];
    if (t != out.strongest && std::abs(v - best) <= kTieEps) out.strongest_tied = true;
    if (t != out.weakest && std::abs(v - worst) <= kTieEps) out.weakest_tied = true;
  }
  return out;
}

StrongestWeakest strongest_weakest(const MetricsReport& report, std::string_view variant) {
  std::array<std::optional<double>, kNumTypes> hm{};
  for (auto t : kAllTypes) {
    const auto* row = report.find(variant, t);
    if (row == nullptr) throw Error("report has no " + std::string(variant) + " rows");
    hm[index_of(t)] = row->metrics.harmonic_mean.value;
  }
  return strongest_weakest(hm);
}

}  // namespace skeval

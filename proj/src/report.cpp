#include "skeval/report.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "skeval/errors.hpp"

namespace skeval {

using nlohmann::json;

namespace {

std::string reason_label(InfeasibilityReason r) { return std::string(display_name(r)); }

std::string pair_label(const ReasonPair& p) {
  return reason_label(p.first) + " -> " + reason_label(p.second);
}

std::string pair_label(const TypePair& p) {
  return std::string(display_name(p.first)) + " -> " + std::string(display_name(p.second));
}

std::string pair_key(const ReasonPair& p) {
  return std::string(slug(p.first)) + ">" + std::string(slug(p.second));
}

std::string pair_key(const TypePair& p) {
  return std::string(slug(p.first)) + ">" + std::string(slug(p.second));
}

std::string key_of(InfeasibilityReason r) { return std::string(slug(r)); }
std::string key_of(const ReasonPair& p) { return pair_key(p); }
std::string key_of(const TypePair& p) { return pair_key(p); }
std::string label_of(InfeasibilityReason r) { return reason_label(r); }
std::string label_of(const ReasonPair& p) { return pair_label(p); }
std::string label_of(const TypePair& p) { return pair_label(p); }

// Aggregates shown in the cross-variant tables.
const std::vector<std::string_view> kAggregates = {kCombinedMicro, kCombinedMacro};

struct NamedMetric {
  const char* name;
  Metric MetricSet::*field;
};

const std::vector<NamedMetric> kMetricColumns = {
    {"A", &MetricSet::accuracy},
    {"F", &MetricSet::foresight},
    {"I", &MetricSet::insight},
    {"Over", &MetricSet::overconfidence},
    {"Conserv", &MetricSet::conservatism},
    {"CB", &MetricSet::confidence_balance},
    {"HM", &MetricSet::harmonic_mean},
};

const std::vector<std::pair<const char*, Metric MetricSet::*>> kCsvMetrics = {
    {"accuracy", &MetricSet::accuracy},
    {"foresight", &MetricSet::foresight},
    {"insight", &MetricSet::insight},
    {"overconfidence", &MetricSet::overconfidence},
    {"conservatism", &MetricSet::conservatism},
    {"confidence_balance", &MetricSet::confidence_balance},
    {"harmonic_mean", &MetricSet::harmonic_mean},
};

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_value(const std::optional<double>& v) {
  return v ? fmt::format("{:.6f}", *v) : std::string();
}

json json_value(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

template <typename Key>
void markdown_distribution(std::ostringstream& md, const char* title, const Distribution<Key>& d,
                           std::size_t limit) {
  md << "**" << title << "**";
  if (d.empty) {
    md << ": none\n\n";
    return;
  }
  md << " (n = " << d.total << (d.tied ? ", top share tied" : "") << ")\n\n";
  md << "| Rank | Category | Count | Share |\n|---:|---|---:|---:|\n";
  for (std::size_t i = 0; i < d.entries.size() && i < limit; ++i) {
    const auto& e = d.entries[i];
    md << "| " << i + 1 << " | " << label_of(e.key) << " | " << e.count << " | "
       << fmt::format("{:.1f}%", 100.0 * e.share) << " |\n";
  }
  md << '\n';
}

template <typename Key>
void csv_distribution(std::ostringstream& csv, const std::string& run_id, const char* name,
                      const Distribution<Key>& d) {
  for (const auto& e : d.entries) {
    csv << csv_field(run_id) << ',' << name << ',' << key_of(e.key) << ',' << e.count << ','
        << fmt::format("{:.6f}", e.share) << '\n';
  }
}

template <typename Key>
json json_distribution(const Distribution<Key>& d) {
  json entries = json::array();
  for (const auto& e : d.entries) {
    entries.push_back({{"key", key_of(e.key)}, {"count", e.count}, {"share", e.share}});
  }
  return {{"total", d.total}, {"tied", d.tied}, {"entries", entries}};
}

json json_metric(const Metric& m) {
  json j = {{"value", json_value(m.value)}};
  if (m.denominator > 0 || m.numerator > 0) {
    j["numerator"] = m.numerator;
    j["denominator"] = m.denominator;
  }
  return j;
}

std::string variant_title(std::string_view v) {
  if (v == kCombinedMicro) return "Combined (micro)";
  if (v == kCombinedMacro) return "Combined (macro)";
  if (auto pv = variant_from_slug(v)) return std::string(display_name(*pv));
  return std::string(v);
}

void markdown_metric_header(std::ostringstream& md, const char* first) {
  md << "| " << first << " |";
  for (const auto& c : kMetricColumns) md << ' ' << c.name << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < kMetricColumns.size(); ++i) md << "---:|";
  md << '\n';
}

void markdown_metric_cells(std::ostringstream& md, const MetricSet& m) {
  for (const auto& c : kMetricColumns) md << ' ' << format_value((m.*c.field).value) << " |";
  md << '\n';
}

void markdown_run(std::ostringstream& md, const RunEvaluation& run) {
  const auto& t = run.tally;
  md << "## Run `" << run.run_id << "`\n\n";
  if (!run.model_id.empty()) md << "Model: `" << run.model_id << "`\n\n";
  md << "| Generated | Valid | Malformed | Discarded | Failed | Classified | Parse failures |\n"
     << "|---:|---:|---:|---:|---:|---:|---:|\n"
     << "| " << t.generated << " | " << t.valid << " | " << t.malformed << " | " << t.discarded
     << " | " << t.failed << " | " << t.classified << " | " << t.parse_failures << " |\n\n";

  md << "### Overall\n\n";
  markdown_metric_header(md, "Prompt");
  std::vector<std::string> order = run.metrics.variants;
  if (!order.empty()) {
    order.emplace_back(kCombinedMicro);
    order.emplace_back(kCombinedMacro);
  }
  for (const auto& v : order) {
    const auto* row = run.metrics.find(v, std::nullopt);
    if (row == nullptr) continue;
    md << "| " << variant_title(v) << " |";
    markdown_metric_cells(md, row->metrics);
  }
  md << '\n';

  for (const auto& v : order) {
    md << "### By type: " << variant_title(v) << "\n\n";
    markdown_metric_header(md, "Type");
    for (auto type : kAllTypes) {
      const auto* row = run.metrics.find(v, type);
      if (row == nullptr) continue;
      md << "| " << display_name(type) << " |";
      markdown_metric_cells(md, row->metrics);
    }
    md << '\n';
  }

  md << "### Strongest and weakest type (by HM)\n\n"
     << "| Prompt | Strongest | Weakest |\n|---|---|---|\n";
  for (const auto& v : order) {
    md << "| " << variant_title(v) << " | ";
    try {
      const auto sw = strongest_weakest(run.metrics, v);
      md << display_name(sw.strongest) << (sw.strongest_tied ? " (tied)" : "") << " | "
         << display_name(sw.weakest) << (sw.weakest_tied ? " (tied)" : "") << " |\n";
    } catch (const Error&) {
      md << "— | — |\n";
    }
  }
  md << '\n';

  md << "### Misclassification patterns (pooled over prompts)\n\n";
  markdown_distribution(md, "Overconfidence: reason claimed on feasible tasks",
                        run.patterns.overconfident, 5);
  markdown_distribution(md, "Conservatism: generated reason of answered infeasible tasks",
                        run.patterns.conservative, 5);
  markdown_distribution(md, "Type confusion (generated -> classified)",
                        run.patterns.type_confusion, 5);
  markdown_distribution(md, "Reason confusion (generated -> classified)",
                        run.patterns.reason_confusion, 5);
}

void markdown_cb_grid(std::ostringstream& md, const ReportBundle& bundle) {
  for (auto agg : kAggregates) {
    md << "## Confidence Balance by type: " << variant_title(agg) << "\n\n| Run |";
    for (auto type : kAllTypes) md << ' ' << display_name(type) << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < kNumTypes; ++i) md << "---:|";
    md << '\n';
    std::vector<TypeRow> rows;
    for (const auto& run : bundle.runs) {
      rows.push_back(confidence_balance_row(run, agg));
      md << "| " << run.run_id << " |";
      for (const auto& v : rows.back()) md << ' ' << format_value(v) << " |";
      md << '\n';
    }
    if (rows.size() > 1) {
      md << "| Mean |";
      for (const auto& v : mean_row(rows)) md << ' ' << format_value(v) << " |";
      md << '\n';
    }
    md << '\n';
  }
}

}  // namespace

RunEvaluation evaluate_run(const LoadedRun& run) {
  RunEvaluation ev;
  ev.run_id = run.manifest.run_id;
  ev.model_id = run.manifest.model_id;

  const auto reviewed = run.reviewed_tasks();
  std::map<std::string, const TaskRecord*> by_id;
  for (const auto& t : reviewed) {
    by_id[t.id] = &t;
    ++ev.tally.generated;
    switch (t.status) {
      case TaskStatus::Valid: ++ev.tally.valid; break;
      case TaskStatus::Malformed: ++ev.tally.malformed; break;
      case TaskStatus::Discarded: ++ev.tally.discarded; break;
      case TaskStatus::Failed: ++ev.tally.failed; break;
    }
  }

  for (const auto& v : run.manifest.variants) {
    if (auto pv = variant_from_slug(v)) ev.matrices[*pv];
  }
  for (const auto& o : run.outcomes) {
    const auto it = by_id.find(o.task_id);
    if (it == by_id.end() || it->second->status != TaskStatus::Valid) continue;
    ++ev.tally.classified;
    if (std::holds_alternative<ParseFailure>(o.verdict)) ++ev.tally.parse_failures;
    ev.matrices[it->second->variant].add(*it->second, o);
  }
  for (const auto& [v, m] : ev.matrices) ev.pooled += m;
  ev.metrics = build_report(ev.matrices);
  ev.patterns = analyse_patterns(ev.pooled);
  return ev;
}

TypeRow mean_row(const std::vector<TypeRow>& rows) {
  TypeRow out{};
  if (rows.empty()) return out;
  for (std::size_t i = 0; i < kNumTypes; ++i) {
    double sum = 0.0;
    bool defined = true;
    for (const auto& r : rows) {
      if (!r[i]) {
        defined = false;
        break;
      }
      sum += *r[i];
    }
    if (defined) out[i] = sum / static_cast<double>(rows.size());
  }
  return out;
}

TypeRow confidence_balance_row(const RunEvaluation& run, std::string_view variant) {
  TypeRow out{};
  for (auto t : kAllTypes) {
    if (const auto* row = run.metrics.find(variant, t)) {
      out[index_of(t)] = row->metrics.confidence_balance.value;
    }
  }
  return out;
}

std::string format_value(const std::optional<double>& v) {
  if (!v) return "—";
  std::string s = fmt::format("{:.2f}", *v);
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string render_markdown(const ReportBundle& bundle) {
  std::ostringstream md;
  md << "# Self-knowledge evaluation report\n\n";
  for (const auto& run : bundle.runs) markdown_run(md, run);
  markdown_cb_grid(md, bundle);
  md << "Values are rounded to two decimals. — marks a metric whose denominator is empty.\n";
  return md.str();
}

std::string render_metrics_csv(const ReportBundle& bundle) {
  std::ostringstream csv;
  csv << "run_id,variant,scope,metric,value,numerator,denominator\n";
  for (const auto& run : bundle.runs) {
    for (const auto& row : run.metrics.rows) {
      for (const auto& [name, field] : kCsvMetrics) {
        const Metric& m = row.metrics.*field;
        csv << csv_field(run.run_id) << ',' << row.variant << ',' << scope_slug(row.scope) << ','
            << name << ',' << csv_value(m.value) << ',';
        if (m.denominator > 0 || m.numerator > 0) csv << m.numerator << ',' << m.denominator;
        else csv << ',';
        csv << '\n';
      }
    }
  }
  return csv.str();
}

std::string render_patterns_csv(const ReportBundle& bundle) {
  std::ostringstream csv;
  csv << "run_id,distribution,key,count,share\n";
  for (const auto& run : bundle.runs) {
    csv_distribution(csv, run.run_id, "overconfidence", run.patterns.overconfident);
    csv_distribution(csv, run.run_id, "conservatism", run.patterns.conservative);
    csv_distribution(csv, run.run_id, "type_confusion", run.patterns.type_confusion);
    csv_distribution(csv, run.run_id, "reason_confusion", run.patterns.reason_confusion);
  }
  return csv.str();
}

json render_json(const ReportBundle& bundle) {
  json runs = json::array();
  for (const auto& run : bundle.runs) {
    json rows = json::array();
    for (const auto& row : run.metrics.rows) {
      json metrics = json::object();
      for (const auto& [name, field] : kCsvMetrics) metrics[name] = json_metric(row.metrics.*field);
      json r = {{"variant", row.variant}, {"scope", scope_slug(row.scope)}, {"metrics", metrics}};
      if (row.counts) {
        json cells = json::object();
        for (auto c : kAllCells) cells[std::string(slug(c))] = (*row.counts)[c];
        r["counts"] = cells;
      }
      rows.push_back(std::move(r));
    }
    const auto& t = run.tally;
    runs.push_back({
        {"run_id", run.run_id},
        {"model_id", run.model_id},
        {"tally",
         {{"generated", t.generated},
          {"valid", t.valid},
          {"malformed", t.malformed},
          {"discarded", t.discarded},
          {"failed", t.failed},
          {"classified", t.classified},
          {"parse_failures", t.parse_failures}}},
        {"rows", rows},
        {"patterns",
         {{"overconfidence", json_distribution(run.patterns.overconfident)},
          {"conservatism", json_distribution(run.patterns.conservative)},
          {"type_confusion", json_distribution(run.patterns.type_confusion)},
          {"reason_confusion", json_distribution(run.patterns.reason_confusion)}}},
    });
  }
  json cb = json::object();
  for (auto agg : kAggregates) {
    std::vector<TypeRow> rows;
    for (const auto& run : bundle.runs) rows.push_back(confidence_balance_row(run, agg));
    json mean = json::object();
    const auto m = mean_row(rows);
    for (auto type : kAllTypes) mean[std::string(slug(type))] = json_value(m[index_of(type)]);
    cb[std::string(agg)] = {{"mean", mean}};
  }
  return {{"tool_version", std::string(kToolVersion)}, {"runs", runs}, {"confidence_balance", cb}};
}

void write_bundle(const ReportBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto write = [&](const char* name, const std::string& body) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    out << body;
    if (!out) throw StoreError("cannot write " + (dir / name).string());
  };
  write("report.md", render_markdown(bundle));
  write("metrics.csv", render_metrics_csv(bundle));
  write("patterns.csv", render_patterns_csv(bundle));
  write("report.json", render_json(bundle).dump(2) + "\n");
}

}  // namespace skeval

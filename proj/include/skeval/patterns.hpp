#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "skeval/metrics.hpp"
#include "skeval/taxonomy.hpp"

namespace skeval {

// A ranked share distribution. Entries are sorted by count, descending;
// equal counts keep taxonomy order, and `tied` is set when the top share is
// shared. `empty` is set (and `entries` is empty) when there was nothing to
// count.
template <typename Key>
struct Distribution {
  struct Entry {
    Key key;
    std::uint64_t count = 0;
    double share = 0.0;
  };
  std::vector<Entry> entries;
  std::uint64_t total = 0;
  bool empty = true;
  bool tied = false;

  const Entry* top() const { return entries.empty() ? nullptr : &entries.front(); }
};

using TypePair = std::pair<SelfKnowledgeType, SelfKnowledgeType>;

// Classified reasons among overconfident (FR) instances.
Distribution<InfeasibilityReason> overconfidence_distribution(const ConfusionMatrix& m);
// Generated reasons among conservative (RF) instances.
Distribution<InfeasibilityReason> conservatism_distribution(const ConfusionMatrix& m);
// (generated r, classified r') among mismatched-reason (RR') instances.
Distribution<ReasonPair> reason_confusions(const ConfusionMatrix& m);
// The same instances mapped to (type of r, type of r'). Pairs whose two
// types coincide are swaps within one type and are kept.
Distribution<TypePair> type_confusions(const ConfusionMatrix& m);

inline bool is_within_type(const TypePair& p) { return p.first == p.second; }

struct PatternReport {
  Distribution<InfeasibilityReason> overconfident;
  Distribution<InfeasibilityReason> conservative;
  Distribution<TypePair> type_confusion;
  Distribution<ReasonPair> reason_confusion;
};

PatternReport analyse_patterns(const ConfusionMatrix& m);

}  // namespace skeval

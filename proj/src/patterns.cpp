#include "skeval/patterns.hpp"

#include <algorithm>
#include <map>

namespace skeval {

namespace {

// `counts` must already be in taxonomy order; a stable sort keeps it for ties.
template <typename Key>
Distribution<Key> rank(std::vector<std::pair<Key, std::uint64_t>> counts) {
  Distribution<Key> d;
  for (const auto& [k, n] : counts) d.total += n;
  if (d.total == 0) return d;
  d.empty = false;
  std::stable_sort(counts.begin(), counts.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [k, n] : counts) {
    if (n == 0) continue;
    d.entries.push_back({k, n, static_cast<double>(n) / static_cast<double>(d.total)});
  }
  d.tied = d.entries.size() > 1 && d.entries[0].count == d.entries[1].count;
  return d;
}

Distribution<InfeasibilityReason> from_reason_tally(
    const std::array<std::uint64_t, kNumReasons>& tally) {
  std::vector<std::pair<InfeasibilityReason, std::uint64_t>> counts;
  for (auto r : kAllReasons) counts.emplace_back(r, tally[index_of(r)]);
  return rank(std::move(counts));
}

}  // namespace

Distribution<InfeasibilityReason> overconfidence_distribution(const ConfusionMatrix& m) {
  return from_reason_tally(m.overconfident_reasons());
}

Distribution<InfeasibilityReason> conservatism_distribution(const ConfusionMatrix& m) {
  return from_reason_tally(m.conservative_reasons());
}

Distribution<ReasonPair> reason_confusions(const ConfusionMatrix& m) {
  // std::map over enum pairs iterates in taxonomy order already.
  std::vector<std::pair<ReasonPair, std::uint64_t>> counts(m.reason_pairs().begin(),
                                                            m.reason_pairs().end());
  return rank(std::move(counts));
}

Distribution<TypePair> type_confusions(const ConfusionMatrix& m) {
  std::map<TypePair, std::uint64_t> by_type;
  for (const auto& [pair, n] : m.reason_pairs()) {
    by_type[{type_of(pair.first), type_of(pair.second)}] += n;
  }
  std::vector<std::pair<TypePair, std::uint64_t>> counts(by_type.begin(), by_type.end());
  return rank(std::move(counts));
}

PatternReport analyse_patterns(const ConfusionMatrix& m) {
  return {overconfidence_distribution(m), conservatism_distribution(m), type_confusions(m),
          reason_confusions(m)};
}

}  // namespace skeval

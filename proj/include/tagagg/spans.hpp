#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tagagg/corpus_io.hpp"
#include "tagagg/error.hpp"
#include "tagagg/labels.hpp"

namespace tagagg {

/// Half-open token range [start, end) carrying one entity type.
struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string etype;

  std::size_t length() const noexcept { return end - start; }
  bool overlaps(const EntitySpan& o) const noexcept { return start < o.end && o.start < end; }

  auto operator<=>(const EntitySpan&) const = default;
};

struct ScoredSpan {
  EntitySpan span;
  double score = 0.0;
};

using TokenRange = std::pair<std::size_t, std::size_t>;

/// Candidate ranges of one sentence and what each source said about them.
struct RangeView {
  std::vector<TokenRange> ranges;  // sorted, unique
  // source-id -> per-range label: an entity type, or "O".
  std::map<std::string, std::vector<std::string>, std::less<>> labels;
};

enum class BioPolicy { strict, repair };

/// Maximal B-X (I-X)* runs, sorted by start.
inline std::vector<EntitySpan> decode_spans(std::span<const std::string> tags,
                                            BioPolicy policy = BioPolicy::strict) {
  TagSequence repaired;
  std::span<const std::string> view = tags;
  if (policy == BioPolicy::strict) {
    detail::walk_bio(tags, [&](std::size_t i, BioViolationKind kind, std::string_view) {
      throw ValidationError(0, i, "cannot decode spans: " + std::string(to_string(kind)) +
                                      " tag '" + tags[i] + "'");
    });
  } else {
    repaired = repair_bio(tags);
    view = repaired;
  }

  std::vector<EntitySpan> out;
  for (std::size_t i = 0; i < view.size(); ++i) {
    auto parsed = parse_tag(view[i]);
    if (parsed->prefix != TagPrefix::begin) continue;
    std::size_t j = i + 1;
    while (j < view.size()) {
      auto next = parse_tag(view[j]);
      if (next->prefix != TagPrefix::inside || next->type != parsed->type) break;
      ++j;
    }
    out.push_back({i, j, std::string(parsed->type)});
    i = j - 1;
  }
  return out;
}

inline TagSequence encode_spans(std::span<const EntitySpan> spans, std::size_t length) {
  std::vector<EntitySpan> sorted(spans.begin(), spans.end());
  std::sort(sorted.begin(), sorted.end());
  TagSequence tags(length, std::string(kOutsideTag));
  for (std::size_t n = 0; n < sorted.size(); ++n) {
    const auto& s = sorted[n];
    if (s.start >= s.end || s.end > length)
      throw DataError("span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                      ") out of range for length " + std::to_string(length));
    if (n > 0 && sorted[n - 1].overlaps(s))
      throw DataError("overlapping spans at token " + std::to_string(s.start));
    tags[s.start] = begin_tag(s.etype);
    for (std::size_t i = s.start + 1; i < s.end; ++i) tags[i] = inside_tag(s.etype);
  }
  return tags;
}

/// Label of `range` according to a span set: the type if exactly that range
/// was predicted, otherwise O.
inline std::string range_label(std::span<const EntitySpan> spans, const TokenRange& range) {
  for (const auto& s : spans)
    if (s.start == range.first && s.end == range.second) return s.etype;
  return std::string(kOutsideTag);
}

/// Entity view of a sentence. Candidate ranges are exactly the spans some
/// source predicted; sources missing on this sentence get no label row.
/// `extra` adds further candidate ranges (used to include gold spans).
inline RangeView build_range_view(const Sentence& sentence,
                                  std::span<const EntitySpan> extra = {}) {
  std::map<std::string, std::vector<EntitySpan>, std::less<>> decoded;
  std::set<TokenRange> ranges;
  for (const auto& [id, tags] : sentence.layers) {
    auto spans = decode_spans(tags);
    for (const auto& s : spans) ranges.emplace(s.start, s.end);
    decoded.emplace(id, std::move(spans));
  }
  for (const auto& s : extra) ranges.emplace(s.start, s.end);

  RangeView view;
  view.ranges.assign(ranges.begin(), ranges.end());
  for (const auto& [id, spans] : decoded) {
    std::vector<std::string> labels;
    labels.reserve(view.ranges.size());
    for (const auto& r : view.ranges) labels.push_back(range_label(spans, r));
    view.labels.emplace(id, std::move(labels));
  }
  return view;
}

/// Priority used by the greedy sweep: higher score first, then earlier
/// start, longer span, and type name.
inline bool higher_priority(const ScoredSpan& a, const ScoredSpan& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.span.start != b.span.start) return a.span.start < b.span.start;
  if (a.span.length() != b.span.length()) return a.span.length() > b.span.length();
  return a.span.etype < b.span.etype;
}

/// Greedy conflict resolution: walk spans by priority and keep each one that
/// overlaps nothing kept so far. Result is disjoint and sorted by start.
inline std::vector<EntitySpan> resolve_conflicts(std::span<const ScoredSpan> spans) {
  std::vector<std::size_t> order(spans.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return higher_priority(spans[a], spans[b]);
  });
  std::vector<EntitySpan> kept;
  for (std::size_t idx : order) {
    const auto& cand = spans[idx].span;
    bool clash = std::any_of(kept.begin(), kept.end(),
                             [&](const EntitySpan& k) { return k.overlaps(cand); });
    if (!clash) kept.push_back(cand);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace tagagg

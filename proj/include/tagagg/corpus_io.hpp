#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tagagg/error.hpp"
#include "tagagg/labels.hpp"

namespace tagagg {

using TagSequence = std::vector<std::string>;

// Reserved layer names; every other name refers to a source model.
inline constexpr std::string_view kGoldLayer = "gold";
inline constexpr std::string_view kAggregateLayer = "aggregate";

// Column value marking a whole sentence as not predicted by a source.
inline constexpr std::string_view kMissingTag = "_";

struct Sentence {
  std::vector<std::string> tokens;
  // source-id -> tags. A source absent from the map did not predict this
  // sentence; that is recorded as missing, never as all-O.
  std::map<std::string, TagSequence, std::less<>> layers;
  std::optional<TagSequence> gold;
  std::optional<TagSequence> aggregate;

  std::size_t size() const noexcept { return tokens.size(); }

  const TagSequence* layer(std::string_view which) const {
    if (which == kGoldLayer) return gold ? &*gold : nullptr;
    if (which == kAggregateLayer) return aggregate ? &*aggregate : nullptr;
    auto it = layers.find(which);
    return it == layers.end() ? nullptr : &it->second;
  }

  bool operator==(const Sentence&) const = default;
};

struct Corpus {
  LabelSet labels;
  std::vector<std::string> source_ids;
  std::vector<Sentence> sentences;

  std::size_t num_sources() const noexcept { return source_ids.size(); }

  std::size_t num_tokens() const noexcept {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
  }

  bool operator==(const Corpus&) const = default;
};

enum class RepairPolicy { strict, repair };

enum class BioViolationKind { orphan_inside, type_mismatch };

struct BioViolation {
  std::size_t index;
  BioViolationKind kind;
  bool operator==(const BioViolation&) const = default;
};

inline std::string_view to_string(BioViolationKind kind) {
  return kind == BioViolationKind::orphan_inside ? "orphan-I" : "type-mismatch";
}

namespace detail {

// Walks the IOB2 automaton and reports each I-X that does not continue an
// entity of type X.
template <class Visit>
void walk_bio(std::span<const std::string> tags, Visit&& visit) {
  std::string_view open_type;
  bool open = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    auto parsed = parse_tag(tags[i]);
    if (!parsed) throw LabelError("unknown tag '" + tags[i] + "'");
    switch (parsed->prefix) {
      case TagPrefix::outside:
        open = false;
        break;
      case TagPrefix::begin:
        open = true;
        open_type = parsed->type;
        break;
      case TagPrefix::inside:
        if (!open) {
          visit(i, BioViolationKind::orphan_inside, parsed->type);
        } else if (open_type != parsed->type) {
          visit(i, BioViolationKind::type_mismatch, parsed->type);
        }
        open = true;
        open_type = parsed->type;
        break;
    }
  }
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool is_reserved_layer(std::string_view name) {
  return name == kGoldLayer || name == kAggregateLayer;
}

}  // namespace detail

/// Lists positions where an I-X does not continue a B-X/I-X of the same type.
inline std::vector<BioViolation> validate_bio(std::span<const std::string> tags,
                                              const LabelSet& labels) {
  std::vector<BioViolation> out;
  for (const auto& t : tags) labels.require_tag(t);
  detail::walk_bio(tags, [&](std::size_t i, BioViolationKind kind, std::string_view) {
    out.push_back({i, kind});
  });
  return out;
}

/// Rewrites every offending I-X to B-X.
inline TagSequence repair_bio(std::span<const std::string> tags) {
  TagSequence out(tags.begin(), tags.end());
  detail::walk_bio(tags, [&](std::size_t i, BioViolationKind, std::string_view type) {
    out[i] = begin_tag(type);
  });
  return out;
}

/// Parses whitespace-separated CoNLL columns: token first, then one tag
/// column per entry of `layers` (source ids, or "gold"/"aggregate").
///
/// A column that holds "_" on every token of a sentence marks that layer as
/// missing for the sentence. Lines starting with -DOCSTART- are skipped.
inline Corpus parse_conll(std::string_view text, const LabelSet& labels, RepairPolicy policy,
                          const std::vector<std::string>& layers) {
  if (layers.empty()) throw DataError("at least one tag column is required");
  Corpus corpus;
  corpus.labels = labels;
  for (const auto& name : layers) {
    if (detail::is_reserved_layer(name)) continue;
    if (std::find(corpus.source_ids.begin(), corpus.source_ids.end(), name) !=
        corpus.source_ids.end())
      throw DataError("duplicate source id '" + name + "'");
    corpus.source_ids.push_back(name);
  }

  struct Row {
    std::size_t line;
    std::vector<std::string_view> cols;
  };
  std::vector<Row> rows;

  auto flush = [&]() {
    if (rows.empty()) return;
    const std::size_t sidx = corpus.sentences.size();
    Sentence sentence;
    sentence.tokens.reserve(rows.size());
    for (const auto& r : rows) sentence.tokens.emplace_back(r.cols[0]);

    for (std::size_t c = 0; c < layers.size(); ++c) {
      std::size_t missing = 0;
      for (const auto& r : rows) missing += r.cols[c + 1] == kMissingTag;
      if (missing == rows.size()) continue;
      TagSequence tags;
      tags.reserve(rows.size());
      for (const auto& r : rows) {
        const auto tag = r.cols[c + 1];
        if (tag == kMissingTag)
          throw ParseError(r.line, "layer '" + layers[c] +
                                       "' is missing on part of a sentence only");
        if (!labels.tag_index(tag))
          throw LabelError("line " + std::to_string(r.line) + ": unknown tag '" +
                           std::string(tag) + "'");
        tags.emplace_back(tag);
      }
      auto violations = validate_bio(tags, labels);
      if (!violations.empty()) {
        if (policy == RepairPolicy::strict) {
          const auto& v = violations.front();
          throw ValidationError(sidx, v.index,
                                "layer '" + layers[c] + "': " + std::string(to_string(v.kind)) +
                                    " tag '" + tags[v.index] + "'");
        }
        tags = repair_bio(tags);
      }
      const auto& name = layers[c];
      if (name == kGoldLayer) {
        sentence.gold = std::move(tags);
      } else if (name == kAggregateLayer) {
        sentence.aggregate = std::move(tags);
      } else {
        sentence.layers.emplace(name, std::move(tags));
      }
    }
    corpus.sentences.push_back(std::move(sentence));
    rows.clear();
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    auto cols = detail::split_ws(line);
    if (cols.empty()) {
      flush();
      continue;
    }
    if (cols[0].starts_with("-DOCSTART-")) {
      flush();
      continue;
    }
    if (cols.size() != layers.size() + 1)
      throw ParseError(line_no, "expected " + std::to_string(layers.size() + 1) +
                                    " columns, found " + std::to_string(cols.size()));
    rows.push_back({line_no, std::move(cols)});
  }
  flush();
  return corpus;
}

inline Corpus parse_conll(std::string_view text, const LabelSet& labels, RepairPolicy policy,
                          std::string layer) {
  return parse_conll(text, labels, policy, std::vector<std::string>{std::move(layer)});
}

/// Writes token and tag separated by one space, a blank line after every
/// sentence. Inverse of parse_conll for a single layer.
inline std::string write_conll(const Corpus& corpus, std::string_view which) {
  std::string out;
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    const auto& sentence = corpus.sentences[s];
    const TagSequence* tags = sentence.layer(which);
    if (!tags)
      throw DataError("layer '" + std::string(which) + "' is missing for sentence " +
                      std::to_string(s));
    if (tags->size() != sentence.size())
      throw DataError("layer '" + std::string(which) + "' has wrong length in sentence " +
                      std::to_string(s));
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      out += sentence.tokens[i];
      out += ' ';
      out += (*tags)[i];
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

/// Multi-column variant; missing layers are written as "_".
inline std::string write_conll(const Corpus& corpus, const std::vector<std::string>& layers) {
  std::string out;
  for (const auto& sentence : corpus.sentences) {
    std::vector<const TagSequence*> cols;
    for (const auto& name : layers) cols.push_back(sentence.layer(name));
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      out += sentence.tokens[i];
      for (const auto* tags : cols) {
        out += ' ';
        out += tags ? std::string_view((*tags)[i]) : kMissingTag;
      }
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

/// Shape of a CoNLL text before parsing: the number of tag columns (taken
/// from the first token line, 0 for empty text) and every distinct tag seen,
/// "_" excluded. Used to infer the label set from the inputs.
struct ConllShape {
  std::size_t tag_columns = 0;
  std::set<std::string, std::less<>> tags;
};

inline ConllShape scan_conll(std::string_view text) {
  ConllShape shape;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto cols = detail::split_ws(line);
    if (cols.size() < 2 || cols[0].starts_with("-DOCSTART-")) continue;
    if (shape.tag_columns == 0) shape.tag_columns = cols.size() - 1;
    for (std::size_t c = 1; c < cols.size(); ++c)
      if (cols[c] != kMissingTag) shape.tags.emplace(cols[c]);
  }
  return shape;
}

/// Combines corpora holding different layers over the same token sequence
/// (e.g. one file per source model) into one corpus.
inline Corpus merge_corpora(std::span<const Corpus> parts) {
  if (parts.empty()) return {};
  Corpus merged;
  merged.labels = parts.front().labels;
  merged.sentences.resize(parts.front().sentences.size());
  for (std::size_t s = 0; s < merged.sentences.size(); ++s)
    merged.sentences[s].tokens = parts.front().sentences[s].tokens;

  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& part = parts[p];
    if (!(part.labels == merged.labels)) throw DataError("label sets differ between inputs");
    if (part.sentences.size() != merged.sentences.size())
      throw DataError("input " + std::to_string(p) + " has " +
                      std::to_string(part.sentences.size()) + " sentences, expected " +
                      std::to_string(merged.sentences.size()));
    for (const auto& id : part.source_ids) {
      if (std::find(merged.source_ids.begin(), merged.source_ids.end(), id) !=
          merged.source_ids.end())
        throw DataError("duplicate source id '" + id + "'");
      merged.source_ids.push_back(id);
    }
    for (std::size_t s = 0; s < part.sentences.size(); ++s) {
      const auto& src = part.sentences[s];
      auto& dst = merged.sentences[s];
      if (src.tokens != dst.tokens)
        throw ValidationError(s, 0, "tokens differ between inputs");
      for (const auto& [id, tags] : src.layers) dst.layers.emplace(id, tags);
      if (src.gold) {
        if (dst.gold && *dst.gold != *src.gold)
          throw ValidationError(s, 0, "conflicting gold layers");
        dst.gold = src.gold;
      }
    }
  }
  return merged;
}

}  // namespace tagagg

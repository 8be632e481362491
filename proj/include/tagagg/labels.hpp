#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tagagg/error.hpp"

namespace tagagg {

inline constexpr std::string_view kOutsideTag = "O";

enum class TagScheme { iob2 };

enum class TagPrefix { outside, begin, inside };

struct ParsedTag {
  TagPrefix prefix = TagPrefix::outside;
  std::string_view type;  // empty for O
};

// Splits "B-PER" into (begin, "PER"). Returns nullopt for anything that is
// not O, B-<type> or I-<type>.
inline std::optional<ParsedTag> parse_tag(std::string_view tag) {
  if (tag == kOutsideTag) return ParsedTag{};
  if (tag.size() < 3 || tag[1] != '-') return std::nullopt;
  ParsedTag out;
  if (tag[0] == 'B') {
    out.prefix = TagPrefix::begin;
  } else if (tag[0] == 'I') {
    out.prefix = TagPrefix::inside;
  } else {
    return std::nullopt;
  }
  out.type = tag.substr(2);
  return out;
}

inline std::string begin_tag(std::string_view type) { return "B-" + std::string(type); }
inline std::string inside_tag(std::string_view type) { return "I-" + std::string(type); }

/// Entity types plus tagging scheme.
///
/// Token label space is indexed as O = 0, B-t = 1 + 2t, I-t = 2 + 2t, so
/// K_tok = 2|types| + 1. Entity label space is O = 0, t = 1 + t, so
/// K_ent = |types| + 1.
class LabelSet {
 public:
  LabelSet() = default;

  explicit LabelSet(std::vector<std::string> entity_types, TagScheme scheme = TagScheme::iob2)
      : types_(std::move(entity_types)), scheme_(scheme) {
    std::set<std::string_view> seen;
    for (const auto& t : types_) {
      if (t.empty()) throw LabelError("entity type names must be non-empty");
      if (std::any_of(t.begin(), t.end(), [](unsigned char c) { return std::isspace(c); }))
        throw LabelError("entity type '" + t + "' contains whitespace");
      if (!seen.insert(t).second) throw LabelError("duplicate entity type '" + t + "'");
    }
  }

  // Collects every entity type mentioned by the given tags, sorted by name.
  template <class Range>
  static LabelSet infer(const Range& tags) {
    std::set<std::string> types;
    for (const auto& tag : tags) {
      auto parsed = parse_tag(tag);
      if (!parsed) throw LabelError("unknown tag '" + std::string(tag) + "'");
      if (parsed->prefix != TagPrefix::outside) types.emplace(parsed->type);
    }
    return LabelSet({types.begin(), types.end()});
  }

  const std::vector<std::string>& entity_types() const noexcept { return types_; }
  TagScheme scheme() const noexcept { return scheme_; }

  std::size_t token_space_size() const noexcept { return 2 * types_.size() + 1; }
  std::size_t entity_space_size() const noexcept { return types_.size() + 1; }

  std::optional<std::size_t> type_index(std::string_view type) const {
    auto it = std::find(types_.begin(), types_.end(), type);
    if (it == types_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - types_.begin());
  }

  std::optional<std::size_t> tag_index(std::string_view tag) const {
    auto parsed = parse_tag(tag);
    if (!parsed) return std::nullopt;
    if (parsed->prefix == TagPrefix::outside) return 0;
    auto t = type_index(parsed->type);
    if (!t) return std::nullopt;
    return 1 + 2 * *t + (parsed->prefix == TagPrefix::inside ? 1 : 0);
  }

  // Throws LabelError when the tag is outside the token label space.
  std::size_t require_tag(std::string_view tag) const {
    auto idx = tag_index(tag);
    if (!idx) throw LabelError("unknown tag '" + std::string(tag) + "'");
    return *idx;
  }

  std::string tag_name(std::size_t index) const {
    if (index == 0) return std::string(kOutsideTag);
    const std::size_t t = (index - 1) / 2;
    return (index - 1) % 2 == 0 ? begin_tag(types_.at(t)) : inside_tag(types_.at(t));
  }

  // Entity-space helpers (O = 0).
  std::string entity_name(std::size_t index) const {
    return index == 0 ? std::string(kOutsideTag) : types_.at(index - 1);
  }
  std::optional<std::size_t> entity_index(std::string_view label) const {
    if (label == kOutsideTag) return 0;
    auto t = type_index(label);
    if (!t) return std::nullopt;
    return *t + 1;
  }

  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<std::string> types_;
  TagScheme scheme_ = TagScheme::iob2;
};

}  // namespace tagagg

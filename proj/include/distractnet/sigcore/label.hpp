#pragma once

#include <array>
#include <string>
#include <string_view>

#include "distractnet/error.hpp"

namespace distractnet {

/// Classification target. The integer value is the class index used by every
/// model (label order NS < LD < HD).
enum class Condition : int { NS = 0, LD = 1, HD = 2 };

inline constexpr int kNumConditions = 3;
inline constexpr std::array<Condition, 3> kConditions{Condition::NS, Condition::LD,
                                                      Condition::HD};

/// Raw marker tag as written by the session script.
enum class Tag : int { Level1 = 0, Level2, Level3, RestPost, RestInterSession };

inline constexpr std::array<Tag, 5> kTags{Tag::Level1, Tag::Level2, Tag::Level3,
                                          Tag::RestPost, Tag::RestInterSession};

constexpr Condition condition_of(Tag t) {
  switch (t) {
    case Tag::Level1:
      return Condition::LD;
    case Tag::Level2:
    case Tag::Level3:
      return Condition::HD;
    case Tag::RestPost:
    case Tag::RestInterSession:
      return Condition::NS;
  }
  return Condition::NS;
}

/// A tag that maps onto `c`; used when building labelled data directly by class.
constexpr Tag representative_tag(Condition c) {
  switch (c) {
    case Condition::NS:
      return Tag::RestPost;
    case Condition::LD:
      return Tag::Level1;
    case Condition::HD:
      return Tag::Level2;
  }
  return Tag::RestPost;
}

constexpr int class_index(Condition c) { return static_cast<int>(c); }
constexpr int class_index(Tag t) { return class_index(condition_of(t)); }

inline std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::NS:
      return "NS";
    case Condition::LD:
      return "LD";
    case Condition::HD:
      return "HD";
  }
  return "?";
}

inline std::string_view to_string(Tag t) {
  switch (t) {
    case Tag::Level1:
      return "Level1";
    case Tag::Level2:
      return "Level2";
    case Tag::Level3:
      return "Level3";
    case Tag::RestPost:
      return "RestPost";
    case Tag::RestInterSession:
      return "RestInterSession";
  }
  return "?";
}

inline Tag parse_tag(std::string_view s) {
  for (Tag t : kTags)
    if (to_string(t) == s) return t;
  throw InputError("unknown marker label '" + std::string(s) + "'");
}

inline Condition parse_condition(std::string_view s) {
  for (Condition c : kConditions)
    if (to_string(c) == s) return c;
  throw InputError("unknown condition '" + std::string(s) + "'");
}

}  // namespace distractnet

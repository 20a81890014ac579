#pragma once

// Hand-derived precision@k cases: hits among the first k ids, over k.

#include <cstddef>
#include <string>
#include <vector>

namespace d2s::cases {

struct PrecisionCase {
  std::vector<std::string> ranked;
  std::vector<std::string> relevant;
  std::size_t k;
  double expected;
};

inline const std::vector<PrecisionCase>& precision_cases() {
  static const std::vector<PrecisionCase> cases = {
      {{"a", "b", "c"}, {"a"}, 1, 1.0},
      {{"a", "b", "c"}, {"b"}, 1, 0.0},
      {{"a", "b", "c"}, {"b"}, 3, 1.0 / 3},
      {{"a", "b", "c"}, {"a", "b", "c"}, 3, 1.0},
      {{"a", "b", "c"}, {"a", "b", "c"}, 5, 3.0 / 5},
      {{"a", "b", "c", "d", "e"}, {"e"}, 5, 1.0 / 5},
      {{"a", "b", "c", "d", "e"}, {"e"}, 3, 0.0},
      {{"a", "b", "c", "d", "e"}, {"a", "e"}, 5, 2.0 / 5},
      {{"a", "b", "c", "d", "e"}, {"b", "c"}, 3, 2.0 / 3},
      {{"a", "b", "c", "d", "e"}, {"b", "c"}, 1, 0.0},
      {{"x"}, {"x"}, 1, 1.0},
      {{"x"}, {"x"}, 3, 1.0 / 3},
      {{"x"}, {"y"}, 5, 0.0},
      {{}, {"y"}, 1, 0.0},
      {{"a", "b"}, {}, 2, 0.0},
      {{"a", "b", "c", "d"}, {"d", "c"}, 2, 0.0},
      {{"a", "b", "c", "d"}, {"d", "c"}, 4, 0.5},
      {{"f1", "t1", "f2", "t2", "f3", "t3"}, {"t1", "t2", "t3"}, 5, 2.0 / 5},
      {{"f1", "t1", "f2", "t2", "f3", "t3"}, {"f1", "f2"}, 3, 2.0 / 3},
      {{"f1", "t1", "f2", "t2", "f3", "t3"}, {"nope", "t3"}, 6, 1.0 / 6},
  };
  return cases;
}

}  // namespace d2s::cases

#pragma once

#include <algorithm>
#include <set>
#include <string>

#include "trackmate/report.hpp"

namespace trackmate::testing {

/// Every key path in a document; array elements collapse to "[]".
inline void collect_paths(const MusicReport& doc, const std::string& prefix, std::set<std::string>& out) {
  out.insert(prefix);
  if (doc.is_object()) {
    for (const auto& [k, v] : doc.items()) collect_paths(v, prefix + "/" + k, out);
  } else if (doc.is_array()) {
    for (const auto& v : doc) collect_paths(v, prefix + "/[]", out);
  }
}

inline std::set<std::string> report_paths(const MusicReport& doc) {
  std::set<std::string> out;
  collect_paths(doc, "", out);
  return out;
}

/// Paths in `small` missing from `big`, ignoring the depth value itself.
inline std::set<std::string> missing_paths(const MusicReport& small, const MusicReport& big) {
  const auto a = report_paths(small);
  const auto b = report_paths(big);
  std::set<std::string> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.begin()));
  return out;
}

/// Values present at depth d keep their value at higher depths (objects compared key by key).
inline bool values_preserved(const MusicReport& small, const MusicReport& big) {
  if (small.is_object()) {
    if (!big.is_object()) return false;
    for (const auto& [k, v] : small.items()) {
      if (k == "depth") continue;
      if (!big.contains(k) || !values_preserved(v, big[k])) return false;
    }
    return true;
  }
  if (small.is_array()) {
    if (!big.is_array() || big.size() != small.size()) return false;
    for (std::size_t i = 0; i < small.size(); ++i)
      if (!values_preserved(small[i], big[i])) return false;
    return true;
  }
  return small == big;
}

}  // namespace trackmate::testing

#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "anova_rff/errors.hpp"

namespace anova_rff {

/// A subset u of the coordinates {0, ..., d-1}, stored as strictly increasing
/// zero-based indices. External I/O (CSV, JSON, CLI) is one-based; use
/// from_one_based()/to_one_based() at those boundaries.
class VarSubset {
 public:
  VarSubset() = default;

  VarSubset(std::initializer_list<int> members)
      : VarSubset(std::vector<int>(members)) {}

  explicit VarSubset(std::vector<int> members) : members_(std::move(members)) {
    std::sort(members_.begin(), members_.end());
    for (std::size_t i = 0; i < members_.size(); ++i) {
      detail::require(members_[i] >= 0, "VarSubset: negative index");
      detail::require(i == 0 || members_[i] != members_[i - 1],
                      "VarSubset: duplicate index");
    }
  }

  static VarSubset from_one_based(const std::vector<int>& one_based) {
    std::vector<int> m;
    m.reserve(one_based.size());
    for (int i : one_based) {
      detail::require(i >= 1, "VarSubset: one-based index must be >= 1");
      m.push_back(i - 1);
    }
    return VarSubset(std::move(m));
  }

  std::vector<int> to_one_based() const {
    std::vector<int> out(members_);
    for (int& i : out) ++i;
    return out;
  }

  const std::vector<int>& members() const noexcept { return members_; }
  std::size_t size() const noexcept { return members_.size(); }
  bool empty() const noexcept { return members_.empty(); }
  int max_member() const { return members_.empty() ? -1 : members_.back(); }

  bool contains(int i) const {
    return std::binary_search(members_.begin(), members_.end(), i);
  }

  bool is_subset_of(const VarSubset& other) const {
    return std::includes(other.members_.begin(), other.members_.end(),
                         members_.begin(), members_.end());
  }

  bool is_strict_subset_of(const VarSubset& other) const {
    return size() < other.size() && is_subset_of(other);
  }

  VarSubset minus(const VarSubset& other) const {
    std::vector<int> out;
    std::set_difference(members_.begin(), members_.end(),
                        other.members_.begin(), other.members_.end(),
                        std::back_inserter(out));
    return VarSubset(std::move(out));
  }

  bool intersects(const VarSubset& other) const {
    auto a = members_.begin();
    auto b = other.members_.begin();
    while (a != members_.end() && b != other.members_.end()) {
      if (*a == *b) return true;
      if (*a < *b) ++a; else ++b;
    }
    return false;
  }

  /// All v with v ⊆ *this, in canonical order (∅ first, *this last).
  std::vector<VarSubset> subsets() const {
    const std::size_t k = members_.size();
    std::vector<VarSubset> out;
    out.reserve(std::size_t{1} << k);
    for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
      std::vector<int> m;
      for (std::size_t b = 0; b < k; ++b)
        if (mask & (std::size_t{1} << b)) m.push_back(members_[b]);
      out.emplace_back(std::move(m));
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Canonical order: by cardinality, then lexicographically by members.
  std::strong_ordering operator<=>(const VarSubset& o) const {
    if (auto c = size() <=> o.size(); c != 0) return c;
    return members_ <=> o.members_;
  }
  bool operator==(const VarSubset& o) const = default;

 private:
  std::vector<int> members_;
};

/// Compact one-based text form: "1,2" for {1,2}; "{}" for ∅.
inline std::string to_text(const VarSubset& u) {
  if (u.empty()) return "{}";
  std::string s;
  for (int i : u.to_one_based()) {
    if (!s.empty()) s += ',';
    s += std::to_string(i);
  }
  return s;
}

/// A finite family U of subsets of {0, ..., d-1} with set semantics.
class AnovaIndexSet {
 public:
  using container = std::set<VarSubset>;
  using const_iterator = container::const_iterator;

  AnovaIndexSet() = default;
  explicit AnovaIndexSet(int dimension) : dimension_(dimension) {
    detail::require(dimension >= 1, "AnovaIndexSet: dimension must be >= 1");
  }
  AnovaIndexSet(int dimension, std::initializer_list<VarSubset> terms)
      : AnovaIndexSet(dimension) {
    for (const auto& u : terms) insert(u);
  }

  /// Builds from one-based member lists, e.g. {{1,2},{3}}.
  static AnovaIndexSet from_one_based(
      int dimension, const std::vector<std::vector<int>>& terms) {
    AnovaIndexSet out(dimension);
    for (const auto& t : terms) out.insert(VarSubset::from_one_based(t));
    return out;
  }

  int dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return terms_.size(); }
  bool empty() const noexcept { return terms_.empty(); }
  const_iterator begin() const { return terms_.begin(); }
  const_iterator end() const { return terms_.end(); }
  const container& terms() const noexcept { return terms_; }

  void insert(const VarSubset& u) {
    detail::require(u.max_member() < dimension_,
                    "AnovaIndexSet: term " + to_text(u) + " exceeds dimension " +
                        std::to_string(dimension_));
    terms_.insert(u);
  }
  void erase(const VarSubset& u) { terms_.erase(u); }
  bool contains(const VarSubset& u) const { return terms_.count(u) > 0; }

  std::size_t max_order() const {
    return terms_.empty() ? 0 : terms_.rbegin()->size();
  }

  /// True when some member of U is a strict superset of u.
  bool covers(const VarSubset& u) const {
    return std::any_of(terms_.begin(), terms_.end(), [&](const VarSubset& w) {
      return u.is_strict_subset_of(w);
    });
  }

  /// No member is a strict subset of another member.
  bool is_anti_downward_closed() const {
    return std::none_of(terms_.begin(), terms_.end(),
                        [&](const VarSubset& u) { return covers(u); });
  }

  bool is_downward_closed() const {
    for (const auto& u : terms_)
      for (const auto& v : u.subsets())
        if (!contains(v)) return false;
    return true;
  }

  std::vector<VarSubset> as_vector() const { return {terms_.begin(), terms_.end()}; }

  bool operator==(const AnovaIndexSet& o) const = default;

 private:
  int dimension_ = 0;
  container terms_;
};

namespace detail {

inline void check_order(int d, int q) {
  require(d >= 1, "dimension must be >= 1");
  require(q >= 0 && q <= d, "order q must satisfy 0 <= q <= d");
}

template <class Fn>
void for_each_combination(int d, int k, Fn&& fn) {
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    fn(idx);
    int i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == d - k + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j)
      idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

}  // namespace detail

/// {u ⊆ [d] : |u| = q}
inline AnovaIndexSet all_subsets_of_order(int d, int q) {
  detail::check_order(d, q);
  AnovaIndexSet out(d);
  detail::for_each_combination(d, q, [&](const std::vector<int>& c) {
    out.insert(VarSubset(c));
  });
  return out;
}

/// {u ⊆ [d] : |u| <= q}, including ∅.
inline AnovaIndexSet all_subsets_up_to_order(int d, int q) {
  detail::check_order(d, q);
  AnovaIndexSet out(d);
  for (int k = 0; k <= q; ++k)
    detail::for_each_combination(d, k, [&](const std::vector<int>& c) {
      out.insert(VarSubset(c));
    });
  return out;
}

inline AnovaIndexSet downward_closure(const AnovaIndexSet& U) {
  AnovaIndexSet out(U.dimension());
  for (const auto& u : U)
    for (const auto& v : u.subsets()) out.insert(v);
  return out;
}

/// Drops every u that has a strict superset in U.
inline AnovaIndexSet prune_to_anti_downward_closed(const AnovaIndexSet& U) {
  AnovaIndexSet out(U.dimension());
  for (const auto& u : U)
    if (!U.covers(u)) out.insert(u);
  return out;
}

/// {v : |v| = k and no u in U strictly contains v}
inline AnovaIndexSet uncovered_subsets(const AnovaIndexSet& U, int k) {
  detail::check_order(U.dimension(), k);
  AnovaIndexSet out(U.dimension());
  detail::for_each_combination(U.dimension(), k, [&](const std::vector<int>& c) {
    VarSubset v(c);
    if (!U.covers(v)) out.insert(v);
  });
  return out;
}

inline AnovaIndexSet set_union(const AnovaIndexSet& a, const AnovaIndexSet& b) {
  detail::require(a.dimension() == b.dimension(), "set_union: dimension mismatch");
  AnovaIndexSet out = a;
  for (const auto& u : b) out.insert(u);
  return out;
}

/// "1,2;3" style text, "{}" for ∅; an empty family renders as "".
inline std::string to_text(const AnovaIndexSet& U) {
  std::string s;
  for (const auto& u : U) {
    if (!s.empty()) s += ';';
    s += to_text(u);
  }
  return s;
}

inline VarSubset parse_subset_text(const std::string& text) {
  std::string t;
  for (char c : text)
    if (c != ' ' && c != '\t') t += c;
  if (t == "{}" || t.empty()) return {};
  std::vector<int> one_based;
  std::stringstream ss(t);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    detail::require(!tok.empty(), "malformed subset '" + text + "'");
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(tok, &pos);
    } catch (const std::exception&) {
      throw InvalidArgument("malformed subset '" + text + "'");
    }
    detail::require(pos == tok.size(), "malformed subset '" + text + "'");
    one_based.push_back(v);
  }
  return VarSubset::from_one_based(one_based);
}

inline AnovaIndexSet parse_index_set_text(int dimension, const std::string& text) {
  AnovaIndexSet out(dimension);
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ';')) out.insert(parse_subset_text(tok));
  return out;
}

}  // namespace anova_rff

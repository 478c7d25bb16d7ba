#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <vector>

namespace iwave::detail {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

  /// Components as sorted index lists, ordered by smallest member.
  std::vector<std::vector<int>> components() {
    std::map<std::size_t, std::vector<int>> by_root;
    for (std::size_t i = 0; i < parent_.size(); ++i) by_root[find(i)].push_back(static_cast<int>(i));
    std::vector<std::vector<int>> out;
    out.reserve(by_root.size());
    for (auto& [root, members] : by_root) out.push_back(std::move(members));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return out;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

}  // namespace iwave::detail

#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace rhm {

using Symbol = std::uint16_t;
using Tuple = std::vector<Symbol>;

// Decoded-label hole: a node whose tuple could not be mapped to a cluster.
inline constexpr Symbol kNoSymbol = 0xFFFF;

inline int compare_tuple(std::span<const Symbol> a, std::span<const Symbol> b) {
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] != b[i]) return a[i] < b[i] ? -1 : 1;
    }
    if (a.size() == b.size()) return 0;
    return a.size() < b.size() ? -1 : 1;
}

// Sorted tuple -> payload map. Lookup takes a span into an existing symbol
// buffer, so the hot decode path never allocates. Iteration order is the
// lexicographic order of the keys, which keeps downstream results
// independent of insertion order.
template <class T>
class TupleMap {
  public:
    TupleMap() = default;

    // Takes ownership; sorts; throws on duplicate keys.
    explicit TupleMap(std::vector<std::pair<Tuple, T>> entries)
        : entries_(std::move(entries)) {
        std::sort(entries_.begin(), entries_.end(),
                  [](const auto& x, const auto& y) {
                      return compare_tuple(x.first, y.first) < 0;
                  });
        for (std::size_t i = 1; i < entries_.size(); ++i) {
            if (compare_tuple(entries_[i - 1].first, entries_[i].first) == 0)
                throw std::invalid_argument("TupleMap: duplicate key");
        }
    }

    const T* find(std::span<const Symbol> key) const {
        std::size_t lo = 0, hi = entries_.size();
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            const int c = compare_tuple(entries_[mid].first, key);
            if (c == 0) return &entries_[mid].second;
            if (c < 0)
                lo = mid + 1;
            else
                hi = mid;
        }
        return nullptr;
    }

    bool contains(std::span<const Symbol> key) const { return find(key) != nullptr; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<std::pair<Tuple, T>>& items() const { return entries_; }

  private:
    std::vector<std::pair<Tuple, T>> entries_;
};

}  // namespace rhm

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace softdecomp {

using vertex_id = std::uint32_t;
using edge_id = std::uint32_t;

/// Canonical vertex set: sorted ascending, no duplicates.
class VertexSet {
public:
    VertexSet() = default;
    VertexSet(std::initializer_list<vertex_id> ids) : ids_(ids) { normalize(); }
    explicit VertexSet(std::vector<vertex_id> ids) : ids_(std::move(ids)) { normalize(); }

    template <class It>
    VertexSet(It first, It last) : ids_(first, last) { normalize(); }

    static VertexSet from_sorted(std::vector<vertex_id> ids) {
        VertexSet s;
        s.ids_ = std::move(ids);
        return s;
    }

    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    auto begin() const { return ids_.begin(); }
    auto end() const { return ids_.end(); }
    vertex_id operator[](std::size_t i) const { return ids_[i]; }
    const std::vector<vertex_id>& ids() const { return ids_; }

    bool contains(vertex_id v) const { return std::binary_search(ids_.begin(), ids_.end(), v); }

    bool subset_of(const VertexSet& o) const {
        return std::includes(o.ids_.begin(), o.ids_.end(), ids_.begin(), ids_.end());
    }

    bool intersects(const VertexSet& o) const {
        auto a = ids_.begin(), b = o.ids_.begin();
        while (a != ids_.end() && b != o.ids_.end()) {
            if (*a == *b) return true;
            if (*a < *b) ++a; else ++b;
        }
        return false;
    }

    VertexSet operator|(const VertexSet& o) const {
        std::vector<vertex_id> out;
        out.reserve(size() + o.size());
        std::set_union(ids_.begin(), ids_.end(), o.ids_.begin(), o.ids_.end(), std::back_inserter(out));
        return from_sorted(std::move(out));
    }
    VertexSet operator&(const VertexSet& o) const {
        std::vector<vertex_id> out;
        std::set_intersection(ids_.begin(), ids_.end(), o.ids_.begin(), o.ids_.end(), std::back_inserter(out));
        return from_sorted(std::move(out));
    }
    VertexSet operator-(const VertexSet& o) const {
        std::vector<vertex_id> out;
        std::set_difference(ids_.begin(), ids_.end(), o.ids_.begin(), o.ids_.end(), std::back_inserter(out));
        return from_sorted(std::move(out));
    }
    VertexSet& operator|=(const VertexSet& o) { return *this = *this | o; }

    void insert(vertex_id v) {
        auto it = std::lower_bound(ids_.begin(), ids_.end(), v);
        if (it == ids_.end() || *it != v) ids_.insert(it, v);
    }

    friend bool operator==(const VertexSet&, const VertexSet&) = default;
    friend std::strong_ordering operator<=>(const VertexSet& a, const VertexSet& b) {
        return std::lexicographical_compare_three_way(a.ids_.begin(), a.ids_.end(), b.ids_.begin(), b.ids_.end());
    }

    std::size_t hash() const {
        std::size_t h = 0xcbf29ce484222325ull;
        for (auto v : ids_) h = (h ^ v) * 0x100000001b3ull;
        return h ^ ids_.size();
    }

private:
    void normalize() {
        std::sort(ids_.begin(), ids_.end());
        ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
    }

    std::vector<vertex_id> ids_;
};

struct VertexSetHash {
    std::size_t operator()(const VertexSet& s) const { return s.hash(); }
};

/// Fixed-width bitset over W 64-bit words, used by the inner loops.
template <std::size_t W>
struct Bits {
    static constexpr std::size_t capacity = 64 * W;
    std::array<std::uint64_t, W> w{};

    static Bits of(const VertexSet& s) {
        Bits b;
        for (auto v : s) b.set(v);
        return b;
    }
    VertexSet to_set() const {
        std::vector<vertex_id> out;
        for_each([&](vertex_id v) { out.push_back(v); });
        return VertexSet::from_sorted(std::move(out));
    }

    void set(std::size_t i) { w[i >> 6] |= std::uint64_t{1} << (i & 63); }
    void reset(std::size_t i) { w[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
    bool test(std::size_t i) const { return (w[i >> 6] >> (i & 63)) & 1u; }

    bool none() const {
        for (auto x : w) if (x) return false;
        return true;
    }
    bool any() const { return !none(); }
    std::size_t count() const {
        std::size_t c = 0;
        for (auto x : w) c += static_cast<std::size_t>(std::popcount(x));
        return c;
    }
    bool subset_of(const Bits& o) const {
        for (std::size_t i = 0; i < W; ++i) if (w[i] & ~o.w[i]) return false;
        return true;
    }
    bool intersects(const Bits& o) const {
        for (std::size_t i = 0; i < W; ++i) if (w[i] & o.w[i]) return true;
        return false;
    }
    int lowest() const {
        for (std::size_t i = 0; i < W; ++i)
            if (w[i]) return static_cast<int>(64 * i + static_cast<std::size_t>(std::countr_zero(w[i])));
        return -1;
    }

    template <class F>
    void for_each(F&& f) const {
        for (std::size_t i = 0; i < W; ++i) {
            auto x = w[i];
            while (x) {
                f(static_cast<vertex_id>(64 * i + static_cast<std::size_t>(std::countr_zero(x))));
                x &= x - 1;
            }
        }
    }

    Bits operator|(const Bits& o) const { Bits r; for (std::size_t i = 0; i < W; ++i) r.w[i] = w[i] | o.w[i]; return r; }
    Bits operator&(const Bits& o) const { Bits r; for (std::size_t i = 0; i < W; ++i) r.w[i] = w[i] & o.w[i]; return r; }
    Bits operator-(const Bits& o) const { Bits r; for (std::size_t i = 0; i < W; ++i) r.w[i] = w[i] & ~o.w[i]; return r; }
    Bits& operator|=(const Bits& o) { for (std::size_t i = 0; i < W; ++i) w[i] |= o.w[i]; return *this; }
    Bits& operator&=(const Bits& o) { for (std::size_t i = 0; i < W; ++i) w[i] &= o.w[i]; return *this; }
    Bits& operator-=(const Bits& o) { for (std::size_t i = 0; i < W; ++i) w[i] &= ~o.w[i]; return *this; }

    friend bool operator==(const Bits& a, const Bits& b) {
        for (std::size_t i = 0; i < W; ++i) if (a.w[i] != b.w[i]) return false;
        return true;
    }
    friend std::strong_ordering operator<=>(const Bits& a, const Bits& b) {
        for (std::size_t i = 0; i < W; ++i)
            if (a.w[i] != b.w[i]) return a.w[i] <=> b.w[i];
        return std::strong_ordering::equal;
    }

    std::size_t hash() const {
        std::uint64_t h = 0x9e3779b97f4a7c15ull;
        for (auto x : w) {
            h ^= x;
            h ^= h >> 33;
            h *= 0xff51afd7ed558ccdull;
            h ^= h >> 33;
            h *= 0xc4ceb9fe1a85ec53ull;
            h ^= h >> 33;
        }
        return static_cast<std::size_t>(h);
    }
};

template <std::size_t W>
struct BitsHash {
    std::size_t operator()(const Bits<W>& b) const { return b.hash(); }
};

template <std::size_t W>
struct BitsPairHash {
    std::size_t operator()(const std::pair<Bits<W>, Bits<W>>& p) const {
        return p.first.hash() * 31 + p.second.hash();
    }
};

/// Open-addressing set of bitsets (insert and lookup only).
template <std::size_t W>
class BitsSet {
public:
    /// Returns true when b was not present.
    bool insert(const Bits<W>& b) {
        if ((size_ + 1) * 2 > slots_.size()) grow();
        if (place(b)) {
            ++size_;
            return true;
        }
        return false;
    }
    bool contains(const Bits<W>& b) const {
        if (slots_.empty()) return false;
        const std::size_t mask = slots_.size() - 1;
        for (std::size_t i = b.hash() & mask;; i = (i + 1) & mask) {
            if (!used_[i]) return false;
            if (slots_[i] == b) return true;
        }
    }
    std::size_t size() const { return size_; }

private:
    bool place(const Bits<W>& b) {
        const std::size_t mask = slots_.size() - 1;
        for (std::size_t i = b.hash() & mask;; i = (i + 1) & mask) {
            if (!used_[i]) {
                used_[i] = 1;
                slots_[i] = b;
                return true;
            }
            if (slots_[i] == b) return false;
        }
    }
    void grow() {
        auto old_slots = std::move(slots_);
        auto old_used = std::move(used_);
        const std::size_t n = old_slots.empty() ? 64 : old_slots.size() * 2;
        slots_.assign(n, Bits<W>{});
        used_.assign(n, 0);
        for (std::size_t i = 0; i < old_slots.size(); ++i)
            if (old_used[i]) place(old_slots[i]);
    }

    std::vector<Bits<W>> slots_;
    std::vector<std::uint8_t> used_;
    std::size_t size_ = 0;
};

/// Calls f.template operator()<W>() with the smallest supported word count
/// holding n vertices.
template <class F>
decltype(auto) dispatch_width(std::size_t n, F&& f) {
    if (n <= 64) return f.template operator()<1>();
    if (n <= 128) return f.template operator()<2>();
    if (n <= 256) return f.template operator()<4>();
    if (n <= 512) return f.template operator()<8>();
    if (n <= 1024) return f.template operator()<16>();
    throw std::length_error("hypergraph has more than 1024 vertices");
}

} // namespace softdecomp

template <>
struct std::hash<softdecomp::VertexSet> {
    std::size_t operator()(const softdecomp::VertexSet& s) const { return s.hash(); }
};

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hypergraph.hpp"

namespace softdecomp {

/// Element of E^(i): a subset of an original edge.
struct SubEdge {
    VertexSet vertices;
    edge_id origin = 0;
    int level = 0;
};

struct BagWitness {
    std::vector<std::size_t> lambda1;                // indices into the edge pool
    std::vector<edge_id> lambda2;                    // original edges
    std::optional<std::vector<edge_id>> component;   // nullopt: the whole edge set
};

struct CandidateBag {
    VertexSet vertices;
    BagWitness witness;
    int level = 0;
};

/// Thrown when an enumeration or search exceeds its configured budget.
class budget_exceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Budget {
    std::size_t max_bags = 1'000'000;
    std::size_t max_steps = 10'000'000;
};

/// Deduplicated candidate bags with first-found witnesses, in discovery order.
class CandidateBagSet {
public:
    int k = 0;
    int level = 0;
    std::vector<SubEdge> edge_pool;

    const std::vector<CandidateBag>& bags() const { return bags_; }
    std::size_t size() const { return bags_.size(); }
    bool contains(const VertexSet& s) const { return index_.count(s) != 0; }
    const CandidateBag* find(const VertexSet& s) const {
        auto it = index_.find(s);
        return it == index_.end() ? nullptr : &bags_[it->second];
    }

    /// Returns false when the vertex set is already present.
    bool add(CandidateBag bag) {
        if (bag.vertices.empty()) return false;
        auto [it, fresh] = index_.emplace(bag.vertices, bags_.size());
        if (!fresh) return false;
        bags_.push_back(std::move(bag));
        return true;
    }

    std::vector<VertexSet> vertex_sets() const {
        std::vector<VertexSet> out;
        out.reserve(bags_.size());
        for (const auto& b : bags_) out.push_back(b.vertices);
        return out;
    }

    /// Builds a set from explicit vertex sets (witnesses left empty).
    static CandidateBagSet from_sets(const Hypergraph& h, int k, const std::vector<VertexSet>& sets) {
        CandidateBagSet out;
        out.k = k;
        for (edge_id e = 0; e < h.num_edges(); ++e) out.edge_pool.push_back({h.edge_vertices(e), e, 0});
        for (const auto& s : sets) out.add({s, {}, 0});
        return out;
    }

private:
    std::vector<CandidateBag> bags_;
    std::unordered_map<VertexSet, std::size_t> index_;
};

/// {a ∩ b : a ∈ A, b ∈ B} without the empty set, first occurrence order.
inline std::vector<VertexSet> pairwise_intersections(const std::vector<VertexSet>& a, const std::vector<VertexSet>& b) {
    std::vector<VertexSet> out;
    std::unordered_set<VertexSet> seen;
    for (const auto& x : a)
        for (const auto& y : b) {
            auto z = x & y;
            if (!z.empty() && seen.insert(z).second) out.push_back(std::move(z));
        }
    return out;
}

namespace detail {

inline void next_combination_check(std::size_t& steps, const Budget& budget) {
    if (++steps > budget.max_steps)
        throw budget_exceeded("candidate-bag enumeration exceeded " + std::to_string(budget.max_steps) + " steps");
}

/// Visits all combinations of size r from [0, n) in lexicographic order.
template <class F>
void for_each_combination(std::size_t n, std::size_t r, F&& f) {
    if (r > n) return;
    std::vector<std::size_t> idx(r);
    for (std::size_t i = 0; i < r; ++i) idx[i] = i;
    for (;;) {
        f(idx);
        std::size_t i = r;
        while (i > 0 && idx[i - 1] == n - r + i - 1) --i;
        if (i == 0) return;
        ++idx[i - 1];
        for (std::size_t j = i; j < r; ++j) idx[j] = idx[j - 1] + 1;
    }
}

template <std::size_t W>
void enumerate_soft(const Hypergraph& h, int k, const Budget& budget, CandidateBagSet& out) {
    using B = Bits<W>;
    BitHypergraph<W> bh(h);
    std::vector<B> pool;
    for (const auto& p : out.edge_pool) pool.push_back(B::of(p.vertices));

    std::unordered_set<B, BitsHash<W>> seen_sep, seen_union, known;
    for (const auto& b : out.bags()) known.insert(B::of(b.vertices));
    std::size_t steps = 0;
    const auto m = h.num_edges();

    struct Entry {
        B u;
        std::uint32_t last;
        std::uint32_t parent;
    };

    for (int s = 0; s <= k; ++s) {
        for_each_combination(m, static_cast<std::size_t>(s), [&](const std::vector<std::size_t>& l2) {
            B sep;
            for (auto e : l2) sep |= bh.edges[e];
            if (!seen_sep.insert(sep).second) return;

            std::vector<B> unions;
            std::vector<std::optional<std::vector<edge_id>>> comps;
            if (s == 0) {
                unions.push_back(bh.all);
                comps.emplace_back(std::nullopt);
            } else {
                for (const auto& c : bh.components(sep)) {
                    unions.push_back(c | bh.boundary(sep, c));
                    std::vector<edge_id> ce;
                    for (edge_id e = 0; e < m; ++e)
                        if (bh.edges[e].intersects(c)) ce.push_back(e);
                    comps.emplace_back(std::move(ce));
                }
            }

            for (std::size_t ci = 0; ci < unions.size(); ++ci) {
                const B& u = unions[ci];
                if (!seen_union.insert(u).second) continue;

                // distinct nonempty traces of the pool on u, lowest pool index first
                std::vector<B> traces;
                std::vector<std::size_t> rep;
                {
                    std::unordered_set<B, BitsHash<W>> tseen;
                    for (std::size_t p = 0; p < pool.size(); ++p) {
                        B t = pool[p] & u;
                        if (t.none() || !tseen.insert(t).second) continue;
                        traces.push_back(t);
                        rep.push_back(p);
                    }
                }

                std::vector<std::vector<Entry>> layers;
                std::vector<Entry> first;
                for (std::uint32_t t = 0; t < traces.size(); ++t) {
                    next_combination_check(steps, budget);
                    first.push_back({traces[t], t, UINT32_MAX});
                    if (known.insert(traces[t]).second) {
                        CandidateBag cb;
                        cb.vertices = traces[t].to_set();
                        cb.witness.lambda1 = {rep[t]};
                        for (auto e : l2) cb.witness.lambda2.push_back(static_cast<edge_id>(e));
                        cb.witness.component = comps[ci];
                        cb.level = out.level;
                        out.add(std::move(cb));
                    }
                }
                layers.push_back(std::move(first));
                for (int size = 2; size <= k; ++size) {
                    const bool keep = size < k;
                    std::vector<Entry> next;
                    const auto& prev = layers.back();
                    for (std::uint32_t pi = 0; pi < prev.size(); ++pi) {
                        const auto& en = prev[pi];
                        for (std::uint32_t t = en.last + 1; t < traces.size(); ++t) {
                            if (traces[t].subset_of(en.u)) continue;
                            next_combination_check(steps, budget);
                            B nu = en.u | traces[t];
                            if (keep) next.push_back({nu, t, pi});
                            if (known.insert(nu).second) {
                                // walk back from the parent entry
                                std::vector<std::size_t> l1{rep[t]};
                                std::uint32_t cur = pi;
                                for (std::size_t li = layers.size(); li-- > 0 && cur != UINT32_MAX;) {
                                    l1.push_back(rep[layers[li][cur].last]);
                                    cur = layers[li][cur].parent;
                                }
                                std::sort(l1.begin(), l1.end());
                                CandidateBag cb;
                                cb.vertices = nu.to_set();
                                cb.witness.lambda1 = std::move(l1);
                                for (auto e : l2) cb.witness.lambda2.push_back(static_cast<edge_id>(e));
                                cb.witness.component = comps[ci];
                                cb.level = out.level;
                                out.add(std::move(cb));
                                if (out.size() > budget.max_bags)
                                    throw budget_exceeded("candidate-bag enumeration exceeded " +
                                                          std::to_string(budget.max_bags) + " bags");
                            }
                        }
                    }
                    if (!keep) break;
                    layers.push_back(std::move(next));
                }
            }
        });
    }
}

} // namespace detail

/// Bags of the form (⋃λ1) ∩ (⋃C) over the current edge pool, with λ2 ⊆ E(H).
inline void enumerate_bags(const Hypergraph& h, CandidateBagSet& out, const Budget& budget = {}) {
    dispatch_width(h.num_vertices(), [&]<std::size_t W>() { detail::enumerate_soft<W>(h, out.k, budget, out); });
}

/// Soft_{H,k}: level 0, pool = E(H) with identical vertex sets merged.
inline CandidateBagSet soft_bags(const Hypergraph& h, int k, const Budget& budget = {}) {
    if (k < 1) throw std::invalid_argument("k must be at least 1");
    CandidateBagSet out;
    out.k = k;
    out.level = 0;
    std::unordered_set<VertexSet> seen;
    for (edge_id e = 0; e < h.num_edges(); ++e)
        if (seen.insert(h.edge_vertices(e)).second) out.edge_pool.push_back({h.edge_vertices(e), e, 0});
    enumerate_bags(h, out, budget);
    return out;
}

/// Pool of the next level: prev.pool ⋒ prev.bags, earlier members keep their ids.
inline std::vector<SubEdge> next_edge_pool(const CandidateBagSet& prev) {
    std::vector<SubEdge> pool = prev.edge_pool;
    std::unordered_set<VertexSet> seen;
    for (const auto& p : pool) seen.insert(p.vertices);
    const int level = prev.level + 1;
    for (const auto& p : prev.edge_pool) {
        const std::size_t full = p.vertices.size() < 24 ? (std::size_t{1} << p.vertices.size()) - 1 : SIZE_MAX;
        std::size_t found = 0;
        std::unordered_set<VertexSet> local;
        for (const auto& b : prev.bags()) {
            auto t = p.vertices & b.vertices;
            if (t.empty() || !local.insert(t).second) continue;
            if (seen.insert(t).second) pool.push_back({t, p.origin, level});
            if (++found == full) break;
        }
    }
    return pool;
}

/// One step of the hierarchy: E^(i+1) = E^(i) ⋒ Soft^i, then Soft^(i+1).
inline CandidateBagSet iterate_level(const Hypergraph& h, int k, const CandidateBagSet& prev, const Budget& budget = {}) {
    CandidateBagSet out;
    out.k = k;
    out.level = prev.level + 1;
    out.edge_pool = next_edge_pool(prev);
    enumerate_bags(h, out, budget);
    return out;
}

/// Soft^i_{H,k}; stops early once the pool no longer grows.
inline CandidateBagSet soft_bags_level(const Hypergraph& h, int k, int i, const Budget& budget = {}) {
    if (i < 0) throw std::invalid_argument("level must be nonnegative");
    auto cur = soft_bags(h, k, budget);
    while (cur.level < i) {
        auto pool = next_edge_pool(cur);
        if (pool.size() == cur.edge_pool.size()) {
            cur.level = i;
            break;
        }
        auto nxt = iterate_level(h, k, cur, budget);
        cur = std::move(nxt);
    }
    return cur;
}

/// Debug line: `bag v1,v2 | lambda1 e3,e5 | lambda2 e1,e2 | comp e4,... | level i`.
inline std::string format_bag_line(const Hypergraph& h, const CandidateBagSet& set, const CandidateBag& bag) {
    std::ostringstream out;
    auto names = [&](const VertexSet& s) {
        std::string r;
        for (auto v : s) r += (r.empty() ? "" : ",") + h.vertex_name(v);
        return r;
    };
    out << "bag " << names(bag.vertices) << " | lambda1 ";
    bool first = true;
    for (auto p : bag.witness.lambda1) {
        const auto& se = set.edge_pool.at(p);
        out << (first ? "" : ",") << h.edge(se.origin).name;
        if (se.vertices != h.edge_vertices(se.origin)) {
            std::string inner;
            for (auto v : se.vertices) inner += (inner.empty() ? "" : ";") + h.vertex_name(v);
            out << '[' << inner << ']';
        }
        first = false;
    }
    out << " | lambda2 ";
    first = true;
    for (auto e : bag.witness.lambda2) out << (first ? "" : ",") << h.edge(e).name, first = false;
    out << " | comp ";
    if (!bag.witness.component) {
        out << "WHOLE";
    } else {
        first = true;
        for (auto e : *bag.witness.component) out << (first ? "" : ",") << h.edge(e).name, first = false;
    }
    out << " | level " << bag.level;
    return out.str();
}

/// Hypertree-node candidates: distinct unions of 1..k edges, dropping those
/// strictly inside a single edge. `connected` records whether some generating
/// edge set is connected.
struct CoverBag {
    VertexSet vertices;
    bool connected = false;
};

inline std::vector<CoverBag> cover_bags(const Hypergraph& h, int k) {
    std::vector<CoverBag> out;
    std::unordered_map<VertexSet, std::size_t> index;
    const auto m = h.num_edges();
    for (int r = 1; r <= k; ++r) {
        detail::for_each_combination(m, static_cast<std::size_t>(r), [&](const std::vector<std::size_t>& l) {
            VertexSet u;
            for (auto e : l) u |= h.edge_vertices(static_cast<edge_id>(e));
            // edge-level connectivity of the chosen edges
            std::vector<char> reached(l.size(), 0);
            reached[0] = 1;
            for (bool grew = true; grew;) {
                grew = false;
                for (std::size_t a = 0; a < l.size(); ++a) {
                    if (!reached[a]) continue;
                    for (std::size_t b = 0; b < l.size(); ++b) {
                        if (reached[b]) continue;
                        if (h.edge_vertices(static_cast<edge_id>(l[a])).intersects(h.edge_vertices(static_cast<edge_id>(l[b]))))
                            reached[b] = 1, grew = true;
                    }
                }
            }
            bool conn = std::all_of(reached.begin(), reached.end(), [](char c) { return c != 0; });
            auto [it, fresh] = index.emplace(u, out.size());
            if (fresh) out.push_back({u, conn});
            else out[it->second].connected = out[it->second].connected || conn;
        });
    }
    std::vector<CoverBag> kept;
    for (auto& b : out) {
        bool inside = false;
        for (const auto& e : h.edges())
            if (b.vertices.size() < e.vertices.size() && b.vertices.subset_of(e.vertices)) inside = true;
        if (!inside) kept.push_back(std::move(b));
    }
    return kept;
}

} // namespace softdecomp

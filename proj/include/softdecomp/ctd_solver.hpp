#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "candidate_bags.hpp"
#include "decomposition.hpp"
#include "hypergraph.hpp"

namespace softdecomp {

/// (S, C) with C a maximal [S]-connected vertex set or empty.
struct Block {
    VertexSet S;
    VertexSet C;
    friend bool operator==(const Block&, const Block&) = default;
    friend auto operator<=>(const Block&, const Block&) = default;
};

/// Chosen basis per block; blocks with empty C count as satisfied.
class BasisTable {
public:
    bool satisfied(const Block& b) const { return b.C.empty() || entries_.count(b) != 0; }
    const VertexSet* basis(const Block& b) const {
        auto it = entries_.find(b);
        return it == entries_.end() ? nullptr : &it->second;
    }
    void set(const Block& b, VertexSet x) { entries_[b] = std::move(x); }
    std::size_t size() const { return entries_.size(); }
    const std::map<Block, VertexSet>& entries() const { return entries_; }

private:
    std::map<Block, VertexSet> entries_;
};

enum class Strategy { lazy, fixpoint };

struct SolveOptions {
    Strategy strategy = Strategy::lazy;
    std::size_t max_steps = 100'000'000;
};

struct SolveResult {
    bool accepted = false;
    TreeDecomposition td;
    BasisTable table;
    std::size_t steps = 0;
};

/// S-vertices adjacent to C.
inline VertexSet block_boundary(const Hypergraph& h, const Block& b) {
    VertexSet nb;
    for (auto v : b.C) nb |= h.neighbours(v);
    return nb & b.S;
}

/// All blocks headed by a bag or by ∅, including the (S, ∅) blocks.
inline std::vector<Block> enumerate_blocks(const Hypergraph& h, const CandidateBagSet& bags) {
    std::vector<Block> out;
    auto add_for = [&](const VertexSet& s) {
        for (auto& c : s_components_vertices(h, s)) out.push_back({s, std::move(c)});
        out.push_back({s, {}});
    };
    add_for({});
    for (const auto& b : bags.bags()) add_for(b.vertices);
    return out;
}

/// The three basis conditions, with X restricted to S ∪ C.
inline bool is_basis(const Hypergraph& h, const Block& block, const VertexSet& x, const BasisTable& table) {
    if (x == block.S) return false;
    const auto sc = block.S | block.C;
    if (!x.subset_of(sc)) return false;
    VertexSet covered = x;
    std::vector<VertexSet> ys;
    for (auto& y : s_components_vertices(h, x)) {
        if (y.subset_of(block.C)) {
            covered |= y;
            ys.push_back(std::move(y));
        }
    }
    if (!block.C.subset_of(covered)) return false;
    for (const auto& e : h.edges())
        if (e.vertices.intersects(block.C) && !e.vertices.subset_of(covered)) return false;
    for (const auto& y : ys)
        if (!table.satisfied({x, y})) return false;
    return true;
}

namespace detail {

inline std::vector<VertexSet> canonical_bags(const CandidateBagSet& bags) {
    auto v = bags.vertex_sets();
    std::sort(v.begin(), v.end());
    return v;
}

template <std::size_t W>
class LazySolver {
public:
    using B = Bits<W>;

    LazySolver(const Hypergraph& h, const std::vector<VertexSet>& bags, std::size_t max_steps)
        : bh_(h), max_steps_(max_steps) {
        for (const auto& b : bags) bags_.push_back(B::of(b));
    }

    bool satisfied(const B& s, const B& c) {
        if (c.none()) return true;
        auto key = std::make_pair(s, c);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second >= 0;
        const B d = bh_.boundary(s, c);
        const B sc = s | c;
        int found = -1;
        for (std::size_t i = 0; i < bags_.size() && found < 0; ++i) {
            const B& x = bags_[i];
            if (x == s || !x.subset_of(sc) || !d.subset_of(x)) continue;
            if (++steps_ > max_steps_)
                throw budget_exceeded("solver exceeded " + std::to_string(max_steps_) + " basis checks");
            bool ok = true;
            for (const auto& y : bh_.components(x, c))
                if (!satisfied(x, y)) {
                    ok = false;
                    break;
                }
            if (ok) found = static_cast<int>(i);
        }
        memo_.emplace(key, found);
        return found >= 0;
    }

    void export_table(BasisTable& table) const {
        for (const auto& [key, idx] : memo_)
            if (idx >= 0) table.set({key.first.to_set(), key.second.to_set()}, bags_[static_cast<std::size_t>(idx)].to_set());
    }

    std::size_t steps() const { return steps_; }
    const BitHypergraph<W>& graph() const { return bh_; }

private:
    BitHypergraph<W> bh_;
    std::vector<B> bags_;
    std::unordered_map<std::pair<B, B>, int, BitsPairHash<W>> memo_;
    std::size_t steps_ = 0;
    std::size_t max_steps_;
};

/// The repeat-until-no-change loop over all blocks, first basis frozen.
template <std::size_t W>
bool fixpoint_solve(const Hypergraph& h, const std::vector<VertexSet>& bag_sets, std::size_t max_steps,
                    const std::vector<VertexSet>& roots, BasisTable& table, std::size_t& steps) {
    using B = Bits<W>;
    BitHypergraph<W> bh(h);
    std::vector<B> bags;
    for (const auto& b : bag_sets) bags.push_back(B::of(b));
    std::vector<std::pair<B, B>> blocks;
    std::unordered_map<std::pair<B, B>, std::size_t, BitsPairHash<W>> index;
    auto add_head = [&](const B& s) {
        for (const auto& c : bh.components(s)) {
            if (index.emplace(std::make_pair(s, c), blocks.size()).second) blocks.push_back({s, c});
        }
    };
    add_head(B{});
    for (const auto& b : bags) add_head(b);
    std::vector<int> basis(blocks.size(), -1);

    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
            if (basis[bi] >= 0) continue;
            const auto& [s, c] = blocks[bi];
            const B d = bh.boundary(s, c);
            const B sc = s | c;
            for (std::size_t i = 0; i < bags.size(); ++i) {
                const B& x = bags[i];
                if (x == s || !x.subset_of(sc) || !d.subset_of(x)) continue;
                if (++steps > max_steps)
                    throw budget_exceeded("solver exceeded " + std::to_string(max_steps) + " basis checks");
                bool ok = true;
                for (const auto& y : bh.components(x, c)) {
                    auto it = index.find({x, y});
                    if (it == index.end() || basis[it->second] < 0) {
                        ok = false;
                        break;
                    }
                }
                if (ok) {
                    basis[bi] = static_cast<int>(i);
                    changed = true;
                    break;
                }
            }
        }
    }
    for (std::size_t bi = 0; bi < blocks.size(); ++bi)
        if (basis[bi] >= 0)
            table.set({blocks[bi].first.to_set(), blocks[bi].second.to_set()}, bags[static_cast<std::size_t>(basis[bi])].to_set());
    for (const auto& r : roots)
        if (!table.satisfied({{}, r})) return false;
    return true;
}

inline void extract_rec(const Hypergraph& h, const BasisTable& table, const Block& blk, int parent, TreeDecomposition& td) {
    const VertexSet* x = table.basis(blk);
    if (!x) throw std::logic_error("extraction reached an unsatisfied block");
    if (!is_basis(h, blk, *x, table)) throw std::logic_error("recorded basis " + h.format(*x) + " no longer validates");
    int node = td.add(*x, parent);
    for (auto& y : s_components_vertices(h, *x))
        if (y.subset_of(blk.C)) extract_rec(h, table, {*x, y}, node, td);
}

} // namespace detail

/// Builds the tree from the satisfied root blocks (∅, V_i); further
/// component roots hang below the first one.
inline TreeDecomposition extract_decomposition(const Hypergraph& h, const BasisTable& table) {
    TreeDecomposition td;
    for (const auto& comp : connected_components(h)) {
        int parent = td.empty() ? -1 : td.root();
        detail::extract_rec(h, table, {{}, comp}, parent, td);
    }
    return td;
}

/// Decides whether a CompNF candidate tree decomposition over `bags` exists.
inline SolveResult solve(const Hypergraph& h, const CandidateBagSet& bags, const SolveOptions& opt = {}) {
    SolveResult res;
    if (h.num_vertices() == 0) {
        res.accepted = true;
        return res;
    }
    auto canon = detail::canonical_bags(bags);
    auto roots = connected_components(h);
    dispatch_width(h.num_vertices(), [&]<std::size_t W>() {
        if (opt.strategy == Strategy::fixpoint) {
            res.accepted = detail::fixpoint_solve<W>(h, canon, opt.max_steps, roots, res.table, res.steps);
            return;
        }
        detail::LazySolver<W> solver(h, canon, opt.max_steps);
        bool ok = true;
        for (const auto& r : roots) {
            if (!solver.satisfied(Bits<W>{}, Bits<W>::of(r))) {
                ok = false;
                break;
            }
        }
        res.accepted = ok;
        res.steps = solver.steps();
        solver.export_table(res.table);
    });
    if (res.accepted) res.td = extract_decomposition(h, res.table);
    return res;
}

namespace detail {

template <class F>
bool for_each_combination_until(std::size_t n, std::size_t r, F&& f) {
    if (r > n) return false;
    std::vector<std::size_t> idx(r);
    for (std::size_t i = 0; i < r; ++i) idx[i] = i;
    for (;;) {
        if (f(idx)) return true;
        std::size_t i = r;
        while (i > 0 && idx[i - 1] == n - r + i - 1) --i;
        if (i == 0) return false;
        ++idx[i - 1];
        for (std::size_t j = i; j < r; ++j) idx[j] = idx[j - 1] + 1;
    }
}

} // namespace detail

/// Lexicographically first minimum-size cover of `bag` by at most k sets
/// (indices into `sets`); optionally only covers whose members are connected.
inline std::optional<std::vector<std::size_t>> min_cover(const VertexSet& bag, const std::vector<VertexSet>& sets, int k,
                                                         bool require_connected = false) {
    if (bag.empty()) return std::vector<std::size_t>{};
    std::vector<std::size_t> rel;
    for (std::size_t i = 0; i < sets.size(); ++i)
        if (sets[i].intersects(bag)) rel.push_back(i);
    std::optional<std::vector<std::size_t>> out;
    auto connected = [&](const std::vector<std::size_t>& pick) {
        std::vector<char> in(pick.size(), 0);
        in[0] = 1;
        for (bool grew = true; grew;) {
            grew = false;
            for (std::size_t a = 0; a < pick.size(); ++a)
                for (std::size_t b = 0; b < pick.size(); ++b)
                    if (in[a] && !in[b] && sets[rel[pick[a]]].intersects(sets[rel[pick[b]]])) in[b] = 1, grew = true;
        }
        return std::all_of(in.begin(), in.end(), [](char c) { return c != 0; });
    };
    for (int r = 1; r <= k && !out; ++r) {
        detail::for_each_combination_until(rel.size(), static_cast<std::size_t>(r), [&](const std::vector<std::size_t>& pick) {
            VertexSet u;
            for (auto p : pick) u |= sets[rel[p]];
            if (!bag.subset_of(u)) return false;
            if (require_connected && !connected(pick)) return false;
            std::vector<std::size_t> ids;
            for (auto p : pick) ids.push_back(rel[p]);
            out = std::move(ids);
            return true;
        });
    }
    return out;
}

/// Annotates each node with a minimum cover from the pool, stored as origin edges.
inline TreeDecomposition attach_covers(const Hypergraph& h, TreeDecomposition td, const std::vector<SubEdge>& pool, int k) {
    std::vector<VertexSet> sets;
    for (const auto& p : pool) sets.push_back(p.vertices);
    for (auto& n : td.nodes) {
        auto c = min_cover(n.bag, sets, k);
        if (!c) throw std::invalid_argument("bag " + h.format(n.bag) + " has no cover of size <= " + std::to_string(k));
        n.cover.clear();
        for (auto i : *c) n.cover.push_back(pool[i].origin);
        std::sort(n.cover.begin(), n.cover.end());
        n.cover.erase(std::unique(n.cover.begin(), n.cover.end()), n.cover.end());
    }
    return td;
}

inline std::vector<SubEdge> original_edge_pool(const Hypergraph& h) {
    std::vector<SubEdge> pool;
    for (edge_id e = 0; e < h.num_edges(); ++e) pool.push_back({h.edge_vertices(e), e, 0});
    return pool;
}

} // namespace softdecomp

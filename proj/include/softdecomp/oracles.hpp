#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "candidate_bags.hpp"
#include "ctd_solver.hpp"
#include "decomposition.hpp"
#include "hypergraph.hpp"

namespace softdecomp {

struct ValidationCheck {
    std::string name;
    bool pass = true;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;

    bool ok() const {
        return std::all_of(checks.begin(), checks.end(), [](const ValidationCheck& c) { return c.pass; });
    }
    const ValidationCheck* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
    std::string format() const {
        std::string out;
        for (const auto& c : checks) {
            out += (c.pass ? "PASS " : "FAIL ") + c.name;
            if (!c.detail.empty()) out += ": " + c.detail;
            out += '\n';
        }
        return out;
    }
};

enum class ValidationMode { ctd, ghw, hw };

struct ValidationOptions {
    ValidationMode mode = ValidationMode::ctd;
    std::optional<int> k;
    const CandidateBagSet* bags = nullptr;
};

namespace detail {

inline bool td_structure_ok(const TreeDecomposition& td, std::string& why) {
    int roots = 0;
    for (std::size_t i = 0; i < td.nodes.size(); ++i) {
        int p = td.nodes[i].parent;
        if (p < 0) ++roots;
        else if (static_cast<std::size_t>(p) >= td.nodes.size()) {
            why = "node " + std::to_string(i) + " has unknown parent " + std::to_string(p);
            return false;
        }
    }
    if (roots != 1) {
        why = std::to_string(roots) + " roots";
        return false;
    }
    for (std::size_t i = 0; i < td.nodes.size(); ++i) {
        std::size_t steps = 0;
        for (int u = static_cast<int>(i); u >= 0; u = td.nodes[static_cast<std::size_t>(u)].parent)
            if (++steps > td.nodes.size()) {
                why = "cycle through node " + std::to_string(i);
                return false;
            }
    }
    return true;
}

} // namespace detail

/// Checks a decomposition against the TD conditions plus the mode's extras.
inline ValidationReport validate_td(const Hypergraph& h, const TreeDecomposition& td, const ValidationOptions& opt = {}) {
    ValidationReport rep;
    std::string why;
    if (td.empty()) {
        rep.checks.push_back({"structure", h.num_vertices() == 0, "empty decomposition"});
        return rep;
    }
    if (!detail::td_structure_ok(td, why)) {
        rep.checks.push_back({"structure", false, why});
        return rep;
    }
    rep.checks.push_back({"structure", true, ""});

    {
        ValidationCheck c{"edge coverage", true, ""};
        for (const auto& e : h.edges()) {
            bool hit = std::any_of(td.nodes.begin(), td.nodes.end(),
                                   [&](const TdNode& n) { return e.vertices.subset_of(n.bag); });
            if (!hit) {
                c.pass = false;
                c.detail = "edge " + e.name + " in no bag";
                break;
            }
        }
        rep.checks.push_back(c);
    }
    {
        ValidationCheck c{"connectedness", true, ""};
        for (vertex_id v = 0; v < h.num_vertices() && c.pass; ++v) {
            int tops = 0;
            for (const auto& n : td.nodes) {
                if (!n.bag.contains(v)) continue;
                if (n.parent < 0 || !td.nodes[static_cast<std::size_t>(n.parent)].bag.contains(v)) ++tops;
            }
            if (tops != 1) {
                c.pass = false;
                c.detail = "vertex " + h.vertex_name(v) + (tops == 0 ? " in no bag" : " splits into " + std::to_string(tops) + " subtrees");
            }
        }
        for (const auto& n : td.nodes)
            for (auto v : n.bag)
                if (v >= h.num_vertices()) c.pass = false, c.detail = "unknown vertex id";
        rep.checks.push_back(c);
    }
    if (opt.bags) {
        ValidationCheck c{"bag membership", true, ""};
        for (const auto& n : td.nodes)
            if (!opt.bags->contains(n.bag)) {
                c.pass = false;
                c.detail = "bag " + h.format(n.bag) + " is not a candidate";
                break;
            }
        rep.checks.push_back(c);
    }
    if (opt.mode == ValidationMode::ctd) {
        ValidationCheck c{"compnf", true, ""};
        for (std::size_t i = 0; i < td.nodes.size() && c.pass; ++i) {
            int p = td.nodes[i].parent;
            if (p < 0) continue;
            const auto& pb = td.nodes[static_cast<std::size_t>(p)].bag;
            const auto below = td.subtree_vertices(static_cast<int>(i));
            const auto inter = pb & td.nodes[i].bag;
            bool matched = false;
            for (const auto& comp : s_components_vertices(h, pb))
                if ((comp | inter) == below) matched = true;
            if (!matched) {
                c.pass = false;
                c.detail = "subtree at " + h.format(td.nodes[i].bag) + " is not one [" + h.format(pb) + "]-component";
            }
        }
        rep.checks.push_back(c);
    }
    if (opt.k) {
        ValidationCheck c{"width", true, ""};
        std::vector<VertexSet> edges;
        for (const auto& e : h.edges()) edges.push_back(e.vertices);
        for (const auto& n : td.nodes) {
            if (!n.cover.empty()) {
                VertexSet u;
                for (auto e : n.cover) u |= h.edge_vertices(e);
                if (!n.bag.subset_of(u)) {
                    c.pass = false;
                    c.detail = "cover of " + h.format(n.bag) + " misses vertices";
                    break;
                }
                if (n.cover.size() > static_cast<std::size_t>(*opt.k)) {
                    c.pass = false;
                    c.detail = "cover of " + h.format(n.bag) + " has " + std::to_string(n.cover.size()) + " edges";
                    break;
                }
            } else if (!min_cover(n.bag, edges, *opt.k)) {
                c.pass = false;
                c.detail = "bag " + h.format(n.bag) + " needs more than " + std::to_string(*opt.k) + " edges";
                break;
            }
        }
        rep.checks.push_back(c);
    }
    if (opt.mode == ValidationMode::hw) {
        ValidationCheck c{"special condition", true, ""};
        if (!td.has_covers()) {
            c.pass = false;
            c.detail = "covers not attached";
        }
        for (std::size_t i = 0; i < td.nodes.size() && c.pass; ++i) {
            VertexSet u;
            for (auto e : td.nodes[i].cover) u |= h.edge_vertices(e);
            auto leak = (td.subtree_vertices(static_cast<int>(i)) & u) - td.nodes[i].bag;
            if (!leak.empty()) {
                c.pass = false;
                c.detail = "node " + h.format(td.nodes[i].bag) + " leaks " + h.format(leak);
            }
        }
        rep.checks.push_back(c);
    }
    return rep;
}

namespace detail {

/// Normal-form HD search: each node covers its connector and
/// χ = ⋃λ ∩ (C ∪ conn) must reach into C.
template <std::size_t W>
class HwSearch {
public:
    using B = Bits<W>;

    HwSearch(const Hypergraph& h, int k, std::size_t max_steps)
        : bh_(h), k_(static_cast<std::size_t>(k)), max_steps_(max_steps) {}

    bool solve(const B& c, const B& conn) {
        auto key = std::make_pair(c, conn);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second >= 0;
        Frame f;
        f.c = c;
        f.conn = conn;
        f.scope = c | conn;
        // edges with the same trace on the scope are interchangeable here
        {
            BitsSet<W> seen;
            for (edge_id e = 0; e < bh_.edges.size(); ++e) {
                const B t = bh_.edges[e] & f.scope;
                if (t.none() || !seen.insert(t)) continue;
                f.traces.push_back(t);
                f.rep.push_back(e);
            }
        }
        for (std::size_t i = 0; i < f.traces.size(); ++i)
            if (f.traces[i].intersects(c)) f.rel.push_back(i);
        if (conn.none()) {
            for (std::size_t j = 0; j < f.rel.size() && !f.found; ++j) {
                f.lambda.push_back(f.rel[j]);
                gen_free(f, f.traces[f.rel[j]], j + 1);
                if (!f.found) f.lambda.pop_back();
            }
        } else {
            for (std::size_t i = 0; i < f.traces.size(); ++i) {
                const B ct = f.traces[i] & conn;
                if (ct.none()) continue;
                auto it = std::find(f.groups.begin(), f.groups.end(), ct);
                if (it == f.groups.end()) {
                    f.groups.push_back(ct);
                    f.members.emplace_back();
                    it = f.groups.end() - 1;
                }
                f.members[static_cast<std::size_t>(it - f.groups.begin())].push_back(i);
            }
            f.excluded.assign(f.groups.size(), 0);
            gen_cover(f, B{});
            // smallest λ first for each distinct union
            std::vector<std::size_t> order(f.cover_u.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t x, std::size_t y) { return f.cover_n[x] < f.cover_n[y]; });
            BitsSet<W> unions;
            for (std::size_t i : order) {
                if (f.found) break;
                if (!unions.insert(f.cover_u[i])) continue;
                f.lambda.assign(f.cover_l.begin() + static_cast<std::ptrdiff_t>(i * k_),
                                f.cover_l.begin() + static_cast<std::ptrdiff_t>(i * k_ + f.cover_n[i]));
                gen_free(f, f.cover_u[i], 0);
            }
        }
        int idx = -1;
        if (f.found) {
            std::vector<edge_id> lambda;
            for (auto t : f.lambda) lambda.push_back(f.rep[t]);
            std::sort(lambda.begin(), lambda.end());
            lambda.erase(std::unique(lambda.begin(), lambda.end()), lambda.end());
            idx = static_cast<int>(chosen_.size());
            chosen_.push_back(std::move(lambda));
        }
        memo_.emplace(key, idx);
        return idx >= 0;
    }

    void build(const B& c, const B& conn, int parent, TreeDecomposition& td) const {
        const auto& lambda = chosen_[static_cast<std::size_t>(memo_.at({c, conn}))];
        B u;
        for (auto e : lambda) u |= bh_.edges[e];
        const B chi = u & (c | conn);
        int node = td.add(chi.to_set(), parent);
        td.nodes[static_cast<std::size_t>(node)].cover = lambda;
        for (const auto& child : bh_.components(chi, c)) build(child, bh_.boundary(chi, child), node, td);
    }

    std::size_t steps() const { return steps_; }

private:
    struct Frame {
        B c, conn, scope;
        std::vector<B> traces;                   // distinct nonempty e ∩ scope
        std::vector<edge_id> rep;                // one edge per trace
        std::vector<std::size_t> rel;            // traces meeting c
        std::vector<std::size_t> lambda;         // trace indices
        std::vector<B> groups;                   // distinct nonempty trace ∩ conn
        std::vector<std::vector<std::size_t>> members;
        std::vector<std::size_t> gsel;
        std::vector<std::size_t> excluded;       // depth that excluded a group
        std::vector<B> cover_u;
        std::vector<std::size_t> cover_n, cover_l;   // k slots per cover
        BitsSet<W> tried;
        bool found = false;
    };

    void record(Frame& f, const B& u) {
        const B chi = u & f.scope;
        if (!chi.intersects(f.c) || !f.tried.insert(chi)) return;
        if (++steps_ > max_steps_) throw budget_exceeded("hw search exceeded " + std::to_string(max_steps_) + " steps");
        f.found = attempt(f.c, chi);
    }

    // free part: traces adding new C-vertices, in increasing position
    void gen_free(Frame& f, const B& u, std::size_t from) {
        record(f, u);
        if (f.found || f.lambda.size() == k_) return;
        for (std::size_t j = from; j < f.rel.size() && !f.found; ++j) {
            const B& t = f.traces[f.rel[j]];
            if ((t & f.c).subset_of(u)) continue;
            f.lambda.push_back(f.rel[j]);
            gen_free(f, u | t, j + 1);
            if (f.found) return;
            f.lambda.pop_back();
        }
    }

    // Covers of the connector: branch on its least uncovered vertex over
    // distinct connector traces; a group passed over stays excluded below.
    void gen_cover(Frame& f, const B& u) {
        const B missing = f.conn - u;
        if (missing.none()) {
            expand(f, 0, B{});
            return;
        }
        if (f.gsel.size() == k_) return;
        const auto v = static_cast<std::size_t>(missing.lowest());
        const std::size_t depth = f.gsel.size() + 1;
        for (std::size_t g = 0; g < f.groups.size(); ++g) {
            if (!f.groups[g].test(v) || f.excluded[g]) continue;
            f.gsel.push_back(g);
            gen_cover(f, u | f.groups[g]);
            f.gsel.pop_back();
            f.excluded[g] = depth;
        }
        for (auto& x : f.excluded)
            if (x == depth) x = 0;
    }

    // one scope trace per chosen group
    void expand(Frame& f, std::size_t i, const B& u) {
        if (i == f.gsel.size()) {
            f.cover_u.push_back(u);
            f.cover_n.push_back(f.lambda.size());
            f.cover_l.insert(f.cover_l.end(), f.lambda.begin(), f.lambda.end());
            f.cover_l.resize(f.cover_u.size() * k_);
            return;
        }
        for (auto t : f.members[f.gsel[i]]) {
            f.lambda.push_back(t);
            expand(f, i + 1, u | f.traces[t]);
            f.lambda.pop_back();
        }
    }

    bool attempt(const B& c, const B& chi) {
        // known failures first, then recurse
        bool known_bad = !bh_.for_each_component(chi, c, [&](const B& child) {
            auto it = memo_.find({child, bh_.boundary(chi, child)});
            return it == memo_.end() || it->second >= 0;
        });
        if (known_bad) return false;
        return bh_.for_each_component(chi, c, [&](const B& child) { return solve(child, bh_.boundary(chi, child)); });
    }

    BitHypergraph<W> bh_;
    std::size_t k_;
    std::size_t max_steps_;
    std::size_t steps_ = 0;
    std::unordered_map<std::pair<B, B>, int, BitsPairHash<W>> memo_;
    std::vector<std::vector<edge_id>> chosen_;
};

} // namespace detail

/// Hypertree decomposition of width <= k, if one exists (exhaustive search).
inline std::optional<TreeDecomposition> hw_leq(const Hypergraph& h, int k, std::size_t max_steps = 50'000'000) {
    if (k < 1) return std::nullopt;
    if (h.num_vertices() == 0) return TreeDecomposition{};
    return dispatch_width(h.num_vertices(), [&]<std::size_t W>() -> std::optional<TreeDecomposition> {
        detail::HwSearch<W> search(h, k, max_steps);
        detail::BitHypergraph<W> bh(h);
        TreeDecomposition td;
        for (const auto& comp : bh.components(Bits<W>{})) {
            if (!search.solve(comp, {})) return std::nullopt;
            search.build(comp, {}, td.empty() ? -1 : td.root(), td);
        }
        return td;
    });
}

/// Generalized hypertree decomposition of width <= k, if one exists. Bags
/// range over every vertex set coverable by k edges.
inline std::optional<TreeDecomposition> ghw_leq(const Hypergraph& h, int k, std::size_t max_vertices = 26) {
    if (k < 1) return std::nullopt;
    const auto n = h.num_vertices();
    if (n > max_vertices) throw budget_exceeded("ghw oracle limited to " + std::to_string(max_vertices) + " vertices");
    if (n == 0) return TreeDecomposition{};
    using mask = std::uint64_t;
    auto to_mask = [](const VertexSet& s) {
        mask m = 0;
        for (auto v : s) m |= mask{1} << v;
        return m;
    };
    auto to_set = [](mask m) {
        std::vector<vertex_id> ids;
        for (; m; m &= m - 1) ids.push_back(static_cast<vertex_id>(std::countr_zero(m)));
        return VertexSet::from_sorted(std::move(ids));
    };
    // coverable[X] for every X, as the downward closure of the ≤k edge unions
    std::vector<std::uint8_t> coverable(std::size_t{1} << n, 0);
    std::vector<mask> em;
    for (const auto& e : h.edges()) em.push_back(to_mask(e.vertices));
    std::sort(em.begin(), em.end());
    em.erase(std::unique(em.begin(), em.end()), em.end());
    for (int r = 1; r <= k; ++r)
        detail::for_each_combination(em.size(), static_cast<std::size_t>(r), [&](const std::vector<std::size_t>& pick) {
            mask u = 0;
            for (auto i : pick) u |= em[i];
            coverable[u] = 1;
        });
    for (std::size_t bit = 0; bit < n; ++bit)
        for (mask x = 0; x < (mask{1} << n); ++x)
            if (!(x & (mask{1} << bit)) && coverable[x | (mask{1} << bit)]) coverable[x] = 1;

    std::vector<mask> adj(n, 0);
    for (vertex_id v = 0; v < n; ++v) adj[v] = to_mask(h.neighbours(v));
    auto components = [&](mask sep, mask within) {
        std::vector<mask> out;
        mask rest = within & ~sep;
        while (rest) {
            mask comp = rest & (~rest + 1), frontier = comp;
            while (frontier) {
                mask next = 0;
                for (mask f = frontier; f; f &= f - 1) next |= adj[static_cast<std::size_t>(std::countr_zero(f))];
                frontier = next & within & ~sep & ~comp;
                comp |= frontier;
            }
            rest &= ~comp;
            out.push_back(comp);
        }
        return out;
    };
    auto nbhd = [&](mask c) {
        mask nb = 0;
        for (mask f = c; f; f &= f - 1) nb |= adj[static_cast<std::size_t>(std::countr_zero(f))];
        return nb;
    };

    struct PairHash {
        std::size_t operator()(const std::pair<mask, mask>& p) const { return std::hash<mask>{}(p.first * 0x9e3779b97f4a7c15ull ^ p.second); }
    };
    std::unordered_map<std::pair<mask, mask>, std::int64_t, PairHash> memo;  // chosen Z, or -1
    const mask full = (n == 64) ? ~mask{0} : (mask{1} << n) - 1;

    std::function<bool(mask, mask)> solve = [&](mask c, mask conn) -> bool {
        auto key = std::make_pair(c, conn);
        if (auto it = memo.find(key); it != memo.end()) return it->second >= 0;
        memo[key] = -1;
        if (!coverable[conn]) return false;
        std::vector<std::size_t> pos;
        for (mask f = c; f; f &= f - 1) pos.push_back(static_cast<std::size_t>(std::countr_zero(f)));
        const std::uint64_t subsets = std::uint64_t{1} << pos.size();
        for (std::uint64_t s = subsets - 1; s >= 1; --s) {
            mask z = 0;
            for (std::size_t i = 0; i < pos.size(); ++i)
                if (s >> i & 1u) z |= mask{1} << pos[i];
            const mask x = conn | z;
            if (!coverable[x]) continue;
            bool ok = true;
            for (mask child : components(x, c))
                if (!solve(child, nbhd(child) & x)) {
                    ok = false;
                    break;
                }
            if (ok) {
                memo[key] = static_cast<std::int64_t>(x);
                return true;
            }
        }
        return false;
    };
    std::function<void(mask, mask, int, TreeDecomposition&)> build = [&](mask c, mask conn, int parent, TreeDecomposition& td) {
        const mask x = static_cast<mask>(memo.at({c, conn}));
        int node = td.add(to_set(x), parent);
        for (mask child : components(x, c)) build(child, nbhd(child) & x, node, td);
    };
    TreeDecomposition td;
    for (mask comp : components(0, full)) {
        if (!solve(comp, 0)) return std::nullopt;
        build(comp, 0, td.empty() ? -1 : td.root(), td);
    }
    return attach_covers(h, td, original_edge_pool(h), k);
}

struct CtdEnumeration {
    std::vector<TreeDecomposition> decompositions;
    bool truncated = false;
};

namespace detail {

/// Brute-force block recursion over all bases, on plain vertex sets.
class CtdEnumerator {
public:
    CtdEnumerator(const Hypergraph& h, const std::vector<VertexSet>& bags, std::size_t limit)
        : h_(h), bags_(bags), limit_(limit) {}

    const std::vector<TreeDecomposition>& all(const VertexSet& s, const VertexSet& c) {
        auto key = std::make_pair(s, c);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        std::vector<TreeDecomposition> out;
        for (const auto& x : bags_) {
            if (x == s || !x.subset_of(s | c)) continue;
            VertexSet covered = x;
            std::vector<VertexSet> ys;
            for (auto& y : s_components_vertices(h_, x))
                if (y.subset_of(c)) covered |= y, ys.push_back(std::move(y));
            if (!c.subset_of(covered)) continue;
            bool edges_ok = true;
            for (const auto& e : h_.edges())
                if (e.vertices.intersects(c) && !e.vertices.subset_of(covered)) edges_ok = false;
            if (!edges_ok) continue;
            // the combinations of child decompositions
            std::vector<TreeDecomposition> partial(1);
            partial[0].add(x, -1);
            for (const auto& y : ys) {
                const auto& subs = all(x, y);
                std::vector<TreeDecomposition> next;
                for (const auto& p : partial)
                    for (const auto& sub : subs) {
                        if (next.size() >= limit_) {
                            truncated = true;
                            break;
                        }
                        auto t = p;
                        t.graft(sub, 0);
                        next.push_back(std::move(t));
                    }
                partial = std::move(next);
                if (partial.empty()) break;
            }
            for (auto& p : partial) {
                if (out.size() >= limit_) {
                    truncated = true;
                    break;
                }
                out.push_back(std::move(p));
            }
        }
        return memo_[key] = std::move(out);
    }

    bool truncated = false;

private:
    const Hypergraph& h_;
    std::vector<VertexSet> bags_;
    std::size_t limit_;
    std::map<std::pair<VertexSet, VertexSet>, std::vector<TreeDecomposition>> memo_;
};

} // namespace detail

/// Every CompNF decomposition over the given bags, up to `limit` per block.
/// Recursion terminates: a sub-block either has a smaller C or the same C under a smaller S.
inline CtdEnumeration enumerate_all_ctds(const Hypergraph& h, const std::vector<VertexSet>& bags, std::size_t limit = 10'000) {
    CtdEnumeration res;
    if (h.num_vertices() == 0) {
        res.decompositions.emplace_back();
        return res;
    }
    detail::CtdEnumerator en(h, bags, limit);
    std::vector<TreeDecomposition> acc(1);
    for (const auto& comp : connected_components(h)) {
        const auto subs = en.all({}, comp);
        std::vector<TreeDecomposition> next;
        for (const auto& a : acc)
            for (const auto& s : subs) {
                if (next.size() >= limit) {
                    res.truncated = true;
                    break;
                }
                auto t = a;
                t.graft(s, t.empty() ? -1 : t.root());
                next.push_back(std::move(t));
            }
        acc = std::move(next);
    }
    res.truncated = res.truncated || en.truncated;
    res.decompositions = std::move(acc);
    return res;
}

inline CtdEnumeration enumerate_all_ctds(const Hypergraph& h, const CandidateBagSet& bags, std::size_t limit = 10'000) {
    return enumerate_all_ctds(h, bags.vertex_sets(), limit);
}

} // namespace softdecomp

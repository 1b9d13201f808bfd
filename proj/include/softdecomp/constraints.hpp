#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "candidate_bags.hpp"
#include "cost_model.hpp"
#include "ctd_solver.hpp"
#include "decomposition.hpp"
#include "hypergraph.hpp"

namespace softdecomp {

/// Conjunction of the built-in subtree constraints; default is always true.
struct Constraint {
    bool concov = false;
    std::optional<int> shallowcyc;                 // depth bound d
    std::optional<std::vector<int>> partition;     // edge id -> partition index
    std::vector<std::string> partition_names;

    bool trivial() const { return !concov && !shallowcyc && !partition; }

    static Constraint always_true() { return {}; }
    static Constraint con_cov() {
        Constraint c;
        c.concov = true;
        return c;
    }
    static Constraint shallow_cyc(int d) {
        Constraint c;
        c.shallowcyc = d;
        return c;
    }
    static Constraint part_clust(std::vector<int> labels, std::vector<std::string> names) {
        Constraint c;
        c.partition = std::move(labels);
        c.partition_names = std::move(names);
        return c;
    }

    Constraint operator&&(const Constraint& o) const {
        Constraint c = *this;
        c.concov = concov || o.concov;
        if (o.shallowcyc) c.shallowcyc = shallowcyc ? std::min(*shallowcyc, *o.shallowcyc) : *o.shallowcyc;
        if (o.partition) {
            if (partition) throw std::invalid_argument("only one partition labelling per constraint");
            c.partition = o.partition;
            c.partition_names = o.partition_names;
        }
        return c;
    }

    std::string describe() const {
        std::vector<std::string> parts;
        if (concov) parts.push_back("concov");
        if (shallowcyc) parts.push_back("shallowcyc:d=" + std::to_string(*shallowcyc));
        if (partition) parts.push_back("partclust(" + std::to_string(partition_names.size()) + " partitions)");
        if (parts.empty()) return "true";
        std::string s = parts[0];
        for (std::size_t i = 1; i < parts.size(); ++i) s += " & " + parts[i];
        return s;
    }
};

/// Lines `edge_name partition_name`; every edge must be labelled.
inline Constraint parse_partition_labels(const Hypergraph& h, const std::string& text) {
    std::vector<int> labels(h.num_edges(), -1);
    std::vector<std::string> names;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto p = line.find_first_of("#%"); p != std::string::npos) line.resize(p);
        std::istringstream ls(line);
        std::string e, p;
        if (!(ls >> e)) continue;
        if (!(ls >> p)) throw parse_error("expected `edge partition`", lineno);
        auto id = h.find_edge(e);
        if (!id) throw parse_error("unknown edge '" + e + "'", lineno);
        auto it = std::find(names.begin(), names.end(), p);
        if (it == names.end()) {
            if (names.size() == 64) throw parse_error("more than 64 partitions", lineno);
            names.push_back(p);
            it = names.end() - 1;
        }
        labels[*id] = static_cast<int>(it - names.begin());
    }
    for (edge_id e = 0; e < h.num_edges(); ++e)
        if (labels[e] < 0) throw parse_error("edge '" + h.edge(e).name + "' has no partition", 0);
    return Constraint::part_clust(std::move(labels), std::move(names));
}

/// `concov`, `shallowcyc:d=N`; partition labels are supplied separately.
inline Constraint parse_constraint_spec(const std::string& spec) {
    if (spec == "concov") return Constraint::con_cov();
    if (spec.rfind("shallowcyc:d=", 0) == 0) {
        try {
            int d = std::stoi(spec.substr(13));
            if (d < 0) throw std::invalid_argument("negative");
            return Constraint::shallow_cyc(d);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad depth in constraint '" + spec + "'");
        }
    }
    if (spec == "true" || spec == "none") return {};
    throw std::invalid_argument("unknown constraint '" + spec + "'");
}

/// Minimum cover of `bag` by at most k edges of `allowed` (all edges when empty).
inline std::optional<std::vector<edge_id>> bag_cover(const Hypergraph& h, const VertexSet& bag, int k, bool connected,
                                                     const std::vector<edge_id>& allowed = {}) {
    std::vector<VertexSet> sets;
    std::vector<edge_id> ids;
    if (allowed.empty()) {
        for (edge_id e = 0; e < h.num_edges(); ++e) sets.push_back(h.edge_vertices(e)), ids.push_back(e);
    } else {
        for (auto e : allowed) sets.push_back(h.edge_vertices(e)), ids.push_back(e);
    }
    auto c = min_cover(bag, sets, k, connected);
    if (!c) return std::nullopt;
    std::vector<edge_id> out;
    for (auto i : *c) out.push_back(ids[i]);
    std::sort(out.begin(), out.end());
    return out;
}

inline bool single_edge_coverable(const Hypergraph& h, const VertexSet& bag) {
    return std::any_of(h.edges().begin(), h.edges().end(), [&](const Edge& e) { return bag.subset_of(e.vertices); });
}

/// Partitions whose edges alone cover the bag with at most k edges.
inline std::vector<int> feasible_partitions(const Hypergraph& h, const VertexSet& bag, int k, const std::vector<int>& labels,
                                            std::size_t num_partitions) {
    std::vector<int> out;
    for (std::size_t p = 0; p < num_partitions; ++p) {
        std::vector<edge_id> allowed;
        for (edge_id e = 0; e < h.num_edges(); ++e)
            if (labels[e] == static_cast<int>(p)) allowed.push_back(e);
        if (!allowed.empty() && bag_cover(h, bag, k, false, allowed)) out.push_back(static_cast<int>(p));
    }
    return out;
}

inline bool eval_concov(const Hypergraph& h, const TreeDecomposition& td, int k) {
    return std::all_of(td.nodes.begin(), td.nodes.end(), [&](const TdNode& n) { return bag_cover(h, n.bag, k, true).has_value(); });
}

inline std::vector<int> node_depths(const TreeDecomposition& td) {
    std::vector<int> depth(td.size(), -1);
    for (std::size_t i = 0; i < td.size(); ++i) {
        int d = 0;
        for (int u = static_cast<int>(i); td.nodes[static_cast<std::size_t>(u)].parent >= 0; u = td.nodes[static_cast<std::size_t>(u)].parent) ++d;
        depth[i] = d;
    }
    return depth;
}

/// Least d such that every node deeper than d fits in one edge.
inline int cyclicity_depth(const Hypergraph& h, const TreeDecomposition& td) {
    auto depth = node_depths(td);
    int d = 0;
    for (std::size_t i = 0; i < td.size(); ++i)
        if (!single_edge_coverable(h, td.nodes[i].bag)) d = std::max(d, depth[i]);
    return d;
}

inline bool eval_shallowcyc(const Hypergraph& h, const TreeDecomposition& td, int d) { return cyclicity_depth(h, td) <= d; }

/// Whether some labelling f exists with a single-partition cover per bag and connected, disjoint partition regions.
inline bool eval_partclust(const Hypergraph& h, const TreeDecomposition& td, const std::vector<int>& labels, int k) {
    if (td.empty()) return true;
    std::size_t np = 0;
    for (int l : labels) np = std::max(np, static_cast<std::size_t>(l + 1));
    auto ch = td.children();
    using State = std::pair<int, std::uint64_t>;   // root label, labels used
    std::function<std::set<State>(int)> rec = [&](int u) {
        std::vector<std::set<State>> kids;
        for (int c : ch[static_cast<std::size_t>(u)]) kids.push_back(rec(c));
        std::set<State> out;
        for (int q : feasible_partitions(h, td.nodes[static_cast<std::size_t>(u)].bag, k, labels, np)) {
            const std::uint64_t qb = std::uint64_t{1} << q;
            std::set<std::uint64_t> partial{qb};
            for (const auto& ks : kids) {
                std::set<std::uint64_t> next;
                for (auto used : partial)
                    for (const auto& [r, uc] : ks) {
                        if ((uc & qb) && r != q) continue;
                        if ((uc & ~qb) & (used & ~qb)) continue;
                        next.insert(used | uc);
                    }
                partial = std::move(next);
            }
            for (auto used : partial) out.insert({q, used});
        }
        return out;
    };
    return !rec(td.root()).empty();
}

/// Checks the constraint on the partial decomposition rooted at every node.
inline bool satisfies(const Hypergraph& h, const TreeDecomposition& td, const Constraint& c, int k) {
    if (c.concov && !eval_concov(h, td, k)) return false;
    for (std::size_t u = 0; u < td.size(); ++u) {
        auto sub = td.subtree(static_cast<int>(u));
        if (c.shallowcyc && !eval_shallowcyc(h, sub, *c.shallowcyc)) return false;
        if (c.partition && !eval_partclust(h, sub, *c.partition, k)) return false;
    }
    return true;
}

/// Cost, then node count, then canonical bag sequence.
struct CostKey {
    double cost = 0;
    std::size_t nodes = 0;
    std::vector<VertexSet> bags;
};

inline constexpr double cost_tolerance = 1e-9;

inline int compare(const CostKey& a, const CostKey& b) {
    if (a.cost < b.cost - cost_tolerance) return -1;
    if (b.cost < a.cost - cost_tolerance) return 1;
    if (a.nodes != b.nodes) return a.nodes < b.nodes ? -1 : 1;
    if (a.bags != b.bags) return a.bags < b.bags ? -1 : 1;
    return 0;
}

inline bool operator<(const CostKey& a, const CostKey& b) { return compare(a, b) < 0; }

struct ConstrainedOptions {
    CostProvider cost;
    /// Keep one decomposition per block as the literal replacement loop does,
    /// instead of one per signature.
    bool literal = false;
    std::size_t max_steps = 10'000'000;
};

struct ConstrainedResult {
    bool accepted = false;
    TreeDecomposition td;
    CostKey key;
    std::size_t steps = 0;
    std::vector<std::string> warnings;
};

struct RankedTd {
    TreeDecomposition td;
    CostKey key;
};

struct TopN {
    std::vector<RankedTd> items;
    bool truncated = false;
    std::vector<std::string> warnings;
};

namespace detail {

/// Block DP keeping, per block and per signature, the n best partial decompositions.
class ConstrainedEngine {
public:
    ConstrainedEngine(const Hypergraph& h, const CandidateBagSet& bags, const Constraint& c, const ConstrainedOptions& opt,
                      std::size_t n)
        : h_(h), c_(c), opt_(opt), n_(n), k_(std::max(bags.k, 1)) {
        if (c_.partition) {
            if (c_.partition->size() != h.num_edges()) throw std::invalid_argument("partition labels do not match the edges");
            num_partitions_ = c_.partition_names.size();
            for (int l : *c_.partition) num_partitions_ = std::max(num_partitions_, static_cast<std::size_t>(l + 1));
            if (num_partitions_ > 64) throw std::invalid_argument("more than 64 partitions");
        }
        for (const auto& x : canonical_bags(bags)) {
            Cand cand;
            cand.bag = x;
            auto cover = bag_cover(h, x, k_, c_.concov);
            if (!cover) continue;   // fails ConCov, or not coverable at all
            cand.cover = *cover;
            cand.single = single_edge_coverable(h, x);
            if (c_.partition) {
                cand.labels = feasible_partitions(h, x, k_, *c_.partition, num_partitions_);
                if (cand.labels.empty()) continue;
            } else {
                cand.labels = {-1};
            }
            if (opt_.cost.kind == CostProvider::Kind::cardinality) {
                const auto& st = *opt_.cost.stats;
                cand.join = join_card(h, x, cand.cover, st).value;
                cand.bag_cost = bag_cost(h, x, cand.cover, st);
                cand.nonkey = non_key_attrs(h, x, cand.cover, st);
            } else if (opt_.cost.kind == CostProvider::Kind::replay) {
                cand.bag_cost = replay_node_cost(h, *opt_.cost.replay, x, cand.cover.size());
            }
            cands_.push_back(std::move(cand));
        }
    }

    /// Entries for (∅, C), best first.
    const std::vector<std::size_t>& root_entries(const VertexSet& comp) { return frontier(block_id({}, comp)); }

    TreeDecomposition build(std::size_t entry) const {
        TreeDecomposition td;
        build_rec(entry, -1, td);
        return td;
    }

    const CostKey& key(std::size_t entry) const { return entries_[entry].key; }
    std::size_t steps() const { return steps_; }

private:
    struct Cand {
        VertexSet bag;
        std::vector<edge_id> cover;
        bool single = false;
        std::vector<int> labels;
        double join = 0, bag_cost = 0;
        VertexSet nonkey;
    };

    struct Sig {
        VertexSet nk;          // non-key attributes of the subtree inside root ∩ head
        double rs = 0;         // ReducedSz of the root
        int depth = -1;        // deepest node needing more than one edge, -1 if none
        int label = -1;
        std::uint64_t used = 0;
        auto tie() const { return std::tie(nk, rs, depth, label, used); }
        friend bool operator<(const Sig& a, const Sig& b) { return a.tie() < b.tie(); }
    };

    struct Entry {
        std::size_t cand = 0;
        std::vector<std::size_t> kids;   // entry ids
        CostKey key;
        std::string canon;
        Sig sig;
    };

    std::size_t block_id(const VertexSet& s, const VertexSet& c) {
        auto [it, fresh] = block_index_.emplace(std::make_pair(s, c), blocks_.size());
        if (fresh) {
            blocks_.push_back({s, c});
            frontiers_.emplace_back();
            done_.push_back(false);
        }
        return it->second;
    }

    const std::vector<VertexSet>& components_of(const VertexSet& x) {
        auto it = comps_.find(x);
        if (it == comps_.end()) it = comps_.emplace(x, s_components_vertices(h_, x)).first;
        return it->second;
    }

    void tick() {
        if (++steps_ > opt_.max_steps) throw budget_exceeded("constrained search exceeded " + std::to_string(opt_.max_steps) + " steps");
    }

    int primary(const Entry& e) const {
        if (c_.shallowcyc) return e.sig.depth;
        if (c_.partition) return std::popcount(e.sig.used);
        return 0;
    }

    bool better(const Entry& a, const Entry& b) const {
        if (opt_.literal) {
            int pa = primary(a), pb = primary(b);
            if (pa != pb) return pa < pb;
        }
        return compare(a.key, b.key) < 0;
    }

    const std::vector<std::size_t>& frontier(std::size_t bid) {
        if (done_[bid]) return frontiers_[bid];
        const VertexSet s = blocks_[bid].first, c = blocks_[bid].second;
        const VertexSet sc = s | c;
        VertexSet d;
        for (auto v : c) d |= h_.neighbours(v);
        d = d & s;
        std::map<Sig, std::vector<Entry>> slots;
        for (std::size_t ci = 0; ci < cands_.size(); ++ci) {
            const auto& x = cands_[ci].bag;
            if (x == s || !x.subset_of(sc) || !d.subset_of(x)) continue;
            tick();
            std::vector<std::size_t> kid_blocks;
            for (const auto& y : components_of(x))
                if (y.subset_of(c)) kid_blocks.push_back(block_id(x, y));
            std::vector<const std::vector<std::size_t>*> kid_lists;
            bool ok = true;
            for (auto kb : kid_blocks) {
                const auto& f = frontier(kb);
                if (f.empty()) {
                    ok = false;
                    break;
                }
                kid_lists.push_back(&f);
            }
            if (!ok) continue;
            std::vector<std::size_t> pick(kid_lists.size(), 0);
            for (;;) {
                tick();
                for (int q : cands_[ci].labels) {
                    Entry e;
                    if (make_entry(ci, s, kid_lists, pick, q, e)) insert(slots, std::move(e));
                }
                std::size_t i = 0;
                for (; i < pick.size(); ++i) {
                    if (++pick[i] < kid_lists[i]->size()) break;
                    pick[i] = 0;
                }
                if (i == pick.size()) break;
            }
        }
        std::vector<std::size_t> out;
        for (auto& [sig, list] : slots)
            for (auto& e : list) {
                out.push_back(entries_.size());
                entries_.push_back(std::move(e));
            }
        std::stable_sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) { return better(entries_[a], entries_[b]); });
        frontiers_[bid] = std::move(out);
        done_[bid] = true;
        return frontiers_[bid];
    }

    void insert(std::map<Sig, std::vector<Entry>>& slots, Entry e) {
        Sig key = opt_.literal ? Sig{} : e.sig;
        auto& list = slots[key];
        auto pos = std::find_if(list.begin(), list.end(), [&](const Entry& o) { return better(e, o); });
        if (static_cast<std::size_t>(pos - list.begin()) >= n_) return;
        list.insert(pos, std::move(e));
        if (list.size() > n_) list.pop_back();
    }

    bool make_entry(std::size_t ci, const VertexSet& head, const std::vector<const std::vector<std::size_t>*>& kid_lists,
                    const std::vector<std::size_t>& pick, int q, Entry& e) const {
        const Cand& cand = cands_[ci];
        e.cand = ci;
        e.kids.resize(pick.size());
        for (std::size_t i = 0; i < pick.size(); ++i) e.kids[i] = (*kid_lists[i])[pick[i]];

        // cyclicity depth
        e.sig.depth = cand.single ? -1 : 0;
        for (auto k : e.kids) {
            int dk = entries_[k].sig.depth;
            if (dk >= 0) e.sig.depth = std::max(e.sig.depth, dk + 1);
        }
        if (c_.shallowcyc && e.sig.depth > *c_.shallowcyc) return false;

        // partition regions
        if (c_.partition) {
            const std::uint64_t qb = std::uint64_t{1} << q;
            std::uint64_t used = qb;
            for (auto k : e.kids) {
                const auto& ks = entries_[k].sig;
                if ((ks.used & qb) && ks.label != q) return false;
                if ((ks.used & ~qb) & (used & ~qb)) return false;
                used |= ks.used;
            }
            e.sig.label = q;
            e.sig.used = used;
        }

        double cost = 0;
        switch (opt_.cost.kind) {
        case CostProvider::Kind::cardinality: {
            VertexSet ra, nk = cand.nonkey;
            bool zero_child = false;
            double below = 0;
            for (auto k : e.kids) {
                const auto& ke = entries_[k];
                ra |= ke.sig.nk;
                nk |= ke.sig.nk;
                if (ke.sig.rs == 0) zero_child = true;
                below += ke.key.cost + xlogx(ke.sig.rs);
            }
            e.sig.rs = zero_child ? 0 : cand.join / (1.0 + static_cast<double>(ra.size()));
            double scan = (e.kids.empty() || zero_child) ? 0 : xlogx(cand.join);
            cost = cand.bag_cost + scan + below;
            e.sig.nk = nk & head;
            break;
        }
        case CostProvider::Kind::replay: {
            cost = cand.bag_cost;
            for (auto k : e.kids)
                cost += entries_[k].key.cost + replay_semijoin_cost(h_, *opt_.cost.replay, cand.bag, cands_[entries_[k].cand].bag);
            break;
        }
        case CostProvider::Kind::none: break;
        }

        // canonical form and bag sequence
        std::vector<std::size_t> order = e.kids;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return entries_[a].canon < entries_[b].canon; });
        e.canon = "(";
        for (auto v : cand.bag) e.canon += std::to_string(v) + ",";
        e.key.cost = cost;
        e.key.nodes = 1;
        e.key.bags = {cand.bag};
        for (auto k : order) {
            const auto& ke = entries_[k];
            e.canon += ke.canon;
            e.key.nodes += ke.key.nodes;
            e.key.bags.insert(e.key.bags.end(), ke.key.bags.begin(), ke.key.bags.end());
        }
        e.canon += ")";
        return true;
    }

    void build_rec(std::size_t entry, int parent, TreeDecomposition& td) const {
        const auto& e = entries_[entry];
        int node = td.add(cands_[e.cand].bag, parent);
        td.nodes[static_cast<std::size_t>(node)].cover = cands_[e.cand].cover;
        for (auto k : e.kids) build_rec(k, node, td);
    }

    const Hypergraph& h_;
    Constraint c_;
    ConstrainedOptions opt_;
    std::size_t n_;
    int k_;
    std::size_t num_partitions_ = 0;
    std::vector<Cand> cands_;
    std::vector<std::pair<VertexSet, VertexSet>> blocks_;
    std::map<std::pair<VertexSet, VertexSet>, std::size_t> block_index_;
    std::deque<std::vector<std::size_t>> frontiers_;   // stable under growth during recursion
    std::deque<char> done_;
    std::vector<Entry> entries_;
    std::map<VertexSet, std::vector<VertexSet>> comps_;
    std::size_t steps_ = 0;
};

inline std::vector<std::string> pairing_warnings(const Constraint& c, const ConstrainedOptions& opt) {
    std::vector<std::string> w;
    if (!opt.literal) return w;
    int global = (c.shallowcyc ? 1 : 0) + (c.partition ? 1 : 0);
    if (global > 1 || (global == 1 && c.concov))
        w.push_back("warning: no built-in preference-complete order for '" + c.describe() +
                    "'; the single-slot search may miss satisfying decompositions");
    return w;
}

} // namespace detail

/// Cheapest CompNF candidate tree decomposition satisfying the constraint.
inline ConstrainedResult solve_constrained(const Hypergraph& h, const CandidateBagSet& bags, const Constraint& c,
                                           const ConstrainedOptions& opt = {}) {
    ConstrainedResult res;
    res.warnings = detail::pairing_warnings(c, opt);
    if (h.num_vertices() == 0) {
        res.accepted = true;
        return res;
    }
    detail::ConstrainedEngine eng(h, bags, c, opt, 1);
    auto comps = connected_components(h);
    for (const auto& comp : comps) {
        const auto& roots = eng.root_entries(comp);
        if (roots.empty()) {
            res.steps = eng.steps();
            return res;
        }
        auto part = eng.build(roots.front());
        if (res.td.empty()) {
            res.td = std::move(part);
            res.key = eng.key(roots.front());
        } else {
            res.td.graft(part, res.td.root());
        }
    }
    if (comps.size() > 1) {
        res.key.cost = opt.cost.evaluate(h, res.td);
        res.key.nodes = res.td.size();
        res.key.bags = canonical_bag_sequence(res.td);
    }
    res.accepted = true;
    res.steps = eng.steps();
    return res;
}

/// Up to n distinct decompositions, cheapest first.
inline TopN enumerate_top_n(const Hypergraph& h, const CandidateBagSet& bags, const Constraint& c, std::size_t n,
                            ConstrainedOptions opt = {}) {
    if (n == 0) throw std::invalid_argument("top-n needs n >= 1");
    TopN out;
    opt.literal = false;
    auto comps = connected_components(h);
    if (comps.size() > 1) {
        if (n > 1) throw std::invalid_argument("top-n needs a connected hypergraph");
        auto r = solve_constrained(h, bags, c, opt);
        if (r.accepted) out.items.push_back({std::move(r.td), std::move(r.key)});
        return out;
    }
    if (comps.empty()) return out;
    try {
        detail::ConstrainedEngine eng(h, bags, c, opt, n);
        std::set<std::string> seen;
        for (auto id : eng.root_entries(comps[0])) {
            if (out.items.size() == n) break;
            auto td = eng.build(id);
            if (!seen.insert(canonical_form(td)).second) continue;
            out.items.push_back({std::move(td), eng.key(id)});
        }
    } catch (const budget_exceeded&) {
        out.truncated = true;
        out.items.clear();
        auto r = solve_constrained(h, bags, c, opt);
        if (r.accepted) out.items.push_back({std::move(r.td), std::move(r.key)});
    }
    return out;
}

} // namespace softdecomp

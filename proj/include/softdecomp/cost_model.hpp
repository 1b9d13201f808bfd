#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "decomposition.hpp"
#include "hypergraph.hpp"

namespace softdecomp {

/// Relation and bag-join cardinalities plus single-attribute keys.
struct StatsCatalog {
    std::map<edge_id, double> relation_card;
    std::map<VertexSet, double> bag_join_card;
    std::map<edge_id, VertexSet> primary_key;
    double cap = 1e9;   // ceiling for the product fallback

    double relation(const Hypergraph& h, edge_id e) const {
        auto it = relation_card.find(e);
        if (it == relation_card.end()) throw std::invalid_argument("no cardinality for relation '" + h.edge(e).name + "'");
        return it->second;
    }
};

class stats_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// x·log₂x, taken as 0 for x ≤ 1.
inline double xlogx(double x) { return x <= 1.0 ? 0.0 : x * std::log2(x); }

/// Reads `{"relations": {name: {"card": N, "key": [...]}}, "bags": [{"vars": [...], "card": N}], "cap": N}`.
inline StatsCatalog parse_stats(const Hypergraph& h, const std::string& text) {
    StatsCatalog s;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw stats_error(std::string("stats: ") + e.what());
    }
    if (j.contains("cap")) s.cap = j["cap"].get<double>();
    if (j.contains("relations")) {
        for (auto& [name, rel] : j["relations"].items()) {
            auto e = h.find_edge(name);
            if (!e) throw stats_error("stats: unknown relation '" + name + "'");
            if (!rel.contains("card")) throw stats_error("stats: relation '" + name + "' has no card");
            s.relation_card[*e] = rel["card"].get<double>();
            if (rel.contains("key") && !rel["key"].empty()) s.primary_key[*e] = h.vertex_set(rel["key"].get<std::vector<std::string>>());
        }
    }
    if (j.contains("bags")) {
        for (const auto& b : j["bags"])
            s.bag_join_card[h.vertex_set(b.at("vars").get<std::vector<std::string>>())] = b.at("card").get<double>();
    }
    return s;
}

inline std::string stats_to_json(const Hypergraph& h, const StatsCatalog& s) {
    nlohmann::json j;
    j["cap"] = s.cap;
    j["relations"] = nlohmann::json::object();
    for (const auto& [e, card] : s.relation_card) {
        nlohmann::json r;
        r["card"] = card;
        if (auto it = s.primary_key.find(e); it != s.primary_key.end()) {
            std::vector<std::string> key;
            for (auto v : it->second) key.push_back(h.vertex_name(v));
            r["key"] = key;
        }
        j["relations"][h.edge(e).name] = r;
    }
    j["bags"] = nlohmann::json::array();
    for (const auto& [bag, card] : s.bag_join_card) {
        std::vector<std::string> vars;
        for (auto v : bag) vars.push_back(h.vertex_name(v));
        j["bags"].push_back({{"vars", vars}, {"card", card}});
    }
    return j.dump(2);
}

struct JoinCard {
    double value = 0;
    bool estimated = false;
};

/// Smallest covering relation when the bag fits in one edge, else the capped product.
inline JoinCard fallback_join_card(const Hypergraph& h, const VertexSet& bag, const std::vector<edge_id>& cover,
                                   const StatsCatalog& stats) {
    if (cover.empty()) throw std::invalid_argument("fallback_join_card: empty cover");
    std::optional<double> inside;
    for (auto e : cover)
        if (bag.subset_of(h.edge_vertices(e))) {
            double r = stats.relation(h, e);
            inside = inside ? std::min(*inside, r) : r;
        }
    if (inside) return {*inside, false};
    double p = 1;
    for (auto e : cover) p *= stats.relation(h, e);
    if (p > stats.cap) return {stats.cap, true};
    return {p, true};
}

inline JoinCard join_card(const Hypergraph& h, const VertexSet& bag, const std::vector<edge_id>& cover, const StatsCatalog& stats) {
    if (auto it = stats.bag_join_card.find(bag); it != stats.bag_join_card.end()) return {it->second, false};
    if (cover.size() == 1 && bag == h.edge_vertices(cover[0])) return {stats.relation(h, cover[0]), false};
    return fallback_join_card(h, bag, cover, stats);
}

/// 0 for a single-relation cover, else |J| + Σ |R|·log₂|R|.
inline double bag_cost(const Hypergraph& h, const VertexSet& bag, const std::vector<edge_id>& cover, const StatsCatalog& stats) {
    if (cover.empty()) throw std::invalid_argument("bag_cost: empty cover for " + h.format(bag));
    if (cover.size() == 1) return 0;
    double c = join_card(h, bag, cover, stats).value;
    for (auto e : cover) c += xlogx(stats.relation(h, e));
    return c;
}

/// Bag vertices that a cover relation carries without being its key.
inline VertexSet non_key_attrs(const Hypergraph& h, const VertexSet& bag, const std::vector<edge_id>& cover, const StatsCatalog& stats) {
    VertexSet out;
    for (auto e : cover) {
        auto k = stats.primary_key.find(e);
        for (auto v : bag & h.edge_vertices(e)) {
            bool is_key = k != stats.primary_key.end() && k->second == VertexSet{v};
            if (!is_key) out.insert(v);
        }
    }
    return out;
}

/// Attributes of B_p met in a strict descendant through a relation that does not have them as key.
inline VertexSet reduce_attrs(const Hypergraph& h, const TreeDecomposition& td, int p, const StatsCatalog& stats) {
    auto ch = td.children();
    VertexSet found;
    std::vector<int> stack(ch[static_cast<std::size_t>(p)].begin(), ch[static_cast<std::size_t>(p)].end());
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        const auto& n = td.nodes[static_cast<std::size_t>(u)];
        found |= non_key_attrs(h, n.bag, n.cover, stats);
        for (int c : ch[static_cast<std::size_t>(u)]) stack.push_back(c);
    }
    return found & td.nodes[static_cast<std::size_t>(p)].bag;
}

struct NodeCost {
    double join_card = 0;
    bool estimated = false;
    double bag_cost = 0;
    double reduced_size = 0;
    double scan_cost = 0;
    double subtree_cost = 0;
    VertexSet reduce_attrs;
};

struct CostReport {
    std::vector<NodeCost> nodes;
    double total = 0;
    bool estimated = false;
};

/// Bottom-up evaluation of the cardinality cost over a tree with covers attached.
inline CostReport subtree_cost(const Hypergraph& h, const TreeDecomposition& td, const StatsCatalog& stats) {
    CostReport r;
    r.nodes.resize(td.size());
    if (td.empty()) return r;
    auto ch = td.children();
    std::vector<int> order{td.root()};
    for (std::size_t i = 0; i < order.size(); ++i)
        for (int c : ch[static_cast<std::size_t>(order[i])]) order.push_back(c);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const auto u = static_cast<std::size_t>(*it);
        const auto& n = td.nodes[u];
        if (n.cover.empty()) throw std::invalid_argument("subtree_cost: node " + std::to_string(u) + " has no cover");
        auto& nc = r.nodes[u];
        auto jc = join_card(h, n.bag, n.cover, stats);
        nc.join_card = jc.value;
        nc.estimated = jc.estimated;
        r.estimated = r.estimated || jc.estimated;
        nc.bag_cost = bag_cost(h, n.bag, n.cover, stats);
        nc.reduce_attrs = reduce_attrs(h, td, *it, stats);
        bool zero_child = false;
        double below = 0;
        for (int c : ch[u]) {
            const auto& cc = r.nodes[static_cast<std::size_t>(c)];
            if (cc.reduced_size == 0) zero_child = true;
            below += cc.subtree_cost + xlogx(cc.reduced_size);
        }
        nc.reduced_size = zero_child ? 0 : nc.join_card / (1.0 + static_cast<double>(nc.reduce_attrs.size()));
        nc.scan_cost = (ch[u].empty() || zero_child) ? 0 : xlogx(nc.join_card);
        nc.subtree_cost = nc.bag_cost + nc.scan_cost + below;
    }
    r.total = r.nodes[static_cast<std::size_t>(td.root())].subtree_cost;
    return r;
}

/// Replayed per-bag and per-semijoin cost estimates exported from a DBMS.
struct ReplayCosts {
    std::map<VertexSet, double> bag;
    std::map<std::pair<VertexSet, VertexSet>, double> semijoin;   // (parent, child)
};

/// Reads `{"bags": [{"vars": [...], "cost": X}], "semijoins": [{"parent": [...], "child": [...], "cost": X}]}`.
inline ReplayCosts parse_replay_costs(const Hypergraph& h, const std::string& text) {
    ReplayCosts r;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw stats_error(std::string("cost file: ") + e.what());
    }
    auto vars = [&](const nlohmann::json& a) { return h.vertex_set(a.get<std::vector<std::string>>()); };
    if (j.contains("bags"))
        for (const auto& b : j["bags"]) r.bag[vars(b.at("vars"))] = b.at("cost").get<double>();
    if (j.contains("semijoins"))
        for (const auto& s : j["semijoins"]) r.semijoin[{vars(s.at("parent")), vars(s.at("child"))}] = s.at("cost").get<double>();
    return r;
}

inline double replay_bag_estimate(const Hypergraph& h, const ReplayCosts& rc, const VertexSet& bag) {
    auto it = rc.bag.find(bag);
    if (it == rc.bag.end()) throw std::invalid_argument("cost file has no entry for bag " + h.format(bag));
    return it->second;
}

/// Bag cost: the estimate, or 0 for a single-relation cover.
inline double replay_node_cost(const Hypergraph& h, const ReplayCosts& rc, const VertexSet& bag, std::size_t cover_size) {
    return cover_size == 1 ? 0.0 : replay_bag_estimate(h, rc, bag);
}

/// Semi-join term, floored at 1 against noisy estimates.
inline double replay_semijoin_cost(const Hypergraph& h, const ReplayCosts& rc, const VertexSet& parent, const VertexSet& child) {
    auto it = rc.semijoin.find({parent, child});
    if (it == rc.semijoin.end())
        throw std::invalid_argument("cost file has no semijoin " + h.format(parent) + " <| " + h.format(child));
    return std::max(it->second - replay_bag_estimate(h, rc, parent) - replay_bag_estimate(h, rc, child), 1.0);
}

inline double replay_subtree_cost(const Hypergraph& h, const TreeDecomposition& td, const ReplayCosts& rc) {
    if (td.empty()) return 0;
    auto ch = td.children();
    std::function<double(int)> rec = [&](int u) {
        const auto& n = td.nodes[static_cast<std::size_t>(u)];
        double c = replay_node_cost(h, rc, n.bag, n.cover.size());
        for (int k : ch[static_cast<std::size_t>(u)])
            c += rec(k) + replay_semijoin_cost(h, rc, n.bag, td.nodes[static_cast<std::size_t>(k)].bag);
        return c;
    };
    return rec(td.root());
}

/// Which cost drives the ordering of decompositions.
struct CostProvider {
    enum class Kind { none, cardinality, replay };
    Kind kind = Kind::none;
    const StatsCatalog* stats = nullptr;
    const ReplayCosts* replay = nullptr;

    static CostProvider cardinality(const StatsCatalog& s) { return {Kind::cardinality, &s, nullptr}; }
    static CostProvider replayed(const ReplayCosts& r) { return {Kind::replay, nullptr, &r}; }

    /// Recomputes the cost of a complete tree from scratch.
    double evaluate(const Hypergraph& h, const TreeDecomposition& td) const {
        switch (kind) {
        case Kind::cardinality: return subtree_cost(h, td, *stats).total;
        case Kind::replay: return replay_subtree_cost(h, td, *replay);
        case Kind::none: break;
        }
        return 0;
    }
};

} // namespace softdecomp

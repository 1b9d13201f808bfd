#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <softdecomp/softdecomp.hpp>

namespace testsupport {

using namespace softdecomp;

/// Connected hypergraph without isolated vertices; at least 2 vertices.
inline Hypergraph random_hypergraph(std::mt19937& rng, int max_v = 8, int max_e = 8, int max_size = 4, int min_v = 2,
                                    int min_e = 1, int min_size = 1) {
    for (;;) {
        int n = std::uniform_int_distribution<int>(min_v, max_v)(rng);
        int m = std::uniform_int_distribution<int>(min_e, max_e)(rng);
        std::vector<std::pair<std::string, std::vector<std::string>>> edges;
        std::vector<char> used(static_cast<std::size_t>(n), 0);
        for (int i = 0; i < m; ++i) {
            int sz = std::uniform_int_distribution<int>(std::min(min_size, n), std::min(max_size, n))(rng);
            std::vector<int> vs(static_cast<std::size_t>(n));
            for (int v = 0; v < n; ++v) vs[static_cast<std::size_t>(v)] = v;
            std::shuffle(vs.begin(), vs.end(), rng);
            std::vector<std::string> names;
            for (int j = 0; j < sz; ++j) {
                names.push_back("v" + std::to_string(vs[static_cast<std::size_t>(j)]));
                used[static_cast<std::size_t>(vs[static_cast<std::size_t>(j)])] = 1;
            }
            edges.push_back({"e" + std::to_string(i), names});
        }
        if (std::count(used.begin(), used.end(), 0) > 0) continue;
        auto h = Hypergraph::from_named_edges(edges);
        if (h.num_vertices() < 2 || connected_components(h).size() != 1) continue;
        return h;
    }
}

/// Least k in [1, |E|] for which the predicate holds.
template <class F>
int min_k(const Hypergraph& h, F accepts) {
    for (int k = 1; k <= static_cast<int>(h.num_edges()); ++k)
        if (accepts(k)) return k;
    return std::numeric_limits<int>::max();
}

/// Nested-loop join of all atoms, projected to the output variables.
inline std::set<std::vector<Value>> naive_eval(const ConjunctiveQuery& q, const Database& db) {
    std::set<std::vector<Value>> out;
    std::map<std::string, Value> env;
    auto outv = q.output_vars();
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == q.atoms.size()) {
            std::vector<Value> row;
            for (const auto& v : outv) row.push_back(env.at(v));
            out.insert(row);
            return;
        }
        const auto& a = q.atoms[i];
        for (const auto& t : db.at(a.relation).rows) {
            auto saved = env;
            bool ok = true;
            for (std::size_t j = 0; j < a.vars.size() && ok; ++j) {
                auto it = env.find(a.vars[j]);
                if (it == env.end()) env[a.vars[j]] = t[j];
                else ok = it->second == t[j];
            }
            if (ok) rec(i + 1);
            env = std::move(saved);
        }
    };
    rec(0);
    return out;
}

/// The covers the optimiser assigns: a minimum (connected when required) cover per bag.
inline std::optional<TreeDecomposition> with_covers(const Hypergraph& h, TreeDecomposition td, int k, bool connected) {
    for (auto& n : td.nodes) {
        auto c = bag_cover(h, n.bag, k, connected);
        if (!c) return std::nullopt;
        n.cover = *c;
    }
    return td;
}

/// Random catalog: relation sizes in [0, 40] (zero now and then), optional
/// single-attribute keys, join cardinalities for some of the given bags.
inline StatsCatalog random_stats(std::mt19937& rng, const Hypergraph& h, const std::vector<VertexSet>& bags) {
    StatsCatalog s;
    std::uniform_int_distribution<int> card(0, 40), coin(0, 9), big(0, 400);
    for (edge_id e = 0; e < h.num_edges(); ++e) {
        s.relation_card[e] = coin(rng) == 0 ? 0 : card(rng);
        if (coin(rng) < 4) {
            const auto& vs = h.edge_vertices(e);
            auto pick = std::uniform_int_distribution<std::size_t>(0, vs.size() - 1)(rng);
            s.primary_key[e] = VertexSet{*(vs.begin() + static_cast<std::ptrdiff_t>(pick))};
        }
    }
    for (const auto& b : bags)
        if (coin(rng) < 6) s.bag_join_card[b] = coin(rng) == 0 ? 0 : big(rng);
    return s;
}

} // namespace testsupport

#include <gtest/gtest.h>

#include "support.hpp"

using namespace softdecomp;

TEST(SoftBags, H2ExampleBag) {
    auto h = gallery("H2").hypergraph;
    auto bags = soft_bags(h, 2);
    EXPECT_TRUE(bags.contains(h.vertex_set({"2", "6", "7", "a", "b"})));
    for (const auto& b : bags.bags()) EXPECT_FALSE(b.vertices.empty());
}

TEST(SoftBags, SingleEdge) {
    auto h = parse_hypergraph("e(a,b)");
    auto bags = soft_bags(h, 1);
    EXPECT_TRUE(bags.contains(h.all_vertices()));
}

TEST(SoftBags, WitnessReproducesBag) {
    std::mt19937 rng(3);
    for (int i = 0; i < 40; ++i) {
        auto h = testsupport::random_hypergraph(rng, 7, 6, 3);
        for (int k = 1; k <= 2; ++k) {
            auto bags = soft_bags(h, k);
            for (const auto& b : bags.bags()) {
                ASSERT_LE(b.witness.lambda1.size(), static_cast<std::size_t>(k));
                ASSERT_LE(b.witness.lambda2.size(), static_cast<std::size_t>(k));
                VertexSet u1, sep, comp;
                for (auto p : b.witness.lambda1) u1 |= bags.edge_pool[p].vertices;
                for (auto e : b.witness.lambda2) sep |= h.edge_vertices(e);
                if (!b.witness.component) {
                    comp = h.all_vertices();
                } else {
                    for (auto e : *b.witness.component) comp |= h.edge_vertices(e);
                    // the witness component is one of the [sep]-components
                    bool found = false;
                    for (const auto& c : lambda_components(h, sep)) found |= c.edge_ids == *b.witness.component;
                    EXPECT_TRUE(found);
                }
                EXPECT_EQ(u1 & comp, b.vertices);
            }
        }
    }
}

/// Independent enumeration of the defining formula over all lambda pairs.
std::set<VertexSet> brute_soft(const Hypergraph& h, int k) {
    std::vector<VertexSet> unions{{}};
    std::function<void(std::size_t, int, VertexSet)> rec = [&](std::size_t from, int left, VertexSet acc) {
        for (std::size_t e = from; e < h.num_edges() && left > 0; ++e) {
            auto next = acc | h.edge_vertices(static_cast<edge_id>(e));
            unions.push_back(next);
            rec(e + 1, left - 1, next);
        }
    };
    rec(0, k, {});
    std::set<VertexSet> out;
    for (const auto& sep : unions) {
        std::vector<VertexSet> comps;
        if (sep.empty()) comps.push_back(h.all_vertices());
        else
            for (const auto& c : lambda_components(h, sep)) comps.push_back(c.vertices(h));
        for (const auto& c : comps)
            for (const auto& l1 : unions) {
                auto b = l1 & c;
                if (!b.empty()) out.insert(b);
            }
    }
    return out;
}

TEST(SoftBags, MatchesBruteForce) {
    std::mt19937 rng(17);
    for (int i = 0; i < 60; ++i) {
        auto h = testsupport::random_hypergraph(rng, 7, 6, 3);
        for (int k = 1; k <= 3; ++k) {
            auto got = soft_bags(h, k).vertex_sets();
            EXPECT_EQ(std::set<VertexSet>(got.begin(), got.end()), brute_soft(h, k)) << serialize_hypergraph(h) << " k=" << k;
        }
    }
}

TEST(SoftBags, Deterministic) {
    auto h = gallery("H2").hypergraph;
    EXPECT_EQ(soft_bags(h, 2).vertex_sets(), soft_bags(h, 2).vertex_sets());
}

TEST(SoftBags, BudgetIsAnError) {
    auto h = gallery("H3").hypergraph;
    Budget b;
    b.max_bags = 10;
    EXPECT_THROW(soft_bags(h, 2, b), budget_exceeded);
}

TEST(Intersections, Basics) {
    EXPECT_EQ(pairwise_intersections({{1, 2}}, {{2, 3}}), std::vector<VertexSet>{{2}});
    auto r = pairwise_intersections({{1, 2}, {3}}, {{1, 2}, {3}});
    EXPECT_EQ(std::set<VertexSet>(r.begin(), r.end()), (std::set<VertexSet>{{1, 2}, {3}}));
}

TEST(Levels, H3PrimeSubedge) {
    auto h = gallery("H3prime").hypergraph;
    auto l0 = soft_bags(h, 3);
    auto pool = next_edge_pool(l0);
    auto hor1 = h.edge_vertices(*h.find_edge("hor1"));
    auto want = hor1 - h.vertex_set({"4'"});
    bool found = false;
    for (const auto& p : pool) found |= p.vertices == want;
    EXPECT_TRUE(found);
}

TEST(Levels, H3PrimeRootBag) {
    auto h = gallery("H3prime").hypergraph;
    auto root = h.vertex_set({"g11", "g12", "g21", "g22", "h11", "h12", "h21", "h22", "3", "0'", "0"});
    EXPECT_TRUE(soft_bags_level(h, 3, 1).contains(root));
}

TEST(Levels, LevelZeroIsSoft) {
    auto h = gallery("H2").hypergraph;
    EXPECT_EQ(soft_bags_level(h, 2, 0).vertex_sets(), soft_bags(h, 2).vertex_sets());
}

TEST(Levels, Monotone) {
    std::mt19937 rng(23);
    for (int i = 0; i < 40; ++i) {
        auto h = testsupport::random_hypergraph(rng, 7, 6, 3);
        auto prev = soft_bags(h, 2);
        for (int lv = 1; lv <= 2; ++lv) {
            auto next = iterate_level(h, 2, prev);
            for (const auto& b : prev.bags()) EXPECT_TRUE(next.contains(b.vertices));
            for (const auto& p : prev.edge_pool) {
                bool found = false;
                for (const auto& q : next.edge_pool) found |= q.vertices == p.vertices;
                EXPECT_TRUE(found);
            }
            for (const auto& p : next.edge_pool) EXPECT_TRUE(p.vertices.subset_of(h.edge_vertices(p.origin)));
            // every bag is covered by at most k pool members
            std::vector<VertexSet> sets;
            for (const auto& p : next.edge_pool) sets.push_back(p.vertices);
            for (const auto& b : next.bags()) EXPECT_TRUE(min_cover(b.vertices, sets, 2).has_value());
            prev = std::move(next);
        }
    }
}

TEST(Levels, FixpointIsStable) {
    std::mt19937 rng(29);
    for (int i = 0; i < 20; ++i) {
        auto h = testsupport::random_hypergraph(rng, 6, 5, 3);
        auto cur = soft_bags(h, 2);
        int steps = 0;
        for (;;) {
            auto next = iterate_level(h, 2, cur);
            bool same = next.vertex_sets() == cur.vertex_sets() && next.edge_pool.size() == cur.edge_pool.size();
            cur = std::move(next);
            if (same) break;
            ASSERT_LT(++steps, 3 * static_cast<int>(h.num_vertices()) + 1);
        }
        auto after = iterate_level(h, 2, iterate_level(h, 2, cur));
        EXPECT_EQ(after.vertex_sets(), cur.vertex_sets());
    }
}

TEST(Format, BagLine) {
    auto h = gallery("H2").hypergraph;
    auto bags = soft_bags(h, 2);
    auto line = format_bag_line(h, bags, bags.bags().front());
    EXPECT_EQ(line.rfind("bag ", 0), 0u);
    EXPECT_NE(line.find("| lambda1 "), std::string::npos);
    EXPECT_NE(line.find("| level 0"), std::string::npos);
}

TEST(CoverBags, TableCounts) {
    auto q = sql_to_cq(gallery("q_ds").sql);
    auto cb = cover_bags(q.hypergraph, 2);
    EXPECT_EQ(cb.size(), 9u);
    EXPECT_EQ(std::count_if(cb.begin(), cb.end(), [](const CoverBag& b) { return b.connected; }), 8);
}

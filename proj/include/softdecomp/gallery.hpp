#pragma once

#include <cctype>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "decomposition.hpp"
#include "hypergraph.hpp"

namespace softdecomp {

struct KnownWidth {
    int value = 0;
    std::string source;
};

struct GalleryEntry {
    std::string name;
    Hypergraph hypergraph;
    std::map<std::string, KnownWidth> known_widths;
    std::string sql;                                   // source query, when the entry is one
    std::vector<std::vector<std::string>> td_bags;      // reference decomposition, parents first
    std::vector<int> td_parents;

    std::optional<TreeDecomposition> reference_td() const {
        if (td_bags.empty()) return std::nullopt;
        TreeDecomposition td;
        for (std::size_t i = 0; i < td_bags.size(); ++i) td.add(hypergraph.vertex_set(td_bags[i]), td_parents[i]);
        return td;
    }
};

namespace gallery_data {

inline constexpr const char* h2 = R"hg(
e1(1,8), e2(3,4), e3(1,2,a), e4(4,5,a), e5(6,7,a), e6(2,3,b), e7(5,6,b), e8(7,8,b)
)hg";

inline constexpr const char* h3 = R"hg(
e1(g11,0), e2(g11,1), e3(g11,2), e4(g11,3), e5(g11,4), e6(g11,0'),
e7(g11,1'), e8(g11,2'), e9(g11,3'), e10(g11,4'), e11(g12,0), e12(g12,1),
e13(g12,2), e14(g12,3), e15(g12,4), e16(g12,0'), e17(g12,1'), e18(g12,2'),
e19(g12,3'), e20(g12,4'), e21(g21,0), e22(g21,1), e23(g21,2), e24(g21,3),
e25(g21,4), e26(g21,0'), e27(g21,1'), e28(g21,2'), e29(g21,3'), e30(g21,4'),
e31(g22,0), e32(g22,1), e33(g22,2), e34(g22,3), e35(g22,4), e36(g22,0'),
e37(g22,1'), e38(g22,2'), e39(g22,3'), e40(g22,4'), e41(h11,0), e42(h11,1),
e43(h11,2), e44(h11,3), e45(h11,4), e46(h11,0'), e47(h11,1'), e48(h11,2'),
e49(h11,3'), e50(h11,4'), e51(h12,0), e52(h12,1), e53(h12,2), e54(h12,3),
e55(h12,4), e56(h12,0'), e57(h12,1'), e58(h12,2'), e59(h12,3'), e60(h12,4'),
e61(h21,0), e62(h21,1), e63(h21,2), e64(h21,3), e65(h21,4), e66(h21,0'),
e67(h21,1'), e68(h21,2'), e69(h21,3'), e70(h21,4'), e71(h22,0), e72(h22,1),
e73(h22,2), e74(h22,3), e75(h22,4), e76(h22,0'), e77(h22,1'), e78(h22,2'),
e79(h22,3'), e80(h22,4'), e81(2,4), e82(2',4'), e83(0,0'), e84(0,1),
e85(1,2), e86(0,3), e87(2,3), e88(0',1'), e89(1',2'), e90(0',3'),
e91(2',3'), hor1(g11,g12,h11,h12,4'), hor2(g21,g22,h21,h22,3), vert1(g11,g21,h11,h21,4), vert2(g12,g22,h12,h22,3')
)hg";

inline constexpr const char* h3prime = R"hg(
e1(g11,0), e2(g11,1), e3(g11,2), e4(g11,3), e5(g11,4), e6(g11,0'),
e7(g11,1'), e8(g11,2'), e9(g11,3'), e10(g11,4'), e11(g12,0), e12(g12,1),
e13(g12,2), e14(g12,3), e15(g12,4), e16(g12,0'), e17(g12,1'), e18(g12,2'),
e19(g12,3'), e20(g12,4'), e21(g21,0), e22(g21,1), e23(g21,2), e24(g21,3),
e25(g21,4), e26(g21,0'), e27(g21,1'), e28(g21,2'), e29(g21,3'), e30(g21,4'),
e31(g22,0), e32(g22,1), e33(g22,2), e34(g22,3), e35(g22,4), e36(g22,0'),
e37(g22,1'), e38(g22,2'), e39(g22,3'), e40(g22,4'), e41(h11,0), e42(h11,1),
e43(h11,2), e44(h11,3), e45(h11,4), e46(h11,0'), e47(h11,1'), e48(h11,2'),
e49(h11,3'), e50(h11,4'), e51(h12,0), e52(h12,1), e53(h12,2), e54(h12,3),
e55(h12,4), e56(h12,0'), e57(h12,1'), e58(h12,2'), e59(h12,3'), e60(h12,4'),
e61(h21,0), e62(h21,1), e63(h21,2), e64(h21,3), e65(h21,4), e66(h21,0'),
e67(h21,1'), e68(h21,2'), e69(h21,3'), e70(h21,4'), e71(h22,0), e72(h22,1),
e73(h22,2), e74(h22,3), e75(h22,4), e76(h22,0'), e77(h22,1'), e78(h22,2'),
e79(h22,3'), e80(h22,4'), e81(2,4), e82(2',4'), e83(0,0'), e84(0,1),
e85(1,2), e86(0,3), e87(2,3), e88(0',1'), e89(1',2'), e90(0',3'),
e91(2',3'), hor1(g11,g12,h11,h12,4'), hor2(g21,g22,h21,h22,3), vert1(g11,g21,h11,h21,4), vert2(g12,g22,h12,h22,3'),
e92(3',4')
)hg";

inline constexpr const char* q_ds_sql = R"sql(
SELECT MIN(ws_bill_customer_sk)
FROM   web_sales, 
       customer, 
       customer_address,
       catalog_sales,
       warehouse
WHERE  ws_bill_customer_sk = c_customer_sk 
       AND ca_address_sk =  c_current_addr_sk 
       AND c_current_addr_sk = cs_bill_addr_sk
       AND cs_warehouse_sk = w_warehouse_sk
       AND  w_warehouse_sq_ft = ws_quantity
)sql";

inline constexpr const char* q_hto_sql = R"sql(
SELECT MIN(hetio45173_0.s)
FROM   hetio45173 AS hetio45173_0, hetio45173 AS hetio45173_1, 
       hetio45160 AS hetio45160_2, hetio45160 AS hetio45160_3, 
       hetio45160 AS hetio45160_4, hetio45159 AS hetio45159_5, 
       hetio45159 AS hetio45159_6 
WHERE  hetio45173_0.s = hetio45173_1.s AND hetio45173_0.d = hetio45160_2.s AND 
       hetio45173_1.d = hetio45160_3.s AND hetio45160_2.d = hetio45160_3.d AND 
       hetio45160_3.d = hetio45160_4.s AND hetio45160_4.s = hetio45159_5.s AND 
       hetio45160_4.d = hetio45159_6.s AND hetio45159_5.d = hetio45159_6.d
)sql";

inline constexpr const char* q_hto2_sql = R"sql(
SELECT  MAX(hetio45160.d) 
FROM    hetio45173 AS hetio45173_0, hetio45173 AS hetio45173_1, hetio45173 AS
        hetio45173_2, hetio45173 AS hetio45173_3, hetio45160, hetio45176 AS
        hetio45176_5, hetio45176 AS hetio45176_6 
WHERE   hetio45173_0.s = hetio45173_1.s AND hetio45173_0.d = hetio45173_2.s AND 
        hetio45173_1.d = hetio45173_3.s AND hetio45173_2.d = hetio45173_3.d AND 
        hetio45173_3.d = hetio45160.s AND hetio45160.s = hetio45176_5.s AND 
        hetio45160.d = hetio45176_6.s AND hetio45176_5.d = hetio45176_6.d
)sql";

inline constexpr const char* q_hto3_sql = R"sql(
SELECT  MIN(hetio45173_2.d)
FROM    hetio45173 AS hetio45173_0, hetio45173 AS hetio45173_1, hetio45173 AS 
        hetio45173_2, hetio45173 AS hetio45173_3 
WHERE   hetio45173_0.s = hetio45173_1.s AND hetio45173_0.d = hetio45173_2.s 
        AND hetio45173_1.d = hetio45173_3.d AND hetio45173_2.d = hetio45173_3.s
)sql";

inline constexpr const char* q_hto4_sql = R"sql(
SELECT  MIN(hetio45160_0.s) 
FROM    hetio45160 AS hetio45160_0, hetio45160 AS hetio45160_1, 
        hetio45177, hetio45160 AS hetio45160_3, hetio45159 AS
        hetio45159_4, hetio45159 AS hetio45159_5 
WHERE   hetio45160_0.s = hetio45160_1.s AND hetio45160_0.d = hetio45177.s 
        AND hetio45160_1.d = hetio45177.d AND hetio45177.d = hetio45160_3.s 
        AND hetio45160_3.s = hetio45159_4.s AND hetio45160_3.d = hetio45159_5.s 
        AND hetio45159_4.d = hetio45159_5.d
)sql";

inline constexpr const char* q_lb_sql = R"sql(
SELECT MIN(pkp1.Person1Id)
FROM City AS CityA
JOIN City AS CityB
  ON CityB.isPartOf_CountryId = CityA.isPartOf_CountryId
JOIN City AS CityC
  ON CityC.isPartOf_CountryId = CityA.isPartOf_CountryId
JOIN Person AS PersonA
  ON PersonA.isLocatedIn_CityId = CityA.CityId
JOIN Person AS PersonB
  ON PersonB.isLocatedIn_CityId = CityB.CityId
JOIN Person_knows_Person AS pkp1
  ON pkp1.Person1Id = PersonA.PersonId
 AND pkp1.Person2Id = PersonB.PersonId
)sql";

inline constexpr const char* q_ds = R"hg(
web_sales(X1,X4), customer(X1,X2), customer_address(X2), catalog_sales(X2,X3), warehouse(X3,X4)
)hg";

inline constexpr const char* q_hto = R"hg(
hetio45173_0(A,B), hetio45173_1(A,C), hetio45160_2(B,D), hetio45160_3(C,D), hetio45160_4(D,E), hetio45159_5(D,F), hetio45159_6(E,F)
)hg";

inline constexpr const char* q_hto2 = R"hg(
hetio45173_0(A,B), hetio45173_1(A,C), hetio45173_2(B,D), hetio45173_3(C,D), hetio45160(D,E), hetio45176_5(D,F), hetio45176_6(E,F)
)hg";

inline constexpr const char* q_hto3 = R"hg(
hetio45173_0(A,B), hetio45173_1(A,C), hetio45173_2(B,D), hetio45173_3(D,C)
)hg";

inline constexpr const char* q_hto4 = R"hg(
hetio45160_0(A,B), hetio45160_1(A,C), hetio45177(B,C), hetio45160_3(C,D), hetio45159_4(C,E), hetio45159_5(D,E)
)hg";

inline constexpr const char* q_lb = R"hg(
CityA(co,cA), CityB(co,cB), CityC(co), PersonA(cA,pA), PersonB(cB,pB), pkp1(pA,pB)
)hg";

} // namespace gallery_data

inline Hypergraph cycle_hypergraph(int n) {
    if (n < 2) throw std::invalid_argument("cycle length must be at least 2");
    std::vector<std::pair<std::string, std::vector<std::string>>> edges;
    for (int i = 1; i <= n; ++i)
        edges.push_back({"e" + std::to_string(i), {"v" + std::to_string(i), "v" + std::to_string(i % n + 1)}});
    return Hypergraph::from_named_edges(edges);
}

inline std::vector<std::string> gallery_names() {
    return {"H2", "H3", "H3prime", "C_5", "q_ds", "q_hto", "q_hto2", "q_hto3", "q_hto4", "q_lb"};
}

/// Named hypergraphs with their published widths. "C_n"/"Cn" is parametric.
inline GalleryEntry gallery(const std::string& name) {
    using namespace gallery_data;
    GalleryEntry g;
    g.name = name;
    const std::string pub = "published", der = "derived";
    auto gh = std::vector<std::string>{"g11", "g12", "g21", "g22", "h11", "h12", "h21", "h22"};
    auto with_gh = [&](std::vector<std::string> extra) {
        auto b = gh;
        b.insert(b.end(), extra.begin(), extra.end());
        return b;
    };
    if (name == "H2") {
        g.hypergraph = parse_hypergraph(h2);
        g.known_widths = {{"ghw", {2, pub}}, {"shw", {2, pub}}, {"hw", {3, pub}}};
        g.td_bags = {{"2", "6", "7", "a", "b"}, {"1", "2", "7", "8", "a", "b"}, {"2", "5", "6", "a", "b"},
                     {"2", "3", "4", "5", "a", "b"}};
        g.td_parents = {-1, 0, 0, 2};
    } else if (name == "H3") {
        g.hypergraph = parse_hypergraph(h3);
        g.known_widths = {{"ghw", {3, pub}}, {"shw", {3, pub}}, {"hw", {4, pub}}};
        g.td_bags = {with_gh({"3", "0'", "0"}),  with_gh({"3'", "0'", "1'"}), with_gh({"3'", "1'", "2'"}),
                     with_gh({"3'", "2'", "4'"}), with_gh({"3", "0", "1"}),    with_gh({"3", "1", "2"}),
                     with_gh({"4", "2"})};
        g.td_parents = {-1, 0, 1, 2, 0, 4, 5};
    } else if (name == "H3prime") {
        g.hypergraph = parse_hypergraph(h3prime);
        g.known_widths = {{"ghw", {3, pub}}, {"shw1", {3, pub}}, {"shw", {4, pub}}, {"hw", {4, pub}}};
    } else if (name.size() > 1 && name[0] == 'C' && (name[1] == '_' || std::isdigit(static_cast<unsigned char>(name[1])))) {
        int n = std::stoi(name.substr(name[1] == '_' ? 2 : 1));
        g.hypergraph = cycle_hypergraph(n);
        if (n == 5) g.known_widths = {{"hw", {2, pub}}, {"shw", {2, der}}, {"concov_shw", {3, pub}}};
    } else if (name == "q_ds") {
        g.hypergraph = parse_hypergraph(q_ds);
        g.sql = q_ds_sql;
        g.known_widths = {{"concov_shw", {2, pub}}};
    } else if (name == "q_hto") {
        g.hypergraph = parse_hypergraph(q_hto);
        g.sql = q_hto_sql;
        g.known_widths = {{"concov_shw", {2, pub}}};
    } else if (name == "q_hto2") {
        g.hypergraph = parse_hypergraph(q_hto2);
        g.sql = q_hto2_sql;
        g.known_widths = {{"concov_shw", {2, pub}}};
    } else if (name == "q_hto3") {
        g.hypergraph = parse_hypergraph(q_hto3);
        g.sql = q_hto3_sql;
        g.known_widths = {{"concov_shw", {2, pub}}};
    } else if (name == "q_hto4") {
        g.hypergraph = parse_hypergraph(q_hto4);
        g.sql = q_hto4_sql;
        g.known_widths = {{"concov_shw", {2, pub}}};
    } else if (name == "q_lb") {
        g.hypergraph = parse_hypergraph(q_lb);
        g.sql = q_lb_sql;
        g.known_widths = {{"concov_shw", {3, pub}}};
    } else {
        throw std::invalid_argument("unknown gallery entry '" + name + "'");
    }
    return g;
}

} // namespace softdecomp

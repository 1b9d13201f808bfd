#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "decomposition.hpp"
#include "hypergraph.hpp"

namespace softdecomp {

struct Atom {
    std::string name;                   // edge name, unique within the query
    std::string relation;               // relation looked up in the database
    std::vector<std::string> vars;      // one per position, repeats allowed
    std::vector<std::string> columns;   // source column per position (SQL input only)
};

enum class Aggregate { none, min, max };

struct OutputTerm {
    std::string var;
    Aggregate agg = Aggregate::none;
};

struct ConjunctiveQuery {
    std::vector<Atom> atoms;
    std::vector<OutputTerm> output;     // empty: Boolean query
    std::vector<std::string> warnings;

    bool boolean() const { return output.empty(); }
    std::vector<std::string> output_vars() const {
        std::vector<std::string> v;
        for (const auto& o : output)
            if (std::find(v.begin(), v.end(), o.var) == v.end()) v.push_back(o.var);
        return v;
    }
};

/// One edge per atom (named after it), vertices in first-appearance order.
inline Hypergraph cq_hypergraph(const ConjunctiveQuery& q) {
    std::vector<std::string> names;
    std::unordered_map<std::string, vertex_id> index;
    std::vector<Edge> edges;
    for (const auto& a : q.atoms) {
        std::vector<vertex_id> ids;
        for (const auto& v : a.vars) {
            auto [it, fresh] = index.emplace(v, static_cast<vertex_id>(names.size()));
            if (fresh) names.push_back(v);
            ids.push_back(it->second);
        }
        edges.push_back({a.name, VertexSet(std::move(ids))});
    }
    for (const auto& o : q.output)
        if (!index.count(o.var)) throw std::invalid_argument("output variable '" + o.var + "' occurs in no atom");
    return Hypergraph(std::move(names), std::move(edges));
}

struct ParsedQuery {
    ConjunctiveQuery cq;
    Hypergraph hypergraph;
};

namespace detail {

inline std::string unique_edge_name(const std::string& base, std::set<std::string>& used) {
    std::string name = base;
    for (int i = 2; used.count(name); ++i) name = base + "_" + std::to_string(i);
    used.insert(name);
    return name;
}

} // namespace detail

/// `ans(x,y) :- R(x,y), S(y,z).` or a bare atom list; `%` starts a comment.
inline ParsedQuery parse_cq(std::string_view text) {
    std::size_t i = 0;
    int line = 1;
    auto skip = [&] {
        for (;;) {
            while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) {
                if (text[i] == '\n') ++line;
                ++i;
            }
            if (i < text.size() && text[i] == '%') {
                while (i < text.size() && text[i] != '\n') ++i;
                continue;
            }
            return;
        }
    };
    auto ident = [&](const char* what) {
        skip();
        std::size_t b = i;
        while (i < text.size() && is_identifier_char(text[i])) ++i;
        if (b == i) throw parse_error(std::string("expected ") + what, line);
        return std::string(text.substr(b, i - b));
    };
    auto expect = [&](char c) {
        skip();
        if (i >= text.size() || text[i] != c) throw parse_error(std::string("expected '") + c + "'", line);
        ++i;
    };
    auto peek = [&]() -> char {
        skip();
        return i < text.size() ? text[i] : '\0';
    };
    auto atom = [&] {
        Atom a;
        a.relation = ident("relation name");
        expect('(');
        if (peek() != ')') {
            for (;;) {
                a.vars.push_back(ident("variable"));
                if (peek() == ',') {
                    ++i;
                    continue;
                }
                break;
            }
        }
        expect(')');
        if (a.vars.empty()) throw parse_error("atom '" + a.relation + "' has no variables", line);
        return a;
    };

    ConjunctiveQuery q;
    std::vector<Atom> first;
    first.push_back(atom());
    bool has_head = false;
    if (peek() == ':') {
        ++i;
        expect('-');
        has_head = true;
    }
    std::vector<Atom> body;
    if (has_head) {
        for (const auto& v : first[0].vars) q.output.push_back({v, Aggregate::none});
        body.push_back(atom());
    } else {
        body.push_back(std::move(first[0]));
    }
    for (;;) {
        char c = peek();
        if (c == ',') {
            ++i;
            if (peek() == '\0' || peek() == '.') break;
            body.push_back(atom());
        } else if (c == '.' || c == '\0') {
            break;
        } else {
            body.push_back(atom());
        }
    }
    if (peek() == '.') ++i;
    if (peek() != '\0') throw parse_error("unexpected text after query", line);

    std::set<std::string> used;
    std::map<std::string, std::size_t> arity;
    for (auto& a : body) {
        auto [it, fresh] = arity.emplace(a.relation, a.vars.size());
        if (!fresh && it->second != a.vars.size())
            q.warnings.push_back("relation '" + a.relation + "' used with arities " + std::to_string(it->second) + " and " +
                                 std::to_string(a.vars.size()));
        a.name = detail::unique_edge_name(a.relation, used);
        q.atoms.push_back(std::move(a));
    }
    std::vector<std::string> seen;
    std::vector<OutputTerm> out;
    for (const auto& o : q.output)
        if (std::find(seen.begin(), seen.end(), o.var) == seen.end()) seen.push_back(o.var), out.push_back(o);
    q.output = std::move(out);
    return {q, cq_hypergraph(q)};
}

/// Datalog rendering that parse_cq reads back.
inline std::string render_cq(const ConjunctiveQuery& q) {
    std::string s;
    if (!q.boolean()) {
        s = "ans(";
        auto ov = q.output_vars();
        for (std::size_t i = 0; i < ov.size(); ++i) s += (i ? "," : "") + ov[i];
        s += ") :- ";
    }
    for (std::size_t i = 0; i < q.atoms.size(); ++i) {
        s += (i ? ", " : "") + q.atoms[i].relation + "(";
        for (std::size_t j = 0; j < q.atoms[i].vars.size(); ++j) s += (j ? "," : "") + q.atoms[i].vars[j];
        s += ")";
    }
    return s + ".";
}

class unsupported_sql : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

struct SqlToken {
    enum Kind { ident, number, string, symbol, end } kind;
    std::string text;
    std::string upper;
    int line;
};

inline std::vector<SqlToken> sql_tokens(std::string_view s) {
    std::vector<SqlToken> out;
    int line = 1;
    std::size_t i = 0;
    auto upper = [](std::string t) {
        for (auto& c : t) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return t;
    };
    while (i < s.size()) {
        char c = s[i];
        if (c == '\n') ++line;
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '-' && i + 1 < s.size() && s[i + 1] == '-') {
            while (i < s.size() && s[i] != '\n') ++i;
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t b = i;
            while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
            std::string t(s.substr(b, i - b));
            out.push_back({SqlToken::ident, t, upper(t), line});
        } else if (c == '"') {
            std::size_t b = ++i;
            while (i < s.size() && s[i] != '"') ++i;
            if (i == s.size()) throw parse_error("unterminated quoted identifier", line);
            std::string t(s.substr(b, i - b));
            ++i;
            out.push_back({SqlToken::ident, t, "\"" + t, line});
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t b = i;
            while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '.')) ++i;
            out.push_back({SqlToken::number, std::string(s.substr(b, i - b)), "", line});
        } else if (c == '\'') {
            std::size_t b = i++;
            while (i < s.size() && s[i] != '\'') ++i;
            ++i;
            out.push_back({SqlToken::string, std::string(s.substr(b, std::min(i, s.size()) - b)), "", line});
        } else {
            std::string t(1, c);
            if ((c == '<' || c == '>' || c == '!') && i + 1 < s.size() && (s[i + 1] == '=' || s[i + 1] == '>')) t += s[i + 1];
            i += t.size();
            out.push_back({SqlToken::symbol, t, t, line});
        }
    }
    out.push_back({SqlToken::end, "", "", line});
    return out;
}

} // namespace detail

/// Table name -> column names, used to resolve unqualified columns.
using SqlSchema = std::map<std::string, std::vector<std::string>>;

/// Select-from-where equijoin queries: variables are classes of equated columns.
/// Columns outside every join condition are dropped unless selected, or kept
/// as fresh variables with full_schema (schema columns only).
inline ParsedQuery sql_to_cq(std::string_view sql, const SqlSchema& schema = {}, bool full_schema = false) {
    auto toks = detail::sql_tokens(sql);
    std::size_t p = 0;
    auto cur = [&]() -> const detail::SqlToken& { return toks[p]; };
    auto is_kw = [&](const char* kw) { return cur().kind == detail::SqlToken::ident && cur().upper == kw; };
    auto is_sym = [&](const char* s) { return cur().kind == detail::SqlToken::symbol && cur().text == s; };
    static const std::set<std::string> unsupported = {"OR",    "NOT",  "IN",    "EXISTS", "LIKE",  "BETWEEN", "LEFT",
                                                      "RIGHT", "FULL", "OUTER", "CROSS",  "UNION", "GROUP",   "ORDER",
                                                      "HAVING", "LIMIT", "CASE", "NATURAL", "USING", "SUM", "AVG",
                                                      "INTERSECT", "EXCEPT", "IS", "NULL", "OFFSET"};
    static const std::set<std::string> reserved = {"SELECT", "FROM", "WHERE", "AND", "AS", "JOIN", "INNER", "ON", "DISTINCT"};
    auto fail_unsupported = [&]() {
        const auto& t = cur();
        if (t.kind == detail::SqlToken::number || t.kind == detail::SqlToken::string)
            throw unsupported_sql("line " + std::to_string(t.line) + ": unsupported construct: constant " + t.text);
        throw unsupported_sql("line " + std::to_string(t.line) + ": unsupported construct: " + (t.text.empty() ? "end of input" : t.text));
    };
    auto check = [&]() {
        if (cur().kind == detail::SqlToken::ident && unsupported.count(cur().upper)) fail_unsupported();
        if (cur().kind == detail::SqlToken::number || cur().kind == detail::SqlToken::string) fail_unsupported();
        if (is_kw("SELECT") && p > 0) throw unsupported_sql("line " + std::to_string(cur().line) + ": unsupported construct: subquery");
    };
    auto expect_kw = [&](const char* kw) {
        check();
        if (!is_kw(kw)) throw parse_error(std::string("expected ") + kw + " near '" + cur().text + "'", cur().line);
        ++p;
    };
    auto expect_sym = [&](const char* s) {
        check();
        if (!is_sym(s)) {
            if (cur().kind == detail::SqlToken::symbol && std::string("=") != s && cur().text != "," && cur().text != ")" &&
                cur().text != "(" && cur().text != ".")
                fail_unsupported();
            throw parse_error(std::string("expected '") + s + "' near '" + cur().text + "'", cur().line);
        }
        ++p;
    };
    auto name = [&](const char* what) {
        check();
        if (cur().kind != detail::SqlToken::ident || reserved.count(cur().upper))
            throw parse_error(std::string("expected ") + what + " near '" + cur().text + "'", cur().line);
        return toks[p++].text;
    };

    struct ColRef {
        std::string qual, col;
        int line;
    };
    struct Item {
        std::string table, alias;
    };
    struct SelectTerm {
        std::optional<ColRef> col;   // nullopt: COUNT(*)
        Aggregate agg = Aggregate::none;
        bool star = false;
    };
    std::vector<SelectTerm> select;
    std::vector<Item> items;
    std::vector<std::pair<ColRef, ColRef>> eqs;
    std::vector<ColRef> appearance;   // textual order of column references

    auto colref = [&]() {
        ColRef r;
        r.line = cur().line;
        std::string a = name("column");
        if (is_sym(".")) {
            ++p;
            r.qual = a;
            r.col = name("column");
        } else {
            r.col = a;
        }
        return r;
    };
    std::function<void()> condition = [&]() {
        for (;;) {
            check();
            if (is_sym("(")) {
                ++p;
                condition();
                expect_sym(")");
            } else {
                auto l = colref();
                check();
                if (!is_sym("=")) fail_unsupported();
                ++p;
                check();
                auto r = colref();
                appearance.push_back(l);
                appearance.push_back(r);
                eqs.push_back({l, r});
            }
            check();
            if (!is_kw("AND")) return;
            ++p;
        }
    };

    expect_kw("SELECT");
    if (is_kw("DISTINCT")) ++p;
    for (;;) {
        check();
        SelectTerm t;
        if (is_sym("*")) {
            ++p;
            t.star = true;
        } else if (is_kw("MIN") || is_kw("MAX") || is_kw("COUNT")) {
            std::string f = cur().upper;
            ++p;
            expect_sym("(");
            if (f == "COUNT") {
                if (is_kw("DISTINCT")) fail_unsupported();
                expect_sym("*");
            } else {
                t.agg = f == "MIN" ? Aggregate::min : Aggregate::max;
                t.col = colref();
                appearance.push_back(*t.col);
            }
            expect_sym(")");
        } else {
            t.col = colref();
            appearance.push_back(*t.col);
        }
        if (is_kw("AS")) {
            ++p;
            name("output alias");
        }
        select.push_back(t);
        if (!is_sym(",")) break;
        ++p;
    }
    expect_kw("FROM");
    auto table_ref = [&]() {
        Item it;
        it.table = name("table");
        if (is_kw("AS")) {
            ++p;
            it.alias = name("alias");
        } else if (cur().kind == detail::SqlToken::ident && !reserved.count(cur().upper) && !unsupported.count(cur().upper)) {
            it.alias = toks[p++].text;
        }
        if (it.alias.empty()) it.alias = it.table;
        items.push_back(it);
    };
    table_ref();
    for (;;) {
        check();
        if (is_sym(",")) {
            ++p;
            table_ref();
        } else if (is_kw("JOIN") || is_kw("INNER")) {
            if (is_kw("INNER")) ++p;
            expect_kw("JOIN");
            table_ref();
            expect_kw("ON");
            condition();
        } else {
            break;
        }
    }
    if (is_kw("WHERE")) {
        ++p;
        condition();
    }
    if (is_sym(";")) ++p;
    check();
    if (cur().kind != detail::SqlToken::end) {
        if (cur().kind == detail::SqlToken::symbol) fail_unsupported();
        throw parse_error("unexpected '" + cur().text + "'", cur().line);
    }

    std::map<std::string, std::size_t> by_alias;
    for (std::size_t i = 0; i < items.size(); ++i)
        if (!by_alias.emplace(items[i].alias, i).second)
            throw parse_error("duplicate FROM alias '" + items[i].alias + "'", 0);

    auto initials = [](const std::string& t) {
        std::string s;
        bool start = true;
        for (char c : t) {
            if (c == '_') start = true;
            else if (start) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c))), start = false;
        }
        return s + "_";
    };
    auto resolve = [&](const ColRef& r) -> std::size_t {
        if (!r.qual.empty()) {
            auto it = by_alias.find(r.qual);
            if (it == by_alias.end()) throw parse_error("unknown table or alias '" + r.qual + "'", r.line);
            return it->second;
        }
        std::vector<std::size_t> hits;
        for (std::size_t i = 0; i < items.size(); ++i) {
            auto s = schema.find(items[i].table);
            if (s != schema.end() && std::find(s->second.begin(), s->second.end(), r.col) != s->second.end()) hits.push_back(i);
        }
        if (hits.empty()) {
            // naming convention: column prefixed with the table's initials
            std::size_t best = 0;
            for (std::size_t i = 0; i < items.size(); ++i) {
                auto pre = initials(items[i].table);
                if (r.col.size() > pre.size() && r.col.compare(0, pre.size(), pre) == 0) {
                    if (pre.size() > best) hits.assign(1, i), best = pre.size();
                    else if (pre.size() == best) hits.push_back(i);
                }
            }
        }
        if (hits.size() != 1)
            throw parse_error("cannot attribute column '" + r.col + "' to one table; qualify it", r.line);
        return hits[0];
    };

    // union-find over (item, column)
    std::map<std::pair<std::size_t, std::string>, std::size_t> key_id;
    std::vector<std::size_t> parent, first_seen;
    std::vector<std::pair<std::size_t, std::string>> keys;
    auto id_of = [&](const ColRef& r) {
        auto k = std::make_pair(resolve(r), r.col);
        auto [it, fresh] = key_id.emplace(k, parent.size());
        if (fresh) {
            parent.push_back(parent.size());
            keys.push_back(k);
        }
        return it->second;
    };
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
    for (const auto& r : appearance) id_of(r);
    for (const auto& [l, r] : eqs) {
        auto a = find(id_of(l)), b = find(id_of(r));
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    // classes numbered by earliest appearance
    std::map<std::size_t, std::string> var_of_root;
    for (const auto& r : appearance) {
        auto root = find(id_of(r));
        if (!var_of_root.count(root)) {
            std::string v = "X" + std::to_string(var_of_root.size() + 1);
            var_of_root.emplace(root, v);
        }
    }

    ConjunctiveQuery q;
    std::set<std::string> used;
    for (std::size_t i = 0; i < items.size(); ++i) {
        Atom a;
        a.name = detail::unique_edge_name(items[i].alias, used);
        a.relation = items[i].table;
        std::set<std::string> cols;
        for (const auto& r : appearance) {
            auto k = key_id.at({resolve(r), r.col});
            if (keys[k].first != i || !cols.insert(r.col).second) continue;
            a.columns.push_back(r.col);
            a.vars.push_back(var_of_root.at(find(k)));
        }
        if (a.vars.empty()) throw unsupported_sql("FROM item '" + items[i].alias + "' takes part in no join condition (cross product)");
        q.atoms.push_back(std::move(a));
    }
    for (const auto& t : select) {
        if (t.star) {
            for (const auto& [root, v] : var_of_root) q.output.push_back({v, Aggregate::none});
        } else if (t.col) {
            q.output.push_back({var_of_root.at(find(id_of(*t.col))), t.agg});
        }
    }
    std::sort(q.output.begin(), q.output.end(), [](const OutputTerm& a, const OutputTerm& b) {
        return std::stoi(a.var.substr(1)) < std::stoi(b.var.substr(1));
    });
    std::vector<OutputTerm> dedup;
    for (const auto& o : q.output)
        if (std::none_of(dedup.begin(), dedup.end(), [&](const OutputTerm& d) { return d.var == o.var && d.agg == o.agg; }))
            dedup.push_back(o);
    q.output = std::move(dedup);

    std::size_t nvars = var_of_root.size();
    if (full_schema) {
        for (std::size_t i = 0; i < items.size(); ++i) {
            auto s = schema.find(items[i].table);
            if (s == schema.end()) continue;
            for (const auto& col : s->second) {
                auto& a = q.atoms[i];
                if (std::find(a.columns.begin(), a.columns.end(), col) != a.columns.end()) continue;
                a.columns.push_back(col);
                a.vars.push_back("X" + std::to_string(++nvars));
            }
        }
    }
    // vertices X1..Xn in class order
    std::vector<std::string> names(nvars);
    for (std::size_t i = 0; i < nvars; ++i) names[i] = "X" + std::to_string(i + 1);
    std::vector<Edge> edges;
    for (const auto& a : q.atoms) {
        std::vector<vertex_id> ids;
        for (const auto& v : a.vars) ids.push_back(static_cast<vertex_id>(std::stoi(v.substr(1)) - 1));
        edges.push_back({a.name, VertexSet(std::move(ids))});
    }
    Hypergraph h(std::move(names), std::move(edges));
    return {std::move(q), std::move(h)};
}

// ---------------------------------------------------------------------------
// Evaluation plans

using Value = std::int64_t;

struct Relation {
    std::vector<std::string> columns;   // optional names, matched against Atom::columns
    std::vector<std::vector<Value>> rows;
};

using Database = std::map<std::string, Relation>;

/// Relation over named variables, duplicate-free after project().
struct Table {
    std::vector<std::string> vars;
    std::vector<std::vector<Value>> rows;
};

struct PlanNode {
    std::vector<std::string> vars;       // bag variables
    std::vector<std::size_t> cover;      // atoms joined to build the bag
    std::vector<std::size_t> filters;    // further atoms checked against the bag
    int parent = -1;
    bool cartesian = false;              // cover atoms share no variables
};

struct PlanStep {
    enum class Kind { materialize, semijoin_up, semijoin_down, final_join, boolean_probe };
    Kind kind;
    int node = -1;    // target: the bag being built or reduced
    int other = -1;   // semi-join source
};

struct EvalPlan {
    ConjunctiveQuery cq;
    std::vector<PlanNode> nodes;
    std::vector<PlanStep> steps;
    std::vector<std::string> flags;
};

inline const char* step_name(PlanStep::Kind k) {
    switch (k) {
    case PlanStep::Kind::materialize: return "MATERIALIZE_BAG";
    case PlanStep::Kind::semijoin_up: return "SEMIJOIN_UP";
    case PlanStep::Kind::semijoin_down: return "SEMIJOIN_DOWN";
    case PlanStep::Kind::final_join: return "FINAL_JOIN";
    case PlanStep::Kind::boolean_probe: return "BOOLEAN_PROBE";
    }
    return "?";
}

/// Yannakakis plan over the decomposition; node covers index the query's atoms.
inline EvalPlan compile_plan(const ConjunctiveQuery& q, const Hypergraph& h, const TreeDecomposition& td) {
    if (td.empty()) throw std::invalid_argument("compile_plan: empty decomposition");
    if (h.num_edges() != q.atoms.size()) throw std::invalid_argument("compile_plan: hypergraph does not match the query");
    EvalPlan plan;
    plan.cq = q;
    plan.nodes.resize(td.size());
    auto ch = td.children();
    std::vector<int> order{td.root()};   // preorder with children in id order
    for (std::size_t i = 0; i < order.size(); ++i)
        for (int c : ch[static_cast<std::size_t>(order[i])]) order.push_back(c);
    for (std::size_t u = 0; u < td.size(); ++u) {
        const auto& n = td.nodes[u];
        if (n.cover.empty()) throw std::invalid_argument("compile_plan: node " + std::to_string(u) + " has no cover");
        auto& pn = plan.nodes[u];
        pn.parent = n.parent;
        for (auto v : n.bag) pn.vars.push_back(h.vertex_name(v));
        for (auto e : n.cover) pn.cover.push_back(e);
        std::sort(pn.cover.begin(), pn.cover.end());
        if (pn.cover.size() > 1) {
            VertexSet reached = h.edge_vertices(static_cast<edge_id>(pn.cover[0]));
            std::vector<char> in(pn.cover.size(), 0);
            in[0] = 1;
            for (bool grew = true; grew;) {
                grew = false;
                for (std::size_t i = 0; i < pn.cover.size(); ++i)
                    if (!in[i] && h.edge_vertices(static_cast<edge_id>(pn.cover[i])).intersects(reached)) {
                        in[i] = 1;
                        reached |= h.edge_vertices(static_cast<edge_id>(pn.cover[i]));
                        grew = true;
                    }
            }
            pn.cartesian = std::count(in.begin(), in.end(), 0) > 0;
            if (pn.cartesian) plan.flags.push_back("node " + std::to_string(u) + " joins its cover by Cartesian product");
        }
    }
    // every atom is enforced at the first node (preorder) containing it
    for (std::size_t a = 0; a < q.atoms.size(); ++a) {
        bool placed = false;
        for (int u : order) {
            const auto& n = td.nodes[static_cast<std::size_t>(u)];
            if (!h.edge_vertices(static_cast<edge_id>(a)).subset_of(n.bag)) continue;
            auto& pn = plan.nodes[static_cast<std::size_t>(u)];
            if (std::find(pn.cover.begin(), pn.cover.end(), a) == pn.cover.end()) pn.filters.push_back(a);
            placed = true;
            break;
        }
        if (!placed) throw std::invalid_argument("compile_plan: atom " + q.atoms[a].name + " is in no bag");
    }
    for (int u : order) plan.steps.push_back({PlanStep::Kind::materialize, u, -1});
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if (td.nodes[static_cast<std::size_t>(*it)].parent >= 0)
            plan.steps.push_back({PlanStep::Kind::semijoin_up, td.nodes[static_cast<std::size_t>(*it)].parent, *it});
    if (q.boolean()) {
        plan.steps.push_back({PlanStep::Kind::boolean_probe, td.root(), -1});
    } else {
        for (int u : order)
            if (td.nodes[static_cast<std::size_t>(u)].parent >= 0)
                plan.steps.push_back({PlanStep::Kind::semijoin_down, u, td.nodes[static_cast<std::size_t>(u)].parent});
        plan.steps.push_back({PlanStep::Kind::final_join, td.root(), -1});
    }
    return plan;
}

inline std::string format_plan(const EvalPlan& plan) {
    std::ostringstream out;
    auto vars = [](const std::vector<std::string>& v) {
        std::string s = "{";
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
        return s + "}";
    };
    for (const auto& st : plan.steps) {
        out << step_name(st.kind) << ' ' << st.node;
        if (st.kind == PlanStep::Kind::materialize) {
            const auto& n = plan.nodes[static_cast<std::size_t>(st.node)];
            out << ' ' << vars(n.vars) << " =";
            for (std::size_t i = 0; i < n.cover.size(); ++i) out << (i ? " JOIN " : " ") << plan.cq.atoms[n.cover[i]].name;
            for (auto f : n.filters) out << " SEMIJOIN " << plan.cq.atoms[f].name;
            if (n.cartesian) out << " [cartesian]";
        } else if (st.other >= 0) {
            out << " <| " << st.other;
        }
        out << '\n';
    }
    return out.str();
}

namespace detail {

struct RowHash {
    std::size_t operator()(const std::vector<Value>& r) const {
        std::size_t h = r.size();
        for (auto v : r) h ^= std::hash<Value>{}(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        return h;
    }
};

inline std::vector<std::size_t> positions(const std::vector<std::string>& vars, const std::vector<std::string>& of) {
    std::vector<std::size_t> p;
    for (const auto& v : of) p.push_back(static_cast<std::size_t>(std::find(vars.begin(), vars.end(), v) - vars.begin()));
    return p;
}

inline std::vector<std::string> shared_vars(const Table& a, const Table& b) {
    std::vector<std::string> s;
    for (const auto& v : a.vars)
        if (std::find(b.vars.begin(), b.vars.end(), v) != b.vars.end()) s.push_back(v);
    return s;
}

inline std::vector<Value> pick(const std::vector<Value>& row, const std::vector<std::size_t>& pos) {
    std::vector<Value> k;
    k.reserve(pos.size());
    for (auto p : pos) k.push_back(row[p]);
    return k;
}

} // namespace detail

inline Table project(const Table& t, const std::vector<std::string>& vars) {
    Table out;
    out.vars = vars;
    auto pos = detail::positions(t.vars, vars);
    std::unordered_set<std::vector<Value>, detail::RowHash> seen;
    for (const auto& r : t.rows) {
        auto k = detail::pick(r, pos);
        if (seen.insert(k).second) out.rows.push_back(std::move(k));
    }
    return out;
}

/// Rows of a whose shared-variable values occur in b.
inline Table semijoin(const Table& a, const Table& b) {
    auto s = detail::shared_vars(a, b);
    Table out;
    out.vars = a.vars;
    if (s.empty()) {
        if (!b.rows.empty()) out.rows = a.rows;
        return out;
    }
    auto pa = detail::positions(a.vars, s), pb = detail::positions(b.vars, s);
    std::unordered_set<std::vector<Value>, detail::RowHash> keys;
    for (const auto& r : b.rows) keys.insert(detail::pick(r, pb));
    for (const auto& r : a.rows)
        if (keys.count(detail::pick(r, pa))) out.rows.push_back(r);
    return out;
}

/// Hash join on the shared variables.
inline Table join(const Table& a, const Table& b) {
    auto s = detail::shared_vars(a, b);
    Table out;
    out.vars = a.vars;
    std::vector<std::size_t> extra;
    for (std::size_t i = 0; i < b.vars.size(); ++i)
        if (std::find(a.vars.begin(), a.vars.end(), b.vars[i]) == a.vars.end()) {
            out.vars.push_back(b.vars[i]);
            extra.push_back(i);
        }
    auto pa = detail::positions(a.vars, s), pb = detail::positions(b.vars, s);
    std::unordered_map<std::vector<Value>, std::vector<std::size_t>, detail::RowHash> index;
    for (std::size_t i = 0; i < b.rows.size(); ++i) index[detail::pick(b.rows[i], pb)].push_back(i);
    for (const auto& r : a.rows) {
        auto it = index.find(detail::pick(r, pa));
        if (it == index.end()) continue;
        for (auto bi : it->second) {
            auto row = r;
            for (auto e : extra) row.push_back(b.rows[bi][e]);
            out.rows.push_back(std::move(row));
        }
    }
    return out;
}

/// The atom as a table over its distinct variables, repeated variables enforcing equality.
inline Table scan_atom(const Atom& a, const Database& db) {
    auto it = db.find(a.relation);
    if (it == db.end()) throw std::invalid_argument("database has no relation '" + a.relation + "'");
    const auto& rel = it->second;
    std::vector<std::size_t> src(a.vars.size());
    bool by_name = !a.columns.empty() && std::all_of(a.columns.begin(), a.columns.end(), [&](const std::string& c) {
        return std::find(rel.columns.begin(), rel.columns.end(), c) != rel.columns.end();
    });
    if (by_name) {
        for (std::size_t i = 0; i < a.vars.size(); ++i)
            src[i] = static_cast<std::size_t>(std::find(rel.columns.begin(), rel.columns.end(), a.columns[i]) - rel.columns.begin());
    } else {
        std::iota(src.begin(), src.end(), std::size_t{0});
    }
    Table t;
    std::vector<std::size_t> first(a.vars.size());
    for (std::size_t i = 0; i < a.vars.size(); ++i) {
        auto pos = std::find(t.vars.begin(), t.vars.end(), a.vars[i]);
        first[i] = static_cast<std::size_t>(pos - t.vars.begin());
        if (pos == t.vars.end()) t.vars.push_back(a.vars[i]);
    }
    for (const auto& row : rel.rows) {
        std::size_t need = by_name ? rel.columns.size() : a.vars.size();
        if (row.size() != need || (!by_name && !rel.columns.empty() && rel.columns.size() != a.vars.size()))
            throw std::invalid_argument("relation '" + a.relation + "' has arity " + std::to_string(row.size()) + ", atom " + a.name +
                                        " expects " + std::to_string(a.vars.size()));
        std::vector<Value> out(t.vars.size());
        bool ok = true;
        std::vector<char> set(t.vars.size(), 0);
        for (std::size_t i = 0; i < a.vars.size() && ok; ++i) {
            Value v = row[src[i]];
            if (set[first[i]] && out[first[i]] != v) ok = false;
            out[first[i]] = v;
            set[first[i]] = 1;
        }
        if (ok) t.rows.push_back(std::move(out));
    }
    return project(t, t.vars);
}

struct QueryResult {
    bool boolean = false;
    bool nonempty = false;
    Table table;   // sorted rows over the output variables
};

inline void sort_rows(Table& t) { std::sort(t.rows.begin(), t.rows.end()); }

/// Reference interpreter for a compiled plan.
inline QueryResult execute_plan(const EvalPlan& plan, const Database& db) {
    std::vector<Table> bags(plan.nodes.size());
    std::vector<std::vector<int>> children(plan.nodes.size());
    for (std::size_t u = 0; u < plan.nodes.size(); ++u)
        if (plan.nodes[u].parent >= 0) children[static_cast<std::size_t>(plan.nodes[u].parent)].push_back(static_cast<int>(u));
    QueryResult res;
    res.boolean = plan.cq.boolean();
    for (const auto& st : plan.steps) {
        auto& target = bags[static_cast<std::size_t>(st.node)];
        switch (st.kind) {
        case PlanStep::Kind::materialize: {
            const auto& n = plan.nodes[static_cast<std::size_t>(st.node)];
            Table t = scan_atom(plan.cq.atoms[n.cover[0]], db);
            for (std::size_t i = 1; i < n.cover.size(); ++i) t = join(t, scan_atom(plan.cq.atoms[n.cover[i]], db));
            for (auto f : n.filters) t = semijoin(t, scan_atom(plan.cq.atoms[f], db));
            target = project(t, n.vars);
            break;
        }
        case PlanStep::Kind::semijoin_up:
        case PlanStep::Kind::semijoin_down:
            target = semijoin(target, bags[static_cast<std::size_t>(st.other)]);
            break;
        case PlanStep::Kind::boolean_probe:
            res.nonempty = !target.rows.empty();
            break;
        case PlanStep::Kind::final_join: {
            auto out = plan.cq.output_vars();
            std::function<Table(int)> collect = [&](int u) {
                Table t = bags[static_cast<std::size_t>(u)];
                for (int c : children[static_cast<std::size_t>(u)]) {
                    t = join(t, collect(c));
                    std::vector<std::string> keep;
                    for (const auto& v : t.vars)
                        if (std::find(out.begin(), out.end(), v) != out.end() ||
                            std::find(plan.nodes[static_cast<std::size_t>(u)].vars.begin(),
                                      plan.nodes[static_cast<std::size_t>(u)].vars.end(), v) != plan.nodes[static_cast<std::size_t>(u)].vars.end())
                            keep.push_back(v);
                    t = project(t, keep);
                }
                return t;
            };
            res.table = project(collect(st.node), out);
            sort_rows(res.table);
            res.nonempty = !res.table.rows.empty();
            break;
        }
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// SQL text

namespace detail {

inline std::string quote_ident(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string atom_column(const Atom& a, std::size_t i) { return a.columns.empty() ? "c" + std::to_string(i + 1) : a.columns[i]; }

/// SELECT DISTINCT of one bag: join of its cover, EXISTS for its filter atoms.
inline std::string bag_select(const EvalPlan& plan, const PlanNode& n) {
    std::vector<std::string> from, where;
    std::map<std::string, std::string> bound;   // variable -> first column expression
    auto bind = [&](const Atom& a, const std::string& alias, std::vector<std::string>& conds) {
        for (std::size_t i = 0; i < a.vars.size(); ++i) {
            std::string col = alias + "." + quote_ident(atom_column(a, i));
            auto [it, fresh] = bound.emplace(a.vars[i], col);
            if (!fresh) conds.push_back(it->second + " = " + col);
        }
    };
    for (std::size_t i = 0; i < n.cover.size(); ++i) {
        const auto& a = plan.cq.atoms[n.cover[i]];
        std::string alias = "a" + std::to_string(i);
        from.push_back(quote_ident(a.relation) + " AS " + alias);
        bind(a, alias, where);
    }
    for (std::size_t i = 0; i < n.filters.size(); ++i) {
        const auto& a = plan.cq.atoms[n.filters[i]];
        std::string alias = "f" + std::to_string(i);
        std::vector<std::string> conds;
        auto saved = bound;
        bind(a, alias, conds);
        bound = saved;
        std::string e = "EXISTS (SELECT 1 FROM " + quote_ident(a.relation) + " AS " + alias;
        for (std::size_t j = 0; j < conds.size(); ++j) e += (j ? " AND " : " WHERE ") + conds[j];
        where.push_back(e + ")");
    }
    std::string s = "SELECT DISTINCT ";
    for (std::size_t i = 0; i < n.vars.size(); ++i) s += (i ? ", " : "") + bound.at(n.vars[i]) + " AS " + quote_ident(n.vars[i]);
    s += " FROM ";
    for (std::size_t i = 0; i < from.size(); ++i) s += (i ? ", " : "") + from[i];
    for (std::size_t i = 0; i < where.size(); ++i) s += (i ? " AND " : " WHERE ") + where[i];
    return s;
}

inline std::string shared_condition(const PlanNode& a, const std::string& an, const PlanNode& b, const std::string& bn) {
    std::string s;
    for (const auto& v : a.vars)
        if (std::find(b.vars.begin(), b.vars.end(), v) != b.vars.end())
            s += (s.empty() ? "" : " AND ") + an + "." + quote_ident(v) + " = " + bn + "." + quote_ident(v);
    return s.empty() ? "1 = 1" : s;
}

inline std::string output_list(const ConjunctiveQuery& q, const std::string& qual) {
    std::string s;
    for (std::size_t i = 0; i < q.output.size(); ++i) {
        std::string col = (qual.empty() ? "" : qual + ".") + quote_ident(q.output[i].var);
        if (q.output[i].agg == Aggregate::min) col = "MIN(" + col + ")";
        if (q.output[i].agg == Aggregate::max) col = "MAX(" + col + ")";
        s += (i ? ", " : "") + col;
    }
    return s;
}

} // namespace detail

/// Dialect-neutral rewriting: a view per bag and per semi-join reduction, then the final query.
inline std::string emit_sql(const EvalPlan& plan) {
    using detail::quote_ident;
    const auto& q = plan.cq;
    bool has_agg = std::any_of(q.output.begin(), q.output.end(), [](const OutputTerm& o) { return o.agg != Aggregate::none; });
    std::string distinct = has_agg ? "" : "DISTINCT ";
    if (plan.nodes.size() == 1) {
        std::string inner = detail::bag_select(plan, plan.nodes[0]);
        if (q.boolean()) return "SELECT CASE WHEN EXISTS (" + inner + ") THEN 1 ELSE 0 END;\n";
        return "SELECT " + distinct + detail::output_list(q, "b") + " FROM (" + inner + ") AS b;\n";
    }
    std::ostringstream out;
    std::vector<std::string> current(plan.nodes.size());
    for (const auto& st : plan.steps) {
        const auto u = static_cast<std::size_t>(st.node);
        switch (st.kind) {
        case PlanStep::Kind::materialize:
            current[u] = "bag" + std::to_string(u);
            out << "CREATE TEMPORARY VIEW " << current[u] << " AS " << detail::bag_select(plan, plan.nodes[u]) << ";\n";
            break;
        case PlanStep::Kind::semijoin_up:
        case PlanStep::Kind::semijoin_down: {
            const auto o = static_cast<std::size_t>(st.other);
            std::string next = "bag" + std::to_string(u) + (st.kind == PlanStep::Kind::semijoin_up ? "_up" : "_dn") + std::to_string(o);
            out << "CREATE TEMPORARY VIEW " << next << " AS SELECT * FROM " << current[u] << " AS t WHERE EXISTS (SELECT 1 FROM "
                << current[o] << " AS s WHERE " << detail::shared_condition(plan.nodes[u], "t", plan.nodes[o], "s") << ");\n";
            current[u] = next;
            break;
        }
        case PlanStep::Kind::boolean_probe:
            out << "SELECT CASE WHEN EXISTS (SELECT 1 FROM " << current[u] << ") THEN 1 ELSE 0 END;\n";
            break;
        case PlanStep::Kind::final_join: {
            std::vector<std::size_t> order{u};
            for (std::size_t i = 0; i < order.size(); ++i)
                for (std::size_t c = 0; c < plan.nodes.size(); ++c)
                    if (plan.nodes[c].parent == static_cast<int>(order[i])) order.push_back(c);
            std::string from = current[order[0]] + " AS n" + std::to_string(order[0]);
            std::map<std::string, std::string> owner;
            for (const auto& v : plan.nodes[order[0]].vars) owner.emplace(v, "n" + std::to_string(order[0]));
            for (std::size_t i = 1; i < order.size(); ++i) {
                const auto c = order[i];
                const auto p = static_cast<std::size_t>(plan.nodes[c].parent);
                from += " JOIN " + current[c] + " AS n" + std::to_string(c) + " ON " +
                        detail::shared_condition(plan.nodes[c], "n" + std::to_string(c), plan.nodes[p], "n" + std::to_string(p));
                for (const auto& v : plan.nodes[c].vars) owner.emplace(v, "n" + std::to_string(c));
            }
            std::string sel;
            for (std::size_t i = 0; i < q.output.size(); ++i) {
                std::string col = owner.at(q.output[i].var) + "." + quote_ident(q.output[i].var);
                if (q.output[i].agg == Aggregate::min) col = "MIN(" + col + ")";
                if (q.output[i].agg == Aggregate::max) col = "MAX(" + col + ")";
                sel += (i ? ", " : "") + col;
            }
            out << "SELECT " << distinct << sel << " FROM " << from << ";\n";
            break;
        }
        }
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Plan files

inline std::string plan_to_json(const EvalPlan& plan) {
    nlohmann::json j;
    j["atoms"] = nlohmann::json::array();
    for (const auto& a : plan.cq.atoms)
        j["atoms"].push_back({{"name", a.name}, {"relation", a.relation}, {"vars", a.vars}, {"columns", a.columns}});
    j["output"] = nlohmann::json::array();
    for (const auto& o : plan.cq.output)
        j["output"].push_back({{"var", o.var}, {"agg", o.agg == Aggregate::min ? "min" : o.agg == Aggregate::max ? "max" : "none"}});
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : plan.nodes)
        j["nodes"].push_back({{"vars", n.vars}, {"cover", n.cover}, {"filters", n.filters}, {"parent", n.parent}, {"cartesian", n.cartesian}});
    j["steps"] = nlohmann::json::array();
    for (const auto& s : plan.steps) j["steps"].push_back({{"kind", step_name(s.kind)}, {"node", s.node}, {"other", s.other}});
    j["flags"] = plan.flags;
    return j.dump(2);
}

inline EvalPlan plan_from_json(const std::string& text) {
    EvalPlan plan;
    try {
        auto j = nlohmann::json::parse(text);
        for (const auto& a : j.at("atoms"))
            plan.cq.atoms.push_back({a.at("name").get<std::string>(), a.at("relation").get<std::string>(),
                                     a.at("vars").get<std::vector<std::string>>(), a.value("columns", std::vector<std::string>{})});
        for (const auto& o : j.at("output")) {
            auto agg = o.value("agg", std::string("none"));
            plan.cq.output.push_back({o.at("var").get<std::string>(), agg == "min" ? Aggregate::min : agg == "max" ? Aggregate::max : Aggregate::none});
        }
        for (const auto& n : j.at("nodes"))
            plan.nodes.push_back({n.at("vars").get<std::vector<std::string>>(), n.at("cover").get<std::vector<std::size_t>>(),
                                  n.value("filters", std::vector<std::size_t>{}), n.at("parent").get<int>(), n.value("cartesian", false)});
        for (const auto& s : j.at("steps")) {
            auto k = s.at("kind").get<std::string>();
            PlanStep st{PlanStep::Kind::materialize, s.at("node").get<int>(), s.value("other", -1)};
            bool known = false;
            for (auto kind : {PlanStep::Kind::materialize, PlanStep::Kind::semijoin_up, PlanStep::Kind::semijoin_down,
                              PlanStep::Kind::final_join, PlanStep::Kind::boolean_probe})
                if (k == step_name(kind)) st.kind = kind, known = true;
            if (!known) throw std::invalid_argument("unknown plan step '" + k + "'");
            plan.steps.push_back(st);
        }
        plan.flags = j.value("flags", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("plan file: ") + e.what());
    }
    const auto n = static_cast<int>(plan.nodes.size());
    for (const auto& node : plan.nodes) {
        if (node.parent >= n) throw std::invalid_argument("plan file: parent out of range");
        if (node.cover.empty()) throw std::invalid_argument("plan file: node without cover");
        for (auto a : node.cover)
            if (a >= plan.cq.atoms.size()) throw std::invalid_argument("plan file: cover atom out of range");
        for (auto a : node.filters)
            if (a >= plan.cq.atoms.size()) throw std::invalid_argument("plan file: filter atom out of range");
    }
    for (const auto& s : plan.steps)
        if (s.node < 0 || s.node >= n || s.other >= n) throw std::invalid_argument("plan file: step node out of range");
    return plan;
}

} // namespace softdecomp

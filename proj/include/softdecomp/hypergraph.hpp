#pragma once

#include <cctype>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vertex_set.hpp"

namespace softdecomp {

struct Edge {
    std::string name;
    VertexSet vertices;
};

/// Thrown for malformed hypergraph or query text; carries the 1-based line.
class parse_error : public std::runtime_error {
public:
    parse_error(const std::string& msg, int line)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Immutable hypergraph with dense vertex and edge ids.
class Hypergraph {
public:
    Hypergraph() = default;

    /// Isolated vertices are rejected unless allow_isolated is set, in which
    /// case each one is wrapped in a fresh unary edge.
    Hypergraph(std::vector<std::string> vertex_names, std::vector<Edge> edges, bool allow_isolated = false)
        : vertex_names_(std::move(vertex_names)), edges_(std::move(edges)) {
        std::vector<bool> seen(vertex_names_.size(), false);
        for (const auto& e : edges_) {
            if (e.vertices.empty()) throw std::invalid_argument("edge '" + e.name + "' is empty");
            for (auto v : e.vertices) {
                if (v >= vertex_names_.size())
                    throw std::invalid_argument("edge '" + e.name + "' references unknown vertex id");
                seen[v] = true;
            }
        }
        for (vertex_id v = 0; v < vertex_names_.size(); ++v) {
            if (seen[v]) continue;
            if (!allow_isolated) throw std::invalid_argument("isolated vertex '" + vertex_names_[v] + "'");
            edges_.push_back({"iso_" + vertex_names_[v], VertexSet{v}});
        }
        for (vertex_id v = 0; v < vertex_names_.size(); ++v) {
            if (!vertex_index_.emplace(vertex_names_[v], v).second)
                throw std::invalid_argument("duplicate vertex name '" + vertex_names_[v] + "'");
        }
        for (edge_id e = 0; e < edges_.size(); ++e) edge_index_.emplace(edges_[e].name, e);
        build_adjacency();
    }

    /// Builds from (edge name, vertex names) pairs; vertex ids follow first appearance.
    static Hypergraph from_named_edges(const std::vector<std::pair<std::string, std::vector<std::string>>>& list) {
        std::vector<std::string> names;
        std::unordered_map<std::string, vertex_id> index;
        std::vector<Edge> edges;
        for (const auto& [en, vs] : list) {
            std::vector<vertex_id> ids;
            for (const auto& v : vs) {
                auto [it, fresh] = index.emplace(v, static_cast<vertex_id>(names.size()));
                if (fresh) names.push_back(v);
                ids.push_back(it->second);
            }
            edges.push_back({en, VertexSet(std::move(ids))});
        }
        return Hypergraph(std::move(names), std::move(edges));
    }

    std::size_t num_vertices() const { return vertex_names_.size(); }
    std::size_t num_edges() const { return edges_.size(); }
    const std::vector<Edge>& edges() const { return edges_; }
    const Edge& edge(edge_id e) const { return edges_.at(e); }
    const VertexSet& edge_vertices(edge_id e) const { return edges_.at(e).vertices; }
    const std::string& vertex_name(vertex_id v) const { return vertex_names_.at(v); }
    const std::vector<std::string>& vertex_names() const { return vertex_names_; }

    std::optional<vertex_id> find_vertex(std::string_view name) const {
        auto it = vertex_index_.find(std::string(name));
        if (it == vertex_index_.end()) return std::nullopt;
        return it->second;
    }
    std::optional<edge_id> find_edge(std::string_view name) const {
        auto it = edge_index_.find(std::string(name));
        if (it == edge_index_.end()) return std::nullopt;
        return it->second;
    }

    VertexSet all_vertices() const {
        std::vector<vertex_id> ids(num_vertices());
        for (vertex_id v = 0; v < ids.size(); ++v) ids[v] = v;
        return VertexSet::from_sorted(std::move(ids));
    }

    /// Gaifman neighbours of v (excluding v).
    const VertexSet& neighbours(vertex_id v) const { return adjacency_.at(v); }
    const std::vector<edge_id>& incident_edges(vertex_id v) const { return incidence_.at(v); }

    /// Edges whose vertex set repeats an earlier edge's set.
    std::vector<edge_id> duplicate_edges() const {
        std::map<VertexSet, edge_id> first;
        std::vector<edge_id> dup;
        for (edge_id e = 0; e < edges_.size(); ++e)
            if (!first.emplace(edges_[e].vertices, e).second) dup.push_back(e);
        return dup;
    }

    /// Resolves names or throws naming the first unknown one.
    VertexSet vertex_set(const std::vector<std::string>& names) const {
        std::vector<vertex_id> ids;
        for (const auto& n : names) {
            auto v = find_vertex(n);
            if (!v) throw std::invalid_argument("unknown vertex '" + n + "'");
            ids.push_back(*v);
        }
        return VertexSet(std::move(ids));
    }

    std::string format(const VertexSet& s) const {
        std::string out = "{";
        bool first = true;
        for (auto v : s) {
            if (!first) out += ',';
            out += vertex_names_[v];
            first = false;
        }
        return out + "}";
    }

    friend bool operator==(const Hypergraph& a, const Hypergraph& b) {
        if (a.vertex_names_ != b.vertex_names_ || a.edges_.size() != b.edges_.size()) return false;
        for (std::size_t i = 0; i < a.edges_.size(); ++i)
            if (a.edges_[i].name != b.edges_[i].name || a.edges_[i].vertices != b.edges_[i].vertices) return false;
        return true;
    }

private:
    void build_adjacency() {
        adjacency_.assign(num_vertices(), {});
        incidence_.assign(num_vertices(), {});
        std::vector<std::vector<vertex_id>> adj(num_vertices());
        for (edge_id e = 0; e < edges_.size(); ++e) {
            for (auto u : edges_[e].vertices) {
                incidence_[u].push_back(e);
                for (auto w : edges_[e].vertices)
                    if (u != w) adj[u].push_back(w);
            }
        }
        for (vertex_id v = 0; v < num_vertices(); ++v) adjacency_[v] = VertexSet(std::move(adj[v]));
    }

    std::vector<std::string> vertex_names_;
    std::vector<Edge> edges_;
    std::unordered_map<std::string, vertex_id> vertex_index_;
    std::unordered_map<std::string, edge_id> edge_index_;
    std::vector<VertexSet> adjacency_;
    std::vector<std::vector<edge_id>> incidence_;
};

inline bool is_identifier_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
}

/// Parses `name(v1,...)` statements separated by commas and/or newlines.
/// `%` starts a comment; a trailing `.` is tolerated.
inline Hypergraph parse_hypergraph(std::string_view text) {
    std::vector<std::pair<std::string, std::vector<std::string>>> list;
    std::size_t i = 0;
    int line = 1;
    auto skip = [&] {
        while (i < text.size()) {
            char c = text[i];
            if (c == '%') {
                while (i < text.size() && text[i] != '\n') ++i;
            } else if (c == '\n') {
                ++line, ++i;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++i;
            } else {
                break;
            }
        }
    };
    auto ident = [&](const char* what) {
        skip();
        std::size_t start = i;
        while (i < text.size() && is_identifier_char(text[i])) ++i;
        if (start == i) throw parse_error(std::string("expected ") + what, line);
        return std::string(text.substr(start, i - start));
    };
    auto expect = [&](char c) {
        skip();
        if (i >= text.size() || text[i] != c) throw parse_error(std::string("expected '") + c + "'", line);
        ++i;
    };

    for (;;) {
        skip();
        if (i >= text.size()) break;
        if (text[i] == ',' || text[i] == '.') {
            ++i;
            continue;
        }
        int edge_line = line;
        std::string name = ident("edge name");
        expect('(');
        std::vector<std::string> vs;
        skip();
        if (i < text.size() && text[i] == ')') throw parse_error("empty edge '" + name + "'", edge_line);
        for (;;) {
            vs.push_back(ident("vertex name"));
            skip();
            if (i < text.size() && text[i] == ',') {
                ++i;
                continue;
            }
            expect(')');
            break;
        }
        list.emplace_back(std::move(name), std::move(vs));
    }
    return Hypergraph::from_named_edges(list);
}

/// Inverse of parse_hypergraph: edges in id order, one per line.
inline std::string serialize_hypergraph(const Hypergraph& h) {
    std::ostringstream out;
    for (std::size_t e = 0; e < h.num_edges(); ++e) {
        const auto& ed = h.edge(static_cast<edge_id>(e));
        out << ed.name << '(';
        bool first = true;
        for (auto v : ed.vertices) {
            if (!first) out << ',';
            out << h.vertex_name(v);
            first = false;
        }
        out << ')' << (e + 1 < h.num_edges() ? ",\n" : ".\n");
    }
    return out.str();
}

struct EdgeComponent {
    std::vector<edge_id> edge_ids;
    VertexSet separator;

    VertexSet vertices(const Hypergraph& h) const {
        VertexSet out;
        for (auto e : edge_ids) out |= h.edge_vertices(e);
        return out;
    }
};

/// Partition of V(H) \ S into maximal [S]-connected classes, ordered by least vertex.
inline std::vector<VertexSet> s_components_vertices(const Hypergraph& h, const VertexSet& s) {
    std::vector<char> mark(h.num_vertices(), 0);
    for (auto v : s) mark[v] = 1;
    std::vector<VertexSet> out;
    for (vertex_id start = 0; start < h.num_vertices(); ++start) {
        if (mark[start]) continue;
        std::vector<vertex_id> comp{start}, stack{start};
        mark[start] = 1;
        while (!stack.empty()) {
            auto u = stack.back();
            stack.pop_back();
            for (auto w : h.neighbours(u)) {
                if (mark[w]) continue;
                mark[w] = 1;
                comp.push_back(w);
                stack.push_back(w);
            }
        }
        out.emplace_back(std::move(comp));
    }
    return out;
}

/// [sep]-components of edges; edges inside sep belong to none.
inline std::vector<EdgeComponent> lambda_components(const Hypergraph& h, const VertexSet& sep) {
    auto classes = s_components_vertices(h, sep);
    std::vector<int> cls(h.num_vertices(), -1);
    for (std::size_t c = 0; c < classes.size(); ++c)
        for (auto v : classes[c]) cls[v] = static_cast<int>(c);
    std::vector<EdgeComponent> out(classes.size());
    for (auto& c : out) c.separator = sep;
    for (edge_id e = 0; e < h.num_edges(); ++e) {
        for (auto v : h.edge_vertices(e)) {
            if (cls[v] >= 0) {
                out[static_cast<std::size_t>(cls[v])].edge_ids.push_back(e);
                break;
            }
        }
    }
    return out;
}

/// Vertex sets of the connected components of H.
inline std::vector<VertexSet> connected_components(const Hypergraph& h) {
    return s_components_vertices(h, {});
}

struct InducedSubhypergraph {
    Hypergraph graph;
    std::vector<vertex_id> vertex_origin;           // new id -> id in the source
    std::vector<std::vector<edge_id>> edge_origin;  // new edge -> source edges with that trace
};

/// H[U]: edges {e ∩ U} minus the empty set, identical traces merged.
inline InducedSubhypergraph induced_subhypergraph(const Hypergraph& h, const VertexSet& u) {
    InducedSubhypergraph out;
    std::vector<std::string> names;
    std::unordered_map<vertex_id, vertex_id> remap;
    for (auto v : u) {
        remap.emplace(v, static_cast<vertex_id>(names.size()));
        names.push_back(h.vertex_name(v));
        out.vertex_origin.push_back(v);
    }
    std::vector<Edge> edges;
    std::map<VertexSet, std::size_t> seen;
    for (edge_id e = 0; e < h.num_edges(); ++e) {
        auto trace = h.edge_vertices(e) & u;
        if (trace.empty()) continue;
        auto [it, fresh] = seen.emplace(trace, edges.size());
        if (fresh) {
            std::vector<vertex_id> ids;
            for (auto v : trace) ids.push_back(remap.at(v));
            edges.push_back({h.edge(e).name, VertexSet(std::move(ids))});
            out.edge_origin.push_back({e});
        } else {
            out.edge_origin[it->second].push_back(e);
        }
    }
    out.graph = Hypergraph(std::move(names), std::move(edges), true);
    return out;
}

namespace detail {

/// Bitset view of a hypergraph for the hot loops.
template <std::size_t W>
struct BitHypergraph {
    using B = Bits<W>;
    std::size_t n = 0;
    std::vector<B> edges;
    std::vector<B> adj;
    B all;

    explicit BitHypergraph(const Hypergraph& h) : n(h.num_vertices()), adj(h.num_vertices()) {
        for (const auto& e : h.edges()) edges.push_back(B::of(e.vertices));
        for (vertex_id v = 0; v < n; ++v) {
            adj[v] = B::of(h.neighbours(v));
            all.set(v);
        }
    }

    /// Maximal [sep]-connected vertex classes inside `within` (ordered by least vertex).
    std::vector<B> components(const B& sep, const B& within) const {
        std::vector<B> out;
        for_each_component(sep, within, [&](const B& c) {
            out.push_back(c);
            return true;
        });
        return out;
    }

    /// Calls f on each class until it returns false; returns false if stopped.
    template <class F>
    bool for_each_component(const B& sep, const B& within, F&& f) const {
        B rest = within - sep;
        while (rest.any()) {
            B comp, frontier;
            frontier.set(static_cast<std::size_t>(rest.lowest()));
            while (frontier.any()) {
                comp |= frontier;
                B next;
                frontier.for_each([&](vertex_id v) { next |= adj[v]; });
                frontier = (next & within) - sep - comp;
            }
            rest -= comp;
            if (!f(comp)) return false;
        }
        return true;
    }
    std::vector<B> components(const B& sep) const { return components(sep, all); }

    /// Vertices of S adjacent to C (the interface of block (S, C)).
    B boundary(const B& s, const B& c) const {
        B nb;
        c.for_each([&](vertex_id v) { nb |= adj[v]; });
        return nb & s;
    }
};

} // namespace detail

} // namespace softdecomp

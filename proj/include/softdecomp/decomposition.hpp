#pragma once

#include <algorithm>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hypergraph.hpp"

namespace softdecomp {

struct TdNode {
    VertexSet bag;
    int parent = -1;                // -1 for the root
    std::vector<edge_id> cover;     // original edges; empty when not attached
};

/// Rooted tree of bags. Nodes are stored with parents before children.
struct TreeDecomposition {
    std::vector<TdNode> nodes;

    bool empty() const { return nodes.empty(); }
    std::size_t size() const { return nodes.size(); }

    int root() const {
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].parent < 0) return static_cast<int>(i);
        return -1;
    }

    std::vector<std::vector<int>> children() const {
        std::vector<std::vector<int>> ch(nodes.size());
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].parent >= 0) ch[static_cast<std::size_t>(nodes[i].parent)].push_back(static_cast<int>(i));
        return ch;
    }

    bool has_covers() const {
        return !nodes.empty() && std::all_of(nodes.begin(), nodes.end(), [](const TdNode& n) { return !n.cover.empty(); });
    }

    std::size_t width() const {
        std::size_t w = 0;
        for (const auto& n : nodes) w = std::max(w, n.cover.size());
        return w;
    }

    int add(VertexSet bag, int parent) {
        nodes.push_back({std::move(bag), parent, {}});
        return static_cast<int>(nodes.size() - 1);
    }

    /// Appends `sub` below node `at` (sub's root becomes a child of at, or a root if at < 0).
    void graft(const TreeDecomposition& sub, int at) {
        const int offset = static_cast<int>(nodes.size());
        for (const auto& n : sub.nodes) {
            TdNode c = n;
            c.parent = n.parent < 0 ? at : n.parent + offset;
            nodes.push_back(std::move(c));
        }
    }

    /// Union of bags in the subtree rooted at u.
    VertexSet subtree_vertices(int u) const {
        auto ch = children();
        VertexSet out;
        std::vector<int> stack{u};
        while (!stack.empty()) {
            int x = stack.back();
            stack.pop_back();
            out |= nodes[static_cast<std::size_t>(x)].bag;
            for (int c : ch[static_cast<std::size_t>(x)]) stack.push_back(c);
        }
        return out;
    }

    /// Extracts the subtree rooted at u as its own decomposition.
    TreeDecomposition subtree(int u) const {
        auto ch = children();
        TreeDecomposition out;
        std::vector<std::pair<int, int>> stack{{u, -1}};
        while (!stack.empty()) {
            auto [x, p] = stack.back();
            stack.pop_back();
            TdNode n = nodes[static_cast<std::size_t>(x)];
            n.parent = p;
            out.nodes.push_back(std::move(n));
            int id = static_cast<int>(out.nodes.size() - 1);
            auto& cs = ch[static_cast<std::size_t>(x)];
            for (auto it = cs.rbegin(); it != cs.rend(); ++it) stack.push_back({*it, id});
        }
        return out;
    }
};

namespace detail {

inline std::string canonical_rec(const TreeDecomposition& td, const std::vector<std::vector<int>>& ch, int u) {
    std::string s = "(";
    for (auto v : td.nodes[static_cast<std::size_t>(u)].bag) s += std::to_string(v) + ",";
    std::vector<std::string> parts;
    for (int c : ch[static_cast<std::size_t>(u)]) parts.push_back(canonical_rec(td, ch, c));
    std::sort(parts.begin(), parts.end());
    for (auto& p : parts) s += p;
    return s + ")";
}

inline void canonical_seq_rec(const TreeDecomposition& td, const std::vector<std::vector<int>>& ch, int u,
                              std::vector<VertexSet>& out) {
    out.push_back(td.nodes[static_cast<std::size_t>(u)].bag);
    std::vector<std::pair<std::string, int>> order;
    for (int c : ch[static_cast<std::size_t>(u)]) order.push_back({canonical_rec(td, ch, c), c});
    std::sort(order.begin(), order.end());
    for (auto& [_, c] : order) canonical_seq_rec(td, ch, c, out);
}

} // namespace detail

/// Encoding of the rooted bag tree that is invariant under child order.
inline std::string canonical_form(const TreeDecomposition& td) {
    if (td.empty()) return "()";
    return detail::canonical_rec(td, td.children(), td.root());
}

/// Preorder bag sequence with children in canonical order.
inline std::vector<VertexSet> canonical_bag_sequence(const TreeDecomposition& td) {
    std::vector<VertexSet> out;
    if (!td.empty()) detail::canonical_seq_rec(td, td.children(), td.root(), out);
    return out;
}

/// One node per line: `id parent {bag} cover{e_i,...}`; the root's parent is `-`.
inline std::string format_td(const Hypergraph& h, const TreeDecomposition& td) {
    std::ostringstream out;
    for (std::size_t i = 0; i < td.nodes.size(); ++i) {
        const auto& n = td.nodes[i];
        out << i << ' ';
        if (n.parent < 0) out << '-';
        else out << n.parent;
        out << ' ' << h.format(n.bag) << " cover{";
        for (std::size_t j = 0; j < n.cover.size(); ++j) out << (j ? "," : "") << h.edge(n.cover[j]).name;
        out << "}\n";
    }
    return out.str();
}

inline TreeDecomposition parse_td(const Hypergraph& h, std::string_view text) {
    TreeDecomposition td;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    std::vector<int> ids;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find_first_of("#%");
        if (hash != std::string::npos) line.resize(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        std::string id, parent;
        if (!(ls >> id >> parent)) throw parse_error("expected `id parent {bag}`", lineno);
        auto lb = line.find('{'), rb = line.find('}');
        if (lb == std::string::npos || rb == std::string::npos || rb < lb) throw parse_error("missing bag braces", lineno);
        auto split = [&](const std::string& s) {
            std::vector<std::string> parts;
            std::string cur;
            for (char c : s) {
                if (c == ',') {
                    if (!cur.empty()) parts.push_back(cur);
                    cur.clear();
                } else if (!std::isspace(static_cast<unsigned char>(c))) {
                    cur += c;
                }
            }
            if (!cur.empty()) parts.push_back(cur);
            return parts;
        };
        TdNode node;
        try {
            node.bag = h.vertex_set(split(line.substr(lb + 1, rb - lb - 1)));
        } catch (const std::invalid_argument& e) {
            throw parse_error(e.what(), lineno);
        }
        auto cp = line.find("cover{", rb);
        if (cp != std::string::npos) {
            auto ce = line.find('}', cp);
            if (ce == std::string::npos) throw parse_error("unterminated cover", lineno);
            for (const auto& en : split(line.substr(cp + 6, ce - cp - 6))) {
                auto e = h.find_edge(en);
                if (!e) throw parse_error("unknown edge '" + en + "'", lineno);
                node.cover.push_back(*e);
            }
        }
        try {
            ids.push_back(std::stoi(id));
            node.parent = parent == "-" ? -1 : std::stoi(parent);
        } catch (const std::exception&) {
            throw parse_error("node ids must be integers", lineno);
        }
        td.nodes.push_back(std::move(node));
    }
    // remap written ids to positions
    for (auto& n : td.nodes) {
        if (n.parent < 0) continue;
        auto it = std::find(ids.begin(), ids.end(), n.parent);
        if (it == ids.end()) throw parse_error("unknown parent id " + std::to_string(n.parent), 0);
        n.parent = static_cast<int>(it - ids.begin());
    }
    return td;
}

inline std::string format_gml(const Hypergraph& h, const TreeDecomposition& td) {
    std::ostringstream out;
    out << "graph [\n  directed 1\n";
    for (std::size_t i = 0; i < td.nodes.size(); ++i) {
        out << "  node [\n    id " << i << "\n    label \"" << h.format(td.nodes[i].bag) << "\"\n";
        if (!td.nodes[i].cover.empty()) {
            out << "    cover \"";
            for (std::size_t j = 0; j < td.nodes[i].cover.size(); ++j)
                out << (j ? "," : "") << h.edge(td.nodes[i].cover[j]).name;
            out << "\"\n";
        }
        out << "  ]\n";
    }
    for (std::size_t i = 0; i < td.nodes.size(); ++i)
        if (td.nodes[i].parent >= 0) out << "  edge [\n    source " << td.nodes[i].parent << "\n    target " << i << "\n  ]\n";
    out << "]\n";
    return out.str();
}

} // namespace softdecomp

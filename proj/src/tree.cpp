#include "ltlm/tree.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

#include "ltlm/error.hpp"

namespace ltlm {

std::vector<int> ProjectiveTree::children(int node) const {
    std::vector<int> out;
    for (std::size_t a = 1; a < parent.size(); ++a)
        if (parent[a] == node) out.push_back(static_cast<int>(a));
    return out;
}

ProjectiveTree initial_tree(std::size_t length, InitStrategy strategy, int num_roles, Rng& rng) {
    if (num_roles < 1) throw DataError("number of roles must be positive");
    const std::size_t n = length + 1;
    ProjectiveTree tree(std::vector<int>(n, kNoParent), std::vector<Role>(n, kRootRole));

    if (strategy == InitStrategy::Chain) {
        for (std::size_t i = 1; i < n; ++i) tree.parent[i] = static_cast<int>(i) - 1;
    } else {
        // Left-to-right insertion. The new node hangs off some node p of the
        // right spine and may adopt a suffix of p's right children.
        std::vector<int> spine{0};
        std::vector<std::vector<int>> right_children(n);
        for (std::size_t i = 1; i < n; ++i) {
            std::vector<std::pair<std::size_t, std::size_t>> choices;
            for (std::size_t t = 0; t < spine.size(); ++t)
                for (std::size_t m = 0; m <= right_children[spine[t]].size(); ++m) choices.emplace_back(t, m);
            auto [t, m] = choices[rng.below(choices.size())];
            const int p = spine[t];
            auto& kids = right_children[p];
            for (std::size_t c = kids.size() - m; c < kids.size(); ++c) {
                tree.parent[kids[c]] = static_cast<int>(i);
            }
            kids.resize(kids.size() - m);
            kids.push_back(static_cast<int>(i));
            tree.parent[i] = p;
            spine.resize(t + 1);
            spine.push_back(static_cast<int>(i));
        }
    }
    for (std::size_t i = 1; i < n; ++i)
        tree.role[i] = 1 + static_cast<Role>(rng.below(static_cast<std::size_t>(num_roles)));
    return tree;
}

bool dominates(const ProjectiveTree& tree, int ancestor, int node) {
    std::size_t steps = 0;
    while (node != kNoParent && steps <= tree.n_nodes()) {
        if (node == ancestor) return true;
        node = tree.parent[node];
        ++steps;
    }
    return false;
}

bool is_projective(const ProjectiveTree& tree) {
    const std::size_t n = tree.n_nodes();
    if (n == 0 || tree.role.size() != n) return false;
    if (tree.parent[0] != kNoParent || tree.role[0] != kRootRole) return false;
    for (std::size_t i = 1; i < n; ++i) {
        const int p = tree.parent[i];
        if (p < 0 || static_cast<std::size_t>(p) >= n || p == static_cast<int>(i)) return false;
        if (tree.role[i] < 1) return false;
    }
    // Every node must reach 0 within n steps.
    for (std::size_t i = 1; i < n; ++i)
        if (!dominates(tree, 0, static_cast<int>(i))) return false;
    for (std::size_t d = 1; d < n; ++d) {
        const int h = tree.parent[d];
        const int lo = std::min<int>(h, static_cast<int>(d));
        const int hi = std::max<int>(h, static_cast<int>(d));
        for (int k = lo + 1; k < hi; ++k)
            if (!dominates(tree, h, k)) return false;
    }
    return true;
}

std::vector<std::pair<int, int>> subtree_spans(const ProjectiveTree& tree) {
    const int n = static_cast<int>(tree.n_nodes());
    std::vector<std::pair<int, int>> spans(n);
    for (int i = 0; i < n; ++i) spans[i] = {i, i};
    for (int i = 1; i < n; ++i) {
        std::size_t steps = 0;
        for (int a = tree.parent[i]; a != kNoParent && steps < tree.n_nodes(); a = tree.parent[a], ++steps) {
            spans[a].first = std::min(spans[a].first, i);
            spans[a].second = std::max(spans[a].second, i);
        }
    }
    return spans;
}

std::pair<int, int> subtree_span(const ProjectiveTree& tree, int node) {
    int lo = node, hi = node;
    for (int a = 1; a < static_cast<int>(tree.n_nodes()); ++a) {
        if (dominates(tree, node, a)) {
            lo = std::min(lo, a);
            hi = std::max(hi, a);
        }
    }
    return {lo, hi};
}

std::vector<int> valid_reattachments(const ProjectiveTree& tree, int node) {
    const int n = static_cast<int>(tree.n_nodes());
    if (node < 1 || node >= n) throw DataError("reattachment node out of range");

    // Detach the span [lo, hi] of node's subtree. In the remaining tree a
    // candidate parent j must have a subtree interval that touches the gap
    // (ends at lo-1 or starts at hi+1) and so must every ancestor of j up to
    // the deepest node whose interval straddles the gap. That leaves the
    // right spine above lo-1 and the left spine above hi+1, both stopping at
    // the deepest straddling node.
    const auto spans = subtree_spans(tree);
    const auto [lo, hi] = spans[node];
    auto right_end = [&](int u) { return spans[u].second == hi ? lo - 1 : spans[u].second; };
    auto left_end = [&](int u) { return spans[u].first == lo ? hi + 1 : spans[u].first; };

    std::vector<int> out;
    for (int u = lo - 1;;) {
        out.push_back(u);
        if (right_end(u) != lo - 1 || tree.parent[u] == kNoParent) break;
        u = tree.parent[u];
    }
    if (hi + 1 < n) {
        for (int u = hi + 1;;) {
            out.push_back(u);
            if (left_end(u) != hi + 1 || tree.parent[u] == kNoParent) break;
            u = tree.parent[u];
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void apply_partial_change_in_place(ProjectiveTree& tree, const PartialChange& change) {
    if (change.node < 1 || change.node >= static_cast<int>(tree.n_nodes()))
        throw DataError("partial change: node out of range");
    if (change.new_role < 1) throw DataError("partial change: role must be at least 1");
    if (change.new_parent != tree.parent[change.node]) {
        const auto options = valid_reattachments(tree, change.node);
        if (!std::binary_search(options.begin(), options.end(), change.new_parent))
            throw DataError("would violate projectivity");
    }
    tree.parent[change.node] = change.new_parent;
    tree.role[change.node] = change.new_role;
}

ProjectiveTree apply_partial_change(const ProjectiveTree& tree, const PartialChange& change) {
    ProjectiveTree out = tree;
    apply_partial_change_in_place(out, change);
    return out;
}

namespace {

// Enumerates every forest over [lo, hi] whose roots attach to `head`,
// calling `done` once per completed forest.
void gen_forest(std::vector<int>& parent, int lo, int hi, int head, const std::function<void()>& done) {
    if (lo > hi) {
        done();
        return;
    }
    // The first tree of the forest covers [lo, end] and is rooted at r.
    for (int end = lo; end <= hi; ++end) {
        for (int r = lo; r <= end; ++r) {
            parent[r] = head;
            gen_forest(parent, lo, r - 1, r, [&] {
                gen_forest(parent, r + 1, end, r, [&] { gen_forest(parent, end + 1, hi, head, done); });
            });
        }
    }
}

}  // namespace

void for_each_projective_tree(std::size_t length, const std::function<void(const std::vector<int>&)>& visit,
                              std::size_t bound) {
    if (length > bound)
        throw DataError("tree enumeration bound exceeded: " + std::to_string(length) + " > " +
                        std::to_string(bound));
    std::vector<int> parent(length + 1, kNoParent);
    gen_forest(parent, 1, static_cast<int>(length), 0, [&] { visit(parent); });
}

std::vector<std::vector<int>> enumerate_projective_trees(std::size_t length, std::size_t bound) {
    std::vector<std::vector<int>> out;
    for_each_projective_tree(length, [&](const std::vector<int>& p) { out.push_back(p); }, bound);
    return out;
}

void write_tree_tsv(std::ostream& out, const Sentence& sentence, const ProjectiveTree& tree,
                    const Vocabulary& vocab) {
    for (std::size_t i = 1; i < tree.n_nodes(); ++i)
        out << i << '\t' << vocab.word(sentence.tokens[i]) << '\t' << tree.role[i] << '\t' << tree.parent[i]
            << '\n';
    out << '\n';
}

std::vector<TreeRecord> read_tree_tsv(std::istream& in) {
    std::vector<TreeRecord> records;
    TreeRecord current;
    current.tree = ProjectiveTree({kNoParent}, {kRootRole});
    bool open = false;
    std::string line;
    std::size_t lineno = 0;

    auto finish = [&] {
        if (open) {
            for (std::size_t i = 1; i < current.tree.role.size(); ++i)
                if (current.tree.role[i] < 1)
                    throw FormatError("tree file: role must be at least 1 near line " + std::to_string(lineno));
            if (!is_projective(current.tree))
                throw FormatError("tree file: not a projective tree near line " + std::to_string(lineno));
            records.push_back(std::move(current));
        }
        current = TreeRecord{};
        current.tree = ProjectiveTree({kNoParent}, {kRootRole});
        open = false;
    };

    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            finish();
            continue;
        }
        if (line[0] == '#') {
            current.comments.push_back(line);
            continue;
        }
        std::istringstream fields(line);
        std::string pos_s, word, role_s, parent_s;
        if (!std::getline(fields, pos_s, '\t') || !std::getline(fields, word, '\t') ||
            !std::getline(fields, role_s, '\t') || !std::getline(fields, parent_s))
            throw FormatError("tree file: malformed line " + std::to_string(lineno));
        long pos = 0, role = 0, parent = 0;
        try {
            pos = std::stol(pos_s);
            role = std::stol(role_s);
            parent = std::stol(parent_s);
        } catch (const std::exception&) {
            throw FormatError("tree file: bad number on line " + std::to_string(lineno));
        }
        if (pos != static_cast<long>(current.words.size()) + 1)
            throw FormatError("tree file: positions must run 1..N, line " + std::to_string(lineno));
        current.words.push_back(word);
        current.tree.parent.push_back(static_cast<int>(parent));
        current.tree.role.push_back(static_cast<Role>(role));
        open = true;
    }
    finish();
    return records;
}

void write_tree_dot(std::ostream& out, const std::vector<std::string>& words, const ProjectiveTree& tree,
                    const std::string& graph_name) {
    auto escape = [](const std::string& s) {
        std::string e;
        for (char c : s) {
            if (c == '"' || c == '\\') e += '\\';
            e += c;
        }
        return e;
    };
    out << "digraph \"" << escape(graph_name) << "\" {\n";
    out << "  ordering=out;\n  node [shape=box, fontname=\"Helvetica\"];\n";
    out << "  n0 [label=\"<s>\\nrole 1\"];\n";
    for (std::size_t i = 1; i < tree.n_nodes(); ++i) {
        const std::string w = i - 1 < words.size() ? words[i - 1] : "?";
        out << "  n" << i << " [label=\"" << escape(w) << "\\nrole " << tree.role[i] << "\"];\n";
    }
    // Keep words in sentence order.
    out << "  { rank=same;";
    for (std::size_t i = 0; i < tree.n_nodes(); ++i) out << " n" << i << ";";
    out << " }\n";
    for (std::size_t i = 0; i + 1 < tree.n_nodes(); ++i)
        out << "  n" << i << " -> n" << i + 1 << " [style=invis];\n";
    for (std::size_t i = 1; i < tree.n_nodes(); ++i)
        out << "  n" << tree.parent[i] << " -> n" << i << " [constraint=false];\n";
    out << "}\n";
}

}  // namespace ltlm

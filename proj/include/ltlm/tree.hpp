#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ltlm/corpus.hpp"
#include "ltlm/rng.hpp"

namespace ltlm {

// Roles are 1-based everywhere in the public interface.
using Role = int;

inline constexpr int kNoParent = -1;
inline constexpr Role kRootRole = 1;

enum class Side { Left, Right };

// Side of `child` relative to its head.
inline Side side_of(int child, int head) { return child < head ? Side::Left : Side::Right; }

// Dependency tree over positions 0..N with roles. parent[0] is kNoParent and
// role[0] is pinned to kRootRole.
struct ProjectiveTree {
    std::vector<int> parent;
    std::vector<Role> role;

    ProjectiveTree() = default;
    ProjectiveTree(std::vector<int> parents, std::vector<Role> roles)
        : parent(std::move(parents)), role(std::move(roles)) {}

    std::size_t n_nodes() const { return parent.size(); }
    std::size_t length() const { return parent.empty() ? 0 : parent.size() - 1; }

    std::vector<int> children(int node) const;

    bool operator==(const ProjectiveTree&) const = default;
};

struct PartialChange {
    int node = 1;
    int new_parent = 0;
    Role new_role = 1;
};

enum class InitStrategy { Chain, RandomProjective };

// Roles are drawn uniformly from 1..num_roles, except the root.
ProjectiveTree initial_tree(std::size_t length, InitStrategy strategy, int num_roles, Rng& rng);

// Structural check (parent[0] sentinel, in-range parents, root role, acyclic,
// rooted at 0) plus the no-crossing path condition for every edge.
bool is_projective(const ProjectiveTree& tree);

// True when `ancestor` lies on the path from the root to `node` (inclusive).
bool dominates(const ProjectiveTree& tree, int ancestor, int node);

// Positions covered by the subtree rooted at `node`, for a projective tree.
std::pair<int, int> subtree_span(const ProjectiveTree& tree, int node);

// All subtree spans at once (index = node).
std::vector<std::pair<int, int>> subtree_spans(const ProjectiveTree& tree);

// Exact set of parents `node` may be moved to while keeping the tree
// projective, in ascending order. Always contains the current parent.
std::vector<int> valid_reattachments(const ProjectiveTree& tree, int node);

// Throws DataError("would violate projectivity") for an invalid move.
ProjectiveTree apply_partial_change(const ProjectiveTree& tree, const PartialChange& change);
void apply_partial_change_in_place(ProjectiveTree& tree, const PartialChange& change);

inline constexpr std::size_t kDefaultEnumerationBound = 8;

// Visits the parent array of every projective tree over 0..length exactly
// once. Throws when length exceeds `bound`.
void for_each_projective_tree(std::size_t length,
                              const std::function<void(const std::vector<int>&)>& visit,
                              std::size_t bound = kDefaultEnumerationBound);
std::vector<std::vector<int>> enumerate_projective_trees(std::size_t length,
                                                         std::size_t bound = kDefaultEnumerationBound);

// CoNLL-like TSV: `position<TAB>word<TAB>role<TAB>parent` for positions 1..N,
// blank line after each sentence. Lines starting with '#' are comments.
void write_tree_tsv(std::ostream& out, const Sentence& sentence, const ProjectiveTree& tree,
                    const Vocabulary& vocab);

struct TreeRecord {
    std::vector<std::string> words;  // positions 1..N
    ProjectiveTree tree;
    std::vector<std::string> comments;
};

std::vector<TreeRecord> read_tree_tsv(std::istream& in);

// Graphviz rendering of one sentence: words as nodes labelled with roles.
void write_tree_dot(std::ostream& out, const std::vector<std::string>& words,
                    const ProjectiveTree& tree, const std::string& graph_name);

}  // namespace ltlm

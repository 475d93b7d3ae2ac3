#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "ltlm/corpus.hpp"
#include "ltlm/model.hpp"
#include "ltlm/tree.hpp"

namespace ltlm {

struct InferenceResult {
    ProjectiveTree tree;
    double log_prob = 0.0;  // log P(w_s, G_s)
};

// Bottom-up span chart over positions 1..N for a frozen model.
//
//   subtree(a, c, m): best subtree covering exactly [a, c] whose root has
//                     role m, including the root's word; single-word spans
//                     hold log P(w_a | m).
//   forest(a, c, k, side, arity): best sequence of sibling subtrees covering
//                     [a, c], all hanging on a head with role k; `side` is
//                     where the children sit relative to that head. Arity
//                     is One for a single subtree and TwoPlus for two or
//                     more.
//
// Empty spans have log probability 0. All values are natural logs.
class Chart {
public:
    enum class Arity { One, TwoPlus };

    Chart(const LtlmModel& model, const Sentence& sentence);

    std::size_t length() const { return n_; }
    double subtree(int a, int c, Role m) const;
    double forest(int a, int c, Role k, Side child_side, Arity arity) const;
    double forest(int a, int c, Role k, Side child_side) const;  // max over arity

    // log P of the best tree: forest over [1, N] under the root (role 1).
    double best_log_prob() const;
    ProjectiveTree best_tree() const;

private:
    struct SubtreeCell {
        double score;
        int root;
    };
    struct ForestCell {
        double one;     // single subtree
        Role one_role;  // its root role
        double two;     // split into two forests
        int split;      // last position of the left part
    };

    std::size_t sub_idx(int a, int c, Role m) const;
    std::size_t forest_idx(int a, int c, Role k, Side side) const;
    double forest_best(int a, int c, Role k, Side side) const;
    void trace_subtree(int a, int c, Role m, int head, ProjectiveTree& tree) const;
    void trace_forest(int a, int c, Role k, Side side, int head, ProjectiveTree& tree) const;

    std::size_t n_;
    int roles_;
    std::vector<SubtreeCell> sub_;
    std::vector<ForestCell> forest_;
};

// Exact maximiser of P(w_s, G_s) over projective trees and roles.
InferenceResult infer_deterministic(const LtlmModel& model, const Sentence& sentence);

struct GibbsInferenceConfig {
    int iters_per_position = 100;
    int iters_per_sentence = 100;
    std::uint64_t seed = 1;
};

// Gibbs sampling over the tree and roles of one sentence with the model held
// fixed. Returns the most probable state visited.
InferenceResult infer_nondeterministic(const LtlmModel& model, const Sentence& sentence,
                                       const GibbsInferenceConfig& config);

inline constexpr std::size_t kBruteForceMaxLength = 6;
inline constexpr int kBruteForceMaxRoles = 4;

// Exhaustive search over every projective tree and role assignment.
InferenceResult brute_force_best(const LtlmModel& model, const Sentence& sentence,
                                 std::size_t max_length = kBruteForceMaxLength,
                                 int max_roles = kBruteForceMaxRoles);

// P(w_i | role of head(i)) = sum_k P(w_i | k) P(k | head role, side), i >= 1.
std::vector<double> word_probabilities(const LtlmModel& model, const Sentence& sentence,
                                       const ProjectiveTree& tree);

// Full distribution over the vocabulary at position i.
std::vector<double> substitution_distribution(const LtlmModel& model, const ProjectiveTree& tree, int i);

// For each position 1..N, the n most probable vocabulary words under the
// position distribution, descending, ties by word id.
std::vector<std::vector<std::pair<WordId, double>>> top_substitutions(const LtlmModel& model,
                                                                      const Sentence& sentence,
                                                                      const ProjectiveTree& tree, std::size_t n);

}  // namespace ltlm

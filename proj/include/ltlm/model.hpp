#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ltlm/corpus.hpp"
#include "ltlm/tree.hpp"

namespace ltlm {

struct Hyperparams {
    std::vector<double> alpha_left;   // prior of children left of their head
    std::vector<double> alpha_right;  // prior of children right of their head
    double beta = 0.01;               // symmetric word-in-role prior

    // 50/K for every alpha entry, beta = 0.01.
    static Hyperparams defaults(int num_roles);

    const std::vector<double>& alpha(Side side) const { return side == Side::Left ? alpha_left : alpha_right; }
    bool valid() const;
    bool operator==(const Hyperparams&) const = default;
};

// Sufficient statistics of an assignment of roles and trees to a corpus.
class CountTables {
public:
    CountTables() = default;
    CountTables(int num_roles, std::size_t vocab_size);

    // Tally over positions i >= 1 of every sentence.
    static CountTables tally(const Corpus& corpus, std::span<const ProjectiveTree> trees, int num_roles,
                             std::size_t vocab_size);

    int num_roles() const { return num_roles_; }
    std::size_t vocab_size() const { return vocab_size_; }

    std::int64_t word_role(WordId w, Role k) const { return word_role_[idx_word(w, k)]; }
    std::int64_t role_total(Role k) const { return role_total_[k - 1]; }
    std::int64_t role_role(Side side, Role parent, Role child) const { return rr(side)[idx_rr(parent, child)]; }
    std::int64_t parent_total(Side side, Role parent) const { return rr_total(side)[parent - 1]; }
    std::int64_t total_words() const;
    std::int64_t total_edges(Side side) const;

    // Throw InvariantError if any count would go negative.
    void add_word(WordId w, Role k, int delta);
    void add_edge(Side side, Role parent, Role child, int delta);

    // Word of node i plus the edge to its head. Edges to i's children are not
    // touched.
    void add_node(const Sentence& sentence, const ProjectiveTree& tree, int i, int delta);

    // Raw table access for hyperparameter estimation (row-major).
    std::span<const std::int64_t> word_role_table() const { return word_role_; }  // V x K
    std::span<const std::int64_t> role_role_table(Side side) const { return rr(side); }  // K x K, row = parent

    bool operator==(const CountTables&) const = default;

private:
    std::size_t idx_word(WordId w, Role k) const { return static_cast<std::size_t>(w) * num_roles_ + (k - 1); }
    std::size_t idx_rr(Role p, Role c) const { return static_cast<std::size_t>(p - 1) * num_roles_ + (c - 1); }
    const std::vector<std::int64_t>& rr(Side s) const { return s == Side::Left ? rr_left_ : rr_right_; }
    std::vector<std::int64_t>& rr(Side s) { return s == Side::Left ? rr_left_ : rr_right_; }
    const std::vector<std::int64_t>& rr_total(Side s) const { return s == Side::Left ? rr_left_total_ : rr_right_total_; }
    std::vector<std::int64_t>& rr_total(Side s) { return s == Side::Left ? rr_left_total_ : rr_right_total_; }

    int num_roles_ = 0;
    std::size_t vocab_size_ = 0;
    std::vector<std::int64_t> word_role_;
    std::vector<std::int64_t> role_total_;
    std::vector<std::int64_t> rr_left_, rr_right_;
    std::vector<std::int64_t> rr_left_total_, rr_right_total_;
};

// One observation to leave out of a predictive evaluation.
struct WordExclusion {
    WordId word;
    Role role;
};
struct EdgeExclusion {
    Role parent;
    Role child;
};

// (n(w|k) + beta) / (n(.|k) + |L| beta)
double predictive_word(const CountTables& counts, WordId w, Role k, double beta,
                       std::optional<WordExclusion> exclude = std::nullopt);

// (n(k|p) + alpha_k) / (n(.|p) + sum alpha), on the table of `side`.
double predictive_role(const CountTables& counts, Role k, Role parent, Side side, std::span<const double> alpha,
                       std::optional<EdgeExclusion> exclude = std::nullopt);

// Predictive evaluation with the prior sums cached; used by the sampler.
class Predictive {
public:
    Predictive(const CountTables& counts, const Hyperparams& hyper);

    double word(WordId w, Role k) const {
        return (static_cast<double>(counts_->word_role(w, k)) + beta_) /
               (static_cast<double>(counts_->role_total(k)) + beta_vocab_);
    }
    double role(Role k, Role parent, Side side) const {
        const auto& a = hyper_->alpha(side);
        return (static_cast<double>(counts_->role_role(side, parent, k)) + a[k - 1]) /
               (static_cast<double>(counts_->parent_total(side, parent)) +
                (side == Side::Left ? alpha_sum_left_ : alpha_sum_right_));
    }

private:
    const CountTables* counts_;
    const Hyperparams* hyper_;
    double beta_, beta_vocab_, alpha_sum_left_, alpha_sum_right_;
};

// Unnormalised probability that node i takes role k under parent j: word
// factor, role-given-parent factor, and one factor per child of i. `counts`
// must already exclude every observation that involves node i.
double joint_score(const CountTables& counts, const Hyperparams& hyper, const Sentence& sentence,
                   const ProjectiveTree& tree, int i, int j, Role k);

// Dense row-major matrix.
struct Table {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;

    Table() = default;
    Table(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
    bool operator==(const Table&) const = default;
};

// Rows indexed by role-1; phi is K x |L|, theta is K x K with row = parent.
Table estimate_phi(const CountTables& counts, double beta);
Table estimate_theta(const CountTables& counts, std::span<const double> alpha, Side side);

// Frozen parameters after training.
struct LtlmModel {
    int num_roles = 0;
    std::size_t vocab_size = 0;
    std::uint64_t vocab_hash = 0;
    Hyperparams hyper;
    Table phi;
    Table theta_left;
    Table theta_right;

    double word_prob(WordId w, Role k) const { return phi(k - 1, w); }
    double role_prob(Role child, Role parent, Side side) const {
        return (side == Side::Left ? theta_left : theta_right)(parent - 1, child - 1);
    }

    // log P(w_s, G_s) = sum over i >= 1 of log phi + log theta(side).
    double log_joint(const Sentence& sentence, const ProjectiveTree& tree) const;

    bool operator==(const LtlmModel&) const = default;
};

LtlmModel estimate_model(const CountTables& counts, const Hyperparams& hyper, std::uint64_t vocab_hash = 0);

struct FixedPointOptions {
    int max_iterations = 2000;
    double tolerance = 1e-12;  // max relative change per iteration
};

struct FixedPointResult {
    std::vector<double> alpha;
    int iterations = 0;
    bool converged = false;
    bool finite = true;
};

// Asymmetric Dirichlet-multinomial evidence maximisation, one row of `counts`
// per context (row-major, contexts x categories).
FixedPointResult fit_dirichlet_asymmetric(std::span<const std::int64_t> counts, std::size_t num_contexts,
                                          std::size_t num_categories, std::vector<double> alpha,
                                          const FixedPointOptions& opts = {});

// Symmetric variant: one shared concentration over `num_categories`. Only
// the multiset of cell counts matters, so `cells` may be in any layout;
// `context_totals` holds one row sum per context.
FixedPointResult fit_dirichlet_symmetric(std::span<const std::int64_t> cells,
                                         std::span<const std::int64_t> context_totals,
                                         std::size_t num_categories, double beta,
                                         const FixedPointOptions& opts = {});

struct HyperUpdate {
    Hyperparams hyper;
    std::vector<std::string> warnings;
};

// Re-estimates alpha_left, alpha_right and beta from the current counts.
// Tables without observations keep their previous values.
HyperUpdate update_hyperparameters(const CountTables& counts, const Hyperparams& current,
                                   const FixedPointOptions& opts = {});

std::string serialize(const LtlmModel& model);
LtlmModel deserialize(std::string_view bytes);
void save_model(const LtlmModel& model, const std::filesystem::path& path);
LtlmModel load_model(const std::filesystem::path& path);

}  // namespace ltlm

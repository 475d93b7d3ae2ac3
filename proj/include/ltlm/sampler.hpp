#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ltlm/corpus.hpp"
#include "ltlm/model.hpp"
#include "ltlm/rng.hpp"
#include "ltlm/tree.hpp"

namespace ltlm {

enum class TrainMode { Ltlm, StlmFixedTrees };

struct TrainConfig {
    int num_roles = 10;
    int iters_per_position = 500;
    int iters_per_sentence = 500;
    std::uint64_t seed = 1;
    int hyper_update_every = 20;  // 0 disables re-estimation
    TrainMode mode = TrainMode::Ltlm;
    std::size_t max_sentence_len = 30;
    InitStrategy init = InitStrategy::Chain;

    void validate() const;
};

// Everything Gibbs sampling mutates. Holds a pointer to the corpus, which
// must outlive the state.
class TrainState {
public:
    // Initial trees from config.init with uniformly random roles.
    TrainState(const Corpus& corpus, std::size_t vocab_size, const TrainConfig& config);
    // Given trees (roles inside them are kept as the starting assignment).
    TrainState(const Corpus& corpus, std::size_t vocab_size, std::vector<ProjectiveTree> trees,
               const TrainConfig& config);

    const Corpus& corpus() const { return *corpus_; }
    const Sentence& sentence(std::size_t s) const { return corpus_->sentences[s]; }
    int num_roles() const { return num_roles_; }
    TrainMode mode() const { return mode_; }

    // Removes (delta=-1) or restores (+1) every count that involves node i:
    // its word, the edge to its head and the edges to its children.
    void update_node_counts(std::size_t s, int i, int delta);

    // Moves node i to (parent, role) keeping counts consistent. No validity
    // check; callers pass members of the candidate set.
    void reassign(std::size_t s, int i, int parent, Role role);

    CountTables rebuild_counts() const;

    std::vector<ProjectiveTree> trees;
    CountTables counts;
    Hyperparams hyper;
    Rng rng;
    int iteration = 0;

private:
    const Corpus* corpus_;
    int num_roles_;
    TrainMode mode_;
};

struct WeightedChange {
    PartialChange change;
    double probability;
};

// Normalised sampling distribution for node i over (parent, role): parents
// from valid_reattachments (or the fixed head in STLM mode), all roles.
std::vector<WeightedChange> position_distribution(TrainState& state, std::size_t s, int i);

// Normalised distribution over every valid (node, parent, role) triple of a
// sentence, proportional to the ratio of post-change to pre-change score.
std::vector<WeightedChange> sentence_distribution(TrainState& state, std::size_t s);

PartialChange sample_position(TrainState& state, std::size_t s, int i);
PartialChange sample_sentence(TrainState& state, std::size_t s);

// One pass: every position of every sentence, in corpus order.
void per_position_pass(TrainState& state);
// One pass: one partial change per sentence.
void per_sentence_pass(TrainState& state);

// exp(-(1/N) log P(w, G)) with P from the current smoothed estimates.
double joint_perplexity(const TrainState& state);
double joint_perplexity(const LtlmModel& model, const Corpus& corpus, std::span<const ProjectiveTree> trees);

struct TrainResult {
    LtlmModel model;
    std::vector<ProjectiveTree> trees;
    Hyperparams hyper;
    std::vector<std::string> warnings;
};

// Called after every completed iteration (1-based).
using IterationCallback = std::function<void(const TrainState&, int iteration)>;

// Per-position passes, then per-sentence passes; hyperparameters are
// re-estimated every hyper_update_every iterations.
TrainResult train(const Corpus& corpus, std::size_t vocab_size, const TrainConfig& config,
                  const IterationCallback& on_iteration = {}, std::uint64_t vocab_hash = 0);

// Same schedule with trees held fixed: only roles are sampled.
TrainResult stlm_train(const Corpus& corpus, std::size_t vocab_size, std::vector<ProjectiveTree> gold_trees,
                       TrainConfig config, const IterationCallback& on_iteration = {},
                       std::uint64_t vocab_hash = 0);

// Runs an already constructed state through the configured schedule.
TrainResult run_training(TrainState& state, const TrainConfig& config, const IterationCallback& on_iteration,
                         std::uint64_t vocab_hash);

}  // namespace ltlm

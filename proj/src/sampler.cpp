#include "ltlm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ltlm/error.hpp"

namespace ltlm {

void TrainConfig::validate() const {
    if (num_roles < 2) throw DataError("number of roles must be at least 2");
    if (iters_per_position < 0 || iters_per_sentence < 0) throw DataError("iteration counts must be non-negative");
    if (hyper_update_every < 0) throw DataError("hyperparameter update cadence must be non-negative");
    if (max_sentence_len < 1) throw DataError("max sentence length must be positive");
}

TrainState::TrainState(const Corpus& corpus, std::size_t vocab_size, const TrainConfig& config)
    : hyper(Hyperparams::defaults(config.num_roles)),
      rng(config.seed),
      corpus_(&corpus),
      num_roles_(config.num_roles),
      mode_(config.mode) {
    trees.reserve(corpus.size());
    for (const auto& s : corpus.sentences) trees.push_back(initial_tree(s.length(), config.init, num_roles_, rng));
    counts = CountTables::tally(corpus, trees, num_roles_, vocab_size);
}

TrainState::TrainState(const Corpus& corpus, std::size_t vocab_size, std::vector<ProjectiveTree> given,
                       const TrainConfig& config)
    : trees(std::move(given)),
      hyper(Hyperparams::defaults(config.num_roles)),
      rng(config.seed),
      corpus_(&corpus),
      num_roles_(config.num_roles),
      mode_(config.mode) {
    if (trees.size() != corpus.size()) throw DataError("one tree per sentence required");
    for (std::size_t s = 0; s < trees.size(); ++s) {
        if (trees[s].n_nodes() != corpus.sentences[s].tokens.size())
            throw DataError("tree " + std::to_string(s) + " does not match its sentence length");
        if (!is_projective(trees[s])) throw DataError("non-projective input tree at sentence " + std::to_string(s));
        for (Role r : trees[s].role)
            if (r < 1 || r > num_roles_) throw DataError("tree role out of range at sentence " + std::to_string(s));
    }
    counts = CountTables::tally(corpus, trees, num_roles_, vocab_size);
}

void TrainState::update_node_counts(std::size_t s, int i, int delta) {
    const auto& sent = corpus_->sentences[s];
    const auto& tree = trees[s];
    counts.add_node(sent, tree, i, delta);
    for (std::size_t a = 1; a < tree.n_nodes(); ++a)
        if (tree.parent[a] == i)
            counts.add_edge(side_of(static_cast<int>(a), i), tree.role[i], tree.role[a], delta);
}

void TrainState::reassign(std::size_t s, int i, int parent, Role role) {
    update_node_counts(s, i, -1);
    trees[s].parent[i] = parent;
    trees[s].role[i] = role;
    update_node_counts(s, i, +1);
}

CountTables TrainState::rebuild_counts() const {
    return CountTables::tally(*corpus_, trees, num_roles_, counts.vocab_size());
}

namespace {

struct LogCandidate {
    PartialChange change;
    double log_weight;
};

// Log scores of every candidate (parent, role) for node i. Counts must
// already exclude node i.
void score_candidates(const TrainState& state, std::size_t s, int i, std::vector<LogCandidate>& out) {
    const auto& tree = state.trees[s];
    const auto& sent = state.sentence(s);
    const int K = state.num_roles();
    const Predictive pred(state.counts, state.hyper);

    std::vector<int> parents;
    if (state.mode() == TrainMode::Ltlm)
        parents = valid_reattachments(tree, i);
    else
        parents = {tree.parent[i]};

    std::vector<double> base(K);
    const auto kids = tree.children(i);
    for (Role k = 1; k <= K; ++k) {
        double b = std::log(pred.word(sent.tokens[i], k));
        for (int a : kids) b += std::log(pred.role(tree.role[a], k, side_of(a, i)));
        base[k - 1] = b;
    }
    for (int j : parents) {
        const Side side = side_of(i, j);
        for (Role k = 1; k <= K; ++k)
            out.push_back({{i, j, k}, base[k - 1] + std::log(pred.role(k, tree.role[j], side))});
    }
}

std::vector<WeightedChange> normalise(const std::vector<LogCandidate>& cands) {
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& c : cands) mx = std::max(mx, c.log_weight);
    if (!std::isfinite(mx)) throw InvariantError("all candidate scores are zero");
    std::vector<WeightedChange> out;
    out.reserve(cands.size());
    double total = 0.0;
    for (const auto& c : cands) {
        const double w = std::exp(c.log_weight - mx);
        out.push_back({c.change, w});
        total += w;
    }
    for (auto& c : out) c.probability /= total;
    return out;
}

PartialChange draw(TrainState& state, std::size_t s, const std::vector<WeightedChange>& dist) {
    std::vector<double> w(dist.size());
    for (std::size_t n = 0; n < dist.size(); ++n) w[n] = dist[n].probability;
    const std::size_t pick = state.rng.categorical(w);
    if (pick >= dist.size()) throw InvariantError("empty sampling distribution");
    const auto& ch = dist[pick].change;
    state.reassign(s, ch.node, ch.new_parent, ch.new_role);
    return ch;
}

}  // namespace

std::vector<WeightedChange> position_distribution(TrainState& state, std::size_t s, int i) {
    if (i < 1 || static_cast<std::size_t>(i) >= state.trees[s].n_nodes())
        throw DataError("sampling position out of range");
    std::vector<LogCandidate> cands;
    state.update_node_counts(s, i, -1);
    score_candidates(state, s, i, cands);
    state.update_node_counts(s, i, +1);
    return normalise(cands);
}

std::vector<WeightedChange> sentence_distribution(TrainState& state, std::size_t s) {
    const auto& tree = state.trees[s];
    if (tree.length() == 0) throw DataError("sentence has no words");
    std::vector<LogCandidate> all, local;
    for (int i = 1; i < static_cast<int>(tree.n_nodes()); ++i) {
        local.clear();
        state.update_node_counts(s, i, -1);
        score_candidates(state, s, i, local);
        state.update_node_counts(s, i, +1);
        double current = std::numeric_limits<double>::quiet_NaN();
        for (const auto& c : local)
            if (c.change.new_parent == tree.parent[i] && c.change.new_role == tree.role[i]) current = c.log_weight;
        if (std::isnan(current)) throw InvariantError("current assignment missing from candidate set");
        for (auto& c : local) all.push_back({c.change, c.log_weight - current});
    }
    return normalise(all);
}

PartialChange sample_position(TrainState& state, std::size_t s, int i) {
    return draw(state, s, position_distribution(state, s, i));
}

PartialChange sample_sentence(TrainState& state, std::size_t s) {
    return draw(state, s, sentence_distribution(state, s));
}

void per_position_pass(TrainState& state) {
    for (std::size_t s = 0; s < state.trees.size(); ++s)
        for (int i = 1; i < static_cast<int>(state.trees[s].n_nodes()); ++i) sample_position(state, s, i);
}

void per_sentence_pass(TrainState& state) {
    for (std::size_t s = 0; s < state.trees.size(); ++s)
        if (state.trees[s].length() > 0) sample_sentence(state, s);
}

double joint_perplexity(const LtlmModel& model, const Corpus& corpus, std::span<const ProjectiveTree> trees) {
    const std::size_t n = corpus.token_count();
    if (n == 0) throw DataError("empty corpus");
    double lp = 0.0;
    for (std::size_t s = 0; s < corpus.size(); ++s) lp += model.log_joint(corpus.sentences[s], trees[s]);
    return std::exp(-lp / static_cast<double>(n));
}

double joint_perplexity(const TrainState& state) {
    return joint_perplexity(estimate_model(state.counts, state.hyper), state.corpus(), state.trees);
}

TrainResult run_training(TrainState& state, const TrainConfig& config, const IterationCallback& on_iteration,
                         std::uint64_t vocab_hash) {
    TrainResult result;
    auto after_iteration = [&] {
        ++state.iteration;
        if (config.hyper_update_every > 0 && state.iteration % config.hyper_update_every == 0) {
            auto upd = update_hyperparameters(state.counts, state.hyper);
            state.hyper = std::move(upd.hyper);
            for (auto& w : upd.warnings)
                result.warnings.push_back("iteration " + std::to_string(state.iteration) + ": " + w);
        }
        if (on_iteration) on_iteration(state, state.iteration);
    };
    for (int it = 0; it < config.iters_per_position; ++it) {
        per_position_pass(state);
        after_iteration();
    }
    for (int it = 0; it < config.iters_per_sentence; ++it) {
        per_sentence_pass(state);
        after_iteration();
    }
    result.model = estimate_model(state.counts, state.hyper, vocab_hash);
    result.trees = state.trees;
    result.hyper = state.hyper;
    return result;
}

TrainResult train(const Corpus& corpus, std::size_t vocab_size, const TrainConfig& config,
                  const IterationCallback& on_iteration, std::uint64_t vocab_hash) {
    config.validate();
    if (corpus.empty()) throw DataError("empty corpus");
    TrainConfig cfg = config;
    cfg.mode = TrainMode::Ltlm;
    TrainState state(corpus, vocab_size, cfg);
    return run_training(state, cfg, on_iteration, vocab_hash);
}

TrainResult stlm_train(const Corpus& corpus, std::size_t vocab_size, std::vector<ProjectiveTree> gold_trees,
                       TrainConfig config, const IterationCallback& on_iteration, std::uint64_t vocab_hash) {
    config.validate();
    if (corpus.empty()) throw DataError("empty corpus");
    config.mode = TrainMode::StlmFixedTrees;
    for (std::size_t s = 0; s < gold_trees.size(); ++s)
        if (!is_projective(gold_trees[s])) throw DataError("non-projective input tree at sentence " + std::to_string(s));
    // Gold files carry structure only; roles start uniformly random.
    Rng role_rng(config.seed ^ 0x5f3759df5f3759dfULL);
    for (auto& t : gold_trees)
        for (std::size_t i = 1; i < t.n_nodes(); ++i)
            t.role[i] = 1 + static_cast<Role>(role_rng.below(static_cast<std::size_t>(config.num_roles)));
    TrainState state(corpus, vocab_size, std::move(gold_trees), config);
    return run_training(state, config, on_iteration, vocab_hash);
}

}  // namespace ltlm

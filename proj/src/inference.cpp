#include "ltlm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ltlm/error.hpp"
#include "ltlm/rng.hpp"

namespace ltlm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

int side_index(Side s) { return s == Side::Left ? 0 : 1; }

}  // namespace

Chart::Chart(const LtlmModel& model, const Sentence& sentence)
    : n_(sentence.length()), roles_(model.num_roles) {
    const int N = static_cast<int>(n_);
    const int K = roles_;
    const std::size_t dim = n_ + 2;
    sub_.assign(dim * dim * K, {kNegInf, -1});
    forest_.assign(2 * dim * dim * K, {kNegInf, 0, kNegInf, -1});

    // log P(w_b | m) for the words of this sentence.
    std::vector<double> log_word(dim * K);
    for (int b = 1; b <= N; ++b)
        for (Role m = 1; m <= K; ++m) log_word[b * K + (m - 1)] = std::log(model.word_prob(sentence.tokens[b], m));
    std::vector<double> log_theta[2] = {std::vector<double>(K * K), std::vector<double>(K * K)};
    for (Side side : {Side::Left, Side::Right})
        for (Role p = 1; p <= K; ++p)
            for (Role m = 1; m <= K; ++m)
                log_theta[side_index(side)][(p - 1) * K + (m - 1)] = std::log(model.role_prob(m, p, side));

    for (int len = 1; len <= N; ++len) {
        for (int a = 1; a + len - 1 <= N; ++a) {
            const int c = a + len - 1;
            for (Role m = 1; m <= K; ++m) {
                SubtreeCell best{kNegInf, -1};
                for (int b = a; b <= c; ++b) {
                    const double v = log_word[b * K + (m - 1)] + forest_best(a, b - 1, m, Side::Left) +
                                     forest_best(b + 1, c, m, Side::Right);
                    if (v > best.score || best.root < 0) best = {v, b};
                }
                sub_[sub_idx(a, c, m)] = best;
            }
            for (Side side : {Side::Left, Side::Right}) {
                const auto& lt = log_theta[side_index(side)];
                for (Role k = 1; k <= K; ++k) {
                    ForestCell cell{kNegInf, 0, kNegInf, -1};
                    for (Role m = 1; m <= K; ++m) {
                        const double v = lt[(k - 1) * K + (m - 1)] + sub_[sub_idx(a, c, m)].score;
                        if (v > cell.one || cell.one_role == 0) {
                            cell.one = v;
                            cell.one_role = m;
                        }
                    }
                    for (int b = a; b < c; ++b) {
                        const double v = forest_best(a, b, k, side) + forest_best(b + 1, c, k, side);
                        if (v > cell.two || cell.split < 0) {
                            cell.two = v;
                            cell.split = b;
                        }
                    }
                    forest_[forest_idx(a, c, k, side)] = cell;
                }
            }
        }
    }
}

std::size_t Chart::sub_idx(int a, int c, Role m) const {
    const std::size_t dim = n_ + 2;
    return (static_cast<std::size_t>(a) * dim + c) * roles_ + (m - 1);
}

std::size_t Chart::forest_idx(int a, int c, Role k, Side side) const {
    const std::size_t dim = n_ + 2;
    return ((side_index(side) * dim + a) * dim + c) * roles_ + (k - 1);
}

double Chart::forest_best(int a, int c, Role k, Side side) const {
    if (a > c) return 0.0;
    const auto& cell = forest_[forest_idx(a, c, k, side)];
    return std::max(cell.one, cell.two);
}

double Chart::subtree(int a, int c, Role m) const {
    if (a < 1 || c > static_cast<int>(n_) || a > c || m < 1 || m > roles_) throw DataError("chart index out of range");
    return sub_[sub_idx(a, c, m)].score;
}

double Chart::forest(int a, int c, Role k, Side child_side, Arity arity) const {
    if (a > c) return kNegInf;
    if (a < 1 || c > static_cast<int>(n_) || k < 1 || k > roles_) throw DataError("chart index out of range");
    const auto& cell = forest_[forest_idx(a, c, k, child_side)];
    return arity == Arity::One ? cell.one : cell.two;
}

double Chart::forest(int a, int c, Role k, Side child_side) const {
    if (a > c) return 0.0;
    if (a < 1 || c > static_cast<int>(n_) || k < 1 || k > roles_) throw DataError("chart index out of range");
    return forest_best(a, c, k, child_side);
}

double Chart::best_log_prob() const { return forest_best(1, static_cast<int>(n_), kRootRole, Side::Right); }

void Chart::trace_subtree(int a, int c, Role m, int head, ProjectiveTree& tree) const {
    const int b = sub_[sub_idx(a, c, m)].root;
    tree.parent[b] = head;
    tree.role[b] = m;
    trace_forest(a, b - 1, m, Side::Left, b, tree);
    trace_forest(b + 1, c, m, Side::Right, b, tree);
}

void Chart::trace_forest(int a, int c, Role k, Side side, int head, ProjectiveTree& tree) const {
    if (a > c) return;
    const auto& cell = forest_[forest_idx(a, c, k, side)];
    // Ties go to the single-subtree case.
    if (cell.one >= cell.two) {
        trace_subtree(a, c, cell.one_role, head, tree);
    } else {
        trace_forest(a, cell.split, k, side, head, tree);
        trace_forest(cell.split + 1, c, k, side, head, tree);
    }
}

ProjectiveTree Chart::best_tree() const {
    ProjectiveTree tree(std::vector<int>(n_ + 1, kNoParent), std::vector<Role>(n_ + 1, kRootRole));
    trace_forest(1, static_cast<int>(n_), kRootRole, Side::Right, 0, tree);
    return tree;
}

InferenceResult infer_deterministic(const LtlmModel& model, const Sentence& sentence) {
    if (sentence.length() == 0) return {ProjectiveTree({kNoParent}, {kRootRole}), 0.0};
    Chart chart(model, sentence);
    return {chart.best_tree(), chart.best_log_prob()};
}

namespace {

struct Candidate {
    PartialChange change;
    double log_weight;
};

// Candidate log scores for node i under frozen parameters.
void frozen_candidates(const LtlmModel& model, const Sentence& sentence, const ProjectiveTree& tree, int i,
                       std::vector<Candidate>& out) {
    const int K = model.num_roles;
    std::vector<double> base(K);
    const auto kids = tree.children(i);
    for (Role k = 1; k <= K; ++k) {
        double b = std::log(model.word_prob(sentence.tokens[i], k));
        for (int a : kids) b += std::log(model.role_prob(tree.role[a], k, side_of(a, i)));
        base[k - 1] = b;
    }
    for (int j : valid_reattachments(tree, i)) {
        const Side side = side_of(i, j);
        for (Role k = 1; k <= K; ++k)
            out.push_back({{i, j, k}, base[k - 1] + std::log(model.role_prob(k, tree.role[j], side))});
    }
}

const PartialChange* draw_candidate(const std::vector<Candidate>& cands, Rng& rng) {
    double mx = kNegInf;
    for (const auto& c : cands)
        if (!std::isnan(c.log_weight)) mx = std::max(mx, c.log_weight);
    if (!std::isfinite(mx)) return nullptr;
    std::vector<double> w(cands.size());
    for (std::size_t n = 0; n < cands.size(); ++n)
        w[n] = std::isnan(cands[n].log_weight) ? 0.0 : std::exp(cands[n].log_weight - mx);
    const auto pick = rng.categorical(w);
    return pick < cands.size() ? &cands[pick].change : nullptr;
}

}  // namespace

InferenceResult infer_nondeterministic(const LtlmModel& model, const Sentence& sentence,
                                       const GibbsInferenceConfig& config) {
    Rng rng(config.seed);
    ProjectiveTree tree = initial_tree(sentence.length(), InitStrategy::Chain, model.num_roles, rng);
    InferenceResult best{tree, model.log_joint(sentence, tree)};
    if (sentence.length() == 0) return best;

    auto consider = [&] {
        const double lp = model.log_joint(sentence, tree);
        if (lp > best.log_prob) best = {tree, lp};
    };

    const int n_nodes = static_cast<int>(tree.n_nodes());
    std::vector<Candidate> cands, all;
    for (int it = 0; it < config.iters_per_position; ++it) {
        for (int i = 1; i < n_nodes; ++i) {
            cands.clear();
            frozen_candidates(model, sentence, tree, i, cands);
            if (const auto* ch = draw_candidate(cands, rng)) {
                tree.parent[i] = ch->new_parent;
                tree.role[i] = ch->new_role;
                consider();
            }
        }
    }
    for (int it = 0; it < config.iters_per_sentence; ++it) {
        all.clear();
        for (int i = 1; i < n_nodes; ++i) {
            cands.clear();
            frozen_candidates(model, sentence, tree, i, cands);
            double current = kNegInf;
            for (const auto& c : cands)
                if (c.change.new_parent == tree.parent[i] && c.change.new_role == tree.role[i]) current = c.log_weight;
            for (auto& c : cands) all.push_back({c.change, c.log_weight - current});
        }
        if (const auto* ch = draw_candidate(all, rng)) {
            tree.parent[ch->node] = ch->new_parent;
            tree.role[ch->node] = ch->new_role;
            consider();
        }
    }
    return best;
}

InferenceResult brute_force_best(const LtlmModel& model, const Sentence& sentence, std::size_t max_length,
                                 int max_roles) {
    const std::size_t N = sentence.length();
    if (N > max_length) throw DataError("brute force cap exceeded: sentence length " + std::to_string(N));
    if (model.num_roles > max_roles)
        throw DataError("brute force cap exceeded: " + std::to_string(model.num_roles) + " roles");
    const int K = model.num_roles;

    InferenceResult best{ProjectiveTree({kNoParent}, {kRootRole}), kNegInf};
    if (N == 0) return {best.tree, 0.0};

    ProjectiveTree cand(std::vector<int>(N + 1, kNoParent), std::vector<Role>(N + 1, kRootRole));
    for_each_projective_tree(
        N,
        [&](const std::vector<int>& parents) {
            cand.parent = parents;
            std::fill(cand.role.begin() + 1, cand.role.end(), 1);
            for (;;) {
                const double lp = model.log_joint(sentence, cand);
                if (lp > best.log_prob) best = {cand, lp};
                // Odometer over roles of positions 1..N.
                std::size_t pos = 1;
                while (pos <= N && cand.role[pos] == K) cand.role[pos++] = 1;
                if (pos > N) break;
                ++cand.role[pos];
            }
        },
        max_length);
    return best;
}

std::vector<double> word_probabilities(const LtlmModel& model, const Sentence& sentence,
                                       const ProjectiveTree& tree) {
    std::vector<double> out;
    out.reserve(sentence.length());
    for (std::size_t i = 1; i < tree.n_nodes(); ++i) {
        const int h = tree.parent[i];
        const Side side = side_of(static_cast<int>(i), h);
        double p = 0.0;
        for (Role k = 1; k <= model.num_roles; ++k)
            p += model.word_prob(sentence.tokens[i], k) * model.role_prob(k, tree.role[h], side);
        out.push_back(p);
    }
    return out;
}

std::vector<double> substitution_distribution(const LtlmModel& model, const ProjectiveTree& tree, int i) {
    const int h = tree.parent[i];
    const Side side = side_of(i, h);
    std::vector<double> dist(model.vocab_size, 0.0);
    for (Role k = 1; k <= model.num_roles; ++k) {
        const double rk = model.role_prob(k, tree.role[h], side);
        const auto row = model.phi.row(k - 1);
        for (std::size_t w = 0; w < model.vocab_size; ++w) dist[w] += row[w] * rk;
    }
    return dist;
}

std::vector<std::vector<std::pair<WordId, double>>> top_substitutions(const LtlmModel& model,
                                                                      const Sentence& sentence,
                                                                      const ProjectiveTree& tree, std::size_t n) {
    std::vector<std::vector<std::pair<WordId, double>>> out;
    for (int i = 1; i <= static_cast<int>(sentence.length()); ++i) {
        const auto dist = substitution_distribution(model, tree, i);
        std::vector<std::pair<WordId, double>> ranked(dist.size());
        for (std::size_t w = 0; w < dist.size(); ++w) ranked[w] = {static_cast<WordId>(w), dist[w]};
        const std::size_t take = std::min(n, ranked.size());
        std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take), ranked.end(),
                          [](const auto& x, const auto& y) {
                              return x.second != y.second ? x.second > y.second : x.first < y.first;
                          });
        ranked.resize(take);
        out.push_back(std::move(ranked));
    }
    return out;
}

}  // namespace ltlm

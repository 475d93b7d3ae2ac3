#include "ltlm/synthetic.hpp"

#include <cstdio>
#include <ostream>
#include <string>

#include "ltlm/error.hpp"

namespace ltlm {

namespace {

constexpr WordId kFirstContentId = 2;

std::vector<double> dirichlet(std::size_t dim, double concentration, Rng& rng) {
    std::vector<double> v(dim);
    double total = 0.0;
    for (auto& x : v) total += (x = rng.gamma(concentration));
    for (auto& x : v) x /= total;
    return v;
}

Role draw_role(std::span<const double> row, Rng& rng) {
    return static_cast<Role>(rng.categorical(row)) + 1;
}

}  // namespace

Vocabulary synthetic_vocabulary(std::size_t vocab_size) {
    if (vocab_size < 3) throw DataError("synthetic vocabulary needs at least one content word");
    std::vector<std::string> words;
    char buf[32];
    for (std::size_t w = 0; w + 2 < vocab_size; ++w) {
        std::snprintf(buf, sizeof buf, "w%02zu", w);
        words.emplace_back(buf);
    }
    return Vocabulary::build(words, words.size());
}

LtlmModel random_model(const SyntheticConfig& config, Rng& rng) {
    const int K = config.num_roles;
    const std::size_t V = config.vocab_size;
    LtlmModel m;
    m.num_roles = K;
    m.vocab_size = V;
    m.vocab_hash = synthetic_vocabulary(V).hash();
    m.hyper = Hyperparams::defaults(K);
    m.phi = Table(K, V);
    constexpr double floor = 1e-6;
    for (int k = 0; k < K; ++k) {
        const auto row = dirichlet(V - kFirstContentId, config.word_concentration, rng);
        for (std::size_t w = 0; w < V; ++w) {
            const double p = w < kFirstContentId ? 0.0 : row[w - kFirstContentId];
            m.phi(k, w) = (1.0 - floor) * p + floor / static_cast<double>(V);
        }
    }
    for (Table* theta : {&m.theta_left, &m.theta_right}) {
        *theta = Table(K, K);
        for (int p = 0; p < K; ++p) {
            const auto row = dirichlet(K, config.role_concentration, rng);
            for (int k = 0; k < K; ++k) (*theta)(p, k) = (1.0 - floor) * row[k] + floor / K;
        }
    }
    return m;
}

SyntheticCorpus sample_corpus(const LtlmModel& model, std::size_t num_sentences, std::size_t min_len,
                              std::size_t max_len, Rng& rng) {
    if (min_len < 1 || max_len < min_len) throw DataError("bad synthetic sentence length range");
    SyntheticCorpus out;
    for (std::size_t s = 0; s < num_sentences; ++s) {
        const std::size_t len = min_len + rng.below(max_len - min_len + 1);
        ProjectiveTree tree = initial_tree(len, InitStrategy::RandomProjective, model.num_roles, rng);
        // Parents are assigned roles before children: walk in BFS order.
        std::vector<int> queue{0};
        for (std::size_t q = 0; q < queue.size(); ++q) {
            const int h = queue[q];
            for (int a : tree.children(h)) {
                const auto& theta = side_of(a, h) == Side::Left ? model.theta_left : model.theta_right;
                tree.role[a] = draw_role(theta.row(tree.role[h] - 1), rng);
                queue.push_back(a);
            }
        }
        Sentence sent;
        sent.tokens.assign(len + 1, 0);
        for (std::size_t i = 1; i <= len; ++i) {
            WordId w = 0;
            while (w < kFirstContentId) w = static_cast<WordId>(rng.categorical(model.phi.row(tree.role[i] - 1)));
            sent.tokens[i] = w;
        }
        out.corpus.sentences.push_back(std::move(sent));
        out.trees.push_back(std::move(tree));
    }
    return out;
}

void write_corpus_text(std::ostream& out, const Corpus& corpus, const Vocabulary& vocab) {
    for (const auto& s : corpus.sentences) out << decode_sentence(s, vocab) << '\n';
}

}  // namespace ltlm

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "ltlm/error.hpp"
#include "ltlm/ngram.hpp"
#include "test_support.hpp"

using namespace ltlm;
using doctest::Approx;

namespace {

// Ids: <s> 0, <unk> 1, a 2, b 3, c 4.
constexpr WordId S = 0, UNK = 1, A = 2, B = 3, C = 4;

Corpus ten_token_corpus() {
    Corpus c;
    c.sentences.push_back(Sentence{{S, A, B, A, C}});
    c.sentences.push_back(Sentence{{S, B, A, B}});
    c.sentences.push_back(Sentence{{S, A, C, A}});
    return c;
}

double p(const MknModel& m, std::vector<WordId> history, WordId w) { return m.probability(history, w); }

Corpus synthetic_text(std::size_t sentences, std::uint64_t seed, std::size_t vocab = 30) {
    Rng rng(seed);
    SyntheticConfig cfg;
    cfg.vocab_size = vocab;
    const auto model = random_model(cfg, rng);
    return sample_corpus(model, sentences, 3, 8, rng).corpus;
}

}  // namespace

TEST_CASE("hand-computed bigram probabilities on a ten-token corpus") {
    const auto corpus = ten_token_corpus();
    REQUIRE(corpus.token_count() == 10);
    std::vector<std::string> warnings;
    const auto m = MknModel::train(corpus, 5, 2, &warnings);

    // Continuation counts for unigrams, raw counts for bigrams.
    CHECK(m.adjusted_count(std::vector<WordId>{A}) == 3);
    CHECK(m.adjusted_count(std::vector<WordId>{B}) == 2);
    CHECK(m.adjusted_count(std::vector<WordId>{C}) == 1);
    CHECK(m.adjusted_count(std::vector<WordId>{S, A}) == 2);
    CHECK(m.adjusted_count(std::vector<WordId>{C, A}) == 1);

    CHECK(m.discounts(1).d1 == Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(m.discounts(1).d2 == 1.0);
    CHECK(m.discounts(1).d3 == 1.0);
    CHECK_FALSE(m.discounts(1).fallback);
    CHECK(m.discounts(2).fallback);
    CHECK(warnings.size() == 1);

    CHECK(std::abs(p(m, {A}, B) - 127.0 / 288.0) < 1e-12);
    CHECK(std::abs(p(m, {A}, A) - 31.0 / 288.0) < 1e-12);
    CHECK(std::abs(p(m, {S}, A) - 139.0 / 216.0) < 1e-12);
    CHECK(std::abs(p(m, {C}, A) - 103.0 / 144.0) < 1e-12);
    CHECK(std::abs(p(m, {B}, UNK) - 7.0 / 288.0) < 1e-12);
    CHECK(std::abs(p(m, {}, A) - 31.0 / 72.0) < 1e-12);
    CHECK(p(m, {A}, S) == 0.0);
}

TEST_CASE("unigram model on the ten-token corpus") {
    const auto m = MknModel::train(ten_token_corpus(), 5, 1);
    CHECK(std::abs(p(m, {}, UNK) - 3.0 / 80.0) < 1e-12);
    CHECK(std::abs(p(m, {}, A) - 39.0 / 80.0) < 1e-12);
    CHECK(std::abs(p(m, {}, B) - 23.0 / 80.0) < 1e-12);
    CHECK(std::abs(p(m, {}, C) - 3.0 / 16.0) < 1e-12);
    // History is ignored by a unigram model.
    CHECK(p(m, {S, A, B}, C) == p(m, {}, C));
}

TEST_CASE("unigram model on a a b") {
    Corpus c;
    c.sentences.push_back(Sentence{{S, A, A, B}});
    const auto m = MknModel::train(c, 4, 1);
    // Two observed words, single discount 0.5: (2 - 0.5)/3 + (0.5*2/3) * 1/3.
    CHECK(p(m, {}, A) == Approx(11.0 / 18.0).epsilon(1e-14));
    CHECK(p(m, {}, B) == Approx(5.0 / 18.0).epsilon(1e-14));
    CHECK(p(m, {}, UNK) == Approx(1.0 / 9.0).epsilon(1e-14));
}

TEST_CASE("every conditional distribution normalises") {
    const auto corpus = synthetic_text(300, 3);
    Rng rng(10);
    for (int order = 1; order <= 4; ++order) {
        const auto m = MknModel::train(corpus, 30, order);
        for (int rep = 0; rep < 100; ++rep) {
            std::vector<WordId> history{S};
            const std::size_t len = rng.below(4);
            for (std::size_t i = 0; i < len; ++i) history.push_back(static_cast<WordId>(1 + rng.below(29)));
            if (rng.below(3) == 0 && len > 0) history.erase(history.begin());
            double total = 0.0;
            for (WordId w = 0; w < 30; ++w) {
                const double v = m.probability(history, w);
                if (w != S) CHECK(v > 0.0);
                total += v;
            }
            CHECK(std::abs(total - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("an unseen context collapses to the next lower order") {
    const auto corpus = synthetic_text(200, 4);
    const auto m = MknModel::train(corpus, 30, 4);
    // <unk> never occurs in synthetic text, so any context containing it is unseen.
    const std::vector<WordId> tail{5, 6};
    std::vector<WordId> unseen{UNK, 5, 6};
    for (WordId w = 1; w < 30; ++w) CHECK(m.probability(unseen, w) == m.probability(tail, w));
}

TEST_CASE("context resets at sentence boundaries") {
    const auto corpus = synthetic_text(200, 5);
    const auto m = MknModel::train(corpus, 30, 3);
    auto log_sum = [&](const Sentence& s) {
        double t = 0.0;
        for (double v : mkn_word_probabilities(m, s)) t += std::log(v);
        return t;
    };
    const auto& first = corpus.sentences[3];
    const auto& second = corpus.sentences[7];
    Corpus two;
    two.sentences = {first, second};
    const double n = static_cast<double>(first.length() + second.length());
    CHECK(mkn_perplexity(m, two) == Approx(std::exp(-(log_sum(first) + log_sum(second)) / n)).epsilon(1e-12));
    CHECK(mkn_word_probabilities(m, second).size() == second.length());
}

TEST_CASE("untrained model is uniform over predictable words") {
    const MknModel m(10, 3);
    Corpus c;
    c.sentences.push_back(Sentence{{S, 4, 5, 1, 9}});
    CHECK(mkn_perplexity(m, c) == Approx(9.0).epsilon(1e-12));
}

TEST_CASE("a repeated sentence becomes predictable") {
    Corpus few, many;
    const Sentence s{{S, 2, 3, 4, 5, 6}};
    for (int r = 0; r < 5; ++r) few.sentences.push_back(s);
    for (int r = 0; r < 500; ++r) many.sentences.push_back(s);
    const auto m_few = MknModel::train(few, 8, 3);
    const auto m_many = MknModel::train(many, 8, 3);
    Corpus probe;
    probe.sentences.push_back(s);
    const double a = mkn_perplexity(m_few, probe);
    const double b = mkn_perplexity(m_many, probe);
    CHECK(b < a);
    CHECK(b < 1.01);
    CHECK(b >= 1.0);
}

TEST_CASE("training perplexity is below held-out perplexity") {
    const auto train_c = synthetic_text(400, 6);
    Corpus held;
    {
        // Same generator, later sentences.
        const auto all = synthetic_text(600, 6);
        held.sentences.assign(all.sentences.begin() + 400, all.sentences.end());
    }
    const auto m = MknModel::train(train_c, 30, 3);
    CHECK(mkn_perplexity(m, train_c) <= mkn_perplexity(m, held));
}

TEST_CASE("more data from the same source does not hurt held-out perplexity") {
    std::vector<double> small_ppx, large_ppx;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed * 31);
        SyntheticConfig cfg;
        cfg.vocab_size = 30;
        const auto gen = random_model(cfg, rng);
        const auto held = sample_corpus(gen, 200, 3, 8, rng).corpus;
        const auto big = sample_corpus(gen, 1000, 3, 8, rng).corpus;
        Corpus small;
        small.sentences.assign(big.sentences.begin(), big.sentences.begin() + 100);
        small_ppx.push_back(mkn_perplexity(MknModel::train(small, 30, 2), held));
        large_ppx.push_back(mkn_perplexity(MknModel::train(big, 30, 2), held));
    }
    std::sort(small_ppx.begin(), small_ppx.end());
    std::sort(large_ppx.begin(), large_ppx.end());
    CHECK(large_ppx[2] <= small_ppx[2]);
}

TEST_CASE("n-gram model serialisation") {
    const auto corpus = synthetic_text(100, 8);
    auto m = MknModel::train(corpus, 30, 4);
    m.vocab_hash = 0xabcdef;
    const auto bytes = m.serialize();
    CHECK(bytes.rfind("LTLM-MKN v1\n", 0) == 0);
    const auto back = MknModel::deserialize(bytes);
    CHECK(back.serialize() == bytes);
    CHECK(back.vocab_hash == m.vocab_hash);
    for (const auto& s : corpus.sentences) CHECK(mkn_word_probabilities(back, s) == mkn_word_probabilities(m, s));
    CHECK_THROWS_AS(MknModel::deserialize(std::string_view(bytes).substr(0, bytes.size() - 6)), FormatError);
    CHECK_THROWS_AS(MknModel::deserialize("LTLM-MKN v9\n"), FormatError);
}

TEST_CASE("n-gram argument checks") {
    Corpus empty;
    CHECK_THROWS_AS(MknModel::train(empty, 5, 2), DataError);
    CHECK_THROWS_AS(MknModel::train(ten_token_corpus(), 5, 0), DataError);
    CHECK_THROWS_AS(MknModel::train(ten_token_corpus(), 5, 5), DataError);
    const auto m = MknModel::train(ten_token_corpus(), 5, 2);
    CHECK_THROWS_AS(mkn_perplexity(m, empty), DataError);
    CHECK_THROWS_AS(p(m, {A}, 9), DataError);
}

#include <cmath>
#include <numeric>

#include "doctest.h"
#include "ltlm/error.hpp"
#include "ltlm/inference.hpp"
#include "ltlm/model.hpp"
#include "test_support.hpp"

using namespace ltlm;
using doctest::Approx;

namespace {

CountTables random_counts(int K, std::size_t V, Rng& rng) {
    CountTables c(K, V);
    for (int n = 0; n < 200; ++n) {
        c.add_word(static_cast<WordId>(rng.below(V)), 1 + static_cast<Role>(rng.below(K)), 1);
        c.add_edge(rng.below(2) ? Side::Left : Side::Right, 1 + static_cast<Role>(rng.below(K)),
                   1 + static_cast<Role>(rng.below(K)), 1);
    }
    return c;
}

std::vector<double> dirichlet(const std::vector<double>& alpha, Rng& rng) {
    std::vector<double> x(alpha.size());
    double total = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) total += x[i] = rng.gamma(alpha[i]);
    for (auto& v : x) v /= total;
    return x;
}

// contexts x categories table of multinomial draws from Dirichlet(alpha) rows.
std::vector<std::int64_t> dirichlet_multinomial_counts(const std::vector<double>& alpha, std::size_t contexts,
                                                       int draws, Rng& rng) {
    std::vector<std::int64_t> counts(contexts * alpha.size(), 0);
    for (std::size_t c = 0; c < contexts; ++c) {
        const auto p = dirichlet(alpha, rng);
        for (int d = 0; d < draws; ++d) ++counts[c * alpha.size() + rng.categorical(p)];
    }
    return counts;
}

}  // namespace

TEST_CASE("predictive_word") {
    CountTables zero(2, 5);
    for (WordId w = 0; w < 5; ++w) CHECK(predictive_word(zero, w, 1, 0.3) == Approx(0.2));

    CountTables c(2, 5);
    c.add_word(2, 1, 3);
    c.add_word(3, 1, 7);
    CHECK(predictive_word(c, 2, 1, 0.1) == Approx(3.1 / 10.5).epsilon(1e-12));
    CHECK(predictive_word(c, 2, 1, 0.1) == Approx(0.29524).epsilon(1e-4));
    // Excluding one of the three observations.
    CHECK(predictive_word(c, 2, 1, 0.1, WordExclusion{2, 1}) == Approx(2.1 / 9.5).epsilon(1e-12));
    CHECK_THROWS_AS(predictive_word(c, 4, 1, 0.1, WordExclusion{4, 1}), InvariantError);
}

TEST_CASE("predictive_role") {
    const std::vector<double> uniform(4, 0.5);
    CountTables zero(4, 3);
    for (Role k = 1; k <= 4; ++k) CHECK(predictive_role(zero, k, 1, Side::Left, uniform) == Approx(0.25));

    CountTables c(4, 3);
    c.add_edge(Side::Right, 3, 2, 2);
    c.add_edge(Side::Right, 3, 4, 4);
    const std::vector<double> alpha{0.1, 0.2, 0.3, 0.4};
    CHECK(predictive_role(c, 2, 3, Side::Right, alpha) == Approx(2.2 / 7.0).epsilon(1e-12));
    CHECK(predictive_role(c, 2, 3, Side::Right, alpha, EdgeExclusion{3, 2}) == Approx(1.2 / 6.0).epsilon(1e-12));
    CHECK_THROWS_AS(predictive_role(c, 1, 3, Side::Right, alpha, EdgeExclusion{3, 1}), InvariantError);
}

TEST_CASE("left and right role tables are independent") {
    const std::vector<double> alpha{1.0, 1.0};
    CountTables c(2, 3);
    const double before = predictive_role(c, 1, 2, Side::Right, alpha);
    c.add_edge(Side::Left, 2, 1, 5);
    CHECK(predictive_role(c, 1, 2, Side::Right, alpha) == before);
    CHECK(predictive_role(c, 1, 2, Side::Left, alpha) == Approx(6.0 / 7.0));
}

TEST_CASE("predictive distributions normalise for random tables") {
    Rng rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        const int K = 2 + static_cast<int>(rng.below(5));
        const std::size_t V = 3 + rng.below(20);
        const auto c = random_counts(K, V, rng);
        std::vector<double> alpha(K);
        for (auto& a : alpha) a = 0.01 + rng.uniform();
        const double beta = 0.001 + rng.uniform();
        for (Role k = 1; k <= K; ++k) {
            double sw = 0.0;
            for (WordId w = 0; w < V; ++w) sw += predictive_word(c, w, k, beta);
            CHECK(sw == Approx(1.0).epsilon(1e-9));
            for (Side side : {Side::Left, Side::Right}) {
                double sr = 0.0;
                for (Role m = 1; m <= K; ++m) sr += predictive_role(c, m, k, side, alpha);
                CHECK(sr == Approx(1.0).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("count updates: negative counts rejected, remove then restore is exact") {
    CountTables c(2, 4);
    CHECK_THROWS_AS(c.add_word(2, 1, -1), InvariantError);
    CHECK_THROWS_AS(c.add_edge(Side::Left, 1, 2, -1), InvariantError);

    Rng rng(9);
    Sentence s = test::random_sentence(6, 4, rng);
    const auto tree = test::scrambled_tree(6, 2, rng);
    const std::vector<ProjectiveTree> trees{tree};
    Corpus corpus;
    corpus.sentences.push_back(s);
    auto counts = CountTables::tally(corpus, trees, 2, 4);
    const auto original = counts;
    CHECK(counts.total_words() == 6);
    CHECK(counts.total_edges(Side::Left) + counts.total_edges(Side::Right) == 6);
    for (int i = 1; i <= 6; ++i) {
        counts.add_node(s, tree, i, -1);
        CHECK(counts != original);
        counts.add_node(s, tree, i, +1);
        CHECK(counts == original);
    }
}

TEST_CASE("joint_score on a hand-built micro example") {
    // Vocabulary <s> <unk> x y z; sentence x y z; K = 2.
    Hyperparams h;
    h.alpha_left = {0.5, 1.0};
    h.alpha_right = {0.25, 0.75};
    h.beta = 0.1;
    CountTables c(2, 5);
    c.add_word(2, 1, 2);
    c.add_word(3, 1, 1);
    c.add_word(4, 2, 3);
    c.add_edge(Side::Right, 1, 1, 1);
    c.add_edge(Side::Right, 1, 2, 2);
    c.add_edge(Side::Right, 2, 2, 1);
    c.add_edge(Side::Left, 2, 1, 2);

    Sentence s;
    s.tokens = {0, 2, 3, 4};
    // 0 -> 2, 2 -> 1 (left child), 2 -> 3 (right child).
    const ProjectiveTree tree({-1, 2, 0, 2}, {1, 1, 2, 2});

    // Node 2 under the root with role 2:
    //   word y in role 2       (0 + 0.1) / (3 + 0.5)
    //   role 2 | role 1, right (2 + 0.75) / (3 + 1)
    //   child 1, role 1, left  (2 + 0.5) / (2 + 1.5)
    //   child 3, role 2, right (1 + 0.75) / (1 + 1)
    const double expected = (0.1 / 3.5) * (2.75 / 4.0) * (2.5 / 3.5) * (1.75 / 2.0);
    CHECK(joint_score(c, h, s, tree, 2, 0, 2) == Approx(expected).epsilon(1e-14));

    // Leaf node 1 under node 2 (role 2), role 1: two factors only.
    CHECK(joint_score(c, h, s, tree, 1, 2, 1) == Approx((2.1 / 3.5) * (2.5 / 3.5)).epsilon(1e-14));
}

TEST_CASE("estimates from a two-sentence toy corpus") {
    // Vocabulary <s> <unk> a b; "a b" with 0 -> 1 (role 1) -> 2 (role 2); "b" with 0 -> 1 (role 2).
    Corpus corpus;
    corpus.sentences.push_back(Sentence{{0, 2, 3}});
    corpus.sentences.push_back(Sentence{{0, 3}});
    const std::vector<ProjectiveTree> trees{ProjectiveTree({-1, 0, 1}, {1, 1, 2}),
                                            ProjectiveTree({-1, 0}, {1, 2})};
    const auto counts = CountTables::tally(corpus, trees, 2, 4);
    Hyperparams h;
    h.alpha_left = {1.0, 1.0};
    h.alpha_right = {1.0, 1.0};
    h.beta = 0.5;
    const auto m = estimate_model(counts, h);

    CHECK(m.word_prob(2, 1) == Approx(1.5 / 3.0));
    CHECK(m.word_prob(3, 1) == Approx(0.5 / 3.0));
    CHECK(m.word_prob(0, 1) == Approx(0.5 / 3.0));
    CHECK(m.word_prob(3, 2) == Approx(2.5 / 4.0));
    CHECK(m.word_prob(2, 2) == Approx(0.5 / 4.0));
    CHECK(m.role_prob(1, 1, Side::Right) == Approx(2.0 / 5.0));
    CHECK(m.role_prob(2, 1, Side::Right) == Approx(3.0 / 5.0));
    CHECK(m.role_prob(1, 2, Side::Right) == Approx(0.5));
    CHECK(m.role_prob(2, 1, Side::Left) == Approx(0.5));

    const double lp = std::log(0.5 * 0.4) + std::log(2.5 / 4.0 * 0.6);
    CHECK(m.log_joint(corpus.sentences[0], trees[0]) == Approx(lp));
}

TEST_CASE("estimates: zero counts give prior means and rows normalise") {
    CountTables zero(3, 6);
    Hyperparams h;
    h.alpha_left = {1.0, 2.0, 3.0};
    h.alpha_right = {0.5, 0.5, 1.0};
    h.beta = 0.2;
    const auto m = estimate_model(zero, h);
    for (Role p = 1; p <= 3; ++p) {
        for (WordId w = 0; w < 6; ++w) CHECK(m.word_prob(w, p) == Approx(1.0 / 6.0));
        CHECK(m.role_prob(3, p, Side::Left) == Approx(0.5));
        CHECK(m.role_prob(3, p, Side::Right) == Approx(0.5));
    }

    Rng rng(17);
    const auto c = random_counts(4, 9, rng);
    const auto r = estimate_model(c, Hyperparams::defaults(4));
    for (std::size_t k = 0; k < 4; ++k) {
        const auto row = r.phi.row(k);
        CHECK(std::accumulate(row.begin(), row.end(), 0.0) == Approx(1.0).epsilon(1e-9));
        for (const Table* t : {&r.theta_left, &r.theta_right}) {
            const auto tr = t->row(k);
            CHECK(std::accumulate(tr.begin(), tr.end(), 0.0) == Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("default hyperparameters") {
    const auto h = Hyperparams::defaults(10);
    CHECK(h.alpha_left == std::vector<double>(10, 5.0));
    CHECK(h.alpha_right == std::vector<double>(10, 5.0));
    CHECK(h.beta == 0.01);
    CHECK(h.valid());
}

TEST_CASE("symmetric fixed point recovers a known concentration") {
    Rng rng(123);
    const std::size_t contexts = 2000, cats = 5;
    const auto counts = dirichlet_multinomial_counts(std::vector<double>(cats, 0.5), contexts, 20, rng);
    const std::vector<std::int64_t> totals(contexts, 20);
    const auto fit = fit_dirichlet_symmetric(counts, totals, cats, 1.0);
    REQUIRE(fit.finite);
    CHECK(fit.converged);
    CHECK(fit.alpha[0] == Approx(0.5).epsilon(0.10));

    // Re-applying the update at the optimum barely moves it.
    FixedPointOptions one;
    one.max_iterations = 1;
    const auto again = fit_dirichlet_symmetric(counts, totals, cats, fit.alpha[0], one);
    CHECK(std::abs(again.alpha[0] - fit.alpha[0]) / fit.alpha[0] < 1e-6);
}

TEST_CASE("asymmetric fixed point recovers a known concentration") {
    Rng rng(321);
    const std::vector<double> truth{0.2, 0.4, 0.6, 0.8, 1.0};
    const std::size_t contexts = 2000;
    const auto counts = dirichlet_multinomial_counts(truth, contexts, 20, rng);
    const auto fit = fit_dirichlet_asymmetric(counts, contexts, truth.size(), std::vector<double>(5, 1.0));
    REQUIRE(fit.finite);
    CHECK(fit.converged);
    for (std::size_t k = 0; k < truth.size(); ++k) CHECK(fit.alpha[k] == Approx(truth[k]).epsilon(0.10));

    FixedPointOptions one;
    one.max_iterations = 1;
    const auto again = fit_dirichlet_asymmetric(counts, contexts, truth.size(), fit.alpha, one);
    for (std::size_t k = 0; k < truth.size(); ++k)
        CHECK(std::abs(again.alpha[k] - fit.alpha[k]) / fit.alpha[k] < 1e-6);
}

TEST_CASE("update_hyperparameters leaves empty tables alone") {
    const auto h = Hyperparams::defaults(3);
    CountTables zero(3, 7);
    const auto up = update_hyperparameters(zero, h);
    CHECK(up.hyper == h);

    // Only right edges observed: the left prior is untouched.
    CountTables c(3, 7);
    Rng rng(4);
    for (int n = 0; n < 300; ++n) {
        c.add_word(static_cast<WordId>(2 + rng.below(5)), 1 + static_cast<Role>(rng.below(3)), 1);
        c.add_edge(Side::Right, 1 + static_cast<Role>(rng.below(3)), 1 + static_cast<Role>(rng.below(3)), 1);
    }
    const auto up2 = update_hyperparameters(c, h);
    CHECK(up2.hyper.alpha_left == h.alpha_left);
    CHECK(up2.hyper.alpha_right != h.alpha_right);
    CHECK(up2.hyper.valid());
}

TEST_CASE("model serialisation") {
    Rng rng(77);
    const auto model = test::small_random_model(3, 12, rng);
    const auto bytes = serialize(model);
    CHECK(bytes.rfind("LTLM-MODEL v1\n", 0) == 0);
    const auto back = deserialize(bytes);
    CHECK(back == model);
    CHECK(serialize(back) == bytes);

    for (std::size_t cut : {std::size_t{0}, std::size_t{5}, bytes.size() / 2, bytes.size() - 1})
        CHECK_THROWS_AS(deserialize(std::string_view(bytes).substr(0, cut)), FormatError);
    CHECK_THROWS_AS(deserialize(bytes + "x"), FormatError);
    auto v2 = bytes;
    v2[12] = '2';
    CHECK_THROWS_AS(deserialize(v2), FormatError);

    const auto s = test::random_sentence(7, 12, rng);
    const auto a = infer_deterministic(model, s);
    const auto b = infer_deterministic(back, s);
    CHECK(a.tree == b.tree);
    CHECK(a.log_prob == b.log_prob);
}

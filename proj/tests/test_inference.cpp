#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "ltlm/error.hpp"
#include "ltlm/inference.hpp"
#include "test_support.hpp"

using namespace ltlm;
using doctest::Approx;

namespace {

// Vocabulary <s> <unk> a b, two roles.
LtlmModel hand_model() {
    LtlmModel m;
    m.num_roles = 2;
    m.vocab_size = 4;
    m.hyper = Hyperparams::defaults(2);
    m.phi = Table(2, 4);
    m.phi.data = {0.0, 0.1, 0.6, 0.3,  //
                  0.0, 0.2, 0.2, 0.6};
    m.theta_right = Table(2, 2);
    m.theta_right.data = {0.7, 0.3,  //
                          0.4, 0.6};
    m.theta_left = Table(2, 2);
    m.theta_left.data = {0.5, 0.5,  //
                         0.9, 0.1};
    return m;
}

}  // namespace

TEST_CASE("deterministic inference equals brute force on random small problems") {
    Rng rng(2718);
    for (int rep = 0; rep < 120; ++rep) {
        const int K = 1 + static_cast<int>(rng.below(3));
        const auto model = test::small_random_model(K, 8, rng, 0.3, 0.4);
        const auto s = test::random_sentence(1 + rng.below(6), 8, rng);
        const auto dp = infer_deterministic(model, s);
        const auto bf = brute_force_best(model, s);
        REQUIRE(dp.log_prob == Approx(bf.log_prob).epsilon(1e-12));
        CHECK(std::abs(dp.log_prob - bf.log_prob) <= 1e-9);
        CHECK(is_projective(dp.tree));
        CHECK(model.log_joint(s, dp.tree) == Approx(dp.log_prob).epsilon(1e-12));
    }
}

TEST_CASE("chart base case is the word log probability") {
    Rng rng(5);
    const auto model = test::small_random_model(3, 9, rng);
    const auto s = test::random_sentence(5, 9, rng);
    const Chart chart(model, s);
    for (int a = 1; a <= 5; ++a)
        for (Role k = 1; k <= 3; ++k) CHECK(chart.subtree(a, a, k) == std::log(model.word_prob(s.tokens[a], k)));
}

TEST_CASE("single-word sentence") {
    const auto m = hand_model();
    Sentence s{{0, 3}};
    const auto r = infer_deterministic(m, s);
    // role 1: 0.3 * 0.7 = 0.21, role 2: 0.6 * 0.3 = 0.18
    CHECK(r.tree.parent == std::vector<int>{kNoParent, 0});
    CHECK(r.tree.role == std::vector<Role>{1, 1});
    CHECK(r.log_prob == Approx(std::log(0.21)).epsilon(1e-14));

    const auto g = infer_nondeterministic(m, s, {20, 20, 3});
    CHECK(g.tree == r.tree);
    CHECK(g.log_prob == Approx(r.log_prob));
}

TEST_CASE("brute force candidate count and caps") {
    const auto m = hand_model();
    Sentence s{{0, 2, 3}};
    // 3 trees x 4 role assignments.
    std::size_t candidates = 0;
    for_each_projective_tree(2, [&](const std::vector<int>&) { candidates += 4; });
    CHECK(candidates == 12);
    const auto bf = brute_force_best(m, s);
    double best = -INFINITY;
    for (const auto& p : enumerate_projective_trees(2))
        for (Role r1 = 1; r1 <= 2; ++r1)
            for (Role r2 = 1; r2 <= 2; ++r2) best = std::max(best, m.log_joint(s, ProjectiveTree(p, {1, r1, r2})));
    CHECK(bf.log_prob == best);

    Rng rng(1);
    CHECK_THROWS_AS(brute_force_best(m, test::random_sentence(7, 4, rng)), DataError);
    CHECK_THROWS_AS(brute_force_best(test::small_random_model(5, 4, rng), s), DataError);
}

TEST_CASE("empty sentence") {
    const auto m = hand_model();
    const auto r = infer_deterministic(m, Sentence{{0}});
    CHECK(r.tree.n_nodes() == 1);
    CHECK(r.log_prob == 0.0);
}

TEST_CASE("sampling inference never beats the dynamic program") {
    Rng rng(99);
    const auto model = test::small_random_model(3, 15, rng);
    int exact = 0, total = 0;
    for (int rep = 0; rep < 40; ++rep) {
        const auto s = test::random_sentence(2 + rng.below(6), 15, rng);
        const auto dp = infer_deterministic(model, s);
        for (std::uint64_t seed : {1u, 2u}) {
            const auto g = infer_nondeterministic(model, s, {30, 30, seed});
            CHECK(is_projective(g.tree));
            CHECK(g.log_prob <= dp.log_prob + 1e-9);
            CHECK(model.log_joint(s, g.tree) == Approx(g.log_prob));
            exact += std::abs(g.log_prob - dp.log_prob) <= 1e-9;
            ++total;
        }
    }
    CHECK(exact > 0);
}

TEST_CASE("sampling inference is deterministic for a seed") {
    Rng rng(8);
    const auto model = test::small_random_model(3, 10, rng);
    const auto s = test::random_sentence(6, 10, rng);
    const auto a = infer_nondeterministic(model, s, {10, 10, 7});
    const auto b = infer_nondeterministic(model, s, {10, 10, 7});
    CHECK(a.tree == b.tree);
    CHECK(a.log_prob == b.log_prob);
}

TEST_CASE("word probabilities on a hand-built model") {
    const auto m = hand_model();
    Sentence s{{0, 2, 3}};
    // 0 -> 2 (role 2), 2 -> 1 (left, role 1).
    const ProjectiveTree tree({kNoParent, 2, 0}, {1, 1, 2});
    const auto p = word_probabilities(m, s, tree);
    REQUIRE(p.size() == 2);
    // a under a role-2 head on the left: 0.6*0.9 + 0.2*0.1
    CHECK(p[0] == Approx(0.56).epsilon(1e-14));
    // b under the root on the right: 0.3*0.7 + 0.6*0.3
    CHECK(p[1] == Approx(0.39).epsilon(1e-14));
}

TEST_CASE("word probabilities: single role and normalisation") {
    Rng rng(12);
    const auto one = test::small_random_model(1, 7, rng);
    const auto s = test::random_sentence(4, 7, rng);
    const auto tree = test::scrambled_tree(4, 1, rng);
    const auto p = word_probabilities(one, s, tree);
    for (int i = 1; i <= 4; ++i) CHECK(p[i - 1] == Approx(one.word_prob(s.tokens[i], 1)).epsilon(1e-14));

    const auto model = test::small_random_model(3, 7, rng);
    const auto t3 = test::scrambled_tree(4, 3, rng);
    for (double v : word_probabilities(model, s, t3)) {
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
    }
    for (int i = 1; i <= 4; ++i) {
        const auto d = substitution_distribution(model, t3, i);
        CHECK(std::accumulate(d.begin(), d.end(), 0.0) == Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("top substitutions") {
    // Role 1 emits a, role 2 emits b; roles alternate down right chains.
    LtlmModel m;
    m.num_roles = 2;
    m.vocab_size = 4;
    m.hyper = Hyperparams::defaults(2);
    m.phi = Table(2, 4);
    m.phi.data = {0.01, 0.01, 0.97, 0.01,  //
                  0.01, 0.01, 0.01, 0.97};
    m.theta_right = Table(2, 2);
    m.theta_right.data = {0.02, 0.98,  //
                          0.98, 0.02};
    m.theta_left = Table(2, 2, 0.5);
    Sentence s{{0, 3, 2}};
    const ProjectiveTree tree({kNoParent, 0, 1}, {1, 2, 1});
    const auto top1 = top_substitutions(m, s, tree, 1);
    REQUIRE(top1.size() == 2);
    CHECK(top1[0][0].first == 3);
    CHECK(top1[1][0].first == 2);

    const auto all = top_substitutions(m, s, tree, 10);
    for (const auto& list : all) {
        REQUIRE(list.size() == 4);
        for (std::size_t r = 1; r < list.size(); ++r) {
            CHECK(list[r - 1].second >= list[r].second);
            if (list[r - 1].second == list[r].second) CHECK(list[r - 1].first < list[r].first);
        }
    }
    // <s> and <unk> tie; the lower id comes first.
    CHECK(all[0][2].first == 0);
    CHECK(all[0][3].first == 1);
}

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ltlm/corpus.hpp"
#include "ltlm/model.hpp"
#include "ltlm/rng.hpp"
#include "ltlm/tree.hpp"

namespace ltlm {

struct SyntheticConfig {
    int num_roles = 3;
    std::size_t vocab_size = 50;  // including <s> and <unk>
    std::size_t min_len = 3;
    std::size_t max_len = 8;
    double word_concentration = 0.1;  // Dirichlet prior of each role's word distribution
    double role_concentration = 0.5;  // Dirichlet prior of each role-by-role row
    std::uint64_t seed = 7;
};

// Vocabulary `<s>`, `<unk>`, w00, w01, ... with ids in that order.
Vocabulary synthetic_vocabulary(std::size_t vocab_size);

// Random side-dependent model. Words are drawn from Dirichlet rows over the
// content ids (never `<s>` or `<unk>`), mixed with a 1e-6 uniform floor so
// every probability is positive.
LtlmModel random_model(const SyntheticConfig& config, Rng& rng);

struct SyntheticCorpus {
    Corpus corpus;
    std::vector<ProjectiveTree> trees;
};

// Random projective structure per sentence, then roles top-down from theta
// (side-dependent) and words from phi.
SyntheticCorpus sample_corpus(const LtlmModel& model, std::size_t num_sentences, std::size_t min_len,
                              std::size_t max_len, Rng& rng);

void write_corpus_text(std::ostream& out, const Corpus& corpus, const Vocabulary& vocab);

}  // namespace ltlm

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ltlm/corpus.hpp"

namespace ltlm {

inline constexpr int kMaxNgramOrder = 4;

// Interpolated modified Kneser-Ney model. The event space is every
// vocabulary word except `<s>`, which only ever appears as context.
class MknModel {
public:
    struct Discounts {
        double d1 = 0.5, d2 = 0.5, d3 = 0.5;
        bool fallback = false;  // count-of-counts were degenerate
    };

    struct CountOfCounts {
        std::uint64_t n1 = 0, n2 = 0, n3 = 0, n4 = 0;
    };

    MknModel() = default;
    // Untrained model: uniform over the event space.
    MknModel(std::size_t vocab_size, int order, WordId bos = 0);

    static MknModel train(const Corpus& corpus, std::size_t vocab_size, int order,
                          std::vector<std::string>* warnings = nullptr, WordId bos = 0);

    int order() const { return order_; }
    std::size_t vocab_size() const { return vocab_size_; }
    WordId bos() const { return bos_; }
    std::uint64_t vocab_hash = 0;

    const Discounts& discounts(int n) const { return discounts_.at(n - 1); }
    const CountOfCounts& count_of_counts(int n) const { return coc_.at(n - 1); }

    // Adjusted count used at order n: raw counts at the highest order and for
    // n-grams starting with `<s>`, otherwise the number of distinct left
    // extensions.
    std::uint64_t adjusted_count(std::span<const WordId> ngram) const;

    // P(w | history). `history` is everything that precedes w in the sentence
    // (starting with `<s>`); only the last order-1 words are used.
    double probability(std::span<const WordId> history, WordId w) const;

    std::string serialize() const;
    static MknModel deserialize(std::string_view bytes);
    void save(const std::filesystem::path& path) const;
    static MknModel load(const std::filesystem::path& path);

private:
    struct ContextStats {
        std::uint64_t total = 0;
        std::uint64_t n1 = 0, n2 = 0, n3plus = 0;
    };

    using Key = std::string;  // packed little-endian word ids
    static Key make_key(std::span<const WordId> ids);

    double prob_order(int n, std::span<const WordId> context, WordId w) const;
    void finalize(std::vector<std::string>* warnings);

    int order_ = 1;
    std::size_t vocab_size_ = 0;
    WordId bos_ = 0;
    // Index n-1 holds order-n data.
    std::vector<std::unordered_map<Key, std::uint64_t>> adjusted_;
    std::vector<std::unordered_map<Key, ContextStats>> contexts_;
    std::vector<Discounts> discounts_;
    std::vector<CountOfCounts> coc_;
};

// Probability of every word of a sentence (positions 1..N); context resets at
// the sentence start.
std::vector<double> mkn_word_probabilities(const MknModel& model, const Sentence& sentence);

// exp(-(1/N) sum log P), N excluding position-0 symbols.
double mkn_perplexity(const MknModel& model, const Corpus& corpus);

}  // namespace ltlm

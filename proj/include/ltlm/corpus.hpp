#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ltlm {

using WordId = std::uint32_t;

inline constexpr std::string_view kBosSymbol = "<s>";
inline constexpr std::string_view kUnkSymbol = "<unk>";

// Dense word <-> id map. `<s>` is always id 0 and `<unk>` id 1; the remaining
// ids are assigned by descending training frequency.
class Vocabulary {
public:
    Vocabulary();

    // Keeps the max_size most frequent words of the stream. Frequency ties are
    // broken by first occurrence. The reserved symbols do not count toward
    // max_size and are skipped if they appear in the stream.
    static Vocabulary build(std::span<const std::string> tokens, std::size_t max_size);

    WordId bos_id() const { return 0; }
    WordId unk_id() const { return 1; }
    std::size_t size() const { return id_to_word_.size(); }

    // Id of `word`, or unk_id() when absent.
    WordId id(std::string_view word) const;
    std::optional<WordId> find(std::string_view word) const;
    const std::string& word(WordId id) const { return id_to_word_.at(id); }
    std::uint64_t count(WordId id) const { return counts_.at(id); }

    // FNV-1a over the id-ordered word list; models and corpora carry it to
    // detect vocabulary mismatches.
    std::uint64_t hash() const;

    void save(std::ostream& out) const;
    static Vocabulary load(std::istream& in);
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

    bool operator==(const Vocabulary& other) const { return id_to_word_ == other.id_to_word_; }

private:
    WordId add(std::string word, std::uint64_t count);

    std::unordered_map<std::string, WordId> word_to_id_;
    std::vector<std::string> id_to_word_;
    std::vector<std::uint64_t> counts_;
};

struct Sentence {
    // tokens[0] is always the bos id.
    std::vector<WordId> tokens;

    // Number of words, excluding the position-0 symbol.
    std::size_t length() const { return tokens.empty() ? 0 : tokens.size() - 1; }
    WordId operator[](std::size_t i) const { return tokens[i]; }
};

struct Corpus {
    std::vector<Sentence> sentences;

    // Total words excluding position-0 symbols.
    std::size_t token_count() const;
    std::size_t size() const { return sentences.size(); }
    bool empty() const { return sentences.empty(); }
};

struct LoadResult {
    Corpus corpus;
    std::size_t dropped = 0;
};

// ASCII case folding; bytes >= 0x80 pass through untouched.
std::string fold_case(std::string_view word);

std::vector<std::string> split_whitespace(std::string_view line);

// All whitespace-separated tokens of a line-oriented text.
std::vector<std::string> read_tokens(std::istream& in, bool lowercase);
std::vector<std::string> read_tokens(const std::filesystem::path& path, bool lowercase);

Sentence encode_sentence(std::span<const std::string> raw_tokens, const Vocabulary& vocab,
                         bool lowercase);

// One sentence per line. Sentences with more than max_len words are dropped
// and counted in LoadResult::dropped.
LoadResult load_corpus(std::istream& in, const Vocabulary& vocab, std::size_t max_len,
                       bool lowercase);
LoadResult load_corpus(const std::filesystem::path& path, const Vocabulary& vocab,
                       std::size_t max_len, bool lowercase);

// Fraction of words that are <unk>; position-0 symbols excluded.
double oov_rate(const Corpus& corpus, const Vocabulary& vocab);

// Plain text rendering (without the position-0 symbol).
std::string decode_sentence(const Sentence& sentence, const Vocabulary& vocab);

}  // namespace ltlm

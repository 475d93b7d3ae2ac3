#include "ltlm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ltlm/error.hpp"

namespace ltlm {

namespace {

constexpr std::string_view kVocabHeader = "LTLM-VOCAB v1";

bool is_reserved(std::string_view w) { return w == kBosSymbol || w == kUnkSymbol; }

}  // namespace

Vocabulary::Vocabulary() {
    add(std::string(kBosSymbol), 0);
    add(std::string(kUnkSymbol), 0);
}

WordId Vocabulary::add(std::string word, std::uint64_t count) {
    auto id = static_cast<WordId>(id_to_word_.size());
    word_to_id_.emplace(word, id);
    id_to_word_.push_back(std::move(word));
    counts_.push_back(count);
    return id;
}

Vocabulary Vocabulary::build(std::span<const std::string> tokens, std::size_t max_size) {
    if (max_size < 2) throw DataError("vocabulary max_size must be at least 2");
    if (tokens.empty()) throw DataError("empty corpus");

    struct Entry {
        std::uint64_t count = 0;
        std::size_t first = 0;
    };
    std::unordered_map<std::string_view, Entry> freq;
    std::vector<std::string_view> order;
    for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
        std::string_view w = tokens[pos];
        if (is_reserved(w)) continue;
        auto [it, inserted] = freq.try_emplace(w, Entry{0, pos});
        if (inserted) order.push_back(w);
        ++it->second.count;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::string_view a, std::string_view b) {
        return freq[a].count > freq[b].count;
    });

    Vocabulary vocab;
    std::uint64_t unk_count = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (r < max_size)
            vocab.add(std::string(order[r]), freq[order[r]].count);
        else
            unk_count += freq[order[r]].count;
    }
    vocab.counts_[1] = unk_count;
    return vocab;
}

std::optional<WordId> Vocabulary::find(std::string_view word) const {
    auto it = word_to_id_.find(std::string(word));
    if (it == word_to_id_.end()) return std::nullopt;
    return it->second;
}

WordId Vocabulary::id(std::string_view word) const { return find(word).value_or(unk_id()); }

std::uint64_t Vocabulary::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& w : id_to_word_) {
        for (unsigned char c : w) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        h ^= 0xff;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void Vocabulary::save(std::ostream& out) const {
    out << kVocabHeader << '\n';
    for (std::size_t i = 0; i < id_to_word_.size(); ++i)
        out << i << '\t' << id_to_word_[i] << '\t' << counts_[i] << '\n';
}

Vocabulary Vocabulary::load(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kVocabHeader)
        throw FormatError("vocabulary file: expected header '" + std::string(kVocabHeader) + "'");

    Vocabulary vocab;
    vocab.word_to_id_.clear();
    vocab.id_to_word_.clear();
    vocab.counts_.clear();
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string id_field, word, count_field;
        if (!std::getline(fields, id_field, '\t') || !std::getline(fields, word, '\t') ||
            !std::getline(fields, count_field))
            throw FormatError("vocabulary file: malformed line " + std::to_string(lineno));
        std::size_t id = 0;
        std::uint64_t count = 0;
        try {
            id = std::stoull(id_field);
            count = std::stoull(count_field);
        } catch (const std::exception&) {
            throw FormatError("vocabulary file: bad number on line " + std::to_string(lineno));
        }
        if (id != vocab.id_to_word_.size())
            throw FormatError("vocabulary file: ids not dense and ascending at line " +
                              std::to_string(lineno));
        if (vocab.word_to_id_.count(word))
            throw FormatError("vocabulary file: duplicate word '" + word + "'");
        vocab.add(std::move(word), count);
    }
    if (vocab.size() < 2 || vocab.id_to_word_[0] != kBosSymbol || vocab.id_to_word_[1] != kUnkSymbol)
        throw FormatError("vocabulary file: reserved symbols missing");
    return vocab;
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    save(out);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    return load(in);
}

std::size_t Corpus::token_count() const {
    return std::accumulate(sentences.begin(), sentences.end(), std::size_t{0},
                           [](std::size_t acc, const Sentence& s) { return acc + s.length(); });
}

std::string fold_case(std::string_view word) {
    std::string out(word);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

std::vector<std::string> split_whitespace(std::string_view line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; };
    while (i < line.size()) {
        while (i < line.size() && is_space(line[i])) ++i;
        std::size_t start = i;
        while (i < line.size() && !is_space(line[i])) ++i;
        if (i > start) out.emplace_back(line.substr(start, i - start));
    }
    return out;
}

std::vector<std::string> read_tokens(std::istream& in, bool lowercase) {
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        for (auto& t : split_whitespace(line)) tokens.push_back(lowercase ? fold_case(t) : std::move(t));
    }
    return tokens;
}

std::vector<std::string> read_tokens(const std::filesystem::path& path, bool lowercase) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    return read_tokens(in, lowercase);
}

Sentence encode_sentence(std::span<const std::string> raw_tokens, const Vocabulary& vocab,
                         bool lowercase) {
    Sentence s;
    s.tokens.reserve(raw_tokens.size() + 1);
    s.tokens.push_back(vocab.bos_id());
    for (const auto& t : raw_tokens) {
        WordId id = lowercase ? vocab.id(fold_case(t)) : vocab.id(t);
        // A literal "<s>" inside a sentence is not a sentence start.
        s.tokens.push_back(id == vocab.bos_id() ? vocab.unk_id() : id);
    }
    return s;
}

LoadResult load_corpus(std::istream& in, const Vocabulary& vocab, std::size_t max_len,
                       bool lowercase) {
    if (max_len < 1) throw DataError("max_len must be at least 1");
    LoadResult result;
    std::string line;
    while (std::getline(in, line)) {
        auto raw = split_whitespace(line);
        if (raw.size() > max_len) {
            ++result.dropped;
            continue;
        }
        result.corpus.sentences.push_back(encode_sentence(raw, vocab, lowercase));
    }
    if (in.bad()) throw DataError("read error while loading corpus");
    return result;
}

LoadResult load_corpus(const std::filesystem::path& path, const Vocabulary& vocab,
                       std::size_t max_len, bool lowercase) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    return load_corpus(in, vocab, max_len, lowercase);
}

double oov_rate(const Corpus& corpus, const Vocabulary& vocab) {
    std::size_t total = 0, unk = 0;
    for (const auto& s : corpus.sentences) {
        for (std::size_t i = 1; i < s.tokens.size(); ++i) {
            ++total;
            if (s.tokens[i] == vocab.unk_id()) ++unk;
        }
    }
    if (total == 0) throw DataError("empty corpus");
    return static_cast<double>(unk) / static_cast<double>(total);
}

std::string decode_sentence(const Sentence& sentence, const Vocabulary& vocab) {
    std::string out;
    for (std::size_t i = 1; i < sentence.tokens.size(); ++i) {
        if (i > 1) out += ' ';
        out += vocab.word(sentence.tokens[i]);
    }
    return out;
}

}  // namespace ltlm

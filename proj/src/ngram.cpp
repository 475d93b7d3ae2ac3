#include "ltlm/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "ltlm/error.hpp"

namespace ltlm {

namespace {

constexpr std::string_view kMknHeader = "LTLM-MKN v1";

void put_u32(std::string& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}
std::uint64_t get_uint(std::string_view in, std::size_t pos, int bytes) {
    std::uint64_t v = 0;
    for (int b = 0; b < bytes; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + b])) << (8 * b);
    return v;
}

WordId first_word(const std::string& key) { return static_cast<WordId>(get_uint(key, 0, 4)); }

}  // namespace

MknModel::Key MknModel::make_key(std::span<const WordId> ids) {
    Key k;
    k.reserve(ids.size() * 4);
    for (WordId w : ids) put_u32(k, w);
    return k;
}

MknModel::MknModel(std::size_t vocab_size, int order, WordId bos)
    : order_(order), vocab_size_(vocab_size), bos_(bos) {
    if (order < 1 || order > kMaxNgramOrder) throw DataError("n-gram order must be in 1..4");
    if (vocab_size < 2) throw DataError("vocabulary too small for an n-gram model");
    adjusted_.resize(order);
    finalize(nullptr);
}

MknModel MknModel::train(const Corpus& corpus, std::size_t vocab_size, int order, std::vector<std::string>* warnings,
                         WordId bos) {
    MknModel m(vocab_size, order, bos);
    if (corpus.token_count() == 0) throw DataError("empty corpus");

    std::vector<std::unordered_map<Key, std::uint64_t>> raw(order);
    for (const auto& sent : corpus.sentences) {
        const auto& t = sent.tokens;
        for (std::size_t i = 1; i < t.size(); ++i) {
            if (t[i] >= vocab_size) throw DataError("word id outside the vocabulary");
            for (int n = 1; n <= order && static_cast<int>(i) - n + 1 >= 0; ++n) {
                const std::size_t start = i + 1 - n;
                ++raw[n - 1][make_key({t.data() + start, static_cast<std::size_t>(n)})];
            }
        }
    }

    m.adjusted_[order - 1] = raw[order - 1];
    for (int n = order - 1; n >= 1; --n) {
        // Distinct left extensions of each order-n suffix.
        std::unordered_map<Key, std::uint64_t> continuation;
        for (const auto& [key, c] : raw[n]) ++continuation[key.substr(4)];
        auto& adj = m.adjusted_[n - 1];
        for (const auto& [key, c] : raw[n - 1]) {
            if (first_word(key) == bos) {
                adj[key] = c;
            } else {
                auto it = continuation.find(key);
                adj[key] = it == continuation.end() ? c : it->second;
            }
        }
    }
    m.finalize(warnings);
    return m;
}

void MknModel::finalize(std::vector<std::string>* warnings) {
    contexts_.assign(order_, {});
    discounts_.assign(order_, {});
    coc_.assign(order_, {});
    for (int n = 1; n <= order_; ++n) {
        auto& coc = coc_[n - 1];
        auto& ctx = contexts_[n - 1];
        for (const auto& [key, a] : adjusted_[n - 1]) {
            if (a == 1) ++coc.n1;
            else if (a == 2) ++coc.n2;
            else if (a == 3) ++coc.n3;
            else if (a == 4) ++coc.n4;
            auto& st = ctx[key.substr(0, key.size() - 4)];
            st.total += a;
            if (a == 1) ++st.n1;
            else if (a == 2) ++st.n2;
            else if (a >= 3) ++st.n3plus;
        }
        auto& d = discounts_[n - 1];
        if (coc.n1 == 0 || coc.n2 == 0 || coc.n3 == 0) {
            d = {0.5, 0.5, 0.5, true};
            if (warnings && !adjusted_[n - 1].empty())
                warnings->push_back("order " + std::to_string(n) +
                                    ": degenerate count-of-counts, using a single discount 0.5");
        } else {
            const double n1 = static_cast<double>(coc.n1), n2 = static_cast<double>(coc.n2);
            const double n3 = static_cast<double>(coc.n3), n4 = static_cast<double>(coc.n4);
            const double y = n1 / (n1 + 2.0 * n2);
            d.d1 = std::clamp(1.0 - 2.0 * y * n2 / n1, 0.0, 1.0);
            d.d2 = std::clamp(2.0 - 3.0 * y * n3 / n2, 0.0, 1.0);
            d.d3 = std::clamp(3.0 - 4.0 * y * n4 / n3, 0.0, 1.0);
            d.fallback = false;
        }
    }
}

std::uint64_t MknModel::adjusted_count(std::span<const WordId> ngram) const {
    if (ngram.empty() || static_cast<int>(ngram.size()) > order_) return 0;
    const auto& table = adjusted_[ngram.size() - 1];
    auto it = table.find(make_key(ngram));
    return it == table.end() ? 0 : it->second;
}

double MknModel::prob_order(int n, std::span<const WordId> context, WordId w) const {
    const double lower = n == 1 ? 1.0 / static_cast<double>(vocab_size_ - 1) : prob_order(n - 1, context.subspan(1), w);
    const auto& ctx_table = contexts_[n - 1];
    auto it = ctx_table.find(make_key(context));
    if (it == ctx_table.end() || it->second.total == 0) return lower;
    const auto& st = it->second;

    Key full = make_key(context);
    put_u32(full, w);
    const auto& table = adjusted_[n - 1];
    auto ai = table.find(full);
    const std::uint64_t a = ai == table.end() ? 0 : ai->second;
    const auto& d = discounts_[n - 1];
    const double discount = a == 0 ? 0.0 : a == 1 ? d.d1 : a == 2 ? d.d2 : d.d3;
    const double total = static_cast<double>(st.total);
    const double gamma = (d.d1 * static_cast<double>(st.n1) + d.d2 * static_cast<double>(st.n2) +
                          d.d3 * static_cast<double>(st.n3plus)) /
                         total;
    return (static_cast<double>(a) - discount) / total + gamma * lower;
}

double MknModel::probability(std::span<const WordId> history, WordId w) const {
    if (w >= vocab_size_) throw DataError("word id outside the vocabulary");
    if (w == bos_) return 0.0;
    const std::size_t len = std::min<std::size_t>(history.size(), static_cast<std::size_t>(order_ - 1));
    return prob_order(static_cast<int>(len) + 1, history.subspan(history.size() - len), w);
}

std::string MknModel::serialize() const {
    std::ostringstream head;
    head << kMknHeader << '\n'
         << "endian little\n"
         << "order " << order_ << '\n'
         << "vocab_size " << vocab_size_ << '\n'
         << "bos " << bos_ << '\n'
         << "vocab_hash " << std::hex << vocab_hash << std::dec << '\n'
         << "entries";
    for (const auto& t : adjusted_) head << ' ' << t.size();
    head << '\n';
    std::string out = head.str();
    for (int n = 1; n <= order_; ++n) {
        std::vector<std::pair<Key, std::uint64_t>> sorted(adjusted_[n - 1].begin(), adjusted_[n - 1].end());
        std::sort(sorted.begin(), sorted.end());
        for (const auto& [key, a] : sorted) {
            out += key;
            put_u64(out, a);
        }
    }
    out += "END\n";
    return out;
}

MknModel MknModel::deserialize(std::string_view bytes) {
    std::istringstream head{std::string(bytes.substr(0, std::min<std::size_t>(bytes.size(), 4096)))};
    std::string line;
    if (!std::getline(head, line) || line != kMknHeader) {
        if (line.rfind("LTLM-MKN", 0) == 0) throw FormatError("n-gram model file: unsupported version");
        throw FormatError("n-gram model file: missing LTLM-MKN header");
    }
    auto field = [&](const std::string& key) {
        if (!std::getline(head, line) || line.rfind(key + " ", 0) != 0)
            throw FormatError("n-gram model file: expected field '" + key + "'");
        return line.substr(key.size() + 1);
    };
    if (field("endian") != "little") throw FormatError("n-gram model file: unsupported endianness");
    MknModel m;
    try {
        m.order_ = std::stoi(field("order"));
        m.vocab_size_ = std::stoull(field("vocab_size"));
        m.bos_ = static_cast<WordId>(std::stoul(field("bos")));
        m.vocab_hash = std::stoull(field("vocab_hash"), nullptr, 16);
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception&) {
        throw FormatError("n-gram model file: malformed header number");
    }
    if (m.order_ < 1 || m.order_ > kMaxNgramOrder) throw FormatError("n-gram model file: bad order");
    std::istringstream entries_line(field("entries"));
    std::vector<std::size_t> sizes(m.order_);
    for (auto& s : sizes)
        if (!(entries_line >> s)) throw FormatError("n-gram model file: bad entries line");

    std::size_t pos = static_cast<std::size_t>(head.tellg());
    m.adjusted_.assign(m.order_, {});
    for (int n = 1; n <= m.order_; ++n) {
        const std::size_t rec = 4 * static_cast<std::size_t>(n) + 8;
        if (bytes.size() < pos + sizes[n - 1] * rec) throw FormatError("n-gram model file truncated");
        auto& table = m.adjusted_[n - 1];
        table.reserve(sizes[n - 1]);
        for (std::size_t e = 0; e < sizes[n - 1]; ++e) {
            Key key(bytes.substr(pos, 4 * n));
            table[key] = get_uint(bytes, pos + 4 * n, 8);
            pos += rec;
        }
    }
    if (bytes.substr(pos) != "END\n") throw FormatError("n-gram model file truncated or has trailing data");
    m.finalize(nullptr);
    return m;
}

void MknModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    const auto bytes = serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

MknModel MknModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

std::vector<double> mkn_word_probabilities(const MknModel& model, const Sentence& sentence) {
    std::vector<double> out;
    out.reserve(sentence.length());
    const std::span<const WordId> tokens(sentence.tokens);
    for (std::size_t i = 1; i < tokens.size(); ++i) out.push_back(model.probability(tokens.first(i), tokens[i]));
    return out;
}

double mkn_perplexity(const MknModel& model, const Corpus& corpus) {
    double lp = 0.0;
    std::size_t n = 0;
    for (const auto& s : corpus.sentences) {
        for (double p : mkn_word_probabilities(model, s)) {
            lp += std::log(p);
            ++n;
        }
    }
    if (n == 0) throw DataError("empty corpus");
    return std::exp(-lp / static_cast<double>(n));
}

}  // namespace ltlm

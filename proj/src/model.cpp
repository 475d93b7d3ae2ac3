#include "ltlm/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>

#include <boost/math/special_functions/digamma.hpp>

#include "ltlm/error.hpp"

namespace ltlm {

namespace {

using boost::math::digamma;

constexpr std::string_view kModelHeader = "LTLM-MODEL v1";
constexpr double kMinConcentration = 1e-8;

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

Hyperparams Hyperparams::defaults(int num_roles) {
    Hyperparams h;
    h.alpha_left.assign(num_roles, 50.0 / num_roles);
    h.alpha_right.assign(num_roles, 50.0 / num_roles);
    h.beta = 0.01;
    return h;
}

bool Hyperparams::valid() const {
    auto positive = [](double x) { return x > 0.0 && std::isfinite(x); };
    if (alpha_left.size() != alpha_right.size() || !positive(beta)) return false;
    for (double a : alpha_left)
        if (!positive(a)) return false;
    for (double a : alpha_right)
        if (!positive(a)) return false;
    return true;
}

CountTables::CountTables(int num_roles, std::size_t vocab_size)
    : num_roles_(num_roles),
      vocab_size_(vocab_size),
      word_role_(vocab_size * num_roles, 0),
      role_total_(num_roles, 0),
      rr_left_(static_cast<std::size_t>(num_roles) * num_roles, 0),
      rr_right_(static_cast<std::size_t>(num_roles) * num_roles, 0),
      rr_left_total_(num_roles, 0),
      rr_right_total_(num_roles, 0) {
    if (num_roles < 1) throw DataError("number of roles must be positive");
}

CountTables CountTables::tally(const Corpus& corpus, std::span<const ProjectiveTree> trees, int num_roles,
                               std::size_t vocab_size) {
    if (trees.size() != corpus.size()) throw DataError("one tree per sentence required");
    CountTables counts(num_roles, vocab_size);
    for (std::size_t s = 0; s < corpus.size(); ++s) {
        const auto& sent = corpus.sentences[s];
        if (trees[s].n_nodes() != sent.tokens.size()) throw DataError("tree size does not match sentence");
        for (std::size_t i = 1; i < sent.tokens.size(); ++i)
            counts.add_node(sent, trees[s], static_cast<int>(i), +1);
    }
    return counts;
}

std::int64_t CountTables::total_words() const {
    return std::accumulate(role_total_.begin(), role_total_.end(), std::int64_t{0});
}

std::int64_t CountTables::total_edges(Side side) const {
    const auto& t = rr_total(side);
    return std::accumulate(t.begin(), t.end(), std::int64_t{0});
}

void CountTables::add_word(WordId w, Role k, int delta) {
    if (w >= vocab_size_ || k < 1 || k > num_roles_) throw InvariantError("word count index out of range");
    auto& cell = word_role_[idx_word(w, k)];
    auto& total = role_total_[k - 1];
    if (cell + delta < 0 || total + delta < 0) throw InvariantError("negative word-in-role count");
    cell += delta;
    total += delta;
}

void CountTables::add_edge(Side side, Role parent, Role child, int delta) {
    if (parent < 1 || parent > num_roles_ || child < 1 || child > num_roles_)
        throw InvariantError("role count index out of range");
    auto& cell = rr(side)[idx_rr(parent, child)];
    auto& total = rr_total(side)[parent - 1];
    if (cell + delta < 0 || total + delta < 0) throw InvariantError("negative role-by-role count");
    cell += delta;
    total += delta;
}

void CountTables::add_node(const Sentence& sentence, const ProjectiveTree& tree, int i, int delta) {
    const int h = tree.parent[i];
    add_word(sentence.tokens[i], tree.role[i], delta);
    add_edge(side_of(i, h), tree.role[h], tree.role[i], delta);
}

double predictive_word(const CountTables& counts, WordId w, Role k, double beta,
                       std::optional<WordExclusion> exclude) {
    double n = static_cast<double>(counts.word_role(w, k));
    double total = static_cast<double>(counts.role_total(k));
    if (exclude && exclude->role == k) {
        total -= 1.0;
        if (exclude->word == w) n -= 1.0;
        if (n < 0.0 || total < 0.0) throw InvariantError("exclusion makes a word count negative");
    }
    return (n + beta) / (total + static_cast<double>(counts.vocab_size()) * beta);
}

double predictive_role(const CountTables& counts, Role k, Role parent, Side side, std::span<const double> alpha,
                       std::optional<EdgeExclusion> exclude) {
    double n = static_cast<double>(counts.role_role(side, parent, k));
    double total = static_cast<double>(counts.parent_total(side, parent));
    if (exclude && exclude->parent == parent) {
        total -= 1.0;
        if (exclude->child == k) n -= 1.0;
        if (n < 0.0 || total < 0.0) throw InvariantError("exclusion makes a role count negative");
    }
    return (n + alpha[k - 1]) / (total + sum(alpha));
}

Predictive::Predictive(const CountTables& counts, const Hyperparams& hyper)
    : counts_(&counts),
      hyper_(&hyper),
      beta_(hyper.beta),
      beta_vocab_(hyper.beta * static_cast<double>(counts.vocab_size())),
      alpha_sum_left_(sum(hyper.alpha_left)),
      alpha_sum_right_(sum(hyper.alpha_right)) {}

double joint_score(const CountTables& counts, const Hyperparams& hyper, const Sentence& sentence,
                   const ProjectiveTree& tree, int i, int j, Role k) {
    double score = predictive_word(counts, sentence.tokens[i], k, hyper.beta);
    const Side own = side_of(i, j);
    score *= predictive_role(counts, k, tree.role[j], own, hyper.alpha(own));
    for (int a : tree.children(i)) {
        const Side s = side_of(a, i);
        score *= predictive_role(counts, tree.role[a], k, s, hyper.alpha(s));
    }
    return score;
}

Table estimate_phi(const CountTables& counts, double beta) {
    const int K = counts.num_roles();
    const std::size_t V = counts.vocab_size();
    Table phi(K, V);
    for (Role k = 1; k <= K; ++k) {
        const double denom = static_cast<double>(counts.role_total(k)) + static_cast<double>(V) * beta;
        for (std::size_t w = 0; w < V; ++w)
            phi(k - 1, w) = (static_cast<double>(counts.word_role(static_cast<WordId>(w), k)) + beta) / denom;
    }
    return phi;
}

Table estimate_theta(const CountTables& counts, std::span<const double> alpha, Side side) {
    const int K = counts.num_roles();
    const double alpha_sum = sum(alpha);
    Table theta(K, K);
    for (Role p = 1; p <= K; ++p) {
        const double denom = static_cast<double>(counts.parent_total(side, p)) + alpha_sum;
        for (Role k = 1; k <= K; ++k)
            theta(p - 1, k - 1) = (static_cast<double>(counts.role_role(side, p, k)) + alpha[k - 1]) / denom;
    }
    return theta;
}

double LtlmModel::log_joint(const Sentence& sentence, const ProjectiveTree& tree) const {
    double lp = 0.0;
    for (std::size_t i = 1; i < tree.n_nodes(); ++i) {
        const int h = tree.parent[i];
        lp += std::log(word_prob(sentence.tokens[i], tree.role[i]));
        lp += std::log(role_prob(tree.role[i], tree.role[h], side_of(static_cast<int>(i), h)));
    }
    return lp;
}

LtlmModel estimate_model(const CountTables& counts, const Hyperparams& hyper, std::uint64_t vocab_hash) {
    LtlmModel m;
    m.num_roles = counts.num_roles();
    m.vocab_size = counts.vocab_size();
    m.vocab_hash = vocab_hash;
    m.hyper = hyper;
    m.phi = estimate_phi(counts, hyper.beta);
    m.theta_left = estimate_theta(counts, hyper.alpha_left, Side::Left);
    m.theta_right = estimate_theta(counts, hyper.alpha_right, Side::Right);
    return m;
}

FixedPointResult fit_dirichlet_asymmetric(std::span<const std::int64_t> counts, std::size_t num_contexts,
                                          std::size_t num_categories, std::vector<double> alpha,
                                          const FixedPointOptions& opts) {
    if (counts.size() != num_contexts * num_categories || alpha.size() != num_categories)
        throw DataError("dirichlet fit: dimension mismatch");

    std::vector<std::int64_t> totals(num_contexts, 0);
    for (std::size_t p = 0; p < num_contexts; ++p)
        for (std::size_t k = 0; k < num_categories; ++k) totals[p] += counts[p * num_categories + k];

    FixedPointResult res;
    res.alpha = alpha;
    if (std::all_of(totals.begin(), totals.end(), [](std::int64_t t) { return t == 0; })) {
        res.converged = true;
        return res;
    }

    std::vector<double> next(num_categories);
    for (int it = 0; it < opts.max_iterations; ++it) {
        const double a_sum = sum(alpha);
        double denom = 0.0;
        for (std::int64_t t : totals)
            if (t > 0) denom += digamma(static_cast<double>(t) + a_sum) - digamma(a_sum);

        double max_rel = 0.0;
        for (std::size_t k = 0; k < num_categories; ++k) {
            double numer = 0.0;
            for (std::size_t p = 0; p < num_contexts; ++p) {
                const auto n = counts[p * num_categories + k];
                if (n > 0) numer += digamma(static_cast<double>(n) + alpha[k]) - digamma(alpha[k]);
            }
            next[k] = std::max(alpha[k] * numer / denom, kMinConcentration);
            max_rel = std::max(max_rel, std::abs(next[k] - alpha[k]) / alpha[k]);
        }
        res.iterations = it + 1;
        if (!std::all_of(next.begin(), next.end(), [](double x) { return std::isfinite(x); })) {
            res.finite = false;
            return res;
        }
        alpha = next;
        res.alpha = alpha;
        if (max_rel < opts.tolerance) {
            res.converged = true;
            break;
        }
    }
    return res;
}

FixedPointResult fit_dirichlet_symmetric(std::span<const std::int64_t> cells,
                                         std::span<const std::int64_t> context_totals,
                                         std::size_t num_categories, double beta,
                                         const FixedPointOptions& opts) {
    // Histograms of non-zero counts; zero cells contribute nothing.
    std::map<std::int64_t, std::int64_t> cell_hist, total_hist;
    for (auto n : cells)
        if (n > 0) ++cell_hist[n];
    for (auto t : context_totals)
        if (t > 0) ++total_hist[t];

    FixedPointResult res;
    res.alpha = {beta};
    if (total_hist.empty()) {
        res.converged = true;
        return res;
    }
    const double dim = static_cast<double>(num_categories);
    for (int it = 0; it < opts.max_iterations; ++it) {
        double numer = 0.0, denom = 0.0;
        for (auto [n, mult] : cell_hist)
            numer += static_cast<double>(mult) * (digamma(static_cast<double>(n) + beta) - digamma(beta));
        for (auto [t, mult] : total_hist)
            denom += static_cast<double>(mult) * (digamma(static_cast<double>(t) + dim * beta) - digamma(dim * beta));
        const double next = std::max(beta * numer / (dim * denom), kMinConcentration);
        res.iterations = it + 1;
        if (!std::isfinite(next)) {
            res.finite = false;
            return res;
        }
        const double rel = std::abs(next - beta) / beta;
        beta = next;
        res.alpha = {beta};
        if (rel < opts.tolerance) {
            res.converged = true;
            break;
        }
    }
    return res;
}

HyperUpdate update_hyperparameters(const CountTables& counts, const Hyperparams& current,
                                   const FixedPointOptions& opts) {
    HyperUpdate out{current, {}};
    const auto K = static_cast<std::size_t>(counts.num_roles());

    for (Side side : {Side::Left, Side::Right}) {
        const char* name = side == Side::Left ? "alpha_left" : "alpha_right";
        if (counts.total_edges(side) == 0) continue;
        auto fit = fit_dirichlet_asymmetric(counts.role_role_table(side), K, K, current.alpha(side), opts);
        if (!fit.finite) {
            out.warnings.push_back(std::string(name) + ": non-finite fixed-point iterate, keeping previous values");
            continue;
        }
        if (!fit.converged)
            out.warnings.push_back(std::string(name) + ": fixed point did not converge in " +
                                   std::to_string(fit.iterations) + " iterations");
        (side == Side::Left ? out.hyper.alpha_left : out.hyper.alpha_right) = fit.alpha;
    }

    if (counts.total_words() > 0) {
        std::vector<std::int64_t> totals(K);
        for (std::size_t k = 0; k < K; ++k) totals[k] = counts.role_total(static_cast<Role>(k + 1));
        auto fit = fit_dirichlet_symmetric(counts.word_role_table(), totals, counts.vocab_size(), current.beta, opts);
        if (!fit.finite) {
            out.warnings.push_back("beta: non-finite fixed-point iterate, keeping previous value");
        } else {
            if (!fit.converged)
                out.warnings.push_back("beta: fixed point did not converge in " + std::to_string(fit.iterations) +
                                       " iterations");
            out.hyper.beta = fit.alpha[0];
        }
    }
    return out;
}

namespace {

void put_f64(std::string& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

double get_f64(std::string_view in, std::size_t offset) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + b])) << (8 * b);
    return std::bit_cast<double>(bits);
}

// Reads "key value\n" starting at pos.
std::string header_field(std::string_view bytes, std::size_t& pos, std::string_view key) {
    auto eol = bytes.find('\n', pos);
    if (eol == std::string_view::npos) throw FormatError("model file truncated in header");
    std::string_view line = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.substr(0, key.size()) != key || line.size() <= key.size() || line[key.size()] != ' ')
        throw FormatError("model file: expected field '" + std::string(key) + "'");
    return std::string(line.substr(key.size() + 1));
}

}  // namespace

std::string serialize(const LtlmModel& model) {
    const auto K = static_cast<std::size_t>(model.num_roles);
    const std::size_t payload = 2 * K + 1 + K * model.vocab_size + 2 * K * K;
    std::ostringstream head;
    head << kModelHeader << '\n'
         << "endian little\n"
         << "roles " << model.num_roles << '\n'
         << "vocab_size " << model.vocab_size << '\n'
         << "vocab_hash " << std::hex << model.vocab_hash << std::dec << '\n'
         << "doubles " << payload << '\n';
    std::string out = head.str();
    out.reserve(out.size() + payload * 8 + 8);
    for (double a : model.hyper.alpha_left) put_f64(out, a);
    for (double a : model.hyper.alpha_right) put_f64(out, a);
    put_f64(out, model.hyper.beta);
    for (double v : model.phi.data) put_f64(out, v);
    for (double v : model.theta_left.data) put_f64(out, v);
    for (double v : model.theta_right.data) put_f64(out, v);
    out += "END\n";
    return out;
}

LtlmModel deserialize(std::string_view bytes) {
    std::size_t pos = bytes.find('\n');
    if (pos == std::string_view::npos || bytes.substr(0, pos) != kModelHeader) {
        if (bytes.substr(0, 10) == "LTLM-MODEL") throw FormatError("model file: unsupported version");
        throw FormatError("model file: missing LTLM-MODEL header");
    }
    ++pos;
    if (header_field(bytes, pos, "endian") != "little") throw FormatError("model file: unsupported endianness");

    LtlmModel m;
    std::size_t doubles = 0;
    try {
        m.num_roles = std::stoi(header_field(bytes, pos, "roles"));
        m.vocab_size = std::stoull(header_field(bytes, pos, "vocab_size"));
        m.vocab_hash = std::stoull(header_field(bytes, pos, "vocab_hash"), nullptr, 16);
        doubles = std::stoull(header_field(bytes, pos, "doubles"));
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception&) {
        throw FormatError("model file: malformed header number");
    }
    if (m.num_roles < 1) throw FormatError("model file: bad role count");
    const auto K = static_cast<std::size_t>(m.num_roles);
    if (doubles != 2 * K + 1 + K * m.vocab_size + 2 * K * K) throw FormatError("model file: inconsistent dimensions");
    if (bytes.size() != pos + doubles * 8 + 4) throw FormatError("model file truncated or has trailing data");
    if (bytes.substr(pos + doubles * 8) != "END\n") throw FormatError("model file: missing end marker");

    auto read_vec = [&](std::size_t n) {
        std::vector<double> v(n);
        for (auto& x : v) {
            x = get_f64(bytes, pos);
            pos += 8;
        }
        return v;
    };
    m.hyper.alpha_left = read_vec(K);
    m.hyper.alpha_right = read_vec(K);
    m.hyper.beta = read_vec(1)[0];
    m.phi = Table(K, m.vocab_size);
    m.phi.data = read_vec(K * m.vocab_size);
    m.theta_left = Table(K, K);
    m.theta_left.data = read_vec(K * K);
    m.theta_right = Table(K, K);
    m.theta_right.data = read_vec(K * K);
    return m;
}

void save_model(const LtlmModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    const auto bytes = serialize(model);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + path.string());
}

LtlmModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

}  // namespace ltlm

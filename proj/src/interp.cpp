#include "ltlm/interp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "ltlm/error.hpp"

namespace ltlm {

namespace {

constexpr std::string_view kProbsHeader = "LTLM-PROBS v1";

void check_aligned(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("probability streams differ in length");
    if (a.empty()) throw DataError("empty probability stream");
}

double mean_log_likelihood(double lambda, std::span<const double> a, std::span<const double> b) {
    double ll = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ll += std::log(lambda * a[i] + (1.0 - lambda) * b[i]);
    return ll / static_cast<double>(a.size());
}

}  // namespace

void ProbStream::add_sentence(std::span<const double> sentence_probs) {
    sentence_starts.push_back(probs.size());
    probs.insert(probs.end(), sentence_probs.begin(), sentence_probs.end());
}

void ProbStream::validate() const {
    for (std::size_t i = 0; i < probs.size(); ++i)
        if (!(probs[i] > 0.0 && probs[i] <= 1.0))
            throw DataError("probability " + std::to_string(i) + " outside (0, 1] in stream " + source);
}

void write_prob_stream(std::ostream& out, const ProbStream& stream) {
    out << kProbsHeader << '\n';
    char buf[32];
    for (std::size_t s = 0; s < stream.sentence_starts.size(); ++s) {
        const std::size_t begin = stream.sentence_starts[s];
        const std::size_t end = s + 1 < stream.sentence_starts.size() ? stream.sentence_starts[s + 1] : stream.probs.size();
        for (std::size_t i = begin; i < end; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", stream.probs[i]);
            out << buf << '\n';
        }
        out << '\n';
    }
}

ProbStream read_prob_stream(std::istream& in, const std::string& source) {
    ProbStream stream;
    stream.source = source;
    std::string line;
    if (!std::getline(in, line) || line != kProbsHeader)
        throw FormatError("probability stream " + source + ": missing LTLM-PROBS v1 header");
    bool open = false;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            open = false;
            continue;
        }
        if (!open) {
            stream.sentence_starts.push_back(stream.probs.size());
            open = true;
        }
        double v = 0.0;
        try {
            std::size_t used = 0;
            v = std::stod(line, &used);
            if (used != line.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw FormatError("probability stream " + source + ": bad value on line " + std::to_string(lineno));
        }
        if (!(v > 0.0 && v <= 1.0))
            throw FormatError("probability stream " + source + ": value outside (0, 1] on line " +
                              std::to_string(lineno));
        stream.probs.push_back(v);
    }
    return stream;
}

void save_prob_stream(const ProbStream& stream, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    write_prob_stream(out, stream);
}

ProbStream load_prob_stream(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    return read_prob_stream(in, path.string());
}

double stream_perplexity(std::span<const double> probs) {
    if (probs.empty()) throw DataError("empty probability stream");
    double lp = 0.0;
    for (double p : probs) lp += std::log(p);
    return std::exp(-lp / static_cast<double>(probs.size()));
}

EmResult em_lambda(std::span<const double> dev_a, std::span<const double> dev_b, const EmOptions& opts) {
    check_aligned(dev_a, dev_b);
    EmResult res;
    double lambda = opts.initial_lambda;
    res.log_likelihood.push_back(mean_log_likelihood(lambda, dev_a, dev_b));
    for (int it = 0; it < opts.max_iterations; ++it) {
        double resp = 0.0;
        for (std::size_t i = 0; i < dev_a.size(); ++i) {
            const double pa = lambda * dev_a[i];
            resp += pa / (pa + (1.0 - lambda) * dev_b[i]);
        }
        const double next = resp / static_cast<double>(dev_a.size());
        const double delta = std::abs(next - lambda);
        lambda = next;
        res.iterations = it + 1;
        res.log_likelihood.push_back(mean_log_likelihood(lambda, dev_a, dev_b));
        if (delta < opts.tolerance) {
            res.converged = true;
            break;
        }
    }
    // The log likelihood is concave in lambda. A positive slope at 1 (negative
    // at 0) puts the maximum on that endpoint, which EM only approaches
    // geometrically.
    double slope_at_one = 0.0, slope_at_zero = 0.0;
    for (std::size_t i = 0; i < dev_a.size(); ++i) {
        slope_at_one += 1.0 - dev_b[i] / dev_a[i];
        slope_at_zero += dev_a[i] / dev_b[i] - 1.0;
    }
    const double edge = slope_at_one > 0.0 ? 1.0 : slope_at_zero < 0.0 ? 0.0 : lambda;
    if (edge != lambda) {
        const double ll = mean_log_likelihood(edge, dev_a, dev_b);
        if (ll >= res.log_likelihood.back()) {
            lambda = edge;
            res.log_likelihood.back() = ll;
            res.converged = true;
        }
    }
    res.lambda = lambda;
    return res;
}

double mixture_perplexity(double lambda, std::span<const double> a, std::span<const double> b) {
    check_aligned(a, b);
    if (lambda < 0.0 || lambda > 1.0) throw DataError("lambda must lie in [0, 1]");
    double lp = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) lp += std::log(lambda * a[i] + (1.0 - lambda) * b[i]);
    return std::exp(-lp / static_cast<double>(a.size()));
}

}  // namespace ltlm

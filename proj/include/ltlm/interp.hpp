#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ltlm {

// Per-word probabilities of one model over a corpus, in corpus order.
struct ProbStream {
    std::vector<double> probs;
    // Index into probs where each sentence starts.
    std::vector<std::size_t> sentence_starts;
    std::string source;

    std::size_t size() const { return probs.size(); }
    void add_sentence(std::span<const double> sentence_probs);
    void validate() const;  // entries in (0, 1]
};

// `LTLM-PROBS v1` header, one probability per line, blank line after each
// sentence.
void write_prob_stream(std::ostream& out, const ProbStream& stream);
ProbStream read_prob_stream(std::istream& in, const std::string& source = {});
void save_prob_stream(const ProbStream& stream, const std::filesystem::path& path);
ProbStream load_prob_stream(const std::filesystem::path& path);

double stream_perplexity(std::span<const double> probs);

struct EmOptions {
    double initial_lambda = 0.5;
    double tolerance = 1e-6;
    int max_iterations = 200;
};

struct EmResult {
    double lambda = 0.5;
    int iterations = 0;
    bool converged = false;
    // Mean log likelihood at the initial lambda and after each iteration.
    std::vector<double> log_likelihood;
};

// Maximum likelihood weight of stream a in lambda*a + (1-lambda)*b.
EmResult em_lambda(std::span<const double> dev_a, std::span<const double> dev_b, const EmOptions& opts = {});

double mixture_perplexity(double lambda, std::span<const double> a, std::span<const double> b);

}  // namespace ltlm

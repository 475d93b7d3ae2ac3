#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ltlm/corpus.hpp"
#include "ltlm/error.hpp"
#include "ltlm/inference.hpp"
#include "ltlm/interp.hpp"
#include "ltlm/model.hpp"
#include "ltlm/ngram.hpp"
#include "ltlm/sampler.hpp"
#include "ltlm/synthetic.hpp"
#include "ltlm/tree.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace ltlm::cli {
namespace {

constexpr const char* kVersion = "ltlm 1.0";

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string fmt_exact(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::uint64_t fnv1a_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::size_t length_limit(std::size_t flag) { return flag == 0 ? std::numeric_limits<std::size_t>::max() : flag; }

// Book-keeping shared by every command: report lines, manifest, timing.
class Run {
public:
    Run(std::string command, json config)
        : command_(std::move(command)), config_(std::move(config)), start_(std::chrono::steady_clock::now()) {}

    void input(const fs::path& p) { inputs_[p.string()] = hex64(fnv1a_file(p)); }
    void output(const fs::path& p) { outputs_.push_back(p.string()); }
    void seed(std::uint64_t s) { seed_ = s; }

    template <typename T>
    void report(const std::string& key, const T& value) {
        std::string text;
        if constexpr (std::is_floating_point_v<T>) {
            text = fmt_double(value);
            report_[key] = value;
        } else if constexpr (std::is_same_v<T, bool>) {
            text = value ? "true" : "false";
            report_[key] = value;
        } else if constexpr (std::is_arithmetic_v<T>) {
            text = std::to_string(value);
            report_[key] = value;
        } else {
            text = std::string(value);
            report_[key] = text;
        }
        std::cout << key << '=' << text << '\n';
    }

    void warn(const std::string& message) {
        std::cerr << "warning message=" << json(message).dump() << '\n';
        warnings_.push_back(message);
    }

    void finish(const fs::path& manifest_path) {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::cout << "wall_time_seconds=" << fmt_double(secs) << '\n';
        json m;
        m["tool"] = kVersion;
        m["command"] = command_;
        m["config"] = config_;
        m["seed"] = seed_ ? json(*seed_) : json(nullptr);
        m["inputs"] = inputs_;
        m["outputs"] = outputs_;
        m["report"] = report_;
        m["warnings"] = warnings_;
        m["wall_time_seconds"] = secs;
        if (manifest_path.has_parent_path()) fs::create_directories(manifest_path.parent_path());
        std::ofstream out(manifest_path, std::ios::binary);
        if (!out) throw DataError("cannot write " + manifest_path.string());
        out << m.dump(2) << '\n';
        std::cout << "manifest=" << manifest_path.string() << '\n';
    }

private:
    std::string command_;
    json config_;
    std::chrono::steady_clock::time_point start_;
    json inputs_ = json::object();
    json outputs_ = json::array();
    json report_ = json::object();
    json warnings_ = json::array();
    std::optional<std::uint64_t> seed_;
};

fs::path manifest_for(const std::string& flag, const fs::path& primary, const std::string& command) {
    if (!flag.empty()) return flag;
    if (!primary.empty()) return fs::path(primary.string() + ".manifest.json");
    return fs::path("ltlm_" + command + ".manifest.json");
}

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write " + p.string());
    return out;
}

void check_hash(std::uint64_t model_hash, const Vocabulary& vocab, const std::string& what) {
    if (model_hash != vocab.hash())
        throw DataError("vocabulary hash mismatch: " + what + " has " + hex64(model_hash) + ", vocabulary has " +
                        hex64(vocab.hash()));
}

InitStrategy parse_init(const std::string& s) {
    return s == "random" ? InitStrategy::RandomProjective : InitStrategy::Chain;
}

// ---------------------------------------------------------------- vocab

struct VocabOpts {
    std::string in, out, manifest;
    std::size_t max_size = 100000;
    bool lowercase = false;
};

void cmd_vocab(const VocabOpts& o) {
    Run run("vocab", {{"in", o.in}, {"out", o.out}, {"max_size", o.max_size}, {"lowercase", o.lowercase}});
    run.input(o.in);
    const auto tokens = read_tokens(fs::path(o.in), o.lowercase);
    const auto vocab = Vocabulary::build(tokens, o.max_size);
    vocab.save(fs::path(o.out));
    run.output(o.out);
    std::uint64_t unk = vocab.count(vocab.unk_id());
    run.report("tokens", tokens.size());
    run.report("vocab_size", vocab.size());
    run.report("vocab_hash", hex64(vocab.hash()));
    run.report("oov_rate", tokens.empty() ? 0.0 : static_cast<double>(unk) / static_cast<double>(tokens.size()));
    run.finish(manifest_for(o.manifest, o.out, "vocab"));
}

// ---------------------------------------------------------------- train

struct TrainOpts {
    std::string corpus, vocab, trees, out_dir, manifest, mode = "ltlm", init = "chain";
    int roles = 10, iters_pos = 500, iters_sent = 500, hyper_every = 20, checkpoint_every = 0, log_every = 0;
    std::uint64_t seed = 1;
    std::size_t max_len = 30;
    bool lowercase = false;
};

json train_config_json(const TrainOpts& o) {
    return {{"corpus", o.corpus},     {"vocab", o.vocab},         {"trees", o.trees},
            {"out_dir", o.out_dir},   {"mode", o.mode},           {"roles", o.roles},
            {"iters_pos", o.iters_pos}, {"iters_sent", o.iters_sent}, {"seed", o.seed},
            {"hyper_every", o.hyper_every}, {"checkpoint_every", o.checkpoint_every},
            {"max_len", o.max_len},   {"init", o.init},           {"lowercase", o.lowercase}};
}

void write_trees(const fs::path& p, const Corpus& corpus, const std::vector<ProjectiveTree>& trees,
                 const Vocabulary& vocab) {
    auto out = open_out(p);
    for (std::size_t s = 0; s < corpus.size(); ++s) {
        out << "# sentence=" << s << '\n';
        write_tree_tsv(out, corpus.sentences[s], trees[s], vocab);
    }
}

void write_checkpoint(const fs::path& dir, const LtlmModel& model, const Corpus& corpus,
                      const std::vector<ProjectiveTree>& trees, const Vocabulary& vocab, const json& config) {
    fs::create_directories(dir);
    save_model(model, dir / "model.ltlm");
    write_trees(dir / "trees.tsv", corpus, trees, vocab);
    open_out(dir / "config.json") << config.dump(2) << '\n';
}

void cmd_train(const TrainOpts& o) {
    const json config = train_config_json(o);
    Run run("train", config);
    run.seed(o.seed);
    run.input(o.vocab);
    const auto vocab = Vocabulary::load(fs::path(o.vocab));

    TrainConfig cfg;
    cfg.num_roles = o.roles;
    cfg.iters_per_position = o.iters_pos;
    cfg.iters_per_sentence = o.iters_sent;
    cfg.seed = o.seed;
    cfg.hyper_update_every = o.hyper_every;
    cfg.max_sentence_len = o.max_len;
    cfg.init = parse_init(o.init);
    cfg.mode = o.mode == "stlm" ? TrainMode::StlmFixedTrees : TrainMode::Ltlm;
    cfg.validate();

    Corpus corpus;
    std::vector<ProjectiveTree> gold;
    std::size_t dropped = 0;
    if (cfg.mode == TrainMode::StlmFixedTrees) {
        if (o.trees.empty()) throw DataError("--trees is required with --mode stlm");
        run.input(o.trees);
        std::ifstream in(o.trees, std::ios::binary);
        if (!in) throw DataError("cannot read " + o.trees);
        for (auto& rec : read_tree_tsv(in)) {
            if (rec.words.size() > cfg.max_sentence_len) {
                ++dropped;
                continue;
            }
            corpus.sentences.push_back(encode_sentence(rec.words, vocab, o.lowercase));
            gold.push_back(std::move(rec.tree));
        }
        if (!o.corpus.empty()) {
            run.input(o.corpus);
            const auto text = load_corpus(fs::path(o.corpus), vocab, cfg.max_sentence_len, o.lowercase);
            bool same = text.corpus.size() == corpus.size();
            for (std::size_t s = 0; same && s < corpus.size(); ++s)
                same = text.corpus.sentences[s].tokens == corpus.sentences[s].tokens;
            if (!same) throw DataError("--corpus does not match the sentences of --trees");
        }
    } else {
        if (o.corpus.empty()) throw DataError("--corpus is required with --mode ltlm");
        run.input(o.corpus);
        auto loaded = load_corpus(fs::path(o.corpus), vocab, cfg.max_sentence_len, o.lowercase);
        corpus = std::move(loaded.corpus);
        dropped = loaded.dropped;
    }
    if (corpus.empty() || corpus.token_count() == 0) throw DataError("empty corpus");

    const fs::path out_dir = o.out_dir;
    fs::create_directories(out_dir);
    auto on_iteration = [&](const TrainState& state, int it) {
        if (o.log_every > 0 && it % o.log_every == 0)
            std::cout << "iteration=" << it << " joint_ppx=" << fmt_double(joint_perplexity(state)) << std::endl;
        if (o.checkpoint_every > 0 && it % o.checkpoint_every == 0) {
            const fs::path dir = out_dir / ("checkpoint-" + std::to_string(it));
            write_checkpoint(dir, estimate_model(state.counts, state.hyper, vocab.hash()), corpus, state.trees,
                             vocab, config);
            run.output(dir);
        }
    };

    const auto result = cfg.mode == TrainMode::StlmFixedTrees
                            ? stlm_train(corpus, vocab.size(), gold, cfg, on_iteration, vocab.hash())
                            : train(corpus, vocab.size(), cfg, on_iteration, vocab.hash());
    for (const auto& w : result.warnings) run.warn(w);

    write_checkpoint(out_dir, result.model, corpus, result.trees, vocab, config);
    run.output(out_dir / "model.ltlm");
    run.output(out_dir / "trees.tsv");
    run.output(out_dir / "config.json");

    run.report("mode", o.mode);
    run.report("roles", o.roles);
    run.report("sentences", corpus.size());
    run.report("tokens", corpus.token_count());
    run.report("dropped", dropped);
    run.report("oov_rate", oov_rate(corpus, vocab));
    run.report("joint_ppx", joint_perplexity(result.model, corpus, result.trees));
    run.report("beta", result.hyper.beta);
    run.finish(o.manifest.empty() ? out_dir / "manifest.json" : fs::path(o.manifest));
}

// ---------------------------------------------------------------- train-mkn

struct MknOpts {
    std::string corpus, vocab, out, manifest;
    int order = 4;
    std::size_t max_len = 30;
    bool lowercase = false;
};

void cmd_train_mkn(const MknOpts& o) {
    Run run("train-mkn", {{"corpus", o.corpus}, {"vocab", o.vocab}, {"out", o.out}, {"order", o.order},
                          {"max_len", o.max_len}, {"lowercase", o.lowercase}});
    run.input(o.vocab);
    run.input(o.corpus);
    const auto vocab = Vocabulary::load(fs::path(o.vocab));
    const auto loaded = load_corpus(fs::path(o.corpus), vocab, length_limit(o.max_len), o.lowercase);
    std::vector<std::string> warnings;
    auto model = MknModel::train(loaded.corpus, vocab.size(), o.order, &warnings, vocab.bos_id());
    model.vocab_hash = vocab.hash();
    for (const auto& w : warnings) run.warn(w);
    model.save(o.out);
    run.output(o.out);
    run.report("order", o.order);
    run.report("sentences", loaded.corpus.size());
    run.report("tokens", loaded.corpus.token_count());
    run.report("dropped", loaded.dropped);
    for (int n = 1; n <= o.order; ++n) {
        const auto& d = model.discounts(n);
        run.report("discounts_" + std::to_string(n),
                   fmt_double(d.d1) + "," + fmt_double(d.d2) + "," + fmt_double(d.d3) + (d.fallback ? ",fallback" : ""));
    }
    run.report("train_ppx", mkn_perplexity(model, loaded.corpus));
    run.finish(manifest_for(o.manifest, o.out, "train-mkn"));
}

// ---------------------------------------------------------------- infer

struct InferOpts {
    std::string model, vocab, corpus, out, manifest, method = "det";
    int iters = -1, iters_pos = 100, iters_sent = 100;
    std::uint64_t seed = 1;
    std::size_t max_len = 0;
    bool lowercase = false;
};

InferenceResult infer_one(const LtlmModel& model, const Sentence& s, const std::string& method,
                          const GibbsInferenceConfig& g) {
    if (method == "det" || s.length() == 0) return infer_deterministic(model, s);
    return infer_nondeterministic(model, s, g);
}

GibbsInferenceConfig gibbs_config(int iters, int iters_pos, int iters_sent, std::uint64_t seed) {
    GibbsInferenceConfig g;
    g.iters_per_position = iters >= 0 ? iters : iters_pos;
    g.iters_per_sentence = iters >= 0 ? iters : iters_sent;
    g.seed = seed;
    return g;
}

void cmd_infer(const InferOpts& o) {
    Run run("infer", {{"model", o.model}, {"vocab", o.vocab}, {"corpus", o.corpus}, {"out", o.out},
                      {"method", o.method}, {"iters", o.iters}, {"iters_pos", o.iters_pos},
                      {"iters_sent", o.iters_sent}, {"max_len", o.max_len}, {"lowercase", o.lowercase}});
    run.seed(o.seed);
    run.input(o.model);
    run.input(o.vocab);
    run.input(o.corpus);
    const auto model = load_model(o.model);
    const auto vocab = Vocabulary::load(fs::path(o.vocab));
    check_hash(model.vocab_hash, vocab, "model");
    const auto loaded = load_corpus(fs::path(o.corpus), vocab, length_limit(o.max_len), o.lowercase);
    const auto g = gibbs_config(o.iters, o.iters_pos, o.iters_sent, o.seed);

    auto out = open_out(o.out);
    double total = 0.0;
    for (std::size_t s = 0; s < loaded.corpus.size(); ++s) {
        const auto& sent = loaded.corpus.sentences[s];
        const auto r = infer_one(model, sent, o.method, g);
        total += r.log_prob;
        out << "# sentence=" << s << " log_prob=" << fmt_exact(r.log_prob) << '\n';
        write_tree_tsv(out, sent, r.tree, vocab);
        std::cout << "sentence=" << s << " length=" << sent.length() << " log_prob=" << fmt_exact(r.log_prob)
                  << '\n';
    }
    run.output(o.out);
    run.report("method", o.method);
    run.report("sentences", loaded.corpus.size());
    run.report("tokens", loaded.corpus.token_count());
    run.report("dropped", loaded.dropped);
    run.report("total_log_prob", total);
    if (loaded.corpus.token_count() > 0)
        run.report("joint_ppx", std::exp(-total / static_cast<double>(loaded.corpus.token_count())));
    run.finish(manifest_for(o.manifest, o.out, "infer"));
}

// ---------------------------------------------------------------- ppx

struct PpxOpts {
    std::string model, mkn, vocab, corpus, trees, dump_probs, manifest, method = "det";
    int iters = -1, iters_pos = 100, iters_sent = 100;
    std::uint64_t seed = 1;
    std::size_t max_len = 0;
    bool lowercase = false;
};

void cmd_ppx(const PpxOpts& o) {
    Run run("ppx", {{"model", o.model}, {"mkn", o.mkn}, {"vocab", o.vocab}, {"corpus", o.corpus},
                    {"trees", o.trees}, {"dump_probs", o.dump_probs}, {"method", o.method}, {"iters", o.iters},
                    {"iters_pos", o.iters_pos}, {"iters_sent", o.iters_sent}, {"max_len", o.max_len},
                    {"lowercase", o.lowercase}});
    run.seed(o.seed);
    if (o.model.empty() == o.mkn.empty()) throw DataError("exactly one of --model and --mkn is required");
    run.input(o.vocab);
    run.input(o.corpus);
    const auto vocab = Vocabulary::load(fs::path(o.vocab));
    const auto loaded = load_corpus(fs::path(o.corpus), vocab, length_limit(o.max_len), o.lowercase);
    const auto& corpus = loaded.corpus;
    if (corpus.token_count() == 0) throw DataError("empty corpus");

    ProbStream stream;
    if (!o.mkn.empty()) {
        run.input(o.mkn);
        const auto model = MknModel::load(o.mkn);
        check_hash(model.vocab_hash, vocab, "n-gram model");
        stream.source = "mkn:" + o.mkn;
        for (const auto& s : corpus.sentences) stream.add_sentence(mkn_word_probabilities(model, s));
        run.report("model_type", "mkn");
        run.report("order", model.order());
    } else {
        run.input(o.model);
        const auto model = load_model(o.model);
        check_hash(model.vocab_hash, vocab, "model");
        stream.source = "ltlm:" + o.model;
        std::vector<ProjectiveTree> given;
        if (!o.trees.empty()) {
            run.input(o.trees);
            std::ifstream in(o.trees, std::ios::binary);
            if (!in) throw DataError("cannot read " + o.trees);
            auto records = read_tree_tsv(in);
            if (records.size() != corpus.size()) throw DataError("--trees and --corpus differ in sentence count");
            for (std::size_t s = 0; s < records.size(); ++s) {
                if (records[s].tree.n_nodes() != corpus.sentences[s].tokens.size())
                    throw DataError("tree " + std::to_string(s) + " does not match its sentence length");
                given.push_back(std::move(records[s].tree));
            }
        }
        const auto g = gibbs_config(o.iters, o.iters_pos, o.iters_sent, o.seed);
        double joint = 0.0;
        for (std::size_t s = 0; s < corpus.size(); ++s) {
            const auto& sent = corpus.sentences[s];
            ProjectiveTree tree = given.empty() ? infer_one(model, sent, o.method, g).tree : given[s];
            joint += model.log_joint(sent, tree);
            stream.add_sentence(word_probabilities(model, sent, tree));
        }
        run.report("model_type", "ltlm");
        run.report("trees", given.empty() ? o.method : std::string("given"));
        run.report("joint_ppx", std::exp(-joint / static_cast<double>(corpus.token_count())));
    }
    stream.validate();
    if (!o.dump_probs.empty()) {
        save_prob_stream(stream, o.dump_probs);
        run.output(o.dump_probs);
    }
    run.report("sentences", corpus.size());
    run.report("tokens", corpus.token_count());
    run.report("dropped", loaded.dropped);
    run.report("oov_rate", oov_rate(corpus, vocab));
    run.report("ppx", stream_perplexity(stream.probs));
    run.finish(manifest_for(o.manifest, o.dump_probs, "ppx"));
}

// ---------------------------------------------------------------- interp

struct InterpOpts {
    std::string a, b, dev_a, dev_b, manifest;
};

void cmd_interp(const InterpOpts& o) {
    Run run("interp", {{"a", o.a}, {"b", o.b}, {"dev_a", o.dev_a}, {"dev_b", o.dev_b}});
    if (o.dev_a.empty() != o.dev_b.empty()) throw DataError("--dev-a and --dev-b must be given together");
    for (const auto& p : {o.a, o.b, o.dev_a, o.dev_b})
        if (!p.empty()) run.input(p);
    const auto a = load_prob_stream(o.a);
    const auto b = load_prob_stream(o.b);
    const bool has_dev = !o.dev_a.empty();
    const auto da = has_dev ? load_prob_stream(o.dev_a) : a;
    const auto db = has_dev ? load_prob_stream(o.dev_b) : b;
    if (a.size() != b.size()) throw DataError("probability streams differ in length");

    const auto em = em_lambda(da.probs, db.probs);
    double lo = em.log_likelihood.front(), hi = lo;
    for (double v : em.log_likelihood) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    run.report("lambda", em.lambda);
    run.report("em_iterations", em.iterations);
    run.report("em_converged", em.converged);
    run.report("fitted_on", has_dev ? "dev" : "test");
    run.report("dev_ppx_a", stream_perplexity(da.probs));
    run.report("dev_ppx_b", stream_perplexity(db.probs));
    run.report("dev_ppx_mix", mixture_perplexity(em.lambda, da.probs, db.probs));
    run.report("ppx_a", stream_perplexity(a.probs));
    run.report("ppx_b", stream_perplexity(b.probs));
    run.report("ppx_mix", mixture_perplexity(em.lambda, a.probs, b.probs));
    if (hi - lo <= 1e-12) run.report("note", "flat_likelihood");
    run.finish(manifest_for(o.manifest, {}, "interp"));
}

// ---------------------------------------------------------------- subst

struct SubstOpts {
    std::string model, vocab, sentence, manifest, method = "det";
    std::size_t top = 10;
    int iters = -1, iters_pos = 100, iters_sent = 100;
    std::uint64_t seed = 1;
    bool lowercase = false;
};

void cmd_subst(const SubstOpts& o) {
    Run run("subst", {{"model", o.model}, {"vocab", o.vocab}, {"sentence", o.sentence}, {"top", o.top},
                      {"method", o.method}, {"lowercase", o.lowercase}});
    run.seed(o.seed);
    run.input(o.model);
    run.input(o.vocab);
    const auto model = load_model(o.model);
    const auto vocab = Vocabulary::load(fs::path(o.vocab));
    check_hash(model.vocab_hash, vocab, "model");
    const auto raw = split_whitespace(o.sentence);
    if (raw.empty()) throw DataError("empty sentence");
    const auto sent = encode_sentence(raw, vocab, o.lowercase);
    const auto r = infer_one(model, sent, o.method, gibbs_config(o.iters, o.iters_pos, o.iters_sent, o.seed));
    const auto table = top_substitutions(model, sent, r.tree, o.top);

    run.report("length", sent.length());
    run.report("log_prob", r.log_prob);
    // One column per position, the sentence word on top, substitutions below.
    std::ostringstream t;
    for (std::size_t i = 1; i <= sent.length(); ++i) t << (i > 1 ? "\t" : "") << raw[i - 1];
    t << '\n';
    for (std::size_t i = 1; i <= sent.length(); ++i)
        t << (i > 1 ? "\t" : "") << "role=" << r.tree.role[i] << ",head=" << r.tree.parent[i];
    t << '\n';
    std::size_t rows = 0;
    for (const auto& col : table) rows = std::max(rows, col.size());
    for (std::size_t rank = 0; rank < rows; ++rank) {
        for (std::size_t i = 0; i < table.size(); ++i) {
            if (i) t << '\t';
            if (rank < table[i].size()) t << vocab.word(table[i][rank].first);
        }
        t << '\n';
    }
    std::cout << '\n' << t.str() << '\n';
    run.finish(manifest_for(o.manifest, {}, "subst"));
}

// ---------------------------------------------------------------- export-dot

struct DotOpts {
    std::string trees, out, manifest;
    long sentence = -1;
};

void cmd_export_dot(const DotOpts& o) {
    Run run("export-dot", {{"trees", o.trees}, {"out", o.out}, {"sentence", o.sentence}});
    run.input(o.trees);
    std::ifstream in(o.trees, std::ios::binary);
    if (!in) throw DataError("cannot read " + o.trees);
    const auto records = read_tree_tsv(in);
    if (o.sentence >= static_cast<long>(records.size()))
        throw DataError("sentence index " + std::to_string(o.sentence) + " out of range");
    auto out = open_out(o.out);
    std::size_t written = 0;
    for (std::size_t s = 0; s < records.size(); ++s) {
        if (o.sentence >= 0 && static_cast<long>(s) != o.sentence) continue;
        write_tree_dot(out, records[s].words, records[s].tree, "s" + std::to_string(s));
        ++written;
    }
    run.output(o.out);
    run.report("graphs", written);
    run.finish(manifest_for(o.manifest, o.out, "export-dot"));
}

// ---------------------------------------------------------------- synth

struct SynthOpts {
    std::string out_corpus, out_trees, out_model, out_vocab, manifest;
    std::size_t sentences = 200, vocab_size = 50, min_len = 3, max_len = 8;
    int roles = 3;
    double word_conc = 0.1, role_conc = 0.5;
    std::uint64_t seed = 7;
};

void cmd_synth(const SynthOpts& o) {
    Run run("synth", {{"sentences", o.sentences}, {"vocab_size", o.vocab_size}, {"roles", o.roles},
                      {"min_len", o.min_len}, {"max_len", o.max_len}, {"word_conc", o.word_conc},
                      {"role_conc", o.role_conc}, {"out_corpus", o.out_corpus}, {"out_trees", o.out_trees},
                      {"out_model", o.out_model}, {"out_vocab", o.out_vocab}});
    run.seed(o.seed);
    if (o.min_len < 1 || o.max_len < o.min_len) throw DataError("need 1 <= min-len <= max-len");
    SyntheticConfig cfg;
    cfg.num_roles = o.roles;
    cfg.vocab_size = o.vocab_size;
    cfg.min_len = o.min_len;
    cfg.max_len = o.max_len;
    cfg.word_concentration = o.word_conc;
    cfg.role_concentration = o.role_conc;
    cfg.seed = o.seed;
    Rng rng(o.seed);
    auto model = random_model(cfg, rng);
    const auto vocab = synthetic_vocabulary(o.vocab_size);
    model.vocab_hash = vocab.hash();
    const auto data = sample_corpus(model, o.sentences, o.min_len, o.max_len, rng);
    {
        auto out = open_out(o.out_corpus);
        write_corpus_text(out, data.corpus, vocab);
    }
    run.output(o.out_corpus);
    if (!o.out_trees.empty()) {
        write_trees(o.out_trees, data.corpus, data.trees, vocab);
        run.output(o.out_trees);
    }
    if (!o.out_model.empty()) {
        save_model(model, o.out_model);
        run.output(o.out_model);
    }
    if (!o.out_vocab.empty()) {
        vocab.save(fs::path(o.out_vocab));
        run.output(o.out_vocab);
    }
    run.report("sentences", data.corpus.size());
    run.report("tokens", data.corpus.token_count());
    run.report("generator_joint_ppx", joint_perplexity(model, data.corpus, data.trees));
    run.finish(manifest_for(o.manifest, o.out_corpus, "synth"));
}

void print_error(const char* kind, const std::string& message) {
    std::cerr << "error kind=" << kind << " message=" << json(message).dump() << '\n';
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Latent tree language model toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    const auto method_check = CLI::IsMember({"det", "gibbs"});

    VocabOpts vo;
    auto* vocab = app.add_subcommand("vocab", "Build a vocabulary file from a text corpus");
    vocab->add_option("--in", vo.in, "Corpus, one sentence per line")->required();
    vocab->add_option("--out", vo.out, "Vocabulary file to write")->required();
    vocab->add_option("--max-size", vo.max_size, "Number of words kept besides <s> and <unk>")
        ->check(CLI::Range(std::size_t{2}, std::numeric_limits<std::size_t>::max()))
        ->capture_default_str();
    vocab->add_flag("--lowercase", vo.lowercase, "ASCII case folding");
    vocab->add_option("--manifest", vo.manifest, "Manifest path (default: <out>.manifest.json)");

    TrainOpts to;
    auto* trn = app.add_subcommand("train", "Train a latent tree model by Gibbs sampling");
    trn->add_option("--corpus", to.corpus, "Training corpus (ltlm mode)");
    trn->add_option("--vocab", to.vocab, "Vocabulary file")->required();
    trn->add_option("--out-dir", to.out_dir, "Directory for model.ltlm, trees.tsv, config.json, manifest.json")
        ->required();
    trn->add_option("--roles,-K", to.roles, "Number of roles")->check(CLI::Range(2, 1000000))->capture_default_str();
    trn->add_option("--iters-pos", to.iters_pos, "Per-position iterations")->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    trn->add_option("--iters-sent", to.iters_sent, "Per-sentence iterations")->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    trn->add_option("--seed", to.seed, "Random seed")->capture_default_str();
    trn->add_option("--mode", to.mode, "ltlm or stlm (trees fixed)")->check(CLI::IsMember({"ltlm", "stlm"}))
        ->capture_default_str();
    trn->add_option("--trees", to.trees, "Tree TSV with fixed trees (stlm mode)");
    trn->add_option("--hyper-every", to.hyper_every, "Hyperparameter re-estimation cadence, 0 disables")
        ->check(CLI::NonNegativeNumber)->capture_default_str();
    trn->add_option("--checkpoint-every", to.checkpoint_every, "Checkpoint cadence in iterations, 0 disables")
        ->check(CLI::NonNegativeNumber)->capture_default_str();
    trn->add_option("--log-every", to.log_every, "Print joint perplexity every n iterations, 0 disables")
        ->check(CLI::NonNegativeNumber)->capture_default_str();
    trn->add_option("--max-len", to.max_len, "Drop longer sentences")
        ->check(CLI::Range(std::size_t{1}, std::numeric_limits<std::size_t>::max()))->capture_default_str();
    trn->add_option("--init", to.init, "Initial trees: chain or random")->check(CLI::IsMember({"chain", "random"}))
        ->capture_default_str();
    trn->add_flag("--lowercase", to.lowercase, "ASCII case folding");
    trn->add_option("--manifest", to.manifest, "Manifest path (default: <out-dir>/manifest.json)");

    MknOpts mo;
    auto* mkn = app.add_subcommand("train-mkn", "Train an interpolated modified Kneser-Ney n-gram model");
    mkn->add_option("--corpus", mo.corpus, "Training corpus")->required();
    mkn->add_option("--vocab", mo.vocab, "Vocabulary file")->required();
    mkn->add_option("--out", mo.out, "Model file to write")->required();
    mkn->add_option("--order", mo.order, "n-gram order")->check(CLI::Range(1, kMaxNgramOrder))->capture_default_str();
    mkn->add_option("--max-len", mo.max_len, "Drop longer sentences, 0 keeps all")->capture_default_str();
    mkn->add_flag("--lowercase", mo.lowercase, "ASCII case folding");
    mkn->add_option("--manifest", mo.manifest, "Manifest path (default: <out>.manifest.json)");

    InferOpts io;
    auto* inf = app.add_subcommand("infer", "Find trees for a corpus under a trained model");
    inf->add_option("--model", io.model, "Model file")->required();
    inf->add_option("--vocab", io.vocab, "Vocabulary file")->required();
    inf->add_option("--corpus", io.corpus, "Corpus, one sentence per line")->required();
    inf->add_option("--out", io.out, "Tree TSV to write")->required();
    inf->add_option("--method", io.method, "det (dynamic programming) or gibbs")->check(method_check)
        ->capture_default_str();
    inf->add_option("--iters", io.iters, "Gibbs iterations for both phases");
    inf->add_option("--iters-pos", io.iters_pos, "Gibbs per-position iterations")->capture_default_str();
    inf->add_option("--iters-sent", io.iters_sent, "Gibbs per-sentence iterations")->capture_default_str();
    inf->add_option("--seed", io.seed, "Random seed")->capture_default_str();
    inf->add_option("--max-len", io.max_len, "Drop longer sentences, 0 keeps all")->capture_default_str();
    inf->add_flag("--lowercase", io.lowercase, "ASCII case folding");
    inf->add_option("--manifest", io.manifest, "Manifest path (default: <out>.manifest.json)");

    PpxOpts po;
    auto* ppx = app.add_subcommand("ppx", "Per-word perplexity of a latent tree or n-gram model");
    ppx->add_option("--model", po.model, "Latent tree model file");
    ppx->add_option("--mkn", po.mkn, "n-gram model file");
    ppx->add_option("--vocab", po.vocab, "Vocabulary file")->required();
    ppx->add_option("--corpus", po.corpus, "Evaluation corpus")->required();
    ppx->add_option("--trees", po.trees, "Use these trees instead of inferring them");
    ppx->add_option("--dump-probs", po.dump_probs, "Write the per-word probability stream");
    ppx->add_option("--method", po.method, "Tree inference: det or gibbs")->check(method_check)->capture_default_str();
    ppx->add_option("--iters", po.iters, "Gibbs iterations for both phases");
    ppx->add_option("--iters-pos", po.iters_pos, "Gibbs per-position iterations")->capture_default_str();
    ppx->add_option("--iters-sent", po.iters_sent, "Gibbs per-sentence iterations")->capture_default_str();
    ppx->add_option("--seed", po.seed, "Random seed")->capture_default_str();
    ppx->add_option("--max-len", po.max_len, "Drop longer sentences, 0 keeps all")->capture_default_str();
    ppx->add_flag("--lowercase", po.lowercase, "ASCII case folding");
    ppx->add_option("--manifest", po.manifest, "Manifest path (default: <dump-probs>.manifest.json)");

    InterpOpts ipo;
    auto* itp = app.add_subcommand("interp", "Interpolate two probability streams with an EM-fitted weight");
    itp->add_option("--a", ipo.a, "Test stream of model A")->required();
    itp->add_option("--b", ipo.b, "Test stream of model B")->required();
    itp->add_option("--dev-a", ipo.dev_a, "Development stream of model A");
    itp->add_option("--dev-b", ipo.dev_b, "Development stream of model B");
    itp->add_option("--manifest", ipo.manifest, "Manifest path");

    SubstOpts so;
    auto* sub = app.add_subcommand("subst", "Most probable substitutions at every position of a sentence");
    sub->add_option("--model", so.model, "Model file")->required();
    sub->add_option("--vocab", so.vocab, "Vocabulary file")->required();
    sub->add_option("--sentence", so.sentence, "Sentence text")->required();
    sub->add_option("--top", so.top, "Substitutions per position")->capture_default_str();
    sub->add_option("--method", so.method, "Tree inference: det or gibbs")->check(method_check)->capture_default_str();
    sub->add_option("--iters", so.iters, "Gibbs iterations for both phases");
    sub->add_option("--seed", so.seed, "Random seed")->capture_default_str();
    sub->add_flag("--lowercase", so.lowercase, "ASCII case folding");
    sub->add_option("--manifest", so.manifest, "Manifest path");

    DotOpts dopt;
    auto* dot = app.add_subcommand("export-dot", "Render trees from a TSV file as Graphviz");
    dot->add_option("--trees", dopt.trees, "Tree TSV")->required();
    dot->add_option("--out", dopt.out, "DOT file to write")->required();
    dot->add_option("--sentence", dopt.sentence, "Only this sentence index");
    dot->add_option("--manifest", dopt.manifest, "Manifest path (default: <out>.manifest.json)");

    SynthOpts syo;
    auto* syn = app.add_subcommand("synth", "Sample a corpus from a random latent tree model");
    syn->add_option("--out-corpus", syo.out_corpus, "Corpus text to write")->required();
    syn->add_option("--out-trees", syo.out_trees, "Generating trees (TSV)");
    syn->add_option("--out-model", syo.out_model, "Generating model");
    syn->add_option("--out-vocab", syo.out_vocab, "Vocabulary of the generator");
    syn->add_option("--sentences", syo.sentences, "Number of sentences")->capture_default_str();
    syn->add_option("--vocab-size", syo.vocab_size, "Vocabulary size including <s> and <unk>")
        ->check(CLI::Range(std::size_t{3}, std::numeric_limits<std::size_t>::max()))->capture_default_str();
    syn->add_option("--roles", syo.roles, "Number of roles")->check(CLI::Range(1, 1000))->capture_default_str();
    syn->add_option("--min-len", syo.min_len, "Shortest sentence")->capture_default_str();
    syn->add_option("--max-len", syo.max_len, "Longest sentence")->capture_default_str();
    syn->add_option("--word-conc", syo.word_conc, "Dirichlet concentration of word rows")
        ->check(CLI::PositiveNumber)->capture_default_str();
    syn->add_option("--role-conc", syo.role_conc, "Dirichlet concentration of role rows")
        ->check(CLI::PositiveNumber)->capture_default_str();
    syn->add_option("--seed", syo.seed, "Random seed")->capture_default_str();
    syn->add_option("--manifest", syo.manifest, "Manifest path (default: <out-corpus>.manifest.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        print_error("usage", e.what());
        return kExitUsage;
    }

    try {
        if (*vocab) cmd_vocab(vo);
        else if (*trn) cmd_train(to);
        else if (*mkn) cmd_train_mkn(mo);
        else if (*inf) cmd_infer(io);
        else if (*ppx) cmd_ppx(po);
        else if (*itp) cmd_interp(ipo);
        else if (*sub) cmd_subst(so);
        else if (*dot) cmd_export_dot(dopt);
        else if (*syn) cmd_synth(syo);
    } catch (const DataError& e) {
        print_error("data", e.what());
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        print_error("data", e.what());
        return kExitData;
    } catch (const InvariantError& e) {
        print_error("invariant", e.what());
        return kExitInvariant;
    } catch (const std::exception& e) {
        print_error("invariant", e.what());
        return kExitInvariant;
    }
    std::cout.flush();
    return kExitOk;
}

}  // namespace ltlm::cli

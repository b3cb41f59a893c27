// wordspot: command-line front end for the word-image retrieval engine.

#include "wordspot/corpus.hpp"
#include "wordspot/errors.hpp"
#include "wordspot/eval.hpp"
#include "wordspot/feedback.hpp"
#include "wordspot/image.hpp"
#include "wordspot/retrieval.hpp"
#include "wordspot/service.hpp"
#include "wordspot/synthetic.hpp"

#include "CLI11.hpp"

#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace wordspot;

namespace {

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text))
        throw std::runtime_error("cannot write " + path.string());
}

std::vector<std::string> read_labels(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read " + path.string());
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (!line.empty())
            words.push_back(line);
    }
    return words;
}

std::vector<fs::path> sorted_files(const fs::path& dir)
{
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(dir))
        if (f.is_regular_file())
            files.push_back(f.path());
    std::sort(files.begin(), files.end());
    return files;
}

struct RocchioFlags
{
    std::string strategy = "positive";
    double alpha = 1.0;
    double beta = 0.82;
    double gamma = 0.25;
    bool allow_gamma = false;

    void add_to(CLI::App* app)
    {
        app->add_option("--strategy", strategy, "positive | negative | combined")->capture_default_str();
        app->add_option("--alpha", alpha, "weight of the original query")->capture_default_str();
        app->add_option("--beta", beta, "weight of the relevant centroid")->capture_default_str();
        app->add_option("--gamma", gamma, "weight of the non-relevant centroid")->capture_default_str();
        app->add_flag("--allow-gamma-above-beta", allow_gamma, "accept gamma >= beta");
    }

    RocchioParams params() const
    {
        RocchioParams p;
        p.strategy = strategy_from_string(strategy);
        p.alpha = alpha;
        p.beta = beta;
        p.gamma = gamma;
        p.enforce_gamma_below_beta = !allow_gamma;
        p.validate();
        return p;
    }
};

void print_ranking(const RankedList& ranking, const CorpusIndex& index, std::size_t top)
{
    std::cout << std::left << std::setw(6) << "rank" << std::setw(10) << "word_id" << std::setw(8) << "doc_id"
              << std::right << std::setw(14) << "distance" << std::setw(10) << "rate"
              << "  label\n";
    std::cout << std::fixed;
    for (std::size_t i = 0; i < std::min(top, ranking.results.size()); ++i) {
        const auto& r = ranking.results[i];
        const auto* e = index.find(r.word_id);
        std::cout << std::left << std::setw(6) << i + 1 << std::setw(10) << r.word_id << std::setw(8)
                  << (e ? e->doc_id : 0) << std::right << std::setprecision(6) << std::setw(14) << r.distance
                  << std::setprecision(2) << std::setw(10) << r.rate << "  " << (e && e->label ? *e->label : "-")
                  << '\n';
    }
}

std::vector<Judgment> parse_ids(const std::vector<std::uint64_t>& ids, bool relevant)
{
    std::vector<Judgment> out;
    for (auto id : ids)
        out.push_back({id, relevant});
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"wordspot: OCR-free word image retrieval with relevance feedback"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "log progress to stderr");

    // gen-corpus
    auto* gen = app.add_subcommand("gen-corpus", "render a synthetic page corpus from a text file");
    std::string gen_text, gen_out;
    int gen_docs = 100;
    std::uint64_t gen_seed = 42;
    SyntheticOptions gen_options;
    gen->add_option("--text", gen_text, "source text file")->required();
    gen->add_option("--docs", gen_docs, "number of pages")->capture_default_str();
    gen->add_option("--seed", gen_seed, "random seed")->capture_default_str();
    gen->add_option("--words-per-page", gen_options.words_per_page)->capture_default_str();
    gen->add_option("--noise", gen_options.edge_noise, "edge ink-bleed probability")->capture_default_str();
    gen->add_option("--out", gen_out, "output directory (pages/ and labels/)")->required();

    // ingest
    auto* ingest = app.add_subcommand("ingest", "segment pages and build an index file");
    std::string ingest_pages, ingest_labels, ingest_out;
    double ingest_threshold = kDefaultBinarizeThreshold;
    ingest->add_option("--pages", ingest_pages, "directory of .pbm/.pgm pages (sorted by name = doc_id)")->required();
    ingest->add_option("--labels", ingest_labels, "directory of <page stem>.txt, one word per line");
    ingest->add_option("--threshold", ingest_threshold, "grayscale ink threshold, fraction of maxval")
        ->capture_default_str();
    ingest->add_option("--out", ingest_out, "index file to write")->required();

    // pca-fit
    auto* pca = app.add_subcommand("pca-fit", "fit a PCA subspace and store it in the index");
    std::string pca_index, pca_out;
    PcaOptions pca_options;
    std::optional<std::size_t> pca_fixed;
    bool pca_no_whiten = false;
    pca->add_option("--index", pca_index, "index file")->required();
    pca->add_option("--variance", pca_options.variance_target, "retained variance target")->capture_default_str();
    pca->add_option("--fixed-m", pca_fixed, "keep exactly this many components");
    pca->add_flag("--no-whiten", pca_no_whiten, "rank with L1 on unscaled projections");
    pca->add_option("--out", pca_out, "output index file (default: overwrite --index)");

    // search
    auto* search = app.add_subcommand("search", "rank the index against a query word");
    std::string search_index, search_image, search_session;
    std::optional<std::uint64_t> search_word;
    bool search_subspace = false;
    std::size_t search_top = 10;
    double search_threshold = kDefaultBinarizeThreshold;
    RocchioFlags search_rocchio;
    search->add_option("--index", search_index, "index file")->required();
    auto* image_opt = search->add_option("--query-image", search_image, "word image (.pbm/.pgm)");
    auto* word_opt = search->add_option("--word-id", search_word, "use an indexed word as the query");
    image_opt->excludes(word_opt);
    search->add_flag("--subspace", search_subspace, "rank in the index's PCA subspace");
    search->add_option("--top", search_top, "results to print and to offer for judgment")->capture_default_str();
    search->add_option("--threshold", search_threshold, "grayscale ink threshold")->capture_default_str();
    search->add_option("--session-out", search_session, "write a feedback session file");
    search_rocchio.add_to(search);

    // feedback
    auto* fb = app.add_subcommand("feedback", "apply one round of relevance judgments to a session");
    std::string fb_session, fb_index, fb_out;
    std::vector<std::uint64_t> fb_relevant, fb_nonrelevant;
    std::optional<std::string> fb_strategy;
    std::optional<double> fb_alpha, fb_beta, fb_gamma;
    std::size_t fb_refit = 0;
    fb->add_option("--session", fb_session, "session file from search or a previous round")->required();
    fb->add_option("--relevant", fb_relevant, "word ids judged relevant")->delimiter(',');
    fb->add_option("--nonrelevant", fb_nonrelevant, "word ids judged non-relevant")->delimiter(',');
    fb->add_option("--strategy", fb_strategy, "override: positive | negative | combined");
    fb->add_option("--alpha", fb_alpha, "override alpha");
    fb->add_option("--beta", fb_beta, "override beta");
    fb->add_option("--gamma", fb_gamma, "override gamma");
    fb->add_option("--index", fb_index, "index file (default: the one recorded in the session)");
    fb->add_option("--refit-on-positives", fb_refit,
                   "experimental: in subspace sessions, refit PCA on the positives once this many are judged");
    fb->add_option("--session-out", fb_out, "where to write the updated session (default: overwrite)");

    // eval
    auto* ev = app.add_subcommand("eval", "run the batch search protocol and compare strategies");
    std::string ev_index, ev_out, ev_strategies = "all";
    EvalConfig ev_config;
    RocchioFlags ev_rocchio;
    double ev_variance = 0.95;
    bool ev_timings = false;
    ev->add_option("--index", ev_index, "labeled index file")->required();
    ev->add_option("--strategies", ev_strategies,
                   "all, or a comma list of baseline,positive,negative,combined (pca- prefix for subspace)")
        ->capture_default_str();
    ev->add_option("--seed", ev_config.seed, "query sampling seed")->capture_default_str();
    ev->add_option("--queries", ev_config.n_queries, "number of query words")->capture_default_str();
    ev->add_option("--shown", ev_config.shown_per_round, "results judged per round")->capture_default_str();
    ev->add_option("--rounds", ev_config.rounds, "feedback rounds")->capture_default_str();
    ev->add_option("--rate-threshold", ev_config.rate_threshold, "retrieved = rate >= this")->capture_default_str();
    ev->add_option("--min-length", ev_config.min_word_length, "shortest eligible query word")->capture_default_str();
    ev->add_option("--variance", ev_variance, "PCA variance target when the index has no model")
        ->capture_default_str();
    ev->add_flag("--timings", ev_timings, "include wall-clock ranking times in the report");
    ev->add_option("--out", ev_out, "JSON report path");
    ev_rocchio.add_to(ev);

    // serve
    auto* serve = app.add_subcommand("serve", "run the HTTP API");
    std::string serve_index, serve_pages, serve_bind;
    long serve_timeout = 1800;
    serve->add_option("--index", serve_index, "index file to load at startup");
    serve->add_option("--pages", serve_pages, "page directory for thumbnails");
    serve->add_option("--session-timeout", serve_timeout, "idle seconds before a session expires")
        ->capture_default_str();
    serve->add_option("--bind", serve_bind,
                      std::string("host:port (default: $") + kBindEnvVar + " or " + kDefaultBind + ")");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

    try {
        if (*gen) {
            const auto corpus = generate_synthetic_corpus(read_file(gen_text), gen_docs, gen_seed, gen_options);
            const fs::path out(gen_out);
            fs::create_directories(out / "pages");
            fs::create_directories(out / "labels");
            std::size_t words = 0;
            for (std::size_t d = 0; d < corpus.pages.size(); ++d) {
                char stem[32];
                std::snprintf(stem, sizeof stem, "page_%04zu", d);
                write_pbm(out / "pages" / (std::string(stem) + ".pbm"), corpus.pages[d]);
                std::string text;
                for (const auto& w : corpus.labels[d])
                    text += w + '\n';
                write_file(out / "labels" / (std::string(stem) + ".txt"), text);
                words += corpus.labels[d].size();
            }
            std::cout << "wrote " << corpus.pages.size() << " pages, " << words << " words to " << gen_out << '\n';
        } else if (*ingest) {
            std::vector<WordEntry> entries;
            const auto pages = sorted_files(ingest_pages);
            for (std::size_t d = 0; d < pages.size(); ++d) {
                std::optional<std::vector<std::string>> labels;
                if (!ingest_labels.empty())
                    labels = read_labels(fs::path(ingest_labels) / (pages[d].stem().string() + ".txt"));
                auto doc = ingest_document(read_netpbm(pages[d], ingest_threshold), d, labels, entries.size());
                spdlog::info("{}: {} words", pages[d].filename().string(), doc.size());
                entries.insert(entries.end(), std::make_move_iterator(doc.begin()), std::make_move_iterator(doc.end()));
            }
            const CorpusIndex index(std::move(entries));
            save_index(index, ingest_out);
            std::cout << "indexed " << index.size() << " words from " << pages.size() << " pages into "
                      << ingest_out << '\n';
        } else if (*pca) {
            pca_options.fixed_dimension = pca_fixed;
            pca_options.whiten = !pca_no_whiten;
            const auto index = fit_index_pca(load_index(pca_index), pca_options);
            const auto& model = *index.pca();
            save_index(index, pca_out.empty() ? pca_index : pca_out);
            const double total = model.eigenvalues.sum();
            std::cout << "eigenvalue spectrum (component, lambda, cumulative fraction):\n";
            double cum = 0;
            for (Eigen::Index i = 0; i < model.eigenvalues.size(); ++i) {
                cum += model.eigenvalues[i];
                std::cout << "  " << std::setw(3) << i + 1 << "  " << std::scientific << std::setprecision(6)
                          << model.eigenvalues[i] << "  " << std::fixed << std::setprecision(6) << cum / total
                          << '\n';
            }
            std::cout << "retained m = " << model.dimension() << " of " << model.source_dimension() << '\n'
                      << "retained variance ratio = " << retained_variance(model) << '\n'
                      << "reconstruction error J_e = " << std::scientific << reconstruction_error(model) << '\n'
                      << "whitened = " << (model.whitened ? "yes" : "no") << '\n';
        } else if (*search) {
            const auto index = load_index(search_index);
            Descriptor descriptor{};
            if (!search_image.empty()) {
                descriptor = describe_word_image(read_netpbm(search_image, search_threshold));
            } else if (search_word) {
                const auto* e = index.find(*search_word);
                if (!e)
                    throw JudgmentError("word " + std::to_string(*search_word) + " is not in the index");
                descriptor = e->descriptor;
            } else {
                throw ParameterError("give --query-image or --word-id");
            }
            const auto space = search_subspace ? Space::Subspace : Space::Original;
            auto session = FeedbackSession::start("cli", make_query(descriptor, space, index), index,
                                                  search_rocchio.params(), search_top);
            session.source_descriptor = descriptor;
            print_ranking(session.initial_ranking(), index, search_top);
            if (!search_session.empty())
                write_file(search_session, session_to_json(session, fs::absolute(search_index).string()));
        } else if (*fb) {
            auto [session, recorded_index] = session_from_json(read_file(fb_session));
            const auto index = load_index(fb_index.empty() ? recorded_index : fb_index);
            auto params = session.params();
            if (fb_strategy)
                params.strategy = strategy_from_string(*fb_strategy);
            params.alpha = fb_alpha.value_or(params.alpha);
            params.beta = fb_beta.value_or(params.beta);
            params.gamma = fb_gamma.value_or(params.gamma);
            session.set_params(params);
            session.refit_on_positives = fb_refit;
            auto judgments = parse_ids(fb_relevant, true);
            const auto negatives = parse_ids(fb_nonrelevant, false);
            judgments.insert(judgments.end(), negatives.begin(), negatives.end());
            const auto ranking = run_feedback_round(session, judgments, index);
            std::cout << "round " << session.round_index() << " (" << to_string(params.strategy) << ")\n";
            print_ranking(ranking, index, session.shown_per_round());
            write_file(fb_out.empty() ? fb_session : fb_out,
                       session_to_json(session, fb_index.empty() ? recorded_index : fs::absolute(fb_index).string()));
        } else if (*ev) {
            const auto index = load_index(ev_index);
            ev_config.params = ev_rocchio.params();
            std::vector<std::string> methods;
            if (ev_strategies == "all") {
                methods = kDefaultMethods;
            } else {
                std::stringstream ss(ev_strategies);
                for (std::string m; std::getline(ss, m, ',');)
                    if (!m.empty())
                        methods.push_back(m);
            }
            PcaOptions options;
            options.variance_target = ev_variance;
            const auto comparison = run_methods(index, ev_config, methods, options);
            std::cout << comparison_table(comparison);
            if (!ev_out.empty())
                write_file(ev_out, comparison_to_json(comparison, ev_timings) + "\n");
        } else if (*serve) {
            std::string bind = serve_bind;
            if (bind.empty()) {
                const char* env = std::getenv(kBindEnvVar);
                bind = env && *env ? env : kDefaultBind;
            }
            const auto [host, port] = parse_bind_address(bind);
            ServiceOptions options;
            options.session_timeout = std::chrono::seconds(serve_timeout);
            Service service(options);
            if (!serve_index.empty()) {
                std::optional<fs::path> pages;
                if (!serve_pages.empty())
                    pages = serve_pages;
                service.set_index(load_index(serve_index), serve_index, pages);
            }
            std::cout << "listening on " << host << ':' << port << std::endl;
            if (!service.listen(host, port)) {
                std::cerr << "error: cannot bind " << bind << '\n';
                return 1;
            }
        }
    } catch (const Error& e) {
        std::cerr << "error [" << e.code() << "]: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

// cityalert: command-line front end for training, evaluation, one-off
// classification, stream replay and the HTTP service.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cityalert/config.hpp>
#include <cityalert/evaluate.hpp>
#include <cityalert/models.hpp>
#include <cityalert/pipeline.hpp>
#include <cityalert/server.hpp>
#include <cityalert/synthetic.hpp>

using namespace cityalert;

namespace {

struct Lexicons {
    Dictionary dict;
    NormalizationMap norm;
};

Lexicons load_lexicons(const AppConfig& cfg) {
    return {Dictionary::load(cfg.dictionary), NormalizationMap::load(cfg.normalization)};
}

Dataset load_or_generate(const std::string& data_path, const std::vector<std::string>& categories) {
    if (!data_path.empty()) return load_dataset(data_path, categories);
    spdlog::info("no --data given; using the default synthetic corpus");
    return generate_synthetic_corpus(SyntheticSpec{});
}

StageConfig stage_config(const std::string& family, int order) {
    StageConfig c = order == 1 ? default_stage1_config() : default_stage2_config();
    c.family = parse_family(family);
    return c;
}

void write_wordcloud(const std::string& path, const std::vector<LabeledExample>& examples, std::size_t top_k) {
    std::vector<std::vector<std::string>> docs;
    std::vector<std::string> labels;
    for (const auto& ex : examples) {
        docs.push_back(ex.tokens);
        labels.push_back(ex.stage1_label);
    }
    FeatureOptions opts = default_stage1_config().features;
    auto ranking = information_gain(docs, labels, fit_vocabulary(docs, opts), opts);
    // Punctuation tokens can carry information but make a useless cloud.
    std::erase_if(ranking, [](const auto& r) {
        return std::none_of(r.feature.begin(), r.feature.end(), [](char c) { return text::is_ascii_alnum(c); });
    });
    nlohmann::json out{{"stage", "stage1"}, {"terms", export_wordcloud(ranking, top_k)}};
    if (auto dir = std::filesystem::path(path).parent_path(); !dir.empty()) std::filesystem::create_directories(dir);
    std::ofstream(path) << out.dump(2) << "\n";
    spdlog::info("wrote word cloud ({} terms) to {}", out["terms"].size(), path);
}

int cmd_synth(const std::string& out, const SyntheticSpec& spec) {
    save_dataset(out, generate_synthetic_corpus(spec));
    std::cout << "wrote " << spec.positives + spec.negatives << " posts to " << out << "\n";
    return 0;
}

int cmd_train(const AppConfig& cfg, const std::string& data, const std::string& out_dir, const std::string& fam1,
              const std::string& fam2, const std::string& wordcloud, std::size_t top_k) {
    auto lex = load_lexicons(cfg);
    auto examples = sanitize_dataset(load_or_generate(data, cfg.categories), lex.dict, lex.norm);
    auto models = train_models(examples, cfg.categories, stage_config(fam1, 1), stage_config(fam2, 3));
    const std::string dir = out_dir.empty() ? cfg.models_dir : out_dir;
    save_models(dir, models);
    std::cout << "trained on " << examples.size() << " posts; stage 1 (" << fam1 << ", "
              << models.stage1.vocab.size() << " unigrams), stage 2 (" << fam2 << ", " << models.stage2.vocab.size()
              << " trigrams) saved to " << dir << "\n";
    if (!wordcloud.empty()) write_wordcloud(wordcloud, examples, top_k);
    return 0;
}

int cmd_eval(const AppConfig& cfg, const std::string& data, std::size_t folds, std::uint64_t seed, bool json,
             const std::string& wordcloud, std::size_t top_k) {
    auto lex = load_lexicons(cfg);
    auto examples = sanitize_dataset(load_or_generate(data, cfg.categories), lex.dict, lex.norm);
    nlohmann::json report = nlohmann::json::object();
    struct Row {
        std::string stage, family;
        double f1;
    };
    std::vector<Row> rows;
    for (const char* fam : {"svm", "nb"}) {
        auto r = cross_validate_stage1(examples, stage_config(fam, 1), folds, seed);
        report["stage1"][fam] = r;
        rows.push_back({"stage 1", fam, r.f1});
    }
    for (const char* fam : {"nb", "svm"}) {
        auto r = cross_validate_stage2(examples, cfg.categories, stage_config(fam, 3), folds, seed);
        report["stage2"][fam] = r;
        rows.push_back({"stage 2", fam, r.f1});
    }
    if (json) {
        std::cout << report.dump(2) << "\n";
    } else {
        std::cout << examples.size() << " posts, " << folds << "-fold stratified cross validation (seed " << seed
                  << ")\n";
        std::printf("%-8s %-4s %8s\n", "stage", "clf", "F1");
        for (const auto& r : rows) std::printf("%-8s %-4s %8.4f\n", r.stage.c_str(), r.family.c_str(), r.f1);
    }
    if (!wordcloud.empty()) write_wordcloud(wordcloud, examples, top_k);
    return 0;
}

int cmd_classify(const AppConfig& cfg, const std::string& text_in) {
    auto ctx = load_context(cfg);
    RawPost post{"cli", text_in, std::nullopt, now_seconds(), ""};
    nlohmann::json out{{"text", text_in}, {"keyword_filter", keyword_filter(post, ctx->filters)}};
    try {
        auto s = sanitize(post, ctx->dict, ctx->norm);
        out["sanitized"] = s.text();
        auto p1 = ctx->stage1.predict(s.tokens);
        out["stage1"] = {{"label", p1.label()}, {"score", p1.scores[p1.best]}};
        if (p1.label() == ctx->positive_label) {
            auto p2 = ctx->stage2.predict(s.tokens);
            out["category"] = p2.label();
            auto posterior = normalized_posterior(p2.scores);
            for (std::size_t i = 0; i < p2.classes.size(); ++i) out["stage2"][p2.classes[i]] = p2.scores[i];
            out["stage2_normalized"] = nlohmann::json::object();
            for (std::size_t i = 0; i < p2.classes.size(); ++i) out["stage2_normalized"][p2.classes[i]] = posterior[i];
            if (auto geo = resolve_location(post, s, ctx->gazetteer)) out["geo"] = *geo;
        }
    } catch (const EmptyAfterCleaning&) {
        out["sanitized"] = nullptr;
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_replay(const AppConfig& cfg, const std::string& file, double rate, const std::string& out_path, bool post_clock,
               bool store) {
    auto ctx = load_context(cfg);
    JsonlFileSource source(file, rate);
    std::ofstream out_file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        out_file.open(out_path);
        if (!out_file) throw Error("cannot write " + out_path);
        out = &out_file;
    }
    std::unique_ptr<IncidentStore> incidents;
    if (store) incidents = std::make_unique<IncidentStore>(cfg.incidents_log(), cfg.max_log_bytes);
    StreamOptions opts;
    opts.queue_capacity = cfg.queue_capacity;
    // With the post clock, detected_at is the post time, making output reproducible.
    if (post_clock) opts.clock = [] { return Timestamp{}; };
    auto summary = run_stream(source, ctx,
                              [&](const Incident& inc) {
                                  *out << nlohmann::json(inc).dump() << "\n";
                                  if (incidents) incidents->append(inc);
                              },
                              opts);
    std::cerr << nlohmann::json(summary).dump() << "\n";
    return summary.conserved() ? 0 : 1;
}

std::atomic<HttpApi*> g_api{nullptr};

void on_signal(int) {
    if (auto* api = g_api.load()) api->server().stop();
}

int cmd_serve(const AppConfig& cfg) {
    auto ctx = load_context(cfg);
    Service service(cfg, ctx);
    HttpApi api(service);
    int port = api.start(cfg.host, cfg.port);
    spdlog::info("listening on {}:{} ({} incidents recovered, data in {})", cfg.host, port, service.store().size(),
                 cfg.data_dir);
    g_api = &api;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    api.wait();
    g_api = nullptr;
    spdlog::info("shutting down");
    api.stop();
    service.stop();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cityalert: urban emergency detection from short geo-tagged posts"};
    app.require_subcommand(1);
    std::string config_path = "data/config.json";
    bool verbose = false;
    app.add_option("-c,--config", config_path, "service configuration file")->capture_default_str();
    app.add_flag("-v,--verbose", verbose, "debug logging (includes per-post drop reasons)");

    SyntheticSpec spec;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "write a synthetic labeled corpus (TSV)");
    synth->add_option("--out", synth_out, "output TSV")->required();
    synth->add_option("--positives", spec.positives)->capture_default_str();
    synth->add_option("--negatives", spec.negatives)->capture_default_str();
    synth->add_option("--text-noise", spec.text_noise, "fraction of posts with injected chat noise")
        ->check(CLI::Range(0.0, 1.0));
    synth->add_option("--label-noise", spec.label_noise, "fraction of flipped stage-1 labels")
        ->check(CLI::Range(0.0, 1.0));
    synth->add_option("--seed", spec.seed)->capture_default_str();

    std::string data, models_out, fam1 = "svm", fam2 = "nb", wordcloud;
    std::size_t top_k = 50;
    auto* train = app.add_subcommand("train", "train both classifier stages");
    train->add_option("--data", data, "labeled corpus TSV (default: synthetic corpus)");
    train->add_option("--out", models_out, "model directory (default: from config)");
    train->add_option("--stage1", fam1, "stage-1 classifier")->check(CLI::IsMember({"svm", "nb"}))->capture_default_str();
    train->add_option("--stage2", fam2, "stage-2 classifier")->check(CLI::IsMember({"svm", "nb"}))->capture_default_str();
    train->add_option("--wordcloud", wordcloud, "also export the attribute ranking here");
    train->add_option("--top", top_k, "word cloud size")->capture_default_str();

    std::size_t folds = 10;
    std::uint64_t seed = 1;
    bool json = false;
    auto* eval = app.add_subcommand("eval", "stratified k-fold cross validation of both stages");
    eval->add_option("--data", data, "labeled corpus TSV (default: synthetic corpus)");
    eval->add_option("--folds", folds)->check(CLI::Range(2, 1000))->capture_default_str();
    eval->add_option("--seed", seed)->capture_default_str();
    eval->add_flag("--json", json, "print the full report as JSON");
    eval->add_option("--wordcloud", wordcloud, "also export the attribute ranking here");
    eval->add_option("--top", top_k, "word cloud size")->capture_default_str();

    std::string text_in;
    auto* classify = app.add_subcommand("classify", "sanitize and classify one post");
    classify->add_option("--text", text_in, "post text")->required();

    std::string file, out_path;
    double rate = 0.0;
    bool post_clock = false, store = false;
    auto* replay = app.add_subcommand("replay", "run a JSON Lines post file through the pipeline");
    replay->add_option("--file", file, "JSON Lines post file")->required()->check(CLI::ExistingFile);
    replay->add_option("--rate", rate, "posts per second (0: as fast as possible)")->check(CLI::NonNegativeNumber);
    replay->add_option("--out", out_path, "write incidents as JSON Lines here (default: stdout)");
    replay->add_flag("--post-clock", post_clock, "stamp detected_at with the post time (reproducible output)");
    replay->add_flag("--store", store, "also append incidents to the configured incident log");

    auto* serve = app.add_subcommand("serve", "run the HTTP service");

    CLI11_PARSE(app, argc, argv);

    auto logger = spdlog::stderr_color_mt("cityalert");
    spdlog::set_default_logger(logger);
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (*synth) return cmd_synth(synth_out, spec);
        AppConfig cfg = load_config(config_path);
        if (*train) return cmd_train(cfg, data, models_out, fam1, fam2, wordcloud, top_k);
        if (*eval) return cmd_eval(cfg, data, folds, seed, json, wordcloud, top_k);
        if (*classify) return cmd_classify(cfg, text_in);
        if (*replay) return cmd_replay(cfg, file, rate, out_path, post_clock, store);
        if (*serve) return cmd_serve(cfg);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 2;
    }
    return 0;
}

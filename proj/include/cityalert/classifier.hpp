#pragma once

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "features.hpp"
#include "max_margin.hpp"
#include "naive_bayes.hpp"
#include "preprocess.hpp"
#include "text.hpp"

namespace cityalert {

enum class ClassifierFamily { NaiveBayes, MaxMargin };

inline std::string to_string(ClassifierFamily f) {
    return f == ClassifierFamily::NaiveBayes ? "nb" : "svm";
}

inline ClassifierFamily parse_family(const std::string& s) {
    if (s == "nb" || s == "naive-bayes") return ClassifierFamily::NaiveBayes;
    if (s == "svm" || s == "max-margin") return ClassifierFamily::MaxMargin;
    throw std::invalid_argument("unknown classifier family '" + s + "'");
}

using ClassifierModel = std::variant<NaiveBayesModel, MaxMarginModel, OneVsRestModel>;

inline Prediction predict(const ClassifierModel& model, const FeatureVector& vec) {
    return std::visit(
        [&](const auto& m) -> Prediction {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, NaiveBayesModel>) return predict_nb(m, vec);
            else if constexpr (std::is_same_v<T, MaxMarginModel>) return predict_margin(m, vec);
            else return predict_one_vs_rest(m, vec);
        },
        model);
}

struct StageConfig {
    ClassifierFamily family = ClassifierFamily::NaiveBayes;
    FeatureOptions features;
    double alpha = 1.0;
    MarginParams margin;
};

// Default production settings: unigram max-margin filter, trigram NB categorizer.
inline StageConfig default_stage1_config() {
    StageConfig c;
    c.family = ClassifierFamily::MaxMargin;
    c.features.order = 1;
    return c;
}

inline StageConfig default_stage2_config() {
    StageConfig c;
    c.family = ClassifierFamily::NaiveBayes;
    c.features.order = 3;
    c.features.fallback_short_docs = true;
    return c;
}

// A vocabulary plus the classifier trained against it.
struct TrainedStage {
    FeatureOptions features;
    Vocabulary vocab;
    ClassifierModel model;

    FeatureVector vectorize(std::span<const std::string> tokens) const {
        return cityalert::vectorize(tokens, vocab, features);
    }
    Prediction predict(std::span<const std::string> tokens) const {
        return cityalert::predict(model, vectorize(tokens));
    }
    const std::vector<std::string>& classes() const {
        return std::visit([](const auto& m) -> const std::vector<std::string>& { return m.classes; },
                          model);
    }
};

// Fits the vocabulary and classifier on the given documents only. For a
// two-class max-margin stage, classes[0] is the positive class.
inline TrainedStage train_stage(std::span<const std::vector<std::string>> docs,
                                std::span<const std::string> labels,
                                const std::vector<std::string>& classes, const StageConfig& config) {
    if (docs.size() != labels.size()) throw std::invalid_argument("docs/labels size mismatch");
    TrainedStage stage{config.features, fit_vocabulary(docs, config.features), NaiveBayesModel{}};
    std::vector<LabeledVector> examples;
    examples.reserve(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        examples.push_back({stage.vectorize(docs[i]), labels[i]});
    }
    if (config.family == ClassifierFamily::NaiveBayes) {
        stage.model = train_nb(examples, classes, config.alpha);
    } else if (classes.size() == 2) {
        stage.model = train_margin(examples, classes[0], classes[1], config.margin);
    } else {
        stage.model = train_one_vs_rest(examples, classes, config.margin);
    }
    return stage;
}

namespace detail {

using text::format_double;
using text::parse_double;

inline std::vector<double> parse_doubles(std::string_view s) {
    std::vector<double> out;
    for (const auto& tok : text::split_whitespace(s)) out.push_back(parse_double(tok));
    return out;
}

inline std::string join_doubles(const std::vector<double>& vs) {
    std::string out;
    for (std::size_t i = 0; i < vs.size(); ++i) {
        if (i) out += ' ';
        out += format_double(vs[i]);
    }
    return out;
}

} // namespace detail

inline constexpr std::string_view kModelFormat = "cityalert-model/1";

// Writes the classifier half of a stage. The header records the hash of the
// vocabulary the model was trained with; load_stage refuses a mismatch.
inline void save_model(const std::string& path, const TrainedStage& stage) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    const char* family = std::holds_alternative<NaiveBayesModel>(stage.model) ? "naive-bayes"
                         : std::holds_alternative<MaxMarginModel>(stage.model) ? "max-margin"
                                                                                 : "one-vs-rest";
    out << "format\t" << kModelFormat << '\n'
        << "family\t" << family << '\n'
        << "classes\t" << text::join(stage.classes(), "\t") << '\n'
        << "vocab_hash\t" << text::hex64(stage.vocab.hash()) << '\n'
        << "vocab_size\t" << stage.vocab.size() << '\n'
        << "ngram\t" << stage.features.order << '\n'
        << "fallback\t" << stage.features.fallback_short_docs << '\n'
        << "binary\t" << stage.features.binary << '\n';
    auto write_margin = [&](const MaxMarginModel& m) {
        out << "weights\t" << m.classes[0] << '\t' << detail::format_double(m.bias) << '\t'
            << detail::join_doubles(m.weights) << '\n';
    };
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, NaiveBayesModel>) {
                out << "alpha\t" << detail::format_double(m.alpha) << '\n' << "end-header\n";
                out << "prior\t" << detail::join_doubles(m.log_prior) << '\n';
                for (std::size_t c = 0; c < m.classes.size(); ++c) {
                    out << "likelihood\t" << m.classes[c] << '\t'
                        << detail::join_doubles(m.log_likelihood[c]) << '\n';
                }
            } else {
                const MarginParams& p =
                    [&]() -> const MarginParams& {
                        if constexpr (std::is_same_v<T, MaxMarginModel>) return m.params;
                        else return m.models.front().params;
                    }();
                out << "reg\t" << detail::format_double(p.reg) << '\n'
                    << "epochs\t" << p.epochs << '\n'
                    << "seed\t" << p.seed << '\n'
                    << "end-header\n";
                if constexpr (std::is_same_v<T, MaxMarginModel>) {
                    write_margin(m);
                } else {
                    for (const auto& bin : m.models) write_margin(bin);
                }
            }
        },
        stage.model);
    if (!out) throw FormatError("write failed: " + path);
}

inline TrainedStage load_stage(const std::string& model_path, const std::string& vocab_path) {
    Vocabulary vocab = Vocabulary::load(vocab_path);
    std::map<std::string, std::vector<std::string>> header;
    std::vector<std::vector<std::string>> body;
    bool in_body = false;
    text::for_each_line(model_path, [&](const std::string& line, std::size_t) {
        if (line.empty()) return;
        if (line == "end-header") {
            in_body = true;
            return;
        }
        auto fields = text::split(line, '\t');
        if (in_body) {
            body.push_back(std::move(fields));
        } else {
            std::string key = fields.front();
            fields.erase(fields.begin());
            header[key] = std::move(fields);
        }
    });
    auto field = [&](const std::string& key) -> const std::string& {
        auto it = header.find(key);
        if (it == header.end() || it->second.empty()) {
            throw FormatError(model_path + ": missing header '" + key + "'");
        }
        return it->second.front();
    };
    if (field("format") != kModelFormat) throw FormatError(model_path + ": unsupported format");
    if (field("vocab_hash") != text::hex64(vocab.hash())) {
        throw VocabularyMismatch(model_path + " was trained with a different vocabulary than " +
                                 vocab_path);
    }
    const std::size_t dim = std::stoul(field("vocab_size"));
    if (dim != vocab.size()) throw VocabularyMismatch(model_path + ": vocabulary size differs");

    TrainedStage stage{};
    stage.vocab = std::move(vocab);
    stage.features.order = std::stoul(field("ngram"));
    stage.features.fallback_short_docs = field("fallback") == "1";
    stage.features.binary = field("binary") == "1";
    const auto classes = header.at("classes");
    const std::string family = field("family");

    auto check_dim = [&](const std::vector<double>& v) {
        if (v.size() != dim) throw FormatError(model_path + ": parameter row has wrong length");
    };
    auto read_margin = [&](const std::vector<std::string>& row, const std::string& negative) {
        if (row.size() != 4 || row[0] != "weights") throw FormatError(model_path + ": bad weights row");
        MaxMarginModel m;
        m.classes = {row[1], negative};
        m.bias = detail::parse_double(row[2]);
        m.weights = detail::parse_doubles(row[3]);
        check_dim(m.weights);
        m.params.reg = detail::parse_double(field("reg"));
        m.params.epochs = std::stoul(field("epochs"));
        m.params.seed = std::stoull(field("seed"));
        return m;
    };

    if (family == "naive-bayes") {
        NaiveBayesModel m;
        m.classes = classes;
        m.alpha = detail::parse_double(field("alpha"));
        m.vocab_size = dim;
        if (body.size() != classes.size() + 1 || body[0].size() != 2 || body[0][0] != "prior") {
            throw FormatError(model_path + ": bad naive-bayes body");
        }
        m.log_prior = detail::parse_doubles(body[0][1]);
        if (m.log_prior.size() != classes.size()) throw FormatError(model_path + ": bad prior row");
        for (std::size_t c = 0; c < classes.size(); ++c) {
            const auto& row = body[c + 1];
            if (row.size() != 3 || row[0] != "likelihood" || row[1] != classes[c]) {
                throw FormatError(model_path + ": bad likelihood row");
            }
            m.log_likelihood.push_back(detail::parse_doubles(row[2]));
            check_dim(m.log_likelihood.back());
        }
        stage.model = std::move(m);
    } else if (family == "max-margin") {
        if (classes.size() != 2 || body.size() != 1) throw FormatError(model_path + ": bad max-margin body");
        stage.model = read_margin(body[0], classes[1]);
    } else if (family == "one-vs-rest") {
        if (body.size() != classes.size()) throw FormatError(model_path + ": bad one-vs-rest body");
        OneVsRestModel m;
        m.classes = classes;
        for (const auto& row : body) m.models.push_back(read_margin(row, std::string(kRestLabel)));
        stage.model = std::move(m);
    } else {
        throw FormatError(model_path + ": unknown family '" + family + "'");
    }
    return stage;
}

struct Detection {
    std::string category;
    Prediction stage1;
    Prediction stage2;
};

// Stage 1 filters; only posts it labels `positive_label` reach stage 2.
inline std::optional<Detection> two_stage_classify(const SanitizedPost& post, const TrainedStage& stage1,
                                                   const TrainedStage& stage2,
                                                   const std::string& positive_label = "emergency") {
    Prediction p1 = stage1.predict(post.tokens);
    if (p1.label() != positive_label) return std::nullopt;
    Prediction p2 = stage2.predict(post.tokens);
    std::string category = p2.label();
    return Detection{std::move(category), std::move(p1), std::move(p2)};
}

} // namespace cityalert

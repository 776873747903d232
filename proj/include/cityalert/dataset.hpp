#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "lexicon.hpp"
#include "preprocess.hpp"
#include "text.hpp"
#include "time.hpp"

namespace cityalert {

inline const std::string kEmergency = "emergency";
inline const std::string kNonEmergency = "non-emergency";

inline const std::vector<std::string>& stage1_classes() {
    static const std::vector<std::string> classes{kEmergency, kNonEmergency};
    return classes;
}

// One row of the labeled corpus, before preprocessing.
struct LabeledPost {
    std::string text;
    std::string stage1_label;             // kEmergency or kNonEmergency
    std::optional<std::string> category;  // present iff emergency
    std::optional<Coordinates> coords;
    std::optional<Timestamp> timestamp;

    friend bool operator==(const LabeledPost&, const LabeledPost&) = default;
};

using Dataset = std::vector<LabeledPost>;

// The unit of cross validation: sanitized tokens plus labels.
struct LabeledExample {
    std::vector<std::string> tokens;
    std::string stage1_label;
    std::optional<std::string> category;
};

inline void validate(const LabeledPost& p, const std::vector<std::string>& categories) {
    if (p.stage1_label != kEmergency && p.stage1_label != kNonEmergency) {
        throw FormatError("bad stage-1 label '" + p.stage1_label + "'");
    }
    if ((p.stage1_label == kEmergency) != p.category.has_value()) {
        throw FormatError("category must be present exactly for emergency rows");
    }
    if (p.category && !categories.empty() &&
        std::find(categories.begin(), categories.end(), *p.category) == categories.end()) {
        throw FormatError("unknown category '" + *p.category + "'");
    }
    if (p.coords && !p.coords->valid()) throw FormatError("coordinates out of range");
}

namespace detail {

inline std::string tsv_safe(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    }
    return out;
}

inline std::string format_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace detail

// Columns: text, stage1_label, stage2_category, lat, lon, timestamp.
inline Dataset load_dataset(const std::string& path, const std::vector<std::string>& categories = {}) {
    Dataset ds;
    text::for_each_line(path, [&](const std::string& line, std::size_t lineno) {
        if (line.empty()) return;
        auto f = text::split(line, '\t');
        auto where = path + ":" + std::to_string(lineno);
        if (f.size() != 6) throw FormatError(where + ": expected 6 tab-separated columns");
        LabeledPost p;
        p.text = f[0];
        p.stage1_label = f[1];
        if (!f[2].empty()) p.category = f[2];
        try {
            if (!f[3].empty() || !f[4].empty()) p.coords = Coordinates{std::stod(f[3]), std::stod(f[4])};
        } catch (const std::logic_error&) {
            throw FormatError(where + ": bad coordinates");
        }
        if (!f[5].empty()) p.timestamp = parse_timestamp(f[5]);
        try {
            validate(p, categories);
        } catch (const FormatError& e) {
            throw FormatError(where + ": " + e.what());
        }
        ds.push_back(std::move(p));
    });
    return ds;
}

inline void save_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    for (const auto& p : ds) {
        out << detail::tsv_safe(p.text) << '\t' << p.stage1_label << '\t' << p.category.value_or("")
            << '\t' << (p.coords ? detail::format_coord(p.coords->lat) : "") << '\t'
            << (p.coords ? detail::format_coord(p.coords->lon) : "") << '\t'
            << (p.timestamp ? format_timestamp(*p.timestamp) : "") << '\n';
    }
    if (!out) throw FormatError("write failed: " + path);
}

// Rows whose text is empty after cleaning keep an empty token list.
inline std::vector<LabeledExample> sanitize_dataset(const Dataset& ds, const Dictionary& dict,
                                                    const NormalizationMap& map) {
    std::vector<LabeledExample> out;
    out.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        LabeledExample ex{{}, ds[i].stage1_label, ds[i].category};
        try {
            ex.tokens = sanitize(RawPost{std::to_string(i), ds[i].text, std::nullopt, {}, {}}, dict, map).tokens;
        } catch (const EmptyAfterCleaning&) {
        }
        out.push_back(std::move(ex));
    }
    return out;
}

} // namespace cityalert

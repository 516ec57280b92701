#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrn/errors.hpp"
#include "mrn/graph_build.hpp"
#include "mrn/parser.hpp"
#include "mrn/rng.hpp"

namespace mrn::harness {

struct FunctionLabel {
    std::string name;
    int arity = 0;
    int label = 0;  // 0 or 1
};

struct ManifestEntry {
    std::string path;
    std::string vuln_class;  // arithmetic | reentrancy | timestamp
    std::vector<FunctionLabel> functions;
};

using DatasetManifest = std::vector<ManifestEntry>;

/// Parses a JSON Lines manifest: one contract per line with per-function
/// labels. Throws FormatError naming the offending line and field.
inline DatasetManifest parse_manifest(const std::string& text) {
    DatasetManifest out;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::string at = "line " + std::to_string(line_no);
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(at + ": invalid JSON: " + e.what());
        }
        if (!doc.is_object() || !doc.contains("path") || !doc["path"].is_string())
            throw FormatError(at + ".path: missing or not a string");
        if (!doc.contains("class") || !doc["class"].is_string())
            throw FormatError(at + ".class: missing or not a string");
        std::string cls = doc["class"].get<std::string>();
        if (cls != "arithmetic" && cls != "reentrancy" && cls != "timestamp")
            throw FormatError(at + ".class: expected arithmetic, reentrancy, or timestamp");
        if (!doc.contains("functions") || !doc["functions"].is_array())
            throw FormatError(at + ".functions: missing or not an array");
        ManifestEntry entry;
        entry.path = doc["path"].get<std::string>();
        entry.vuln_class = cls;
        for (std::size_t i = 0; i < doc["functions"].size(); ++i) {
            const auto& jf = doc["functions"][i];
            std::string fat = at + ".functions[" + std::to_string(i) + "]";
            if (!jf.is_object() || !jf.contains("name") || !jf["name"].is_string() ||
                !jf.contains("arity") || !jf["arity"].is_number_integer() ||
                !jf.contains("label") || !jf["label"].is_number_integer())
                throw FormatError(fat + ": expected {name, arity, label}");
            int label = jf["label"].get<int>();
            if (label != 0 && label != 1) throw FormatError(fat + ".label: expected 0 or 1");
            entry.functions.push_back({jf["name"].get<std::string>(), jf["arity"].get<int>(), label});
        }
        out.push_back(std::move(entry));
    }
    return out;
}

inline DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open manifest " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_manifest(buf.str());
}

/// One contract ready for the model: its nested graph and the label of each
/// function in list_functions order.
struct LabeledContract {
    std::string path;
    std::string vuln_class;
    graph::Mrng mrng;
    std::vector<double> labels;
};

/// Parses and labels one manifest entry. Every function in the file must be
/// labeled and every label must name a function, otherwise LabelError.
inline LabeledContract load_contract(const ManifestEntry& entry) {
    std::ifstream in(entry.path, std::ios::binary);
    if (!in) throw FormatError("cannot open source file " + entry.path);
    std::ostringstream buf;
    buf << in.rdbuf();
    sol::NormalizedAst ast = sol::parse_source({entry.path, buf.str()});

    LabeledContract out;
    out.path = entry.path;
    out.vuln_class = entry.vuln_class;
    out.mrng = graph::build_mrng(ast);

    auto fns = sol::list_functions(ast);
    std::vector<bool> used(entry.functions.size(), false);
    for (const sol::FunctionAst& fn : fns) {
        bool matched = false;
        for (std::size_t i = 0; i < entry.functions.size(); ++i) {
            const FunctionLabel& fl = entry.functions[i];
            if (!used[i] && fl.name == fn.name && fl.arity == fn.arity) {
                out.labels.push_back(static_cast<double>(fl.label));
                used[i] = true;
                matched = true;
                break;
            }
        }
        if (!matched)
            throw LabelError(entry.path + ": no label for function " +
                             (fn.name.empty() ? "<fallback>" : fn.name) + "/" +
                             std::to_string(fn.arity));
    }
    for (std::size_t i = 0; i < used.size(); ++i)
        if (!used[i])
            throw LabelError(entry.path + ": label names unknown function " +
                             entry.functions[i].name + "/" +
                             std::to_string(entry.functions[i].arity));
    return out;
}

inline std::vector<LabeledContract> load_contracts(const DatasetManifest& manifest) {
    std::vector<LabeledContract> out;
    out.reserve(manifest.size());
    for (const ManifestEntry& e : manifest) out.push_back(load_contract(e));
    return out;
}

template <class T>
struct Split {
    std::vector<T> train, validation, test;
};

/// Seeded shuffle at contract granularity, then validation and test take
/// floor(ratio*n) entries each and train keeps the remainder.
template <class T>
Split<T> split_dataset(const std::vector<T>& entries, double train_ratio, double val_ratio,
                       double test_ratio, std::uint64_t seed) {
    if (entries.empty()) throw EmptyDataset("split_dataset: no entries");
    double sum = train_ratio + val_ratio + test_ratio;
    if (std::fabs(sum - 1.0) > 1e-9 || train_ratio < 0 || val_ratio < 0 || test_ratio < 0)
        throw ShapeMismatch("split_dataset: ratios must be nonnegative and sum to 1");
    std::vector<std::size_t> order(entries.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    std::size_t n = entries.size();
    std::size_t n_val = static_cast<std::size_t>(std::floor(val_ratio * static_cast<double>(n)));
    std::size_t n_test = static_cast<std::size_t>(std::floor(test_ratio * static_cast<double>(n)));
    Split<T> split;
    for (std::size_t i = 0; i < n; ++i) {
        const T& item = entries[order[i]];
        if (i < n_val)
            split.validation.push_back(item);
        else if (i < n_val + n_test)
            split.test.push_back(item);
        else
            split.train.push_back(item);
    }
    return split;
}

}  // namespace mrn::harness

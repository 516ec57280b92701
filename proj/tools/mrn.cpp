// mrn - locate vulnerable functions in Solidity contracts with a
// multi-relational nested graph convolutional model.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mrn/mrn.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw mrn::Error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw mrn::Error("cannot write " + path);
    out << content;
}

int run_parse(const std::string& file, const std::string& emit_ast) {
    mrn::sol::NormalizedAst ast = mrn::sol::parse_source({file, read_file(file)});
    if (!emit_ast.empty()) {
        write_file(emit_ast, mrn::sol::emit_ast_json(ast));
    } else {
        auto fns = mrn::sol::list_functions(ast);
        std::cout << file << ": " << ast.nodes.size() << " nodes, " << fns.size()
                  << " function(s)\n";
        for (const auto& fn : fns) {
            const auto& span = ast.node(fn.root).span;
            std::cout << "  " << (fn.name.empty() ? "<fallback>" : fn.name) << "/" << fn.arity
                      << (fn.is_constructor ? " [constructor]" : "")
                      << (fn.is_fallback ? " [fallback]" : "") << "  line " << span[0] << "\n";
        }
    }
    return 0;
}

int run_graph(const std::string& file, const std::string& out, const std::string& dot) {
    mrn::sol::NormalizedAst ast = mrn::sol::parse_source({file, read_file(file)});
    mrn::graph::Mrng g = mrn::graph::build_mrng(ast);
    std::string json = mrn::graph::serialize_graph(g);
    if (!out.empty())
        write_file(out, json);
    else
        std::cout << json;
    if (!dot.empty()) write_file(dot, mrn::graph::to_dot(g));
    return 0;
}

int run_train(const std::string& manifest_path, const std::string& out_path,
              mrn::harness::TrainingConfig tc, mrn::model::ModelConfig mc) {
    using namespace mrn::harness;
    if (const char* env_seed = std::getenv("MRN_SEED"))
        tc.seed = std::strtoull(env_seed, nullptr, 10);
    DatasetManifest manifest = load_manifest(manifest_path);
    auto contracts = load_contracts(manifest);
    auto split = split_dataset(contracts, tc.train_ratio, tc.val_ratio, tc.test_ratio, tc.seed);
    std::string vuln_class = manifest.empty() ? "arithmetic" : manifest.front().vuln_class;
    std::cerr << "training on " << split.train.size() << " contracts, validating on "
              << split.validation.size() << " (" << split.test.size() << " held out)\n";
    TrainResult result = train_model(split.train, split.validation, mc, tc, vuln_class);
    for (const EpochLog& log : result.log) std::cout << log.line() << "\n";
    save_checkpoint(result.checkpoint, out_path);
    std::cerr << "saved checkpoint (best epoch " << result.checkpoint.epoch << ", val F1 "
              << result.checkpoint.best_val_f1 << ") to " << out_path << "\n";
    return 0;
}

int run_eval(const std::string& manifest_path, const std::string& model_path,
             const std::string& roc_csv, double threshold) {
    using namespace mrn::harness;
    ModelCheckpoint ckpt = load_checkpoint(model_path);
    auto contracts = load_contracts(load_manifest(manifest_path));
    MetricsReport report = evaluate(ckpt, contracts, threshold);
    nlohmann::ordered_json doc;
    doc["functions"] = report.counts.total();
    doc["threshold"] = report.threshold;
    doc["accuracy"] = report.accuracy;
    doc["precision"] = report.precision;
    doc["recall"] = report.recall;
    doc["f1"] = report.f1;
    doc["auc"] = report.auc;
    doc["confusion"] = {{"tp", report.counts.tp},
                        {"fp", report.counts.fp},
                        {"fn", report.counts.fn},
                        {"tn", report.counts.tn}};
    std::cout << doc.dump(2) << "\n";
    if (!roc_csv.empty()) {
        std::ostringstream csv;
        csv << "fpr,tpr\n";
        for (auto [fpr, tpr] : report.roc) csv << fpr << "," << tpr << "\n";
        write_file(roc_csv, csv.str());
    }
    return 0;
}

int run_locate(const std::string& file, const std::string& model_path, double threshold,
               const std::string& json_out) {
    using namespace mrn::harness;
    ModelCheckpoint ckpt = load_checkpoint(model_path);
    mrn::sol::NormalizedAst ast = mrn::sol::parse_source({file, read_file(file)});
    mrn::graph::Mrng g = mrn::graph::build_mrng(ast);
    mrn::num::Tensor probs =
        mrn::model::model_forward(ckpt.config, ckpt.params, ckpt.vocab, g, nullptr);
    auto fns = mrn::sol::list_functions(ast);

    nlohmann::ordered_json doc;
    doc["file"] = file;
    doc["class"] = ckpt.vuln_class;
    doc["threshold"] = threshold;
    doc["functions"] = nlohmann::ordered_json::array();
    bool any_positive = false;
    for (std::size_t i = 0; i < fns.size(); ++i) {
        double p = probs.data()[i];
        bool verdict = p >= threshold;
        any_positive = any_positive || verdict;
        nlohmann::ordered_json jf;
        jf["name"] = fns[i].name;
        jf["arity"] = fns[i].arity;
        jf["span"] = ast.node(fns[i].root).span;
        jf["probability"] = p;
        jf["verdict"] = verdict;
        doc["functions"].push_back(std::move(jf));
    }
    std::string text = doc.dump(2) + "\n";
    std::cout << text;
    if (!json_out.empty()) write_file(json_out, text);
    return any_positive ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-relational nested graph analysis of Solidity contracts"};
    app.require_subcommand(1);

    std::string file, emit_ast, out, dot, manifest, model_path, roc_csv, json_out;
    double threshold = 0.5;
    mrn::harness::TrainingConfig tc;
    mrn::model::ModelConfig mc;

    CLI::App* parse = app.add_subcommand("parse", "parse a Solidity file");
    parse->add_option("file", file)->required();
    parse->add_option("--emit-ast", emit_ast, "write the AST interchange JSON");

    CLI::App* graph = app.add_subcommand("graph", "build the nested contract graph");
    graph->add_option("file", file)->required();
    graph->add_option("--out", out, "write mrn-graph/1 JSON here (default stdout)");
    graph->add_option("--dot", dot, "also write a Graphviz rendering");

    CLI::App* train = app.add_subcommand("train", "train a model from a labeled manifest");
    train->add_option("--manifest", manifest)->required();
    train->add_option("--out", out, "checkpoint output path")->required();
    train->add_option("--epochs", tc.epochs);
    train->add_option("--batch", tc.batch_size);
    train->add_option("--lr", tc.learning_rate);
    train->add_option("--momentum", tc.momentum);
    train->add_option("--dropout", tc.dropout);
    train->add_option("--seed", tc.seed);
    train->add_option("--min-freq", tc.min_frequency, "vocabulary frequency threshold");
    train->add_option("--pos-weight", tc.positive_weight, "loss weight of vulnerable functions");
    train->add_flag("--no-self-attention", mc.no_self_attention,
                    "replace layer fusion with the last layer output");
    train->add_flag("--no-nested", mc.no_nested, "skip the contract-graph convolutions");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a labeled manifest");
    eval->add_option("--manifest", manifest)->required();
    eval->add_option("--model", model_path)->required();
    eval->add_option("--roc-csv", roc_csv, "write the ROC curve as fpr,tpr rows");
    eval->add_option("--threshold", threshold);

    CLI::App* locate = app.add_subcommand("locate", "classify each function of one file");
    locate->add_option("file", file)->required();
    locate->add_option("--model", model_path)->required();
    locate->add_option("--threshold", threshold);
    locate->add_option("--json", json_out, "also write the report to a file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (parse->parsed()) return run_parse(file, emit_ast);
        if (graph->parsed()) return run_graph(file, out, dot);
        if (train->parsed()) return run_train(manifest, out, tc, mc);
        if (eval->parsed()) return run_eval(manifest, model_path, roc_csv, threshold);
        if (locate->parsed()) return run_locate(file, model_path, threshold, json_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

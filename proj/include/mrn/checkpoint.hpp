#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrn/model.hpp"
#include "mrn/vocab.hpp"

namespace mrn::harness {

inline constexpr const char* kCheckpointFormatTag = "mrn-ckpt/1";

/// Everything needed to reproduce forward passes bit-identically: the
/// configuration, both vocabularies, every parameter tensor, and training
/// metadata.
struct ModelCheckpoint {
    model::ModelConfig config;
    graph::Vocabulary vocab;
    model::ModelParams params;
    int epoch = 0;
    double best_val_f1 = 0.0;
    std::string vuln_class;
};

namespace detail {

inline nlohmann::json config_to_json(const model::ModelConfig& c) {
    nlohmann::json j;
    j["f_hidden"] = c.f_hidden;
    j["p_channels"] = c.p_channels;
    j["layers"] = c.layers;
    j["heads"] = c.heads;
    j["k_prime"] = c.k_prime;
    j["c0"] = c.c0;
    j["nested_layers"] = c.nested_layers;
    j["conv_filters"] = c.conv_filters;
    j["conv_kernel"] = c.conv_kernel;
    j["dropout"] = c.dropout;
    j["leaky_slope"] = c.leaky_slope;
    j["norm_eps"] = c.norm_eps;
    j["norm_floor"] = c.norm_floor;
    j["no_self_attention"] = c.no_self_attention;
    j["no_nested"] = c.no_nested;
    j["seed"] = c.seed;
    return j;
}

inline model::ModelConfig config_from_json(const nlohmann::json& j) {
    model::ModelConfig c;
    c.f_hidden = j.at("f_hidden").get<int>();
    c.p_channels = j.at("p_channels").get<int>();
    c.layers = j.at("layers").get<int>();
    c.heads = j.at("heads").get<int>();
    c.k_prime = j.at("k_prime").get<int>();
    c.c0 = j.at("c0").get<int>();
    c.nested_layers = j.at("nested_layers").get<int>();
    c.conv_filters = j.at("conv_filters").get<int>();
    c.conv_kernel = j.at("conv_kernel").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.norm_eps = j.at("norm_eps").get<double>();
    c.norm_floor = j.at("norm_floor").get<double>();
    c.no_self_attention = j.at("no_self_attention").get<bool>();
    c.no_nested = j.at("no_nested").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

inline nlohmann::json tensor_to_json(const num::Tensor& t) {
    nlohmann::json j;
    j["shape"] = t.shape();
    j["data"] = t.values();
    return j;
}

inline num::Tensor tensor_from_json(const nlohmann::json& j) {
    num::Shape shape = j.at("shape").get<num::Shape>();
    std::vector<double> data = j.at("data").get<std::vector<double>>();
    return num::Tensor(std::move(shape), std::move(data), /*requires_grad=*/true);
}

/// Reassembles ModelParams from the named tensor map, insisting on the exact
/// inventory the configuration implies.
inline model::ModelParams params_from_named(const model::ModelConfig& cfg,
                                            std::map<std::string, num::Tensor>& named) {
    model::ModelParams p;
    auto take = [&](const std::string& name) {
        auto it = named.find(name);
        if (it == named.end())
            throw FormatError("$.params: missing parameter \"" + name + "\"");
        num::Tensor t = it->second;
        named.erase(it);
        return t;
    };
    p.node_table = take("embed.node_table");
    p.edge_table = take("embed.edge_table");
    for (int l = 0; l < cfg.layers; ++l) {
        model::ModelParams::EegcnLayer layer;
        layer.w = take("eegcn." + std::to_string(l) + ".w");
        layer.a = take("eegcn." + std::to_string(l) + ".a");
        p.eegcn.push_back(std::move(layer));
    }
    if (!cfg.no_self_attention) {
        p.fuse_wq = take("fuse.wq");
        p.fuse_wk = take("fuse.wk");
        p.fuse_wv = take("fuse.wv");
        p.fuse_wo = take("fuse.wo");
    }
    p.readout_w = take("readout.w");
    p.readout_b = take("readout.b");
    if (!cfg.no_nested)
        for (int t = 0; t < cfg.nested_layers; ++t)
            p.nested_w.push_back(take("nested." + std::to_string(t) + ".w"));
    p.conv_w = take("clf.conv_w");
    p.conv_b = take("clf.conv_b");
    p.fc_w = take("clf.fc_w");
    p.fc_b = take("clf.fc_b");
    if (!named.empty())
        throw FormatError("$.params: unexpected parameter \"" + named.begin()->first + "\"");
    return p;
}

}  // namespace detail

/// Serializes to MessagePack (float64 payloads are bit-exact).
inline std::vector<std::uint8_t> checkpoint_to_bytes(const ModelCheckpoint& ckpt) {
    nlohmann::json doc;
    doc["format"] = kCheckpointFormatTag;
    doc["config"] = detail::config_to_json(ckpt.config);
    doc["vocab"]["node_tokens"] = ckpt.vocab.node_tokens;
    doc["vocab"]["edge_subtypes"] = ckpt.vocab.edge_subtypes;
    doc["vocab"]["min_frequency"] = ckpt.vocab.min_frequency;
    doc["meta"]["epoch"] = ckpt.epoch;
    doc["meta"]["best_val_f1"] = ckpt.best_val_f1;
    doc["meta"]["class"] = ckpt.vuln_class;
    doc["params"] = nlohmann::json::object();
    for (auto& [name, tensor] : ckpt.params.named())
        doc["params"][name] = detail::tensor_to_json(tensor);
    return nlohmann::json::to_msgpack(doc);
}

inline ModelCheckpoint checkpoint_from_bytes(const std::vector<std::uint8_t>& bytes) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::from_msgpack(bytes);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("$: not a checkpoint container: ") + e.what());
    }
    try {
        if (!doc.is_object() || !doc.contains("format") || !doc["format"].is_string())
            throw FormatError("$.format: missing or not a string");
        std::string tag = doc["format"].get<std::string>();
        if (tag != kCheckpointFormatTag)
            throw VersionError("$.format: unknown format tag \"" + tag + "\"");
        ModelCheckpoint ckpt;
        ckpt.config = detail::config_from_json(doc.at("config"));
        ckpt.config.validate();
        ckpt.vocab.node_tokens = doc.at("vocab").at("node_tokens").get<std::map<std::string, int>>();
        ckpt.vocab.edge_subtypes =
            doc.at("vocab").at("edge_subtypes").get<std::map<std::string, int>>();
        ckpt.vocab.min_frequency = doc.at("vocab").at("min_frequency").get<int>();
        ckpt.epoch = doc.at("meta").at("epoch").get<int>();
        ckpt.best_val_f1 = doc.at("meta").at("best_val_f1").get<double>();
        ckpt.vuln_class = doc.at("meta").at("class").get<std::string>();
        std::map<std::string, num::Tensor> named;
        for (auto it = doc.at("params").begin(); it != doc.at("params").end(); ++it)
            named.emplace(it.key(), detail::tensor_from_json(it.value()));
        ckpt.params = detail::params_from_named(ckpt.config, named);
        return ckpt;
    } catch (const VersionError&) {
        throw;
    } catch (const FormatError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("$: malformed checkpoint: ") + e.what());
    }
}

inline void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path) {
    std::vector<std::uint8_t> bytes = checkpoint_to_bytes(ckpt);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write checkpoint " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

inline ModelCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return checkpoint_from_bytes(bytes);
}

}  // namespace mrn::harness

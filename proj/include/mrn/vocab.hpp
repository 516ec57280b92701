#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "mrn/errors.hpp"
#include "mrn/graph.hpp"

namespace mrn::graph {

inline constexpr const char* kUnkToken = "<unk>";
inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kUnkEdgeToken = "<unk_edge>";

/// Frozen token tables feeding the embedding layers. Node ids reserve
/// UNK=0 and PAD=1; edge ids reserve UNK_EDGE=0. Ids are dense and
/// deterministic: frequency descending, then lexicographic.
struct Vocabulary {
    std::map<std::string, int> node_tokens;
    std::map<std::string, int> edge_subtypes;
    int min_frequency = 1;

    int node_id(const std::string& token) const {
        auto it = node_tokens.find(token);
        return it == node_tokens.end() ? 0 : it->second;
    }

    int edge_id(const std::string& subtype) const {
        auto it = edge_subtypes.find(subtype);
        return it == edge_subtypes.end() ? 0 : it->second;
    }

    std::size_t node_count() const { return node_tokens.size(); }
    std::size_t edge_count() const { return edge_subtypes.size(); }
};

/// The edge side of the vocabulary never depends on the corpus: the closed
/// subtype sets are always fully included, in a fixed category order.
inline std::map<std::string, int> enumerate_edge_subtypes() {
    std::map<std::string, int> out;
    out.emplace(kUnkEdgeToken, 0);
    int next = 1;
    for (EdgeCategory cat : {EdgeCategory::DataType, EdgeCategory::ControlInfo,
                             EdgeCategory::Fields, EdgeCategory::DataFlow, EdgeCategory::Fallback,
                             EdgeCategory::SelfLoop}) {
        for (const std::string& s : closed_subtypes(cat))
            if (out.emplace(s, next).second) ++next;
    }
    return out;
}

inline Vocabulary build_vocabulary(const std::vector<Mrng>& corpus, int min_frequency) {
    if (corpus.empty()) throw EmptyCorpus("build_vocabulary: corpus is empty");
    std::map<std::string, long> freq;
    for (const Mrng& g : corpus)
        for (const Mrfg& f : g.functions)
            for (const GraphNode& n : f.nodes) ++freq[n.label];

    std::vector<std::pair<std::string, long>> kept;
    for (const auto& [token, count] : freq)
        if (count >= min_frequency) kept.emplace_back(token, count);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary vocab;
    vocab.min_frequency = min_frequency;
    vocab.node_tokens.emplace(kUnkToken, 0);
    vocab.node_tokens.emplace(kPadToken, 1);
    int next = 2;
    for (const auto& [token, count] : kept) {
        (void)count;
        if (vocab.node_tokens.emplace(token, next).second) ++next;
    }
    vocab.edge_subtypes = enumerate_edge_subtypes();
    return vocab;
}

}  // namespace mrn::graph

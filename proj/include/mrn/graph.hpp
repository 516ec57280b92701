#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mrn/errors.hpp"

namespace mrn::graph {

enum class EdgeCategory { DataType, ControlInfo, Fields, DataFlow, Fallback, SelfLoop };

inline const char* category_name(EdgeCategory c) {
    switch (c) {
        case EdgeCategory::DataType: return "DataType";
        case EdgeCategory::ControlInfo: return "ControlInfo";
        case EdgeCategory::Fields: return "Fields";
        case EdgeCategory::DataFlow: return "DataFlow";
        case EdgeCategory::Fallback: return "Fallback";
        case EdgeCategory::SelfLoop: return "SelfLoop";
    }
    return "?";
}

inline std::optional<EdgeCategory> category_from_name(const std::string& s) {
    if (s == "DataType") return EdgeCategory::DataType;
    if (s == "ControlInfo") return EdgeCategory::ControlInfo;
    if (s == "Fields") return EdgeCategory::Fields;
    if (s == "DataFlow") return EdgeCategory::DataFlow;
    if (s == "Fallback") return EdgeCategory::Fallback;
    if (s == "SelfLoop") return EdgeCategory::SelfLoop;
    return std::nullopt;
}

/// Subtype token every edge outside DataType must use. Data-type subtypes
/// are the literal declared type text (uint8 and uint16 stay distinct); the
/// embedding vocabulary enumerates the elementary types below and maps
/// everything else to UNK_EDGE.
inline const std::vector<std::string>& data_type_subtypes() {
    static const std::vector<std::string> v = {
        "uint",   "uint8",  "uint16",  "uint32",  "uint64", "uint128", "uint256", "int",
        "int8",   "int16",  "int32",   "int64",   "int128", "int256",  "bool",    "address",
        "string", "byte",   "bytes",   "bytes1",  "bytes2", "bytes4",  "bytes8",  "bytes16",
        "bytes20", "bytes32", "mapping", "var",
    };
    return v;
}

inline const std::vector<std::string>& control_info_subtypes() {
    static const std::vector<std::string> v = {"sequential", "if", "else", "while", "for",
                                               "require"};
    return v;
}

inline const std::vector<std::string>& fields_subtypes() {
    static const std::vector<std::string> v = {"left",      "right",  "operation", "function_call",
                                               "condition", "argument", "member",  "index"};
    return v;
}

inline const std::vector<std::string>& data_flow_subtypes() {
    static const std::vector<std::string> v = {"compute_from", "value_from"};
    return v;
}

inline const std::vector<std::string>& fallback_subtypes() {
    static const std::vector<std::string> v = {"fallback"};
    return v;
}

inline const std::vector<std::string>& self_loop_subtypes() {
    static const std::vector<std::string> v = {"self"};
    return v;
}

inline const std::vector<std::string>& closed_subtypes(EdgeCategory c) {
    switch (c) {
        case EdgeCategory::DataType: return data_type_subtypes();
        case EdgeCategory::ControlInfo: return control_info_subtypes();
        case EdgeCategory::Fields: return fields_subtypes();
        case EdgeCategory::DataFlow: return data_flow_subtypes();
        case EdgeCategory::Fallback: return fallback_subtypes();
        case EdgeCategory::SelfLoop: return self_loop_subtypes();
    }
    static const std::vector<std::string> empty;
    return empty;
}

struct EdgeType {
    EdgeCategory category = EdgeCategory::SelfLoop;
    std::string subtype;

    bool operator==(const EdgeType& o) const {
        return category == o.category && subtype == o.subtype;
    }
};

struct GraphNode {
    int id = 0;
    std::string label;
};

struct Edge {
    int src = 0;
    int dst = 0;
    EdgeType type;
    /// Set only on the top-level execution chain; 0..S-1 without gaps there.
    std::optional<int> seq_index;
};

/// Multi-relational function graph: one function's labeled nodes and typed
/// directed edges. Exactly one node is labeled `entry`.
struct Mrfg {
    std::string function_name;
    int arity = 0;
    std::vector<GraphNode> nodes;
    std::vector<Edge> edges;
};

/// Contract-level nested graph: one Mrfg per function plus invocation edges.
struct Mrng {
    std::string contract_id;  // file path or digest
    std::vector<Mrfg> functions;
    std::vector<std::pair<int, int>> calls;  // (caller index, callee index), deduplicated
};

}  // namespace mrn::graph

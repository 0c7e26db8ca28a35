#pragma once

// Graph export and import: a JSON document (lossless, re-validated on import)
// and a DOT rendering with similarity links in blue and skill edges in red.

#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "memory.hpp"
#include "sakg.hpp"

namespace kgagent {

inline constexpr int kGraphFormatVersion = 1;

inline nlohmann::json config_to_json(const GraphConfig& c) {
    return {{"theta_merge", c.thresholds.merge()},
            {"theta_simi", c.thresholds.simi()},
            {"alpha", c.alpha},
            {"c0", c.c0},
            {"dimension", c.dimension},
            {"similarity_edges", c.similarity_edges},
            {"format_version", kGraphFormatVersion}};
}

inline GraphConfig config_from_json(const nlohmann::json& j) {
    GraphConfig c;
    c.thresholds = SimilarityThresholds(j.at("theta_merge").get<double>(), j.at("theta_simi").get<double>());
    c.alpha = j.at("alpha").get<double>();
    c.c0 = j.at("c0").get<double>();
    c.dimension = j.at("dimension").get<std::size_t>();
    c.similarity_edges = j.value("similarity_edges", true);
    c.validate();
    return c;
}

/// Doubles are written in shortest round-trip form, so embeddings survive
/// export and import bit-exactly.
inline nlohmann::json graph_to_json(const KnowledgeGraph& g) {
    using nlohmann::json;
    json nodes = json::array();
    for (const auto& n : g.nodes()) {
        const auto v = n.embedding.values();
        nodes.push_back({{"id", n.id.value},
                         {"embedding", std::vector<double>(v.begin(), v.end())},
                         {"visit_count", n.visit_count},
                         {"first_seen_step", n.first_seen_step}});
    }
    json sim = json::array();
    for (const auto& e : g.similarity_edges()) sim.push_back({{"a", e.a.value}, {"b", e.b.value}, {"weight", e.weight}});
    json skill = json::array();
    for (const auto& e : g.skill_edges())
        skill.push_back({{"src", e.source.value},
                         {"dst", e.target.value},
                         {"skill_id", e.skill.value},
                         {"weight", e.weight},
                         {"traversal_count", e.traversal_count},
                         {"last_delta", e.last_delta}});
    return {{"config", config_to_json(g.config())}, {"nodes", nodes}, {"similarity_edges", sim}, {"skill_edges", skill}};
}

/// Structural problems raise CorruptSnapshot("graph-schema"); broken graph
/// invariants raise CorruptSnapshot naming the invariant.
inline KnowledgeGraph graph_from_json(const nlohmann::json& j) {
    GraphConfig cfg;
    std::vector<StateNode> nodes;
    std::vector<SimilarityEdge> sim;
    std::vector<SkillEdge> skill;
    try {
        const auto& c = j.at("config");
        const int version = c.value("format_version", kGraphFormatVersion);
        if (version > kGraphFormatVersion)
            throw VersionMismatch("graph format_version " + std::to_string(version) + " is newer than supported (" +
                                  std::to_string(kGraphFormatVersion) + ")");
        cfg = config_from_json(c);
        for (const auto& n : j.at("nodes"))
            nodes.push_back({NodeId{n.at("id").get<std::uint32_t>()}, Embedding(n.at("embedding").get<std::vector<double>>()),
                             n.at("visit_count").get<std::uint64_t>(), n.at("first_seen_step").get<std::int64_t>()});
        for (const auto& e : j.at("similarity_edges"))
            sim.push_back({NodeId{e.at("a").get<std::uint32_t>()}, NodeId{e.at("b").get<std::uint32_t>()},
                           e.at("weight").get<double>()});
        for (const auto& e : j.at("skill_edges")) {
            SkillEdge s;
            s.source = NodeId{e.at("src").get<std::uint32_t>()};
            s.target = NodeId{e.at("dst").get<std::uint32_t>()};
            s.skill = SkillId{e.at("skill_id").get<std::uint32_t>()};
            s.weight = e.at("weight").get<double>();
            s.traversal_count = e.at("traversal_count").get<std::uint64_t>();
            s.last_delta = e.value("last_delta", 0.0);
            skill.push_back(s);
        }
    } catch (const nlohmann::json::exception& e) {
        throw CorruptSnapshot("graph-schema", e.what());
    } catch (const ContractViolation& e) {
        throw CorruptSnapshot("graph-schema", e.what());
    }
    return KnowledgeGraph::restore(std::move(cfg), std::move(nodes), std::move(sim), std::move(skill));
}

/// Graphviz rendering. Skill edges are labelled with the skill name when a
/// memory is supplied.
inline void write_dot(std::ostream& os, const KnowledgeGraph& g, const ProceduralMemory* memory = nullptr) {
    os << "digraph sakg {\n";
    os << "  node [shape=circle];\n";
    for (const auto& n : g.nodes()) os << "  n" << n.id.value << " [label=\"" << n.id.value << "\"];\n";
    for (const auto& e : g.similarity_edges()) {
        std::ostringstream w;
        w.precision(3);
        w << e.weight;
        os << "  n" << e.a.value << " -> n" << e.b.value << " [dir=none, color=blue, style=dashed, label=\"" << w.str()
           << "\"];\n";
    }
    for (const auto& e : g.skill_edges()) {
        std::string label = std::to_string(e.skill.value);
        if (memory && memory->contains(e.skill)) label = memory->skill(e.skill).name;
        std::string escaped;
        for (char c : label) {
            if (c == '"' || c == '\\') escaped += '\\';
            escaped += c;
        }
        os << "  n" << e.source.value << " -> n" << e.target.value << " [color=red, label=\"" << escaped << "\"];\n";
    }
    os << "}\n";
}

inline std::string to_dot(const KnowledgeGraph& g, const ProceduralMemory* memory = nullptr) {
    std::ostringstream os;
    write_dot(os, g, memory);
    return os.str();
}

} // namespace kgagent

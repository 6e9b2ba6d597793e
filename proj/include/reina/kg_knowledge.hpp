#pragma once

// Knowledge-string construction for QA: link question/choice texts to
// concepts by exact token-sequence match, pick the longest concept on each
// side, then render its definitions and the edges connecting the two
// concepts. Graph and definitions load from desk-scale TSV fixtures.

#include <algorithm>
#include <compare>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "reina/error.hpp"
#include "reina/reina_core.hpp"
#include "reina/text_analysis.hpp"

namespace reina {

struct KgEdge {
    std::string head;
    std::string relation;
    std::string tail;
    auto operator<=>(const KgEdge&) const = default;
};

struct ConceptGraph {
    std::set<std::string> concepts;
    std::set<KgEdge> edges;

    void add_concept(std::string name) { concepts.insert(std::move(name)); }

    // Endpoints join the concept set so the membership invariant holds by
    // construction.
    void add_edge(std::string head, std::string relation, std::string tail) {
        concepts.insert(head);
        concepts.insert(tail);
        edges.insert({std::move(head), std::move(relation), std::move(tail)});
    }
};

struct DefinitionStore {
    std::map<std::string, std::string> defs;

    void add(const std::string& name, std::string definition) {
        if (definition.empty())
            throw ValidationError("definition for '" + name + "' is empty");
        defs[name] = std::move(definition);
    }

    const std::string* find(const std::string& name) const {
        const auto it = defs.find(name);
        return it == defs.end() ? nullptr : &it->second;
    }
};

struct KnowledgeRecord {
    std::optional<std::string> question_concept;
    std::optional<std::string> answer_concept;
    std::vector<std::string> definitions;
    std::vector<KgEdge> relations;
    std::string rendered;
};

/// All graph concepts whose token sequence occurs contiguously in the text.
/// Both sides go through tokenize, so matching is case-folded and aligned to
/// token boundaries.
inline std::set<std::string> link_entities(const std::string& text, const ConceptGraph& graph) {
    const auto text_toks = tokenize(text).tokens;
    std::set<std::string> matched;
    for (const auto& name : graph.concepts) {
        const auto name_toks = tokenize(name).tokens;
        if (name_toks.empty() || name_toks.size() > text_toks.size()) continue;
        const auto it =
            std::search(text_toks.begin(), text_toks.end(), name_toks.begin(), name_toks.end());
        if (it != text_toks.end()) matched.insert(name);
    }
    return matched;
}

namespace detail {

inline std::size_t codepoint_count(const std::string& s) {
    std::size_t i = 0, n = 0;
    while (i < s.size()) {
        next_cp(s, i);
        ++n;
    }
    return n;
}

}  // namespace detail

/// The concept with the most tokens; ties fall to the longer character
/// length, then to the lexicographically smallest string.
inline std::optional<std::string> choose_concept(const std::set<std::string>& matched) {
    std::optional<std::string> best;
    std::size_t best_tokens = 0;
    std::size_t best_chars = 0;
    for (const auto& name : matched) {
        const std::size_t n_tokens = tokenize(name).size();
        const std::size_t n_chars = detail::codepoint_count(name);
        // The set iterates in ascending order, so on a full tie the first
        // (lexicographically smallest) concept wins.
        if (!best || n_tokens > best_tokens ||
            (n_tokens == best_tokens && n_chars > best_chars)) {
            best = name;
            best_tokens = n_tokens;
            best_chars = n_chars;
        }
    }
    return best;
}

/// All edges running question concept -> answer concept, in ascending
/// relation-label order. Reverse edges are not considered.
inline std::vector<KgEdge> find_relations(const std::string& question_concept,
                                          const std::string& answer_concept,
                                          const ConceptGraph& graph) {
    std::vector<KgEdge> out;
    for (auto it = graph.edges.lower_bound({question_concept, "", ""});
         it != graph.edges.end() && it->head == question_concept; ++it) {
        if (it->tail == answer_concept) out.push_back(*it);
    }
    // Set order is (head, relation, tail): within one head the edges already
    // arrive sorted by relation.
    return out;
}

/// Links both texts, keeps the longest concept per side, and renders the
/// available definitions (question side first) followed by the connecting
/// edges as "head relation tail" phrases, all separator-joined.
inline KnowledgeRecord build_knowledge(const std::string& question, const std::string& choice,
                                       const ConceptGraph& graph, const DefinitionStore& defs,
                                       const std::string& separator = "<\\s>") {
    KnowledgeRecord rec;
    rec.question_concept = choose_concept(link_entities(question, graph));
    rec.answer_concept = choose_concept(link_entities(choice, graph));

    if (rec.question_concept) {
        if (const auto* def = defs.find(*rec.question_concept)) rec.definitions.push_back(*def);
    }
    if (rec.answer_concept && rec.answer_concept != rec.question_concept) {
        if (const auto* def = defs.find(*rec.answer_concept)) rec.definitions.push_back(*def);
    }
    if (rec.question_concept && rec.answer_concept)
        rec.relations = find_relations(*rec.question_concept, *rec.answer_concept, graph);

    std::vector<std::string> parts = rec.definitions;
    for (const auto& e : rec.relations)
        parts.push_back(e.head + " " + e.relation + " " + e.tail);
    for (const auto& part : parts) {
        if (!rec.rendered.empty()) rec.rendered += " " + separator + " ";
        rec.rendered += part;
    }
    return rec;
}

/// Adapts a graph + definition store to the pipeline's per-choice knowledge
/// callback.
inline KnowledgeFn make_kg_knowledge_fn(const ConceptGraph& graph, const DefinitionStore& defs,
                                        std::string separator = "<\\s>") {
    return [&graph, &defs, separator = std::move(separator)](const std::string& question,
                                                             const std::string& choice) {
        return build_knowledge(question, choice, graph, defs, separator).rendered;
    };
}

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        const auto tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

}  // namespace detail

/// TSV: "head<TAB>relation<TAB>tail" per edge; a line with a single field
/// adds an edge-less concept. Blank lines are skipped.
inline ConceptGraph load_concept_graph(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is)
        throw IoError("cannot open concept graph '" + path.string() + "'");
    ConceptGraph graph;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_tabs(line);
        const auto bad = [&](const std::string& what) {
            return ValidationError(path.string() + ": line " + std::to_string(line_no) + ": " +
                                   what);
        };
        if (fields.size() == 1) {
            graph.add_concept(fields[0]);
            continue;
        }
        if (fields.size() != 3)
            throw bad("expected 'head<TAB>relation<TAB>tail' or a bare concept");
        if (fields[0].empty() || fields[1].empty() || fields[2].empty())
            throw bad("empty field in edge");
        graph.add_edge(fields[0], fields[1], fields[2]);
    }
    return graph;
}

/// TSV: "concept<TAB>definition" per line; one definition per concept.
inline DefinitionStore load_definitions(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is)
        throw IoError("cannot open definitions '" + path.string() + "'");
    DefinitionStore store;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_tabs(line);
        const auto bad = [&](const std::string& what) {
            return ValidationError(path.string() + ": line " + std::to_string(line_no) + ": " +
                                   what);
        };
        if (fields.size() != 2)
            throw bad("expected 'concept<TAB>definition'");
        if (fields[0].empty() || fields[1].empty())
            throw bad("empty field in definition");
        if (store.defs.count(fields[0]))
            throw bad("duplicate definition for '" + fields[0] + "'");
        store.add(fields[0], fields[1]);
    }
    return store;
}

}  // namespace reina

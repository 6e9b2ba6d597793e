#pragma once

// JSONL dataset ingestion, byte-deterministic augmented output, and the
// language-modeling chunker that turns long texts into (C_i, C_{i+1}) pairs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "reina/error.hpp"
#include "reina/reina_core.hpp"
#include "reina/text_analysis.hpp"

namespace reina {

/// One input line. Unknown fields are kept in `extra` so a read/write cycle
/// does not drop them.
struct DatasetRecord {
    std::string id;
    std::string input;
    std::optional<std::string> label;
    std::vector<std::string> choices;
    std::optional<std::size_t> gold;
    std::optional<std::string> knowledge;
    nlohmann::json extra = nlohmann::json::object();
};

struct ChunkPair {
    std::size_t ordinal = 0;
    std::string context_chunk;  // C_i
    std::string next_chunk;     // C_{i+1}
};

namespace detail {

inline ValidationError line_error(const std::filesystem::path& path, std::size_t line_no,
                                  const std::string& what) {
    return ValidationError(path.string() + ": line " + std::to_string(line_no) + ": " + what);
}

inline std::string padded_ordinal(std::size_t n) {
    std::string digits = std::to_string(n);
    if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
    return digits;
}

/// %.6f without locale surprises; scores are never negative.
inline std::string format_score(double score) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", score);
    return buf;
}

inline std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

inline std::string json_string_array(const std::vector<std::string>& xs) {
    std::string out = "[";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i > 0) out.push_back(',');
        out += json_string(xs[i]);
    }
    out.push_back(']');
    return out;
}

}  // namespace detail

inline std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is)
        throw IoError("cannot open dataset '" + path.string() + "'");

    std::vector<DatasetRecord> records;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw detail::line_error(path, line_no, "malformed JSON");
        if (!j.is_object())
            throw detail::line_error(path, line_no, "expected a JSON object");

        DatasetRecord rec;
        if (j.contains("id")) {
            if (!j["id"].is_string())
                throw detail::line_error(path, line_no, "'id' must be a string");
            rec.id = j["id"].get<std::string>();
        } else {
            rec.id = detail::padded_ordinal(records.size());
        }
        if (!j.contains("input") || !j["input"].is_string())
            throw detail::line_error(path, line_no, "missing string field 'input'");
        rec.input = j["input"].get<std::string>();
        if (j.contains("label")) {
            if (!j["label"].is_string())
                throw detail::line_error(path, line_no, "'label' must be a string");
            rec.label = j["label"].get<std::string>();
        }
        if (j.contains("choices")) {
            if (!j["choices"].is_array())
                throw detail::line_error(path, line_no, "'choices' must be an array");
            for (const auto& c : j["choices"]) {
                if (!c.is_string())
                    throw detail::line_error(path, line_no, "'choices' entries must be strings");
                rec.choices.push_back(c.get<std::string>());
            }
        }
        if (j.contains("gold")) {
            if (!j["gold"].is_number_integer() || j["gold"].get<long long>() < 0)
                throw detail::line_error(path, line_no, "'gold' must be a non-negative integer");
            rec.gold = j["gold"].get<std::size_t>();
        }
        if (j.contains("knowledge")) {
            if (!j["knowledge"].is_string())
                throw detail::line_error(path, line_no, "'knowledge' must be a string");
            rec.knowledge = j["knowledge"].get<std::string>();
        }
        for (const auto& [key, value] : j.items()) {
            if (key == "id" || key == "input" || key == "label" || key == "choices" ||
                key == "gold" || key == "knowledge")
                continue;
            rec.extra[key] = value;
        }

        if (!seen_ids.insert(rec.id).second)
            throw detail::line_error(path, line_no, "duplicate id '" + rec.id + "'");
        records.push_back(std::move(rec));
    }
    return records;
}

inline void write_dataset(const std::filesystem::path& path,
                          const std::vector<DatasetRecord>& records) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw IoError("cannot write dataset '" + path.string() + "'");
    for (const auto& rec : records) {
        nlohmann::json j = rec.extra;
        j["id"] = rec.id;
        j["input"] = rec.input;
        if (rec.label.has_value()) j["label"] = *rec.label;
        if (!rec.choices.empty()) j["choices"] = rec.choices;
        if (rec.gold.has_value()) j["gold"] = *rec.gold;
        if (rec.knowledge.has_value()) j["knowledge"] = *rec.knowledge;
        os << j.dump() << '\n';
    }
    if (!os)
        throw IoError("write failed for dataset '" + path.string() + "'");
}

/// One JSON object per line, keys in alphabetical order, scores at a fixed
/// six decimal places; identical inputs give identical bytes.
inline void write_augmented(const std::filesystem::path& path,
                            const std::vector<AugmentedExample>& examples) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw IoError("cannot write output '" + path.string() + "'");
    for (const auto& ex : examples) {
        os << "{\"combined_text\":" << detail::json_string(ex.combined_text)
           << ",\"dropped_by_overlap\":" << detail::json_string_array(ex.dropped_by_overlap)
           << ",\"id\":" << detail::json_string(ex.id) << ",\"retrieved_ids\":"
           << detail::json_string_array(ex.retrieved_ids) << ",\"retrieved_scores\":[";
        for (std::size_t i = 0; i < ex.retrieved_scores.size(); ++i) {
            if (i > 0) os << ',';
            os << detail::format_score(ex.retrieved_scores[i]);
        }
        os << "],\"task\":" << detail::json_string(task_name(ex.task)) << "}\n";
    }
    if (!os)
        throw IoError("write failed for output '" + path.string() + "'");
}

inline std::vector<AugmentedExample> read_augmented(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is)
        throw IoError("cannot open output '" + path.string() + "'");
    std::vector<AugmentedExample> examples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw detail::line_error(path, line_no, "malformed JSON");
        for (const char* field :
             {"combined_text", "dropped_by_overlap", "id", "retrieved_ids", "retrieved_scores",
              "task"}) {
            if (!j.contains(field))
                throw detail::line_error(path, line_no,
                                         std::string("missing field '") + field + "'");
        }
        AugmentedExample ex;
        ex.id = j["id"].get<std::string>();
        ex.combined_text = j["combined_text"].get<std::string>();
        ex.retrieved_ids = j["retrieved_ids"].get<std::vector<std::string>>();
        ex.retrieved_scores = j["retrieved_scores"].get<std::vector<double>>();
        ex.dropped_by_overlap = j["dropped_by_overlap"].get<std::vector<std::string>>();
        ex.task = task_from_name(j["task"].get<std::string>());
        if (ex.retrieved_ids.size() != ex.retrieved_scores.size())
            throw detail::line_error(path, line_no, "ids/scores length mismatch");
        examples.push_back(std::move(ex));
    }
    return examples;
}

/// Splits the tokenized text into consecutive chunks of exactly
/// chunk_size_words tokens (the final chunk may be short) and pairs each
/// chunk with its successor. A text of up to chunk_size_words tokens has no
/// successor and yields nothing.
inline std::vector<ChunkPair> chunk_text(const std::string& text, int chunk_size_words) {
    if (chunk_size_words < 1)
        throw ValidationError("chunk_text: chunk size must be >= 1");
    const std::size_t size = static_cast<std::size_t>(chunk_size_words);
    const auto toks = tokenize(text).tokens;

    std::vector<std::string> chunks;
    for (std::size_t start = 0; start < toks.size(); start += size) {
        const std::size_t end = std::min(start + size, toks.size());
        TokenStream ts;
        ts.tokens.assign(toks.begin() + static_cast<std::ptrdiff_t>(start),
                         toks.begin() + static_cast<std::ptrdiff_t>(end));
        chunks.push_back(join_tokens(ts));
    }

    std::vector<ChunkPair> pairs;
    for (std::size_t i = 0; i + 1 < chunks.size(); ++i)
        pairs.push_back({i, chunks[i], chunks[i + 1]});
    return pairs;
}

/// Basic record-to-instance mapping. A QA record without an explicit label
/// takes the gold choice as its label.
inline TrainingInstance to_instance(const DatasetRecord& rec) {
    TrainingInstance inst;
    inst.id = rec.id;
    inst.input_x = rec.input;
    inst.choices = rec.choices;
    inst.gold_choice_index = rec.gold;
    inst.knowledge_k = rec.knowledge;
    if (rec.label.has_value()) {
        inst.label_y = *rec.label;
    } else if (rec.gold.has_value() && *rec.gold < rec.choices.size()) {
        inst.label_y = rec.choices[*rec.gold];
    }
    return inst;
}

/// Shapes records into pipeline instances. Language modeling explodes each
/// record into one instance per chunk pair (ids "<id>#c<ordinal>",
/// input = C_i, label = C_{i+1}); every other task maps records one-to-one.
inline std::vector<TrainingInstance> instances_for_task(const std::vector<DatasetRecord>& records,
                                                        TaskKind task, int chunk_size_words) {
    std::vector<TrainingInstance> out;
    if (task != TaskKind::LanguageModeling) {
        out.reserve(records.size());
        for (const auto& rec : records) out.push_back(to_instance(rec));
        return out;
    }
    for (const auto& rec : records) {
        for (const auto& pair : chunk_text(rec.input, chunk_size_words)) {
            TrainingInstance inst;
            inst.id = rec.id + "#c" + std::to_string(pair.ordinal);
            inst.input_x = pair.context_chunk;
            inst.label_y = pair.next_chunk;
            out.push_back(std::move(inst));
        }
    }
    return out;
}

}  // namespace reina

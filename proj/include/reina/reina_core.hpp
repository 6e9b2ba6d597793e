#pragma once

// The retrieve-combine scheme: task-specific keys/values and queries, the
// per-task combination functions, training-time self/overlap filtering, and
// token budgeting. Retrieval itself lives in bm25_index.hpp; nothing here
// touches a model.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "reina/bm25_index.hpp"
#include "reina/error.hpp"
#include "reina/text_analysis.hpp"

namespace reina {

enum class TaskKind {
    Summarization,
    LanguageModeling,
    MachineTranslation,
    MultiChoiceQA,
    MultiChoiceQAWithKnowledge,
};

inline const char* task_name(TaskKind task) {
    switch (task) {
        case TaskKind::Summarization: return "summarization";
        case TaskKind::LanguageModeling: return "lm";
        case TaskKind::MachineTranslation: return "mt";
        case TaskKind::MultiChoiceQA: return "qa";
        case TaskKind::MultiChoiceQAWithKnowledge: return "qak";
    }
    throw ValidationError("unreachable task kind");
}

inline TaskKind task_from_name(const std::string& name) {
    if (name == "summarization") return TaskKind::Summarization;
    if (name == "lm") return TaskKind::LanguageModeling;
    if (name == "mt") return TaskKind::MachineTranslation;
    if (name == "qa") return TaskKind::MultiChoiceQA;
    if (name == "qak") return TaskKind::MultiChoiceQAWithKnowledge;
    throw ValidationError("unknown task '" + name +
                          "' (expected summarization, lm, mt, qa or qak)");
}

inline bool is_qa_task(TaskKind task) {
    return task == TaskKind::MultiChoiceQA || task == TaskKind::MultiChoiceQAWithKnowledge;
}

enum class PipelineMode { Training, Inference };

inline const char* mode_name(PipelineMode mode) {
    return mode == PipelineMode::Training ? "training" : "inference";
}

inline PipelineMode mode_from_name(const std::string& name) {
    if (name == "training") return PipelineMode::Training;
    if (name == "inference") return PipelineMode::Inference;
    throw ValidationError("unknown mode '" + name + "' (expected training or inference)");
}

struct TrainingInstance {
    std::string id;
    std::string input_x;
    std::string label_y;
    std::vector<std::string> choices;                 // QA tasks only
    std::optional<std::size_t> gold_choice_index;     // QA tasks only
    std::optional<std::string> knowledge_k;           // QA-with-knowledge only
};

/// Checks the per-task field invariants; the offending instance id is named
/// in the error message.
inline void validate_instance(TaskKind task, const TrainingInstance& inst) {
    if (!is_qa_task(task)) return;
    if (inst.choices.size() < 2)
        throw ValidationError("instance '" + inst.id + "': QA tasks need at least 2 choices");
    if (!inst.gold_choice_index.has_value())
        throw ValidationError("instance '" + inst.id + "': missing gold choice index");
    if (*inst.gold_choice_index >= inst.choices.size())
        throw ValidationError("instance '" + inst.id + "': gold choice index " +
                              std::to_string(*inst.gold_choice_index) + " out of range");
    if (inst.label_y != inst.choices[*inst.gold_choice_index])
        throw ValidationError("instance '" + inst.id + "': label does not match the gold choice");
    if (task == TaskKind::MultiChoiceQAWithKnowledge && !inst.knowledge_k.has_value())
        throw ValidationError("instance '" + inst.id + "': missing knowledge string");
}

struct PipelineConfig {
    TaskKind task = TaskKind::Summarization;
    int top_k = 5;
    int input_budget_tokens = 600;
    int total_budget_tokens = 1024;
    int lm_context_tokens = 512;
    int overlap_n = 7;
    int overlap_max = 3;  // negative disables the overlap filter
    PipelineMode mode = PipelineMode::Training;
    std::string separator = "<\\s>";

    void validate() const {
        if (top_k < 1 || input_budget_tokens < 1 || total_budget_tokens < 1 ||
            lm_context_tokens < 1 || overlap_n < 1)
            throw ValidationError("pipeline config: all counts must be >= 1");
        if (input_budget_tokens >= total_budget_tokens)
            throw ValidationError("pipeline config: input budget must be below the total budget");
    }
};

struct AugmentedExample {
    std::string id;
    std::string combined_text;
    std::vector<std::string> retrieved_ids;
    std::vector<double> retrieved_scores;
    std::vector<std::string> dropped_by_overlap;
    TaskKind task = TaskKind::Summarization;
};

/// A retrieved training pair as stored in the index payload: x is the
/// original input (kept only for QA tasks), y the label.
struct RetrievedPair {
    std::string x;
    std::string y;
};

struct KeyValue {
    std::string key;
    std::string value;
};

namespace detail {

inline std::string join_nonempty(std::initializer_list<std::string_view> parts) {
    std::string out;
    for (const auto p : parts) {
        if (p.empty()) continue;
        if (!out.empty()) out.push_back(' ');
        out.append(p);
    }
    return out;
}

}  // namespace detail

/// The payload stored as the index value_ref. QA tasks keep the (question,
/// gold answer) pair as a small JSON object so the combination function can
/// emit them separately; the other tasks store the label text as is.
inline std::string encode_payload(TaskKind task, const TrainingInstance& inst) {
    if (!is_qa_task(task)) return inst.label_y;
    nlohmann::json j;
    j["x"] = inst.input_x;
    j["y"] = inst.label_y;
    return j.dump();
}

inline RetrievedPair decode_payload(TaskKind task, const std::string& payload) {
    if (!is_qa_task(task)) return {"", payload};
    const auto j = nlohmann::json::parse(payload, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("x") || !j.contains("y"))
        throw ValidationError("malformed QA payload in index value");
    return {j["x"].get<std::string>(), j["y"].get<std::string>()};
}

/// Task-specific key/value construction for indexing.
inline KeyValue make_key_value(TaskKind task, const TrainingInstance& inst) {
    validate_instance(task, inst);
    switch (task) {
        case TaskKind::Summarization:       // document -> summary
        case TaskKind::LanguageModeling:    // chunk C_i -> next chunk C_{i+1}
        case TaskKind::MachineTranslation:  // source sentence -> target sentence
            return {inst.input_x, inst.label_y};
        case TaskKind::MultiChoiceQA: {
            const auto kv = detail::join_nonempty({inst.input_x, inst.label_y});
            return {kv, kv};
        }
        case TaskKind::MultiChoiceQAWithKnowledge: {
            const auto kv =
                detail::join_nonempty({inst.input_x, inst.label_y, *inst.knowledge_k});
            return {kv, kv};
        }
    }
    throw ValidationError("unreachable task kind");
}

/// Query construction: the bare input for non-QA tasks, input + choice for
/// QA, and input + choice + knowledge for QA with knowledge.
inline TokenStream build_query(TaskKind task, const std::string& input_x,
                               const std::optional<std::string>& choice = std::nullopt,
                               const std::optional<std::string>& knowledge = std::nullopt) {
    if (is_qa_task(task)) {
        if (!choice.has_value())
            throw ValidationError("build_query: QA tasks require a choice");
        if (task == TaskKind::MultiChoiceQAWithKnowledge) {
            if (!knowledge.has_value())
                throw ValidationError("build_query: QA-with-knowledge requires a knowledge string");
            return tokenize(detail::join_nonempty({input_x, *choice, *knowledge}));
        }
        if (knowledge.has_value())
            throw ValidationError("build_query: knowledge is only used with the qak task");
        return tokenize(detail::join_nonempty({input_x, *choice}));
    }
    if (choice.has_value() || knowledge.has_value())
        throw ValidationError("build_query: choice/knowledge are only used with QA tasks");
    return tokenize(input_x);
}

/// Concatenates the (truncated) input with the retrieved segments under the
/// total token budget. Ordering per task: summarization/MT append values,
/// QA appends question+answer pairs after the choice, LM prepends values
/// with rank 1 adjacent to the input. When the budget runs out the current
/// segment is cut to fit and everything after it is dropped.
inline std::string combine(TaskKind task, const std::string& input_x,
                           const std::optional<std::string>& choice,
                           const std::vector<RetrievedPair>& hits, const PipelineConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(hits.size()) > cfg.top_k)
        throw ValidationError("combine: more hits than cfg.top_k");
    if (is_qa_task(task) && !choice.has_value())
        throw ValidationError("combine: QA tasks require a choice");

    const auto sep = tokenize(cfg.separator).tokens;
    const std::size_t budget = static_cast<std::size_t>(cfg.total_budget_tokens);
    const std::size_t input_budget = std::min(
        budget, static_cast<std::size_t>(task == TaskKind::LanguageModeling
                                             ? cfg.lm_context_tokens
                                             : cfg.input_budget_tokens));

    const TokenStream input_ts = truncate_tokens(tokenize(input_x), input_budget);

    // Segments in emission order (for LM this is also fill order; placement
    // is reversed below).
    std::vector<std::vector<Token>> segments;
    if (is_qa_task(task)) segments.push_back(tokenize(*choice).tokens);
    for (const auto& hit : hits) {
        if (is_qa_task(task)) segments.push_back(tokenize(hit.x).tokens);
        segments.push_back(tokenize(hit.y).tokens);
    }

    std::size_t total = input_ts.size();
    std::vector<std::vector<Token>> kept;
    for (auto& seg : segments) {
        if (total + sep.size() + seg.size() <= budget) {
            total += sep.size() + seg.size();
            kept.push_back(std::move(seg));
            continue;
        }
        if (budget > total + sep.size()) {
            const std::size_t room = budget - total - sep.size();
            seg.resize(room);
            total += sep.size() + seg.size();
            kept.push_back(std::move(seg));
        }
        break;  // later segments dropped
    }

    // The separator appears verbatim in the output; segments are re-joined
    // from their (possibly truncated) tokens. Tokenizing the result gives
    // back exactly `total` tokens, so the budget holds at the token level.
    const auto piece_of = [](std::vector<Token> toks) {
        TokenStream ts;
        ts.tokens = std::move(toks);
        return join_tokens(ts);
    };
    std::vector<std::string> pieces;
    if (task == TaskKind::LanguageModeling) {
        for (auto it = kept.rbegin(); it != kept.rend(); ++it) {
            pieces.push_back(piece_of(std::move(*it)));
            pieces.push_back(cfg.separator);
        }
        pieces.push_back(piece_of(input_ts.tokens));
    } else {
        pieces.push_back(piece_of(input_ts.tokens));
        for (auto& seg : kept) {
            pieces.push_back(cfg.separator);
            pieces.push_back(piece_of(std::move(seg)));
        }
    }
    std::string out;
    for (const auto& p : pieces) {
        if (p.empty()) continue;
        if (!out.empty()) out.push_back(' ');
        out.append(p);
    }
    return out;
}

struct ScoredHit {
    std::string doc_id;
    RetrievedPair value;
    double score = 0.0;
};

struct FilterResult {
    std::vector<ScoredHit> kept;
    std::vector<std::string> dropped_by_overlap;
    std::size_t dropped_self = 0;
};

/// Training mode drops the instance itself and any hit whose label shares
/// more than cfg.overlap_max distinct overlap_n-grams with the gold label.
/// Inference mode returns the hits untouched.
inline FilterResult apply_filters(const std::string& inst_id,
                                  const std::optional<std::string>& gold_label,
                                  std::vector<ScoredHit> hits, const PipelineConfig& cfg) {
    FilterResult out;
    if (cfg.mode == PipelineMode::Inference) {
        out.kept = std::move(hits);
        return out;
    }
    if (!gold_label.has_value())
        throw ValidationError("apply_filters: training mode requires the gold label");
    const TokenStream gold_ts = tokenize(*gold_label);
    for (auto& hit : hits) {
        if (hit.doc_id == inst_id) {
            ++out.dropped_self;
            continue;
        }
        if (cfg.overlap_max >= 0) {
            const std::size_t shared =
                ngram_overlap_count(tokenize(hit.value.y), gold_ts, cfg.overlap_n);
            if (shared > static_cast<std::size_t>(cfg.overlap_max)) {
                out.dropped_by_overlap.push_back(hit.doc_id);
                continue;
            }
        }
        out.kept.push_back(std::move(hit));
    }
    return out;
}

/// Per-(question, choice) knowledge source for the qak task; when absent,
/// the instance's own knowledge string is used for every choice.
using KnowledgeFn = std::function<std::string(const std::string& question,
                                              const std::string& choice)>;

struct FilterStats {
    std::size_t filtered_self = 0;
    std::size_t filtered_overlap = 0;
};

/// Runs retrieve -> filter -> combine for one instance. QA tasks produce one
/// example per choice (ids suffixed "#<choice index>"); everything else
/// produces exactly one.
inline std::vector<AugmentedExample> augment_instance(const TrainingInstance& inst,
                                                      const InvertedIndex& index,
                                                      const PipelineConfig& cfg,
                                                      const KnowledgeFn& knowledge_fn = nullptr,
                                                      FilterStats* stats = nullptr) {
    cfg.validate();
    if (cfg.mode == PipelineMode::Training) {
        // Full invariants; with a knowledge callback the instance itself
        // need not carry a knowledge string.
        TaskKind check_as = cfg.task;
        if (check_as == TaskKind::MultiChoiceQAWithKnowledge && knowledge_fn)
            check_as = TaskKind::MultiChoiceQA;
        validate_instance(check_as, inst);
    } else if (is_qa_task(cfg.task)) {
        // Inference may lack label/gold, but still needs choices to query with.
        if (inst.choices.size() < 2)
            throw ValidationError("instance '" + inst.id + "': QA tasks need at least 2 choices");
        if (cfg.task == TaskKind::MultiChoiceQAWithKnowledge && !knowledge_fn &&
            !inst.knowledge_k.has_value())
            throw ValidationError("instance '" + inst.id + "': missing knowledge string");
    }

    const std::optional<std::string> gold =
        cfg.mode == PipelineMode::Training ? std::optional<std::string>(inst.label_y)
                                           : std::nullopt;

    const auto run_one = [&](const std::optional<std::string>& choice,
                             const std::optional<std::string>& knowledge,
                             std::string id) -> AugmentedExample {
        const TokenStream query = build_query(cfg.task, inst.input_x, choice, knowledge);
        const std::size_t fetch = static_cast<std::size_t>(cfg.top_k) * 2;  // filtering reserve
        const auto raw = retrieve(query, fetch, index);
        std::vector<ScoredHit> scored;
        scored.reserve(raw.size());
        for (const auto& hit : raw) {
            scored.push_back(
                {hit.doc_id, decode_payload(cfg.task, index.doc(hit.doc_id).value_ref), hit.score});
        }
        auto filtered = apply_filters(inst.id, gold, std::move(scored), cfg);
        if (filtered.kept.size() > static_cast<std::size_t>(cfg.top_k))
            filtered.kept.resize(static_cast<std::size_t>(cfg.top_k));
        if (stats != nullptr) {
            stats->filtered_self += filtered.dropped_self;
            stats->filtered_overlap += filtered.dropped_by_overlap.size();
        }

        std::vector<RetrievedPair> pairs;
        AugmentedExample out;
        out.id = std::move(id);
        out.task = cfg.task;
        for (auto& hit : filtered.kept) {
            out.retrieved_ids.push_back(hit.doc_id);
            out.retrieved_scores.push_back(hit.score);
            pairs.push_back(std::move(hit.value));
        }
        out.dropped_by_overlap = std::move(filtered.dropped_by_overlap);
        out.combined_text = combine(cfg.task, inst.input_x, choice, pairs, cfg);
        return out;
    };

    if (!is_qa_task(cfg.task)) return {run_one(std::nullopt, std::nullopt, inst.id)};

    std::vector<AugmentedExample> out;
    out.reserve(inst.choices.size());
    for (std::size_t i = 0; i < inst.choices.size(); ++i) {
        std::optional<std::string> knowledge;
        if (cfg.task == TaskKind::MultiChoiceQAWithKnowledge) {
            knowledge = knowledge_fn ? knowledge_fn(inst.input_x, inst.choices[i])
                                     : *inst.knowledge_k;
        }
        out.push_back(run_one(inst.choices[i], knowledge, inst.id + "#" + std::to_string(i)));
    }
    return out;
}

/// Augments a whole dataset with a worker pool. Output order equals input
/// order regardless of worker count, so results are byte-stable.
inline std::pair<std::vector<AugmentedExample>, FilterStats> augment_all(
    const std::vector<TrainingInstance>& instances, const InvertedIndex& index,
    const PipelineConfig& cfg, int workers = 1, const KnowledgeFn& knowledge_fn = nullptr) {
    cfg.validate();
    const std::size_t n = instances.size();
    std::vector<std::vector<AugmentedExample>> slots(n);
    std::vector<FilterStats> stats(n);

    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            slots[i] = augment_instance(instances[i], index, cfg, knowledge_fn, &stats[i]);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    slots[i] = augment_instance(instances[i], index, cfg, knowledge_fn, &stats[i]);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        const int n_threads = std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1)));
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    std::vector<AugmentedExample> flat;
    FilterStats total;
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& ex : slots[i]) flat.push_back(std::move(ex));
        total.filtered_self += stats[i].filtered_self;
        total.filtered_overlap += stats[i].filtered_overlap;
    }
    return {std::move(flat), total};
}

}  // namespace reina

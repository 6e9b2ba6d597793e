// reina: build BM25 indices over labeled training data, inspect retrievals,
// and emit augmented datasets. Exit codes: 0 success, 1 validation/usage
// error, 2 I/O error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reina/bm25_index.hpp"
#include "reina/dataset_io.hpp"
#include "reina/error.hpp"
#include "reina/kg_knowledge.hpp"
#include "reina/reina_core.hpp"
#include "reina/text_analysis.hpp"

namespace {

using namespace reina;

std::string summary_line(const InvertedIndex& index) {
    return "{\"avgdl\":" + detail::format_score(index.avgdl()) +
           ",\"n_docs\":" + std::to_string(index.doc_count()) +
           ",\"vocab\":" + std::to_string(index.vocab_size()) + "}";
}

/// Training corpora must be fully labeled before indexing/augmenting;
/// records map one-to-one onto input lines, so errors can name the line.
void require_labels(const std::vector<DatasetRecord>& records, TaskKind task,
                    const std::filesystem::path& path, bool knowledge_from_kg) {
    if (task == TaskKind::LanguageModeling) return;  // labels come from the chunker
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        const std::string where = path.string() + ": line " + std::to_string(i + 1) + ": ";
        if (is_qa_task(task)) {
            TaskKind check_as = task;
            if (task == TaskKind::MultiChoiceQAWithKnowledge && knowledge_from_kg)
                check_as = TaskKind::MultiChoiceQA;
            try {
                validate_instance(check_as, to_instance(rec));
            } catch (const ValidationError& e) {
                throw ValidationError(where + e.what());
            }
        } else if (!rec.label.has_value()) {
            throw ValidationError(where + "record '" + rec.id + "' has no label");
        }
    }
}

struct KgFixtures {
    std::string edges_path;
    std::string defs_path;

    bool given() const { return !edges_path.empty() || !defs_path.empty(); }

    void check(TaskKind task) const {
        if (!given()) return;
        if (edges_path.empty() || defs_path.empty())
            throw ValidationError("--kg-edges and --kg-defs must be given together");
        if (task != TaskKind::MultiChoiceQAWithKnowledge)
            throw ValidationError("knowledge fixtures only apply to the qak task");
    }
};

struct IndexArgs {
    std::string task;
    std::string input;
    std::string out;
    double k1 = 1.2;
    double b = 0.75;
    int chunk_size = 128;
    KgFixtures kg;
};

struct RetrieveArgs {
    std::string index;
    std::string query;
    int k = 5;
    std::string exclude;
    bool exclude_given = false;
};

struct AugmentArgs {
    std::string task;
    std::string index;
    std::string input;
    std::string out;
    std::string mode = "training";
    int top_k = 5;
    int input_budget = 600;
    int total_budget = 1024;
    int lm_context = 512;
    int overlap_n = 7;
    int overlap_max = 3;
    std::string separator = "<\\s>";
    int chunk_size = 128;
    int workers = 1;
    KgFixtures kg;
};

struct MergeArgs {
    std::vector<std::string> inputs;
    std::string out;
};

void cmd_index(const IndexArgs& args) {
    const TaskKind task = task_from_name(args.task);
    args.kg.check(task);
    const auto records = read_dataset(args.input);
    require_labels(records, task, args.input, args.kg.given());
    auto instances = instances_for_task(records, task, args.chunk_size);

    if (args.kg.given()) {
        const auto graph = load_concept_graph(args.kg.edges_path);
        const auto defs = load_definitions(args.kg.defs_path);
        for (auto& inst : instances)
            inst.knowledge_k = build_knowledge(inst.input_x, inst.label_y, graph, defs).rendered;
    }

    std::vector<IndexedDoc> docs;
    docs.reserve(instances.size());
    for (const auto& inst : instances) {
        const auto kv = make_key_value(task, inst);
        docs.push_back({inst.id, tokenize(kv.key), encode_payload(task, inst)});
    }
    Bm25Params params;
    params.k1 = args.k1;
    params.b = args.b;
    auto index = build_index(docs, params);
    index.set_meta("task", task_name(task));
    save_index(index, args.out);
    std::cout << summary_line(index) << '\n';
}

void cmd_retrieve(const RetrieveArgs& args) {
    const auto index = load_index(args.index);
    std::set<std::string> exclude;
    if (args.exclude_given) exclude.insert(args.exclude);
    const auto hits = retrieve(tokenize(args.query), static_cast<std::size_t>(args.k), index,
                               exclude);

    const auto meta = index.meta();
    const auto task_it = meta.find("task");
    const bool qa_payload =
        task_it != meta.end() && is_qa_task(task_from_name(task_it->second));
    for (const auto& hit : hits) {
        std::string value = index.doc(hit.doc_id).value_ref;
        if (qa_payload) {
            const auto pair = decode_payload(TaskKind::MultiChoiceQA, value);
            value = pair.x + " " + pair.y;
        }
        const auto preview = join_tokens(truncate_tokens(tokenize(value), 30));
        std::cout << "{\"doc_id\":" << detail::json_string(hit.doc_id)
                  << ",\"rank\":" << hit.rank << ",\"score\":" << detail::format_score(hit.score)
                  << ",\"value\":" << detail::json_string(preview) << "}\n";
    }
}

void cmd_augment(const AugmentArgs& args) {
    PipelineConfig cfg;
    cfg.task = task_from_name(args.task);
    cfg.mode = mode_from_name(args.mode);
    cfg.top_k = args.top_k;
    cfg.input_budget_tokens = args.input_budget;
    cfg.total_budget_tokens = args.total_budget;
    cfg.lm_context_tokens = args.lm_context;
    cfg.overlap_n = args.overlap_n;
    cfg.overlap_max = args.overlap_max;
    cfg.separator = args.separator;
    cfg.validate();
    args.kg.check(cfg.task);
    if (args.workers < 1)
        throw ValidationError("--workers must be >= 1");

    const auto index = load_index(args.index);
    const auto meta = index.meta();
    const auto task_it = meta.find("task");
    if (task_it != meta.end() && task_it->second != task_name(cfg.task))
        throw ValidationError("index was built for task '" + task_it->second +
                              "', not '" + task_name(cfg.task) + "'");

    const auto records = read_dataset(args.input);
    if (cfg.mode == PipelineMode::Training)
        require_labels(records, cfg.task, args.input, args.kg.given());
    const auto instances = instances_for_task(records, cfg.task, args.chunk_size);

    ConceptGraph graph;
    DefinitionStore defs;
    KnowledgeFn knowledge_fn;
    if (args.kg.given()) {
        graph = load_concept_graph(args.kg.edges_path);
        defs = load_definitions(args.kg.defs_path);
        knowledge_fn = make_kg_knowledge_fn(graph, defs, cfg.separator);
    }

    std::cerr << "augmenting " << instances.size() << " instances (task=" << task_name(cfg.task)
              << ", mode=" << mode_name(cfg.mode) << ")\n";
    const auto [examples, stats] = augment_all(instances, index, cfg, args.workers, knowledge_fn);
    write_augmented(args.out, examples);
    std::cerr << "{\"filtered_overlap\":" << stats.filtered_overlap
              << ",\"filtered_self\":" << stats.filtered_self
              << ",\"instances\":" << instances.size() << "}\n";
}

void cmd_merge(const MergeArgs& args) {
    std::vector<InvertedIndex> indices;
    indices.reserve(args.inputs.size());
    for (const auto& path : args.inputs) indices.push_back(load_index(path));
    const auto merged = merge_indices(indices);
    save_index(merged, args.out);
    std::cout << summary_line(merged) << '\n';
}

int run(int argc, char** argv) {
    CLI::App app{"BM25 retrieval from training data and task-specific combination"};
    app.require_subcommand(1);

    IndexArgs index_args;
    auto* index_cmd = app.add_subcommand("index", "Build a BM25 index from a training JSONL");
    index_cmd->add_option("--task", index_args.task, "summarization, lm, mt, qa or qak")
        ->required();
    index_cmd->add_option("--input", index_args.input, "training dataset (JSONL)")->required();
    index_cmd->add_option("--out", index_args.out, "index file to write")->required();
    index_cmd->add_option("--k1", index_args.k1, "BM25 k1")->capture_default_str();
    index_cmd->add_option("--b", index_args.b, "BM25 b")->capture_default_str();
    index_cmd->add_option("--chunk-size", index_args.chunk_size,
                          "words per language-modeling chunk")->capture_default_str();
    index_cmd->add_option("--kg-edges", index_args.kg.edges_path,
                          "concept graph TSV (qak only)");
    index_cmd->add_option("--kg-defs", index_args.kg.defs_path, "definitions TSV (qak only)");

    RetrieveArgs retrieve_args;
    auto* retrieve_cmd = app.add_subcommand("retrieve", "Query an index and print hits");
    retrieve_cmd->add_option("--index", retrieve_args.index, "index file")->required();
    retrieve_cmd->add_option("--query", retrieve_args.query, "query text")->required();
    retrieve_cmd->add_option("--k", retrieve_args.k, "number of hits")->capture_default_str();
    auto* exclude_opt =
        retrieve_cmd->add_option("--exclude", retrieve_args.exclude, "doc id to exclude");

    AugmentArgs augment_args;
    auto* augment_cmd = app.add_subcommand("augment", "Write the augmented dataset");
    augment_cmd->add_option("--task", augment_args.task, "summarization, lm, mt, qa or qak")
        ->required();
    augment_cmd->add_option("--index", augment_args.index, "index file")->required();
    augment_cmd->add_option("--input", augment_args.input, "dataset to augment (JSONL)")
        ->required();
    augment_cmd->add_option("--out", augment_args.out, "augmented JSONL to write")->required();
    augment_cmd->add_option("--mode", augment_args.mode, "training or inference")->capture_default_str();
    augment_cmd->add_option("--top-k", augment_args.top_k, "retrieved items kept")->capture_default_str();
    augment_cmd->add_option("--input-budget", augment_args.input_budget,
                            "input tokens kept before combining")->capture_default_str();
    augment_cmd->add_option("--total-budget", augment_args.total_budget,
                            "max tokens in combined_text")->capture_default_str();
    augment_cmd->add_option("--lm-context", augment_args.lm_context,
                            "input tokens kept for the lm task")->capture_default_str();
    augment_cmd->add_option("--overlap-n", augment_args.overlap_n, "n-gram size for the filter")
        ->capture_default_str();
    augment_cmd
        ->add_option("--overlap-max", augment_args.overlap_max,
                     "max shared n-grams before a hit is dropped (negative disables)")
        ->capture_default_str();
    augment_cmd->add_option("--separator", augment_args.separator, "segment separator")
        ->capture_default_str();
    augment_cmd->add_option("--chunk-size", augment_args.chunk_size,
                            "words per language-modeling chunk")
        ->capture_default_str();
    augment_cmd->add_option("--workers", augment_args.workers, "worker threads")
        ->capture_default_str()
        ->envname("REINA_WORKERS");
    augment_cmd->add_option("--kg-edges", augment_args.kg.edges_path,
                            "concept graph TSV (qak only)");
    augment_cmd->add_option("--kg-defs", augment_args.kg.defs_path, "definitions TSV (qak only)");

    MergeArgs merge_args;
    auto* merge_cmd = app.add_subcommand("merge", "Merge indices built with identical params");
    merge_cmd->add_option("--input", merge_args.inputs, "index files to merge")
        ->required()
        ->expected(-1);
    merge_cmd->add_option("--out", merge_args.out, "merged index file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    retrieve_args.exclude_given = exclude_opt->count() > 0;

    try {
        if (*index_cmd) cmd_index(index_args);
        if (*retrieve_cmd) cmd_retrieve(retrieve_args);
        if (*augment_cmd) cmd_augment(augment_args);
        if (*merge_cmd) cmd_merge(merge_args);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }

#include <catch2/catch_amalgamated.hpp>

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "reina/bm25_index.hpp"
#include "reina/reina_core.hpp"
#include "support/helpers.hpp"

using namespace reina;

namespace {

TrainingInstance plain(std::string id, std::string x, std::string y) {
    TrainingInstance inst;
    inst.id = std::move(id);
    inst.input_x = std::move(x);
    inst.label_y = std::move(y);
    return inst;
}

TrainingInstance qa(std::string id, std::string x, std::vector<std::string> choices,
                    std::size_t gold) {
    TrainingInstance inst;
    inst.id = std::move(id);
    inst.input_x = std::move(x);
    inst.choices = std::move(choices);
    inst.gold_choice_index = gold;
    inst.label_y = inst.choices[gold];
    return inst;
}

InvertedIndex index_of(TaskKind task, const std::vector<TrainingInstance>& insts) {
    std::vector<IndexedDoc> docs;
    for (const auto& inst : insts) {
        const auto kv = make_key_value(task, inst);
        docs.push_back({inst.id, tokenize(kv.key), encode_payload(task, inst)});
    }
    return build_index(docs);
}

std::string repeated_words(const std::string& stem, int n) {
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (!out.empty()) out.push_back(' ');
        out += stem + std::to_string(i);
    }
    return out;
}

bool same_example(const AugmentedExample& a, const AugmentedExample& b) {
    return a.id == b.id && a.combined_text == b.combined_text &&
           a.retrieved_ids == b.retrieved_ids && a.retrieved_scores == b.retrieved_scores &&
           a.dropped_by_overlap == b.dropped_by_overlap && a.task == b.task;
}

}  // namespace

TEST_CASE("task and mode names round-trip") {
    for (const auto task :
         {TaskKind::Summarization, TaskKind::LanguageModeling, TaskKind::MachineTranslation,
          TaskKind::MultiChoiceQA, TaskKind::MultiChoiceQAWithKnowledge}) {
        CHECK(task_from_name(task_name(task)) == task);
    }
    CHECK(mode_from_name("training") == PipelineMode::Training);
    CHECK(mode_from_name("inference") == PipelineMode::Inference);
    CHECK_THROWS_AS(task_from_name("qa2"), ValidationError);
    CHECK_THROWS_AS(mode_from_name("train"), ValidationError);
}

TEST_CASE("pipeline config validation") {
    PipelineConfig cfg;
    CHECK_NOTHROW(cfg.validate());

    PipelineConfig zero = cfg;
    zero.top_k = 0;
    CHECK_THROWS_AS(zero.validate(), ValidationError);

    PipelineConfig inverted = cfg;
    inverted.input_budget_tokens = inverted.total_budget_tokens;
    CHECK_THROWS_AS(inverted.validate(), ValidationError);
}

TEST_CASE("make_key_value per task") {
    SECTION("summarization maps document to summary") {
        const auto kv = make_key_value(TaskKind::Summarization, plain("a", "doc text", "sum text"));
        CHECK(kv.key == "doc text");
        CHECK(kv.value == "sum text");
    }
    SECTION("language modeling maps chunk to next chunk") {
        const auto kv = make_key_value(TaskKind::LanguageModeling, plain("a", "c1 c2", "c3 c4"));
        CHECK(kv.key == "c1 c2");
        CHECK(kv.value == "c3 c4");
    }
    SECTION("machine translation maps source to target") {
        const auto kv = make_key_value(TaskKind::MachineTranslation, plain("a", "src", "tgt"));
        CHECK(kv.key == "src");
        CHECK(kv.value == "tgt");
    }
    SECTION("qa concatenates question and gold choice") {
        const auto inst = qa("a", "Q", {"cold room", "warm room"}, 1);
        const auto kv = make_key_value(TaskKind::MultiChoiceQA, inst);
        CHECK(kv.key == "Q warm room");
        CHECK(kv.value == kv.key);
    }
    SECTION("qak appends the knowledge string") {
        auto inst = qa("a", "Q", {"cold room", "warm room"}, 1);
        inst.knowledge_k = "K1 K2";
        const auto kv = make_key_value(TaskKind::MultiChoiceQAWithKnowledge, inst);
        CHECK(kv.key == "Q warm room K1 K2");
        CHECK(kv.value == kv.key);
    }
    SECTION("qa field validation") {
        TrainingInstance bad = plain("b", "Q", "y");
        CHECK_THROWS_AS(make_key_value(TaskKind::MultiChoiceQA, bad), ValidationError);

        auto no_gold = qa("c", "Q", {"u", "v"}, 0);
        no_gold.gold_choice_index.reset();
        CHECK_THROWS_AS(make_key_value(TaskKind::MultiChoiceQA, no_gold), ValidationError);

        auto out_of_range = qa("d", "Q", {"u", "v"}, 0);
        out_of_range.gold_choice_index = 7;
        CHECK_THROWS_AS(make_key_value(TaskKind::MultiChoiceQA, out_of_range), ValidationError);

        auto mismatch = qa("e", "Q", {"u", "v"}, 0);
        mismatch.label_y = "v";
        CHECK_THROWS_AS(make_key_value(TaskKind::MultiChoiceQA, mismatch), ValidationError);

        auto no_knowledge = qa("f", "Q", {"u", "v"}, 0);
        CHECK_THROWS_AS(make_key_value(TaskKind::MultiChoiceQAWithKnowledge, no_knowledge),
                        ValidationError);
    }
}

TEST_CASE("payload encoding keeps qa question and answer recoverable") {
    const auto inst = qa("a", "why is it", {"x", "warm room"}, 1);
    const auto payload = encode_payload(TaskKind::MultiChoiceQA, inst);
    const auto pair = decode_payload(TaskKind::MultiChoiceQA, payload);
    CHECK(pair.x == "why is it");
    CHECK(pair.y == "warm room");

    CHECK(encode_payload(TaskKind::Summarization, plain("b", "d", "s")) == "s");
    CHECK(decode_payload(TaskKind::Summarization, "s").y == "s");
    CHECK(decode_payload(TaskKind::Summarization, "s").x.empty());

    CHECK_THROWS_AS(decode_payload(TaskKind::MultiChoiceQA, "not json"), ValidationError);
    CHECK_THROWS_AS(decode_payload(TaskKind::MultiChoiceQA, R"({"x":"q"})"), ValidationError);
}

TEST_CASE("build_query per task") {
    CHECK(build_query(TaskKind::Summarization, "Doc One").tokens ==
          std::vector<Token>{"doc", "one"});
    CHECK(build_query(TaskKind::MultiChoiceQA, "Q", std::optional<std::string>("c")).tokens ==
          std::vector<Token>{"q", "c"});
    CHECK(build_query(TaskKind::MultiChoiceQAWithKnowledge, "Q", std::optional<std::string>("c"),
                      std::optional<std::string>("K"))
              .tokens == std::vector<Token>{"q", "c", "k"});

    CHECK_THROWS_AS(build_query(TaskKind::MultiChoiceQA, "Q"), ValidationError);
    CHECK_THROWS_AS(build_query(TaskKind::MultiChoiceQAWithKnowledge, "Q",
                                std::optional<std::string>("c")),
                    ValidationError);
    CHECK_THROWS_AS(build_query(TaskKind::Summarization, "Q", std::optional<std::string>("c")),
                    ValidationError);
    CHECK_THROWS_AS(build_query(TaskKind::MultiChoiceQA, "Q", std::optional<std::string>("c"),
                                std::optional<std::string>("K")),
                    ValidationError);
}

TEST_CASE("combine emits task-specific orderings") {
    PipelineConfig cfg;

    SECTION("summarization appends values in rank order") {
        cfg.task = TaskKind::Summarization;
        const std::vector<RetrievedPair> hits{{"", "s1"}, {"", "s2"}};
        CHECK(combine(cfg.task, "a b", std::nullopt, hits, cfg) == "a b <\\s> s1 <\\s> s2");
    }
    SECTION("language modeling prepends with rank 1 adjacent to the input") {
        cfg.task = TaskKind::LanguageModeling;
        CHECK(combine(cfg.task, "c d", std::nullopt, {{"", "p1"}}, cfg) == "p1 <\\s> c d");
        CHECK(combine(cfg.task, "c d", std::nullopt, {{"", "p1"}, {"", "p2"}, {"", "p3"}}, cfg) ==
              "p3 <\\s> p2 <\\s> p1 <\\s> c d");
    }
    SECTION("machine translation appends target-side values only") {
        cfg.task = TaskKind::MachineTranslation;
        CHECK(combine(cfg.task, "src a", std::nullopt, {{"ignored src", "tgt b"}}, cfg) ==
              "src a <\\s> tgt b");
    }
    SECTION("qa appends choice then question-answer pairs") {
        cfg.task = TaskKind::MultiChoiceQA;
        const std::vector<RetrievedPair> hits{{"qa1", "aa1"}, {"qa2", "aa2"}};
        CHECK(combine(cfg.task, "q1 q2", std::optional<std::string>("c1"), hits, cfg) ==
              "q1 q2 <\\s> c1 <\\s> qa1 <\\s> aa1 <\\s> qa2 <\\s> aa2");
    }
    SECTION("zero hits degenerate to the input alone") {
        CHECK(combine(TaskKind::Summarization, "a b", std::nullopt, {}, cfg) == "a b");
        CHECK(combine(TaskKind::LanguageModeling, "a b", std::nullopt, {}, cfg) == "a b");
    }
    SECTION("validation") {
        cfg.top_k = 1;
        CHECK_THROWS_AS(combine(TaskKind::Summarization, "x", std::nullopt,
                                {{"", "a"}, {"", "b"}}, cfg),
                        ValidationError);
        CHECK_THROWS_AS(combine(TaskKind::MultiChoiceQA, "x", std::nullopt, {}, cfg),
                        ValidationError);
    }
}

TEST_CASE("combine budget arithmetic") {
    // 700-token document, five 100-token summaries, defaults 600/1024: the
    // document is cut to 600, four summaries fit whole, the fifth is cut to
    // the 4 tokens of remaining room (each separator itself costs 4 tokens).
    PipelineConfig cfg;
    cfg.task = TaskKind::Summarization;
    const std::string doc = repeated_words("t", 700);
    std::vector<RetrievedPair> hits;
    for (int j = 1; j <= 5; ++j) hits.push_back({"", repeated_words("s" + std::to_string(j) + "x", 100)});

    const std::string combined = combine(cfg.task, doc, std::nullopt, hits, cfg);
    const auto toks = tokenize(combined).tokens;
    REQUIRE(toks.size() == 1024);

    const std::vector<Token> sep_toks{"<", "\\", "s", ">"};
    std::vector<Token> expected;
    for (int i = 0; i < 600; ++i) expected.push_back("t" + std::to_string(i));
    for (int j = 1; j <= 4; ++j) {
        expected.insert(expected.end(), sep_toks.begin(), sep_toks.end());
        for (int i = 0; i < 100; ++i)
            expected.push_back("s" + std::to_string(j) + "x" + std::to_string(i));
    }
    expected.insert(expected.end(), sep_toks.begin(), sep_toks.end());
    for (int i = 0; i < 4; ++i) expected.push_back("s5x" + std::to_string(i));
    CHECK(toks == expected);

    // The first 600 document tokens survive verbatim as the string prefix.
    const std::string prefix = repeated_words("t", 600);
    REQUIRE(combined.size() > prefix.size());
    CHECK(combined.compare(0, prefix.size(), prefix) == 0);
}

TEST_CASE("combine budget edge cases") {
    SECTION("segment cut to a partial fit") {
        PipelineConfig cfg;
        cfg.task = TaskKind::Summarization;
        cfg.input_budget_tokens = 5;
        cfg.total_budget_tokens = 6;
        CHECK(combine(cfg.task, "a", std::nullopt, {{"", "b c d"}}, cfg) == "a <\\s> b");
    }
    SECTION("no room for a separator drops all segments") {
        PipelineConfig cfg;
        cfg.task = TaskKind::Summarization;
        cfg.input_budget_tokens = 5;
        cfg.total_budget_tokens = 6;
        const std::string x = "x1 x2 x3 x4 x5 x6 x7";
        CHECK(combine(cfg.task, x, std::nullopt, {{"", "b c d"}}, cfg) == "x1 x2 x3 x4 x5");
    }
    SECTION("later segments are dropped once one is cut") {
        PipelineConfig cfg;
        cfg.task = TaskKind::Summarization;
        cfg.input_budget_tokens = 2;
        cfg.total_budget_tokens = 8;
        // input 2 + sep 4 + room 2: first segment cut to "b1 b2", second dropped.
        CHECK(combine(cfg.task, "a1 a2", std::nullopt, {{"", "b1 b2 b3"}, {"", "c1"}}, cfg) ==
              "a1 a2 <\\s> b1 b2");
    }
    SECTION("lm input respects the context budget") {
        PipelineConfig cfg;
        cfg.task = TaskKind::LanguageModeling;
        cfg.lm_context_tokens = 3;
        CHECK(combine(cfg.task, "a b c d e f", std::nullopt, {{"", "p1"}}, cfg) ==
              "p1 <\\s> a b c");
    }
}

TEST_CASE("apply_filters") {
    PipelineConfig cfg;
    cfg.mode = PipelineMode::Training;

    SECTION("self hit is removed in training mode") {
        std::vector<ScoredHit> hits{{"self", {"", "v1"}, 2.0}, {"other", {"", "v2"}, 1.0}};
        const auto res = apply_filters("self", std::optional<std::string>("gold"), hits, cfg);
        REQUIRE(res.kept.size() == 1);
        CHECK(res.kept[0].doc_id == "other");
        CHECK(res.dropped_self == 1);
        CHECK(res.dropped_by_overlap.empty());
    }
    SECTION("inference keeps everything including the self hit") {
        cfg.mode = PipelineMode::Inference;
        std::vector<ScoredHit> hits{{"self", {"", "v1"}, 2.0}, {"other", {"", "v2"}, 1.0}};
        const auto res = apply_filters("self", std::nullopt, hits, cfg);
        REQUIRE(res.kept.size() == 2);
        CHECK(res.kept[0].doc_id == "self");
        CHECK(res.dropped_self == 0);
    }
    SECTION("overlap boundary: exactly 3 shared 7-grams kept, 4 dropped") {
        const std::string gold = repeated_words("w", 10);   // 4 distinct 7-grams
        const std::string three = repeated_words("w", 9);   // shares 3 of them
        const std::string four = repeated_words("w", 10);   // shares all 4
        std::vector<ScoredHit> hits{{"h3", {"", three}, 2.0}, {"h4", {"", four}, 1.0}};
        const auto res = apply_filters("q", std::optional<std::string>(gold), hits, cfg);
        REQUIRE(res.kept.size() == 1);
        CHECK(res.kept[0].doc_id == "h3");
        CHECK(res.dropped_by_overlap == std::vector<std::string>{"h4"});
    }
    SECTION("negative overlap_max disables the overlap filter") {
        cfg.overlap_max = -1;
        const std::string gold = repeated_words("w", 10);
        std::vector<ScoredHit> hits{{"h4", {"", gold}, 1.0}};
        const auto res = apply_filters("q", std::optional<std::string>(gold), hits, cfg);
        CHECK(res.kept.size() == 1);
        CHECK(res.dropped_by_overlap.empty());
    }
    SECTION("training mode requires the gold label") {
        CHECK_THROWS_AS(apply_filters("q", std::nullopt, {}, cfg), ValidationError);
    }
    SECTION("kept hits preserve input order") {
        std::vector<ScoredHit> hits{
            {"a", {"", "v1"}, 3.0}, {"b", {"", "v2"}, 2.0}, {"c", {"", "v3"}, 1.0}};
        const auto res = apply_filters("q", std::optional<std::string>("gold"), hits, cfg);
        REQUIRE(res.kept.size() == 3);
        CHECK(res.kept[0].doc_id == "a");
        CHECK(res.kept[2].doc_id == "c");
    }
}

TEST_CASE("augment_instance degenerate zero-hit case") {
    const std::vector<TrainingInstance> corpus{plain("d1", "zebra yak", "about animals"),
                                               plain("d2", "quartz onyx", "about rocks")};
    const auto index = index_of(TaskKind::Summarization, corpus);

    PipelineConfig cfg;
    cfg.task = TaskKind::Summarization;
    cfg.mode = PipelineMode::Training;
    const auto out = augment_instance(plain("q", "ppp qqq", "some label"), index, cfg);
    REQUIRE(out.size() == 1);
    CHECK(out[0].retrieved_ids.empty());
    CHECK(out[0].retrieved_scores.empty());
    CHECK(out[0].combined_text == "ppp qqq");
    CHECK(out[0].id == "q");
    CHECK(out[0].task == TaskKind::Summarization);
}

TEST_CASE("augment_instance self exclusion and mode asymmetry") {
    // d0's key repeats its own tokens, so d0 is its own best match.
    std::vector<TrainingInstance> corpus;
    corpus.push_back(plain("d0", "alpha beta alpha beta", "label zero"));
    corpus.push_back(plain("d1", "alpha beta gamma", "label one"));
    corpus.push_back(plain("d2", "alpha delta", "label two"));
    corpus.push_back(plain("d3", "epsilon zeta", "label three"));
    const auto index = index_of(TaskKind::Summarization, corpus);

    PipelineConfig cfg;
    cfg.task = TaskKind::Summarization;
    cfg.top_k = 3;

    cfg.mode = PipelineMode::Training;
    const auto train = augment_instance(corpus[0], index, cfg);
    REQUIRE(train.size() == 1);
    for (const auto& id : train[0].retrieved_ids) CHECK(id != "d0");

    cfg.mode = PipelineMode::Inference;
    const auto infer = augment_instance(corpus[0], index, cfg);
    REQUIRE(infer.size() == 1);
    REQUIRE_FALSE(infer[0].retrieved_ids.empty());
    CHECK(infer[0].retrieved_ids[0] == "d0");  // exact duplicate ranks first

    // Inference retained hits are a superset of training retained hits.
    const std::set<std::string> infer_ids(infer[0].retrieved_ids.begin(),
                                          infer[0].retrieved_ids.end());
    for (const auto& id : train[0].retrieved_ids) CHECK(infer_ids.count(id) == 1);
}

TEST_CASE("augment_instance fills top_k despite self filtering") {
    // Seven other docs share the query token with distinct tfs, so after the
    // self drop there are still >= top_k candidates in the over-fetched pool.
    std::vector<TrainingInstance> corpus;
    corpus.push_back(plain("self", "omega omega omega", "gold label"));
    for (int i = 0; i < 7; ++i) {
        std::string key = "omega";
        for (int j = 0; j < i; ++j) key += " pad" + std::to_string(j);
        corpus.push_back(plain("n" + std::to_string(i), key, "label " + std::to_string(i)));
    }
    const auto index = index_of(TaskKind::Summarization, corpus);

    PipelineConfig cfg;
    cfg.task = TaskKind::Summarization;
    cfg.mode = PipelineMode::Training;
    const auto out = augment_instance(corpus[0], index, cfg);
    REQUIRE(out.size() == 1);
    CHECK(out[0].retrieved_ids.size() == 5);
    for (const auto& id : out[0].retrieved_ids) CHECK(id != "self");
    for (std::size_t i = 1; i < out[0].retrieved_scores.size(); ++i)
        CHECK(out[0].retrieved_scores[i - 1] >= out[0].retrieved_scores[i]);
}

TEST_CASE("augment_instance produces one example per qa choice") {
    std::vector<TrainingInstance> corpus;
    corpus.push_back(qa("t1", "what melts ice", {"salt", "sand"}, 0));
    corpus.push_back(qa("t2", "what cools tea", {"ice", "fire"}, 0));
    const auto index = index_of(TaskKind::MultiChoiceQA, corpus);

    PipelineConfig cfg;
    cfg.task = TaskKind::MultiChoiceQA;
    cfg.mode = PipelineMode::Inference;

    const auto inst = qa("q9", "what melts snow",
                         {"salt", "sand", "ice", "fire", "wind"}, 0);
    const auto out = augment_instance(inst, index, cfg);
    REQUIRE(out.size() == 5);
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].id == "q9#" + std::to_string(i));
        // Input then choice form the prefix of each per-choice example.
        const std::string prefix = "what melts snow <\\s> " + inst.choices[i];
        CHECK(out[i].combined_text.compare(0, prefix.size(), prefix) == 0);
    }
}

TEST_CASE("augment_instance qa retrieved pairs carry question and answer") {
    std::vector<TrainingInstance> corpus;
    corpus.push_back(qa("t1", "why warm", {"cold room", "warm room"}, 1));
    corpus.push_back(qa("t2", "shiny stone", {"quartz", "slate"}, 0));
    const auto index = index_of(TaskKind::MultiChoiceQA, corpus);

    PipelineConfig cfg;
    cfg.task = TaskKind::MultiChoiceQA;
    cfg.mode = PipelineMode::Inference;
    cfg.top_k = 1;

    const auto out = augment_instance(qa("q", "why warm", {"warm room", "slate"}, 0), index, cfg);
    REQUIRE(out.size() == 2);
    REQUIRE(out[0].retrieved_ids == std::vector<std::string>{"t1"});
    CHECK(out[0].combined_text ==
          "why warm <\\s> warm room <\\s> why warm <\\s> warm room");
}

TEST_CASE("augment_instance qak knowledge sourcing") {
    auto t1 = qa("t1", "why warm", {"cold", "warm"}, 1);
    t1.knowledge_k = "heat rises";
    const auto index = index_of(TaskKind::MultiChoiceQAWithKnowledge, {t1});

    PipelineConfig cfg;
    cfg.task = TaskKind::MultiChoiceQAWithKnowledge;
    cfg.mode = PipelineMode::Training;

    SECTION("instance-level knowledge string") {
        auto inst = qa("q", "why warm", {"cold", "warm"}, 1);
        inst.knowledge_k = "heat rises";
        const auto out = augment_instance(inst, index, cfg);
        CHECK(out.size() == 2);
    }
    SECTION("per-choice knowledge callback replaces the field") {
        const auto inst = qa("q", "why warm", {"cold", "warm"}, 1);  // no knowledge_k
        std::vector<std::string> seen;
        const KnowledgeFn fn = [&](const std::string& question, const std::string& choice) {
            seen.push_back(question + "|" + choice);
            return std::string("heat rises");
        };
        const auto out = augment_instance(inst, index, cfg, fn);
        CHECK(out.size() == 2);
        CHECK(seen == std::vector<std::string>{"why warm|cold", "why warm|warm"});
    }
    SECTION("missing knowledge everywhere is an error") {
        const auto inst = qa("q", "why warm", {"cold", "warm"}, 1);
        CHECK_THROWS_AS(augment_instance(inst, index, cfg), ValidationError);
    }
}

TEST_CASE("augment_instance inference mode tolerates missing labels") {
    const auto index =
        index_of(TaskKind::MultiChoiceQA, {qa("t1", "why warm", {"cold", "warm"}, 1)});
    PipelineConfig cfg;
    cfg.task = TaskKind::MultiChoiceQA;
    cfg.mode = PipelineMode::Inference;

    TrainingInstance inst;
    inst.id = "q";
    inst.input_x = "why warm";
    inst.choices = {"cold", "warm"};  // no gold index, no label
    CHECK(augment_instance(inst, index, cfg).size() == 2);

    cfg.mode = PipelineMode::Training;
    CHECK_THROWS_AS(augment_instance(inst, index, cfg), ValidationError);
}

TEST_CASE("augment_all matches per-instance augmentation and is worker-stable") {
    test_support::CorpusGen gen(20260825);
    const auto text = [&](std::size_t vocab, std::size_t lo, std::size_t hi) {
        std::string out;
        for (const auto& t : gen.sentence(vocab, lo, hi)) {
            if (!out.empty()) out.push_back(' ');
            out += t;
        }
        return out;
    };
    std::vector<TrainingInstance> corpus;
    for (int i = 0; i < 40; ++i)
        corpus.push_back(plain("d" + std::to_string(i), text(30, 4, 12), text(30, 3, 8)));
    const auto index = index_of(TaskKind::Summarization, corpus);

    PipelineConfig cfg;
    cfg.task = TaskKind::Summarization;
    cfg.mode = PipelineMode::Training;
    cfg.top_k = 3;

    const auto [serial, serial_stats] = augment_all(corpus, index, cfg, 1);
    const auto [parallel, parallel_stats] = augment_all(corpus, index, cfg, 4);

    REQUIRE(serial.size() == corpus.size());
    REQUIRE(parallel.size() == serial.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(same_example(serial[i], parallel[i]));
        CHECK(serial[i].id == corpus[i].id);
        const auto one = augment_instance(corpus[i], index, cfg);
        REQUIRE(one.size() == 1);
        CHECK(same_example(serial[i], one[0]));
    }
    CHECK(serial_stats.filtered_self == parallel_stats.filtered_self);
    CHECK(serial_stats.filtered_overlap == parallel_stats.filtered_overlap);
    // Every instance whose key tokens appear anywhere else still never
    // retrieves itself.
    for (const auto& ex : serial)
        for (const auto& id : ex.retrieved_ids) CHECK(id != ex.id);
}

TEST_CASE("augment_all propagates worker errors") {
    const auto index =
        index_of(TaskKind::MultiChoiceQA, {qa("t1", "why warm", {"cold", "warm"}, 1)});
    PipelineConfig cfg;
    cfg.task = TaskKind::MultiChoiceQA;
    cfg.mode = PipelineMode::Training;

    std::vector<TrainingInstance> batch;
    for (int i = 0; i < 8; ++i) batch.push_back(qa("g" + std::to_string(i), "why warm", {"cold", "warm"}, 1));
    batch.push_back(plain("bad", "why warm", "no choices at all"));

    CHECK_THROWS_AS(augment_all(batch, index, cfg, 4), ValidationError);
    CHECK_THROWS_AS(augment_all(batch, index, cfg, 1), ValidationError);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <unordered_set>

#include "gvlab/tasks.hpp"

using namespace gvlab;

namespace {

struct DefaultWorld {
    Vocab vocab = build_vocab(120, 30);
    Taxonomy tax = generate_taxonomy(vocab, 7, 120, 30, 4);
};

}  // namespace

TEST_CASE("taxonomy generation is deterministic under seed") {
    Vocab v = build_vocab(120, 30);
    Taxonomy a = generate_taxonomy(v, 7, 120, 30, 4);
    Taxonomy b = generate_taxonomy(v, 7, 120, 30, 4);
    CHECK(a.internal_parent == b.internal_parent);
    CHECK(a.leaf_parent == b.leaf_parent);
    Taxonomy c = generate_taxonomy(v, 8, 120, 30, 4);
    CHECK(a.leaf_parent != c.leaf_parent);
}

TEST_CASE("single internal node gives a star tree") {
    Vocab v = build_vocab(10, 1);
    Taxonomy t = generate_taxonomy(v, 1, 10, 1, 4);
    for (int leaf = 0; leaf < 10; ++leaf) {
        auto anc = t.ancestors(leaf);
        REQUIRE(anc.size() == 1);
        CHECK(anc[0] == 0);
    }
}

TEST_CASE("default taxonomy: every leaf has 1..4 ancestors, internals have >= 2 children") {
    DefaultWorld w;
    std::vector<int> children(30, 0);
    for (int i = 1; i < w.tax.n_internal(); ++i) children[static_cast<size_t>(w.tax.internal_parent[static_cast<size_t>(i)])]++;
    for (int leaf = 0; leaf < w.tax.n_leaves(); ++leaf) {
        const auto anc = w.tax.ancestors(leaf);
        CHECK(anc.size() >= 1);
        CHECK(anc.size() <= 4);
        children[static_cast<size_t>(w.tax.leaf_parent[static_cast<size_t>(leaf)])]++;
    }
    for (int i = 0; i < 30; ++i) CHECK(children[static_cast<size_t>(i)] >= 2);
}

TEST_CASE("infeasible taxonomy parameters error out") {
    Vocab v = build_vocab(4, 3);
    CHECK_THROWS_AS(generate_taxonomy(v, 0, 4, 3, 1), std::invalid_argument);   // branching < 2
    CHECK_THROWS_AS(generate_taxonomy(v, 0, 1, 1, 2), std::invalid_argument);   // n_leaves < branching
    CHECK_THROWS_AS(generate_taxonomy(v, 0, 4, 3, 2), std::invalid_argument);   // leaves < 2*internal
}

TEST_CASE("make_instances: labels agree with ancestry, instances unique") {
    // A taxonomy large enough for 500 distinct positive pairs.
    Vocab v = build_vocab(240, 40);
    Taxonomy t = generate_taxonomy(v, 3, 240, 40, 4);
    auto instances = make_instances(t, TaskKind::kHypernymy, 500, 500, 0.5, 11);
    CHECK(instances.size() == 1000);
    std::set<std::tuple<int, int, bool>> uniq;
    int n_pos = 0;
    for (const auto& inst : instances) {
        CHECK(uniq.insert({inst.leaf, inst.internal, inst.positive}).second);
        CHECK(inst.positive == t.is_ancestor(inst.leaf, inst.internal));
        n_pos += inst.positive ? 1 : 0;
    }
    CHECK(n_pos == 500);
}

TEST_CASE("make_instances rejects infeasible requests") {
    DefaultWorld w;
    CHECK_THROWS(make_instances(w.tax, TaskKind::kHypernymy, 100000, 0, 0.5, 1));
    CHECK_THROWS(make_instances(w.tax, TaskKind::kCloze, 10, 10, 0.5, 1));  // positives-only task
    CHECK_THROWS(make_instances(w.tax, TaskKind::kHypernymy, 10, 10, 1.5, 1));
}

TEST_CASE("hardness monotonicity: mean negative distance non-increasing") {
    DefaultWorld w;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        double prev_mean = 1e9;
        for (double hardness : {0.0, 0.5, 1.0}) {
            auto instances = make_instances(w.tax, TaskKind::kHypernymy, 10, 200, hardness, seed);
            double total = 0.0;
            int n = 0;
            for (const auto& inst : instances) {
                if (inst.positive) continue;
                total += w.tax.tree_distance(inst.leaf, inst.internal);
                ++n;
            }
            const double mean = total / n;
            CHECK(mean <= prev_mean + 1e-9);
            prev_mean = mean;
        }
    }
}

TEST_CASE("qa instances use the unique direct parent") {
    DefaultWorld w;
    auto instances = make_instances(w.tax, TaskKind::kQa, 50, 0, 0.0, 5);
    for (const auto& inst : instances) {
        CHECK(inst.positive);
        CHECK(inst.internal == w.tax.leaf_parent[static_cast<size_t>(inst.leaf)]);
    }
}

TEST_CASE("render_prompts: markers, variants, multi-token answers") {
    DefaultWorld w;
    auto instances = make_instances(w.tax, TaskKind::kHypernymy, 5, 5, 0.0, 2);
    auto templates = task_templates(TaskKind::kHypernymy);
    const TaskInstance& inst = instances[0];

    auto r = render_prompts(w.vocab, templates[0], inst, 32);
    // Generator prompt ends with the kind-of marker.
    CHECK(w.vocab.token(r.x_g.back()) == "of");
    CHECK(r.x_g.front() == w.vocab.bos_id);
    CHECK(r.answer_first_token == inst.y_tokens[0]);

    auto r1 = render_prompts(w.vocab, templates[1], inst, 32);
    CHECK(r.x_g != r1.x_g);
    CHECK(r.answer_first_token == r1.answer_first_token);

    // Multi-token answer: the reported id is the first token only.
    TaskInstance multi = inst;
    multi.y_tokens = {inst.y_tokens[0], w.vocab.id("now")};
    auto rm = render_prompts(w.vocab, templates[0], multi, 32);
    CHECK(rm.answer_first_token == inst.y_tokens[0]);

    CHECK_THROWS_AS(render_prompts(w.vocab, templates[0], inst, 6), std::invalid_argument);
}

TEST_CASE("corpus: deterministic, mixture weight 0 has no validator lines") {
    DefaultWorld w;
    auto instances = make_instances(w.tax, TaskKind::kHypernymy, 100, 100, 0.5, 3);
    auto templates = task_templates(TaskKind::kHypernymy);
    GapConfig cfg;
    cfg.n_lines = 500;
    cfg.seed = 21;
    auto c1 = build_pretraining_corpus(w.vocab, w.tax, instances, templates, cfg);
    auto c2 = build_pretraining_corpus(w.vocab, w.tax, instances, templates, cfg);
    CHECK(c1 == c2);
    CHECK(c1.size() == 500);

    std::unordered_set<int> yesno(w.vocab.yes_set.begin(), w.vocab.yes_set.end());
    yesno.insert(w.vocab.no_set.begin(), w.vocab.no_set.end());

    cfg.validator_mix = 0.0;
    auto gen_only = build_pretraining_corpus(w.vocab, w.tax, instances, templates, cfg);
    for (const auto& line : gen_only) {
        for (int tok : line) CHECK(!yesno.count(tok));
    }

    cfg.validator_mix = 1.0;
    auto val_only = build_pretraining_corpus(w.vocab, w.tax, instances, templates, cfg);
    for (const auto& line : val_only) CHECK(yesno.count(line.back()));
}

TEST_CASE("random split produces the requested sizes") {
    Vocab v = build_vocab(240, 40);
    Taxonomy t = generate_taxonomy(v, 3, 240, 40, 4);
    auto instances = make_instances(t, TaskKind::kHypernymy, 500, 500, 0.5, 11);
    SplitSpec spec;
    spec.strategy = SplitSpec::Strategy::kRandom;
    spec.train_fraction = 0.75;
    spec.seed = 4;
    auto r = split(instances, spec);
    CHECK(r.train.size() == 750);
    CHECK(r.test.size() == 250);
    CHECK(r.dropped == 0);
}

TEST_CASE("no-answer-overlap split: answer sets disjoint") {
    DefaultWorld w;
    auto instances = make_instances(w.tax, TaskKind::kHypernymy, 250, 250, 0.5, 9);
    SplitSpec spec;
    spec.strategy = SplitSpec::Strategy::kNoAnswerOverlap;
    spec.seed = 13;
    auto r = split(instances, spec);
    CHECK(!r.train.empty());
    CHECK(!r.test.empty());
    std::unordered_set<int> train_answers, test_answers;
    for (const auto& i : r.train) train_answers.insert(i.y_tokens[0]);
    for (const auto& i : r.test) test_answers.insert(i.y_tokens[0]);
    for (int a : test_answers) CHECK(!train_answers.count(a));
}

TEST_CASE("no-overlap split: subject and answer sets disjoint, drops bounded") {
    DefaultWorld w;
    auto instances = make_instances(w.tax, TaskKind::kHypernymy, 300, 300, 0.5, 17);
    SplitSpec spec;
    spec.strategy = SplitSpec::Strategy::kNoOverlap;
    spec.seed = 29;
    spec.train_fraction = 0.5;
    auto r = split(instances, spec);
    CHECK(!r.train.empty());
    CHECK(!r.test.empty());
    std::unordered_set<int> train_answers, test_answers, train_subjects, test_subjects;
    for (const auto& i : r.train) {
        train_answers.insert(i.y_tokens[0]);
        train_subjects.insert(i.z_tokens[0]);
    }
    for (const auto& i : r.test) {
        test_answers.insert(i.y_tokens[0]);
        test_subjects.insert(i.z_tokens[0]);
    }
    for (int a : test_answers) CHECK(!train_answers.count(a));
    for (int z : test_subjects) CHECK(!train_subjects.count(z));
    // Dropped fraction stays small on the default taxonomy.
    CHECK(static_cast<double>(r.dropped) / 600.0 <= 0.20);
}

TEST_CASE("serialization round trips") {
    DefaultWorld w;
    auto instances = make_instances(w.tax, TaskKind::kHypernymy, 40, 40, 0.5, 23);
    SplitSpec spec;
    auto r = split(instances, spec);
    const auto dir = std::filesystem::temp_directory_path() / "gvlab_tasks_test";
    std::filesystem::create_directories(dir);

    save_vocab((dir / "vocab.txt").string(), w.vocab);
    Vocab v2 = load_vocab((dir / "vocab.txt").string());
    CHECK(v2.tokens == w.vocab.tokens);
    CHECK(v2.yes_set == w.vocab.yes_set);
    CHECK(v2.no_set == w.vocab.no_set);
    CHECK(v2.bos_id == w.vocab.bos_id);

    save_taxonomy((dir / "tax.txt").string(), w.tax, w.vocab);
    Taxonomy t2 = load_taxonomy((dir / "tax.txt").string(), v2);
    CHECK(t2.internal_parent == w.tax.internal_parent);
    CHECK(t2.leaf_parent == w.tax.leaf_parent);
    CHECK(t2.leaf_token == w.tax.leaf_token);

    save_instances((dir / "inst.txt").string(), r.train, r.test, w.vocab);
    auto [train2, test2] = load_instances((dir / "inst.txt").string(), v2, t2);
    REQUIRE(train2.size() == r.train.size());
    REQUIRE(test2.size() == r.test.size());
    for (size_t i = 0; i < train2.size(); ++i) {
        CHECK(train2[i].z_tokens == r.train[i].z_tokens);
        CHECK(train2[i].y_tokens == r.train[i].y_tokens);
        CHECK(train2[i].positive == r.train[i].positive);
        CHECK(train2[i].leaf == r.train[i].leaf);
        CHECK(train2[i].internal == r.train[i].internal);
    }

    GapConfig cfg;
    cfg.n_lines = 50;
    auto corpus = build_pretraining_corpus(w.vocab, w.tax, instances, task_templates(TaskKind::kHypernymy), cfg);
    save_corpus((dir / "corpus.txt").string(), corpus);
    auto corpus2 = load_corpus((dir / "corpus.txt").string());
    CHECK(corpus2 == corpus);

    std::filesystem::remove_all(dir);
}

TEST_CASE("tree distance sanity") {
    // Root(c0) with internal child c1; leaves l0 under c1, l1 under c0.
    Vocab v = build_vocab(4, 2);
    Taxonomy t;
    t.internal_parent = {-1, 0};
    t.leaf_parent = {1, 0, 1, 0};
    for (int i = 0; i < 4; ++i) t.leaf_token.push_back(v.id("n00" + std::to_string(i)));
    t.internal_token = {v.id("c00"), v.id("c01")};
    CHECK(t.tree_distance(0, 1) == 1);  // leaf to its parent
    CHECK(t.tree_distance(0, 0) == 2);  // leaf to the root through its parent
    CHECK(t.tree_distance(1, 1) == 2);  // l1 -> c0 -> c1
    CHECK(t.is_ancestor(0, 0));
    CHECK(!t.is_ancestor(1, 1));
}

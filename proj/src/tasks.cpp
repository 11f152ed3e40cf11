#include "gvlab/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace gvlab {

namespace {

constexpr int kMaxInternalDepth = 4;

const char* kYesVariants[] = {"Yes", "yes", "YES", "yep"};
const char* kNoVariants[] = {"No", "no", "NO", "nah"};

// Function/template tokens shared by all task templates.
const char* kFunctionTokens[] = {
    "a",    "is",   "kind",  "of",   "do",   "you",   "think", "are", "?",    "answer",
    ":",    "it",   "true",  "that", "i",    "love",  "and",   "other", "in", "your",
    "view", "the",  "met",   ".",    "next", "comes", "once",  "saw", "question", "what",
    "tell", "me",   "would", "say",  "so",   "very",  "much",  "many", "now", "then",
};

std::string leaf_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "n%03d", i);
    return buf;
}

std::string internal_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "c%02d", i);
    return buf;
}

}  // namespace

const char* task_name(TaskKind k) {
    switch (k) {
        case TaskKind::kHypernymy: return "hypernymy";
        case TaskKind::kCloze: return "cloze";
        case TaskKind::kQa: return "qa";
    }
    return "?";
}

TaskKind task_from_name(const std::string& name) {
    if (name == "hypernymy") return TaskKind::kHypernymy;
    if (name == "cloze") return TaskKind::kCloze;
    if (name == "qa") return TaskKind::kQa;
    throw std::invalid_argument("unknown task \"" + name + "\"");
}

SplitSpec::Strategy split_strategy_from_name(const std::string& name) {
    if (name == "random") return SplitSpec::Strategy::kRandom;
    if (name == "no-answer-overlap") return SplitSpec::Strategy::kNoAnswerOverlap;
    if (name == "no-overlap") return SplitSpec::Strategy::kNoOverlap;
    throw std::invalid_argument("unknown split strategy \"" + name + "\"");
}

const char* split_strategy_name(SplitSpec::Strategy s) {
    switch (s) {
        case SplitSpec::Strategy::kRandom: return "random";
        case SplitSpec::Strategy::kNoAnswerOverlap: return "no-answer-overlap";
        case SplitSpec::Strategy::kNoOverlap: return "no-overlap";
    }
    return "?";
}

std::vector<int> Taxonomy::ancestors(int leaf) const {
    std::vector<int> chain;
    int node = leaf_parent.at(static_cast<size_t>(leaf));
    while (node >= 0) {
        chain.push_back(node);
        node = internal_parent[static_cast<size_t>(node)];
    }
    return chain;
}

bool Taxonomy::is_ancestor(int leaf, int internal) const {
    for (int a : ancestors(leaf)) {
        if (a == internal) return true;
    }
    return false;
}

int Taxonomy::internal_depth(int internal) const {
    int d = 1;
    int node = internal_parent.at(static_cast<size_t>(internal));
    while (node >= 0) {
        ++d;
        node = internal_parent[static_cast<size_t>(node)];
    }
    return d;
}

int Taxonomy::tree_distance(int leaf, int internal) const {
    // Climb both chains to the root and meet at the deepest common node.
    std::vector<int> chain_z = ancestors(leaf);
    std::vector<int> chain_y;
    int node = internal;
    while (node >= 0) {
        chain_y.push_back(node);
        node = internal_parent[static_cast<size_t>(node)];
    }
    for (size_t i = 0; i < chain_z.size(); ++i) {
        for (size_t j = 0; j < chain_y.size(); ++j) {
            if (chain_z[i] == chain_y[j]) {
                return static_cast<int>(1 + i + j);
            }
        }
    }
    throw std::logic_error("tree_distance: chains never met at the root");
}

Vocab build_vocab(int n_leaves, int n_internal) {
    Vocab v;
    v.bos_id = v.add("<bos>");
    v.pad_id = v.add("<pad>");
    for (const char* t : kYesVariants) v.yes_set.push_back(v.add(t));
    for (const char* t : kNoVariants) v.no_set.push_back(v.add(t));
    for (const char* t : kFunctionTokens) v.add(t);
    for (int i = 0; i < n_leaves; ++i) v.add(leaf_name(i));
    for (int i = 0; i < n_internal; ++i) v.add(internal_name(i));
    return v;
}

Taxonomy generate_taxonomy(const Vocab& vocab, uint64_t seed, int n_leaves, int n_internal, int branching) {
    if (branching < 2) throw std::invalid_argument("generate_taxonomy: branching must be >= 2");
    if (n_leaves < branching) throw std::invalid_argument("generate_taxonomy: n_leaves must be >= branching");
    if (n_internal < 1) throw std::invalid_argument("generate_taxonomy: need at least one internal node");
    if (n_leaves < 2 * n_internal) {
        throw std::invalid_argument("generate_taxonomy: need n_leaves >= 2*n_internal so every internal node "
                                    "can take two leaf children");
    }
    std::mt19937_64 rng(seed);
    Taxonomy tax;
    tax.internal_parent.assign(static_cast<size_t>(n_internal), -1);
    std::vector<int> depth(static_cast<size_t>(n_internal), 1);
    std::vector<int> internal_children(static_cast<size_t>(n_internal), 0);
    for (int i = 1; i < n_internal; ++i) {
        std::vector<int> candidates;
        for (int j = 0; j < i; ++j) {
            if (depth[static_cast<size_t>(j)] < kMaxInternalDepth &&
                internal_children[static_cast<size_t>(j)] < branching) {
                candidates.push_back(j);
            }
        }
        if (candidates.empty()) {
            throw std::invalid_argument("generate_taxonomy: no internal slot left; raise branching");
        }
        std::uniform_int_distribution<size_t> pick(0, candidates.size() - 1);
        const int parent = candidates[pick(rng)];
        tax.internal_parent[static_cast<size_t>(i)] = parent;
        depth[static_cast<size_t>(i)] = depth[static_cast<size_t>(parent)] + 1;
        internal_children[static_cast<size_t>(parent)] += 1;
    }

    // Two leaves per internal node first, so each has >= 2 children; the rest
    // spread uniformly.
    std::vector<int> parents;
    parents.reserve(static_cast<size_t>(n_leaves));
    for (int i = 0; i < n_internal; ++i) {
        parents.push_back(i);
        parents.push_back(i);
    }
    std::uniform_int_distribution<int> any_internal(0, n_internal - 1);
    while (static_cast<int>(parents.size()) < n_leaves) parents.push_back(any_internal(rng));
    std::shuffle(parents.begin(), parents.end(), rng);
    tax.leaf_parent = std::move(parents);

    tax.leaf_token.resize(static_cast<size_t>(n_leaves));
    for (int i = 0; i < n_leaves; ++i) tax.leaf_token[static_cast<size_t>(i)] = vocab.id(leaf_name(i));
    tax.internal_token.resize(static_cast<size_t>(n_internal));
    for (int i = 0; i < n_internal; ++i) tax.internal_token[static_cast<size_t>(i)] = vocab.id(internal_name(i));
    return tax;
}

namespace {

struct PairKey {
    int task, leaf, internal, positive;
    bool operator<(const PairKey& o) const {
        return std::tie(task, leaf, internal, positive) < std::tie(o.task, o.leaf, o.internal, o.positive);
    }
};

// Sharpness of the hardness dial; weight(y) = exp(-hardness * k * distance).
constexpr double kHardnessSharpness = 1.5;

}  // namespace

std::vector<TaskInstance> make_instances(const Taxonomy& tax, TaskKind kind, int n_pos, int n_neg,
                                         double hardness, uint64_t seed) {
    if (hardness < 0.0 || hardness > 1.0) throw std::invalid_argument("make_instances: hardness outside [0,1]");
    if (n_pos < 0 || n_neg < 0) throw std::invalid_argument("make_instances: negative counts");
    if (kind != TaskKind::kHypernymy && n_neg > 0) {
        throw std::invalid_argument("make_instances: " + std::string(task_name(kind)) + " is positives-only");
    }
    std::mt19937_64 rng(seed);
    std::vector<TaskInstance> out;
    std::set<PairKey> seen;

    auto push_unique = [&](TaskInstance inst) {
        PairKey key{static_cast<int>(inst.task), inst.leaf, inst.internal, inst.positive ? 1 : 0};
        if (!seen.insert(key).second) return false;
        out.push_back(std::move(inst));
        return true;
    };

    // Positive pool: every (leaf, ancestor) pair; qa keeps only the direct parent.
    std::vector<std::pair<int, int>> pos_pool;
    for (int leaf = 0; leaf < tax.n_leaves(); ++leaf) {
        if (kind == TaskKind::kQa) {
            pos_pool.emplace_back(leaf, tax.leaf_parent[static_cast<size_t>(leaf)]);
        } else {
            for (int a : tax.ancestors(leaf)) pos_pool.emplace_back(leaf, a);
        }
    }
    if (static_cast<int>(pos_pool.size()) < n_pos) {
        throw std::invalid_argument("make_instances: only " + std::to_string(pos_pool.size()) +
                                    " distinct positive pairs available, need " + std::to_string(n_pos));
    }
    std::shuffle(pos_pool.begin(), pos_pool.end(), rng);

    std::uniform_int_distribution<int> any_leaf(0, tax.n_leaves() - 1);
    for (int i = 0; i < n_pos; ++i) {
        const auto [leaf, internal] = pos_pool[static_cast<size_t>(i)];
        TaskInstance inst;
        inst.task = kind;
        inst.positive = true;
        inst.leaf = leaf;
        inst.internal = internal;
        inst.z_tokens = {tax.leaf_token[static_cast<size_t>(leaf)]};
        if (kind == TaskKind::kCloze) {
            int other = any_leaf(rng);
            while (other == leaf) other = any_leaf(rng);
            inst.z_tokens.push_back(tax.leaf_token[static_cast<size_t>(other)]);
        }
        inst.y_tokens = {tax.internal_token[static_cast<size_t>(internal)]};
        push_unique(std::move(inst));
    }

    if (n_neg > 0) {
        const long long attempts_budget = 200LL * n_neg;
        long long attempts = 0;
        int made = 0;
        while (made < n_neg) {
            if (++attempts > attempts_budget) {
                throw std::runtime_error("make_instances: could not find " + std::to_string(n_neg) +
                                         " distinct negatives (got " + std::to_string(made) + ")");
            }
            const int leaf = any_leaf(rng);
            std::vector<int> candidates;
            std::vector<double> weights;
            for (int internal = 0; internal < tax.n_internal(); ++internal) {
                if (tax.is_ancestor(leaf, internal)) continue;
                candidates.push_back(internal);
                weights.push_back(std::exp(-hardness * kHardnessSharpness *
                                           static_cast<double>(tax.tree_distance(leaf, internal))));
            }
            if (candidates.empty()) continue;
            std::discrete_distribution<size_t> pick(weights.begin(), weights.end());
            const int internal = candidates[pick(rng)];
            TaskInstance inst;
            inst.task = kind;
            inst.positive = false;
            inst.leaf = leaf;
            inst.internal = internal;
            inst.z_tokens = {tax.leaf_token[static_cast<size_t>(leaf)]};
            inst.y_tokens = {tax.internal_token[static_cast<size_t>(internal)]};
            if (push_unique(std::move(inst))) ++made;
        }
    }
    return out;
}

std::vector<PromptTemplatePair> task_templates(TaskKind kind) {
    auto tokens = [](const char* s) {
        std::vector<std::string> out;
        std::istringstream is(s);
        std::string tok;
        while (is >> tok) out.push_back(tok);
        return out;
    };
    switch (kind) {
        case TaskKind::kHypernymy:
            return {
                {"hyper-base", tokens("a {z0} is a kind of"), tokens("do you think {z0} are {y} ? answer :")},
                {"hyper-v1", tokens("{z0} is a kind of"), tokens("is it true that {z0} are {y} ? answer :")},
                {"hyper-v2", tokens("i love {z0} and other"), tokens("in your view are {z0} {y} ? answer :")},
            };
        case TaskKind::kCloze:
            return {
                {"cloze-base", tokens("the {z0} and the {z1} met . the {z0} is a"),
                 tokens("the {z0} and the {z1} met . the {z0} is a {y} ? answer :")},
                {"cloze-v1", tokens("once the {z0} saw the {z1} . that {z0} is a"),
                 tokens("once the {z0} saw the {z1} . that {z0} is a {y} ? answer :")},
            };
        case TaskKind::kQa:
            return {
                {"qa-base", tokens("question : what is the {z0} ? answer :"),
                 tokens("would you say the {z0} is a {y} ? answer :")},
                {"qa-v1", tokens("tell me what the {z0} is :"),
                 tokens("is the {z0} a {y} ? answer :")},
            };
    }
    throw std::invalid_argument("task_templates: bad kind");
}

namespace {

void render_pattern(const Vocab& vocab, const std::vector<std::string>& pattern, const TaskInstance& inst,
                    bool with_answer, std::vector<int>& out) {
    for (const std::string& tok : pattern) {
        if (tok == "{z0}" || tok == "{z1}") {
            const size_t zi = (tok == "{z0}") ? 0 : 1;
            if (zi >= inst.z_tokens.size()) {
                throw std::invalid_argument("render: template slot " + tok + " has no subject token");
            }
            out.push_back(inst.z_tokens[zi]);
        } else if (tok == "{y}") {
            if (!with_answer) throw std::invalid_argument("render: {y} slot in a generator pattern");
            out.insert(out.end(), inst.y_tokens.begin(), inst.y_tokens.end());
        } else {
            out.push_back(vocab.id(tok));
        }
    }
}

}  // namespace

RenderedPrompts render_prompts(const Vocab& vocab, const PromptTemplatePair& tpl, const TaskInstance& inst,
                               int context_length) {
    if (inst.y_tokens.empty()) throw std::invalid_argument("render: instance has no answer tokens");
    RenderedPrompts r;
    r.x_g.push_back(vocab.bos_id);
    render_pattern(vocab, tpl.g_pattern, inst, false, r.x_g);
    r.x_v.push_back(vocab.bos_id);
    render_pattern(vocab, tpl.v_pattern, inst, true, r.x_v);
    r.answer_first_token = inst.y_tokens[0];
    // Both prompts must leave room for one answer token.
    if (static_cast<int>(r.x_g.size()) + 1 > context_length ||
        static_cast<int>(r.x_v.size()) + 1 > context_length) {
        throw std::invalid_argument("render: template \"" + tpl.name + "\" overflows context length " +
                                    std::to_string(context_length));
    }
    return r;
}

int terminator_token(const Vocab& vocab) { return vocab.id("."); }

std::vector<std::vector<int>> build_pretraining_corpus(const Vocab& vocab, const Taxonomy& tax,
                                                       std::span<const TaskInstance> instances,
                                                       std::span<const PromptTemplatePair> templates,
                                                       const GapConfig& cfg) {
    if (instances.empty()) throw std::invalid_argument("corpus: no instances");
    if (templates.empty()) throw std::invalid_argument("corpus: no templates");
    if (cfg.validator_mix < 0.0 || cfg.validator_mix > 1.0) {
        throw std::invalid_argument("corpus: validator_mix outside [0,1]");
    }
    std::mt19937_64 rng(cfg.seed);

    // Exposure over instances, independent of the gold label.
    std::vector<double> exposure;
    exposure.reserve(instances.size());
    for (const TaskInstance& inst : instances) {
        const double dist = static_cast<double>(tax.tree_distance(inst.leaf, inst.internal));
        exposure.push_back(std::exp(-dist / cfg.exposure_tau));
    }
    std::discrete_distribution<size_t> pick_exposed(exposure.begin(), exposure.end());
    std::uniform_int_distribution<size_t> pick_uniform(0, instances.size() - 1);
    std::uniform_int_distribution<size_t> pick_template(0, templates.size() - 1);
    std::uniform_int_distribution<size_t> pick_variant(0, vocab.yes_set.size() - 1);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    const int term = terminator_token(vocab);
    std::vector<std::vector<int>> corpus;
    corpus.reserve(static_cast<size_t>(cfg.n_lines));
    for (int i = 0; i < cfg.n_lines; ++i) {
        const bool validator_line = coin(rng) < cfg.validator_mix;
        const PromptTemplatePair& tpl = templates[pick_template(rng)];
        if (validator_line) {
            const TaskInstance& inst = instances[pick_uniform(rng)];
            std::vector<int> line;
            line.push_back(vocab.bos_id);
            render_pattern(vocab, tpl.v_pattern, inst, true, line);
            bool label = inst.positive;
            if (coin(rng) < cfg.p_flip) label = !label;
            const auto& set = label ? vocab.yes_set : vocab.no_set;
            line.push_back(set[pick_variant(rng)]);
            corpus.push_back(std::move(line));
        } else {
            const TaskInstance& inst = instances[pick_exposed(rng)];
            std::vector<int> line;
            line.push_back(vocab.bos_id);
            render_pattern(vocab, tpl.g_pattern, inst, false, line);
            line.insert(line.end(), inst.y_tokens.begin(), inst.y_tokens.end());
            line.push_back(term);
            corpus.push_back(std::move(line));
        }
    }
    return corpus;
}

namespace {

int answer_key(const TaskInstance& inst) { return inst.y_tokens.at(0); }
int subject_key(const TaskInstance& inst) { return inst.z_tokens.at(0); }

SplitResult split_random(const std::vector<TaskInstance>& instances, const SplitSpec& spec) {
    std::vector<size_t> idx(instances.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng(spec.seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const size_t n_train = static_cast<size_t>(std::llround(spec.train_fraction * static_cast<double>(idx.size())));
    SplitResult r;
    for (size_t i = 0; i < idx.size(); ++i) {
        (i < n_train ? r.train : r.test).push_back(instances[idx[i]]);
    }
    return r;
}

SplitResult split_no_answer_overlap(const std::vector<TaskInstance>& instances, const SplitSpec& spec) {
    std::vector<int> answers;
    std::unordered_map<int, std::vector<size_t>> by_answer;
    for (size_t i = 0; i < instances.size(); ++i) {
        const int a = answer_key(instances[i]);
        if (!by_answer.count(a)) answers.push_back(a);
        by_answer[a].push_back(i);
    }
    std::mt19937_64 rng(spec.seed);
    std::shuffle(answers.begin(), answers.end(), rng);
    const size_t want_train =
        static_cast<size_t>(std::llround(spec.train_fraction * static_cast<double>(instances.size())));
    SplitResult r;
    for (int a : answers) {
        auto& bucket = by_answer[a];
        const bool to_train = r.train.size() < want_train;
        for (size_t i : bucket) (to_train ? r.train : r.test).push_back(instances[i]);
    }
    return r;
}

// Greedy bipartite partition: answers in descending degree order; each answer
// lands on the side currently farther below its target share and takes its
// subjects along, except subjects already committed to the other side, whose
// instances are dropped.
SplitResult split_no_overlap(const std::vector<TaskInstance>& instances, const SplitSpec& spec) {
    std::vector<int> answers;
    std::unordered_map<int, std::vector<size_t>> by_answer;
    for (size_t i = 0; i < instances.size(); ++i) {
        const int a = answer_key(instances[i]);
        if (!by_answer.count(a)) answers.push_back(a);
        by_answer[a].push_back(i);
    }
    std::mt19937_64 rng(spec.seed);
    std::shuffle(answers.begin(), answers.end(), rng);
    std::stable_sort(answers.begin(), answers.end(),
                     [&](int a, int b) { return by_answer[a].size() > by_answer[b].size(); });

    std::unordered_map<int, int> subject_side;
    double counts[2] = {0.0, 0.0};
    const double share[2] = {spec.train_fraction, 1.0 - spec.train_fraction};
    SplitResult r;
    for (int a : answers) {
        const int side = (counts[0] / share[0] <= counts[1] / share[1]) ? 0 : 1;
        for (size_t i : by_answer[a]) {
            const int z = subject_key(instances[i]);
            auto it = subject_side.find(z);
            if (it != subject_side.end() && it->second != side) {
                ++r.dropped;
                continue;
            }
            subject_side[z] = side;
            (side == 0 ? r.train : r.test).push_back(instances[i]);
            counts[side] += 1.0;
        }
    }
    const double drop_frac = static_cast<double>(r.dropped) / static_cast<double>(instances.size());
    if (drop_frac > 0.3) {
        throw std::runtime_error("split: no-overlap dropped " + std::to_string(r.dropped) + " of " +
                                 std::to_string(instances.size()) + " instances (over the 30% budget)");
    }
    return r;
}

}  // namespace

SplitResult split(const std::vector<TaskInstance>& instances, const SplitSpec& spec) {
    if (instances.empty()) throw std::invalid_argument("split: no instances");
    if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0) {
        throw std::invalid_argument("split: train_fraction outside (0,1)");
    }
    switch (spec.strategy) {
        case SplitSpec::Strategy::kRandom: return split_random(instances, spec);
        case SplitSpec::Strategy::kNoAnswerOverlap: return split_no_answer_overlap(instances, spec);
        case SplitSpec::Strategy::kNoOverlap: return split_no_overlap(instances, spec);
    }
    throw std::invalid_argument("split: bad strategy");
}

// ---------------------------------------------------------------------------
// serialization

void save_vocab(const std::string& path, const Vocab& vocab) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("vocab: cannot write " + path);
    f << "# gvlab-vocab-v1\n";
    f << "bos " << vocab.bos_id << "\n";
    f << "pad " << vocab.pad_id << "\n";
    f << "yes";
    for (int id : vocab.yes_set) f << " " << id;
    f << "\nno";
    for (int id : vocab.no_set) f << " " << id;
    f << "\ncount " << vocab.size() << "\n";
    for (const std::string& t : vocab.tokens) f << t << "\n";
}

Vocab load_vocab(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("vocab: cannot read " + path);
    std::string line;
    std::getline(f, line);
    if (line != "# gvlab-vocab-v1") throw std::runtime_error("vocab: bad header in " + path);
    Vocab v;
    std::string key;
    int count = 0;
    while (f >> key) {
        if (key == "bos") {
            f >> v.bos_id;
        } else if (key == "pad") {
            f >> v.pad_id;
        } else if (key == "yes" || key == "no") {
            std::getline(f, line);
            std::istringstream is(line);
            int id;
            auto& set = (key == "yes") ? v.yes_set : v.no_set;
            while (is >> id) set.push_back(id);
        } else if (key == "count") {
            f >> count;
            break;
        }
    }
    std::getline(f, line);
    for (int i = 0; i < count; ++i) {
        if (!std::getline(f, line)) throw std::runtime_error("vocab: truncated " + path);
        v.tokens.push_back(line);
    }
    v.rebuild_index();
    return v;
}

void save_taxonomy(const std::string& path, const Taxonomy& tax, const Vocab& vocab) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("taxonomy: cannot write " + path);
    f << "# gvlab-taxonomy-v1\n";
    f << "internal " << tax.n_internal() << "\n";
    for (int i = 0; i < tax.n_internal(); ++i) {
        f << tax.internal_parent[static_cast<size_t>(i)] << " "
          << vocab.token(tax.internal_token[static_cast<size_t>(i)]) << "\n";
    }
    f << "leaves " << tax.n_leaves() << "\n";
    for (int i = 0; i < tax.n_leaves(); ++i) {
        f << tax.leaf_parent[static_cast<size_t>(i)] << " "
          << vocab.token(tax.leaf_token[static_cast<size_t>(i)]) << "\n";
    }
}

Taxonomy load_taxonomy(const std::string& path, const Vocab& vocab) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("taxonomy: cannot read " + path);
    std::string line;
    std::getline(f, line);
    if (line != "# gvlab-taxonomy-v1") throw std::runtime_error("taxonomy: bad header in " + path);
    Taxonomy tax;
    std::string key;
    int n = 0;
    f >> key >> n;
    for (int i = 0; i < n; ++i) {
        int parent;
        std::string tok;
        f >> parent >> tok;
        tax.internal_parent.push_back(parent);
        tax.internal_token.push_back(vocab.id(tok));
    }
    f >> key >> n;
    for (int i = 0; i < n; ++i) {
        int parent;
        std::string tok;
        f >> parent >> tok;
        tax.leaf_parent.push_back(parent);
        tax.leaf_token.push_back(vocab.id(tok));
    }
    return tax;
}

void save_instances(const std::string& path, std::span<const TaskInstance> train,
                    std::span<const TaskInstance> test, const Vocab& vocab) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("instances: cannot write " + path);
    f << "# gvlab-instances-v1\ttask\tz\ty\tlabel\tsplit\n";
    auto emit = [&](const TaskInstance& inst, const char* tag) {
        f << task_name(inst.task) << "\t";
        for (size_t i = 0; i < inst.z_tokens.size(); ++i) {
            if (i) f << " ";
            f << vocab.token(inst.z_tokens[i]);
        }
        f << "\t";
        for (size_t i = 0; i < inst.y_tokens.size(); ++i) {
            if (i) f << " ";
            f << vocab.token(inst.y_tokens[i]);
        }
        f << "\t" << (inst.positive ? "positive" : "negative") << "\t" << tag << "\n";
    };
    for (const TaskInstance& inst : train) emit(inst, "train");
    for (const TaskInstance& inst : test) emit(inst, "test");
}

std::pair<std::vector<TaskInstance>, std::vector<TaskInstance>> load_instances(const std::string& path,
                                                                               const Vocab& vocab,
                                                                               const Taxonomy& tax) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("instances: cannot read " + path);
    std::string line;
    std::getline(f, line);
    if (line.rfind("# gvlab-instances-v1", 0) != 0) throw std::runtime_error("instances: bad header in " + path);

    std::unordered_map<int, int> leaf_of_token, internal_of_token;
    for (int i = 0; i < tax.n_leaves(); ++i) leaf_of_token[tax.leaf_token[static_cast<size_t>(i)]] = i;
    for (int i = 0; i < tax.n_internal(); ++i) internal_of_token[tax.internal_token[static_cast<size_t>(i)]] = i;

    std::vector<TaskInstance> train, test;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream is(line);
        std::string field;
        while (std::getline(is, field, '\t')) fields.push_back(field);
        if (fields.size() != 5) throw std::runtime_error("instances: malformed line \"" + line + "\"");
        TaskInstance inst;
        inst.task = task_from_name(fields[0]);
        std::istringstream zs(fields[1]);
        std::string tok;
        while (zs >> tok) inst.z_tokens.push_back(vocab.id(tok));
        std::istringstream ys(fields[2]);
        while (ys >> tok) inst.y_tokens.push_back(vocab.id(tok));
        inst.positive = fields[3] == "positive";
        auto lit = leaf_of_token.find(inst.z_tokens.at(0));
        auto iit = internal_of_token.find(inst.y_tokens.at(0));
        inst.leaf = lit == leaf_of_token.end() ? -1 : lit->second;
        inst.internal = iit == internal_of_token.end() ? -1 : iit->second;
        (fields[4] == "test" ? test : train).push_back(std::move(inst));
    }
    return {std::move(train), std::move(test)};
}

void save_corpus(const std::string& path, std::span<const std::vector<int>> corpus) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("corpus: cannot write " + path);
    f << "# gvlab-corpus-v1\n";
    for (const auto& doc : corpus) {
        for (size_t i = 0; i < doc.size(); ++i) {
            if (i) f << " ";
            f << doc[i];
        }
        f << "\n";
    }
}

std::vector<std::vector<int>> load_corpus(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("corpus: cannot read " + path);
    std::string line;
    std::getline(f, line);
    if (line != "# gvlab-corpus-v1") throw std::runtime_error("corpus: bad header in " + path);
    std::vector<std::vector<int>> corpus;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<int> doc;
        std::istringstream is(line);
        int id;
        while (is >> id) doc.push_back(id);
        corpus.push_back(std::move(doc));
    }
    return corpus;
}

}  // namespace gvlab

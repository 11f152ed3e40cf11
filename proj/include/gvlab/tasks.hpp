#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gvlab/vocab.hpp"

namespace gvlab {

enum class TaskKind { kHypernymy, kCloze, kQa };

const char* task_name(TaskKind k);
TaskKind task_from_name(const std::string& name);

// Rooted tree of internal category nodes with leaves attached to them.
// Leaves are the subject candidates, internal nodes the answer candidates.
struct Taxonomy {
    std::vector<int> internal_parent;  // index into internals, -1 at the root
    std::vector<int> leaf_parent;      // leaf -> internal index
    std::vector<int> internal_token;   // vocab ids
    std::vector<int> leaf_token;       // vocab ids

    int n_internal() const { return static_cast<int>(internal_parent.size()); }
    int n_leaves() const { return static_cast<int>(leaf_parent.size()); }

    // Chain of internal indices from the leaf's parent up to the root.
    std::vector<int> ancestors(int leaf) const;
    bool is_ancestor(int leaf, int internal) const;
    // Path length between a leaf and an internal node in the combined tree.
    int tree_distance(int leaf, int internal) const;
    int internal_depth(int internal) const;  // root has depth 1
};

struct TaskInstance {
    TaskKind task = TaskKind::kHypernymy;
    std::vector<int> z_tokens;
    std::vector<int> y_tokens;
    bool positive = true;
    // Taxonomy coordinates of the pair, kept for exposure weighting and for
    // reversing a rendered prompt back to (z, y).
    int leaf = -1;
    int internal = -1;
};

// Renders x_G from z and x_V from (z, y). Patterns hold literal vocab tokens
// plus the slots {z0}, {z1}, {y}; v_pattern ends just before the yes/no
// answer position.
struct PromptTemplatePair {
    std::string name;
    std::vector<std::string> g_pattern;
    std::vector<std::string> v_pattern;
};

struct SplitSpec {
    enum class Strategy { kRandom, kNoAnswerOverlap, kNoOverlap };
    Strategy strategy = Strategy::kRandom;
    uint64_t seed = 0;
    double train_fraction = 0.75;
};

SplitSpec::Strategy split_strategy_from_name(const std::string& name);
const char* split_strategy_name(SplitSpec::Strategy s);

struct SplitResult {
    std::vector<TaskInstance> train;
    std::vector<TaskInstance> test;
    int dropped = 0;
};

// Pretraining corpus knobs. The base model's generator-validator gap is
// manufactured here: generator-format lines are emitted with frequency
// proportional to exp(-tree_distance/exposure_tau) independent of the gold
// label, while validator-format lines carry the gold label flipped per line
// with probability p_flip.
struct GapConfig {
    double p_flip = 0.25;
    double exposure_tau = 1.0;
    double validator_mix = 0.5;
    int n_lines = 20000;
    uint64_t seed = 0;
};

// Shared vocabulary over all tasks: specials, yes/no variants, function
// tokens, then leaf and internal nouns.
Vocab build_vocab(int n_leaves, int n_internal);

// Deterministic under seed. Every internal node ends up with at least two
// children; internal depth is capped so leaves have 1..4 ancestors.
Taxonomy generate_taxonomy(const Vocab& vocab, uint64_t seed, int n_leaves, int n_internal, int branching);

// Unique labeled instances. Hypernymy draws negatives with tree distance
// decreasing in hardness (hardness 0 = uniform over non-ancestors); cloze and
// qa are positives-only and reject n_neg > 0.
std::vector<TaskInstance> make_instances(const Taxonomy& tax, TaskKind kind, int n_pos, int n_neg,
                                         double hardness, uint64_t seed);

// Primary template first, then the variants used for cross-prompt evaluation.
std::vector<PromptTemplatePair> task_templates(TaskKind kind);

struct RenderedPrompts {
    std::vector<int> x_g;
    std::vector<int> x_v;
    int answer_first_token = -1;
};

RenderedPrompts render_prompts(const Vocab& vocab, const PromptTemplatePair& tpl, const TaskInstance& inst,
                               int context_length);

// Token-id documents, one per line. Mixes generator-format and
// validator-format renderings of the instances under the gap config;
// templates are drawn uniformly per line.
std::vector<std::vector<int>> build_pretraining_corpus(const Vocab& vocab, const Taxonomy& tax,
                                                       std::span<const TaskInstance> instances,
                                                       std::span<const PromptTemplatePair> templates,
                                                       const GapConfig& cfg);

SplitResult split(const std::vector<TaskInstance>& instances, const SplitSpec& spec);

// The terminator token closing every corpus document; greedy decoding stops on it.
int terminator_token(const Vocab& vocab);

// Plain-text serialization, one record per line.
void save_vocab(const std::string& path, const Vocab& vocab);
Vocab load_vocab(const std::string& path);
void save_taxonomy(const std::string& path, const Taxonomy& tax, const Vocab& vocab);
Taxonomy load_taxonomy(const std::string& path, const Vocab& vocab);
void save_instances(const std::string& path, std::span<const TaskInstance> train,
                    std::span<const TaskInstance> test, const Vocab& vocab);
// Returns (train, test); instances tagged with other split names land in train.
std::pair<std::vector<TaskInstance>, std::vector<TaskInstance>> load_instances(const std::string& path,
                                                                               const Vocab& vocab,
                                                                               const Taxonomy& tax);
void save_corpus(const std::string& path, std::span<const std::vector<int>> corpus);
std::vector<std::vector<int>> load_corpus(const std::string& path);

}  // namespace gvlab

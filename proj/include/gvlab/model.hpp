#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gvlab/graph.hpp"
#include "gvlab/tensor.hpp"

namespace gvlab {

struct ModelHyperParams {
    int n_layers = 2;
    int n_heads = 4;
    int d_model = 64;
    int d_ff = 256;
    int context_length = 32;
    int vocab_size = 0;

    int head_dim() const { return d_model / n_heads; }
};

// The full parameter set of the LM. A frozen deep copy of this record serves
// as the reference model where a loss needs one.
struct ModelParams {
    ModelHyperParams hp;
    std::vector<std::pair<std::string, Tensor>> weights;  // fixed insertion order

    static ModelParams init(const ModelHyperParams& hp, uint64_t seed);

    Tensor& tensor(std::string_view name);
    const Tensor& tensor(std::string_view name) const;
    long long parameter_count() const;
};

// Node ids of the parameter leaves of one graph, in ModelParams::weights
// order. Bind once per graph; several forwards in the same graph share the
// leaves so parameter gradients accumulate across them.
struct ParamBindings {
    std::vector<NodeId> node_of;
};

ParamBindings bind_params(Graph& g, const ModelParams& p);

// Decoder-only forward pass; returns the [T, vocab] logits node.
// Pre: 0 < |tokens| <= context_length.
NodeId forward_logits(Graph& g, const ModelParams& p, const ParamBindings& b, std::span<const int> tokens);

// logits -> row-wise log probabilities, computed as x - logsumexp(x).
NodeId log_probs_node(Graph& g, NodeId logits);

// Next-token probability vector after the prefix. Entries are nonnegative
// and sum to 1 (within 1e-9).
std::vector<double> next_token_distribution(const ModelParams& p, std::span<const int> prefix);

// Sum of per-step log probabilities of the continuation under teacher
// forcing; 0 for an empty continuation.
double continuation_log_prob(const ModelParams& p, std::span<const int> prefix, std::span<const int> continuation);

// 1-based rank of `token` in `probs` by descending probability; ties broken
// by ascending token id.
int rank_of(std::span<const double> probs, int token);

int token_rank(const ModelParams& p, std::span<const int> prefix, int token);

// Repeatedly appends the argmax token (rank_of tie rule) until a stop token
// appears or max_len tokens have been emitted. Stop tokens are not emitted.
std::vector<int> greedy_completion(const ModelParams& p, std::span<const int> prefix, int max_len,
                                   std::span<const int> stop_tokens);

// Graph-building variants used by the training losses. They share the
// caller's parameter bindings.
NodeId continuation_log_prob_node(Graph& g, const ModelParams& p, const ParamBindings& b,
                                  std::span<const int> prefix, std::span<const int> continuation);

// log p(token | prompt) at the final position. With sum_over_set, the
// log of the summed probability of all ids (log-sum-exp of their log probs).
NodeId token_log_prob_node(Graph& g, const ModelParams& p, const ParamBindings& b,
                           std::span<const int> prompt, std::span<const int> token_ids, bool sum_over_set);

// Versioned binary checkpoint; load/save round trips are bit-exact.
void save_checkpoint(const ModelParams& p, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace gvlab

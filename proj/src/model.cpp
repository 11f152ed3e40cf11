#include "gvlab/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace gvlab {

namespace {

constexpr char kCkptMagic[8] = {'G', 'V', 'L', 'M', 'C', 'K', 'P', 'T'};
constexpr uint32_t kCkptVersion = 1;

void check_prefix(const ModelHyperParams& hp, size_t len, const char* what) {
    if (len == 0) throw std::invalid_argument(std::string(what) + ": empty token sequence");
    if (static_cast<int>(len) > hp.context_length) {
        throw std::invalid_argument(std::string(what) + ": sequence length " + std::to_string(len) +
                                    " exceeds context " + std::to_string(hp.context_length));
    }
}

}  // namespace

ModelParams ModelParams::init(const ModelHyperParams& hp, uint64_t seed) {
    if (hp.vocab_size <= 0) throw std::invalid_argument("model: vocab_size must be set");
    if (hp.d_model % hp.n_heads != 0) throw std::invalid_argument("model: d_model not divisible by n_heads");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 0.02);
    ModelParams p;
    p.hp = hp;
    auto wnorm = [&](const std::string& name, int r, int c) {
        Tensor t = Tensor::zeros(r, c);
        for (double& v : t.data) v = dist(rng);
        p.weights.emplace_back(name, std::move(t));
    };
    auto wconst = [&](const std::string& name, int r, int c, double v) {
        p.weights.emplace_back(name, Tensor::full(r, c, v));
    };
    const int d = hp.d_model, hd = hp.head_dim(), f = hp.d_ff;
    wnorm("tok_emb", hp.vocab_size, d);
    wnorm("pos_emb", hp.context_length, d);
    for (int l = 0; l < hp.n_layers; ++l) {
        const std::string L = "L" + std::to_string(l) + ".";
        wconst(L + "ln1.g", 1, d, 1.0);
        wconst(L + "ln1.b", 1, d, 0.0);
        for (int h = 0; h < hp.n_heads; ++h) {
            const std::string H = L + "h" + std::to_string(h) + ".";
            wnorm(H + "wq", d, hd);
            wnorm(H + "wk", d, hd);
            wnorm(H + "wv", d, hd);
            wnorm(H + "wo", hd, d);
        }
        wconst(L + "ln2.g", 1, d, 1.0);
        wconst(L + "ln2.b", 1, d, 0.0);
        wnorm(L + "ff.w1", d, f);
        wconst(L + "ff.b1", 1, f, 0.0);
        wnorm(L + "ff.w2", f, d);
        wconst(L + "ff.b2", 1, d, 0.0);
    }
    wconst("lnf.g", 1, d, 1.0);
    wconst("lnf.b", 1, d, 0.0);
    wnorm("head", d, hp.vocab_size);
    return p;
}

Tensor& ModelParams::tensor(std::string_view name) {
    for (auto& [n, t] : weights) {
        if (n == name) return t;
    }
    throw std::invalid_argument("model: no weight named \"" + std::string(name) + "\"");
}

const Tensor& ModelParams::tensor(std::string_view name) const {
    return const_cast<ModelParams*>(this)->tensor(name);
}

long long ModelParams::parameter_count() const {
    long long n = 0;
    for (const auto& [name, t] : weights) n += t.numel();
    return n;
}

ParamBindings bind_params(Graph& g, const ModelParams& p) {
    ParamBindings b;
    b.node_of.reserve(p.weights.size());
    for (const auto& [name, t] : p.weights) b.node_of.push_back(g.leaf(t));
    return b;
}

namespace {

struct Binder {
    const ModelParams& p;
    const ParamBindings& b;
    NodeId operator()(std::string_view name) const {
        for (size_t i = 0; i < p.weights.size(); ++i) {
            if (p.weights[i].first == name) return b.node_of[i];
        }
        throw std::invalid_argument("model: no weight named \"" + std::string(name) + "\"");
    }
};

}  // namespace

NodeId forward_logits(Graph& g, const ModelParams& p, const ParamBindings& b, std::span<const int> tokens) {
    check_prefix(p.hp, tokens.size(), "forward");
    if (b.node_of.size() != p.weights.size()) throw std::invalid_argument("forward: bindings mismatch");
    const Binder w{p, b};
    const int T = static_cast<int>(tokens.size());
    const int hd = p.hp.head_dim();

    std::vector<int> positions(tokens.size());
    for (int i = 0; i < T; ++i) positions[static_cast<size_t>(i)] = i;
    NodeId x = g.add(g.embedding_lookup(w("tok_emb"), tokens), g.embedding_lookup(w("pos_emb"), positions));

    std::vector<uint8_t> causal(static_cast<size_t>(T) * T, 0);
    for (int r = 0; r < T; ++r) {
        for (int c = r + 1; c < T; ++c) causal[static_cast<size_t>(r) * T + c] = 1;
    }

    for (int l = 0; l < p.hp.n_layers; ++l) {
        const std::string L = "L" + std::to_string(l) + ".";
        NodeId a = g.add(g.mul(g.layer_norm(x), w(L + "ln1.g")), w(L + "ln1.b"));
        NodeId attn = -1;
        for (int h = 0; h < p.hp.n_heads; ++h) {
            const std::string H = L + "h" + std::to_string(h) + ".";
            NodeId q = g.matmul(a, w(H + "wq"));
            NodeId k = g.matmul(a, w(H + "wk"));
            NodeId v = g.matmul(a, w(H + "wv"));
            NodeId s = g.scale(g.matmul(q, k, false, true), 1.0 / std::sqrt(static_cast<double>(hd)));
            NodeId probs = g.softmax(g.mask_fill(s, causal, -1e9));
            NodeId o = g.matmul(g.matmul(probs, v), w(H + "wo"));
            attn = (attn < 0) ? o : g.add(attn, o);
        }
        x = g.add(x, attn);
        NodeId ff_in = g.add(g.mul(g.layer_norm(x), w(L + "ln2.g")), w(L + "ln2.b"));
        NodeId f1 = g.add(g.matmul(ff_in, w(L + "ff.w1")), w(L + "ff.b1"));
        NodeId silu = g.mul(f1, g.sigmoid(f1));
        NodeId f2 = g.add(g.matmul(silu, w(L + "ff.w2")), w(L + "ff.b2"));
        x = g.add(x, f2);
    }
    x = g.add(g.mul(g.layer_norm(x), w("lnf.g")), w("lnf.b"));
    return g.matmul(x, w("head"));
}

NodeId log_probs_node(Graph& g, NodeId logits) {
    return g.sub(logits, g.logsumexp(logits));
}

std::vector<double> next_token_distribution(const ModelParams& p, std::span<const int> prefix) {
    check_prefix(p.hp, prefix.size(), "next_token_distribution");
    Graph g;
    ParamBindings b = bind_params(g, p);
    NodeId probs = g.softmax(forward_logits(g, p, b, prefix));
    const Tensor& t = g.value(probs);
    const int last = t.rows() - 1;
    std::vector<double> out(static_cast<size_t>(t.cols()));
    for (int c = 0; c < t.cols(); ++c) out[static_cast<size_t>(c)] = t.at(last, c);
    return out;
}

double continuation_log_prob(const ModelParams& p, std::span<const int> prefix, std::span<const int> continuation) {
    if (prefix.empty()) throw std::invalid_argument("continuation_log_prob: empty prefix");
    if (static_cast<int>(prefix.size() + continuation.size()) > p.hp.context_length) {
        throw std::invalid_argument("continuation_log_prob: sequence exceeds context");
    }
    if (continuation.empty()) return 0.0;
    Graph g;
    ParamBindings b = bind_params(g, p);
    return g.value(continuation_log_prob_node(g, p, b, prefix, continuation)).data[0];
}

int rank_of(std::span<const double> probs, int token) {
    if (token < 0 || token >= static_cast<int>(probs.size())) {
        throw std::invalid_argument("rank_of: token outside vocabulary");
    }
    const double pt = probs[static_cast<size_t>(token)];
    int rank = 1;
    for (int u = 0; u < static_cast<int>(probs.size()); ++u) {
        const double pu = probs[static_cast<size_t>(u)];
        if (pu > pt || (pu == pt && u < token)) ++rank;
    }
    return rank;
}

int token_rank(const ModelParams& p, std::span<const int> prefix, int token) {
    return rank_of(next_token_distribution(p, prefix), token);
}

std::vector<int> greedy_completion(const ModelParams& p, std::span<const int> prefix, int max_len,
                                   std::span<const int> stop_tokens) {
    if (max_len < 1) throw std::invalid_argument("greedy_completion: max_len must be >= 1");
    std::vector<int> seq(prefix.begin(), prefix.end());
    std::vector<int> out;
    for (int step = 0; step < max_len; ++step) {
        if (static_cast<int>(seq.size()) >= p.hp.context_length) break;
        std::vector<double> probs = next_token_distribution(p, seq);
        int best = 0;
        for (int u = 1; u < static_cast<int>(probs.size()); ++u) {
            if (probs[static_cast<size_t>(u)] > probs[static_cast<size_t>(best)]) best = u;
        }
        bool stop = false;
        for (int s : stop_tokens) {
            if (s == best) {
                stop = true;
                break;
            }
        }
        if (stop) break;
        out.push_back(best);
        seq.push_back(best);
    }
    return out;
}

NodeId continuation_log_prob_node(Graph& g, const ModelParams& p, const ParamBindings& b,
                                  std::span<const int> prefix, std::span<const int> continuation) {
    if (prefix.empty()) throw std::invalid_argument("continuation_log_prob: empty prefix");
    if (continuation.empty()) throw std::invalid_argument("continuation_log_prob_node: empty continuation");
    if (static_cast<int>(prefix.size() + continuation.size()) > p.hp.context_length) {
        throw std::invalid_argument("continuation_log_prob: sequence exceeds context");
    }
    std::vector<int> seq(prefix.begin(), prefix.end());
    seq.insert(seq.end(), continuation.begin(), continuation.end());
    NodeId lp = log_probs_node(g, forward_logits(g, p, b, seq));
    std::vector<std::pair<int, int>> coords;
    coords.reserve(continuation.size());
    for (size_t i = 0; i < continuation.size(); ++i) {
        coords.emplace_back(static_cast<int>(prefix.size() + i) - 1, continuation[i]);
    }
    NodeId picked = g.gather(lp, coords);
    NodeId ones = g.leaf(Tensor({1, static_cast<int>(coords.size())},
                                std::vector<double>(coords.size(), 1.0)));
    return g.matmul(ones, picked);
}

NodeId token_log_prob_node(Graph& g, const ModelParams& p, const ParamBindings& b,
                           std::span<const int> prompt, std::span<const int> token_ids, bool sum_over_set) {
    check_prefix(p.hp, prompt.size(), "token_log_prob");
    if (token_ids.empty()) throw std::invalid_argument("token_log_prob: empty token set");
    NodeId lp = log_probs_node(g, forward_logits(g, p, b, prompt));
    const int last = g.value(lp).rows() - 1;
    if (!sum_over_set || token_ids.size() == 1) {
        const std::pair<int, int> coord[] = {{last, token_ids[0]}};
        return g.gather(lp, coord);
    }
    std::vector<std::pair<int, int>> coords;
    for (int id : token_ids) coords.emplace_back(last, id);
    NodeId picked = g.gather(lp, coords);  // [n,1]
    // log of the summed set probability: transpose to a row, then logsumexp.
    NodeId ones = g.leaf(Tensor::full(1, 1, 1.0));
    NodeId as_row = g.matmul(ones, picked, false, true);
    return g.logsumexp(as_row);
}

void save_checkpoint(const ModelParams& p, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
    f.write(kCkptMagic, sizeof(kCkptMagic));
    auto put_u32 = [&](uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_i32 = [&](int32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    put_u32(kCkptVersion);
    put_i32(p.hp.n_layers);
    put_i32(p.hp.n_heads);
    put_i32(p.hp.d_model);
    put_i32(p.hp.d_ff);
    put_i32(p.hp.context_length);
    put_i32(p.hp.vocab_size);
    put_u32(static_cast<uint32_t>(p.weights.size()));
    for (const auto& [name, t] : p.weights) {
        put_u32(static_cast<uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(static_cast<uint32_t>(t.shape.size()));
        for (int d : t.shape) put_i32(d);
        f.write(reinterpret_cast<const char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot read " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kCkptMagic, 8) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    auto get_u32 = [&] {
        uint32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto get_i32 = [&] {
        int32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    const uint32_t version = get_u32();
    if (version != kCkptVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    ModelParams p;
    p.hp.n_layers = get_i32();
    p.hp.n_heads = get_i32();
    p.hp.d_model = get_i32();
    p.hp.d_ff = get_i32();
    p.hp.context_length = get_i32();
    p.hp.vocab_size = get_i32();
    const uint32_t n_weights = get_u32();
    for (uint32_t i = 0; i < n_weights; ++i) {
        const uint32_t name_len = get_u32();
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        const uint32_t rank = get_u32();
        std::vector<int> shape(rank);
        for (uint32_t r = 0; r < rank; ++r) shape[r] = get_i32();
        const long long numel = Tensor::numel_of(shape);
        std::vector<double> data(static_cast<size_t>(numel));
        f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
        if (!f) throw std::runtime_error("checkpoint: truncated file " + path);
        p.weights.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    return p;
}

}  // namespace gvlab

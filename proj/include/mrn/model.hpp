#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mrn/graph.hpp"
#include "mrn/ops.hpp"
#include "mrn/rng.hpp"
#include "mrn/sgd.hpp"
#include "mrn/vocab.hpp"

namespace mrn::model {

using num::Shape;
using num::Tape;
using num::Tensor;

struct ModelConfig {
    int f_hidden = 64;       // node feature width
    int p_channels = 8;      // edge feature width / channel count
    int layers = 16;         // edge-enhanced graph convolutional layers
    int heads = 4;           // self-attention heads
    int k_prime = 16;        // sort-pool node count
    int c0 = 128;            // function feature width
    int nested_layers = 2;   // graph convolutions over the contract graph
    int conv_filters = 8;
    int conv_kernel = 5;
    double dropout = 0.2;
    double leaky_slope = 0.2;
    double norm_eps = 1e-9;    // row-normalization epsilon in the edge gates
    double norm_floor = 1e-2;  // denominator floor; bounds gradients on near-empty rows
    bool no_self_attention = false;  // ablation: take the last layer instead of fusing
    bool no_nested = false;          // ablation: classify function features directly
    std::uint64_t seed = 1;

    void validate() const {
        auto positive = [](int v, const char* name) {
            if (v <= 0) throw ShapeMismatch(std::string("ModelConfig: ") + name + " must be positive");
        };
        positive(f_hidden, "f_hidden");
        positive(p_channels, "p_channels");
        positive(layers, "layers");
        positive(heads, "heads");
        positive(k_prime, "k_prime");
        positive(c0, "c0");
        positive(nested_layers, "nested_layers");
        positive(conv_filters, "conv_filters");
        positive(conv_kernel, "conv_kernel");
        if (f_hidden % p_channels != 0)
            throw ShapeMismatch("ModelConfig: f_hidden must be divisible by p_channels");
        if ((layers * f_hidden) % heads != 0 || f_hidden % heads != 0)
            throw ShapeMismatch("ModelConfig: f_hidden (and layers*f_hidden) must be divisible by heads");
        if (c0 < conv_kernel)
            throw ShapeMismatch("ModelConfig: c0 must be at least conv_kernel");
        if (dropout < 0.0 || dropout >= 1.0)
            throw ShapeMismatch("ModelConfig: dropout must be in [0,1)");
    }
};

/// Sinusoidal positional encoding: even dims sin(i/10000^(2p/d)), odd dims
/// cos with the same wavelength.
inline std::vector<double> positional_encoding(int position, int dim) {
    if (position < 0 || dim < 1)
        throw ShapeMismatch("positional_encoding: need position >= 0 and dim >= 1");
    std::vector<double> out(static_cast<std::size_t>(dim));
    for (int k = 0; k < dim; ++k) {
        int p = k / 2;
        double angle = position / std::pow(10000.0, (2.0 * p) / dim);
        out[static_cast<std::size_t>(k)] = (k % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
    return out;
}

/// All learned parameters, in a fixed construction order so identical seeds
/// give identical initializations and checkpoints carry a stable inventory.
struct ModelParams {
    Tensor node_table;  // |node vocab| x F
    Tensor edge_table;  // |edge vocab| x P
    struct EegcnLayer {
        Tensor w;  // F x (F/P), shared across channels
        Tensor a;  // P x 2(F/P), one gate vector per channel
    };
    std::vector<EegcnLayer> eegcn;
    Tensor fuse_wq, fuse_wk, fuse_wv, fuse_wo;  // F x F; absent under no_self_attention
    Tensor readout_w;                           // (K'*F) x c0
    Tensor readout_b;                           // 1 x c0
    std::vector<Tensor> nested_w;               // c x c; absent under no_nested
    Tensor conv_w;                              // filters x kernel
    Tensor conv_b;                              // filters x 1
    Tensor fc_w;                                // filters x 1
    Tensor fc_b;                                // 1 x 1

    static ModelParams init(const ModelConfig& cfg, std::size_t node_vocab,
                            std::size_t edge_vocab) {
        cfg.validate();
        Rng rng(cfg.seed);
        ModelParams p;
        // Embedding rows are features, initialized at unit scale. Weight
        // matrices use He-uniform bounds so activations keep their variance
        // through the relu stack; the narrower 1/sqrt(fan_in) bound starves
        // the deep layers and the classifier of signal at this depth.
        p.node_table = embedding_init({node_vocab, static_cast<std::size_t>(cfg.f_hidden)}, rng);
        p.edge_table = embedding_init({edge_vocab, static_cast<std::size_t>(cfg.p_channels)}, rng);
        std::size_t f = static_cast<std::size_t>(cfg.f_hidden);
        std::size_t d = f / static_cast<std::size_t>(cfg.p_channels);
        for (int l = 0; l < cfg.layers; ++l) {
            EegcnLayer layer;
            layer.w = weight_init({f, d}, f, rng);
            layer.a = weight_init({static_cast<std::size_t>(cfg.p_channels), 2 * d}, 2 * d, rng);
            p.eegcn.push_back(std::move(layer));
        }
        if (!cfg.no_self_attention) {
            p.fuse_wq = weight_init({f, f}, f, rng);
            p.fuse_wk = weight_init({f, f}, f, rng);
            p.fuse_wv = weight_init({f, f}, f, rng);
            p.fuse_wo = weight_init({f, f}, f, rng);
        }
        std::size_t flat = static_cast<std::size_t>(cfg.k_prime) * f;
        std::size_t c = static_cast<std::size_t>(cfg.c0);
        p.readout_w = weight_init({flat, c}, flat, rng);
        p.readout_b = zero_init({1, c});
        if (!cfg.no_nested)
            for (int t = 0; t < cfg.nested_layers; ++t)
                p.nested_w.push_back(weight_init({c, c}, c, rng));
        std::size_t filters = static_cast<std::size_t>(cfg.conv_filters);
        std::size_t kernel = static_cast<std::size_t>(cfg.conv_kernel);
        p.conv_w = weight_init({filters, kernel}, kernel, rng);
        p.conv_b = zero_init({filters, 1});
        // The output affine uses the narrow 1/sqrt(fan_in) bound: it keeps
        // initial logits near zero (a wide random head starts some seeds
        // confidently wrong) while still passing gradient to the stack.
        p.fc_w = bounded_uniform({filters, 1}, 1.0 / std::sqrt(static_cast<double>(filters)), rng);
        p.fc_b = zero_init({1, 1});
        return p;
    }

    std::vector<std::pair<std::string, Tensor>> named() const {
        std::vector<std::pair<std::string, Tensor>> out;
        out.emplace_back("embed.node_table", node_table);
        out.emplace_back("embed.edge_table", edge_table);
        for (std::size_t l = 0; l < eegcn.size(); ++l) {
            out.emplace_back("eegcn." + std::to_string(l) + ".w", eegcn[l].w);
            out.emplace_back("eegcn." + std::to_string(l) + ".a", eegcn[l].a);
        }
        if (fuse_wq.size() > 0) {
            out.emplace_back("fuse.wq", fuse_wq);
            out.emplace_back("fuse.wk", fuse_wk);
            out.emplace_back("fuse.wv", fuse_wv);
            out.emplace_back("fuse.wo", fuse_wo);
        }
        out.emplace_back("readout.w", readout_w);
        out.emplace_back("readout.b", readout_b);
        for (std::size_t t = 0; t < nested_w.size(); ++t)
            out.emplace_back("nested." + std::to_string(t) + ".w", nested_w[t]);
        out.emplace_back("clf.conv_w", conv_w);
        out.emplace_back("clf.conv_b", conv_b);
        out.emplace_back("clf.fc_w", fc_w);
        out.emplace_back("clf.fc_b", fc_b);
        return out;
    }

    std::vector<Tensor> collect() const {
        std::vector<Tensor> out;
        for (auto& [name, t] : named()) out.push_back(t);
        return out;
    }

    void zero_grads() {
        for (Tensor& t : collect()) t.zero_grad();
    }

    ModelParams clone() const {
        ModelParams c;
        c.node_table = node_table.clone();
        c.edge_table = edge_table.clone();
        for (const EegcnLayer& l : eegcn) c.eegcn.push_back({l.w.clone(), l.a.clone()});
        if (fuse_wq.size() > 0) {
            c.fuse_wq = fuse_wq.clone();
            c.fuse_wk = fuse_wk.clone();
            c.fuse_wv = fuse_wv.clone();
            c.fuse_wo = fuse_wo.clone();
        }
        c.readout_w = readout_w.clone();
        c.readout_b = readout_b.clone();
        for (const Tensor& t : nested_w) c.nested_w.push_back(t.clone());
        c.conv_w = conv_w.clone();
        c.conv_b = conv_b.clone();
        c.fc_w = fc_w.clone();
        c.fc_b = fc_b.clone();
        return c;
    }

private:
    static Tensor bounded_uniform(Shape shape, double bound, Rng& rng) {
        std::vector<double> v(num::shape_volume(shape));
        for (double& x : v) x = rng.uniform(-bound, bound);
        return Tensor(std::move(shape), std::move(v), /*requires_grad=*/true);
    }
    static Tensor weight_init(Shape shape, std::size_t fan_in, Rng& rng) {
        return bounded_uniform(std::move(shape), std::sqrt(6.0 / static_cast<double>(fan_in)), rng);
    }
    static Tensor zero_init(Shape shape) {
        return Tensor::zeros(std::move(shape), /*requires_grad=*/true);
    }
    static Tensor embedding_init(Shape shape, Rng& rng) {
        // unit-variance rows, the usual lookup-table scale
        return bounded_uniform(std::move(shape), std::sqrt(3.0), rng);
    }
};

// ---- embedding -------------------------------------------------------------

struct EmbeddedGraph {
    Tensor x0;  // N x F
    Tensor e0;  // N x N x P
};

/// X0 rows come from the node table; E0[i,j,:] sums the edge-table rows of
/// every edge on (i,j), with the positional encoding of seq_index added to
/// each indexed sequential edge before summation.
inline EmbeddedGraph embed_graph(const ModelConfig& cfg, const ModelParams& params,
                                 const graph::Vocabulary& vocab, const graph::Mrfg& g,
                                 Tape* tape) {
    std::size_t n = g.nodes.size();
    std::size_t p = static_cast<std::size_t>(cfg.p_channels);
    std::vector<int> node_ids;
    node_ids.reserve(n);
    for (const graph::GraphNode& node : g.nodes) node_ids.push_back(vocab.node_id(node.label));
    EmbeddedGraph out;
    out.x0 = num::embedding_gather(tape, params.node_table, node_ids);

    std::size_t m = g.edges.size();
    std::vector<int> edge_ids;
    edge_ids.reserve(m);
    std::vector<double> incidence(n * n * m, 0.0);
    std::vector<double> pe_sum(n * n * p, 0.0);
    for (std::size_t e = 0; e < m; ++e) {
        const graph::Edge& edge = g.edges[e];
        edge_ids.push_back(vocab.edge_id(edge.type.subtype));
        std::size_t pair = static_cast<std::size_t>(edge.src) * n + static_cast<std::size_t>(edge.dst);
        incidence[pair * m + e] = 1.0;
        if (edge.type.subtype == "sequential" && edge.seq_index) {
            std::vector<double> pe = positional_encoding(*edge.seq_index, cfg.p_channels);
            for (std::size_t k = 0; k < p; ++k) pe_sum[pair * p + k] += pe[k];
        }
    }
    Tensor rows = num::embedding_gather(tape, params.edge_table, edge_ids);
    Tensor inc({n * n, m}, std::move(incidence));
    Tensor pe({n * n, p}, std::move(pe_sum));
    Tensor e_flat = num::add(tape, num::matmul(tape, inc, rows), pe);
    out.e0 = num::reshape(tape, e_flat, {n, n, p});
    return out;
}

// ---- edge-enhanced graph convolution ----------------------------------------

struct LayerOut {
    Tensor x;  // N x F
    Tensor e;  // N x N x P
};

/// One edge-enhanced layer: per channel, pair scores exp(leaky_relu(a_p .
/// [x_i W || x_j W])) gate the incoming edge features, rows are normalized
/// with a small epsilon, and the gated adjacency mixes the projected node
/// features. The normalized gates become the next edge features.
inline LayerOut eegcn_layer(const ModelConfig& cfg, const ModelParams::EegcnLayer& layer,
                            const Tensor& x_prev, const Tensor& e_prev, Tape* tape) {
    std::size_t n = x_prev.dim(0);
    std::size_t f = static_cast<std::size_t>(cfg.f_hidden);
    std::size_t p = static_cast<std::size_t>(cfg.p_channels);
    std::size_t d = f / p;
    if (x_prev.dim(1) != f || e_prev.rank() != 3 || e_prev.dim(0) != n || e_prev.dim(1) != n ||
        e_prev.dim(2) != p)
        throw ShapeMismatch("eegcn_layer: input shapes do not match the configuration");

    Tensor u = num::matmul(tape, x_prev, layer.w);  // N x d
    Tensor eps = Tensor::scalar(cfg.norm_eps);
    Tensor floor = Tensor::scalar(cfg.norm_floor);
    Tensor minus_one = Tensor::scalar(-1.0);

    // Score projections for all channels at once: columns of s_left/s_right
    // are the per-channel source and destination scores.
    Tensor a_left = num::transpose(tape, num::slice(tape, layer.a, 1, 0, d));   // d x P
    Tensor a_right = num::transpose(tape, num::slice(tape, layer.a, 1, d, d));  // d x P
    Tensor s_left = num::matmul(tape, u, a_left);    // N x P
    Tensor s_right = num::matmul(tape, u, a_right);  // N x P

    std::vector<Tensor> x_parts, e_parts;
    for (std::size_t ch = 0; ch < p; ++ch) {
        Tensor scores = num::add(tape, num::slice(tape, s_left, 1, ch, 1),
                                 num::transpose(tape, num::slice(tape, s_right, 1, ch, 1)));
        Tensor activated = num::leaky_relu(tape, scores, cfg.leaky_slope);
        // Row-max subtraction before exp. The row normalization below divides
        // the gates by their row sum, so this rescaling cancels exactly; it
        // only keeps exp within range as the score vectors grow in training.
        Tensor row_max = num::reshape(tape, num::reduce_max(tape, activated, 1), {n, 1});
        Tensor gate = num::exp(tape, num::sub(tape, activated, row_max));
        Tensor e_ch = num::reshape(tape, num::slice(tape, e_prev, 2, ch, 1), {n, n});
        Tensor gated = num::mul(tape, gate, e_ch);
        // Rows normalize by the absolute sum so the gates stay in [-1,1]
        // even when signed edge features cancel; a plain signed sum can pass
        // arbitrarily close to zero and blow the exp above sky-high one
        // layer later. The floor caps the gradient of 1/denominator on rows
        // whose edge features have shrunk to noise; ordinary rows sit well
        // above it and are untouched.
        Tensor magnitude = num::add(tape, num::relu(tape, gated),
                                    num::relu(tape, num::mul(tape, gated, minus_one)));
        Tensor row_sum = num::reshape(tape, num::reduce_sum(tape, magnitude, 1), {n, 1});
        Tensor floored =
            num::add(tape, num::relu(tape, num::sub(tape, row_sum, floor)), floor);
        Tensor norm = num::div(tape, gated, num::add(tape, floored, eps));
        x_parts.push_back(num::matmul(tape, norm, u));
        e_parts.push_back(num::reshape(tape, norm, {n, n, 1}));
    }
    LayerOut out;
    out.x = num::relu(tape, num::concat(tape, x_parts, 1));
    out.e = num::concat(tape, e_parts, 2);
    return out;
}

// ---- layer fusion ------------------------------------------------------------

/// Treats the L layer outputs of each node as a sequence and runs multi-head
/// self-attention over it, then averages the attended positions.
inline Tensor fuse_layers(const ModelConfig& cfg, const ModelParams& params,
                          const std::vector<Tensor>& x_stack, Tape* tape) {
    if (x_stack.empty()) throw ShapeMismatch("fuse_layers: empty layer stack");
    std::size_t layers = x_stack.size();
    std::size_t n = x_stack[0].dim(0);
    std::size_t f = x_stack[0].dim(1);
    std::size_t heads = static_cast<std::size_t>(cfg.heads);
    std::size_t dk = f / heads;

    Tensor stacked = num::concat(tape, x_stack, 0);  // (L*N) x F, layer-major
    std::vector<int> ids;
    ids.reserve(layers * n);
    for (std::size_t node = 0; node < n; ++node)
        for (std::size_t l = 0; l < layers; ++l)
            ids.push_back(static_cast<int>(l * n + node));
    Tensor h = num::embedding_gather(tape, stacked, ids);  // (N*L) x F, node-major

    Tensor q = num::matmul(tape, h, params.fuse_wq);
    Tensor k = num::matmul(tape, h, params.fuse_wk);
    Tensor v = num::matmul(tape, h, params.fuse_wv);
    Tensor scale = Tensor::scalar(std::sqrt(static_cast<double>(dk)));

    std::vector<Tensor> fused_rows;
    fused_rows.reserve(n);
    for (std::size_t node = 0; node < n; ++node) {
        Tensor qn = num::slice(tape, q, 0, node * layers, layers);
        Tensor kn = num::slice(tape, k, 0, node * layers, layers);
        Tensor vn = num::slice(tape, v, 0, node * layers, layers);
        std::vector<Tensor> head_outs;
        head_outs.reserve(heads);
        for (std::size_t hd = 0; hd < heads; ++hd) {
            Tensor qh = num::slice(tape, qn, 1, hd * dk, dk);
            Tensor kh = num::slice(tape, kn, 1, hd * dk, dk);
            Tensor vh = num::slice(tape, vn, 1, hd * dk, dk);
            Tensor att = num::softmax(
                tape, num::div(tape, num::matmul(tape, qh, num::transpose(tape, kh)), scale), 1);
            head_outs.push_back(num::matmul(tape, att, vh));
        }
        Tensor merged = num::matmul(tape, num::concat(tape, head_outs, 1), params.fuse_wo);
        fused_rows.push_back(num::reshape(tape, num::reduce_mean(tape, merged, 0), {1, f}));
    }
    return num::concat(tape, fused_rows, 0);  // N x F
}

// ---- sort pooling -------------------------------------------------------------

/// Rows ordered non-ascending by the last feature channel, ties broken by
/// earlier channels right-to-left, then by node id; top K' kept, zero rows
/// pad shorter graphs.
inline Tensor sort_pool(const Tensor& x, int k_prime, Tape* tape) {
    if (x.rank() != 2) throw ShapeMismatch("sort_pool: expected rank 2");
    std::size_t n = x.dim(0), f = x.dim(1);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int lhs, int rhs) {
        for (std::size_t c = f; c-- > 0;) {
            double a = x.data()[static_cast<std::size_t>(lhs) * f + c];
            double b = x.data()[static_cast<std::size_t>(rhs) * f + c];
            if (a != b) return a > b;
        }
        return lhs < rhs;
    });
    std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k_prime), n);
    order.resize(keep);
    Tensor pooled = num::embedding_gather(tape, x, order);
    if (keep < static_cast<std::size_t>(k_prime)) {
        Tensor pad = Tensor::zeros({static_cast<std::size_t>(k_prime) - keep, f});
        pooled = num::concat(tape, {pooled, pad}, 0);
    }
    return pooled;
}

// ---- per-function pipeline ----------------------------------------------------

/// MRFG -> fixed-size function feature vector (1 x c0).
inline Tensor function_feature(const ModelConfig& cfg, const ModelParams& params,
                               const graph::Vocabulary& vocab, const graph::Mrfg& g, Tape* tape,
                               bool training, Rng* dropout_rng) {
    EmbeddedGraph embedded = embed_graph(cfg, params, vocab, g, tape);
    Tensor x = embedded.x0;
    Tensor e = embedded.e0;
    std::vector<Tensor> stack;
    stack.reserve(params.eegcn.size());
    for (const ModelParams::EegcnLayer& layer : params.eegcn) {
        LayerOut out = eegcn_layer(cfg, layer, x, e, tape);
        x = out.x;
        e = out.e;
        stack.push_back(x);
    }
    // Dropout once, on the representation entering the pooling stage.
    // Per-layer masks would compound to a 1.25^L variance blowup at L=16,
    // drowning the gradient signal at small step budgets.
    Tensor fused = cfg.no_self_attention ? stack.back() : fuse_layers(cfg, params, stack, tape);
    if (training && dropout_rng)
        fused = num::dropout(tape, fused, cfg.dropout, true, *dropout_rng);
    Tensor pooled = sort_pool(fused, cfg.k_prime, tape);
    std::size_t flat = static_cast<std::size_t>(cfg.k_prime) * static_cast<std::size_t>(cfg.f_hidden);
    Tensor flattened = num::reshape(tape, pooled, {1, flat});
    Tensor feature = num::relu(
        tape, num::add(tape, num::matmul(tape, flattened, params.readout_w), params.readout_b));
    return feature;  // 1 x c0
}

// ---- nested contract graph -----------------------------------------------------

struct FeaturedContractGraph {
    Tensor z0;        // N_F x c0
    Tensor adjacency; // N_F x N_F, symmetric call adjacency with self-loops
    Tensor degree;    // N_F x N_F diagonal row sums
    Tensor norm_adj;  // D^-1 A, the propagation operator
};

inline FeaturedContractGraph build_fcg(const graph::Mrng& m, const std::vector<Tensor>& features,
                                       Tape* tape) {
    std::size_t n = m.functions.size();
    if (features.size() != n)
        throw ShapeMismatch("build_fcg: feature count does not match function count");
    FeaturedContractGraph fcg;
    fcg.z0 = num::concat(tape, features, 0);
    std::vector<double> adj(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) adj[i * n + i] = 1.0;
    for (auto [caller, callee] : m.calls) {
        adj[static_cast<std::size_t>(caller) * n + static_cast<std::size_t>(callee)] = 1.0;
        adj[static_cast<std::size_t>(callee) * n + static_cast<std::size_t>(caller)] = 1.0;
    }
    std::vector<double> deg(n * n, 0.0), norm(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0;
        for (std::size_t j = 0; j < n; ++j) row += adj[i * n + j];
        deg[i * n + i] = row;
        for (std::size_t j = 0; j < n; ++j) norm[i * n + j] = adj[i * n + j] / row;
    }
    fcg.adjacency = Tensor({n, n}, std::move(adj));
    fcg.degree = Tensor({n, n}, std::move(deg));
    fcg.norm_adj = Tensor({n, n}, std::move(norm));
    return fcg;
}

/// Z' = relu(D^-1 A Z W), the row-normalized graph convolution.
inline Tensor nested_gcn_layer(const Tensor& norm_adj, const Tensor& z, const Tensor& w,
                               Tape* tape) {
    return num::relu(tape, num::matmul(tape, norm_adj, num::matmul(tape, z, w)));
}

// ---- classifier -----------------------------------------------------------------

/// Per function: 1-D convolution along the feature axis, global max per
/// filter, affine to one logit, sigmoid.
inline Tensor classify_functions(const ModelConfig& cfg, const ModelParams& params,
                                 const Tensor& z, Tape* tape) {
    std::size_t c = z.dim(1);
    std::size_t kernel = static_cast<std::size_t>(cfg.conv_kernel);
    if (c < kernel) throw ShapeMismatch("classify_functions: feature width below kernel size");
    std::size_t m = c - kernel + 1;
    std::size_t n = z.dim(0);
    std::vector<Tensor> filter_maxes;
    filter_maxes.reserve(static_cast<std::size_t>(cfg.conv_filters));
    for (int ft = 0; ft < cfg.conv_filters; ++ft) {
        Tensor row_w = num::slice(tape, params.conv_w, 0, static_cast<std::size_t>(ft), 1);
        Tensor conv;
        for (std::size_t k = 0; k < kernel; ++k) {
            Tensor wk = num::reshape(tape, num::slice(tape, row_w, 1, k, 1), {1});
            Tensor term = num::mul(tape, num::slice(tape, z, 1, k, m), wk);
            conv = k == 0 ? term : num::add(tape, conv, term);
        }
        Tensor bias = num::reshape(
            tape, num::slice(tape, params.conv_b, 0, static_cast<std::size_t>(ft), 1), {1});
        conv = num::add(tape, conv, bias);
        filter_maxes.push_back(
            num::reshape(tape, num::reduce_max(tape, conv, 1), {n, 1}));
    }
    Tensor pooled = num::concat(tape, filter_maxes, 1);  // N_F x filters
    Tensor logits = num::add(tape, num::matmul(tape, pooled, params.fc_w),
                             num::reshape(tape, params.fc_b, {1}));
    return num::reshape(tape, num::sigmoid(tape, logits), {n});
}

// ---- full model -------------------------------------------------------------------

/// Per-function vulnerability probabilities for one contract graph.
inline Tensor model_forward(const ModelConfig& cfg, const ModelParams& params,
                            const graph::Vocabulary& vocab, const graph::Mrng& m, Tape* tape,
                            bool training = false, Rng* dropout_rng = nullptr) {
    if (m.functions.empty()) return Tensor::zeros({0});
    std::vector<Tensor> features;
    features.reserve(m.functions.size());
    for (const graph::Mrfg& fn : m.functions)
        features.push_back(function_feature(cfg, params, vocab, fn, tape, training, dropout_rng));
    Tensor z;
    if (cfg.no_nested) {
        z = num::concat(tape, features, 0);
    } else {
        FeaturedContractGraph fcg = build_fcg(m, features, tape);
        z = fcg.z0;
        for (const Tensor& w : params.nested_w) z = nested_gcn_layer(fcg.norm_adj, z, w, tape);
    }
    return classify_functions(cfg, params, z, tape);
}

/// Binary cross entropy over per-function probabilities, clamped away from
/// the log singularities.
inline Tensor compute_loss(const Tensor& probs, const std::vector<double>& labels, Tape* tape) {
    if (probs.size() != labels.size())
        throw LengthMismatch("compute_loss: " + std::to_string(probs.size()) +
                             " probabilities vs " + std::to_string(labels.size()) + " labels");
    std::size_t n = labels.size();
    Tensor y({n}, labels);
    std::vector<double> inv(n);
    for (std::size_t i = 0; i < n; ++i) inv[i] = 1.0 - labels[i];
    Tensor y_inv({n}, std::move(inv));
    Tensor ones = Tensor::full({n}, 1.0);
    Tensor hi = Tensor::scalar(1.0 - 1e-12);
    Tensor lo = Tensor::scalar(1e-12);

    // clamp(p) = max(min(p, hi), lo), built from relu so gradients vanish
    // exactly where the clamp is active
    Tensor capped = num::sub(tape, probs, num::relu(tape, num::sub(tape, probs, hi)));
    Tensor clamped = num::add(tape, capped, num::relu(tape, num::sub(tape, lo, capped)));

    Tensor term = num::add(tape, num::mul(tape, y, num::log(tape, clamped)),
                           num::mul(tape, y_inv, num::log(tape, num::sub(tape, ones, clamped))));
    return num::mul(tape, num::reduce_mean(tape, term), Tensor::scalar(-1.0));
}

}  // namespace mrn::model

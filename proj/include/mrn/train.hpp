#pragma once

#include <algorithm>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "mrn/checkpoint.hpp"
#include "mrn/dataset.hpp"
#include "mrn/metrics.hpp"
#include "mrn/model.hpp"

namespace mrn::harness {

struct TrainingConfig {
    int epochs = 100;
    int batch_size = 32;
    double learning_rate = 0.002;
    double momentum = 0.0005;
    double dropout = 0.2;
    std::uint64_t seed = 1;
    double train_ratio = 0.8, val_ratio = 0.1, test_ratio = 0.1;
    int min_frequency = 1;
    double positive_weight = 1.0;  // optional reweighting of vulnerable functions
    // Element-wise gradient cap applied before each step. The edge-gate
    // normalization occasionally emits gradient spikes two orders above the
    // typical scale; uncapped they throw the run into a confidently wrong
    // region that a short epoch budget never recovers from. 0 disables.
    double gradient_clip = 1.0;

    void validate() const {
        if (epochs <= 0 || batch_size <= 0 || learning_rate <= 0)
            throw ShapeMismatch("TrainingConfig: epochs, batch_size, learning_rate must be positive");
        if (std::fabs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9)
            throw ShapeMismatch("TrainingConfig: split ratios must sum to 1");
        if (positive_weight <= 0) throw ShapeMismatch("TrainingConfig: positive_weight must be positive");
    }
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0;
    double val_accuracy = 0, val_precision = 0, val_recall = 0, val_f1 = 0;

    /// Fixed-format line with full double precision, so identical runs
    /// produce byte-identical logs.
    std::string line() const {
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "epoch=%d train_loss=%.17g val_acc=%.17g val_prec=%.17g val_rec=%.17g "
                      "val_f1=%.17g",
                      epoch, train_loss, val_accuracy, val_precision, val_recall, val_f1);
        return buf;
    }
};

struct TrainResult {
    ModelCheckpoint checkpoint;
    std::vector<EpochLog> log;
};

namespace detail {

inline std::vector<double> contract_scores(const model::ModelConfig& cfg,
                                           const model::ModelParams& params,
                                           const graph::Vocabulary& vocab,
                                           const graph::Mrng& mrng) {
    num::Tensor probs = model::model_forward(cfg, params, vocab, mrng, nullptr);
    return probs.values();
}

inline void gather_scores(const model::ModelConfig& cfg, const model::ModelParams& params,
                          const graph::Vocabulary& vocab,
                          const std::vector<LabeledContract>& contracts,
                          std::vector<double>& scores, std::vector<int>& labels) {
    for (const LabeledContract& c : contracts) {
        if (c.labels.empty()) continue;
        std::vector<double> s = contract_scores(cfg, params, vocab, c.mrng);
        for (std::size_t i = 0; i < s.size(); ++i) {
            scores.push_back(s[i]);
            labels.push_back(c.labels[i] >= 0.5 ? 1 : 0);
        }
    }
}

/// Cross entropy with an optional positive-class weight; with weight 1 this
/// is exactly compute_loss.
inline num::Tensor weighted_loss(const num::Tensor& probs, const std::vector<double>& labels,
                                 double positive_weight, num::Tape* tape) {
    if (positive_weight == 1.0) return model::compute_loss(probs, labels, tape);
    num::Tensor base = model::compute_loss(probs, labels, tape);
    // reweight by recomputing the positive term: loss_w = loss + (w-1) * pos_part
    std::size_t n = labels.size();
    std::vector<double> mask(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = labels[i] >= 0.5 ? 1.0 : 0.0;
    num::Tensor y({n}, std::move(mask));
    num::Tensor hi = num::Tensor::scalar(1.0 - 1e-12);
    num::Tensor lo = num::Tensor::scalar(1e-12);
    num::Tensor capped = num::sub(tape, probs, num::relu(tape, num::sub(tape, probs, hi)));
    num::Tensor clamped = num::add(tape, capped, num::relu(tape, num::sub(tape, lo, capped)));
    num::Tensor pos_part = num::mul(tape, num::reduce_mean(tape, num::mul(tape, y, num::log(tape, clamped))),
                                    num::Tensor::scalar(-1.0));
    return num::add(tape, base,
                    num::mul(tape, pos_part, num::Tensor::scalar(positive_weight - 1.0)));
}

inline double eval_mode_loss(const model::ModelConfig& cfg, const model::ModelParams& params,
                             const graph::Vocabulary& vocab,
                             const std::vector<LabeledContract>& contracts) {
    double weighted = 0.0;
    std::size_t total = 0;
    for (const LabeledContract& c : contracts) {
        if (c.labels.empty()) continue;
        num::Tensor probs = model::model_forward(cfg, params, vocab, c.mrng, nullptr);
        double l = model::compute_loss(probs, c.labels, nullptr).item();
        weighted += l * static_cast<double>(c.labels.size());
        total += c.labels.size();
    }
    return total == 0 ? 0.0 : weighted / static_cast<double>(total);
}

}  // namespace detail

/// Per-function probabilities and metrics over a labeled evaluation set.
inline MetricsReport evaluate(const model::ModelConfig& cfg, const model::ModelParams& params,
                              const graph::Vocabulary& vocab,
                              const std::vector<LabeledContract>& contracts,
                              double threshold = 0.5) {
    std::vector<double> scores;
    std::vector<int> labels;
    detail::gather_scores(cfg, params, vocab, contracts, scores, labels);
    return evaluate_scores(scores, labels, threshold);
}

inline MetricsReport evaluate(const ModelCheckpoint& ckpt,
                              const std::vector<LabeledContract>& contracts,
                              double threshold = 0.5) {
    return evaluate(ckpt.config, ckpt.params, ckpt.vocab, contracts, threshold);
}

/// The training protocol: per epoch, a seeded reshuffle, batches of
/// batch_size contracts with the loss averaged over every function in the
/// batch, gradient accumulation across the batch, then one SGD step. The
/// epoch log records the eval-mode train loss and validation metrics; the
/// returned checkpoint is the best validation F1 (ties keep the earlier
/// epoch). With an empty validation set the final epoch wins.
inline TrainResult train_model(const std::vector<LabeledContract>& train,
                               const std::vector<LabeledContract>& validation,
                               const model::ModelConfig& model_cfg, const TrainingConfig& tc,
                               const std::string& vuln_class = "arithmetic") {
    tc.validate();
    if (train.empty()) throw EmptyTrainSet("train_model: empty train set");

    std::vector<graph::Mrng> graphs;
    for (const LabeledContract& c : train) graphs.push_back(c.mrng);
    graph::Vocabulary vocab = graph::build_vocabulary(graphs, tc.min_frequency);

    model::ModelConfig cfg = model_cfg;
    cfg.dropout = tc.dropout;
    cfg.seed = tc.seed;
    model::ModelParams params =
        model::ModelParams::init(cfg, vocab.node_count(), vocab.edge_count());

    // Calibrate the output bias so the mean initial logit over the train set
    // is zero. The random head otherwise starts each run with a seed-chosen
    // logit offset that upstream feature growth amplifies faster than the
    // bias can unwind it at this learning rate.
    {
        double logit_sum = 0.0;
        std::size_t count = 0;
        for (const LabeledContract& c : train) {
            if (c.labels.empty()) continue;
            num::Tensor probs = model::model_forward(cfg, params, vocab, c.mrng, nullptr);
            for (double prob : probs.values()) {
                prob = std::min(1.0 - 1e-12, std::max(1e-12, prob));
                logit_sum += std::log(prob / (1.0 - prob));
                ++count;
            }
        }
        if (count > 0) params.fc_b.data()[0] -= logit_sum / static_cast<double>(count);
    }

    std::vector<num::Tensor> param_list = params.collect();
    num::OptimizerState opt;
    opt.learning_rate = tc.learning_rate;
    opt.momentum = tc.momentum;
    opt.reset(param_list);

    Rng loop_rng(tc.seed ^ 0xd1f5c0ffee123457ULL);
    TrainResult result;
    double best_f1 = -1.0;
    model::ModelParams best_params = params.clone();
    int best_epoch = 0;

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
        loop_rng.shuffle(order);
        try {
            for (std::size_t start = 0; start < order.size();
                 start += static_cast<std::size_t>(tc.batch_size)) {
                std::size_t stop =
                    std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
                std::size_t batch_functions = 0;
                for (std::size_t i = start; i < stop; ++i)
                    batch_functions += train[order[i]].labels.size();
                if (batch_functions == 0) continue;
                params.zero_grads();
                for (std::size_t i = start; i < stop; ++i) {
                    const LabeledContract& c = train[order[i]];
                    if (c.labels.empty()) continue;
                    num::Tape tape;
                    Rng dropout_rng = loop_rng.fork();
                    num::Tensor probs =
                        model::model_forward(cfg, params, vocab, c.mrng, &tape, true, &dropout_rng);
                    num::Tensor loss =
                        detail::weighted_loss(probs, c.labels, tc.positive_weight, &tape);
                    double share = static_cast<double>(c.labels.size()) /
                                   static_cast<double>(batch_functions);
                    num::Tensor scaled = num::mul(&tape, loss, num::Tensor::scalar(share));
                    tape.backward(scaled);
                }
                if (tc.gradient_clip > 0)
                    for (num::Tensor& t : param_list)
                        for (double& g : t.grad())
                            g = std::clamp(g, -tc.gradient_clip, tc.gradient_clip);
                num::sgd_step(param_list, opt);
            }
        } catch (const NumericError& e) {
            throw NumericError("training aborted at epoch " + std::to_string(epoch) + ": " +
                               e.what());
        }

        EpochLog log;
        log.epoch = epoch;
        log.train_loss = detail::eval_mode_loss(cfg, params, vocab, train);
        if (!validation.empty()) {
            MetricsReport val = evaluate(cfg, params, vocab, validation);
            log.val_accuracy = val.accuracy;
            log.val_precision = val.precision;
            log.val_recall = val.recall;
            log.val_f1 = val.f1;
            if (val.f1 > best_f1) {
                best_f1 = val.f1;
                best_params = params.clone();
                best_epoch = epoch;
            }
        } else {
            best_params = params.clone();
            best_epoch = epoch;
            best_f1 = 0.0;
        }
        result.log.push_back(log);
    }

    result.checkpoint.config = cfg;
    result.checkpoint.vocab = vocab;
    result.checkpoint.params = std::move(best_params);
    result.checkpoint.epoch = best_epoch;
    result.checkpoint.best_val_f1 = best_f1 < 0 ? 0.0 : best_f1;
    result.checkpoint.vuln_class = vuln_class;
    return result;
}

}  // namespace mrn::harness

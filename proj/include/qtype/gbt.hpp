#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "qtype/core.hpp"

namespace qtype::gbt {

using Matrix = std::vector<std::vector<double>>;

struct GbtParams {
    int n_rounds = 100;
    int max_depth = 4;
    double learning_rate = 0.1;
    int min_samples_leaf = 5;
    double l2_lambda = 1.0;
    double subsample = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double weight = 0.0;  // leaf value, learning-rate scaled

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict(const std::vector<double>& row) const;
    int depth() const;
};

// Newton-boosted logistic model: predict_proba = sigmoid(base_margin + sum of
// trees). The base margin is the log-odds of the Laplace-smoothed positive rate.
struct BinaryGbtModel {
    GbtParams params;
    double base_margin = 0.0;
    std::size_t n_features = 0;
    std::vector<RegressionTree> trees;
    std::vector<double> train_loss;  // mean logistic loss per round, entry 0 = prior

    double predict_margin(const std::vector<double>& row) const;
    double predict_proba(const std::vector<double>& row) const;
};

BinaryGbtModel fit_binary(const Matrix& features, const std::vector<int>& labels,
                          const GbtParams& params);

double predict_proba(const BinaryGbtModel& model, const std::vector<double>& row);

struct OneVsAllModel {
    std::array<BinaryGbtModel, kNumTypes> models;  // indexed by class code
    std::size_t n_features = 0;
};

// Class c positives are records whose LabelSet contains c; classes with no
// positives fit as constant-negative models.
OneVsAllModel fit_one_vs_all(const Matrix& features, const std::vector<LabelSet>& labelsets,
                             const GbtParams& params);

ProbabilityVector predict_one_vs_all(const OneVsAllModel& model, const std::vector<double>& row);

// labels = {c : p_c >= threshold_c}; empty falls back to the argmax class,
// ties broken by lowest class code.
LabelSet labels_from_probs(const ProbabilityVector& probs,
                           const std::array<double, kNumTypes>& thresholds);

LabelSet predict_multilabel(const OneVsAllModel& model, const std::vector<double>& row,
                            const std::array<double, kNumTypes>& thresholds);

nlohmann::json model_to_json(const BinaryGbtModel& model);
BinaryGbtModel model_from_json(const nlohmann::json& j);
nlohmann::json ova_to_json(const OneVsAllModel& model);
OneVsAllModel ova_from_json(const nlohmann::json& j);

struct TuneSpace {
    int depth_lo = 2, depth_hi = 8;
    int rounds_lo = 50, rounds_hi = 400;
    double eta_lo = 0.03, eta_hi = 0.3;
    double lambda_lo = 0.0, lambda_hi = 10.0;
    int min_leaf_lo = 1, min_leaf_hi = 20;
    double subsample_lo = 0.6, subsample_hi = 1.0;
};

enum class TuneObjective { recall_at_precision, weighted_f1 };

struct TuneConfig {
    TuneObjective objective = TuneObjective::recall_at_precision;
    double precision_target = 0.95;
    TuneSpace space;
    int n_trials = 20;
    std::uint64_t seed = 0;
};

struct TuneResult {
    GbtParams best_params;
    double best_score = 0.0;
    int best_trial = 0;  // ties broken by earlier trial
};

TuneResult tune_binary(const Matrix& train_x, const std::vector<int>& train_y,
                       const Matrix& val_x, const std::vector<int>& val_y,
                       const TuneConfig& config);

TuneResult tune_one_vs_all(const Matrix& train_x, const std::vector<LabelSet>& train_y,
                           const Matrix& val_x, const std::vector<LabelSet>& val_y,
                           const TuneConfig& config);

}  // namespace qtype::gbt

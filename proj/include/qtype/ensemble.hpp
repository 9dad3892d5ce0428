#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "qtype/core.hpp"
#include "qtype/features.hpp"
#include "qtype/gbt.hpp"
#include "qtype/textprob.hpp"

namespace qtype::ensemble {

// Source of per-class text probabilities: either the built-in linear model or
// an externally computed probability file keyed by record id.
class TextProvider {
public:
    virtual ~TextProvider() = default;
    virtual std::string kind() const = 0;  // "builtin" | "external"
    virtual ProbabilityVector class_probs(const QuestionRecord& q) const = 0;
    virtual BinaryProbability mcq_prob(const QuestionRecord& q) const = 0;
};

class BuiltinTextProvider : public TextProvider {
public:
    explicit BuiltinTextProvider(textprob::TextModel model) : model_(std::move(model)) {}

    std::string kind() const override { return "builtin"; }
    ProbabilityVector class_probs(const QuestionRecord& q) const override {
        return model_.predict(q.text);
    }
    BinaryProbability mcq_prob(const QuestionRecord& q) const override {
        return {model_.predict(q.text)[QuestionType::MCQ]};
    }
    const textprob::TextModel& model() const { return model_; }

private:
    textprob::TextModel model_;
};

class ExternalTextProvider : public TextProvider {
public:
    explicit ExternalTextProvider(textprob::ExternalProbs probs) : probs_(std::move(probs)) {}

    std::string kind() const override { return "external"; }
    ProbabilityVector class_probs(const QuestionRecord& q) const override {
        return probs_.lookup(q.id);
    }
    BinaryProbability mcq_prob(const QuestionRecord& q) const override {
        return {probs_.lookup(q.id)[QuestionType::MCQ]};
    }
    const textprob::ExternalProbs& probs() const { return probs_; }

private:
    textprob::ExternalProbs probs_;
};

// Cascade: [text-probability pair ++ handcrafted 13-D] into a binary tree
// model, thresholded at tau. Provider may be null (handcrafted-only ablation).
struct McqEnsemble {
    std::shared_ptr<const TextProvider> provider;
    std::vector<features::Lexicon> lexicons;
    features::FeatureSchema schema;  // the 13-D MCQ schema
    gbt::BinaryGbtModel tree;
    double threshold = 0.5;
};

struct McqPrediction {
    double score = 0.0;
    bool is_mcq = false;  // score >= threshold
};

std::vector<double> mcq_feature_row(const McqEnsemble& e, const QuestionRecord& q);

McqEnsemble train_mcq_ensemble(const std::vector<QuestionRecord>& train,
                               std::shared_ptr<const TextProvider> provider,
                               std::vector<features::Lexicon> lexicons,
                               const gbt::GbtParams& params);

McqPrediction predict_mcq(const McqEnsemble& e, const QuestionRecord& q);

// One-vs-all trees over handcrafted(+subject) features, combined with the
// text provider by arithmetic mean per class.
struct MultilabelEnsemble {
    std::shared_ptr<const TextProvider> provider;
    std::vector<features::Lexicon> lexicons;
    features::FeatureSchema schema;
    gbt::OneVsAllModel trees;
    std::array<double, kNumTypes> thresholds;
};

struct MultilabelPrediction {
    ProbabilityVector probs;
    LabelSet labels;
};

std::vector<double> multilabel_feature_row(const MultilabelEnsemble& e, const QuestionRecord& q);

MultilabelEnsemble train_multilabel_ensemble(const std::vector<QuestionRecord>& train,
                                             std::shared_ptr<const TextProvider> provider,
                                             std::vector<features::Lexicon> lexicons,
                                             const features::FeatureSchema& schema,
                                             const gbt::GbtParams& params);

MultilabelPrediction predict_labels(const MultilabelEnsemble& e, const QuestionRecord& q);

struct CalibrationResult {
    double threshold = 0.5;
    double achieved_precision = 0.0;
    double achieved_recall = 0.0;
};

// Candidates are the observed scores plus {0, 1}; prediction is score >=
// threshold; precision of an empty prediction set is 1. Among feasible
// candidates: max recall, then max precision, then max threshold.
CalibrationResult calibrate_threshold_at_precision(const std::vector<double>& scores,
                                                   const std::vector<int>& truth, double p);

}  // namespace qtype::ensemble

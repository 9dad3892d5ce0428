#include "qtype/ensemble.hpp"

#include <algorithm>
#include <set>

#include "qtype/qparse.hpp"

namespace qtype::ensemble {

std::vector<double> mcq_feature_row(const McqEnsemble& e, const QuestionRecord& q) {
    std::vector<double> row;
    if (e.provider) {
        BinaryProbability bp = e.provider->mcq_prob(q);
        row.push_back(bp.mcq);
        row.push_back(bp.non_mcq());
    }
    qparse::StructuralAnalysis analysis = qparse::analyze(q);
    features::FeatureVector fv = features::extract_features(q, analysis, e.lexicons, e.schema);
    row.insert(row.end(), fv.values.begin(), fv.values.end());
    return row;
}

McqEnsemble train_mcq_ensemble(const std::vector<QuestionRecord>& train,
                               std::shared_ptr<const TextProvider> provider,
                               std::vector<features::Lexicon> lexicons,
                               const gbt::GbtParams& params) {
    McqEnsemble e;
    e.provider = std::move(provider);
    e.lexicons = std::move(lexicons);
    e.schema = features::mcq_schema();
    e.threshold = 0.5;

    gbt::Matrix rows;
    std::vector<int> y;
    rows.reserve(train.size());
    y.reserve(train.size());
    for (const QuestionRecord& r : train) {
        if (!r.labels) throw Error("UnlabeledRecord", "record '" + r.id + "' has no labels");
        rows.push_back(mcq_feature_row(e, r));
        y.push_back(r.labels->contains(QuestionType::MCQ) ? 1 : 0);
    }
    e.tree = gbt::fit_binary(rows, y, params);
    return e;
}

McqPrediction predict_mcq(const McqEnsemble& e, const QuestionRecord& q) {
    McqPrediction p;
    p.score = e.tree.predict_proba(mcq_feature_row(e, q));
    p.is_mcq = p.score >= e.threshold;
    return p;
}

std::vector<double> multilabel_feature_row(const MultilabelEnsemble& e, const QuestionRecord& q) {
    qparse::StructuralAnalysis analysis = qparse::analyze(q);
    return features::extract_features(q, analysis, e.lexicons, e.schema).values;
}

MultilabelEnsemble train_multilabel_ensemble(const std::vector<QuestionRecord>& train,
                                             std::shared_ptr<const TextProvider> provider,
                                             std::vector<features::Lexicon> lexicons,
                                             const features::FeatureSchema& schema,
                                             const gbt::GbtParams& params) {
    MultilabelEnsemble e;
    e.provider = std::move(provider);
    e.lexicons = std::move(lexicons);
    e.schema = schema;
    e.thresholds.fill(0.5);

    gbt::Matrix rows;
    std::vector<LabelSet> labels;
    rows.reserve(train.size());
    labels.reserve(train.size());
    for (const QuestionRecord& r : train) {
        if (!r.labels) throw Error("UnlabeledRecord", "record '" + r.id + "' has no labels");
        rows.push_back(multilabel_feature_row(e, r));
        labels.push_back(*r.labels);
    }
    e.trees = gbt::fit_one_vs_all(rows, labels, params);
    return e;
}

MultilabelPrediction predict_labels(const MultilabelEnsemble& e, const QuestionRecord& q) {
    MultilabelPrediction out;
    ProbabilityVector tree_probs = gbt::predict_one_vs_all(e.trees, multilabel_feature_row(e, q));
    if (e.provider) {
        ProbabilityVector text_probs = e.provider->class_probs(q);
        for (QuestionType t : all_types()) {
            out.probs[t] = (text_probs[t] + tree_probs[t]) / 2.0;
        }
    } else {
        out.probs = tree_probs;
    }
    out.probs.validate();
    out.labels = gbt::labels_from_probs(out.probs, e.thresholds);
    return out;
}

CalibrationResult calibrate_threshold_at_precision(const std::vector<double>& scores,
                                                   const std::vector<int>& truth, double p) {
    if (scores.size() != truth.size()) {
        throw Error("LengthMismatch", "scores and truth are not aligned");
    }
    if (!(p > 0.0 && p <= 1.0)) throw Error("InvalidMetricInput", "p must be in (0,1]");
    int positives = 0;
    for (int y : truth) positives += y;
    if (positives == 0) throw Error("NoPositives", "calibration needs at least one positive");

    std::set<double> candidates(scores.begin(), scores.end());
    candidates.insert(0.0);
    candidates.insert(1.0);

    bool found = false;
    CalibrationResult best;
    for (double t : candidates) {
        int tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= t) {
                if (truth[i] == 1) {
                    ++tp;
                } else {
                    ++fp;
                }
            }
        }
        double precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 1.0;
        double recall = static_cast<double>(tp) / positives;
        if (precision < p) continue;
        bool better = !found || recall > best.achieved_recall ||
                      (recall == best.achieved_recall && precision > best.achieved_precision) ||
                      (recall == best.achieved_recall && precision == best.achieved_precision &&
                       t > best.threshold);
        if (better) {
            best.threshold = t;
            best.achieved_precision = precision;
            best.achieved_recall = recall;
            found = true;
        }
    }
    if (!found) {
        throw Error("NoFeasibleThreshold",
                    "no threshold reaches precision " + std::to_string(p));
    }
    return best;
}

}  // namespace qtype::ensemble

#include "qtype/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "qtype/qparse.hpp"

namespace qtype::eval {

double f_beta(double precision, double recall, double beta) {
    if (!(precision >= 0.0 && precision <= 1.0) || !(recall >= 0.0 && recall <= 1.0)) {
        throw Error("InvalidMetricInput", "precision and recall must be in [0,1]");
    }
    if (beta <= 0.0) throw Error("InvalidMetricInput", "beta must be positive");
    double b2 = beta * beta;
    double denom = b2 * precision + recall;
    if (denom == 0.0) return 0.0;
    return (1.0 + b2) * precision * recall / denom;
}

double weighted_f1(const std::vector<F1Support>& per_class) {
    double total = 0.0;
    double weighted = 0.0;
    for (const F1Support& c : per_class) {
        if (c.support < 0.0) throw Error("InvalidMetricInput", "supports must be >= 0");
        total += c.support;
        weighted += c.f1 * c.support;
    }
    if (total == 0.0) throw Error("AllZeroSupport", "every class has zero support");
    return weighted / total;
}

PrCurve pr_curve(const std::vector<double>& scores, const std::vector<int>& truth) {
    if (scores.size() != truth.size()) {
        throw Error("LengthMismatch", "scores and truth are not aligned");
    }
    int positives = 0;
    for (int y : truth) positives += y;
    if (positives == 0) throw Error("NoPositives", "pr_curve needs at least one positive");

    std::set<double, std::greater<double>> thresholds(scores.begin(), scores.end());
    PrCurve curve;
    for (double t : thresholds) {
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
        PrPoint p;
        p.threshold = t;
        p.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 1.0;
        p.recall = static_cast<double>(tp) / positives;
        curve.points.push_back(p);
    }
    return curve;
}

double recall_at_precision(const PrCurve& curve, double p) {
    if (!(p > 0.0 && p <= 1.0)) throw Error("InvalidMetricInput", "p must be in (0,1]");
    double best = 0.0;
    for (const PrPoint& point : curve.points) {
        if (point.precision >= p) best = std::max(best, point.recall);
    }
    return best;
}

namespace {

ClassReport class_report_from_counts(QuestionType t, int tp, int fp, int fn, int tn) {
    ClassReport r;
    r.type = t;
    r.tp = tp;
    r.fp = fp;
    r.fn = fn;
    r.tn = tn;
    r.support = tp + fn;
    r.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    r.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    r.f1 = f_beta(r.precision, r.recall, 1.0);
    r.f05 = f_beta(r.precision, r.recall, 0.5);
    return r;
}

}  // namespace

EvalReport evaluate(const std::vector<Prediction>& predictions,
                    const std::vector<LabelSet>& gold, EvalMode mode) {
    if (predictions.size() != gold.size()) {
        throw Error("LengthMismatch", "predictions and gold are not aligned");
    }
    const std::size_t n = predictions.size();
    EvalReport report;

    if (mode == EvalMode::binary_mcq) {
        int tp = 0, fp = 0, fn = 0, tn = 0;
        std::vector<double> scores(n);
        std::vector<int> truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            bool pred = predictions[i].labels.contains(QuestionType::MCQ);
            bool is_pos = gold[i].contains(QuestionType::MCQ);
            scores[i] = predictions[i].probs[QuestionType::MCQ];
            truth[i] = is_pos ? 1 : 0;
            if (pred && is_pos) ++tp;
            if (pred && !is_pos) ++fp;
            if (!pred && is_pos) ++fn;
            if (!pred && !is_pos) ++tn;
        }
        report.accuracy = n > 0 ? static_cast<double>(tp + tn) / static_cast<double>(n) : 0.0;

        ClassReport mcq = class_report_from_counts(QuestionType::MCQ, tp, fp, fn, tn);
        report.per_class.push_back(mcq);
        report.f05_mcq = mcq.f05;

        // Weighted F1 over {MCQ, non-MCQ}; non-MCQ is the complementary class.
        ClassReport non = class_report_from_counts(QuestionType::MCQ, tn, fn, fp, tp);
        std::vector<F1Support> parts;
        parts.push_back({mcq.f1, static_cast<double>(mcq.support)});
        parts.push_back({non.f1, static_cast<double>(fp + tn)});
        report.weighted_f1 = weighted_f1(parts);
        std::vector<F1Support> parts05;
        parts05.push_back({mcq.f05, static_cast<double>(mcq.support)});
        parts05.push_back({non.f05, static_cast<double>(fp + tn)});
        report.weighted_f05 = weighted_f1(parts05);

        if (tp + fn > 0) {
            PrCurve curve = pr_curve(scores, truth);
            report.recall_at_95 = recall_at_precision(curve, 0.95);
            report.recall_at_90 = recall_at_precision(curve, 0.90);
            report.recall_at_85 = recall_at_precision(curve, 0.85);
        }
        return report;
    }

    std::vector<F1Support> f1_parts;
    std::vector<F1Support> f05_parts;
    for (QuestionType t : all_types()) {
        int tp = 0, fp = 0, fn = 0, tn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            bool pred = predictions[i].labels.contains(t);
            bool is_pos = gold[i].contains(t);
            if (pred && is_pos) ++tp;
            if (pred && !is_pos) ++fp;
            if (!pred && is_pos) ++fn;
            if (!pred && !is_pos) ++tn;
        }
        ClassReport r = class_report_from_counts(t, tp, fp, fn, tn);
        report.per_class.push_back(r);
        if (r.support > 0) {
            f1_parts.push_back({r.f1, static_cast<double>(r.support)});
            f05_parts.push_back({r.f05, static_cast<double>(r.support)});
        }
        if (t == QuestionType::MCQ) report.f05_mcq = r.f05;
    }
    report.weighted_f1 = weighted_f1(f1_parts);
    report.weighted_f05 = weighted_f1(f05_parts);
    return report;
}

FnReport false_negative_report(const std::vector<QuestionRecord>& records,
                               const std::vector<Prediction>& predictions,
                               const std::vector<LabelSet>& gold,
                               const std::vector<features::Lexicon>& lexicons) {
    if (records.size() != predictions.size() || records.size() != gold.size()) {
        throw Error("LengthMismatch", "records, predictions, and gold are not aligned");
    }

    std::vector<const features::Lexicon*> mcq_lexicons;
    for (const features::Lexicon& lex : lexicons) {
        if (lex.target_class == QuestionType::MCQ) mcq_lexicons.push_back(&lex);
    }

    FnReport report;
    int n_markers = 0;
    int n_keywords = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        bool is_pos = gold[i].contains(QuestionType::MCQ);
        bool pred = predictions[i].labels.contains(QuestionType::MCQ);
        if (!is_pos || pred) continue;

        FnCase fnc;
        fnc.id = records[i].id;
        fnc.no_option_markers = qparse::analyze(records[i]).options.option_count == 0;
        int hits = 0;
        for (const features::Lexicon* lex : mcq_lexicons) {
            hits += features::count_matches(records[i].text, *lex);
        }
        fnc.no_mcq_keyword = hits == 0;
        if (fnc.no_option_markers) ++n_markers;
        if (fnc.no_mcq_keyword) ++n_keywords;
        report.cases.push_back(std::move(fnc));
    }
    if (!report.cases.empty()) {
        report.frac_no_option_markers =
            static_cast<double>(n_markers) / static_cast<double>(report.cases.size());
        report.frac_no_mcq_keyword =
            static_cast<double>(n_keywords) / static_cast<double>(report.cases.size());
    }
    return report;
}

nlohmann::json report_to_json(const EvalReport& report, EvalMode mode) {
    nlohmann::json j;
    if (mode == EvalMode::binary_mcq) {
        j["acc"] = report.accuracy.value_or(0.0);
        j["f05_mcq"] = report.f05_mcq;
        j["wf1"] = report.weighted_f1;
        j["r_at_95"] = report.recall_at_95.value_or(0.0);
        j["r_at_90"] = report.recall_at_90.value_or(0.0);
        j["r_at_85"] = report.recall_at_85.value_or(0.0);
    } else {
        j["wf05"] = report.weighted_f05;
        j["wf1"] = report.weighted_f1;
    }
    nlohmann::json per_class;
    for (const ClassReport& r : report.per_class) {
        per_class[to_string(r.type)] = {{"precision", r.precision},
                                        {"recall", r.recall},
                                        {"f1", r.f1},
                                        {"f05", r.f05},
                                        {"support", r.support},
                                        {"tp", r.tp},
                                        {"fp", r.fp},
                                        {"fn", r.fn},
                                        {"tn", r.tn}};
    }
    j["per_class"] = per_class;
    return j;
}

nlohmann::json fn_report_to_json(const FnReport& report) {
    nlohmann::json cases = nlohmann::json::array();
    for (const FnCase& c : report.cases) {
        cases.push_back({{"id", c.id},
                         {"no_option_markers", c.no_option_markers},
                         {"no_mcq_keyword", c.no_mcq_keyword}});
    }
    nlohmann::json j;
    j["false_negatives"] = cases;
    j["count"] = report.cases.size();
    j["frac_no_option_markers"] = report.frac_no_option_markers;
    j["frac_no_mcq_keyword"] = report.frac_no_mcq_keyword;
    return j;
}

std::string pr_curve_csv(const PrCurve& curve) {
    std::ostringstream out;
    out << "threshold,precision,recall\n";
    out.precision(17);
    for (const PrPoint& p : curve.points) {
        out << p.threshold << ',' << p.precision << ',' << p.recall << '\n';
    }
    return out.str();
}

}  // namespace qtype::eval

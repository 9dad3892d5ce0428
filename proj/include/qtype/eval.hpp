#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qtype/core.hpp"
#include "qtype/features.hpp"

namespace qtype::eval {

struct PrPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

// One point per distinct observed score, sorted by descending threshold.
// Convention: precision is 1.0 when nothing is predicted positive.
struct PrCurve {
    std::vector<PrPoint> points;
};

// (1+b^2) P R / (b^2 P + R); 0 when both P and R are 0.
double f_beta(double precision, double recall, double beta);

struct F1Support {
    double f1 = 0.0;
    double support = 0.0;
};

// Support-weighted mean; zero-support entries are excluded.
double weighted_f1(const std::vector<F1Support>& per_class);

PrCurve pr_curve(const std::vector<double>& scores, const std::vector<int>& truth);

// Max recall over curve points with precision >= p; 0 if none qualify.
double recall_at_precision(const PrCurve& curve, double p);

struct ClassReport {
    QuestionType type = QuestionType::MCQ;
    int tp = 0, fp = 0, fn = 0, tn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double f05 = 0.0;
    int support = 0;
};

enum class EvalMode { binary_mcq, multilabel };

struct EvalReport {
    std::optional<double> accuracy;  // binary mode only
    double f05_mcq = 0.0;            // F0.5 of the MCQ class
    double weighted_f1 = 0.0;
    double weighted_f05 = 0.0;
    std::optional<double> recall_at_95;
    std::optional<double> recall_at_90;
    std::optional<double> recall_at_85;
    std::vector<ClassReport> per_class;
};

struct Prediction {
    ProbabilityVector probs;
    LabelSet labels;
};

// Binary mode reads the MCQ entry of probs as the score and membership of MCQ
// in labels as the decision; multilabel mode scores one-vs-rest counts over
// the label sets.
EvalReport evaluate(const std::vector<Prediction>& predictions,
                    const std::vector<LabelSet>& gold, EvalMode mode);

struct FnCase {
    std::string id;
    bool no_option_markers = false;
    bool no_mcq_keyword = false;
};

struct FnReport {
    std::vector<FnCase> cases;
    double frac_no_option_markers = 0.0;  // 0 when there are no false negatives
    double frac_no_mcq_keyword = 0.0;
};

// Binary MCQ mode: false negatives with structural/keyword absence flags.
FnReport false_negative_report(const std::vector<QuestionRecord>& records,
                               const std::vector<Prediction>& predictions,
                               const std::vector<LabelSet>& gold,
                               const std::vector<features::Lexicon>& lexicons);

nlohmann::json report_to_json(const EvalReport& report, EvalMode mode);
nlohmann::json fn_report_to_json(const FnReport& report);
std::string pr_curve_csv(const PrCurve& curve);

}  // namespace qtype::eval

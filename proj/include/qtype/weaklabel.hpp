#pragma once

#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "json.hpp"
#include "qtype/core.hpp"
#include "qtype/features.hpp"
#include "qtype/qparse.hpp"

namespace qtype::weaklabel {

inline constexpr int kAbstain = -1;

// A declarative heuristic voting one class or abstaining.
struct LabelingFunction {
    enum class RuleType { lexicon_hit, structural, regex };

    std::string name;
    QuestionType target_class = QuestionType::MCQ;
    RuleType rule_type = RuleType::lexicon_hit;

    // lexicon_hit
    std::string lexicon;
    int min_count = 1;

    // structural: predicate over a StructuralAnalysis field
    std::string field;
    std::string op;  // "ge" | "le" | "eq"
    double value = 0.0;

    // regex
    std::string pattern;
    bool case_insensitive = true;
    std::shared_ptr<const std::regex> compiled;
};

std::vector<LabelingFunction> lfs_from_json(const nlohmann::json& j);
std::vector<LabelingFunction> load_labeling_functions(const std::string& path);

// Row-aligned votes; entry (i, j) is lfs[j]'s class code or kAbstain.
struct VoteMatrix {
    std::vector<std::string> record_ids;
    std::vector<std::string> lf_names;
    std::vector<QuestionType> lf_targets;
    std::vector<std::vector<int>> votes;

    std::size_t n_records() const { return votes.size(); }
    std::size_t n_lfs() const { return lf_names.size(); }
};

VoteMatrix apply_lfs(const std::vector<LabelingFunction>& lfs,
                     const std::vector<QuestionRecord>& records,
                     const std::vector<features::Lexicon>& lexicons);

void write_votes(const std::string& path, const VoteMatrix& vm);
VoteMatrix read_votes(const std::string& path, const std::vector<LabelingFunction>& lfs);

struct LfStats {
    double coverage = 0.0;  // fraction of records where the LF votes
    double overlap = 0.0;   // of its votes, fraction where another LF also votes
    double conflict = 0.0;  // of its votes, fraction where another LF votes differently
};

std::vector<LfStats> lf_stats(const VoteMatrix& vm);

struct WeakPosterior {
    ProbabilityVector probs;
    bool covered = false;  // at least one LF fired on this record
};

// Plurality over non-abstain votes; all-abstain rows are flagged uncovered
// with a uniform prior.
std::vector<WeakPosterior> majority_vote(const VoteMatrix& vm);

struct LabelModelConfig {
    int max_iters = 2000;
    double tol = 1e-10;      // relative log-likelihood change
    double smoothing = 0.01; // Beta(1+s, 1+s) pseudo-counts
    // Known one-vs-rest class prior. When set, the prior is not estimated
    // (free class balance is unidentifiable for small LF sets; the reference
    // label-model implementations take it as an input too).
    std::optional<double> class_balance;
};

// Per-class two-coin generative model over {fire, abstain} observations:
//   alpha_j = P(fire | y=1) = propensity * accuracy
//   beta_j  = P(fire | y=0) = propensity * (1 - accuracy)
// Fit by EM; the MAP objective (observed-data log-likelihood plus smoothing
// prior) is non-decreasing across iterations.
struct ClassModel {
    QuestionType cls = QuestionType::MCQ;
    double prior = 0.5;
    std::vector<std::size_t> lf_columns;
    std::vector<double> alpha;
    std::vector<double> beta;
    std::vector<double> objective_trace;

    double accuracy(std::size_t j) const { return alpha[j] / (alpha[j] + beta[j]); }
    double propensity(std::size_t j) const { return alpha[j] + beta[j]; }
};

struct LabelModel {
    LabelModelConfig config;
    std::vector<std::string> lf_names;
    std::vector<ClassModel> classes;

    const ClassModel* find(QuestionType t) const;
};

LabelModel fit_label_model(const VoteMatrix& vm, const LabelModelConfig& config = {});

// Posterior P(y_ic = 1 | votes_i), independent across classes. Rows where no
// LF for the class fired fall back to the class prior.
std::vector<WeakPosterior> predict_weak_labels(const LabelModel& model, const VoteMatrix& vm);

nlohmann::json label_model_to_json(const LabelModel& model);

// Thresholded posteriors become silver labels; empty sets take the argmax
// class; uncovered records are dropped.
std::vector<QuestionRecord> emit_silver_set(const std::vector<QuestionRecord>& records,
                                            const std::vector<WeakPosterior>& posteriors,
                                            double threshold);

}  // namespace qtype::weaklabel

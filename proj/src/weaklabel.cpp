#include "qtype/weaklabel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

namespace qtype::weaklabel {

namespace {

double structural_field(const qparse::StructuralAnalysis& a, const std::string& field) {
    if (field == "option_count") return a.options.option_count;
    if (field == "option_style_code") return qparse::style_code(a.options.style);
    if (field == "markers_sequential") return a.options.markers_sequential ? 1.0 : 0.0;
    if (field == "blank_count") return a.blank_count;
    if (field == "part_count") return a.part_count;
    if (field == "has_tf_pair") return a.has_tf_pair ? 1.0 : 0.0;
    if (field == "line_count") return a.line_count;
    if (field == "token_count") return a.token_count;
    if (field == "has_code_indicator") return a.has_code_indicator ? 1.0 : 0.0;
    if (field == "has_table_indicator") return a.has_table_indicator ? 1.0 : 0.0;
    if (field == "has_math_indicator") return a.has_math_indicator ? 1.0 : 0.0;
    if (field == "ends_with_question_mark") return a.ends_with_question_mark ? 1.0 : 0.0;
    throw Error("MalformedLabelingFunction", "unknown structural field '" + field + "'");
}

bool lf_fires(const LabelingFunction& lf, const QuestionRecord& record,
              const qparse::StructuralAnalysis& analysis,
              const std::unordered_map<std::string, const features::Lexicon*>& lex_by_name) {
    switch (lf.rule_type) {
        case LabelingFunction::RuleType::lexicon_hit: {
            auto it = lex_by_name.find(lf.lexicon);
            if (it == lex_by_name.end()) {
                throw Error("MalformedLabelingFunction",
                            "labeling function '" + lf.name + "' references unknown lexicon '" +
                                lf.lexicon + "'");
            }
            return features::count_matches(record.text, *it->second) >= lf.min_count;
        }
        case LabelingFunction::RuleType::structural: {
            double v = structural_field(analysis, lf.field);
            if (lf.op == "ge") return v >= lf.value;
            if (lf.op == "le") return v <= lf.value;
            if (lf.op == "eq") return v == lf.value;
            throw Error("MalformedLabelingFunction",
                        "labeling function '" + lf.name + "' has unknown op '" + lf.op + "'");
        }
        case LabelingFunction::RuleType::regex:
            return std::regex_search(record.text, *lf.compiled);
    }
    return false;
}

double logsumexp2(double a, double b) {
    double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double clamp_prob(double p) { return std::min(1.0 - 1e-9, std::max(1e-9, p)); }

}  // namespace

std::vector<LabelingFunction> lfs_from_json(const nlohmann::json& j) {
    if (!j.is_array()) {
        throw Error("MalformedLabelingFunction", "labeling function file must be a JSON array");
    }
    std::vector<LabelingFunction> out;
    std::set<std::string> names;
    for (const auto& item : j) {
        LabelingFunction lf;
        lf.name = item.at("name").get<std::string>();
        if (!names.insert(lf.name).second) {
            throw Error("MalformedLabelingFunction", "duplicate labeling function '" + lf.name + "'");
        }
        lf.target_class = parse_question_type(item.at("target_class").get<std::string>());
        std::string rule = item.at("rule_type").get<std::string>();
        const auto& params = item.at("rule_params");
        if (rule == "lexicon_hit") {
            lf.rule_type = LabelingFunction::RuleType::lexicon_hit;
            lf.lexicon = params.at("lexicon").get<std::string>();
            lf.min_count = params.value("min_count", 1);
        } else if (rule == "structural") {
            lf.rule_type = LabelingFunction::RuleType::structural;
            lf.field = params.at("field").get<std::string>();
            lf.op = params.at("op").get<std::string>();
            lf.value = params.at("value").get<double>();
        } else if (rule == "regex") {
            lf.rule_type = LabelingFunction::RuleType::regex;
            lf.pattern = params.at("pattern").get<std::string>();
            lf.case_insensitive = params.value("case_insensitive", true);
            auto flags = std::regex_constants::ECMAScript;
            if (lf.case_insensitive) flags |= std::regex_constants::icase;
            try {
                lf.compiled = std::make_shared<const std::regex>(lf.pattern, flags);
            } catch (const std::regex_error& e) {
                throw Error("BadRegex", "labeling function '" + lf.name + "': " + e.what());
            }
        } else {
            throw Error("MalformedLabelingFunction",
                        "labeling function '" + lf.name + "' has unknown rule_type '" + rule + "'");
        }
        out.push_back(std::move(lf));
    }
    return out;
}

std::vector<LabelingFunction> load_labeling_functions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("IoError", "cannot open labeling function file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("MalformedLabelingFunction", std::string("invalid JSON: ") + e.what());
    }
    return lfs_from_json(j);
}

VoteMatrix apply_lfs(const std::vector<LabelingFunction>& lfs,
                     const std::vector<QuestionRecord>& records,
                     const std::vector<features::Lexicon>& lexicons) {
    if (lfs.empty()) throw Error("MalformedLabelingFunction", "labeling function set is empty");

    std::unordered_map<std::string, const features::Lexicon*> lex_by_name;
    for (const features::Lexicon& lex : lexicons) lex_by_name[lex.name] = &lex;

    VoteMatrix vm;
    for (const LabelingFunction& lf : lfs) {
        vm.lf_names.push_back(lf.name);
        vm.lf_targets.push_back(lf.target_class);
    }
    vm.votes.reserve(records.size());
    for (const QuestionRecord& r : records) {
        vm.record_ids.push_back(r.id);
        qparse::StructuralAnalysis analysis = qparse::analyze(r);
        std::vector<int> row(lfs.size(), kAbstain);
        for (std::size_t j = 0; j < lfs.size(); ++j) {
            if (lf_fires(lfs[j], r, analysis, lex_by_name)) {
                row[j] = code_of(lfs[j].target_class);
            }
        }
        vm.votes.push_back(std::move(row));
    }
    return vm;
}

void write_votes(const std::string& path, const VoteMatrix& vm) {
    std::ofstream out(path);
    if (!out) throw Error("IoError", "cannot open file for writing: " + path);
    for (std::size_t i = 0; i < vm.n_records(); ++i) {
        nlohmann::json j;
        j["id"] = vm.record_ids[i];
        j["votes"] = vm.votes[i];
        out << j.dump() << '\n';
    }
}

VoteMatrix read_votes(const std::string& path, const std::vector<LabelingFunction>& lfs) {
    std::ifstream in(path);
    if (!in) throw Error("IoError", "cannot open vote file: " + path);
    VoteMatrix vm;
    for (const LabelingFunction& lf : lfs) {
        vm.lf_names.push_back(lf.name);
        vm.lf_targets.push_back(lf.target_class);
    }
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            throw Error("MalformedLine", "line " + std::to_string(lineno) + ": invalid JSON");
        }
        vm.record_ids.push_back(j.at("id").get<std::string>());
        std::vector<int> row = j.at("votes").get<std::vector<int>>();
        if (row.size() != lfs.size()) {
            throw Error("ShapeMismatch", "line " + std::to_string(lineno) + ": expected " +
                                             std::to_string(lfs.size()) + " votes, got " +
                                             std::to_string(row.size()));
        }
        for (std::size_t jcol = 0; jcol < row.size(); ++jcol) {
            if (row[jcol] != kAbstain && row[jcol] != code_of(lfs[jcol].target_class)) {
                throw Error("ShapeMismatch",
                            "line " + std::to_string(lineno) + ": vote does not match LF target");
            }
        }
        vm.votes.push_back(std::move(row));
    }
    return vm;
}

std::vector<LfStats> lf_stats(const VoteMatrix& vm) {
    const std::size_t n = vm.n_records();
    const std::size_t m = vm.n_lfs();
    std::vector<LfStats> stats(m);
    for (std::size_t j = 0; j < m; ++j) {
        std::size_t votes = 0;
        std::size_t overlap = 0;
        std::size_t conflict = 0;
        for (std::size_t i = 0; i < n; ++i) {
            int v = vm.votes[i][j];
            if (v == kAbstain) continue;
            ++votes;
            bool other = false;
            bool disagrees = false;
            for (std::size_t k = 0; k < m; ++k) {
                if (k == j || vm.votes[i][k] == kAbstain) continue;
                other = true;
                if (vm.votes[i][k] != v) disagrees = true;
            }
            if (other) ++overlap;
            if (disagrees) ++conflict;
        }
        if (n > 0) stats[j].coverage = static_cast<double>(votes) / static_cast<double>(n);
        if (votes > 0) {
            stats[j].overlap = static_cast<double>(overlap) / static_cast<double>(votes);
            stats[j].conflict = static_cast<double>(conflict) / static_cast<double>(votes);
        }
    }
    return stats;
}

std::vector<WeakPosterior> majority_vote(const VoteMatrix& vm) {
    std::vector<WeakPosterior> out;
    out.reserve(vm.n_records());
    for (const std::vector<int>& row : vm.votes) {
        WeakPosterior wp;
        std::array<int, kNumTypes> counts{};
        int total = 0;
        for (int v : row) {
            if (v == kAbstain) continue;
            ++counts[static_cast<std::size_t>(v)];
            ++total;
        }
        if (total == 0) {
            for (QuestionType t : all_types()) wp.probs[t] = 1.0 / kNumTypes;
            wp.covered = false;
        } else {
            int best = *std::max_element(counts.begin(), counts.end());
            int winners = 0;
            for (int c : counts) {
                if (c == best) ++winners;
            }
            for (int c = 0; c < kNumTypes; ++c) {
                if (counts[static_cast<std::size_t>(c)] == best) {
                    wp.probs[static_cast<QuestionType>(c)] = 1.0 / winners;
                }
            }
            wp.covered = true;
        }
        out.push_back(wp);
    }
    return out;
}

LabelModel fit_label_model(const VoteMatrix& vm, const LabelModelConfig& config) {
    const std::size_t n = vm.n_records();
    const double s = config.smoothing;

    LabelModel model;
    model.config = config;
    model.lf_names = vm.lf_names;

    std::set<QuestionType> targeted(vm.lf_targets.begin(), vm.lf_targets.end());
    for (QuestionType cls : targeted) {
        ClassModel cm;
        cm.cls = cls;
        for (std::size_t j = 0; j < vm.n_lfs(); ++j) {
            if (vm.lf_targets[j] == cls) cm.lf_columns.push_back(j);
        }

        // fire(i, j) == 1 iff column j voted cls on record i
        const std::size_t m = cm.lf_columns.size();
        std::vector<std::vector<char>> fires(n, std::vector<char>(m, 0));
        std::vector<double> coverage(m, 0.0);
        std::size_t any_fire_rows = 0;
        std::size_t total_fires = 0;
        for (std::size_t i = 0; i < n; ++i) {
            bool any = false;
            for (std::size_t j = 0; j < m; ++j) {
                if (vm.votes[i][cm.lf_columns[j]] != kAbstain) {
                    fires[i][j] = 1;
                    coverage[j] += 1.0;
                    any = true;
                    ++total_fires;
                }
            }
            if (any) ++any_fire_rows;
        }
        if (total_fires == 0) {
            throw Error("DegenerateClass",
                        std::string("no votes for class ") + to_string(cls));
        }
        for (double& c : coverage) c /= static_cast<double>(n);

        // Seeded init: accuracy 0.7, propensity = coverage, prior = vote frequency
        // (or the supplied class balance).
        cm.alpha.resize(m);
        cm.beta.resize(m);
        for (std::size_t j = 0; j < m; ++j) {
            cm.alpha[j] = clamp_prob(0.7 * coverage[j]);
            cm.beta[j] = clamp_prob(0.3 * coverage[j]);
        }
        cm.prior = config.class_balance
                       ? clamp_prob(*config.class_balance)
                       : clamp_prob(static_cast<double>(any_fire_rows) / static_cast<double>(n));

        std::vector<double> q(n, 0.0);
        double prev_ll = -std::numeric_limits<double>::infinity();
        for (int iter = 0; iter < config.max_iters; ++iter) {
            // E-step; also evaluates the likelihood and MAP objective at the
            // current params.
            double ll = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double la = std::log(cm.prior);
                double lb = std::log(1.0 - cm.prior);
                for (std::size_t j = 0; j < m; ++j) {
                    if (fires[i][j]) {
                        la += std::log(cm.alpha[j]);
                        lb += std::log(cm.beta[j]);
                    } else {
                        la += std::log(1.0 - cm.alpha[j]);
                        lb += std::log(1.0 - cm.beta[j]);
                    }
                }
                double norm = logsumexp2(la, lb);
                q[i] = std::exp(la - norm);
                ll += norm;
            }
            double log_prior = s * (std::log(cm.prior) + std::log(1.0 - cm.prior));
            for (std::size_t j = 0; j < m; ++j) {
                log_prior += s * (std::log(cm.alpha[j]) + std::log(1.0 - cm.alpha[j]));
                log_prior += s * (std::log(cm.beta[j]) + std::log(1.0 - cm.beta[j]));
            }
            cm.objective_trace.push_back(ll + log_prior);

            // Stop as soon as the likelihood stops improving (signed test).
            // The smoothing prior alone must not drive iteration: on a flat
            // likelihood ridge it slowly pulls alpha and beta together and
            // erases the signal while the MAP objective still climbs.
            if (iter > 0 && ll - prev_ll <= config.tol * (1.0 + std::abs(ll))) break;
            prev_ll = ll;

            // M-step (MAP with Beta(1+s, 1+s) pseudo-counts).
            double qsum = 0.0;
            for (double qi : q) qsum += qi;
            for (std::size_t j = 0; j < m; ++j) {
                double fire_pos = 0.0;
                double fire_neg = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (fires[i][j]) {
                        fire_pos += q[i];
                        fire_neg += 1.0 - q[i];
                    }
                }
                cm.alpha[j] = clamp_prob((fire_pos + s) / (qsum + 2 * s));
                cm.beta[j] = clamp_prob((fire_neg + s) / (static_cast<double>(n) - qsum + 2 * s));
            }
            if (!config.class_balance) {
                cm.prior = clamp_prob((qsum + s) / (static_cast<double>(n) + 2 * s));
            }
        }
        model.classes.push_back(std::move(cm));
    }
    return model;
}

const ClassModel* LabelModel::find(QuestionType t) const {
    for (const ClassModel& cm : classes) {
        if (cm.cls == t) return &cm;
    }
    return nullptr;
}

std::vector<WeakPosterior> predict_weak_labels(const LabelModel& model, const VoteMatrix& vm) {
    if (model.lf_names != vm.lf_names) {
        throw Error("ShapeMismatch", "vote matrix columns do not match the fitted model");
    }
    std::vector<WeakPosterior> out;
    out.reserve(vm.n_records());
    for (const std::vector<int>& row : vm.votes) {
        WeakPosterior wp;
        for (int v : row) {
            if (v != kAbstain) {
                wp.covered = true;
                break;
            }
        }
        for (const ClassModel& cm : model.classes) {
            bool any_fire = false;
            for (std::size_t col : cm.lf_columns) {
                if (row[col] != kAbstain) {
                    any_fire = true;
                    break;
                }
            }
            if (!any_fire) {
                // No evidence for this class: fall back to the prior.
                wp.probs[cm.cls] = cm.prior;
                continue;
            }
            double la = std::log(cm.prior);
            double lb = std::log(1.0 - cm.prior);
            for (std::size_t j = 0; j < cm.lf_columns.size(); ++j) {
                if (row[cm.lf_columns[j]] != kAbstain) {
                    la += std::log(cm.alpha[j]);
                    lb += std::log(cm.beta[j]);
                } else {
                    la += std::log(1.0 - cm.alpha[j]);
                    lb += std::log(1.0 - cm.beta[j]);
                }
            }
            wp.probs[cm.cls] = std::exp(la - logsumexp2(la, lb));
        }
        out.push_back(wp);
    }
    return out;
}

nlohmann::json label_model_to_json(const LabelModel& model) {
    nlohmann::json j;
    j["version"] = 1;
    j["config"] = {{"max_iters", model.config.max_iters},
                   {"tol", model.config.tol},
                   {"smoothing", model.config.smoothing}};
    nlohmann::json classes = nlohmann::json::array();
    for (const ClassModel& cm : model.classes) {
        nlohmann::json c;
        c["class"] = to_string(cm.cls);
        c["prior"] = cm.prior;
        nlohmann::json lfs = nlohmann::json::array();
        for (std::size_t j2 = 0; j2 < cm.lf_columns.size(); ++j2) {
            lfs.push_back({{"name", model.lf_names[cm.lf_columns[j2]]},
                           {"alpha", cm.alpha[j2]},
                           {"beta", cm.beta[j2]},
                           {"accuracy", cm.accuracy(j2)},
                           {"propensity", cm.propensity(j2)}});
        }
        c["labeling_functions"] = lfs;
        c["iterations"] = cm.objective_trace.size();
        classes.push_back(c);
    }
    j["classes"] = classes;
    return j;
}

std::vector<QuestionRecord> emit_silver_set(const std::vector<QuestionRecord>& records,
                                            const std::vector<WeakPosterior>& posteriors,
                                            double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw Error("InvalidThreshold", "threshold must be in (0,1)");
    }
    if (records.size() != posteriors.size()) {
        throw Error("ShapeMismatch", "records and posteriors are not aligned");
    }
    std::vector<QuestionRecord> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!posteriors[i].covered) continue;
        LabelSet labels;
        for (QuestionType t : all_types()) {
            if (posteriors[i].probs[t] >= threshold) labels.insert(t);
        }
        if (labels.empty()) labels.insert(posteriors[i].probs.argmax());
        QuestionRecord r = records[i];
        r.labels = labels;
        r.source = Source::silver;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace qtype::weaklabel

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qtype/augment.hpp"
#include "qtype/bundle.hpp"
#include "qtype/corpusgen.hpp"
#include "qtype/core.hpp"
#include "qtype/ensemble.hpp"
#include "qtype/eval.hpp"
#include "qtype/features.hpp"
#include "qtype/gbt.hpp"
#include "qtype/qparse.hpp"
#include "qtype/service.hpp"
#include "qtype/textprob.hpp"
#include "qtype/weaklabel.hpp"

namespace {

using nlohmann::json;
using namespace qtype;

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("IoError", "cannot open file for writing: " + path);
    return out;
}

struct GbtFlags {
    int rounds = 100;
    int depth = 4;
    double eta = 0.1;
    int min_leaf = 5;
    double lambda = 1.0;
    double subsample = 1.0;

    gbt::GbtParams to_params(std::uint64_t seed) const {
        gbt::GbtParams p;
        p.n_rounds = rounds;
        p.max_depth = depth;
        p.learning_rate = eta;
        p.min_samples_leaf = min_leaf;
        p.l2_lambda = lambda;
        p.subsample = subsample;
        p.seed = seed;
        return p;
    }
};

void add_gbt_flags(CLI::App* cmd, GbtFlags& flags) {
    cmd->add_option("--rounds", flags.rounds, "boosting rounds");
    cmd->add_option("--depth", flags.depth, "max tree depth");
    cmd->add_option("--eta", flags.eta, "learning rate");
    cmd->add_option("--min-leaf", flags.min_leaf, "min samples per leaf");
    cmd->add_option("--lambda", flags.lambda, "L2 regularization");
    cmd->add_option("--subsample", flags.subsample, "row subsample fraction");
}

features::FeatureSchema schema_for(const std::string& mode, const std::string& schema_path) {
    if (!schema_path.empty()) return features::load_schema(schema_path);
    return mode == "binary_mcq" ? features::mcq_schema() : features::default_multilabel_schema();
}

std::shared_ptr<const ensemble::TextProvider> make_provider(
    const std::string& text_model, const std::string& external_path,
    const std::vector<QuestionRecord>& train, const std::string& mode, std::uint64_t seed) {
    if (text_model == "none") return nullptr;
    if (text_model == "external") {
        std::vector<std::string> ids;
        for (const QuestionRecord& r : train) ids.push_back(r.id);
        return std::make_shared<ensemble::ExternalTextProvider>(
            textprob::load_external_probs(external_path, ids));
    }
    if (text_model != "builtin") {
        throw Error("InvalidParams", "--text-model must be builtin, external, or none");
    }
    std::vector<QuestionType> classes;
    if (mode == "binary_mcq") {
        classes = {QuestionType::MCQ};
    } else {
        classes = all_types();
    }
    textprob::TextTrainConfig tc;
    tc.seed = seed;
    return std::make_shared<ensemble::BuiltinTextProvider>(
        textprob::fit_text_model(train, classes, {}, tc));
}

// Aligns a predictions JSONL ({id, labels, scores}) with a gold dataset.
void load_eval_pair(const std::string& pred_path, const std::string& gold_path,
                    std::vector<eval::Prediction>& preds, std::vector<LabelSet>& gold,
                    std::vector<QuestionRecord>& gold_records) {
    gold_records = read_dataset(gold_path);
    std::unordered_map<std::string, eval::Prediction> by_id;

    std::ifstream in(pred_path);
    if (!in) throw Error("IoError", "cannot open predictions: " + pred_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception&) {
            throw Error("MalformedLine", "line " + std::to_string(lineno) + ": invalid JSON");
        }
        eval::Prediction p;
        if (j.contains("labels") && !j.at("labels").empty()) {
            p.labels = parse_label_set(j.at("labels").get<std::vector<std::string>>());
        }
        if (j.contains("scores")) {
            for (auto it = j.at("scores").begin(); it != j.at("scores").end(); ++it) {
                p.probs[parse_question_type(it.key())] = it.value().get<double>();
            }
        }
        by_id[j.at("id").get<std::string>()] = std::move(p);
    }

    for (const QuestionRecord& r : gold_records) {
        auto it = by_id.find(r.id);
        if (it == by_id.end()) throw Error("MissingId", "no prediction for id '" + r.id + "'");
        if (!r.labels) throw Error("UnlabeledRecord", "gold record '" + r.id + "' has no labels");
        preds.push_back(it->second);
        gold.push_back(*r.labels);
    }
}

int run(int argc, char** argv) {
    CLI::App app{"question-type identification pipeline"};
    app.require_subcommand(1);

    // ---- parse ----
    auto* cmd_parse = app.add_subcommand("parse", "structural analysis of question text");
    std::string parse_in, parse_out;
    cmd_parse->add_option("--in", parse_in, "input dataset JSONL")->required();
    cmd_parse->add_option("--out", parse_out, "output analysis JSONL")->required();

    // ---- featurize ----
    auto* cmd_feat = app.add_subcommand("featurize", "extract handcrafted feature vectors");
    std::string feat_in, feat_out, feat_lex, feat_schema, feat_mode = "multilabel";
    cmd_feat->add_option("--in", feat_in)->required();
    cmd_feat->add_option("--out", feat_out)->required();
    cmd_feat->add_option("--lexicons", feat_lex)->required();
    cmd_feat->add_option("--schema", feat_schema, "schema JSON; default by mode");
    cmd_feat->add_option("--mode", feat_mode)->check(CLI::IsMember({"binary_mcq", "multilabel"}));

    // ---- lf-apply ----
    auto* cmd_lf = app.add_subcommand("lf-apply", "apply labeling functions to a dataset");
    std::string lf_in, lf_out, lf_file, lf_lex;
    cmd_lf->add_option("--in", lf_in)->required();
    cmd_lf->add_option("--lfs", lf_file)->required();
    cmd_lf->add_option("--lexicons", lf_lex)->required();
    cmd_lf->add_option("--out", lf_out)->required();

    // ---- label-model ----
    auto* cmd_lm = app.add_subcommand("label-model", "fit the generative label model on votes");
    std::string lm_votes, lm_lfs, lm_model_out, lm_records, lm_silver_out;
    double lm_threshold = 0.5;
    cmd_lm->add_option("--votes", lm_votes)->required();
    cmd_lm->add_option("--lfs", lm_lfs)->required();
    cmd_lm->add_option("--model-out", lm_model_out)->required();
    cmd_lm->add_option("--records", lm_records, "dataset to label (enables --silver-out)");
    cmd_lm->add_option("--silver-out", lm_silver_out, "silver dataset JSONL");
    cmd_lm->add_option("--threshold", lm_threshold, "posterior threshold for silver labels");

    // ---- augment ----
    auto* cmd_aug = app.add_subcommand("augment", "similarity-window weak labeling");
    std::string aug_unlabeled, aug_gold, aug_exclude, aug_out, aug_embeddings;
    double aug_lower = 0.80, aug_upper = 0.95;
    cmd_aug->add_option("--unlabeled", aug_unlabeled)->required();
    cmd_aug->add_option("--gold", aug_gold)->required();
    cmd_aug->add_option("--exclude", aug_exclude, "dataset whose texts must not be emitted");
    cmd_aug->add_option("--out", aug_out)->required();
    cmd_aug->add_option("--lower", aug_lower);
    cmd_aug->add_option("--upper", aug_upper);
    cmd_aug->add_option("--embeddings", aug_embeddings,
                        "external embedding JSONL replacing the internal vectorizer");

    // ---- gen ----
    auto* cmd_gen = app.add_subcommand("gen", "generate a synthetic labeled corpus");
    std::string gen_templates, gen_out, gen_prefix = "syn";
    std::uint64_t gen_seed = 0;
    int gen_per_class = 0, gen_total = 0;
    corpusgen::NoiseConfig gen_noise;
    cmd_gen->add_option("--templates", gen_templates)->required();
    cmd_gen->add_option("--seed", gen_seed)->required();
    cmd_gen->add_option("--n-per-class", gen_per_class);
    cmd_gen->add_option("--n-total", gen_total, "weighted class-mix mode");
    cmd_gen->add_option("--noise-drop-markers", gen_noise.drop_option_markers);
    cmd_gen->add_option("--noise-truncate", gen_noise.truncate_tail);
    cmd_gen->add_option("--noise-case", gen_noise.casing_jitter);
    cmd_gen->add_option("--id-prefix", gen_prefix);
    cmd_gen->add_option("--out", gen_out)->required();

    // ---- train ----
    auto* cmd_train = app.add_subcommand("train", "train an ensemble and write a bundle");
    std::string train_mode, train_in, train_lex, train_schema, train_out;
    std::string train_text_model = "builtin", train_external;
    std::string train_calibrate_on;
    double train_calibrate_precision = 0.0;
    std::uint64_t train_seed = 0;
    GbtFlags train_flags;
    cmd_train->add_option("--mode", train_mode)
        ->required()
        ->check(CLI::IsMember({"binary_mcq", "multilabel"}));
    cmd_train->add_option("--train", train_in)->required();
    cmd_train->add_option("--lexicons", train_lex)->required();
    cmd_train->add_option("--schema", train_schema, "multilabel feature schema JSON");
    cmd_train->add_option("--out", train_out, "bundle directory")->required();
    cmd_train->add_option("--seed", train_seed)->required();
    cmd_train->add_option("--text-model", train_text_model, "builtin|external|none");
    cmd_train->add_option("--external-probs", train_external);
    cmd_train->add_option("--calibrate-on", train_calibrate_on,
                          "labeled JSONL for threshold calibration (binary mode)");
    cmd_train->add_option("--calibrate-precision", train_calibrate_precision,
                          "precision target for calibration");
    add_gbt_flags(cmd_train, train_flags);

    // ---- tune ----
    auto* cmd_tune = app.add_subcommand("tune", "random hyperparameter search");
    std::string tune_mode, tune_train, tune_val, tune_lex, tune_out, tune_objective = "r_at_p";
    double tune_precision = 0.95;
    int tune_trials = 20;
    std::uint64_t tune_seed = 0;
    cmd_tune->add_option("--mode", tune_mode)
        ->required()
        ->check(CLI::IsMember({"binary_mcq", "multilabel"}));
    cmd_tune->add_option("--train", tune_train)->required();
    cmd_tune->add_option("--val", tune_val)->required();
    cmd_tune->add_option("--lexicons", tune_lex)->required();
    cmd_tune->add_option("--objective", tune_objective, "r_at_p|weighted_f1");
    cmd_tune->add_option("--precision", tune_precision);
    cmd_tune->add_option("--trials", tune_trials);
    cmd_tune->add_option("--seed", tune_seed)->required();
    cmd_tune->add_option("--out", tune_out, "best params JSON")->required();

    // ---- predict ----
    auto* cmd_pred = app.add_subcommand("predict", "label a dataset with a trained bundle");
    std::string pred_bundle, pred_in, pred_out;
    cmd_pred->add_option("--bundle", pred_bundle, "bundle directory (or QTYPE_BUNDLE)");
    cmd_pred->add_option("--in", pred_in)->required();
    cmd_pred->add_option("--out", pred_out)->required();

    // ---- eval ----
    auto* cmd_eval = app.add_subcommand("eval", "score predictions against gold labels");
    std::string eval_mode, eval_pred, eval_gold, eval_out, eval_pr_csv;
    cmd_eval->add_option("--mode", eval_mode)
        ->required()
        ->check(CLI::IsMember({"binary_mcq", "multilabel"}));
    cmd_eval->add_option("--pred", eval_pred)->required();
    cmd_eval->add_option("--gold", eval_gold)->required();
    cmd_eval->add_option("--out", eval_out, "report JSON (default stdout)");
    cmd_eval->add_option("--pr-csv", eval_pr_csv, "write the PR curve as CSV (binary mode)");

    // ---- fn-report ----
    auto* cmd_fn = app.add_subcommand("fn-report", "false-negative analysis for the MCQ mode");
    std::string fn_pred, fn_gold, fn_lex, fn_out;
    cmd_fn->add_option("--pred", fn_pred)->required();
    cmd_fn->add_option("--gold", fn_gold)->required();
    cmd_fn->add_option("--lexicons", fn_lex)->required();
    cmd_fn->add_option("--out", fn_out, "report JSON (default stdout)");

    // ---- serve ----
    auto* cmd_serve = app.add_subcommand("serve", "HTTP inference service");
    std::string serve_bundle, serve_host = "127.0.0.1";
    int serve_port = 8080;
    cmd_serve->add_option("--bundle", serve_bundle, "bundle directory (or QTYPE_BUNDLE)");
    cmd_serve->add_option("--host", serve_host);
    cmd_serve->add_option("--port", serve_port);

    CLI11_PARSE(app, argc, argv);

    auto bundle_path = [&](const std::string& flag) {
        if (!flag.empty()) return flag;
        const char* env = std::getenv("QTYPE_BUNDLE");
        if (env != nullptr && *env != '\0') return std::string(env);
        throw Error("InvalidParams", "no bundle path: pass --bundle or set QTYPE_BUNDLE");
    };

    if (cmd_parse->parsed()) {
        std::vector<QuestionRecord> records = read_dataset(parse_in);
        std::ofstream out = open_out(parse_out);
        for (const QuestionRecord& r : records) {
            json j = qparse::analysis_to_json(qparse::analyze(r));
            j["id"] = r.id;
            out << j.dump() << '\n';
        }
        return 0;
    }

    if (cmd_feat->parsed()) {
        std::vector<QuestionRecord> records = read_dataset(feat_in);
        std::vector<features::Lexicon> lexicons = features::load_lexicons(feat_lex);
        features::FeatureSchema schema =
            schema_for(feat_mode == "binary_mcq" ? "binary_mcq" : "multilabel", feat_schema);
        std::ofstream out = open_out(feat_out);
        for (const QuestionRecord& r : records) {
            features::FeatureVector fv =
                features::extract_features(r, qparse::analyze(r), lexicons, schema);
            json j;
            j["id"] = r.id;
            j["features"] = fv.values;
            out << j.dump() << '\n';
        }
        return 0;
    }

    if (cmd_lf->parsed()) {
        std::vector<QuestionRecord> records = read_dataset(lf_in);
        std::vector<features::Lexicon> lexicons = features::load_lexicons(lf_lex);
        std::vector<weaklabel::LabelingFunction> lfs = weaklabel::load_labeling_functions(lf_file);
        weaklabel::write_votes(lf_out, weaklabel::apply_lfs(lfs, records, lexicons));
        return 0;
    }

    if (cmd_lm->parsed()) {
        std::vector<weaklabel::LabelingFunction> lfs = weaklabel::load_labeling_functions(lm_lfs);
        weaklabel::VoteMatrix vm = weaklabel::read_votes(lm_votes, lfs);
        weaklabel::LabelModel model = weaklabel::fit_label_model(vm);
        open_out(lm_model_out) << weaklabel::label_model_to_json(model).dump(2) << '\n';
        if (!lm_silver_out.empty()) {
            if (lm_records.empty()) {
                throw Error("InvalidParams", "--silver-out requires --records");
            }
            std::vector<QuestionRecord> records = read_dataset(lm_records);
            if (records.size() != vm.n_records()) {
                throw Error("ShapeMismatch", "records and votes have different sizes");
            }
            auto posteriors = weaklabel::predict_weak_labels(model, vm);
            write_dataset(lm_silver_out,
                          weaklabel::emit_silver_set(records, posteriors, lm_threshold));
        }
        return 0;
    }

    if (cmd_aug->parsed()) {
        std::vector<QuestionRecord> unlabeled = read_dataset(aug_unlabeled);
        std::vector<QuestionRecord> gold = read_dataset(aug_gold);
        augment::SimilarityConfig config;
        config.lower = aug_lower;
        config.upper = aug_upper;
        if (!aug_exclude.empty()) {
            config.exclusion = augment::exclusion_hashes(read_dataset(aug_exclude));
        }
        if (!aug_embeddings.empty()) {
            augment::EmbeddingTable table = augment::load_embeddings(aug_embeddings);
            write_dataset(aug_out,
                          augment::augment_with_embeddings(unlabeled, gold, table, config));
            return 0;
        }
        textprob::TextVectorizer vec{textprob::VectorizerConfig{}};
        std::vector<std::string> texts;
        for (const QuestionRecord& r : gold) texts.push_back(r.text);
        for (const QuestionRecord& r : unlabeled) texts.push_back(r.text);
        vec.fit(texts);
        write_dataset(aug_out, augment::augment(unlabeled, gold, vec, config));
        return 0;
    }

    if (cmd_gen->parsed()) {
        corpusgen::GenConfig config;
        config.seed = gen_seed;
        config.n_per_class = gen_per_class;
        config.n_total = gen_total;
        config.noise = gen_noise;
        config.id_prefix = gen_prefix;
        write_dataset(gen_out,
                      corpusgen::generate(config, corpusgen::load_templates(gen_templates)));
        return 0;
    }

    if (cmd_train->parsed()) {
        std::vector<QuestionRecord> train = read_dataset(train_in);
        std::vector<features::Lexicon> lexicons = features::load_lexicons(train_lex);
        auto provider = make_provider(train_text_model, train_external, train, train_mode,
                                      train_seed);
        gbt::GbtParams params = train_flags.to_params(train_seed);

        bundle::Bundle b;
        if (train_mode == "binary_mcq") {
            b.mode = bundle::Mode::binary_mcq;
            ensemble::McqEnsemble e =
                ensemble::train_mcq_ensemble(train, provider, lexicons, params);
            if (!train_calibrate_on.empty()) {
                if (!(train_calibrate_precision > 0.0)) {
                    throw Error("InvalidParams",
                                "--calibrate-on requires --calibrate-precision");
                }
                std::vector<QuestionRecord> cal = read_dataset(train_calibrate_on);
                std::vector<double> scores;
                std::vector<int> truth;
                for (const QuestionRecord& r : cal) {
                    if (!r.labels) throw Error("UnlabeledRecord", "calibration record unlabeled");
                    scores.push_back(ensemble::predict_mcq(e, r).score);
                    truth.push_back(r.labels->contains(QuestionType::MCQ) ? 1 : 0);
                }
                e.threshold = ensemble::calibrate_threshold_at_precision(
                                  scores, truth, train_calibrate_precision)
                                  .threshold;
            }
            b.mcq = std::move(e);
        } else {
            b.mode = bundle::Mode::multilabel;
            features::FeatureSchema schema = schema_for("multilabel", train_schema);
            b.multilabel = ensemble::train_multilabel_ensemble(train, provider, lexicons, schema,
                                                               params);
        }
        bundle::save_bundle(train_out, b);
        std::cout << bundle::load_bundle(train_out).model_version << '\n';
        return 0;
    }

    if (cmd_tune->parsed()) {
        std::vector<QuestionRecord> train = read_dataset(tune_train);
        std::vector<QuestionRecord> val = read_dataset(tune_val);
        std::vector<features::Lexicon> lexicons = features::load_lexicons(tune_lex);

        gbt::TuneConfig config;
        config.n_trials = tune_trials;
        config.seed = tune_seed;
        config.precision_target = tune_precision;
        config.objective = tune_objective == "weighted_f1" ? gbt::TuneObjective::weighted_f1
                                                           : gbt::TuneObjective::recall_at_precision;

        features::FeatureSchema schema = schema_for(tune_mode, "");
        auto rows_of = [&](const std::vector<QuestionRecord>& rs) {
            gbt::Matrix m;
            for (const QuestionRecord& r : rs) {
                m.push_back(
                    features::extract_features(r, qparse::analyze(r), lexicons, schema).values);
            }
            return m;
        };
        gbt::TuneResult result;
        if (tune_mode == "binary_mcq") {
            auto labels_of = [&](const std::vector<QuestionRecord>& rs) {
                std::vector<int> y;
                for (const QuestionRecord& r : rs) {
                    if (!r.labels) throw Error("UnlabeledRecord", "record unlabeled: " + r.id);
                    y.push_back(r.labels->contains(QuestionType::MCQ) ? 1 : 0);
                }
                return y;
            };
            result = gbt::tune_binary(rows_of(train), labels_of(train), rows_of(val),
                                      labels_of(val), config);
        } else {
            auto labels_of = [&](const std::vector<QuestionRecord>& rs) {
                std::vector<LabelSet> y;
                for (const QuestionRecord& r : rs) {
                    if (!r.labels) throw Error("UnlabeledRecord", "record unlabeled: " + r.id);
                    y.push_back(*r.labels);
                }
                return y;
            };
            result = gbt::tune_one_vs_all(rows_of(train), labels_of(train), rows_of(val),
                                          labels_of(val), config);
        }
        json j;
        j["best_score"] = result.best_score;
        j["best_trial"] = result.best_trial;
        j["params"] = {{"n_rounds", result.best_params.n_rounds},
                       {"max_depth", result.best_params.max_depth},
                       {"learning_rate", result.best_params.learning_rate},
                       {"min_samples_leaf", result.best_params.min_samples_leaf},
                       {"l2_lambda", result.best_params.l2_lambda},
                       {"subsample", result.best_params.subsample},
                       {"seed", result.best_params.seed}};
        open_out(tune_out) << j.dump(2) << '\n';
        return 0;
    }

    if (cmd_pred->parsed()) {
        bundle::Bundle b = bundle::load_bundle(bundle_path(pred_bundle));
        std::vector<QuestionRecord> records = read_dataset(pred_in);
        std::ofstream out = open_out(pred_out);
        for (const QuestionRecord& r : records) {
            bundle::InferenceResult res = bundle::infer(b, r);
            json j;
            j["id"] = r.id;
            j["labels"] = res.labels;
            j["scores"] = res.scores;
            out << j.dump() << '\n';
        }
        return 0;
    }

    if (cmd_eval->parsed()) {
        std::vector<eval::Prediction> preds;
        std::vector<LabelSet> gold;
        std::vector<QuestionRecord> gold_records;
        load_eval_pair(eval_pred, eval_gold, preds, gold, gold_records);
        eval::EvalMode mode = eval_mode == "binary_mcq" ? eval::EvalMode::binary_mcq
                                                        : eval::EvalMode::multilabel;
        eval::EvalReport report = eval::evaluate(preds, gold, mode);
        json j = eval::report_to_json(report, mode);
        if (eval_out.empty()) {
            std::cout << j.dump(2) << '\n';
        } else {
            open_out(eval_out) << j.dump(2) << '\n';
        }
        if (!eval_pr_csv.empty() && mode == eval::EvalMode::binary_mcq) {
            std::vector<double> scores;
            std::vector<int> truth;
            for (std::size_t i = 0; i < preds.size(); ++i) {
                scores.push_back(preds[i].probs[QuestionType::MCQ]);
                truth.push_back(gold[i].contains(QuestionType::MCQ) ? 1 : 0);
            }
            open_out(eval_pr_csv) << eval::pr_curve_csv(eval::pr_curve(scores, truth));
        }
        return 0;
    }

    if (cmd_fn->parsed()) {
        std::vector<eval::Prediction> preds;
        std::vector<LabelSet> gold;
        std::vector<QuestionRecord> gold_records;
        load_eval_pair(fn_pred, fn_gold, preds, gold, gold_records);
        std::vector<features::Lexicon> lexicons = features::load_lexicons(fn_lex);
        json j = eval::fn_report_to_json(
            eval::false_negative_report(gold_records, preds, gold, lexicons));
        if (fn_out.empty()) {
            std::cout << j.dump(2) << '\n';
        } else {
            open_out(fn_out) << j.dump(2) << '\n';
        }
        return 0;
    }

    if (cmd_serve->parsed()) {
        auto b = std::make_shared<bundle::Bundle>(bundle::load_bundle(bundle_path(serve_bundle)));
        service::Server server(std::move(b));
        std::cerr << "serving on " << serve_host << ":" << serve_port << '\n';
        server.run(serve_host, serve_port);
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const qtype::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == "IoError" ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

#include "qtype/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qtype/eval.hpp"
#include "qtype/util.hpp"

namespace qtype::gbt {

namespace {

double sigmoid(double z) {
    if (z >= 0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    double e = std::exp(z);
    return e / (1.0 + e);
}

double logistic_loss(double margin, int y) {
    return std::max(margin, 0.0) - static_cast<double>(y) * margin +
           std::log1p(std::exp(-std::abs(margin)));
}

struct BuildNode {
    double sum_g = 0.0;
    double sum_h = 0.0;
    int count = 0;
    int depth = 0;
    // best split so far, total order (gain desc, feature asc, threshold asc)
    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    bool open = false;  // still a split candidate this level
    int left = -1;
    int right = -1;
};

double split_term(double g, double h, double lambda) { return g * g / (h + lambda); }

}  // namespace

void GbtParams::validate() const {
    if (n_rounds < 1) throw Error("InvalidParams", "n_rounds must be >= 1");
    if (max_depth < 1) throw Error("InvalidParams", "max_depth must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
        throw Error("InvalidParams", "learning_rate must be in (0,1]");
    }
    if (min_samples_leaf < 1) throw Error("InvalidParams", "min_samples_leaf must be >= 1");
    if (l2_lambda < 0.0) throw Error("InvalidParams", "l2_lambda must be >= 0");
    if (!(subsample > 0.0 && subsample <= 1.0)) {
        throw Error("InvalidParams", "subsample must be in (0,1]");
    }
}

double RegressionTree::predict(const std::vector<double>& row) const {
    int node = 0;
    while (!nodes[static_cast<std::size_t>(node)].is_leaf()) {
        const TreeNode& n = nodes[static_cast<std::size_t>(node)];
        node = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(node)].weight;
}

int RegressionTree::depth() const {
    // Depth of the deepest leaf; a lone root is depth 0.
    std::vector<int> depth_of(nodes.size(), 0);
    int deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!nodes[i].is_leaf()) {
            depth_of[static_cast<std::size_t>(nodes[i].left)] = depth_of[i] + 1;
            depth_of[static_cast<std::size_t>(nodes[i].right)] = depth_of[i] + 1;
        } else {
            deepest = std::max(deepest, depth_of[i]);
        }
    }
    return deepest;
}

double BinaryGbtModel::predict_margin(const std::vector<double>& row) const {
    if (row.size() != n_features) {
        throw Error("SchemaMismatch", "feature row has " + std::to_string(row.size()) +
                                          " values, model expects " + std::to_string(n_features));
    }
    double margin = base_margin;
    for (const RegressionTree& t : trees) margin += t.predict(row);
    return margin;
}

double BinaryGbtModel::predict_proba(const std::vector<double>& row) const {
    return sigmoid(predict_margin(row));
}

double predict_proba(const BinaryGbtModel& model, const std::vector<double>& row) {
    return model.predict_proba(row);
}

BinaryGbtModel fit_binary(const Matrix& features, const std::vector<int>& labels,
                          const GbtParams& params) {
    params.validate();
    const std::size_t n = features.size();
    if (n == 0) throw Error("EmptyData", "no training rows");
    if (labels.size() != n) throw Error("ShapeMismatch", "labels do not match feature rows");
    const std::size_t f = features[0].size();
    for (const std::vector<double>& row : features) {
        if (row.size() != f) throw Error("ShapeMismatch", "ragged feature matrix");
        for (double v : row) {
            if (!std::isfinite(v)) throw Error("NonFiniteFeature", "feature values must be finite");
        }
    }
    for (int y : labels) {
        if (y != 0 && y != 1) throw Error("InvalidLabel", "binary labels must be 0 or 1");
    }

    BinaryGbtModel model;
    model.params = params;
    model.n_features = f;

    const std::size_t pos = static_cast<std::size_t>(
        std::count(labels.begin(), labels.end(), 1));
    model.base_margin = std::log((static_cast<double>(pos) + 1.0) /
                                 (static_cast<double>(n - pos) + 1.0));

    std::vector<double> margins(n, model.base_margin);
    auto mean_loss = [&]() {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += logistic_loss(margins[i], labels[i]);
        return total / static_cast<double>(n);
    };
    model.train_loss.push_back(mean_loss());

    // Presorted row indices per feature; ties keep row order so results are
    // independent of any parallel split search.
    std::vector<std::vector<std::uint32_t>> sorted(f, std::vector<std::uint32_t>(n));
    for (std::size_t j = 0; j < f; ++j) {
        std::iota(sorted[j].begin(), sorted[j].end(), 0u);
        std::stable_sort(sorted[j].begin(), sorted[j].end(), [&](std::uint32_t a, std::uint32_t b) {
            return features[a][j] < features[b][j];
        });
    }

    Rng rng(params.seed);
    std::vector<double> g(n);
    std::vector<double> h(n);
    std::vector<int> node_of(n);
    std::vector<std::uint32_t> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), 0u);

    for (int round = 0; round < params.n_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            double p = sigmoid(margins[i]);
            g[i] = p - static_cast<double>(labels[i]);
            h[i] = p * (1.0 - p);
        }

        std::fill(node_of.begin(), node_of.end(), -1);
        if (params.subsample < 1.0) {
            std::size_t take = std::max<std::size_t>(
                1, static_cast<std::size_t>(params.subsample * static_cast<double>(n)));
            std::vector<std::uint32_t> pool = all_rows;
            rng.shuffle(pool);
            for (std::size_t k = 0; k < take; ++k) node_of[pool[k]] = 0;
        } else {
            std::fill(node_of.begin(), node_of.end(), 0);
        }

        std::vector<BuildNode> nodes(1);
        nodes[0].depth = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (node_of[i] != 0) continue;
            nodes[0].sum_g += g[i];
            nodes[0].sum_h += h[i];
            ++nodes[0].count;
        }

        std::vector<int> frontier = {0};
        while (!frontier.empty()) {
            for (int id : frontier) {
                BuildNode& node = nodes[static_cast<std::size_t>(id)];
                node.open = node.depth < params.max_depth &&
                            node.count >= 2 * params.min_samples_leaf;
                node.best_gain = 0.0;
                node.best_feature = -1;
            }

            // running left-side stats per frontier node, rebuilt per feature
            std::vector<double> gl(nodes.size());
            std::vector<double> hl(nodes.size());
            std::vector<int> cl(nodes.size());
            std::vector<double> last_val(nodes.size());
            std::vector<char> has_last(nodes.size());

            for (std::size_t j = 0; j < f; ++j) {
                for (int id : frontier) {
                    gl[static_cast<std::size_t>(id)] = 0.0;
                    hl[static_cast<std::size_t>(id)] = 0.0;
                    cl[static_cast<std::size_t>(id)] = 0;
                    has_last[static_cast<std::size_t>(id)] = 0;
                }
                for (std::uint32_t r : sorted[j]) {
                    int id = node_of[r];
                    if (id < 0) continue;
                    BuildNode& node = nodes[static_cast<std::size_t>(id)];
                    if (!node.open) continue;
                    auto uid = static_cast<std::size_t>(id);
                    double v = features[r][j];
                    if (has_last[uid] && v > last_val[uid]) {
                        int right_count = node.count - cl[uid];
                        if (cl[uid] >= params.min_samples_leaf &&
                            right_count >= params.min_samples_leaf) {
                            double gain =
                                0.5 * (split_term(gl[uid], hl[uid], params.l2_lambda) +
                                       split_term(node.sum_g - gl[uid], node.sum_h - hl[uid],
                                                  params.l2_lambda) -
                                       split_term(node.sum_g, node.sum_h, params.l2_lambda));
                            // Strictly-greater keeps the lowest feature index and
                            // threshold among equal gains.
                            if (gain > node.best_gain) {
                                node.best_gain = gain;
                                node.best_feature = static_cast<int>(j);
                                node.best_threshold = (last_val[uid] + v) / 2.0;
                            }
                        }
                    }
                    gl[uid] += g[r];
                    hl[uid] += h[r];
                    ++cl[uid];
                    last_val[uid] = v;
                    has_last[uid] = 1;
                }
            }

            std::vector<int> next;
            for (int id : frontier) {
                auto uid = static_cast<std::size_t>(id);
                if (!nodes[uid].open || nodes[uid].best_feature < 0 || nodes[uid].best_gain <= 0.0) {
                    continue;  // becomes a leaf
                }
                int left = static_cast<int>(nodes.size());
                nodes.emplace_back();
                int right = static_cast<int>(nodes.size());
                nodes.emplace_back();
                nodes[uid].left = left;
                nodes[uid].right = right;
                nodes[static_cast<std::size_t>(left)].depth = nodes[uid].depth + 1;
                nodes[static_cast<std::size_t>(right)].depth = nodes[uid].depth + 1;
                for (std::size_t i = 0; i < n; ++i) {
                    if (node_of[i] != id) continue;
                    int child = features[i][static_cast<std::size_t>(nodes[uid].best_feature)] <=
                                        nodes[uid].best_threshold
                                    ? left
                                    : right;
                    node_of[i] = child;
                    auto cu = static_cast<std::size_t>(child);
                    nodes[cu].sum_g += g[i];
                    nodes[cu].sum_h += h[i];
                    ++nodes[cu].count;
                }
                next.push_back(left);
                next.push_back(right);
            }
            frontier = std::move(next);
        }

        if (nodes.size() == 1) {
            // No admissible root split. With the full sample this repeats
            // forever, so stop; with subsampling a later draw may differ.
            if (params.subsample >= 1.0) break;
            model.train_loss.push_back(mean_loss());
            continue;
        }

        RegressionTree tree;
        tree.nodes.resize(nodes.size());
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const BuildNode& b = nodes[k];
            TreeNode& t = tree.nodes[k];
            if (b.left >= 0) {
                t.feature = b.best_feature;
                t.threshold = b.best_threshold;
                t.left = b.left;
                t.right = b.right;
            } else {
                t.weight = -b.sum_g / (b.sum_h + params.l2_lambda) * params.learning_rate;
            }
        }

        for (std::size_t i = 0; i < n; ++i) margins[i] += tree.predict(features[i]);
        model.trees.push_back(std::move(tree));
        model.train_loss.push_back(mean_loss());
    }
    return model;
}

OneVsAllModel fit_one_vs_all(const Matrix& features, const std::vector<LabelSet>& labelsets,
                             const GbtParams& params) {
    if (features.size() != labelsets.size()) {
        throw Error("ShapeMismatch", "labelsets do not match feature rows");
    }
    OneVsAllModel model;
    model.n_features = features.empty() ? 0 : features[0].size();
    std::vector<int> y(features.size());
    for (QuestionType t : all_types()) {
        for (std::size_t i = 0; i < labelsets.size(); ++i) {
            y[i] = labelsets[i].contains(t) ? 1 : 0;
        }
        model.models[static_cast<std::size_t>(t)] = fit_binary(features, y, params);
    }
    return model;
}

ProbabilityVector predict_one_vs_all(const OneVsAllModel& model, const std::vector<double>& row) {
    ProbabilityVector out;
    for (QuestionType t : all_types()) {
        out[t] = model.models[static_cast<std::size_t>(t)].predict_proba(row);
    }
    return out;
}

LabelSet labels_from_probs(const ProbabilityVector& probs,
                           const std::array<double, kNumTypes>& thresholds) {
    LabelSet labels;
    for (QuestionType t : all_types()) {
        if (probs[t] >= thresholds[static_cast<std::size_t>(t)]) labels.insert(t);
    }
    if (labels.empty()) labels.insert(probs.argmax());
    return labels;
}

LabelSet predict_multilabel(const OneVsAllModel& model, const std::vector<double>& row,
                            const std::array<double, kNumTypes>& thresholds) {
    return labels_from_probs(predict_one_vs_all(model, row), thresholds);
}

namespace {

nlohmann::json params_to_json(const GbtParams& p) {
    return {{"n_rounds", p.n_rounds},           {"max_depth", p.max_depth},
            {"learning_rate", p.learning_rate}, {"min_samples_leaf", p.min_samples_leaf},
            {"l2_lambda", p.l2_lambda},         {"subsample", p.subsample},
            {"seed", p.seed}};
}

GbtParams params_from_json(const nlohmann::json& j) {
    GbtParams p;
    p.n_rounds = j.at("n_rounds").get<int>();
    p.max_depth = j.at("max_depth").get<int>();
    p.learning_rate = j.at("learning_rate").get<double>();
    p.min_samples_leaf = j.at("min_samples_leaf").get<int>();
    p.l2_lambda = j.at("l2_lambda").get<double>();
    p.subsample = j.at("subsample").get<double>();
    p.seed = j.at("seed").get<std::uint64_t>();
    return p;
}

}  // namespace

nlohmann::json model_to_json(const BinaryGbtModel& model) {
    nlohmann::json trees = nlohmann::json::array();
    for (const RegressionTree& t : model.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const TreeNode& n : t.nodes) {
            nodes.push_back({{"feature", n.feature},
                             {"threshold", n.threshold},
                             {"left", n.left},
                             {"right", n.right},
                             {"weight", n.weight}});
        }
        trees.push_back({{"nodes", nodes}});
    }
    nlohmann::json j;
    j["version"] = 1;
    j["params"] = params_to_json(model.params);
    j["base_margin"] = model.base_margin;
    j["n_features"] = model.n_features;
    j["trees"] = trees;
    return j;
}

BinaryGbtModel model_from_json(const nlohmann::json& j) {
    BinaryGbtModel model;
    model.params = params_from_json(j.at("params"));
    model.base_margin = j.at("base_margin").get<double>();
    model.n_features = j.at("n_features").get<std::size_t>();
    for (const auto& tj : j.at("trees")) {
        RegressionTree tree;
        for (const auto& nj : tj.at("nodes")) {
            TreeNode n;
            n.feature = nj.at("feature").get<int>();
            n.threshold = nj.at("threshold").get<double>();
            n.left = nj.at("left").get<int>();
            n.right = nj.at("right").get<int>();
            n.weight = nj.at("weight").get<double>();
            tree.nodes.push_back(n);
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

nlohmann::json ova_to_json(const OneVsAllModel& model) {
    nlohmann::json j;
    j["version"] = 1;
    j["n_features"] = model.n_features;
    nlohmann::json models;
    for (QuestionType t : all_types()) {
        models[to_string(t)] = model_to_json(model.models[static_cast<std::size_t>(t)]);
    }
    j["models"] = models;
    return j;
}

OneVsAllModel ova_from_json(const nlohmann::json& j) {
    OneVsAllModel model;
    model.n_features = j.at("n_features").get<std::size_t>();
    for (QuestionType t : all_types()) {
        model.models[static_cast<std::size_t>(t)] = model_from_json(j.at("models").at(to_string(t)));
    }
    return model;
}

namespace {

GbtParams sample_params(Rng& rng, const TuneSpace& s) {
    GbtParams p;
    p.max_depth = rng.next_int(s.depth_lo, s.depth_hi);
    p.n_rounds = rng.next_int(s.rounds_lo, s.rounds_hi);
    p.learning_rate = rng.next_real(s.eta_lo, s.eta_hi);
    p.l2_lambda = rng.next_real(s.lambda_lo, s.lambda_hi);
    p.min_samples_leaf = rng.next_int(s.min_leaf_lo, s.min_leaf_hi);
    p.subsample = rng.next_real(s.subsample_lo, s.subsample_hi);
    p.seed = rng.next_u64();
    return p;
}

}  // namespace

TuneResult tune_binary(const Matrix& train_x, const std::vector<int>& train_y,
                       const Matrix& val_x, const std::vector<int>& val_y,
                       const TuneConfig& config) {
    if (config.n_trials < 1) throw Error("InvalidParams", "n_trials must be >= 1");
    Rng rng(config.seed);
    TuneResult result;
    result.best_score = -std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < config.n_trials; ++trial) {
        GbtParams params = sample_params(rng, config.space);
        BinaryGbtModel model = fit_binary(train_x, train_y, params);
        std::vector<double> scores;
        scores.reserve(val_x.size());
        for (const std::vector<double>& row : val_x) scores.push_back(model.predict_proba(row));

        double score = 0.0;
        if (config.objective == TuneObjective::recall_at_precision) {
            score = eval::recall_at_precision(eval::pr_curve(scores, val_y),
                                              config.precision_target);
        } else {
            // f1 of the positive class at threshold 0.5
            int tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < scores.size(); ++i) {
                bool pred = scores[i] >= 0.5;
                if (pred && val_y[i] == 1) ++tp;
                if (pred && val_y[i] == 0) ++fp;
                if (!pred && val_y[i] == 1) ++fn;
            }
            double prec = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
            double rec = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
            score = eval::f_beta(prec, rec, 1.0);
        }
        if (score > result.best_score) {
            result.best_score = score;
            result.best_params = params;
            result.best_trial = trial;
        }
    }
    return result;
}

TuneResult tune_one_vs_all(const Matrix& train_x, const std::vector<LabelSet>& train_y,
                           const Matrix& val_x, const std::vector<LabelSet>& val_y,
                           const TuneConfig& config) {
    if (config.n_trials < 1) throw Error("InvalidParams", "n_trials must be >= 1");
    Rng rng(config.seed);
    std::array<double, kNumTypes> thresholds;
    thresholds.fill(0.5);

    TuneResult result;
    result.best_score = -std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < config.n_trials; ++trial) {
        GbtParams params = sample_params(rng, config.space);
        OneVsAllModel model = fit_one_vs_all(train_x, train_y, params);
        std::vector<eval::Prediction> preds;
        preds.reserve(val_x.size());
        for (const std::vector<double>& row : val_x) {
            eval::Prediction p;
            p.probs = predict_one_vs_all(model, row);
            p.labels = labels_from_probs(p.probs, thresholds);
            preds.push_back(std::move(p));
        }
        eval::EvalReport report = eval::evaluate(preds, val_y, eval::EvalMode::multilabel);
        double score = report.weighted_f1;
        if (score > result.best_score) {
            result.best_score = score;
            result.best_params = params;
            result.best_trial = trial;
        }
    }
    return result;
}

}  // namespace qtype::gbt

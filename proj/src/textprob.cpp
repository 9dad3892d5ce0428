#include "qtype/textprob.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "qtype/qparse.hpp"

namespace qtype::textprob {

namespace {

double sigmoid(double z) {
    if (z >= 0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    double e = std::exp(z);
    return e / (1.0 + e);
}

// Numerically stable logistic loss for margin m against y in {0,1}.
double log_loss(double margin, int y) {
    return std::max(margin, 0.0) - static_cast<double>(y) * margin +
           std::log1p(std::exp(-std::abs(margin)));
}

}  // namespace

double dot(const SparseVec& a, const SparseVec& b) {
    double acc = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.entries.size() && j < b.entries.size()) {
        if (a.entries[i].first < b.entries[j].first) {
            ++i;
        } else if (a.entries[i].first > b.entries[j].first) {
            ++j;
        } else {
            acc += a.entries[i].second * b.entries[j].second;
            ++i;
            ++j;
        }
    }
    return acc;
}

double norm(const SparseVec& a) {
    double acc = 0.0;
    for (const auto& [idx, v] : a.entries) acc += v * v;
    return std::sqrt(acc);
}

std::vector<std::pair<std::uint32_t, double>> TextVectorizer::hashed_counts(
    std::string_view text) const {
    const std::string lowered = to_lower(text);
    std::vector<qparse::Span> spans = qparse::tokenize(lowered);
    if (static_cast<int>(spans.size()) > cfg_.max_tokens) {
        spans.resize(static_cast<std::size_t>(cfg_.max_tokens));
    }

    std::map<std::uint32_t, double> counts;
    auto add = [&](std::string_view key) {
        std::uint32_t idx =
            static_cast<std::uint32_t>(fnv1a64(key) % static_cast<std::uint64_t>(cfg_.hash_dim));
        counts[idx] += 1.0;
    };

    for (std::size_t i = 0; i < spans.size(); ++i) {
        std::string_view tok = std::string_view(lowered).substr(spans[i].begin,
                                                                spans[i].end - spans[i].begin);
        add(tok);
        if (cfg_.bigrams && i + 1 < spans.size()) {
            std::string key(tok);
            key.push_back('\x1f');
            key.append(lowered, spans[i + 1].begin, spans[i + 1].end - spans[i + 1].begin);
            add(key);
        }
    }
    return {counts.begin(), counts.end()};
}

double TextVectorizer::idf(std::uint32_t index) const {
    auto it = idf_.find(index);
    if (it != idf_.end()) return it->second;
    return std::log(static_cast<double>(1 + n_docs_)) + 1.0;  // unseen: df = 0
}

void TextVectorizer::fit(const std::vector<std::string>& texts) {
    std::unordered_map<std::uint32_t, std::size_t> df;
    for (const std::string& text : texts) {
        for (const auto& [idx, tf] : hashed_counts(text)) df[idx] += 1;
    }
    n_docs_ = texts.size();
    idf_.clear();
    for (const auto& [idx, count] : df) {
        idf_[idx] = std::log(static_cast<double>(1 + n_docs_) / static_cast<double>(1 + count)) + 1.0;
    }
}

SparseVec TextVectorizer::transform(std::string_view text) const {
    SparseVec out;
    double sq = 0.0;
    for (const auto& [idx, tf] : hashed_counts(text)) {
        double t = cfg_.sublinear_tf ? 1.0 + std::log(tf) : tf;
        double v = t * idf(idx);
        out.entries.emplace_back(idx, v);
        sq += v * v;
    }
    if (sq > 0.0) {
        double inv = 1.0 / std::sqrt(sq);
        for (auto& [idx, v] : out.entries) v *= inv;
    }
    return out;
}

nlohmann::json TextVectorizer::to_json() const {
    nlohmann::json j;
    j["config"] = {{"max_tokens", cfg_.max_tokens},
                   {"hash_dim", cfg_.hash_dim},
                   {"bigrams", cfg_.bigrams},
                   {"sublinear_tf", cfg_.sublinear_tf}};
    j["n_docs"] = n_docs_;
    // Sorted sparse idf entries so serialization is byte-stable.
    std::map<std::uint32_t, double> sorted(idf_.begin(), idf_.end());
    nlohmann::json idf = nlohmann::json::array();
    for (const auto& [idx, v] : sorted) idf.push_back(nlohmann::json::array({idx, v}));
    j["idf"] = idf;
    return j;
}

TextVectorizer TextVectorizer::from_json(const nlohmann::json& j) {
    VectorizerConfig cfg;
    cfg.max_tokens = j.at("config").at("max_tokens").get<int>();
    cfg.hash_dim = j.at("config").at("hash_dim").get<int>();
    cfg.bigrams = j.at("config").at("bigrams").get<bool>();
    cfg.sublinear_tf = j.at("config").at("sublinear_tf").get<bool>();
    TextVectorizer v(cfg);
    v.n_docs_ = j.at("n_docs").get<std::size_t>();
    for (const auto& entry : j.at("idf")) {
        v.idf_[entry.at(0).get<std::uint32_t>()] = entry.at(1).get<double>();
    }
    return v;
}

double LinearTextModel::predict_class(const SparseVec& v, std::size_t class_idx) const {
    double z = bias_[class_idx];
    const std::vector<double>& w = weights_[class_idx];
    for (const auto& [idx, value] : v.entries) z += w[idx] * value;
    return sigmoid(z);
}

ProbabilityVector LinearTextModel::predict(const SparseVec& v) const {
    ProbabilityVector out;
    for (std::size_t c = 0; c < classes_.size(); ++c) {
        out[classes_[c]] = predict_class(v, c);
    }
    return out;
}

LinearTextModel fit_linear_model(const std::vector<SparseVec>& rows,
                                 const std::vector<std::vector<int>>& targets,
                                 const std::vector<QuestionType>& classes, int hash_dim,
                                 const TextTrainConfig& config,
                                 const LinearTextModel* warm_start) {
    const std::size_t n = rows.size();
    LinearTextModel m;
    m.classes_ = classes;
    m.config_ = config;
    m.weights_.assign(classes.size(), std::vector<double>(static_cast<std::size_t>(hash_dim), 0.0));
    m.bias_.assign(classes.size(), 0.0);
    if (warm_start != nullptr) {
        if (warm_start->classes_ != classes ||
            warm_start->weights_.at(0).size() != static_cast<std::size_t>(hash_dim)) {
            throw Error("ShapeMismatch", "warm start model does not match the requested shape");
        }
        m.weights_ = warm_start->weights_;
        m.bias_ = warm_start->bias_;
    }

    std::vector<std::vector<double>> per_class_obj(classes.size());
    std::vector<double> grad(static_cast<std::size_t>(hash_dim), 0.0);

    for (std::size_t c = 0; c < classes.size(); ++c) {
        std::vector<double>& w = m.weights_[c];
        double& b = m.bias_[c];
        const std::vector<int>& y = targets[c];

        auto objective = [&](const std::vector<double>& wv, double bv) {
            double loss = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double z = bv;
                for (const auto& [idx, value] : rows[i].entries) z += wv[idx] * value;
                loss += log_loss(z, y[i]);
            }
            loss /= static_cast<double>(n);
            double reg = 0.0;
            for (double wi : wv) reg += wi * wi;
            return loss + 0.5 * config.l2 * reg;
        };

        double lr = config.learning_rate;
        double obj = objective(w, b);
        per_class_obj[c].push_back(obj);

        std::vector<double> w_try;
        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            std::fill(grad.begin(), grad.end(), 0.0);
            double grad_b = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double z = b;
                for (const auto& [idx, value] : rows[i].entries) z += w[idx] * value;
                double err = (sigmoid(z) - y[i]) / static_cast<double>(n);
                for (const auto& [idx, value] : rows[i].entries) grad[idx] += err * value;
                grad_b += err;
            }
            for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += config.l2 * w[k];

            // Backtracking: never accept a step that raises the objective.
            bool accepted = false;
            for (int attempt = 0; attempt < 40 && lr > 1e-12; ++attempt) {
                w_try = w;
                for (std::size_t k = 0; k < grad.size(); ++k) w_try[k] -= lr * grad[k];
                double b_try = b - lr * grad_b;
                double obj_try = objective(w_try, b_try);
                if (obj_try <= obj + 1e-12) {
                    w.swap(w_try);
                    b = b_try;
                    obj = obj_try;
                    accepted = true;
                    break;
                }
                lr *= 0.5;
            }
            (void)accepted;
            per_class_obj[c].push_back(obj);
        }
    }

    m.epoch_objectives_.assign(static_cast<std::size_t>(config.epochs) + 1, 0.0);
    for (const std::vector<double>& trace : per_class_obj) {
        for (std::size_t e = 0; e < trace.size(); ++e) m.epoch_objectives_[e] += trace[e];
    }
    return m;
}

nlohmann::json LinearTextModel::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    nlohmann::json names = nlohmann::json::array();
    for (QuestionType t : classes_) names.push_back(to_string(t));
    j["classes"] = names;
    j["bias"] = bias_;
    j["hash_dim"] = weights_.empty() ? 0 : weights_[0].size();
    nlohmann::json weights = nlohmann::json::array();
    for (const std::vector<double>& w : weights_) {
        nlohmann::json entries = nlohmann::json::array();
        for (std::size_t k = 0; k < w.size(); ++k) {
            if (w[k] != 0.0) entries.push_back(nlohmann::json::array({k, w[k]}));
        }
        weights.push_back(entries);
    }
    j["weights"] = weights;
    return j;
}

LinearTextModel LinearTextModel::from_json(const nlohmann::json& j) {
    LinearTextModel m;
    for (const auto& name : j.at("classes")) {
        m.classes_.push_back(parse_question_type(name.get<std::string>()));
    }
    m.bias_ = j.at("bias").get<std::vector<double>>();
    std::size_t dim = j.at("hash_dim").get<std::size_t>();
    for (const auto& entries : j.at("weights")) {
        std::vector<double> w(dim, 0.0);
        for (const auto& e : entries) {
            w[e.at(0).get<std::size_t>()] = e.at(1).get<double>();
        }
        m.weights_.push_back(std::move(w));
    }
    return m;
}

TextModel fit_text_model(const std::vector<QuestionRecord>& train,
                         const std::vector<QuestionType>& classes,
                         const VectorizerConfig& vec_config, const TextTrainConfig& train_config,
                         const LinearTextModel* warm_start) {
    if (train.empty()) throw Error("EmptyData", "no training records");
    std::set<QuestionType> distinct;
    for (const QuestionRecord& r : train) {
        if (!r.labels || r.labels->empty()) {
            throw Error("UnlabeledRecord", "record '" + r.id + "' has no labels");
        }
        for (QuestionType t : r.labels->types()) distinct.insert(t);
    }
    if (classes.size() == 1) {
        // Binary head: need both positives and negatives.
        std::size_t pos = 0;
        for (const QuestionRecord& r : train) {
            if (r.labels->contains(classes[0])) ++pos;
        }
        if (pos == 0 || pos == train.size()) {
            throw Error("InsufficientClasses", "binary training set has a single class");
        }
    } else if (distinct.size() < 2) {
        throw Error("InsufficientClasses", "need at least 2 distinct classes");
    }

    TextModel tm;
    tm.vectorizer = TextVectorizer(vec_config);
    std::vector<std::string> texts;
    texts.reserve(train.size());
    for (const QuestionRecord& r : train) texts.push_back(r.text);
    tm.vectorizer.fit(texts);

    std::vector<SparseVec> rows;
    rows.reserve(train.size());
    for (const QuestionRecord& r : train) rows.push_back(tm.vectorizer.transform(r.text));

    std::vector<std::vector<int>> targets(classes.size(), std::vector<int>(train.size(), 0));
    for (std::size_t c = 0; c < classes.size(); ++c) {
        for (std::size_t i = 0; i < train.size(); ++i) {
            targets[c][i] = train[i].labels->contains(classes[c]) ? 1 : 0;
        }
    }
    tm.model = fit_linear_model(rows, targets, classes, vec_config.hash_dim, train_config,
                                warm_start);
    return tm;
}

nlohmann::json text_model_to_json(const TextModel& tm) {
    nlohmann::json j;
    j["version"] = 1;
    j["vectorizer"] = tm.vectorizer.to_json();
    j["model"] = tm.model.to_json();
    return j;
}

TextModel text_model_from_json(const nlohmann::json& j) {
    TextModel tm;
    tm.vectorizer = TextVectorizer::from_json(j.at("vectorizer"));
    tm.model = LinearTextModel::from_json(j.at("model"));
    return tm;
}

const ProbabilityVector& ExternalProbs::lookup(const std::string& id) const {
    auto it = probs.find(id);
    if (it == probs.end()) throw Error("MissingId", "no external probabilities for id '" + id + "'");
    return it->second;
}

ExternalProbs load_external_probs(const std::string& path,
                                  const std::vector<std::string>& expected_ids) {
    std::ifstream in(path);
    if (!in) throw Error("IoError", "cannot open external probability file: " + path);

    ExternalProbs ep;
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
        std::string id = j.at("id").get<std::string>();
        ProbabilityVector pv;
        for (auto it = j.at("probs").begin(); it != j.at("probs").end(); ++it) {
            QuestionType t = parse_question_type(it.key());
            double v = it.value().get<double>();
            if (!(v >= 0.0 && v <= 1.0)) {
                throw Error("InvalidProbability",
                            "id '" + id + "' class " + it.key() + ": " + std::to_string(v));
            }
            pv[t] = v;
        }
        if (j.contains("provenance") && ep.provenance.empty()) {
            ep.provenance = j.at("provenance").get<std::string>();
        }
        ep.probs[id] = pv;
    }
    for (const std::string& id : expected_ids) {
        if (!ep.probs.count(id)) {
            throw Error("MissingId", "expected id '" + id + "' not present in " + path);
        }
    }
    return ep;
}

}  // namespace qtype::textprob

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "qtype/core.hpp"

namespace qtype::textprob {

struct SparseVec {
    // Sorted by index, no duplicates.
    std::vector<std::pair<std::uint32_t, double>> entries;
};

double dot(const SparseVec& a, const SparseVec& b);
double norm(const SparseVec& a);

struct VectorizerConfig {
    int max_tokens = 512;    // truncate to the first N tokens, lowercased
    int hash_dim = 1 << 18;  // feature hashing dimension
    bool bigrams = true;     // n-gram orders {1, 2}
    bool sublinear_tf = true;
};

// Hashed TF-IDF over the deterministic token rule. Fixed hash (FNV-1a 64),
// so identical corpus + config reproduce identical vectors everywhere.
class TextVectorizer {
public:
    TextVectorizer() = default;
    explicit TextVectorizer(VectorizerConfig cfg) : cfg_(cfg) {}

    void fit(const std::vector<std::string>& texts);
    bool fitted() const { return n_docs_ > 0; }
    SparseVec transform(std::string_view text) const;  // L2-normalized tf-idf

    const VectorizerConfig& config() const { return cfg_; }

    nlohmann::json to_json() const;
    static TextVectorizer from_json(const nlohmann::json& j);

private:
    // (hashed index, term frequency) of the truncated token stream.
    std::vector<std::pair<std::uint32_t, double>> hashed_counts(std::string_view text) const;
    double idf(std::uint32_t index) const;

    VectorizerConfig cfg_;
    std::unordered_map<std::uint32_t, double> idf_;
    std::size_t n_docs_ = 0;
};

struct TextTrainConfig {
    int epochs = 60;
    double learning_rate = 1.0;
    double l2 = 1e-4;
    std::uint64_t seed = 0;  // training is fully deterministic; kept for config parity
};

// One-vs-rest logistic classifiers over hashed tf-idf vectors. Full-batch
// gradient descent with backtracking, so the per-epoch objective never
// increases and each class trains independently of the others.
class LinearTextModel {
public:
    LinearTextModel() = default;

    const std::vector<QuestionType>& classes() const { return classes_; }
    double predict_class(const SparseVec& v, std::size_t class_idx) const;
    ProbabilityVector predict(const SparseVec& v) const;

    // Summed per-class regularized objective, one entry per epoch.
    const std::vector<double>& epoch_objectives() const { return epoch_objectives_; }

    nlohmann::json to_json() const;
    static LinearTextModel from_json(const nlohmann::json& j);

    friend LinearTextModel fit_linear_model(const std::vector<SparseVec>& rows,
                                            const std::vector<std::vector<int>>& targets,
                                            const std::vector<QuestionType>& classes, int hash_dim,
                                            const TextTrainConfig& config,
                                            const LinearTextModel* warm_start);

private:
    std::vector<QuestionType> classes_;
    std::vector<std::vector<double>> weights_;  // per class, dense hash_dim
    std::vector<double> bias_;
    std::vector<double> epoch_objectives_;
    TextTrainConfig config_;
};

LinearTextModel fit_linear_model(const std::vector<SparseVec>& rows,
                                 const std::vector<std::vector<int>>& targets,
                                 const std::vector<QuestionType>& classes, int hash_dim,
                                 const TextTrainConfig& config,
                                 const LinearTextModel* warm_start = nullptr);

struct TextModel {
    TextVectorizer vectorizer;
    LinearTextModel model;

    ProbabilityVector predict(std::string_view text) const {
        return model.predict(vectorizer.transform(text));
    }
};

// Fits vectorizer + one-vs-rest model on labeled records. `classes` picks the
// one-vs-rest heads: all 12 for multilabel, {MCQ} for the binary cascade.
// Requires every record labeled and at least two distinct classes of evidence.
TextModel fit_text_model(const std::vector<QuestionRecord>& train,
                         const std::vector<QuestionType>& classes,
                         const VectorizerConfig& vec_config = {},
                         const TextTrainConfig& train_config = {},
                         const LinearTextModel* warm_start = nullptr);

nlohmann::json text_model_to_json(const TextModel& tm);
TextModel text_model_from_json(const nlohmann::json& j);

// Externally computed per-class probabilities, keyed by record id.
struct ExternalProbs {
    std::string provenance;
    std::unordered_map<std::string, ProbabilityVector> probs;

    const ProbabilityVector& lookup(const std::string& id) const;
};

ExternalProbs load_external_probs(const std::string& path,
                                  const std::vector<std::string>& expected_ids);

}  // namespace qtype::textprob

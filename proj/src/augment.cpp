#include "qtype/augment.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace qtype::augment {

void SimilarityConfig::validate() const {
    if (!(lower > 0.0 && lower < upper && upper <= 1.0)) {
        throw Error("InvalidSimilarityWindow", "need 0 < lower < upper <= 1");
    }
}

std::unordered_set<std::uint64_t> exclusion_hashes(const std::vector<QuestionRecord>& records) {
    std::unordered_set<std::uint64_t> out;
    for (const QuestionRecord& r : records) out.insert(fnv1a64(normalize_text(r.text)));
    return out;
}

double cosine(const textprob::SparseVec& a, const textprob::SparseVec& b) {
    double na = textprob::norm(a);
    double nb = textprob::norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return textprob::dot(a, b) / (na * nb);
}

double similarity(std::string_view a, std::string_view b,
                  const textprob::TextVectorizer& vectorizer) {
    if (!vectorizer.fitted()) throw Error("UnfittedVectorizer", "vectorizer must be fitted");
    return cosine(vectorizer.transform(a), vectorizer.transform(b));
}

std::vector<QuestionRecord> augment(const std::vector<QuestionRecord>& unlabeled,
                                    const std::vector<QuestionRecord>& gold,
                                    const textprob::TextVectorizer& vectorizer,
                                    const SimilarityConfig& config) {
    config.validate();
    if (!vectorizer.fitted()) throw Error("UnfittedVectorizer", "vectorizer must be fitted");
    for (const QuestionRecord& g : gold) {
        if (!g.labels || g.labels->empty()) {
            throw Error("UnlabeledRecord", "gold record '" + g.id + "' has no labels");
        }
    }

    std::vector<textprob::SparseVec> gold_vecs;
    gold_vecs.reserve(gold.size());
    for (const QuestionRecord& g : gold) gold_vecs.push_back(vectorizer.transform(g.text));

    std::vector<QuestionRecord> out;
    for (const QuestionRecord& u : unlabeled) {
        if (config.exclusion.count(fnv1a64(normalize_text(u.text)))) continue;

        textprob::SparseVec vec = vectorizer.transform(u.text);
        double best_sim = -2.0;
        std::size_t best_idx = gold.size();
        for (std::size_t k = 0; k < gold.size(); ++k) {
            double s = cosine(vec, gold_vecs[k]);
            if (s > best_sim || (s == best_sim && best_idx < gold.size() &&
                                 gold[k].id < gold[best_idx].id)) {
                best_sim = s;
                best_idx = k;
            }
        }
        if (best_idx >= gold.size()) continue;
        if (best_sim < config.lower || best_sim > config.upper) continue;

        QuestionRecord r = u;
        r.labels = gold[best_idx].labels;
        r.source = Source::augmented;
        out.push_back(std::move(r));
    }
    return out;
}

const std::vector<double>& EmbeddingTable::lookup(const std::string& id) const {
    auto it = vectors.find(id);
    if (it == vectors.end()) throw Error("MissingId", "no embedding for id '" + id + "'");
    return it->second;
}

EmbeddingTable load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("IoError", "cannot open embedding file: " + path);
    EmbeddingTable table;
    std::string line;
    std::size_t lineno = 0;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            throw Error("MalformedLine", "line " + std::to_string(lineno) + ": invalid JSON");
        }
        std::vector<double> vec = j.at("vector").get<std::vector<double>>();
        for (double v : vec) {
            if (!std::isfinite(v)) {
                throw Error("MalformedLine",
                            "line " + std::to_string(lineno) + ": non-finite embedding value");
            }
        }
        if (dim == 0) dim = vec.size();
        if (vec.empty() || vec.size() != dim) {
            throw Error("MalformedLine",
                        "line " + std::to_string(lineno) + ": inconsistent embedding dimension");
        }
        table.vectors[j.at("id").get<std::string>()] = std::move(vec);
    }
    return table;
}

double cosine_dense(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw Error("ShapeMismatch", "embedding dimensions differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<QuestionRecord> augment_with_embeddings(const std::vector<QuestionRecord>& unlabeled,
                                                    const std::vector<QuestionRecord>& gold,
                                                    const EmbeddingTable& embeddings,
                                                    const SimilarityConfig& config) {
    config.validate();
    for (const QuestionRecord& g : gold) {
        if (!g.labels || g.labels->empty()) {
            throw Error("UnlabeledRecord", "gold record '" + g.id + "' has no labels");
        }
    }

    std::vector<QuestionRecord> out;
    for (const QuestionRecord& u : unlabeled) {
        if (config.exclusion.count(fnv1a64(normalize_text(u.text)))) continue;

        const std::vector<double>& uvec = embeddings.lookup(u.id);
        double best_sim = -2.0;
        std::size_t best_idx = gold.size();
        for (std::size_t k = 0; k < gold.size(); ++k) {
            double s = cosine_dense(uvec, embeddings.lookup(gold[k].id));
            if (s > best_sim || (s == best_sim && best_idx < gold.size() &&
                                 gold[k].id < gold[best_idx].id)) {
                best_sim = s;
                best_idx = k;
            }
        }
        if (best_idx >= gold.size()) continue;
        if (best_sim < config.lower || best_sim > config.upper) continue;

        QuestionRecord r = u;
        r.labels = gold[best_idx].labels;
        r.source = Source::augmented;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace qtype::augment

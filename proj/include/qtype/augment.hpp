#pragma once

#include <cstdint>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "qtype/core.hpp"
#include "qtype/textprob.hpp"

namespace qtype::augment {

struct SimilarityConfig {
    double lower = 0.80;
    double upper = 0.95;
    // Normalized-text hashes of records that must never be emitted (test set).
    std::unordered_set<std::uint64_t> exclusion;

    void validate() const;
};

std::unordered_set<std::uint64_t> exclusion_hashes(const std::vector<QuestionRecord>& records);

double cosine(const textprob::SparseVec& a, const textprob::SparseVec& b);

// Cosine of the two tf-idf vectors; 0 when either vector is all-zero.
double similarity(std::string_view a, std::string_view b,
                  const textprob::TextVectorizer& vectorizer);

// Each unlabeled record whose best gold neighbor's similarity falls inside
// [lower, upper] receives that neighbor's labels; neighbor ties break toward
// the lowest gold id. Records colliding with the exclusion set are dropped.
std::vector<QuestionRecord> augment(const std::vector<QuestionRecord>& unlabeled,
                                    const std::vector<QuestionRecord>& gold,
                                    const textprob::TextVectorizer& vectorizer,
                                    const SimilarityConfig& config);

// Externally computed dense embeddings keyed by record id; drop-in
// replacement for the internal vectorizer. File: JSONL {id, vector: [...]}.
struct EmbeddingTable {
    std::unordered_map<std::string, std::vector<double>> vectors;

    const std::vector<double>& lookup(const std::string& id) const;
};

EmbeddingTable load_embeddings(const std::string& path);

double cosine_dense(const std::vector<double>& a, const std::vector<double>& b);

std::vector<QuestionRecord> augment_with_embeddings(const std::vector<QuestionRecord>& unlabeled,
                                                    const std::vector<QuestionRecord>& gold,
                                                    const EmbeddingTable& embeddings,
                                                    const SimilarityConfig& config);

}  // namespace qtype::augment

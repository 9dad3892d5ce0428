#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qtype/core.hpp"
#include "qtype/qparse.hpp"

namespace qtype::features {

enum class MatchMode { substring_ci, word_boundary_ci };

const char* to_string(MatchMode m);
MatchMode parse_match_mode(std::string_view name);

// A named keyword list voting for one question type.
struct Lexicon {
    std::string name;
    QuestionType target_class = QuestionType::MCQ;
    MatchMode match_mode = MatchMode::substring_ci;
    std::vector<std::string> phrases;  // stored lowercased
};

// Validates and loads a JSON array of {name, target_class, match_mode, phrases}.
std::vector<Lexicon> load_lexicons(const std::string& path);
std::vector<Lexicon> lexicons_from_json(const nlohmann::json& j);
nlohmann::json lexicons_to_json(const std::vector<Lexicon>& lexicons);

// Case-insensitive phrase occurrences; each distinct start position counts once.
int count_matches(std::string_view text, const Lexicon& lexicon);

// Ordered feature names + subject hashing width. Extraction is name-driven,
// so a reloaded schema reproduces identical vectors.
struct FeatureSchema {
    std::vector<std::string> feature_names;
    int subject_hash_buckets = 0;

    std::size_t dimensionality() const { return feature_names.size(); }
};

FeatureSchema load_schema(const std::string& path);
void save_schema(const std::string& path, const FeatureSchema& schema);
nlohmann::json schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const nlohmann::json& j);

// The fixed 13-D schema for the binary MCQ classifier.
FeatureSchema mcq_schema();

// Default multilabel schema: 12 per-class lexicon counts, 13 structural
// numerics, and subject hash buckets (default 128).
FeatureSchema default_multilabel_schema(int subject_hash_buckets = 128);

struct FeatureVector {
    std::vector<double> values;  // aligned to the schema's feature_names
};

// Deterministic bucket for a free-form subject string.
int subject_bucket(std::string_view subject, int buckets);

FeatureVector extract_features(const QuestionRecord& question,
                               const qparse::StructuralAnalysis& analysis,
                               const std::vector<Lexicon>& lexicons,
                               const FeatureSchema& schema);

}  // namespace qtype::features

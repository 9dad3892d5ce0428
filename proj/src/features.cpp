#include "qtype/features.hpp"

#include <fstream>
#include <set>
#include <unordered_map>

namespace qtype::features {

namespace {

bool is_word_char(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

const std::vector<std::string> kStructuralNames = {
    "option_count",       "option_style_code", "markers_sequential",
    "blank_count",        "has_tf_pair",       "part_count",
    "token_count",        "line_count",        "mean_option_token_length",
    "ends_with_question_mark", "has_code_indicator", "has_table_indicator",
    "has_math_indicator",
};

double structural_value(const std::string& name, const qparse::StructuralAnalysis& a) {
    if (name == "option_count") return a.options.option_count;
    if (name == "option_style_code") return qparse::style_code(a.options.style);
    if (name == "markers_sequential") return a.options.markers_sequential ? 1.0 : 0.0;
    if (name == "blank_count") return a.blank_count;
    if (name == "has_tf_pair") return a.has_tf_pair ? 1.0 : 0.0;
    if (name == "part_count") return a.part_count;
    if (name == "token_count") return a.token_count;
    if (name == "line_count") return a.line_count;
    if (name == "ends_with_question_mark") return a.ends_with_question_mark ? 1.0 : 0.0;
    if (name == "has_code_indicator") return a.has_code_indicator ? 1.0 : 0.0;
    if (name == "has_table_indicator") return a.has_table_indicator ? 1.0 : 0.0;
    if (name == "has_math_indicator") return a.has_math_indicator ? 1.0 : 0.0;
    throw Error("SchemaMismatch", "unknown structural feature '" + name + "'");
}

double mean_option_token_length(std::string_view text, const qparse::OptionListAnalysis& options) {
    if (options.option_spans.empty()) return 0.0;
    double total = 0.0;
    for (const qparse::Span& s : options.option_spans) {
        total += static_cast<double>(
            qparse::tokenize(text.substr(s.begin, s.end - s.begin)).size());
    }
    return total / static_cast<double>(options.option_spans.size());
}

}  // namespace

const char* to_string(MatchMode m) {
    return m == MatchMode::substring_ci ? "substring_ci" : "word_boundary_ci";
}

MatchMode parse_match_mode(std::string_view name) {
    if (name == "substring_ci") return MatchMode::substring_ci;
    if (name == "word_boundary_ci") return MatchMode::word_boundary_ci;
    throw Error("MalformedLexicon", "unknown match_mode '" + std::string(name) + "'");
}

std::vector<Lexicon> lexicons_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw Error("MalformedLexicon", "lexicon file must be a JSON array");
    std::vector<Lexicon> out;
    std::set<std::string> names;
    for (const auto& item : j) {
        if (!item.is_object()) throw Error("MalformedLexicon", "lexicon entries must be objects");
        Lexicon lex;
        lex.name = item.at("name").get<std::string>();
        if (!names.insert(lex.name).second) {
            throw Error("MalformedLexicon", "duplicate lexicon name '" + lex.name + "'");
        }
        lex.target_class = parse_question_type(item.at("target_class").get<std::string>());
        lex.match_mode = parse_match_mode(item.at("match_mode").get<std::string>());
        if (!item.contains("phrases") || !item.at("phrases").is_array() ||
            item.at("phrases").empty()) {
            throw Error("MalformedLexicon", "lexicon '" + lex.name + "' has no phrases");
        }
        std::set<std::string> seen;
        for (const auto& p : item.at("phrases")) {
            std::string phrase = to_lower(trim(p.get<std::string>()));
            if (phrase.empty()) {
                throw Error("MalformedLexicon", "empty phrase in lexicon '" + lex.name + "'");
            }
            if (!seen.insert(phrase).second) {
                throw Error("MalformedLexicon",
                            "duplicate phrase '" + phrase + "' in lexicon '" + lex.name + "'");
            }
            lex.phrases.push_back(std::move(phrase));
        }
        out.push_back(std::move(lex));
    }
    return out;
}

std::vector<Lexicon> load_lexicons(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("IoError", "cannot open lexicon file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("MalformedLexicon", std::string("invalid JSON: ") + e.what());
    }
    return lexicons_from_json(j);
}

nlohmann::json lexicons_to_json(const std::vector<Lexicon>& lexicons) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Lexicon& lex : lexicons) {
        nlohmann::json item;
        item["name"] = lex.name;
        item["target_class"] = to_string(lex.target_class);
        item["match_mode"] = to_string(lex.match_mode);
        item["phrases"] = lex.phrases;
        arr.push_back(item);
    }
    return arr;
}

int count_matches(std::string_view text, const Lexicon& lexicon) {
    if (text.empty()) return 0;
    const std::string lowered = to_lower(text);
    int count = 0;
    for (const std::string& phrase : lexicon.phrases) {
        std::size_t pos = 0;
        while ((pos = lowered.find(phrase, pos)) != std::string::npos) {
            bool ok = true;
            if (lexicon.match_mode == MatchMode::word_boundary_ci) {
                if (pos > 0 && is_word_char(lowered[pos - 1])) ok = false;
                std::size_t end = pos + phrase.size();
                if (end < lowered.size() && is_word_char(lowered[end])) ok = false;
            }
            if (ok) ++count;
            ++pos;  // overlapping occurrences count once per start position
        }
    }
    return count;
}

nlohmann::json schema_to_json(const FeatureSchema& schema) {
    nlohmann::json j;
    j["version"] = 1;
    j["feature_names"] = schema.feature_names;
    j["subject_hash_buckets"] = schema.subject_hash_buckets;
    return j;
}

FeatureSchema schema_from_json(const nlohmann::json& j) {
    FeatureSchema schema;
    for (const auto& name : j.at("feature_names")) {
        schema.feature_names.push_back(name.get<std::string>());
    }
    schema.subject_hash_buckets = j.value("subject_hash_buckets", 0);
    std::set<std::string> unique(schema.feature_names.begin(), schema.feature_names.end());
    if (unique.size() != schema.feature_names.size()) {
        throw Error("SchemaMismatch", "duplicate feature names in schema");
    }
    return schema;
}

FeatureSchema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("IoError", "cannot open schema file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("SchemaMismatch", std::string("invalid schema JSON: ") + e.what());
    }
    return schema_from_json(j);
}

void save_schema(const std::string& path, const FeatureSchema& schema) {
    std::ofstream out(path);
    if (!out) throw Error("IoError", "cannot open file for writing: " + path);
    out << schema_to_json(schema).dump(2) << '\n';
}

FeatureSchema mcq_schema() {
    FeatureSchema s;
    s.feature_names = {
        "count_answer_option_keywords",
        "count_mcq_stem_keywords",
        "option_count",
        "option_style_code",
        "markers_sequential",
        "blank_count",
        "has_tf_pair",
        "part_count",
        "token_count",
        "line_count",
        "mean_option_token_length",
        "ends_with_question_mark",
        "count_tcq_keywords",
    };
    s.subject_hash_buckets = 0;
    return s;
}

FeatureSchema default_multilabel_schema(int subject_hash_buckets) {
    FeatureSchema s;
    for (QuestionType t : all_types()) {
        s.feature_names.push_back(std::string("lexcount_") + to_string(t));
    }
    for (const std::string& name : kStructuralNames) s.feature_names.push_back(name);
    for (int b = 0; b < subject_hash_buckets; ++b) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "subject_bucket_%03d", b);
        s.feature_names.emplace_back(buf);
    }
    s.subject_hash_buckets = subject_hash_buckets;
    return s;
}

int subject_bucket(std::string_view subject, int buckets) {
    if (buckets <= 0) return 0;
    return static_cast<int>(fnv1a64(normalize_text(subject)) %
                            static_cast<std::uint64_t>(buckets));
}

FeatureVector extract_features(const QuestionRecord& question,
                               const qparse::StructuralAnalysis& analysis,
                               const std::vector<Lexicon>& lexicons,
                               const FeatureSchema& schema) {
    std::unordered_map<std::string, const Lexicon*> by_name;
    for (const Lexicon& lex : lexicons) by_name[lex.name] = &lex;

    auto lexicon_count = [&](const std::string& name) -> double {
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw Error("SchemaMismatch", "schema needs lexicon '" + name + "' which is not loaded");
        }
        return count_matches(question.text, *it->second);
    };

    const int bucket = subject_bucket(question.subject, schema.subject_hash_buckets);

    FeatureVector fv;
    fv.values.reserve(schema.feature_names.size());
    for (const std::string& name : schema.feature_names) {
        if (name == "count_answer_option_keywords") {
            fv.values.push_back(lexicon_count("answer_option"));
        } else if (name == "count_mcq_stem_keywords") {
            fv.values.push_back(lexicon_count("mcq_stem"));
        } else if (name == "count_tcq_keywords") {
            fv.values.push_back(lexicon_count("tcq_keywords"));
        } else if (name == "mean_option_token_length") {
            fv.values.push_back(mean_option_token_length(question.text, analysis.options));
        } else if (name.rfind("lexcount_", 0) == 0) {
            QuestionType target = parse_question_type(name.substr(9));
            double total = 0.0;
            for (const Lexicon& lex : lexicons) {
                if (lex.target_class == target) total += count_matches(question.text, lex);
            }
            fv.values.push_back(total);
        } else if (name.rfind("lex_", 0) == 0) {
            fv.values.push_back(lexicon_count(name.substr(4)));
        } else if (name.rfind("subject_bucket_", 0) == 0) {
            int idx = std::stoi(name.substr(15));
            if (idx >= schema.subject_hash_buckets) {
                throw Error("SchemaMismatch",
                            "subject bucket index exceeds subject_hash_buckets: " + name);
            }
            fv.values.push_back(idx == bucket ? 1.0 : 0.0);
        } else {
            fv.values.push_back(structural_value(name, analysis));
        }
    }
    return fv;
}

}  // namespace qtype::features

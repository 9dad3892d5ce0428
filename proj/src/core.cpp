#include "qtype/core.hpp"

#include <fstream>
#include <unordered_set>

namespace qtype {

namespace {

constexpr std::array<const char*, kNumTypes> kTypeNames = {
    "MCQ", "TCQ", "FIB", "SA", "ES", "CALC", "OR", "GR", "MAT", "LDGR", "COD", "TBL",
};

constexpr std::array<const char*, 7> kSourceNames = {
    "gold", "silver", "augmented", "answer_type", "external", "synthetic", "unlabeled",
};

}  // namespace

const char* to_string(QuestionType t) { return kTypeNames[static_cast<std::size_t>(t)]; }

std::optional<QuestionType> try_parse_question_type(std::string_view name) {
    std::string upper(name);
    for (char& c : upper) {
        if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    }
    for (int i = 0; i < kNumTypes; ++i) {
        if (upper == kTypeNames[static_cast<std::size_t>(i)]) {
            return static_cast<QuestionType>(i);
        }
    }
    return std::nullopt;
}

QuestionType parse_question_type(std::string_view name) {
    auto t = try_parse_question_type(name);
    if (!t) throw Error("UnknownLabel", "unknown question type '" + std::string(name) + "'");
    return *t;
}

QuestionType type_from_code(int code) {
    if (code < 0 || code >= kNumTypes) {
        throw Error("UnknownLabel", "question type code out of range: " + std::to_string(code));
    }
    return static_cast<QuestionType>(code);
}

std::vector<QuestionType> all_types() {
    std::vector<QuestionType> out;
    out.reserve(kNumTypes);
    for (int i = 0; i < kNumTypes; ++i) out.push_back(static_cast<QuestionType>(i));
    return out;
}

std::size_t LabelSet::size() const {
    std::size_t n = 0;
    for (int i = 0; i < kNumTypes; ++i) {
        if (bits_ & (1u << i)) ++n;
    }
    return n;
}

std::vector<QuestionType> LabelSet::types() const {
    std::vector<QuestionType> out;
    for (int i = 0; i < kNumTypes; ++i) {
        if (bits_ & (1u << i)) out.push_back(static_cast<QuestionType>(i));
    }
    return out;
}

std::vector<std::string> LabelSet::names() const {
    std::vector<std::string> out;
    for (QuestionType t : types()) out.emplace_back(to_string(t));
    return out;
}

LabelSet parse_label_set(const std::vector<std::string>& names) {
    if (names.empty()) throw Error("EmptyLabelSet", "label set must not be empty");
    LabelSet set;
    for (const std::string& name : names) set.insert(parse_question_type(name));
    return set;
}

const char* to_string(Source s) { return kSourceNames[static_cast<std::size_t>(s)]; }

Source parse_source(std::string_view name) {
    for (std::size_t i = 0; i < kSourceNames.size(); ++i) {
        if (name == kSourceNames[i]) return static_cast<Source>(i);
    }
    throw Error("UnknownSource", "unknown source '" + std::string(name) + "'");
}

void ProbabilityVector::validate() const {
    for (int i = 0; i < kNumTypes; ++i) {
        double v = values_[static_cast<std::size_t>(i)];
        if (!(v >= 0.0 && v <= 1.0)) {
            throw Error("InvalidProbability",
                        std::string(to_string(static_cast<QuestionType>(i))) + " probability " +
                            std::to_string(v) + " outside [0,1]");
        }
    }
}

QuestionType ProbabilityVector::argmax() const {
    int best = 0;
    for (int i = 1; i < kNumTypes; ++i) {
        if (values_[static_cast<std::size_t>(i)] > values_[static_cast<std::size_t>(best)]) best = i;
    }
    return static_cast<QuestionType>(best);
}

nlohmann::json record_to_json(const QuestionRecord& r) {
    nlohmann::json j = r.extra.is_object() ? r.extra : nlohmann::json::object();
    j["id"] = r.id;
    j["text"] = r.text;
    j["subject"] = r.subject;
    if (r.labels) j["labels"] = r.labels->names();
    j["source"] = to_string(r.source);
    return j;
}

QuestionRecord record_from_json(const nlohmann::json& j, std::size_t lineno) {
    auto line = std::to_string(lineno);
    if (!j.is_object()) throw Error("MalformedLine", "line " + line + ": not a JSON object");

    auto require_string = [&](const char* field) -> std::string {
        if (!j.contains(field)) {
            throw Error("MissingField", "line " + line + ": missing field '" + field + "'");
        }
        if (!j.at(field).is_string()) {
            throw Error("MalformedLine", "line " + line + ": field '" + field + "' must be a string");
        }
        return j.at(field).get<std::string>();
    };

    QuestionRecord r;
    r.id = require_string("id");
    if (r.id.empty()) throw Error("MalformedLine", "line " + line + ": empty id");
    r.text = require_string("text");
    if (trim(r.text).empty()) {
        throw Error("MalformedLine", "line " + line + ": text empty after trimming");
    }
    r.subject = require_string("subject");

    if (j.contains("labels")) {
        const auto& labels = j.at("labels");
        if (!labels.is_array() || labels.empty()) {
            throw Error("MalformedLine", "line " + line + ": labels must be a non-empty array");
        }
        std::vector<std::string> names;
        for (const auto& item : labels) {
            if (!item.is_string()) {
                throw Error("MalformedLine", "line " + line + ": label entries must be strings");
            }
            names.push_back(item.get<std::string>());
        }
        try {
            r.labels = parse_label_set(names);
        } catch (const Error& e) {
            throw Error(e.code(), "line " + line + ": " + e.what());
        }
    }

    if (j.contains("source")) {
        if (!j.at("source").is_string()) {
            throw Error("MalformedLine", "line " + line + ": source must be a string");
        }
        try {
            r.source = parse_source(j.at("source").get<std::string>());
        } catch (const Error& e) {
            throw Error("MalformedLine", "line " + line + ": " + std::string(e.what()));
        }
    }

    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "id" || it.key() == "text" || it.key() == "subject" ||
            it.key() == "labels" || it.key() == "source") {
            continue;
        }
        r.extra[it.key()] = it.value();
    }
    return r;
}

std::vector<QuestionRecord> read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("IoError", "cannot open dataset file: " + path);

    std::vector<QuestionRecord> records;
    std::unordered_set<std::string> ids;
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
        QuestionRecord r = record_from_json(j, lineno);
        if (!ids.insert(r.id).second) {
            throw Error("DuplicateId", "duplicate record id '" + r.id + "'");
        }
        records.push_back(std::move(r));
    }
    return records;
}

void write_dataset(const std::string& path, const std::vector<QuestionRecord>& records) {
    std::ofstream out(path);
    if (!out) throw Error("IoError", "cannot open file for writing: " + path);
    for (const QuestionRecord& r : records) {
        out << record_to_json(r).dump() << '\n';
    }
    if (!out) throw Error("IoError", "write failed: " + path);
}

std::vector<QuestionRecord> dedupe(const std::vector<QuestionRecord>& records) {
    std::vector<QuestionRecord> out;
    std::unordered_set<std::string> seen;
    for (const QuestionRecord& r : records) {
        if (seen.insert(normalize_text(r.text)).second) out.push_back(r);
    }
    return out;
}

}  // namespace qtype

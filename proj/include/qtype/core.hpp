#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qtype/util.hpp"

namespace qtype {

// The twelve question-type categories. Integer codes are stable and define
// the canonical ordering everywhere (probability vectors, tie-breaks, files).
enum class QuestionType : int {
    MCQ = 0,   // multiple choice / multi-select
    TCQ = 1,   // two-choice, true/false
    FIB = 2,   // fill in the blank
    SA = 3,    // short answer / factoid
    ES = 4,    // essay, open-ended
    CALC = 5,  // calculation, proof
    OR = 6,    // ordering
    GR = 7,    // graphing, drawing, sketching
    MAT = 8,   // matching, classification
    LDGR = 9,  // ledger / accounting
    COD = 10,  // coding, programming
    TBL = 11,  // table completion, form filling
};

inline constexpr int kNumTypes = 12;

const char* to_string(QuestionType t);
std::optional<QuestionType> try_parse_question_type(std::string_view name);  // case-insensitive
QuestionType parse_question_type(std::string_view name);                     // throws UnknownLabel
QuestionType type_from_code(int code);                                       // throws UnknownLabel
inline int code_of(QuestionType t) { return static_cast<int>(t); }

std::vector<QuestionType> all_types();

// Set of question types. Iteration (types()/names()) is always in ascending
// code order, so serialized label lists are deterministic.
class LabelSet {
public:
    LabelSet() = default;
    LabelSet(std::initializer_list<QuestionType> types) {
        for (QuestionType t : types) insert(t);
    }

    void insert(QuestionType t) { bits_ |= bit(t); }
    bool contains(QuestionType t) const { return (bits_ & bit(t)) != 0; }
    std::size_t size() const;
    bool empty() const { return bits_ == 0; }

    std::vector<QuestionType> types() const;
    std::vector<std::string> names() const;

    std::uint16_t mask() const { return bits_; }
    static LabelSet from_mask(std::uint16_t mask) {
        LabelSet s;
        s.bits_ = static_cast<std::uint16_t>(mask & 0x0fff);
        return s;
    }

    bool operator==(const LabelSet&) const = default;

private:
    static std::uint16_t bit(QuestionType t) {
        return static_cast<std::uint16_t>(1u << static_cast<int>(t));
    }
    std::uint16_t bits_ = 0;
};

// Resolves names case-insensitively, collapsing duplicates.
// Throws EmptyLabelSet on empty input, UnknownLabel on unresolvable names.
LabelSet parse_label_set(const std::vector<std::string>& names);

enum class Source { gold, silver, augmented, answer_type, external, synthetic, unlabeled };

const char* to_string(Source s);
Source parse_source(std::string_view name);  // throws UnknownSource

// One student question. Immutable by convention after construction.
struct QuestionRecord {
    std::string id;
    std::string text;
    std::string subject;
    std::optional<LabelSet> labels;
    Source source = Source::unlabeled;
    // Unknown JSONL fields, preserved verbatim on round-trip.
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const QuestionRecord&) const = default;
};

// Per-class scores in [0, 1]. Multilabel vectors are independent one-vs-rest
// probabilities and need not sum to one.
class ProbabilityVector {
public:
    ProbabilityVector() { values_.fill(0.0); }

    double& operator[](QuestionType t) { return values_[static_cast<std::size_t>(t)]; }
    double operator[](QuestionType t) const { return values_[static_cast<std::size_t>(t)]; }
    const std::array<double, kNumTypes>& values() const { return values_; }

    void validate() const;  // throws InvalidProbability if any value outside [0,1]

    // Ties broken by lowest class code.
    QuestionType argmax() const;

    bool operator==(const ProbabilityVector&) const = default;

private:
    std::array<double, kNumTypes> values_;
};

// The binary MCQ mode's {MCQ, non-MCQ} pair. non-MCQ is a derived
// pseudo-class; it is never serialized into a LabelSet.
struct BinaryProbability {
    double mcq = 0.0;
    double non_mcq() const { return 1.0 - mcq; }
};

// JSONL dataset I/O. One JSON object per line; unknown fields preserved.
nlohmann::json record_to_json(const QuestionRecord& r);
QuestionRecord record_from_json(const nlohmann::json& j, std::size_t lineno);

std::vector<QuestionRecord> read_dataset(const std::string& path);
void write_dataset(const std::string& path, const std::vector<QuestionRecord>& records);

// Drops records whose normalized text was already seen; keeps first
// occurrences, stable order.
std::vector<QuestionRecord> dedupe(const std::vector<QuestionRecord>& records);

}  // namespace qtype

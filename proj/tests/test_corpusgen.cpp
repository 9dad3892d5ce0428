#include <set>
#include <sstream>

#include "doctest.h"
#include "qtype/corpusgen.hpp"
#include "qtype/qparse.hpp"

using namespace qtype;
using namespace qtype::corpusgen;

namespace {

const char* kTemplatePath = QTYPE_DATA_DIR "/templates.json";

std::string serialize(const std::vector<QuestionRecord>& records) {
    std::ostringstream out;
    for (const QuestionRecord& r : records) out << record_to_json(r).dump() << '\n';
    return out.str();
}

bool is_structural(QuestionType t) {
    return t == QuestionType::MCQ || t == QuestionType::TCQ || t == QuestionType::FIB;
}

}  // namespace

TEST_SUITE("corpusgen") {

TEST_CASE("same config twice gives byte-identical corpora") {
    TemplateSpec spec = load_templates(kTemplatePath);
    GenConfig config;
    config.seed = 42;
    config.n_per_class = 6;
    config.noise.drop_option_markers = 0.2;
    config.noise.truncate_tail = 0.2;
    config.noise.casing_jitter = 0.2;
    CHECK(serialize(generate(config, spec)) == serialize(generate(config, spec)));

    GenConfig other = config;
    other.seed = 43;
    CHECK(serialize(generate(other, spec)) != serialize(generate(config, spec)));
}

TEST_CASE("clean mcq records carry a detectable 4-5 option list") {
    TemplateSpec spec = load_templates(kTemplatePath);
    GenConfig config;
    config.seed = 42;
    config.n_per_class = 2;
    auto records = generate(config, spec);
    int mcq_seen = 0;
    for (const QuestionRecord& r : records) {
        if (!r.labels->contains(QuestionType::MCQ)) continue;
        ++mcq_seen;
        qparse::StructuralAnalysis a = qparse::analyze(r);
        CHECK(a.options.option_count >= 4);
        CHECK(a.options.option_count <= 5);
    }
    CHECK(mcq_seen == 2);
}

TEST_CASE("every clean decoration is detectable by the parser") {
    TemplateSpec spec = load_templates(kTemplatePath);
    GenConfig config;
    config.seed = 7;
    config.n_per_class = 30;
    auto records = generate(config, spec);
    REQUIRE(records.size() == 30 * 12);

    for (const QuestionRecord& r : records) {
        qparse::StructuralAnalysis a = qparse::analyze(r);
        const LabelSet& labels = *r.labels;
        if (labels.contains(QuestionType::MCQ)) {
            CHECK(a.options.option_count >= 2);
        }
        if (labels.contains(QuestionType::TCQ)) {
            CHECK(a.has_tf_pair);
        }
        if (labels.contains(QuestionType::FIB) && !labels.contains(QuestionType::MCQ)) {
            CHECK(a.blank_count >= 1);
        }
        if (labels.contains(QuestionType::COD) && !labels.contains(QuestionType::MCQ)) {
            CHECK(a.has_code_indicator);
        }
        if (labels.contains(QuestionType::TBL)) {
            CHECK(a.has_table_indicator);
        }
        if (labels.contains(QuestionType::CALC) && labels.contains(QuestionType::GR)) {
            CHECK(a.part_count == 2);
        }
        CHECK(r.source == Source::synthetic);
    }
}

TEST_CASE("label sets follow the structural/content composition rules") {
    TemplateSpec spec = load_templates(kTemplatePath);
    GenConfig config;
    config.seed = 19;
    config.n_per_class = 40;
    for (const QuestionRecord& r : generate(config, spec)) {
        const LabelSet& labels = *r.labels;
        REQUIRE(!labels.empty());
        if (labels.size() == 1) continue;
        REQUIRE(labels.size() == 2);
        auto types = labels.types();
        bool has_structural = is_structural(types[0]) || is_structural(types[1]);
        bool is_multipart =
            labels == LabelSet{QuestionType::CALC, QuestionType::GR};  // part (a)/(b)
        CHECK((has_structural || is_multipart));
    }
}

TEST_CASE("dropping option markers removes the parser signal") {
    TemplateSpec spec = load_templates(kTemplatePath);
    GenConfig config;
    config.seed = 11;
    config.n_per_class = 15;
    config.noise.drop_option_markers = 1.0;
    for (const QuestionRecord& r : generate(config, spec)) {
        if (r.labels->contains(QuestionType::MCQ)) {
            CHECK(qparse::analyze(r).options.option_count == 0);
        }
    }
}

TEST_CASE("full tail truncation appends an ellipsis") {
    TemplateSpec spec = load_templates(kTemplatePath);
    GenConfig config;
    config.seed = 13;
    config.n_per_class = 5;
    config.noise.truncate_tail = 1.0;
    for (const QuestionRecord& r : generate(config, spec)) {
        CHECK(r.text.size() >= 3);
        CHECK(r.text.substr(r.text.size() - 3) == "...");
        CHECK(qparse::analyze(r).has_truncation);
    }
}

TEST_CASE("weighted mix mode skews toward the frequent classes") {
    TemplateSpec spec = load_templates(kTemplatePath);
    GenConfig config;
    config.seed = 5;
    config.n_total = 1200;
    auto records = generate(config, spec);
    REQUIRE(records.size() == 1200);
    std::array<int, kNumTypes> counts{};
    for (const QuestionRecord& r : records) {
        // count by the primary (generating) class encoded in the id
        for (QuestionType t : all_types()) {
            if (r.id.find(std::string("-") + to_string(t) + "-") != std::string::npos) {
                ++counts[static_cast<std::size_t>(t)];
            }
        }
    }
    CHECK(counts[static_cast<std::size_t>(QuestionType::CALC)] >
          counts[static_cast<std::size_t>(QuestionType::MAT)]);
    CHECK(counts[static_cast<std::size_t>(QuestionType::ES)] >
          counts[static_cast<std::size_t>(QuestionType::LDGR)]);
    CHECK(counts[static_cast<std::size_t>(QuestionType::MCQ)] >
          counts[static_cast<std::size_t>(QuestionType::OR)]);
}

TEST_CASE("ids are unique and prefixed") {
    TemplateSpec spec = load_templates(kTemplatePath);
    GenConfig config;
    config.seed = 3;
    config.n_per_class = 10;
    config.id_prefix = "fixture";
    auto records = generate(config, spec);
    std::set<std::string> ids;
    for (const QuestionRecord& r : records) {
        CHECK(r.id.rfind("fixture-", 0) == 0);
        CHECK(ids.insert(r.id).second);
        CHECK(!r.subject.empty());
    }
}

TEST_CASE("config validation") {
    TemplateSpec spec = load_templates(kTemplatePath);
    GenConfig config;  // neither n_per_class nor n_total
    CHECK_THROWS_AS(generate(config, spec), Error);
    config.n_per_class = 1;
    config.noise.truncate_tail = 1.5;
    CHECK_THROWS_AS(generate(config, spec), Error);
}

}  // TEST_SUITE

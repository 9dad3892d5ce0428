#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "qtype/textprob.hpp"

using namespace qtype;
using namespace qtype::textprob;

namespace {

QuestionRecord labeled(std::string id, std::string text, QuestionType t) {
    QuestionRecord r;
    r.id = std::move(id);
    r.text = std::move(text);
    r.subject = "s";
    r.labels = LabelSet{t};
    return r;
}

// 10 + 10 separable template questions over disjoint vocabularies.
std::vector<QuestionRecord> separable_corpus() {
    std::vector<QuestionRecord> out;
    for (int i = 0; i < 10; ++i) {
        out.push_back(labeled("m" + std::to_string(i),
                              "choose the correct option letter variant " + std::to_string(i),
                              QuestionType::MCQ));
        out.push_back(labeled("e" + std::to_string(i),
                              "compose an extended reflective argument essay " + std::to_string(i),
                              QuestionType::ES));
    }
    return out;
}

}  // namespace

TEST_SUITE("textprob") {

TEST_CASE("separable two-class toy set trains to accuracy 1.0") {
    auto corpus = separable_corpus();
    TextModel tm = fit_text_model(corpus, {QuestionType::MCQ, QuestionType::ES});
    int correct = 0;
    for (const QuestionRecord& r : corpus) {
        ProbabilityVector pv = tm.predict(r.text);
        bool says_mcq = pv[QuestionType::MCQ] > pv[QuestionType::ES];
        if (says_mcq == r.labels->contains(QuestionType::MCQ)) ++correct;
    }
    CHECK(correct == static_cast<int>(corpus.size()));
}

TEST_CASE("single-class input is rejected") {
    std::vector<QuestionRecord> corpus;
    for (int i = 0; i < 5; ++i) {
        corpus.push_back(labeled("m" + std::to_string(i), "text " + std::to_string(i),
                                 QuestionType::MCQ));
    }
    try {
        fit_text_model(corpus, all_types());
        FAIL("expected InsufficientClasses");
    } catch (const Error& e) {
        CHECK(e.code() == "InsufficientClasses");
    }
    // binary head needs both positives and negatives
    try {
        fit_text_model(corpus, {QuestionType::MCQ});
        FAIL("expected InsufficientClasses");
    } catch (const Error& e) {
        CHECK(e.code() == "InsufficientClasses");
    }
}

TEST_CASE("training is deterministic") {
    auto corpus = separable_corpus();
    TextTrainConfig config;
    config.seed = 42;
    TextModel a = fit_text_model(corpus, {QuestionType::MCQ, QuestionType::ES}, {}, config);
    TextModel b = fit_text_model(corpus, {QuestionType::MCQ, QuestionType::ES}, {}, config);
    CHECK(text_model_to_json(a) == text_model_to_json(b));
    CHECK(a.predict("choose the letter") == b.predict("choose the letter"));
}

TEST_CASE("zero-weight model outputs 0.5 for every class") {
    auto corpus = separable_corpus();
    TextTrainConfig config;
    config.epochs = 0;
    TextModel tm = fit_text_model(corpus, all_types(), {}, config);
    ProbabilityVector pv = tm.predict("anything at all");
    for (QuestionType t : all_types()) CHECK(pv[t] == 0.5);
}

TEST_CASE("per-epoch objective never increases") {
    auto corpus = separable_corpus();
    TextTrainConfig config;
    config.epochs = 25;
    TextModel tm = fit_text_model(corpus, {QuestionType::MCQ, QuestionType::ES}, {}, config);
    const auto& trace = tm.model.epoch_objectives();
    REQUIRE(trace.size() == 26);
    for (std::size_t i = 1; i < trace.size(); ++i) {
        CHECK(trace[i] <= trace[i - 1] + 1e-12);
    }
    CHECK(trace.back() < trace.front());
}

TEST_CASE("prediction is the N-token prefix prediction") {
    auto corpus = separable_corpus();
    VectorizerConfig vc;
    vc.max_tokens = 6;
    TextModel tm = fit_text_model(corpus, {QuestionType::MCQ, QuestionType::ES}, vc);

    std::string prefix = "choose the correct option letter variant";  // 6 tokens
    std::string longer = prefix + " plus extra trailing words beyond the limit";
    CHECK(tm.predict(longer) == tm.predict(prefix));
}

TEST_CASE("probabilities stay strictly inside (0,1)") {
    auto corpus = separable_corpus();
    TextModel tm = fit_text_model(corpus, {QuestionType::MCQ, QuestionType::ES});
    Rng rng(4);
    const std::vector<std::string> words = {"choose", "essay", "letter", "argument", "zzz", "42"};
    for (int i = 0; i < 50; ++i) {
        std::string text;
        for (int k = 0; k < rng.next_int(1, 12); ++k) {
            text += words[rng.next_index(words.size())];
            text += ' ';
        }
        ProbabilityVector pv = tm.predict(text);
        for (QuestionType t : {QuestionType::MCQ, QuestionType::ES}) {
            CHECK(pv[t] > 0.0);
            CHECK(pv[t] < 1.0);
        }
    }
}

TEST_CASE("one-vs-rest heads are independent") {
    auto corpus = separable_corpus();
    // add a third class so relabeling one head leaves others' data unchanged
    for (int i = 0; i < 6; ++i) {
        corpus.push_back(labeled("c" + std::to_string(i),
                                 "compute the numeric result value " + std::to_string(i),
                                 QuestionType::CALC));
    }
    std::vector<QuestionType> classes = {QuestionType::MCQ, QuestionType::ES, QuestionType::CALC};
    TextModel base = fit_text_model(corpus, classes);

    // flip every MCQ membership; ES and CALC memberships are untouched
    auto flipped = corpus;
    for (QuestionRecord& r : flipped) {
        LabelSet s = *r.labels;
        LabelSet out;
        for (QuestionType t : s.types()) {
            if (t != QuestionType::MCQ) out.insert(t);
        }
        if (!s.contains(QuestionType::MCQ)) out.insert(QuestionType::MCQ);
        // TBL is not a fitted head, so it pads empty sets without touching
        // any head's targets
        if (out.empty()) out.insert(QuestionType::TBL);
        r.labels = out;
    }
    TextModel refit = fit_text_model(flipped, classes);

    nlohmann::json wa = base.model.to_json()["weights"];
    nlohmann::json wb = refit.model.to_json()["weights"];
    CHECK(wa[1] == wb[1]);  // ES head identical
    CHECK(wa[2] == wb[2]);  // CALC head identical
    CHECK(wa[0] != wb[0]);  // MCQ head changed
}

TEST_CASE("vectorizer and model serialize losslessly") {
    auto corpus = separable_corpus();
    TextModel tm = fit_text_model(corpus, {QuestionType::MCQ, QuestionType::ES});
    TextModel back = text_model_from_json(text_model_to_json(tm));
    for (const QuestionRecord& r : corpus) {
        ProbabilityVector a = tm.predict(r.text);
        ProbabilityVector b = back.predict(r.text);
        CHECK(a == b);  // bit-identical
    }
}

TEST_CASE("warm start continues from previous weights") {
    auto corpus = separable_corpus();
    TextTrainConfig short_run;
    short_run.epochs = 3;
    TextModel first = fit_text_model(corpus, {QuestionType::MCQ, QuestionType::ES}, {}, short_run);
    TextModel second = fit_text_model(corpus, {QuestionType::MCQ, QuestionType::ES}, {}, short_run,
                                      &first.model);
    // the warm-started run starts from the first model's objective, not from scratch
    CHECK(second.model.epoch_objectives().front() ==
          doctest::Approx(first.model.epoch_objectives().back()).epsilon(1e-9));
}

TEST_CASE("external probability files validate") {
    std::string path = "/tmp/qtype_external_probs.jsonl";
    {
        std::ofstream out(path);
        out << R"({"id":"a","probs":{"MCQ":0.8,"CALC":0.1},"provenance":"export-1"})" << '\n';
        out << R"({"id":"b","probs":{"MCQ":0.2}})" << '\n';
    }
    ExternalProbs ep = load_external_probs(path, {"a", "b"});
    CHECK(ep.provenance == "export-1");
    CHECK(ep.lookup("a")[QuestionType::MCQ] == 0.8);
    CHECK(ep.lookup("b")[QuestionType::CALC] == 0.0);
    try {
        load_external_probs(path, {"a", "b", "c"});
        FAIL("expected MissingId");
    } catch (const Error& e) {
        CHECK(e.code() == "MissingId");
    }
    {
        std::ofstream out(path);
        out << R"({"id":"a","probs":{"MCQ":1.3}})" << '\n';
    }
    try {
        load_external_probs(path, {"a"});
        FAIL("expected InvalidProbability");
    } catch (const Error& e) {
        CHECK(e.code() == "InvalidProbability");
    }
    std::remove(path.c_str());
}

}  // TEST_SUITE

#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "qtype/augment.hpp"

using namespace qtype;
namespace aug = qtype::augment;

namespace {

QuestionRecord rec(std::string id, std::string text, std::optional<LabelSet> labels = {}) {
    QuestionRecord r;
    r.id = std::move(id);
    r.text = std::move(text);
    r.subject = "s";
    r.labels = labels;
    return r;
}

textprob::TextVectorizer fit_on(const std::vector<std::string>& texts) {
    textprob::TextVectorizer v{textprob::VectorizerConfig{}};
    v.fit(texts);
    return v;
}

}  // namespace

TEST_SUITE("augment") {

TEST_CASE("similarity basics") {
    auto vec = fit_on({"the cat sat", "dogs bark loudly", "the cat sat on the mat"});
    CHECK(aug::similarity("the cat sat", "the cat sat", vec) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(aug::similarity("the cat sat", "dogs bark loudly", vec) == doctest::Approx(0.0));
    double s = aug::similarity("the cat sat on the mat", "the cat sat", vec);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
}

TEST_CASE("similarity matches an independent dot-product computation") {
    // unigrams only on a 3-term toy vocabulary so the cosine is computable by hand
    textprob::VectorizerConfig cfg;
    cfg.bigrams = false;
    cfg.sublinear_tf = false;
    textprob::TextVectorizer vec{cfg};
    vec.fit({"alpha beta", "beta gamma", "alpha gamma"});

    // idf with n=3: df(alpha)=2, df(beta)=2, df(gamma)=2 -> idf = ln(4/3)+1 each
    double idf = std::log(4.0 / 3.0) + 1.0;
    // "alpha beta" vs "beta gamma": one shared term of equal weight;
    // each vector has two equal-weight terms -> cosine = 1/2
    double expected = (idf * idf) / (std::sqrt(2 * idf * idf) * std::sqrt(2 * idf * idf));
    CHECK(aug::similarity("alpha beta", "beta gamma", vec) ==
          doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.5).epsilon(1e-12));

    // all-zero vector (out-of-vocabulary is still hashed; empty text is zero)
    CHECK(aug::similarity("", "alpha beta", vec) == 0.0);
}

TEST_CASE("window semantics") {
    std::vector<QuestionRecord> gold = {
        rec("g1", "calculate the mean of the values 3 5 7 9 for the sample of students in the study",
            LabelSet{QuestionType::CALC}),
        rec("g2", "discuss the benefits and constraints of remote learning platforms",
            LabelSet{QuestionType::ES}),
    };
    std::vector<QuestionRecord> unlabeled = {
        rec("u1", "calculate the mean of the values 3 5 7 9 for the sample of students in the study"),  // duplicate, s=1
        rec("u2", "photosynthesis requires sunlight chlorophyll and carbon dioxide"),  // s~0
        rec("u3", "calculate the mean of the values 3 5 7 11 for the sample of students in the study"),  // paraphrase
    };
    std::vector<std::string> texts;
    for (const auto& r : gold) texts.push_back(r.text);
    for (const auto& r : unlabeled) texts.push_back(r.text);
    auto vec = fit_on(texts);

    // the paraphrase must actually land inside the window for this fixture
    double s = aug::similarity(unlabeled[2].text, gold[0].text, vec);
    REQUIRE(s >= 0.80);
    REQUIRE(s <= 0.95);

    aug::SimilarityConfig config;
    auto out = aug::augment(unlabeled, gold, vec, config);
    REQUIRE(out.size() == 1);
    CHECK(out[0].id == "u3");
    CHECK(out[0].labels == LabelSet{QuestionType::CALC});
    CHECK(out[0].source == Source::augmented);
}

TEST_CASE("exclusion set drops test-set collisions") {
    std::vector<QuestionRecord> gold = {
        rec("g1", "calculate the mean of the values 3 5 7 9 for the sample of students in the study",
            LabelSet{QuestionType::CALC}),
    };
    std::vector<QuestionRecord> unlabeled = {
        rec("u1", "Calculate the mean of   the values 3 5 7 11 for the sample of students in the study"),
    };
    std::vector<QuestionRecord> test_set = {
        rec("t1", "calculate the mean of the values 3 5 7 11 for the sample of students in the study"),
    };
    auto vec = fit_on({gold[0].text, unlabeled[0].text});

    aug::SimilarityConfig open_window;
    open_window.lower = 0.05;
    open_window.upper = 1.0;
    CHECK(aug::augment(unlabeled, gold, vec, open_window).size() == 1);

    open_window.exclusion = aug::exclusion_hashes(test_set);  // normalized-text collision
    auto out = aug::augment(unlabeled, gold, vec, open_window);
    CHECK(out.empty());
}

TEST_CASE("output labels are always copies of a gold label set") {
    std::vector<QuestionRecord> gold = {
        rec("g1", "journalize the cash transactions for the quarter",
            LabelSet{QuestionType::LDGR}),
        rec("g2", "sketch the graph of the line y equals two x", LabelSet{QuestionType::GR}),
    };
    std::vector<QuestionRecord> unlabeled = {
        rec("u1", "journalize the cash transactions for the month"),
        rec("u2", "sketch the graph of the line y equals three x"),
        rec("u3", "name the capital of france"),
    };
    std::vector<std::string> texts;
    for (const auto& r : gold) texts.push_back(r.text);
    for (const auto& r : unlabeled) texts.push_back(r.text);
    auto vec = fit_on(texts);

    aug::SimilarityConfig config;
    config.lower = 0.3;
    config.upper = 0.97;
    auto out = aug::augment(unlabeled, gold, vec, config);
    for (const QuestionRecord& r : out) {
        REQUIRE(r.labels.has_value());
        bool from_gold = false;
        for (const QuestionRecord& g : gold) from_gold = from_gold || *r.labels == *g.labels;
        CHECK(from_gold);
        CHECK(r.source == Source::augmented);
    }
}

TEST_CASE("shrinking the window never adds records") {
    Rng rng(60);
    std::vector<QuestionRecord> gold;
    std::vector<QuestionRecord> unlabeled;
    const std::vector<std::string> words = {"mean",  "value", "graph", "cash",  "cell",
                                            "force", "rate",  "data",  "curve", "index"};
    for (int i = 0; i < 8; ++i) {
        std::string text = "compute the";
        for (int k = 0; k < 6; ++k) text += " " + words[rng.next_index(words.size())];
        gold.push_back(rec("g" + std::to_string(i), text, LabelSet{QuestionType::CALC}));
    }
    for (int i = 0; i < 30; ++i) {
        std::string text = "compute the";
        for (int k = 0; k < 6; ++k) text += " " + words[rng.next_index(words.size())];
        unlabeled.push_back(rec("u" + std::to_string(i), text));
    }
    std::vector<std::string> texts;
    for (const auto& r : gold) texts.push_back(r.text);
    for (const auto& r : unlabeled) texts.push_back(r.text);
    auto vec = fit_on(texts);

    aug::SimilarityConfig wide;
    wide.lower = 0.3;
    wide.upper = 0.98;
    aug::SimilarityConfig narrow;
    narrow.lower = 0.5;
    narrow.upper = 0.9;
    auto wide_out = aug::augment(unlabeled, gold, vec, wide);
    auto narrow_out = aug::augment(unlabeled, gold, vec, narrow);
    CHECK(narrow_out.size() <= wide_out.size());
    for (const QuestionRecord& r : narrow_out) {
        bool in_wide = false;
        for (const QuestionRecord& w : wide_out) in_wide = in_wide || w.id == r.id;
        CHECK(in_wide);
    }
}

TEST_CASE("external embedding tables replace the internal vectorizer") {
    std::string path = "/tmp/qtype_embeddings_test.jsonl";
    {
        std::ofstream out(path);
        out << R"({"id":"g1","vector":[1.0,0.0,0.0]})" << '\n';
        out << R"({"id":"u1","vector":[0.9,0.5,0.0]})" << '\n';    // inside the window
        out << R"({"id":"u2","vector":[0.0,1.0,0.0]})" << '\n';    // orthogonal
        out << R"({"id":"u3","vector":[1.0,0.0,0.0]})" << '\n';    // identical, above upper
    }
    aug::EmbeddingTable table = aug::load_embeddings(path);
    CHECK(aug::cosine_dense(table.lookup("g1"), table.lookup("u2")) == 0.0);
    CHECK(aug::cosine_dense(table.lookup("g1"), table.lookup("u3")) == doctest::Approx(1.0));
    double s = aug::cosine_dense(table.lookup("g1"), table.lookup("u1"));
    REQUIRE(s >= 0.80);
    REQUIRE(s <= 0.95);

    std::vector<QuestionRecord> gold = {rec("g1", "gold text", LabelSet{QuestionType::CALC})};
    std::vector<QuestionRecord> unlabeled = {rec("u1", "near text"), rec("u2", "far text"),
                                             rec("u3", "gold text copy")};
    aug::SimilarityConfig config;
    auto out = aug::augment_with_embeddings(unlabeled, gold, table, config);
    REQUIRE(out.size() == 1);
    CHECK(out[0].id == "u1");
    CHECK(out[0].labels == LabelSet{QuestionType::CALC});

    try {
        aug::EmbeddingTable empty;
        aug::augment_with_embeddings(unlabeled, gold, empty, config);
        FAIL("expected MissingId");
    } catch (const Error& e) {
        CHECK(e.code() == "MissingId");
    }
    {
        std::ofstream out2(path);
        out2 << R"({"id":"a","vector":[1.0,2.0]})" << '\n';
        out2 << R"({"id":"b","vector":[1.0]})" << '\n';
    }
    CHECK_THROWS_AS(aug::load_embeddings(path), Error);
    std::remove(path.c_str());
}

TEST_CASE("window config validates") {
    aug::SimilarityConfig bad;
    bad.lower = 0.9;
    bad.upper = 0.8;
    CHECK_THROWS_AS(bad.validate(), Error);
    aug::SimilarityConfig zero;
    zero.lower = 0.0;
    CHECK_THROWS_AS(zero.validate(), Error);
}

}  // TEST_SUITE

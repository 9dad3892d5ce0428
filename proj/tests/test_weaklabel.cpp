#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "qtype/weaklabel.hpp"

using namespace qtype;
using namespace qtype::weaklabel;

namespace {

const char* kLexiconPath = QTYPE_DATA_DIR "/lexicons.json";
const char* kLfPath = QTYPE_DATA_DIR "/labeling_functions.json";

QuestionRecord make_record(std::string id, std::string text) {
    QuestionRecord r;
    r.id = std::move(id);
    r.text = std::move(text);
    r.subject = "s";
    return r;
}

VoteMatrix matrix_from(const std::vector<std::vector<int>>& votes,
                       const std::vector<QuestionType>& targets) {
    VoteMatrix vm;
    for (std::size_t j = 0; j < targets.size(); ++j) {
        vm.lf_names.push_back("lf" + std::to_string(j));
        vm.lf_targets.push_back(targets[j]);
    }
    for (std::size_t i = 0; i < votes.size(); ++i) {
        vm.record_ids.push_back("r" + std::to_string(i));
        vm.votes.push_back(votes[i]);
    }
    return vm;
}

// Honest Bayes posterior over one class model, recomputed with direct
// products (the implementation works in log space).
double bayes_posterior(double prior, const std::vector<double>& alpha,
                       const std::vector<double>& beta, const std::vector<int>& fired) {
    bool any = false;
    for (int f : fired) any = any || f == 1;
    if (!any) return prior;
    double pa = prior;
    double pb = 1.0 - prior;
    for (std::size_t j = 0; j < fired.size(); ++j) {
        pa *= fired[j] ? alpha[j] : 1.0 - alpha[j];
        pb *= fired[j] ? beta[j] : 1.0 - beta[j];
    }
    return pa / (pa + pb);
}

}  // namespace

TEST_SUITE("weaklabel") {

TEST_CASE("the shipped labeling function set loads and is reconstruction-sized") {
    auto lfs = load_labeling_functions(kLfPath);
    CHECK(lfs.size() >= 36);
    CHECK(lfs.size() <= 44);
    // every class has at least one LF
    LabelSet targeted;
    for (const auto& lf : lfs) targeted.insert(lf.target_class);
    CHECK(targeted.size() == 12);
}

TEST_CASE("bad regex fails at load time") {
    nlohmann::json j = nlohmann::json::parse(
        R"([{"name":"bad","target_class":"MCQ","rule_type":"regex",
             "rule_params":{"pattern":"(unclosed"}}])");
    try {
        lfs_from_json(j);
        FAIL("expected BadRegex");
    } catch (const Error& e) {
        CHECK(e.code() == "BadRegex");
    }
}

TEST_CASE("apply_lfs votes on structural evidence") {
    auto lexicons = features::load_lexicons(kLexiconPath);
    auto lfs = load_labeling_functions(kLfPath);
    std::vector<QuestionRecord> records = {
        make_record("mcq", fixtures::kWoundHealingMcq),
        make_record("es", fixtures::kNetworkEssay),
    };
    VoteMatrix vm = apply_lfs(lfs, records, lexicons);
    REQUIRE(vm.n_records() == 2);
    REQUIRE(vm.n_lfs() == lfs.size());

    int option_lf = -1;
    for (std::size_t j = 0; j < lfs.size(); ++j) {
        if (lfs[j].name == "lf_option_list_present") option_lf = static_cast<int>(j);
    }
    REQUIRE(option_lf >= 0);
    CHECK(vm.votes[0][static_cast<std::size_t>(option_lf)] == code_of(QuestionType::MCQ));
    CHECK(vm.votes[1][static_cast<std::size_t>(option_lf)] == kAbstain);

    // the essay text draws at least one ES vote
    bool es_vote = false;
    for (std::size_t j = 0; j < lfs.size(); ++j) {
        if (vm.votes[1][j] == code_of(QuestionType::ES)) es_vote = true;
    }
    CHECK(es_vote);
}

TEST_CASE("apply_lfs on zero records gives a 0 x m matrix") {
    auto lexicons = features::load_lexicons(kLexiconPath);
    auto lfs = load_labeling_functions(kLfPath);
    VoteMatrix vm = apply_lfs(lfs, {}, lexicons);
    CHECK(vm.n_records() == 0);
    CHECK(vm.n_lfs() == lfs.size());
}

TEST_CASE("lf_stats") {
    const int M = code_of(QuestionType::MCQ);
    const int E = code_of(QuestionType::ES);
    const int A = kAbstain;

    SUBCASE("lone voter covering everything") {
        auto stats = lf_stats(matrix_from({{M}, {M}, {M}}, {QuestionType::MCQ}));
        CHECK(stats[0].coverage == 1.0);
        CHECK(stats[0].overlap == 0.0);
        CHECK(stats[0].conflict == 0.0);
    }
    SUBCASE("two always agreeing") {
        auto stats = lf_stats(
            matrix_from({{M, M}, {M, M}}, {QuestionType::MCQ, QuestionType::MCQ}));
        CHECK(stats[0].overlap == 1.0);
        CHECK(stats[0].conflict == 0.0);
        CHECK(stats[1].overlap == 1.0);
    }
    SUBCASE("two always disagreeing on shared rows") {
        auto stats =
            lf_stats(matrix_from({{M, E}, {M, E}}, {QuestionType::MCQ, QuestionType::ES}));
        CHECK(stats[0].conflict == 1.0);
        CHECK(stats[1].conflict == 1.0);
    }
    SUBCASE("partial coverage") {
        auto stats = lf_stats(matrix_from({{M}, {A}, {M}, {A}}, {QuestionType::MCQ}));
        CHECK(stats[0].coverage == doctest::Approx(0.5));
    }
}

TEST_CASE("majority_vote") {
    const int M = code_of(QuestionType::MCQ);
    const int E = code_of(QuestionType::ES);
    const int A = kAbstain;
    std::vector<QuestionType> targets = {QuestionType::MCQ, QuestionType::MCQ, QuestionType::ES};

    auto out = majority_vote(matrix_from({{M, M, A}, {M, A, E}, {A, A, A}}, targets));
    REQUIRE(out.size() == 3);
    CHECK(out[0].covered);
    CHECK(out[0].probs[QuestionType::MCQ] == 1.0);
    CHECK(out[1].probs[QuestionType::MCQ] == 0.5);
    CHECK(out[1].probs[QuestionType::ES] == 0.5);
    CHECK_FALSE(out[2].covered);
    for (QuestionType t : all_types()) {
        CHECK(out[2].probs[t] == doctest::Approx(1.0 / 12));
    }
}

TEST_CASE("EM recovers synthetic accuracies within 0.05") {
    std::vector<oracle::SyntheticLf> lfs = {
        {QuestionType::MCQ, 0.9, 0.8},
        {QuestionType::MCQ, 0.7, 0.8},
        {QuestionType::MCQ, 0.6, 0.8},
    };
    auto synth = oracle::generate_votes(lfs, {QuestionType::MCQ, QuestionType::ES}, {0.5, 0.5},
                                        5000, 2024);
    VoteMatrix vm = matrix_from(synth.votes,
                                {QuestionType::MCQ, QuestionType::MCQ, QuestionType::MCQ});
    LabelModelConfig config;
    config.class_balance = 0.5;  // the generator's known balance
    LabelModel model = fit_label_model(vm, config);
    const ClassModel* cm = model.find(QuestionType::MCQ);
    REQUIRE(cm != nullptr);
    REQUIRE(cm->lf_columns.size() == 3);
    CHECK(std::abs(cm->accuracy(0) - 0.9) < 0.05);
    CHECK(std::abs(cm->accuracy(1) - 0.7) < 0.05);
    CHECK(std::abs(cm->accuracy(2) - 0.6) < 0.05);
    CHECK(std::abs(cm->propensity(0) - 0.8) < 0.05);
    CHECK(std::abs(cm->propensity(1) - 0.8) < 0.05);
    CHECK(std::abs(cm->propensity(2) - 0.8) < 0.05);
    CHECK(cm->prior == 0.5);
}

TEST_CASE("EM objective is non-decreasing") {
    std::vector<oracle::SyntheticLf> lfs = {
        {QuestionType::MCQ, 0.85, 0.6},
        {QuestionType::MCQ, 0.65, 0.9},
        {QuestionType::CALC, 0.8, 0.5},
    };
    auto synth = oracle::generate_votes(lfs, {QuestionType::MCQ, QuestionType::CALC}, {0.4, 0.6},
                                        800, 7);
    VoteMatrix vm = matrix_from(
        synth.votes, {QuestionType::MCQ, QuestionType::MCQ, QuestionType::CALC});
    LabelModel model = fit_label_model(vm);
    for (const ClassModel& cm : model.classes) {
        REQUIRE(cm.objective_trace.size() >= 2);
        for (std::size_t i = 1; i < cm.objective_trace.size(); ++i) {
            CHECK(cm.objective_trace[i] >= cm.objective_trace[i - 1] - 1e-9);
        }
    }
}

TEST_CASE("one perfect full-coverage LF reproduces its own votes") {
    std::vector<oracle::SyntheticLf> lfs = {{QuestionType::MCQ, 1.0, 1.0}};
    auto synth = oracle::generate_votes(lfs, {QuestionType::MCQ, QuestionType::ES}, {0.4, 0.6},
                                        20, 2);
    VoteMatrix vm = matrix_from(synth.votes, {QuestionType::MCQ});
    // a perfect full-coverage LF fires exactly on the positives, so its
    // coverage IS the class balance
    int fires = 0;
    for (const auto& row : vm.votes) fires += row[0] != kAbstain ? 1 : 0;
    LabelModelConfig config;
    config.class_balance = static_cast<double>(fires) / static_cast<double>(vm.n_records());
    LabelModel model = fit_label_model(vm, config);
    auto posteriors = predict_weak_labels(model, vm);

    const ClassModel* cm = model.find(QuestionType::MCQ);
    REQUIRE(cm != nullptr);
    for (std::size_t i = 0; i < 20; ++i) {
        bool voted = vm.votes[i][0] != kAbstain;
        double expected = bayes_posterior(cm->prior, cm->alpha, cm->beta, {voted ? 1 : 0});
        CHECK(posteriors[i].probs[QuestionType::MCQ] == doctest::Approx(expected).epsilon(1e-12));
        // posterior labels at 0.5 equal the LF's votes
        CHECK((posteriors[i].probs[QuestionType::MCQ] >= 0.5) == voted);
    }
}

TEST_CASE("posterior on a 2-LF row matches a closed-form Bayes computation") {
    std::vector<oracle::SyntheticLf> lfs = {
        {QuestionType::MCQ, 0.9, 0.8},
        {QuestionType::MCQ, 0.9, 0.8},
    };
    auto synth = oracle::generate_votes(lfs, {QuestionType::MCQ, QuestionType::ES}, {0.35, 0.65},
                                        3000, 77);
    VoteMatrix vm = matrix_from(synth.votes, {QuestionType::MCQ, QuestionType::MCQ});
    LabelModel model = fit_label_model(vm);
    const ClassModel* cm = model.find(QuestionType::MCQ);
    REQUIRE(cm != nullptr);

    auto posteriors = predict_weak_labels(model, vm);
    for (std::size_t i = 0; i < vm.n_records(); ++i) {
        std::vector<int> fired = {vm.votes[i][0] != kAbstain ? 1 : 0,
                                  vm.votes[i][1] != kAbstain ? 1 : 0};
        double expected = bayes_posterior(cm->prior, cm->alpha, cm->beta, fired);
        CHECK(posteriors[i].probs[QuestionType::MCQ] == doctest::Approx(expected).epsilon(1e-10));
        if (fired[0] && fired[1]) {
            CHECK(posteriors[i].probs[QuestionType::MCQ] > cm->prior);
        }
    }
}

TEST_CASE("all-abstain rows fall back to the class prior") {
    const int M = code_of(QuestionType::MCQ);
    const int A = kAbstain;
    VoteMatrix vm = matrix_from({{M}, {A}, {M}, {A}, {A}}, {QuestionType::MCQ});
    LabelModel model = fit_label_model(vm);
    auto posteriors = predict_weak_labels(model, vm);
    const ClassModel* cm = model.find(QuestionType::MCQ);
    CHECK(posteriors[1].probs[QuestionType::MCQ] == cm->prior);
    CHECK_FALSE(posteriors[1].covered);
    CHECK(posteriors[0].covered);
}

TEST_CASE("posteriors are invariant to row and column permutations") {
    std::vector<oracle::SyntheticLf> lfs = {
        {QuestionType::MCQ, 0.8, 0.7},
        {QuestionType::MCQ, 0.7, 0.5},
        {QuestionType::ES, 0.85, 0.6},
    };
    auto synth = oracle::generate_votes(lfs, {QuestionType::MCQ, QuestionType::ES}, {0.5, 0.5},
                                        400, 13);
    std::vector<QuestionType> targets = {QuestionType::MCQ, QuestionType::MCQ, QuestionType::ES};
    VoteMatrix vm = matrix_from(synth.votes, targets);
    auto base = predict_weak_labels(fit_label_model(vm), vm);

    // column permutation (swap the two MCQ columns)
    std::vector<std::vector<int>> swapped = synth.votes;
    for (auto& row : swapped) std::swap(row[0], row[1]);
    VoteMatrix vm_cols = matrix_from(swapped, targets);
    auto by_cols = predict_weak_labels(fit_label_model(vm_cols), vm_cols);

    // row permutation (reverse)
    std::vector<std::vector<int>> reversed(synth.votes.rbegin(), synth.votes.rend());
    VoteMatrix vm_rows = matrix_from(reversed, targets);
    auto by_rows = predict_weak_labels(fit_label_model(vm_rows), vm_rows);

    for (std::size_t i = 0; i < base.size(); ++i) {
        for (QuestionType t : {QuestionType::MCQ, QuestionType::ES}) {
            CHECK(base[i].probs[t] == doctest::Approx(by_cols[i].probs[t]).epsilon(1e-9));
            CHECK(base[i].probs[t] ==
                  doctest::Approx(by_rows[base.size() - 1 - i].probs[t]).epsilon(1e-9));
        }
    }
}

TEST_CASE("single LF per class: posterior ranking equals the vote pattern") {
    std::vector<oracle::SyntheticLf> lfs = {{QuestionType::CALC, 0.8, 0.6}};
    auto synth = oracle::generate_votes(lfs, {QuestionType::CALC, QuestionType::SA}, {0.5, 0.5},
                                        300, 3);
    VoteMatrix vm = matrix_from(synth.votes, {QuestionType::CALC});
    LabelModel model = fit_label_model(vm);
    auto posteriors = predict_weak_labels(model, vm);
    double fired_min = 1.0, unfired_max = 0.0;
    for (std::size_t i = 0; i < vm.n_records(); ++i) {
        double p = posteriors[i].probs[QuestionType::CALC];
        if (vm.votes[i][0] != kAbstain) {
            fired_min = std::min(fired_min, p);
        } else {
            unfired_max = std::max(unfired_max, p);
        }
    }
    CHECK(fired_min > unfired_max);
}

TEST_CASE("label model beats majority vote on the adversarial mix") {
    // one 55%-accuracy full-coverage LF vs two 90%-accuracy half-coverage LFs
    std::vector<oracle::SyntheticLf> lfs = {
        {QuestionType::MCQ, 0.55, 1.0},
        {QuestionType::MCQ, 0.9, 0.5},
        {QuestionType::MCQ, 0.9, 0.5},
    };
    auto synth = oracle::generate_votes(lfs, {QuestionType::MCQ, QuestionType::ES}, {0.3, 0.7},
                                        5000, 99);
    VoteMatrix vm = matrix_from(
        synth.votes, {QuestionType::MCQ, QuestionType::MCQ, QuestionType::MCQ});

    LabelModel model = fit_label_model(vm);
    auto lm_posteriors = predict_weak_labels(model, vm);
    auto mv_posteriors = majority_vote(vm);

    std::size_t lm_correct = 0, mv_correct = 0;
    for (std::size_t i = 0; i < vm.n_records(); ++i) {
        bool truth = synth.truth[i] == QuestionType::MCQ;
        if ((lm_posteriors[i].probs[QuestionType::MCQ] >= 0.5) == truth) ++lm_correct;
        if ((mv_posteriors[i].probs[QuestionType::MCQ] >= 0.5) == truth) ++mv_correct;
    }
    CHECK(lm_correct > mv_correct);
}

TEST_CASE("degenerate class and shape mismatches are reported") {
    const int A = kAbstain;
    try {
        fit_label_model(matrix_from({{A}, {A}}, {QuestionType::MCQ}));
        FAIL("expected DegenerateClass");
    } catch (const Error& e) {
        CHECK(e.code() == "DegenerateClass");
    }

    const int M = code_of(QuestionType::MCQ);
    VoteMatrix vm = matrix_from({{M}}, {QuestionType::MCQ});
    LabelModel model = fit_label_model(vm);
    VoteMatrix other = matrix_from({{M, A}}, {QuestionType::MCQ, QuestionType::ES});
    try {
        predict_weak_labels(model, other);
        FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == "ShapeMismatch");
    }
}

TEST_CASE("emit_silver_set") {
    std::vector<QuestionRecord> records = {make_record("a", "q1"), make_record("b", "q2"),
                                           make_record("c", "q3")};
    std::vector<WeakPosterior> posteriors(3);
    posteriors[0].covered = true;
    posteriors[0].probs[QuestionType::MCQ] = 0.9;
    posteriors[0].probs[QuestionType::CALC] = 0.8;
    posteriors[1].covered = true;
    posteriors[1].probs[QuestionType::ES] = 0.45;  // below threshold, argmax fallback
    posteriors[2].covered = false;                 // dropped

    auto silver = emit_silver_set(records, posteriors, 0.7);
    REQUIRE(silver.size() == 2);
    CHECK(silver[0].labels == LabelSet{QuestionType::MCQ, QuestionType::CALC});
    CHECK(silver[0].source == Source::silver);
    CHECK(silver[1].labels == LabelSet{QuestionType::ES});

    CHECK_THROWS_AS(emit_silver_set(records, posteriors, 1.5), Error);
    CHECK_THROWS_AS(emit_silver_set(records, posteriors, 0.0), Error);
}

TEST_CASE("vote matrix round-trips through the jsonl export") {
    auto lexicons = features::load_lexicons(kLexiconPath);
    auto lfs = load_labeling_functions(kLfPath);
    std::vector<QuestionRecord> records = {
        make_record("a", fixtures::kWoundHealingMcq),
        make_record("b", "Calculate 3 + 4."),
    };
    VoteMatrix vm = apply_lfs(lfs, records, lexicons);
    std::string path = "/tmp/qtype_votes_test.jsonl";
    write_votes(path, vm);
    VoteMatrix back = read_votes(path, lfs);
    CHECK(back.votes == vm.votes);
    CHECK(back.record_ids == vm.record_ids);
    std::remove(path.c_str());
}

}  // TEST_SUITE

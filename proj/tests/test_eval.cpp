#include "drift/errors.hpp"
#include "drift/eval/eval.hpp"
#include "eval_checks.hpp"
#include "loss_checks.hpp"
#include "data_checks.hpp"
#include "train_checks.hpp"

#include <gtest/gtest.h>

#include <fstream>

namespace {

using namespace drift;
using namespace drift::eval;
using namespace drift::testing;
namespace fs = std::filesystem;

std::shared_ptr<const model::FrozenBackbone> backbone(std::uint64_t seed = 0) {
    return std::make_shared<const model::FrozenBackbone>(small_backbone(seed));
}

TEST(Top1, Fixtures) {
    const std::vector<int> y{0, 1, 1, 0};
    EXPECT_EQ(top1_accuracy(one_hot_preds({0, 1, 1, 0}, 2), y), 100.0);
    EXPECT_EQ(top1_accuracy(one_hot_preds({1, 0, 0, 1}, 2), y), 0.0);
    EXPECT_EQ(top1_accuracy(one_hot_preds({0, 1, 1, 1}, 2), y), 75.0);
    EXPECT_THROW(top1_accuracy({}, {}), EvaluationError);
}

TEST(Top1, TiesGoToLowestIndex) {
    const std::vector<losses::ProbDist> p{losses::ProbDist::uniform(3)};
    EXPECT_EQ(top1_accuracy(p, std::vector<int>{0}), 100.0);
    EXPECT_EQ(top1_accuracy(p, std::vector<int>{2}), 0.0);
}

TEST(MacroF1, HandConfusionMatrix) {
    const std::vector<int> y{0, 0, 1, 1};
    const auto preds = one_hot_preds({0, 1, 0, 1}, 2);
    const auto per = per_class_metrics(preds, y, 2);
    EXPECT_EQ(per[0].f1, 50.0);
    EXPECT_EQ(per[1].f1, 50.0);
    EXPECT_EQ(macro_f1(preds, y, 2), 50.0);
    EXPECT_EQ(macro_f1(one_hot_preds({0, 0, 1, 1}, 2), y, 2), 100.0);
}

TEST(MacroF1, AbsentClassContributesZero) {
    const std::vector<int> y{0, 1};
    EXPECT_NEAR(macro_f1(one_hot_preds({0, 1}, 3), y, 3), 200.0 / 3.0, 1e-12);
}

TEST(MacroF1, LabelOutOfRange) {
    const std::vector<int> y{0, 2};
    EXPECT_THROW(macro_f1(one_hot_preds({0, 1}, 2), y, 2), LabelError);
}

TEST(MacroF1, ArgmaxMetricsIgnoreLogitScale) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
        const Eigen::MatrixXd z = unit_rows(12, 4, rng);
        const Eigen::MatrixXd rows = unit_rows(3, 4, rng);
        const auto y = random_labels(12, 3, rng);
        std::vector<losses::ProbDist> sharp;
        std::vector<losses::ProbDist> soft;
        for (Eigen::Index i = 0; i < 12; ++i) {
            sharp.push_back(losses::class_probs(z.row(i).transpose(), rows, 0.05));
            soft.push_back(losses::class_probs(z.row(i).transpose(), rows, 2.0));
        }
        EXPECT_EQ(top1_accuracy(sharp, y), top1_accuracy(soft, y));
        EXPECT_EQ(macro_f1(sharp, y, 3), macro_f1(soft, y, 3));
        double mean = 0.0;
        for (const auto& c : per_class_metrics(sharp, y, 3)) mean += c.f1 / 3.0;
        EXPECT_NEAR(macro_f1(sharp, y, 3), mean, 1e-6);
    }
}

TEST(Auc, PairCountFixture) {
    const std::vector<int> y{1, 0, 1, 0};
    const auto preds = binary_preds({0.9, 0.8, 0.3, 0.1});
    EXPECT_EQ(roc_auc(preds, y, 2).auc, 75.0);
    EXPECT_EQ(pair_count_auc(preds, y, 2), 75.0);
    EXPECT_EQ(roc_auc(binary_preds({0.9, 0.1, 0.8, 0.2}), y, 2).auc, 100.0);
}

TEST(Auc, RankFormEqualsPairCounting) {
    std::mt19937_64 rng(4);
    for (int n : {2, 5, 17, 64, 200}) {
        for (int classes : {2, 3, 5}) {
            const auto preds = random_coarse_preds(n, classes, rng);
            const auto y = random_labels(n, classes, rng);
            const double oracle = pair_count_auc(preds, y, classes);
            if (oracle < 0.0) {
                EXPECT_THROW(roc_auc(preds, y, classes), EvaluationError);
                continue;
            }
            EXPECT_NEAR(roc_auc(preds, y, classes).auc, oracle, 1e-9) << n << "x" << classes;
        }
    }
}

TEST(Auc, ChanceLevelForIndependentScores) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> s(500);
    for (auto& v : s) v = u(rng);
    const auto y = random_labels(500, 2, rng);
    const int pos = int(std::count(y.begin(), y.end(), 1));
    const int neg = 500 - pos;
    // Standard deviation of the Mann-Whitney AUC under the null.
    const double sd = 100.0 * std::sqrt((pos + neg + 1.0) / (12.0 * pos * neg));
    EXPECT_NEAR(roc_auc(binary_preds(s), y, 2).auc, 50.0, 3.0 * sd);
}

TEST(Auc, SkipsOneSidedClasses) {
    std::mt19937_64 rng(1);
    const std::vector<int> y{0, 0, 1, 1};
    const auto r = roc_auc(random_coarse_preds(4, 3, rng), y, 3);
    EXPECT_EQ(r.skipped, std::vector<int>{2});
    const std::vector<int> single{0, 0};
    EXPECT_THROW(roc_auc(binary_preds({0.1, 0.2}), single, 2), EvaluationError);
}

// Model-backed evaluation ------------------------------------------------

trainer::ModelState untrained_state(const data::DatasetManifest& m, std::uint64_t seed = 0) {
    auto cfg = tiny_train_config("eval_state", seed);
    return trainer::build_model_state(cfg, backbone(), m);
}

TEST(Predict, DistributionsAndArgmaxMatchSimilarities) {
    const auto m = tiny_task(3, 6);
    const auto state = untrained_state(m);
    auto recs = m.split(data::Split::test_id);
    recs.push_back(recs.front());
    const auto preds = predict(state, m.class_names, recs);
    EXPECT_EQ(preds.front().probs(), preds.back().probs());
    const auto rows = state.class_embeddings();
    for (std::size_t i = 0; i < recs.size(); ++i) {
        EXPECT_NEAR(preds[i].probs().sum(), 1.0, 1e-6);
        const auto d = model::decouple(state.encoder->encode_image(*recs[i]->image), state.encoder->heads(),
                                       model::Modality::vision);
        Eigen::Index best = 0;
        (rows.invariant * d.invariant).maxCoeff(&best);
        EXPECT_EQ(preds[i].argmax(), best);
    }
}

TEST(Predict, ClassMismatchIsCompatibilityError) {
    const auto m = tiny_task(2, 4);
    const auto state = untrained_state(m);
    const auto recs = m.split(data::Split::test_id);
    EXPECT_THROW(predict(state, {"x", "y"}, recs), CompatibilityError);
}

TEST(Evaluate, DeterministicAndBounded) {
    const auto m = tiny_task(3, 10);
    const auto state = untrained_state(m);
    const auto a = evaluate(state, m, data::Split::test_ood);
    const auto b = evaluate(state, m, data::Split::test_ood);
    EXPECT_EQ(a.top1, b.top1);
    EXPECT_EQ(a.macro_f1, b.macro_f1);
    EXPECT_EQ(a.auc, b.auc);
    double mean_f1 = 0.0;
    for (const auto& c : a.per_class) mean_f1 += c.f1 / 3.0;
    EXPECT_NEAR(a.macro_f1, mean_f1, 1e-6);
    for (double v : {a.top1, a.macro_f1, *a.auc}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 100.0);
    }
}

TEST(Evaluate, OneClassSplitRaisesForAuc) {
    auto m = tiny_task(2, 4);
    std::erase_if(m.records, [](const data::ExampleRecord& r) { return r.label == 1 && r.split == data::Split::test_id; });
    const auto state = untrained_state(m);
    EXPECT_THROW(evaluate(state, m, data::Split::test_id), EvaluationError);
    const auto ok = evaluate(state, m, data::Split::test_id, {true});
    EXPECT_FALSE(ok.auc.has_value());
    EXPECT_GE(ok.top1, 0.0);
}

TEST(Evaluate, UntrainedModelIsAtChance) {
    // Pool several untrained models so the check is about the method, not one draw.
    const int classes = 4;
    int correct = 0;
    int total = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        data::SyntheticBenchConfig s;
        s.num_classes = classes;
        s.samples_per_class = 40;
        s.rho_ood = 1.0 / classes;
        s.seed = seed;
        const auto m = data::generate_synthetic_benchmark(s);
        auto cfg = tiny_train_config("chance", seed);
        const auto state = trainer::build_model_state(cfg, backbone(seed), m);
        const auto recs = m.split(data::Split::test_ood);
        const auto preds = predict(state, m.class_names, recs);
        for (std::size_t i = 0; i < recs.size(); ++i) correct += preds[i].argmax() == recs[i]->label;
        total += int(recs.size());
    }
    const double p = 1.0 / classes;
    EXPECT_NEAR(double(correct) / total, p, binomial_halfwidth_99(p, total));
}

TEST(CrossEval, AveragesTargetsAndAligns) {
    const auto src = tiny_task(2, 6, 1);
    const auto state = untrained_state(src);
    auto t1 = tiny_task(2, 6, 2);
    auto t2 = tiny_task(2, 6, 3);
    t2.class_names = {"benign", "malignant"};
    for (auto& r : t2.records) r.class_name = t2.class_names[std::size_t(r.label)];
    std::map<std::string, data::DatasetManifest> manifests{{"t1", t1}, {"t2", t2}};

    CrossEvalSpec spec{"src", {"t1"}, {}, data::Split::test_ood};
    const auto single = cross_eval(state, spec, manifests);
    EXPECT_EQ(single.average_top1, evaluate(state, t1, data::Split::test_ood, {true}).top1);

    spec.targets = {"t1", "t2"};
    try {
        cross_eval(state, spec, manifests);
        FAIL();
    } catch (const AlignmentError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("t2:benign"), std::string::npos) << msg;
        EXPECT_NE(msg.find("t2:malignant"), std::string::npos) << msg;
    }
    spec.alignment = {{"benign", src.class_names[0]}, {"malignant", src.class_names[1]}};
    const auto both = cross_eval(state, spec, manifests);
    EXPECT_EQ(both.average_top1, (both.per_target.at("t1") + both.per_target.at("t2")) / 2.0);
}

// Reports ----------------------------------------------------------------

Report sample_table1() {
    Report r;
    r.layout = Layout::table1;
    r.methods = {"CE-only", "DRiFt"};
    r.rows = {{"synthetic", 4, {{25.5, 20.125, 51.0, ""}, {31.0, 30.0, std::nullopt, ""}}},
              {"other", 2, {{0.1 + 0.2, 1.0 / 3.0, 99.99, ""}, {100.0, 100.0, 100.0, ""}}}};
    return r;
}

TEST(Report, Table1RoundTripAndMissingCell) {
    const auto dir = scratch("report1");
    fs::create_directories(dir);
    const auto path = dir / report_filename(Layout::table1, "synthetic", std::string(64, 'a'), 3);
    EXPECT_EQ(path.filename().string(), "table1_synthetic_aaaaaaaaaaaa_seed3.tsv");
    const auto report = sample_table1();
    emit_report(report, path);
    EXPECT_EQ(parse_report(path), report);
    EXPECT_EQ(read_report_json(fs::path(path.string() + ".json")), report);
    std::ifstream f(path);
    const std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    EXPECT_NE(text.find(kMissingCell), std::string::npos);
    EXPECT_NE(text.find("DRiFt Macro-F1"), std::string::npos);
    EXPECT_NE(text.find("average"), std::string::npos);
}

TEST(Report, SingleRowTable) {
    Report r;
    r.methods = {"DRiFt"};
    r.rows = {{"synthetic", 4, {{50.0, 40.0, 60.0, ""}}}};
    const auto path = scratch("report_single") / "t.tsv";
    fs::create_directories(path.parent_path());
    emit_report(r, path);
    std::ifstream f(path);
    std::string header;
    std::getline(f, header);
    EXPECT_EQ(std::count(header.begin(), header.end(), '\t'), 4);  // classes, dataset, 3 metrics
    EXPECT_EQ(parse_report(path), r);
}

TEST(Report, Table2RoundTrip) {
    Report r;
    r.layout = Layout::table2;
    r.methods = {"DRiFt"};
    r.rows = {{"src", 0, {{42.25, std::nullopt, std::nullopt, "avg(t1, t2)"}}}};
    const auto path = scratch("report2") / "t2.tsv";
    fs::create_directories(path.parent_path());
    emit_report(r, path);
    EXPECT_EQ(parse_report(path), r);
}

TEST(Report, UnwritablePathIsIoError) {
    EXPECT_THROW(emit_report(sample_table1(), "/proc/drift_cannot_write/x.tsv"), IoError);
}

}  // namespace

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "bssp/datagen.hpp"
#include "bssp/models.hpp"

using namespace bssp;

namespace {

double corr(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

std::vector<double> column(const BinaryMatrix& x, std::size_t j) {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = x(i, j);
    return out;
}

}  // namespace

TEST_CASE("covariate draws are fair, independent, and reproducible") {
    const std::size_t n = 20000;
    const BinaryMatrix x = gen_covariates(n, 4, 123);
    for (std::size_t j = 0; j < 4; ++j) {
        double mean = 0;
        for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
        mean /= n;
        CHECK(std::abs(mean - 0.5) < 3.0 / std::sqrt(static_cast<double>(n)));
    }
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = a + 1; b < 4; ++b) CHECK(std::abs(corr(column(x, a), column(x, b))) < 0.03);
    CHECK(gen_covariates(n, 4, 123) == x);
    CHECK_FALSE(gen_covariates(n, 4, 124) == x);
}

TEST_CASE("regression generator is deterministic given the config") {
    RegressionGenConfig cfg;
    cfg.n = 500;
    cfg.bias_rate = 2.0;
    cfg.seed = 9;
    const Dataset a = gen_regression(cfg);
    const Dataset b = gen_regression(cfg);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    CHECK(a.feature_names.front() == "S1");
    CHECK(a.feature_names.back() == "V5");
}

TEST_CASE("selection bias flips the spurious correlation with the bias sign") {
    RegressionGenConfig cfg;
    cfg.n = 2000;
    cfg.seed = 4;
    cfg.bias_rate = 2.0;
    const Dataset pos = gen_regression(cfg);
    CHECK(corr(column(pos.x, 9), pos.y) > 0.2);
    cfg.bias_rate = -2.0;
    const Dataset neg = gen_regression(cfg);
    CHECK(corr(column(neg.x, 9), neg.y) < -0.2);
}

TEST_CASE("a bias rate just above 1 is effectively unbiased") {
    RegressionGenConfig cfg;
    cfg.n = 4000;
    cfg.seed = 10;
    cfg.bias_rate = 1.0001;
    const Dataset data = gen_regression(cfg);
    for (std::size_t j = 5; j < 10; ++j) CHECK(std::abs(corr(column(data.x, j), data.y)) < 0.06);
}

TEST_CASE("plain regression on biased draws picks up the noisy feature") {
    double mean_v5 = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        RegressionGenConfig cfg;
        cfg.n = 2000;
        cfg.seed = 100 + seed;
        cfg.bias_rate = 2.0;
        const Dataset data = gen_regression(cfg);
        const ModelFit fit = fit_linear(data.x, data.y);
        mean_v5 += fit.coefficients[9];
    }
    mean_v5 /= 10.0;
    CHECK(mean_v5 > 0.05);
}

TEST_CASE("regression config is validated") {
    RegressionGenConfig cfg;
    cfg.bias_rate = 1.0;  // |r| must exceed 1
    CHECK_THROWS_AS(gen_regression(cfg), error);
    cfg.bias_rate = 3.5;
    CHECK_THROWS_AS(gen_regression(cfg), error);
    cfg.bias_rate = 2.0;
    cfg.beta_stable = {1.0};
    CHECK_THROWS_AS(gen_regression(cfg), error);
}

TEST_CASE("classification generator behaves like the regression one") {
    ClassificationGenConfig cfg;
    cfg.n = 3000;
    cfg.seed = 5;
    cfg.bias_rate = 0.5;
    const Dataset mid = gen_classification(cfg);
    CHECK(std::abs(corr(column(mid.x, 9), mid.y)) < 0.06);

    cfg.bias_rate = 0.85;
    const Dataset pos = gen_classification(cfg);
    CHECK(corr(column(pos.x, 9), pos.y) > 0.2);

    cfg.bias_rate = 0.15;
    const Dataset neg = gen_classification(cfg);
    CHECK(corr(column(neg.x, 9), neg.y) < -0.2);

    cfg.bias_rate = 0.85;
    const Dataset again = gen_classification(cfg);
    CHECK(again.x == pos.x);
    CHECK(again.y == pos.y);
    CHECK(pos.binary_outcome);

    cfg.bias_rate = 1.0;
    CHECK_THROWS_AS(gen_classification(cfg), error);
}

TEST_CASE("environment shift moves the joint feature law but not P(y|S)") {
    RegressionGenConfig cfg;
    cfg.n = 2000;
    std::vector<double> joint_gap, beta_gap;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        cfg.seed = 700 + seed;
        cfg.bias_rate = 2.0;
        const Dataset pos = gen_regression(cfg);
        cfg.bias_rate = -2.0;
        const Dataset neg = gen_regression(cfg);

        // empirical joint of (S1, V5): total variation across environments
        double cells_pos[4] = {0, 0, 0, 0}, cells_neg[4] = {0, 0, 0, 0};
        for (std::size_t i = 0; i < pos.size(); ++i) ++cells_pos[2 * pos.x(i, 0) + pos.x(i, 9)];
        for (std::size_t i = 0; i < neg.size(); ++i) ++cells_neg[2 * neg.x(i, 0) + neg.x(i, 9)];
        double tv = 0;
        for (int c = 0; c < 4; ++c) tv += std::abs(cells_pos[c] - cells_neg[c]) / 2000.0;
        joint_gap.push_back(tv / 2);

        // stable-feature regression agrees across environments
        BinaryMatrix s_pos(pos.size(), 5), s_neg(neg.size(), 5);
        for (std::size_t i = 0; i < pos.size(); ++i)
            for (std::size_t j = 0; j < 5; ++j) s_pos(i, j) = pos.x(i, j);
        for (std::size_t i = 0; i < neg.size(); ++i)
            for (std::size_t j = 0; j < 5; ++j) s_neg(i, j) = neg.x(i, j);
        const ModelFit fit_pos = fit_linear(s_pos, pos.y);
        const ModelFit fit_neg = fit_linear(s_neg, neg.y);
        double gap = 0;
        for (std::size_t j = 0; j < 5; ++j) gap = std::max(gap, std::abs(fit_pos.coefficients[j] - fit_neg.coefficients[j]));
        beta_gap.push_back(gap);
    }
    double mean_tv = 0, mean_beta = 0;
    for (double v : joint_gap) mean_tv += v;
    for (double v : beta_gap) mean_beta += v;
    mean_tv /= joint_gap.size();
    mean_beta /= beta_gap.size();
    CHECK(mean_tv > 0.05);     // the (V,S) joint genuinely shifts
    CHECK(mean_beta < 0.25);   // while the outcome model on S stays put
}

TEST_CASE("csv ingestion dichotomizes, filters, and splits environments") {
    std::stringstream csv;
    csv << "age,rare,score,outcome,group\n";
    // 'rare' is almost always 1 and must be dropped by the frequency band
    for (int i = 0; i < 40; ++i) {
        const int rare = i == 0 ? 0 : 1;
        csv << (20 + i) << ',' << rare << ',' << (i % 2 ? 10.5 : -3.0) << ',' << (i % 2) << ",g" << (i % 4) << '\n';
    }
    IngestConfig cfg;
    cfg.outcome_column = "outcome";
    cfg.environment_column = "group";
    const IngestResult result = ingest_csv(csv, cfg);
    REQUIRE(result.report.dropped_features.size() == 1);
    CHECK(result.report.dropped_features[0].name == "rare");
    CHECK(result.report.kept_features == std::vector<std::string>{"age", "score"});
    REQUIRE(result.environments.size() == 4);
    std::size_t total = 0;
    for (const auto& env : result.environments) {
        total += env.size();
        CHECK(env.x.cols() == 2);
        CHECK(env.environment_label.has_value());
    }
    CHECK(total == 40);
    // 'score' was two-valued, the mean threshold reproduces the high/low split
    for (const auto& env : result.environments)
        for (std::size_t i = 0; i < env.size(); ++i) CHECK(env.x(i, 1) == (env.y[i] > 0.5 ? 1 : 0));
}

TEST_CASE("binary columns pass through the mean threshold unchanged") {
    std::stringstream csv;
    csv << "flag,outcome\n";
    for (int i = 0; i < 10; ++i) csv << (i % 2) << ',' << i << '\n';
    IngestConfig cfg;
    cfg.outcome_column = "outcome";
    const IngestResult result = ingest_csv(csv, cfg);
    REQUIRE(result.environments.size() == 1);
    const Dataset& ds = result.environments[0];
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(ds.x(i, 0) == i % 2);
}

TEST_CASE("rows with unparseable entries are dropped and counted") {
    std::stringstream csv;
    csv << "a,b,outcome\n1,2,3\n1,,4\nx,2,5\n0,1,6\n";
    IngestConfig cfg;
    cfg.outcome_column = "outcome";
    cfg.frequency_low = 0.0;
    cfg.frequency_high = 1.0;
    const IngestResult result = ingest_csv(csv, cfg);
    CHECK(result.report.dropped_rows == 2);
    CHECK(result.environments[0].size() == 2);
}

TEST_CASE("ingestion failures carry diagnostics") {
    std::stringstream empty;
    IngestConfig cfg;
    cfg.outcome_column = "y";
    CHECK_THROWS_AS(ingest_csv(empty, cfg), error);

    std::stringstream missing("a,b\n1,2\n");
    CHECK_THROWS_AS(ingest_csv(missing, cfg), error);

    std::stringstream all_dropped("a,y\n1,0\n1,1\n1,0\n");
    cfg.outcome_column = "y";
    CHECK_THROWS_AS(ingest_csv(all_dropped, cfg), error);
}

TEST_CASE("dataset csv export carries names, outcome, and environment") {
    Dataset ds;
    ds.x = BinaryMatrix(2, 2);
    ds.x(0, 0) = 1;
    ds.y = {0.5, 1.5};
    ds.feature_names = {"f1", "f2"};
    ds.environment_label = "e1";
    std::ostringstream out;
    write_dataset_csv(out, ds);
    CHECK(out.str().rfind("f1,f2,y,environment\n1,0,0.5,e1\n", 0) == 0);
}

TEST_CASE("binary dataset reader round-trips the exporter") {
    Dataset ds;
    ds.x = BinaryMatrix(3, 2);
    ds.x(0, 0) = 1;
    ds.x(2, 1) = 1;
    ds.y = {1.0, 0.0, 1.0};
    ds.feature_names = {"a", "b"};
    std::ostringstream out;
    write_dataset_csv(out, ds);
    std::istringstream in(out.str());
    const Dataset back = read_binary_dataset_csv(in);
    CHECK(back.x == ds.x);
    CHECK(back.y == ds.y);
    CHECK(back.feature_names == ds.feature_names);

    std::istringstream bad("a,y\n2,1\n");
    CHECK_THROWS_AS(read_binary_dataset_csv(bad), error);
}

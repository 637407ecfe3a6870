#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>

#include "friquee/evaluation.hpp"

using namespace friquee;
using namespace friquee::eval;

namespace {

// Rank by counting: 1 + (number strictly below) + half the number of other equal values.
std::vector<long double> counted_ranks(const std::vector<double>& x) {
    std::vector<long double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        long double below = 0, equal = 0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (x[j] < x[i]) ++below;
            if (j != i && x[j] == x[i]) ++equal;
        }
        r[i] = 1 + below + equal / 2;
    }
    return r;
}

long double textbook_pearson(const std::vector<long double>& a, const std::vector<long double>& b) {
    const long double n = static_cast<long double>(a.size());
    long double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
        sab += a[i] * b[i];
        saa += a[i] * a[i];
        sbb += b[i] * b[i];
    }
    return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

std::vector<long double> widen(const std::vector<double>& v) { return {v.begin(), v.end()}; }

Predictor first_coordinate(const svr::Matrix&, std::span<const double>, std::span<const std::string>, std::uint64_t) {
    return [](std::span<const double> v) { return v[0]; };
}

svr::SearchGrid small_grid() {
    svr::SearchGrid g;
    g.C = {4.0, 64.0};
    g.gamma = {1.0 / 32, 1.0 / 4};
    g.epsilon = {0.1, 1.0};
    return g;
}

Dataset synthetic(std::size_t n, std::uint64_t seed, bool shuffle_labels) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Dataset d;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row(5);
        for (double& v : row) v = z(rng);
        d.scores.push_back(50.0 + 10.0 * row[0] + 3.0 * row[1]);
        d.features.push_back(std::move(row));
        d.groups.push_back("img" + std::to_string(i));
    }
    if (shuffle_labels) std::shuffle(d.scores.begin(), d.scores.end(), rng);
    return d;
}

}  // namespace

TEST_CASE("srocc reference values") {
    const std::vector<double> a{1, 2, 3, 4, 5}, b{1, 3, 2, 5, 4}, neg{-1, -2, -3, -4, -5};
    CHECK(*srocc(a, a) == Catch::Approx(1.0).margin(1e-15));
    CHECK(*srocc(a, neg) == Catch::Approx(-1.0).margin(1e-15));
    CHECK(*srocc(a, b) == Catch::Approx(0.8).margin(1e-15));
    CHECK(average_ranks(std::vector<double>{3.0, 1.0, 3.0, 2.0}) == std::vector<double>{3.5, 1.0, 3.5, 2.0});
}

TEST_CASE("plcc reference values") {
    const std::vector<double> a{0, 1, 2}, b{0, 1, 4};
    CHECK(*plcc(a, b) == Catch::Approx(0.960769).margin(5e-7));
    // centred sums by hand: cross 4, squares 2 and 26/3
    CHECK(*plcc(a, b) == Catch::Approx(4.0 / std::sqrt(52.0 / 3.0)).margin(1e-15));
    const std::vector<double> x{0.3, -1.0, 2.5, 7.0}, y{2.9, -1.0, 9.5, 23.0}, neg{-0.3, 1.0, -2.5, -7.0};
    CHECK(*plcc(x, y) == Catch::Approx(1.0).margin(1e-15));
    CHECK(*plcc(x, neg) == Catch::Approx(-1.0).margin(1e-15));
}

TEST_CASE("correlations are undefined without variance and reject bad shapes") {
    const std::vector<double> flat{2, 2, 2, 2}, v{1, 2, 3, 4};
    CHECK_FALSE(srocc(flat, v).has_value());
    CHECK_FALSE(plcc(v, flat).has_value());
    CHECK_THROWS_AS(srocc(std::vector<double>{1, 2}, std::vector<double>{1, 2}), Error);
    CHECK_THROWS_AS(plcc(v, std::vector<double>{1, 2, 3}), Error);
}

TEST_CASE("srocc is invariant to strictly monotone transforms") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(30), b(30), ea, cb;
        for (auto& v : a) v = z(rng);
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = a[i] + z(rng);
        for (double v : a) ea.push_back(std::exp(v));
        for (double v : b) cb.push_back(v * v * v);
        const double base = *srocc(a, b);
        CHECK(*srocc(ea, b) == Catch::Approx(base).margin(1e-14));
        CHECK(*srocc(a, cb) == Catch::Approx(base).margin(1e-14));
        CHECK(*srocc(ea, cb) == Catch::Approx(base).margin(1e-14));
    }
}

TEST_CASE("correlations match brute force on random vectors") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> z;
    std::uniform_int_distribution<int> small(0, 6);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> a(20), b(20);
        // Every third trial draws from a small integer set so ties are common.
        const bool ties = trial % 3 == 0;
        for (auto& v : a) v = ties ? small(rng) : z(rng);
        for (auto& v : b) v = ties ? small(rng) : z(rng);
        const auto s = srocc(a, b), p = plcc(a, b);
        if (!s) continue;
        CHECK(std::abs(*s - static_cast<double>(textbook_pearson(counted_ranks(a), counted_ranks(b)))) < 1e-12);
        CHECK(std::abs(*p - static_cast<double>(textbook_pearson(widen(a), widen(b)))) < 1e-12);
    }
}

TEST_CASE("outlier ratio counts predictions beyond two deviations") {
    const std::vector<double> mos{10, 20, 30, 40};
    const std::vector<std::optional<double>> sd{1.0, 2.0, 0.5, 3.0};
    CHECK(outlier_ratio(mos, mos, sd) == 0.0);
    std::vector<double> far;
    for (double m : mos) far.push_back(m + 100.0 * 3.0);
    CHECK(outlier_ratio(far, mos, sd) == 1.0);
    // only the third lies outside: |31.5 - 30| > 1
    const std::vector<double> mixed{11.9, 16.5, 31.5, 46.0};
    CHECK(outlier_ratio(mixed, mos, sd) == 0.25);
    std::vector<std::optional<double>> missing = sd;
    missing[2].reset();
    try {
        outlier_ratio(mos, mos, missing);
        FAIL("expected NotAvailable");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NotAvailable);
    }
}

TEST_CASE("split plans keep content groups together") {
    std::vector<std::string> groups;
    for (int i = 0; i < 200; ++i) groups.push_back("scene" + std::to_string(i / 10));
    const auto plan = SplitPlan::make(groups, 50, 0.8, 7);
    REQUIRE(plan.splits.size() == 50);
    std::set<std::vector<std::size_t>> distinct;
    for (const auto& s : plan.splits) {
        CHECK(s.train.size() == 160);
        CHECK(s.test.size() == 40);
        std::vector<int> seen(200, 0);
        for (auto i : s.train) seen[i] += 1;
        for (auto i : s.test) seen[i] += 2;
        for (int v : seen) CHECK((v == 1 || v == 2));
        for (std::size_t i = 0; i < 200; ++i) CHECK(seen[i] == seen[(i / 10) * 10]);
        distinct.insert(s.test);
    }
    CHECK(distinct.size() > 40);
    const auto again = SplitPlan::make(groups, 50, 0.8, 7);
    for (std::size_t k = 0; k < 50; ++k) CHECK(again.splits[k].test == plan.splits[k].test);
    CHECK(SplitPlan::make(groups, 50, 0.8, 8).splits[0].test != plan.splits[0].test);
    CHECK_THROWS_AS(SplitPlan::make(std::vector<std::string>{"a", "a", "a"}, 5, 0.8, 0), Error);
}

TEST_CASE("experiment aggregates follow the per-iteration values") {
    Dataset d = synthetic(60, 3, false);
    d.score_std.assign(60, 5.0);
    const auto plan = SplitPlan::make(d.groups, 9, 0.8, 1);
    const auto rep = run_experiment(d, first_coordinate, plan);
    REQUIRE(rep.srocc.size() == 9);
    std::vector<double> sorted = rep.srocc;
    std::sort(sorted.begin(), sorted.end());
    CHECK(rep.median_srocc == sorted[4]);
    double mean = 0.0, var = 0.0;
    for (double v : rep.plcc) mean += v / 9.0;
    for (double v : rep.plcc) var += (v - mean) * (v - mean) / 8.0;
    CHECK(rep.std_plcc == Catch::Approx(std::sqrt(var)).epsilon(1e-12));
    REQUIRE(rep.mean_outlier_ratio);
    CHECK(*rep.mean_outlier_ratio >= 0.0);
    CHECK(*rep.mean_outlier_ratio <= 1.0);

    d.score_std[4].reset();
    const auto no_or = run_experiment(d, first_coordinate, plan);
    CHECK_FALSE(no_or.mean_outlier_ratio);
    const auto j = report_json(no_or);
    CHECK(j["mean_outlier_ratio"] == "-");
    CHECK(j["per_iteration"]["srocc"].size() == 9);
}

TEST_CASE("learnable labels are learned and shuffled labels are not") {
    const Trainer trainer = svr_trainer(small_grid());
    const Dataset good = synthetic(120, 5, false);
    const auto rep = run_experiment(good, trainer, SplitPlan::make(good.groups, 50, 0.8, 11), default_jobs());
    CHECK(rep.median_srocc > 0.95);

    const Dataset noise = synthetic(120, 5, true);
    const auto null_rep = run_experiment(noise, trainer, SplitPlan::make(noise.groups, 50, 0.8, 11), default_jobs());
    CHECK(std::abs(null_rep.median_srocc) < 0.2);
}

TEST_CASE("reports are byte-identical across runs and thread counts") {
    const Dataset d = synthetic(60, 9, false);
    const auto plan = SplitPlan::make(d.groups, 6, 0.8, 3);
    const Trainer trainer = svr_trainer(small_grid());
    const std::string one = report_text(run_experiment(d, trainer, plan, 1));
    CHECK(report_text(run_experiment(d, trainer, plan, 1)) == one);
    CHECK(report_text(run_experiment(d, trainer, plan, 3)) == one);
}

TEST_CASE("iteration failures name the iteration") {
    const Dataset d = synthetic(30, 1, false);
    const Trainer broken = [](const svr::Matrix&, std::span<const double>, std::span<const std::string>,
                              std::uint64_t) -> Predictor { throw Error(ErrorKind::DegenerateSample, "boom"); };
    CHECK_THROWS_WITH(run_experiment(d, broken, SplitPlan::make(d.groups, 1, 0.8, 0)),
                      Catch::Matchers::ContainsSubstring("iteration 0"));
}

TEST_CASE("significance decisions") {
    SECTION("critical value of the one-sided test with 49 degrees of freedom") {
        // d_i = m +/- 1 alternating over 50 values: sd = sqrt(50/49), t = m * sqrt(50) / sd.
        auto series_with_t = [](double t) {
            const double sd = std::sqrt(50.0 / 49.0), m = t * sd / std::sqrt(50.0);
            std::vector<double> row(50), col(50, 0.0);
            for (int i = 0; i < 50; ++i) row[i] = m + (i % 2 ? 1.0 : -1.0);
            return std::pair{row, col};
        };
        // Tabulated t(0.95, 49) = 1.6766
        auto [r1, c1] = series_with_t(1.680);
        CHECK(paired_ttest(r1, c1) == 1);
        auto [r2, c2] = series_with_t(1.673);
        CHECK(paired_ttest(r2, c2) == 0);
        CHECK(paired_ttest(c1, r1) == -1);
    }
    SECTION("constant offsets and identical series") {
        std::vector<double> base;
        std::mt19937_64 rng(1);
        std::normal_distribution<double> z(0.6, 0.05);
        for (int i = 0; i < 50; ++i) base.push_back(z(rng));
        std::vector<double> up;
        for (double v : base) up.push_back(v + 0.2);
        CHECK(paired_ttest(up, base) == 1);
        CHECK(paired_ttest(base, up) == -1);
        CHECK(paired_ttest(base, base) == 0);
    }
    SECTION("independent draws from one distribution are rarely decided") {
        // Each direction is a 5% test, so about 90% of pairs come out 0 and 5% on either side.
        int plus = 0, minus = 0;
        constexpr int kSeeds = 2000;
        for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
            std::mt19937_64 rng(1000 + seed);
            std::normal_distribution<double> z(0.6, 0.05);
            std::vector<double> a(50), b(50);
            for (auto& v : a) v = z(rng);
            for (auto& v : b) v = z(rng);
            const int d = paired_ttest(a, b);
            plus += d == 1;
            minus += d == -1;
        }
        CHECK(std::abs(plus / double(kSeeds) - 0.05) < 0.015);
        CHECK(std::abs(minus / double(kSeeds) - 0.05) < 0.015);
        CHECK((kSeeds - plus - minus) / double(kSeeds) > 0.87);
    }
}

TEST_CASE("significance matrix structure") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z(0.7, 0.03);
    std::vector<double> b(50), c(50), a(50);
    for (auto& v : b) v = z(rng);
    for (auto& v : c) v = z(rng);
    for (int i = 0; i < 50; ++i) a[i] = std::max(b[i], c[i]) + 0.05;
    const auto m = ttest_matrix({{"A", a}, {"B", b}, {"C", c}});
    REQUIRE(m.names == std::vector<std::string>{"A", "B", "C"});
    for (std::size_t r = 0; r < 3; ++r) {
        CHECK(m.entries[r][r] == 0);
        for (std::size_t k = 0; k < 3; ++k) CHECK(m.entries[r][k] == -m.entries[k][r]);
    }
    CHECK(m.entries[0][1] == 1);
    CHECK(m.entries[0][2] == 1);
    const std::string csv = to_csv(m);
    CHECK(csv.substr(0, csv.find('\n')) == "algorithm,A,B,C");
    CHECK(csv.find("A,0,1,1\n") != std::string::npos);
    CHECK_THROWS_AS(ttest_matrix({{"A", a}, {"B", std::vector<double>(49, 0.5)}}), Error);
}

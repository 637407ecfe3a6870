#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include "friquee/error.hpp"
#include "friquee/metrics.hpp"
#include "friquee/parallel.hpp"
#include "friquee/svr.hpp"

namespace friquee::eval {

struct Split {
    std::vector<std::size_t> train, test;
};

struct SplitPlan {
    std::size_t iterations = 50;
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    std::vector<Split> splits;

    /// Random content-grouped splits. Each iteration shuffles the distinct groups with its own
    /// generator and sends the first round(fraction * groups) of them to training.
    static SplitPlan make(std::span<const std::string> groups, std::size_t iterations = 50,
                          double train_fraction = 0.8, std::uint64_t seed = 0) {
        if (iterations == 0) throw Error(ErrorKind::InvalidArgument, "split plan needs at least one iteration");
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw Error(ErrorKind::InvalidArgument, "train fraction must lie strictly between 0 and 1");
        std::vector<std::string> names;
        std::vector<std::size_t> group_of(groups.size());
        for (std::size_t i = 0; i < groups.size(); ++i) {
            auto it = std::find(names.begin(), names.end(), groups[i]);
            group_of[i] = static_cast<std::size_t>(it - names.begin());
            if (it == names.end()) names.push_back(groups[i]);
        }
        const std::size_t g = names.size();
        const auto k = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(g)));
        if (k == 0 || k >= g)
            throw Error(ErrorKind::InvalidArgument,
                        std::to_string(g) + " content groups cannot be split at fraction " + std::to_string(train_fraction));

        SplitPlan plan{iterations, train_fraction, seed, {}};
        for (std::size_t it = 0; it < iterations; ++it) {
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(it)};
            std::mt19937_64 rng(seq);
            std::vector<std::size_t> order(g);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::shuffle(order.begin(), order.end(), rng);
            std::vector<char> in_train(g, 0);
            for (std::size_t j = 0; j < k; ++j) in_train[order[j]] = 1;
            Split s;
            for (std::size_t i = 0; i < groups.size(); ++i) (in_train[group_of[i]] ? s.train : s.test).push_back(i);
            plan.splits.push_back(std::move(s));
        }
        return plan;
    }
};

/// Seed handed to the trainer in one iteration; independent of scheduling.
inline std::uint64_t iteration_seed(std::uint64_t seed, std::size_t iteration) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(iteration), 0x5eedu};
    std::mt19937_64 rng(seq);
    return rng();
}

struct Dataset {
    svr::Matrix features;
    std::vector<double> scores;
    std::vector<std::optional<double>> score_std;  ///< may be empty when no row has one
    std::vector<std::string> groups;
    std::string layout_version;
};

using Predictor = std::function<double(std::span<const double>)>;
using Trainer = std::function<Predictor(const svr::Matrix& x, std::span<const double> y,
                                        std::span<const std::string> groups, std::uint64_t seed)>;

/// Grid-searched SVR; cross-validation folds respect the training split's content groups.
inline Trainer svr_trainer(svr::SearchGrid grid = svr::SearchGrid::standard(), std::string layout = "") {
    return [grid = std::move(grid), layout = std::move(layout)](const svr::Matrix& x, std::span<const double> y,
                                                                 std::span<const std::string> groups,
                                                                 std::uint64_t seed) -> Predictor {
        svr::TrainOptions opt;
        opt.grid = grid;
        opt.seed = seed;
        opt.groups.assign(groups.begin(), groups.end());
        auto model = std::make_shared<const svr::QualityModel>(svr::train(x, y, opt, layout));
        return [model](std::span<const double> v) { return svr::predict(*model, v); };
    };
}

struct ExperimentReport {
    std::size_t images = 0;
    SplitPlan plan;
    // Undefined correlations (constant predictions) are NaN and skipped by the aggregates.
    std::vector<double> srocc, plcc;
    std::optional<std::vector<double>> outlier_ratio;  ///< empty when any score std is missing
    double median_srocc = 0.0, std_srocc = 0.0, median_plcc = 0.0, std_plcc = 0.0;
    std::optional<double> mean_outlier_ratio;
};

inline double median(std::vector<double> v) {
    std::erase_if(v, [](double x) { return std::isnan(x); });
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Sample standard deviation (n - 1) of the defined values.
inline double stddev(std::vector<double> v) {
    std::erase_if(v, [](double x) { return std::isnan(x); });
    if (v.size() < 2) return 0.0;
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

/// Trains and tests once per split. Iterations run on up to `jobs` threads; results are stored
/// by iteration index so the report does not depend on scheduling.
inline ExperimentReport run_experiment(const Dataset& data, const Trainer& trainer, const SplitPlan& plan,
                                       unsigned jobs = 1) {
    const std::size_t n = data.scores.size();
    if (data.features.size() != n || data.groups.size() != n)
        throw Error(ErrorKind::InvalidArgument, "dataset columns differ in length");
    const bool have_std = data.score_std.size() == n &&
                          std::all_of(data.score_std.begin(), data.score_std.end(), [](const auto& s) { return s.has_value(); });
    ExperimentReport rep;
    rep.images = n;
    rep.plan = plan;
    const std::size_t iters = plan.splits.size();
    rep.srocc.assign(iters, 0.0);
    rep.plcc.assign(iters, 0.0);
    std::vector<double> ors(iters, 0.0);

    parallel_for(iters, jobs, [&](std::size_t it) {
        try {
            const Split& s = plan.splits[it];
            svr::Matrix x;
            std::vector<double> y;
            std::vector<std::string> g;
            for (std::size_t i : s.train) {
                x.push_back(data.features[i]);
                y.push_back(data.scores[i]);
                g.push_back(data.groups[i]);
            }
            const Predictor predict = trainer(x, y, g, iteration_seed(plan.seed, it));
            std::vector<double> pred, truth;
            std::vector<std::optional<double>> sd;
            for (std::size_t i : s.test) {
                pred.push_back(predict(data.features[i]));
                truth.push_back(data.scores[i]);
                if (have_std) sd.push_back(data.score_std[i]);
            }
            constexpr double nan = std::numeric_limits<double>::quiet_NaN();
            rep.srocc[it] = srocc(pred, truth).value_or(nan);
            rep.plcc[it] = plcc(pred, truth).value_or(nan);
            if (have_std) ors[it] = outlier_ratio(pred, truth, sd);
        } catch (const Error& e) {
            throw Error(e.kind(), "iteration " + std::to_string(it) + ": " + e.detail());
        } catch (const std::exception& e) {
            throw Error(ErrorKind::InvalidArgument, "iteration " + std::to_string(it) + ": " + e.what());
        }
    });

    rep.median_srocc = median(rep.srocc);
    rep.std_srocc = stddev(rep.srocc);
    rep.median_plcc = median(rep.plcc);
    rep.std_plcc = stddev(rep.plcc);
    if (have_std) {
        rep.mean_outlier_ratio = std::accumulate(ors.begin(), ors.end(), 0.0) / static_cast<double>(iters);
        rep.outlier_ratio = std::move(ors);
    }
    return rep;
}

inline constexpr std::string_view kReportFormat = "friquee-report-v1";

/// Report object with a fixed key order, so equal reports serialize to equal bytes.
inline nlohmann::ordered_json report_json(const ExperimentReport& r) {
    auto reals = [](const std::vector<double>& v) {
        nlohmann::ordered_json a = nlohmann::ordered_json::array();
        for (double x : v) a.push_back(std::isnan(x) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(x));
        return a;
    };
    auto real = [](double x) { return std::isnan(x) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(x); };
    nlohmann::ordered_json j;
    j["format"] = kReportFormat;
    j["images"] = r.images;
    j["iterations"] = r.plan.splits.size();
    j["train_fraction"] = r.plan.train_fraction;
    j["seed"] = r.plan.seed;
    j["median_srocc"] = real(r.median_srocc);
    j["std_srocc"] = real(r.std_srocc);
    j["median_plcc"] = real(r.median_plcc);
    j["std_plcc"] = real(r.std_plcc);
    j["mean_outlier_ratio"] =
        r.mean_outlier_ratio ? nlohmann::ordered_json(*r.mean_outlier_ratio) : nlohmann::ordered_json("-");
    nlohmann::ordered_json per;
    per["srocc"] = reals(r.srocc);
    per["plcc"] = reals(r.plcc);
    per["outlier_ratio"] = r.outlier_ratio ? reals(*r.outlier_ratio) : nlohmann::ordered_json("-");
    j["per_iteration"] = per;
    return j;
}

inline std::string report_text(const ExperimentReport& r) { return report_json(r).dump(2) + "\n"; }

struct SignificanceMatrix {
    std::vector<std::string> names;
    std::vector<std::vector<int>> entries;  ///< entries[r][c]: 1 row better, -1 row worse, 0 undecided
};

/// One-sided paired t decision between two per-iteration score series at the given confidence.
inline int paired_ttest(std::span<const double> row, std::span<const double> col, double confidence = 0.95) {
    if (row.size() != col.size()) throw Error(ErrorKind::InvalidArgument, "score series differ in length");
    if (row.size() < 2) throw Error(ErrorKind::InvalidArgument, "t-test needs at least two iterations");
    const double n = static_cast<double>(row.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) mean += row[i] - col[i];
    mean /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) ss += (row[i] - col[i] - mean) * (row[i] - col[i] - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    if (sd == 0.0) return mean > 0.0 ? 1 : (mean < 0.0 ? -1 : 0);
    const double t = mean / (sd / std::sqrt(n));
    const double critical = boost::math::quantile(boost::math::students_t(n - 1.0), confidence);
    return t > critical ? 1 : (t < -critical ? -1 : 0);
}

inline SignificanceMatrix ttest_matrix(const std::vector<std::pair<std::string, std::vector<double>>>& series,
                                       double confidence = 0.95) {
    SignificanceMatrix m;
    const std::size_t k = series.size();
    m.entries.assign(k, std::vector<int>(k, 0));
    for (const auto& s : series) {
        if (s.second.size() != series.front().second.size())
            throw Error(ErrorKind::InvalidArgument, "algorithm " + s.first + " has a different iteration count");
        m.names.push_back(s.first);
    }
    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t c = r + 1; c < k; ++c) {
            m.entries[r][c] = paired_ttest(series[r].second, series[c].second, confidence);
            m.entries[c][r] = -m.entries[r][c];
        }
    return m;
}

inline std::string to_csv(const SignificanceMatrix& m) {
    std::ostringstream out;
    out << "algorithm";
    for (const auto& n : m.names) out << ',' << n;
    out << '\n';
    for (std::size_t r = 0; r < m.names.size(); ++r) {
        out << m.names[r];
        for (int v : m.entries[r]) out << ',' << v;
        out << '\n';
    }
    return out.str();
}

}  // namespace friquee::eval

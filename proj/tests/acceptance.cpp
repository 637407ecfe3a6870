// Acceptance suite: one PASS/FAIL/SKIP line per criterion, nonzero exit if anything failed.
//
//   FRIQUEE_ACCEPTANCE_ONLY=1,4,7     run a subset
//   FRIQUEE_DATASET_MANIFEST=path     enables criterion 8 (MOS/DMOS manifest of a real database)
//   FRIQUEE_CACHE=path                feature cache for criteria 5, 6 and 8 (default: none)
//   FRIQUEE_JOBS=n                    worker threads (default: hardware concurrency)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "friquee/friquee.hpp"
#include "test_support.hpp"

using namespace friquee;
namespace ft = friquee::testing;

namespace {

struct Outcome {
    enum { Pass, Fail, Skip } status = Pass;
    std::string detail;
};

struct Check {
    Outcome out;
    void expect(bool ok, const std::string& what) {
        if (!ok && out.status != Outcome::Fail) {
            out.status = Outcome::Fail;
            out.detail = what;
        }
    }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

unsigned jobs() {
    if (const char* s = std::getenv("FRIQUEE_JOBS")) return static_cast<unsigned>(std::max(1, std::atoi(s)));
    return default_jobs();
}

// ---- 1

Outcome estimator_recovery() {
    Check c;
    std::string summary;
    for (double alpha : {0.5, 1.0, 2.0, 4.0}) {
        const auto fit = stats::fit_ggd(ft::ggd_draws(1'000'000, alpha, 1.0, 100 + static_cast<int>(alpha * 10)));
        const double rel = std::abs(fit.alpha - alpha) / alpha;
        c.expect(rel <= 0.03, fmt("alpha %g fitted as %g", alpha, fit.alpha));
        summary += fmt("a%g->%.3f ", alpha, fit.alpha);
    }
    // Asymmetric draws: GGD magnitudes scaled by beta_l or beta_r, sides picked in proportion to the betas.
    const double shape = 1.5, bl = 0.6, br = 1.8;
    const auto mags = ft::ggd_draws(1'000'000, shape, 1.0, 7);
    std::mt19937_64 rng(8);
    std::bernoulli_distribution left(bl / (bl + br));
    std::vector<double> x;
    x.reserve(mags.size());
    for (double v : mags) x.push_back(left(rng) ? -bl * std::abs(v) : br * std::abs(v));
    const auto fit = stats::fit_aggd(x);
    const double to_sigma = std::sqrt(std::tgamma(3.0 / shape) / std::tgamma(1.0 / shape));
    const double rl = std::abs(fit.sigma_l / (bl * to_sigma) - 1), rr = std::abs(fit.sigma_r / (br * to_sigma) - 1);
    c.expect(rl <= 0.03 && rr <= 0.03, fmt("aggd scale errors %.4f / %.4f", rl, rr));
    summary += fmt("sigma_l err %.4f, sigma_r err %.4f", rl, rr);
    if (c.out.status == Outcome::Pass) c.out.detail = summary;
    return c.out;
}

// ---- 2

double nlc_alpha(const RgbImage& img) {
    const auto n = maps::normalize(color::to_luma(img));
    return stats::fit_ggd(n.nlc.values()).alpha;
}

Outcome gaussianity_anchor() {
    Check c;
    const auto pristine = ft::pristine_fixtures();
    c.expect(pristine.size() >= 5, "fewer than five pristine fixtures");
    double lo = 1e9, hi = -1e9;
    for (const auto& fx : pristine) {
        const RgbImage img = io::decode_image(fx.path);
        const double a = nlc_alpha(img);
        const double noisy = nlc_alpha(data::add_white_noise(img, 30.0, 1));
        const double blurred = nlc_alpha(data::gaussian_blur(img, 3.0));
        const std::string name = fx.path.filename().string();
        c.expect(a >= 1.6 && a <= 2.6, name + fmt(": alpha %.3f outside [1.6, 2.6]", a));
        c.expect(noisy > a, name + fmt(": noise did not raise alpha (%.3f -> %.3f)", a, noisy));
        c.expect(blurred < a, name + fmt(": blur did not lower alpha (%.3f -> %.3f)", a, blurred));
        lo = std::min(lo, a);
        hi = std::max(hi, a);
    }
    if (c.out.status == Outcome::Pass)
        c.out.detail = std::to_string(pristine.size()) + fmt(" fixtures, alpha in [%.3f, %.3f]", lo, hi);
    return c.out;
}

// ---- 3

Outcome layout_contract() {
    Check c;
    const auto& blocks = features::layout().blocks;
    const std::vector<std::size_t> expected{155, 2, 163, 240, 4};
    c.expect(blocks.size() == expected.size(), "unexpected block count");
    std::size_t total = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (b < expected.size()) c.expect(blocks[b].size == expected[b], blocks[b].name + " has the wrong size");
        total += blocks[b].size;
    }
    c.expect(total == 564, "block sizes do not sum to 564");
    const auto all = ft::fixtures();
    for (const auto& fx : all) {
        const auto fv = features::extract_all(io::decode_image(fx.path));
        c.expect(fv.values.size() == 564, fx.path.filename().string() + ": wrong length");
        c.expect(std::all_of(fv.values.begin(), fv.values.end(), [](double v) { return std::isfinite(v); }),
                 fx.path.filename().string() + ": non-finite value");
    }
    if (c.out.status == Outcome::Pass) c.out.detail = std::to_string(all.size()) + " fixtures, 155/2/163/240/4";
    return c.out;
}

// ---- 4

std::vector<long double> ranks_by_counting(const std::vector<double>& x) {
    std::vector<long double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        long double below = 0, equal = 0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            below += x[j] < x[i];
            equal += j != i && x[j] == x[i];
        }
        r[i] = 1 + below + equal / 2;
    }
    return r;
}

long double pearson_ref(const std::vector<long double>& a, const std::vector<long double>& b) {
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

Outcome metric_oracles() {
    Check c;
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> z;
    std::uniform_int_distribution<int> small(0, 6);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> a(20), b(20), sd(20);
        const bool ties = t % 2 == 1;  // every other trial uses heavily tied integer data
        for (std::size_t i = 0; i < 20; ++i) {
            a[i] = ties ? small(rng) : z(rng);
            b[i] = ties ? small(rng) : 0.5 * a[i] + z(rng);
            sd[i] = 0.2 + std::abs(z(rng));
        }
        const auto s = eval::srocc(a, b), p = eval::plcc(a, b);
        if (!s || !p) {
            c.expect(false, "undefined correlation on a non-constant sample");
            continue;
        }
        const long double s_ref = pearson_ref(ranks_by_counting(a), ranks_by_counting(b));
        const long double p_ref = pearson_ref({a.begin(), a.end()}, {b.begin(), b.end()});
        worst = std::max({worst, static_cast<double>(std::abs(*s - s_ref)), static_cast<double>(std::abs(*p - p_ref))});

        std::size_t outside = 0;
        for (std::size_t i = 0; i < 20; ++i) outside += std::abs(a[i] - b[i]) > 2 * sd[i];
        std::vector<std::optional<double>> sdo(sd.begin(), sd.end());
        c.expect(eval::outlier_ratio(a, b, sdo) == static_cast<double>(outside) / 20.0,
                 "outlier ratio differs from the direct count");
    }
    c.expect(worst <= 1e-12, fmt("max deviation %.3g", worst));
    if (c.out.status == Outcome::Pass) c.out.detail = fmt("1000 trials, max deviation %.2g", worst);
    return c.out;
}

// ---- 5 and 6

std::filesystem::path corpus_dir() { return std::filesystem::temp_directory_path() / "friquee_acceptance"; }

// Five severities of each kind; the label only depends on the severity level.
std::vector<ft::Distortion> distortions() {
    const double noise[] = {4, 10, 18, 30, 45};
    const double blur[] = {0.7, 1.2, 2.0, 3.0, 4.5};
    std::vector<ft::Distortion> d;
    for (int k = 0; k < 5; ++k) {
        const double label = 90.0 - 15.0 * k;
        d.push_back({"noise", noise[k], label});
        d.push_back({"blur", blur[k], label});
    }
    return d;
}

std::optional<eval::Dataset> corpus_data;
eval::ExperimentReport corpus_report;

const eval::Dataset& corpus_dataset(double* extract_seconds) {
    if (!corpus_data) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto manifest = ft::build_corpus(corpus_dir(), ft::fixtures(), distortions(), 11);
        const auto rows = data::load_manifest(manifest);
        std::optional<data::FeatureCache> cache;
        if (const char* p = std::getenv("FRIQUEE_CACHE"); p && *p) cache.emplace(p);
        const auto ex = extract_rows(rows, cache ? &*cache : nullptr, jobs());
        if (!ex.failures.empty()) throw Error(ex.failures.front().kind, ex.failures.front().message);
        corpus_data = make_dataset(rows, ex);
        if (extract_seconds)
            *extract_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return *corpus_data;
}

Outcome learnability() {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    double extract_s = 0.0;
    const auto& d = corpus_dataset(&extract_s);
    c.expect(d.features.size() == 200, "corpus does not hold 200 images");
    c.expect(std::set<std::string>(d.groups.begin(), d.groups.end()).size() == 20, "corpus does not hold 20 groups");
    const auto plan = eval::SplitPlan::make(d.groups, 50, 0.8, 0);
    corpus_report = eval::run_experiment(d, eval::svr_trainer(svr::SearchGrid::standard(), d.layout_version), plan, jobs());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.expect(corpus_report.median_srocc >= 0.85, fmt("median SROCC %.4f below 0.85", corpus_report.median_srocc));
    c.expect(secs < 900.0, fmt("took %.0f s", secs));
    if (c.out.status == Outcome::Pass)
        c.out.detail = fmt("median SROCC %.4f (std %.4f), %.0f s total, %.0f s extraction",
                           corpus_report.median_srocc, corpus_report.std_srocc, secs, extract_s);
    return c.out;
}

Outcome determinism() {
    Check c;
    const auto& d = corpus_dataset(nullptr);
    // A reduced grid keeps the repeated runs short; the full protocol run above is compared too.
    svr::SearchGrid grid;
    grid.C = {4.0, 64.0};
    grid.gamma = {1.0 / 512, 1.0 / 64};
    grid.epsilon = {0.5};
    const auto plan = eval::SplitPlan::make(d.groups, 6, 0.8, 42);
    const auto trainer = eval::svr_trainer(grid, d.layout_version);
    const std::string a = eval::report_text(eval::run_experiment(d, trainer, plan, 1));
    const std::string b = eval::report_text(eval::run_experiment(d, trainer, plan, 1));
    const std::string e = eval::report_text(eval::run_experiment(d, trainer, plan, 4));
    c.expect(a == b, "two runs with one job differ");
    c.expect(a == e, "jobs=1 and jobs=4 differ");
    if (!corpus_report.srocc.empty()) {
        const auto again = eval::run_experiment(d, eval::svr_trainer(svr::SearchGrid::standard(), d.layout_version),
                                                eval::SplitPlan::make(d.groups, 50, 0.8, 0), jobs() == 1 ? 3 : 1);
        c.expect(eval::report_text(again) == eval::report_text(corpus_report),
                 "full protocol report changed with the job count");
    }
    if (c.out.status == Outcome::Pass)
        c.out.detail = corpus_report.srocc.empty() ? "reduced grid, 3 runs identical"
                                                   : "reduced grid and full protocol reports identical";
    return c.out;
}

// ---- 7

Outcome significance() {
    Check c;
    std::mt19937_64 rng(77);
    std::normal_distribution<double> z(0.0, 0.02);
    const std::size_t n = 50;
    std::vector<double> base(n);
    for (double& v : base) v = 0.8 + z(rng);
    std::vector<std::pair<std::string, std::vector<double>>> series;
    for (int m = 0; m < 3; ++m) {
        std::vector<double> s(n);
        for (std::size_t i = 0; i < n; ++i) s[i] = base[i] + z(rng);
        series.push_back({"other" + std::to_string(m), s});
    }
    std::vector<double> dom(n);
    for (std::size_t i = 0; i < n; ++i) dom[i] = series[0].second[i] + 0.05;
    series.insert(series.begin() + 1, {"dominant", dom});
    const auto m = eval::ttest_matrix(series);
    const std::size_t k = series.size();
    for (std::size_t i = 0; i < k; ++i) {
        c.expect(m.entries[i][i] == 0, "nonzero diagonal");
        for (std::size_t j = 0; j < k; ++j) c.expect(m.entries[i][j] == -m.entries[j][i], "matrix not antisymmetric");
    }
    for (std::size_t j = 0; j < k; ++j)
        if (j != 1) c.expect(m.entries[1][j] == 1, "dominant method not better than " + series[j].first);
    if (c.out.status == Outcome::Pass) c.out.detail = "dominant row all 1, diagonal 0, antisymmetric";
    return c.out;
}

// ---- 8

Outcome dataset_backed() {
    const char* manifest = std::getenv("FRIQUEE_DATASET_MANIFEST");
    if (!manifest || !*manifest) return {Outcome::Skip, "FRIQUEE_DATASET_MANIFEST not set"};
    Check c;
    const auto rows = data::load_manifest(manifest);
    std::optional<data::FeatureCache> cache;
    if (const char* p = std::getenv("FRIQUEE_CACHE"); p && *p) cache.emplace(p);
    const auto ex = extract_rows(rows, cache ? &*cache : nullptr, jobs());
    c.expect(ex.failures.empty(), std::to_string(ex.failures.size()) + " image(s) failed to extract");
    eval::Dataset d = make_dataset(rows, ex);
    const auto plan = eval::SplitPlan::make(d.groups, 50, 0.8, 0);
    const auto trainer = eval::svr_trainer(svr::SearchGrid::standard(), d.layout_version);
    const auto real = eval::run_experiment(d, trainer, plan, jobs());
    std::mt19937_64 rng(99);
    std::shuffle(d.scores.begin(), d.scores.end(), rng);
    const auto control = eval::run_experiment(d, trainer, plan, jobs());
    const double gap = real.median_srocc - control.median_srocc;
    c.expect(gap >= 0.3, fmt("median SROCC %.4f vs shuffled %.4f", real.median_srocc, control.median_srocc));
    if (c.out.status == Outcome::Pass)
        c.out.detail = fmt("median SROCC %.4f vs shuffled control %.4f", real.median_srocc, control.median_srocc);
    return c.out;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"estimator recovery", estimator_recovery},
        {"NLC Gaussianity anchor", gaussianity_anchor},
        {"feature layout contract", layout_contract},
        {"metric oracles", metric_oracles},
        {"end-to-end learnability", learnability},
        {"protocol determinism", determinism},
        {"significance matrix", significance},
        {"dataset-backed run", dataset_backed},
    };
    std::set<int> only;
    if (const char* s = std::getenv("FRIQUEE_ACCEPTANCE_ONLY")) {
        std::stringstream ss(s);
        for (std::string tok; std::getline(ss, tok, ',');)
            if (!tok.empty()) only.insert(std::stoi(tok));
    }
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {Outcome::Fail, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const char* tag = o.status == Outcome::Pass ? "PASS" : o.status == Outcome::Fail ? "FAIL" : "SKIP";
        failed += o.status == Outcome::Fail;
        std::printf("[%s] %d %s: %s (%.1f s)\n", tag, id, criteria[i].first, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}

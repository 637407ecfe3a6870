// friquee: batch feature extraction, training, prediction, evaluation and figure data.

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "friquee/friquee.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace friquee;

namespace {

// Exit status for each failure category; 1 is reserved for unexpected exceptions.
int exit_code(ErrorKind kind) { return 10 + static_cast<int>(kind); }

std::optional<fs::path> cache_path(const std::string& flag) {
    if (!flag.empty()) return fs::path(flag);
    if (const char* env = std::getenv("FRIQUEE_CACHE"); env && *env) return fs::path(env);
    return std::nullopt;
}

void write_text(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f || !(f << text)) throw Error(ErrorKind::IoError, "cannot write " + out);
}

ordered_json failure_json(const ExtractFailure& f) {
    ordered_json j;
    j["row"] = f.row;
    j["path"] = f.path.string();
    j["error"] = std::string(to_string(f.kind));
    j["message"] = f.message;
    return j;
}

struct Extracted {
    std::vector<data::ManifestRow> rows;
    ExtractResult result;
};

// Loads the manifest and extracts every row. Failures abort unless skip_bad is set.
Extracted extract_manifest(const std::string& manifest, const std::string& cache_flag, unsigned jobs,
                           bool skip_bad, bool quiet) {
    Extracted ex;
    ex.rows = data::load_manifest(manifest, !skip_bad);
    std::optional<data::FeatureCache> cache;
    if (auto p = cache_path(cache_flag)) cache.emplace(*p);
    Progress progress;
    if (!quiet)
        progress = [](std::size_t done, std::size_t total, const fs::path& p) {
            std::cerr << "[" << done << "/" << total << "] " << p.string() << '\n';
        };
    ex.result = extract_rows(ex.rows, cache ? &*cache : nullptr, jobs, progress);
    if (!ex.result.failures.empty() && !skip_bad) {
        const auto& f = ex.result.failures.front();
        throw Error(f.kind, std::to_string(ex.result.failures.size()) + " row(s) failed; first: " + f.path.string() +
                                ": " + f.message);
    }
    return ex;
}

std::vector<double> srocc_series(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    std::vector<double> out;
    // A report from `friquee evaluate`, or plain numbers separated by whitespace or commas.
    if (text.find('{') != std::string::npos) {
        const auto j = nlohmann::json::parse(text);
        for (const auto& v : j.at("per_iteration").at("srocc"))
            out.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
        return out;
    }
    std::string tok;
    for (char c : text + "\n") {
        if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
            if (!tok.empty()) {
                const auto v = data::detail::parse_real(tok);
                if (!v) throw Error(ErrorKind::InvalidArgument, "bad number '" + tok + "' in " + file.string());
                out.push_back(*v);
                tok.clear();
            }
        } else {
            tok += c;
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FRIQUEE no-reference image quality"};
    app.require_subcommand(1);

    // extract
    auto* extract = app.add_subcommand("extract", "Extract features for every manifest row into the cache");
    std::string ex_manifest, ex_cache;
    unsigned ex_jobs = default_jobs();
    bool ex_skip = false, ex_quiet = false;
    extract->add_option("--manifest", ex_manifest, "Manifest CSV")->required();
    extract->add_option("--cache", ex_cache, "Feature cache file (default: $FRIQUEE_CACHE)");
    extract->add_option("--jobs", ex_jobs, "Worker threads")->check(CLI::PositiveNumber);
    extract->add_flag("--skip-bad", ex_skip, "Report failing rows and continue");
    extract->add_flag("--quiet", ex_quiet, "No progress on standard error");

    // train
    auto* train = app.add_subcommand("train", "Fit the quality model on a manifest");
    std::string tr_manifest, tr_cache, tr_model;
    std::uint64_t tr_seed = 0;
    unsigned tr_jobs = default_jobs();
    bool tr_skip = false, tr_quiet = false;
    train->add_option("--manifest", tr_manifest, "Manifest CSV")->required();
    train->add_option("--cache", tr_cache, "Feature cache file (default: $FRIQUEE_CACHE)");
    train->add_option("--model-out", tr_model, "Model file to write")->required();
    train->add_option("--seed", tr_seed, "Cross-validation seed");
    train->add_option("--jobs", tr_jobs, "Worker threads")->check(CLI::PositiveNumber);
    std::optional<double> tr_c, tr_gamma, tr_eps;
    auto* c_opt = train->add_option("--C", tr_c, "Fixed penalty (skips the grid search)")->check(CLI::PositiveNumber);
    auto* g_opt = train->add_option("--gamma", tr_gamma, "Fixed kernel bandwidth")->check(CLI::PositiveNumber);
    auto* e_opt = train->add_option("--epsilon", tr_eps, "Fixed tube width")->check(CLI::NonNegativeNumber);
    c_opt->needs(g_opt, e_opt);
    g_opt->needs(c_opt, e_opt);
    e_opt->needs(c_opt, g_opt);
    train->add_flag("--skip-bad", tr_skip, "Drop rows that fail to extract");
    train->add_flag("--quiet", tr_quiet, "No progress on standard error");

    // predict
    auto* predict = app.add_subcommand("predict", "Score images with a trained model");
    std::string pr_model, pr_image, pr_manifest, pr_cache;
    unsigned pr_jobs = default_jobs();
    predict->add_option("--model", pr_model, "Model file")->required();
    auto* pr_image_opt = predict->add_option("--image", pr_image, "Single image");
    auto* pr_manifest_opt = predict->add_option("--manifest", pr_manifest, "Manifest CSV");
    pr_image_opt->excludes(pr_manifest_opt);
    predict->add_option("--cache", pr_cache, "Feature cache file (default: $FRIQUEE_CACHE)");
    predict->add_option("--jobs", pr_jobs, "Worker threads")->check(CLI::PositiveNumber);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Repeated train/test protocol with a JSON report");
    std::string ev_manifest, ev_cache, ev_report, ev_sig, ev_name = "FRIQUEE";
    std::size_t ev_iters = 50;
    double ev_frac = 0.8;
    std::uint64_t ev_seed = 0;
    unsigned ev_jobs = default_jobs();
    std::vector<std::string> ev_compare;
    bool ev_skip = false, ev_quiet = false;
    evaluate->add_option("--manifest", ev_manifest, "Manifest CSV");
    evaluate->add_option("--cache", ev_cache, "Feature cache file (default: $FRIQUEE_CACHE)");
    evaluate->add_option("--iterations", ev_iters, "Random splits")->check(CLI::PositiveNumber);
    evaluate->add_option("--train-frac", ev_frac, "Training fraction of content groups")->check(CLI::Range(0.0, 1.0));
    evaluate->add_option("--seed", ev_seed, "Split seed");
    evaluate->add_option("--jobs", ev_jobs, "Worker threads")->check(CLI::PositiveNumber);
    evaluate->add_option("--report-out", ev_report, "Report JSON path (default: standard output)");
    evaluate->add_option("--compare", ev_compare, "Per-iteration SROCC files of other algorithms");
    evaluate->add_option("--name", ev_name, "Row name of this run in the significance table");
    evaluate->add_option("--significance-out", ev_sig, "Significance matrix CSV path");
    evaluate->add_flag("--skip-bad", ev_skip, "Drop rows that fail to extract");
    evaluate->add_flag("--quiet", ev_quiet, "No progress on standard error");

    // hist
    auto* histogram = app.add_subcommand("hist", "Histogram and fitted density of one coefficient map");
    std::string hi_image, hi_map, hi_out;
    std::size_t hi_bins = 99;
    histogram->add_option("--image", hi_image, "Input image")->required();
    histogram->add_option("--map", hi_map, "nlc|dog_sigma|dog_sigma_prime|chroma|chroma_sigma|rg|by|yellow|yellow_sigma")
        ->required();
    histogram->add_option("--bins", hi_bins, "Bin count")->check(CLI::PositiveNumber);
    histogram->add_option("--out", hi_out, "CSV path (default: standard output)");

    // distort
    auto* distort = app.add_subcommand("distort", "Write a noisy or blurred copy of an image");
    std::string di_image, di_kind, di_out;
    double di_sigma = 0.0;
    std::uint64_t di_seed = 0;
    distort->add_option("--image", di_image, "Input image")->required();
    distort->add_option("--kind", di_kind, "noise|blur")->required()->check(CLI::IsMember({"noise", "blur"}));
    distort->add_option("--sigma", di_sigma, "Noise or blur standard deviation")->required()->check(CLI::NonNegativeNumber);
    distort->add_option("--seed", di_seed, "Noise seed");
    distort->add_option("--out", di_out, "Output PNG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    const CLI::App* active = app.get_subcommands().front();
    const std::string command = active->get_name();
    try {
        if (active == extract) {
            if (!cache_path(ex_cache)) throw Error(ErrorKind::InvalidArgument, "extract needs --cache or FRIQUEE_CACHE");
            const Extracted ex = extract_manifest(ex_manifest, ex_cache, ex_jobs, true, ex_quiet);
            ordered_json j;
            j["rows"] = ex.rows.size();
            j["extracted"] = ex.rows.size() - ex.result.failures.size();
            j["cache_hits"] = ex.result.cache_hits;
            j["computed"] = ex.result.computed;
            j["cache"] = cache_path(ex_cache)->string();
            j["failed"] = ordered_json::array();
            for (const auto& f : ex.result.failures) j["failed"].push_back(failure_json(f));
            j["skipped"] = ex_skip && !ex.result.failures.empty();
            std::cout << j.dump(2) << '\n';
            if (!ex.result.failures.empty() && !ex_skip) return exit_code(ex.result.failures.front().kind);
        } else if (active == train) {
            const Extracted ex = extract_manifest(tr_manifest, tr_cache, tr_jobs, tr_skip, tr_quiet);
            const eval::Dataset d = make_dataset(ex.rows, ex.result);
            svr::QualityModel model;
            if (tr_c) {
                model = svr::fit(d.features, d.scores, svr::Hyper{*tr_c, *tr_gamma, *tr_eps}, d.layout_version);
            } else {
                svr::TrainOptions opt;
                opt.seed = tr_seed;
                opt.jobs = tr_jobs;
                opt.groups = d.groups;
                model = svr::train(d.features, d.scores, opt, d.layout_version);
            }
            svr::save(model, tr_model);
            ordered_json j;
            j["model"] = tr_model;
            j["samples"] = d.scores.size();
            j["C"] = model.hyper.C;
            j["gamma"] = model.hyper.gamma;
            j["epsilon"] = model.hyper.epsilon;
            j["cv_srocc"] = std::isnan(model.cv_srocc) ? ordered_json(nullptr) : ordered_json(model.cv_srocc);
            j["support_vectors"] = model.support.size();
            std::cout << j.dump(2) << '\n';
        } else if (active == predict) {
            const auto model = svr::load(pr_model, std::string(features::kLayoutVersion));
            std::optional<data::FeatureCache> cache;
            if (auto p = cache_path(pr_cache)) cache.emplace(*p);
            auto* c = cache ? &*cache : nullptr;
            if (!pr_image.empty()) {
                const auto fv = extract_file(pr_image, c);
                ordered_json j;
                j["path"] = pr_image;
                j["score"] = svr::predict(model, fv);
                std::cout << j.dump(2) << '\n';
            } else if (!pr_manifest.empty()) {
                const auto rows = data::load_manifest(pr_manifest);
                const auto res = extract_rows(rows, c, pr_jobs);
                if (!res.failures.empty()) throw Error(res.failures.front().kind, res.failures.front().message);
                ordered_json arr = ordered_json::array();
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    ordered_json p;
                    p["path"] = rows[i].path.string();
                    p["score"] = svr::predict(model, *res.vectors[i]);
                    p["label"] = rows[i].score;
                    arr.push_back(p);
                }
                ordered_json j;
                j["model"] = pr_model;
                j["predictions"] = arr;
                std::cout << j.dump(2) << '\n';
            } else {
                throw Error(ErrorKind::InvalidArgument, "predict needs --image or --manifest");
            }
        } else if (active == evaluate) {
            std::vector<std::pair<std::string, std::vector<double>>> series;
            if (!ev_compare.empty() && ev_sig.empty())
                throw Error(ErrorKind::InvalidArgument, "--compare needs --significance-out");
            if (!ev_manifest.empty()) {
                const Extracted ex = extract_manifest(ev_manifest, ev_cache, ev_jobs, ev_skip, ev_quiet);
                const eval::Dataset d = make_dataset(ex.rows, ex.result);
                const auto plan = eval::SplitPlan::make(d.groups, ev_iters, ev_frac, ev_seed);
                const auto report =
                    eval::run_experiment(d, eval::svr_trainer(svr::SearchGrid::standard(), d.layout_version), plan, ev_jobs);
                write_text(ev_report, eval::report_text(report));
                series.emplace_back(ev_name, report.srocc);
            } else if (ev_compare.size() < 2) {
                throw Error(ErrorKind::InvalidArgument, "evaluate needs --manifest or at least two --compare files");
            }
            if (!ev_compare.empty()) {
                for (const auto& f : ev_compare) series.emplace_back(fs::path(f).stem().string(), srocc_series(f));
                write_text(ev_sig, eval::to_csv(eval::ttest_matrix(series)));
            }
        } else if (active == histogram) {
            const auto img = io::decode_image(hi_image);
            const auto h = hist::make_histogram(hist::sample_map(img, hi_map), hi_bins);
            write_text(hi_out, hist::to_csv(h, hi_map));
        } else if (active == distort) {
            const auto img = io::decode_image(di_image);
            const auto out = di_kind == "noise" ? data::add_white_noise(img, di_sigma, di_seed)
                                                : data::gaussian_blur(img, di_sigma);
            io::encode_png(di_out, out, 8);
        }
    } catch (const Error& e) {
        ordered_json j;
        j["error"] = std::string(to_string(e.kind()));
        j["command"] = command;
        j["message"] = e.detail();
        std::cerr << j.dump() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        ordered_json j;
        j["error"] = "Internal";
        j["command"] = command;
        j["message"] = e.what();
        std::cerr << j.dump() << '\n';
        return 1;
    }
    return 0;
}

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "friquee/error.hpp"
#include "friquee/features.hpp"
#include "friquee/metrics.hpp"
#include "friquee/parallel.hpp"

namespace friquee::svr {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

using Matrix = std::vector<std::vector<double>>;

struct Hyper {
    double C = 1.0;
    double gamma = 1.0;
    double epsilon = 0.1;
};

struct SearchGrid {
    std::vector<double> C, gamma, epsilon;

    /// C in 2^-1..2^10, gamma in 2^-10..2^3, epsilon in {0.1, 0.5, 1}.
    static SearchGrid standard() {
        SearchGrid g;
        for (int e = -1; e <= 10; ++e) g.C.push_back(std::ldexp(1.0, e));
        for (int e = -10; e <= 3; ++e) g.gamma.push_back(std::ldexp(1.0, e));
        g.epsilon = {0.1, 0.5, 1.0};
        return g;
    }

    /// Same grid for labels multiplied by `k`: C and epsilon scale with the loss.
    [[nodiscard]] SearchGrid scaled_for_labels(double k) const {
        SearchGrid g = *this;
        for (double& c : g.C) c *= k;
        for (double& e : g.epsilon) e *= k;
        return g;
    }

    [[nodiscard]] std::size_t size() const { return C.size() * gamma.size() * epsilon.size(); }
};

/// Per-dimension z-score. Zero-variance dimensions keep scale 1.
struct Standardizer {
    std::vector<double> mean, scale;

    static Standardizer fit(const Matrix& rows) {
        if (rows.empty()) throw Error(ErrorKind::InvalidArgument, "cannot standardize an empty set");
        const std::size_t d = rows.front().size();
        Standardizer s;
        s.mean.assign(d, 0.0);
        s.scale.assign(d, 0.0);
        const double n = static_cast<double>(rows.size());
        for (const auto& r : rows)
            for (std::size_t k = 0; k < d; ++k) s.mean[k] += r[k];
        for (double& m : s.mean) m /= n;
        for (const auto& r : rows)
            for (std::size_t k = 0; k < d; ++k) s.scale[k] += (r[k] - s.mean[k]) * (r[k] - s.mean[k]);
        for (double& v : s.scale) {
            v = std::sqrt(v / n);
            if (!(v > 1e-12)) v = 1.0;
        }
        return s;
    }

    [[nodiscard]] std::vector<double> apply(std::span<const double> x) const {
        std::vector<double> z(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) z[k] = (x[k] - mean[k]) / scale[k];
        return z;
    }

    [[nodiscard]] std::vector<double> invert(std::span<const double> z) const {
        std::vector<double> x(z.size());
        for (std::size_t k = 0; k < z.size(); ++k) x[k] = z[k] * scale[k] + mean[k];
        return x;
    }

    [[nodiscard]] Matrix apply(const Matrix& rows) const {
        Matrix out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(apply(r));
        return out;
    }
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return s;
}

/// Row-major |a| x |b| matrix of squared distances.
inline std::vector<double> distance_matrix(const Matrix& a, const Matrix& b) {
    std::vector<double> d(a.size() * b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) d[i * b.size() + j] = squared_distance(a[i], b[j]);
    return d;
}

inline std::vector<double> rbf_from_distances(std::span<const double> d2, double gamma) {
    std::vector<double> k(d2.size());
    for (std::size_t i = 0; i < d2.size(); ++i) k[i] = std::exp(-gamma * d2[i]);
    return k;
}

/// Dual solution of epsilon-SVR: f(x_i) = sum_j beta_j K_ij + bias.
struct DualSolution {
    std::vector<double> beta;
    double bias = 0.0;
    double gap = 0.0;  ///< maximal violating-pair gap at exit
    std::size_t iterations = 0;
};

/// SMO with second-order working-set selection on the 2l-variable dual
///   min 1/2 a'Qa + p'a,  y'a = 0,  0 <= a <= C,
/// where the first l variables push predictions up and the last l push them down.
/// `kernel` is the row-major l x l Gram matrix.
inline DualSolution solve_dual(std::span<const double> kernel, std::span<const double> y, const Hyper& h,
                               double tol = 1e-3, std::size_t max_iter = 10'000'000) {
    const std::size_t l = y.size(), n = 2 * l;
    if (kernel.size() != l * l) throw Error(ErrorKind::InvalidArgument, "kernel size does not match labels");
    constexpr double kTau = 1e-12;
    const double C = h.C;
    std::vector<double> alpha(n, 0.0), grad(n);
    std::vector<signed char> sign(n);
    for (std::size_t i = 0; i < l; ++i) {
        sign[i] = 1;
        sign[i + l] = -1;
        grad[i] = h.epsilon - y[i];
        grad[i + l] = h.epsilon + y[i];
    }
    auto K = [&](std::size_t i, std::size_t j) { return kernel[(i % l) * l + (j % l)]; };
    auto Q = [&](std::size_t i, std::size_t j) { return sign[i] * sign[j] * K(i, j); };
    auto upper = [&](std::size_t i) { return alpha[i] >= C; };
    auto lower = [&](std::size_t i) { return alpha[i] <= 0.0; };

    DualSolution out;
    for (;; ++out.iterations) {
        double gmax = -std::numeric_limits<double>::infinity(), gmax2 = gmax;
        std::size_t i = n, j = n;
        for (std::size_t t = 0; t < n; ++t) {
            if (sign[t] == 1 ? !upper(t) : !lower(t)) {
                const double v = -sign[t] * grad[t];
                if (v >= gmax) {
                    gmax = v;
                    i = t;
                }
            }
        }
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; i < n && t < n; ++t) {
            if (sign[t] == 1 ? lower(t) : upper(t)) continue;
            const double v = sign[t] * grad[t];
            gmax2 = std::max(gmax2, v);
            const double diff = gmax + v;
            if (diff > 0.0) {
                double quad = K(i, i) + K(t, t) - 2.0 * K(i, t);
                if (quad <= 0.0) quad = kTau;
                const double obj = -diff * diff / quad;
                if (obj <= best) {
                    best = obj;
                    j = t;
                }
            }
        }
        out.gap = gmax + gmax2;
        if (i == n || j == n || out.gap < tol || out.iterations >= max_iter) break;

        const double qij = Q(i, j), old_i = alpha[i], old_j = alpha[j];
        double ai = old_i, aj = old_j;
        if (sign[i] != sign[j]) {
            double quad = K(i, i) + K(j, j) + 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad[i] - grad[j]) / quad, diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0.0) {
                if (aj < 0.0) { aj = 0.0; ai = diff; }
            } else if (ai < 0.0) { ai = 0.0; aj = -diff; }
            if (diff > 0.0) {
                if (ai > C) { ai = C; aj = C - diff; }
            } else if (aj > C) { aj = C; ai = C + diff; }
        } else {
            double quad = K(i, i) + K(j, j) - 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad[i] - grad[j]) / quad, sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > C) {
                if (ai > C) { ai = C; aj = sum - C; }
            } else if (aj < 0.0) { aj = 0.0; ai = sum; }
            if (sum > C) {
                if (aj > C) { aj = C; ai = sum - C; }
            } else if (ai < 0.0) { ai = 0.0; aj = sum; }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        const double di = ai - old_i, dj = aj - old_j;
        for (std::size_t t = 0; t < n; ++t) grad[t] += Q(i, t) * di + Q(j, t) * dj;
    }

    // Bias from the free variables, or the midpoint of the feasible interval when none are free.
    double ub = std::numeric_limits<double>::infinity(), lb = -ub, free_sum = 0.0;
    std::size_t free_count = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = sign[t] * grad[t];
        if (upper(t)) {
            if (sign[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else if (lower(t)) {
            if (sign[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else {
            ++free_count;
            free_sum += yg;
        }
    }
    const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : 0.5 * (ub + lb);
    out.bias = -rho;
    out.beta.resize(l);
    for (std::size_t t = 0; t < l; ++t) out.beta[t] = alpha[t] - alpha[t + l];
    return out;
}

struct QualityModel {
    Hyper hyper;
    Standardizer standardizer;
    Matrix support;  ///< standardized support vectors
    std::vector<double> coef;
    double bias = 0.0;
    std::string layout_version;
    double cv_srocc = std::numeric_limits<double>::quiet_NaN();  ///< selection score, NaN if not searched

    [[nodiscard]] std::size_t dimension() const { return standardizer.mean.size(); }
};

inline double predict_standardized(const QualityModel& m, std::span<const double> z) {
    double f = m.bias;
    for (std::size_t s = 0; s < m.support.size(); ++s)
        f += m.coef[s] * std::exp(-m.hyper.gamma * squared_distance(m.support[s], z));
    return f;
}

inline double predict(const QualityModel& m, std::span<const double> x) {
    if (x.size() != m.dimension())
        throw Error(ErrorKind::LayoutMismatch, "feature vector has " + std::to_string(x.size()) +
                                                   " values, model expects " + std::to_string(m.dimension()));
    return predict_standardized(m, m.standardizer.apply(x));
}

inline double predict(const QualityModel& m, const features::FeatureVector& fv) {
    if (fv.layout_version != m.layout_version)
        throw Error(ErrorKind::VersionError,
                    "feature layout " + fv.layout_version + " does not match model layout " + m.layout_version);
    return predict(m, std::span<const double>(fv.values));
}

namespace detail {

inline void require_rows(const Matrix& rows, std::span<const double> y) {
    if (rows.size() != y.size()) throw Error(ErrorKind::InvalidArgument, "feature and score counts differ");
    if (rows.empty()) throw Error(ErrorKind::InvalidArgument, "no training samples");
    for (const auto& r : rows)
        if (r.size() != rows.front().size())
            throw Error(ErrorKind::LayoutMismatch, "training vectors differ in length");
    for (double v : y)
        if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "non-finite training score");
}

inline QualityModel assemble(const Standardizer& st, const Matrix& z, const DualSolution& sol, const Hyper& h,
                             std::string layout) {
    QualityModel m;
    m.hyper = h;
    m.standardizer = st;
    m.bias = sol.bias;
    m.layout_version = std::move(layout);
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (sol.beta[i] == 0.0) continue;
        m.support.push_back(z[i]);
        m.coef.push_back(sol.beta[i]);
    }
    return m;
}

}  // namespace detail

/// Standardize, then solve the dual at fixed hyperparameters.
inline QualityModel fit(const Matrix& rows, std::span<const double> y, const Hyper& h, std::string layout_version,
                        double tol = 1e-3) {
    detail::require_rows(rows, y);
    const Standardizer st = Standardizer::fit(rows);
    const Matrix z = st.apply(rows);
    const std::vector<double> kernel = rbf_from_distances(distance_matrix(z, z), h.gamma);
    return detail::assemble(st, z, solve_dual(kernel, y, h, tol), h, std::move(layout_version));
}

struct TrainOptions {
    SearchGrid grid = SearchGrid::standard();
    std::uint64_t seed = 0;
    std::size_t folds = 5;
    unsigned jobs = 1;
    double tol = 1e-3;
    /// Optional content-group id per sample; samples of one group share a fold.
    std::vector<std::string> groups;
};

inline constexpr std::size_t kMinTrainSamples = 20;

/// Fold index per sample. Groups are shuffled with the seed and dealt round-robin.
inline std::vector<std::size_t> assign_folds(std::size_t n, const TrainOptions& opt) {
    std::vector<std::size_t> group_of(n);
    std::size_t group_count = 0;
    if (opt.groups.empty()) {
        std::iota(group_of.begin(), group_of.end(), std::size_t{0});
        group_count = n;
    } else {
        if (opt.groups.size() != n) throw Error(ErrorKind::InvalidArgument, "group list does not match samples");
        std::vector<std::string> names;
        for (std::size_t i = 0; i < n; ++i) {
            auto it = std::find(names.begin(), names.end(), opt.groups[i]);
            group_of[i] = static_cast<std::size_t>(it - names.begin());
            if (it == names.end()) names.push_back(opt.groups[i]);
        }
        group_count = names.size();
    }
    if (group_count < opt.folds)
        throw Error(ErrorKind::InvalidArgument, "fewer independent samples (" + std::to_string(group_count) +
                                                    ") than folds (" + std::to_string(opt.folds) + ")");
    std::vector<std::size_t> order(group_count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(opt.seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> fold_of_group(group_count);
    for (std::size_t k = 0; k < group_count; ++k) fold_of_group[order[k]] = k % opt.folds;
    std::vector<std::size_t> fold(n);
    for (std::size_t i = 0; i < n; ++i) fold[i] = fold_of_group[group_of[i]];
    return fold;
}

/// Grid search by cross-validated SROCC of pooled out-of-fold predictions, then a final fit on
/// all samples. Ties prefer smaller C, then smaller gamma, then smaller epsilon.
inline QualityModel train(const Matrix& rows, std::span<const double> y, const TrainOptions& opt,
                          std::string layout_version) {
    detail::require_rows(rows, y);
    if (rows.size() < kMinTrainSamples)
        throw Error(ErrorKind::InvalidArgument, "training needs at least " + std::to_string(kMinTrainSamples) +
                                                    " samples, got " + std::to_string(rows.size()));
    if (opt.folds < 2) throw Error(ErrorKind::InvalidArgument, "cross-validation needs at least 2 folds");
    if (opt.grid.size() == 0) throw Error(ErrorKind::InvalidArgument, "empty search grid");
    const std::vector<std::size_t> fold = assign_folds(rows.size(), opt);

    struct Split {
        std::vector<std::size_t> train, test;
        std::vector<double> y_train, d_train, d_test;
    };
    std::vector<Split> splits(opt.folds);
    for (std::size_t f = 0; f < opt.folds; ++f) {
        Split& s = splits[f];
        Matrix tr, te;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (fold[i] == f) {
                s.test.push_back(i);
                te.push_back(rows[i]);
            } else {
                s.train.push_back(i);
                tr.push_back(rows[i]);
                s.y_train.push_back(y[i]);
            }
        }
        const Standardizer st = Standardizer::fit(tr);
        const Matrix ztr = st.apply(tr), zte = st.apply(te);
        s.d_train = distance_matrix(ztr, ztr);
        s.d_test = distance_matrix(zte, ztr);
    }

    // One task per gamma: kernels are shared by every (C, epsilon) pair at that gamma.
    const std::size_t nc = opt.grid.C.size(), ne = opt.grid.epsilon.size();
    std::vector<double> score(opt.grid.size(), -std::numeric_limits<double>::infinity());
    parallel_for(opt.grid.gamma.size(), opt.jobs, [&](std::size_t g) {
        const double gamma = opt.grid.gamma[g];
        std::vector<std::vector<double>> k_train(opt.folds), k_test(opt.folds);
        for (std::size_t f = 0; f < opt.folds; ++f) {
            k_train[f] = rbf_from_distances(splits[f].d_train, gamma);
            k_test[f] = rbf_from_distances(splits[f].d_test, gamma);
        }
        std::vector<double> pooled(rows.size());
        for (std::size_t c = 0; c < nc; ++c) {
            for (std::size_t e = 0; e < ne; ++e) {
                const Hyper h{opt.grid.C[c], gamma, opt.grid.epsilon[e]};
                for (std::size_t f = 0; f < opt.folds; ++f) {
                    const Split& s = splits[f];
                    const DualSolution sol = solve_dual(k_train[f], s.y_train, h, opt.tol);
                    const std::size_t m = s.train.size();
                    for (std::size_t t = 0; t < s.test.size(); ++t) {
                        double v = sol.bias;
                        for (std::size_t j = 0; j < m; ++j) v += sol.beta[j] * k_test[f][t * m + j];
                        pooled[s.test[t]] = v;
                    }
                }
                const auto r = eval::srocc(pooled, y);
                score[(c * opt.grid.gamma.size() + g) * ne + e] = r ? *r : -2.0;
            }
        }
    });

    std::size_t best = 0;
    for (std::size_t k = 1; k < score.size(); ++k)
        if (score[k] > score[best]) best = k;
    const std::size_t e = best % ne, g = (best / ne) % opt.grid.gamma.size(), c = best / ne / opt.grid.gamma.size();
    QualityModel m = fit(rows, y, Hyper{opt.grid.C[c], opt.grid.gamma[g], opt.grid.epsilon[e]},
                         std::move(layout_version), opt.tol);
    m.cv_srocc = score[best];
    return m;
}

/// Same as the matrix form; every vector must carry the same layout version.
inline QualityModel train(const std::vector<features::FeatureVector>& vectors, std::span<const double> y,
                          const TrainOptions& opt) {
    if (vectors.empty()) throw Error(ErrorKind::InvalidArgument, "no training samples");
    Matrix rows;
    rows.reserve(vectors.size());
    for (const auto& fv : vectors) {
        if (fv.layout_version != vectors.front().layout_version)
            throw Error(ErrorKind::LayoutMismatch, "training vectors mix layouts " + vectors.front().layout_version +
                                                       " and " + fv.layout_version);
        rows.push_back(fv.values);
    }
    return train(rows, y, opt, vectors.front().layout_version);
}

// Model file: "FRQE", u32 format, u32 length + layout, f64 C, gamma, epsilon, bias, cv_srocc,
// u64 dimension, dimension x f64 mean, dimension x f64 scale, u64 support count,
// count x f64 coefficient, count x dimension x f64 support vectors. All little-endian.
inline constexpr std::string_view kModelMagic = "FRQE";
inline constexpr std::uint32_t kModelFormat = 1;

namespace detail {

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void put_doubles(std::ostream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

template <class T>
T take(std::istream& in, const std::filesystem::path& path) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
        throw Error(ErrorKind::DecodeError, "truncated model file " + path.string());
    return v;
}

inline std::vector<double> take_doubles(std::istream& in, std::size_t n, const std::filesystem::path& path) {
    std::vector<double> v(n);
    if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double))))
        throw Error(ErrorKind::DecodeError, "truncated model file " + path.string());
    return v;
}

}  // namespace detail

inline void save(const QualityModel& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write model " + path.string());
    out.write(kModelMagic.data(), 4);
    detail::put(out, kModelFormat);
    detail::put(out, static_cast<std::uint32_t>(m.layout_version.size()));
    out.write(m.layout_version.data(), static_cast<std::streamsize>(m.layout_version.size()));
    for (double v : {m.hyper.C, m.hyper.gamma, m.hyper.epsilon, m.bias, m.cv_srocc}) detail::put(out, v);
    detail::put(out, static_cast<std::uint64_t>(m.dimension()));
    detail::put_doubles(out, m.standardizer.mean);
    detail::put_doubles(out, m.standardizer.scale);
    detail::put(out, static_cast<std::uint64_t>(m.support.size()));
    detail::put_doubles(out, m.coef);
    for (const auto& sv : m.support) detail::put_doubles(out, sv);
    if (!out.flush()) throw Error(ErrorKind::IoError, "write failed on model " + path.string());
}

/// Throws VersionError when the file's layout differs from `expected_layout` (if given).
inline QualityModel load(const std::filesystem::path& path, std::optional<std::string> expected_layout = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open model " + path.string());
    char magic[4] = {};
    if (!in.read(magic, 4) || std::string_view(magic, 4) != kModelMagic)
        throw Error(ErrorKind::DecodeError, path.string() + " is not a model file");
    if (const auto format = detail::take<std::uint32_t>(in, path); format != kModelFormat)
        throw Error(ErrorKind::VersionError, "unsupported model format " + std::to_string(format));
    QualityModel m;
    const auto len = detail::take<std::uint32_t>(in, path);
    if (len > 4096) throw Error(ErrorKind::DecodeError, "corrupt layout name in " + path.string());
    m.layout_version.resize(len);
    if (!in.read(m.layout_version.data(), len)) throw Error(ErrorKind::DecodeError, "truncated model file");
    if (expected_layout && *expected_layout != m.layout_version)
        throw Error(ErrorKind::VersionError,
                    "model layout " + m.layout_version + " does not match extractor layout " + *expected_layout);
    m.hyper.C = detail::take<double>(in, path);
    m.hyper.gamma = detail::take<double>(in, path);
    m.hyper.epsilon = detail::take<double>(in, path);
    m.bias = detail::take<double>(in, path);
    m.cv_srocc = detail::take<double>(in, path);
    const auto dim = detail::take<std::uint64_t>(in, path);
    if (dim > (1u << 20)) throw Error(ErrorKind::DecodeError, "corrupt dimension in " + path.string());
    m.standardizer.mean = detail::take_doubles(in, dim, path);
    m.standardizer.scale = detail::take_doubles(in, dim, path);
    const auto count = detail::take<std::uint64_t>(in, path);
    if (count > (1u << 24)) throw Error(ErrorKind::DecodeError, "corrupt support count in " + path.string());
    m.coef = detail::take_doubles(in, count, path);
    m.support.reserve(count);
    for (std::uint64_t s = 0; s < count; ++s) m.support.push_back(detail::take_doubles(in, dim, path));
    return m;
}

}  // namespace friquee::svr

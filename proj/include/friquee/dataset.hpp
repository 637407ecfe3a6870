#pragma once

// Dataset plumbing: pixel digests, manifest CSV loading, the append-only feature cache and
// the seeded distortion generators used to build synthetic corpora.

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <openssl/evp.h>

#include "friquee/color.hpp"
#include "friquee/error.hpp"
#include "friquee/feature_maps.hpp"
#include "friquee/features.hpp"

namespace friquee::data {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

/// SHA-256 over (height, width, R, G, B) with dimensions as u64 and samples as f64, hex encoded.
inline std::string digest(const RgbImage& img) {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw Error(ErrorKind::IoError, "cannot allocate digest context");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    const std::uint64_t dims[2] = {img.height(), img.width()};
    EVP_DigestUpdate(ctx, dims, sizeof dims);
    for (const Plane* p : {&img.r, &img.g, &img.b})
        EVP_DigestUpdate(ctx, p->values().data(), p->values().size() * sizeof(double));
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

// ---- manifest -----------------------------------------------------------------------------

enum class Polarity { Mos, Dmos };

struct ManifestRow {
    std::filesystem::path path;
    double score = 0.0;  ///< higher is better; DMOS rows are negated
    double raw_score = 0.0;  ///< as written in the file
    std::optional<double> score_std;
    std::string content_group;
    Polarity polarity = Polarity::Mos;
};

namespace detail {

/// Splits one CSV line; double quotes may enclose fields and "" escapes a quote.
inline std::vector<std::string> split_csv(std::string_view line) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                out.back() += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                out.back() += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.emplace_back();
        } else if (ch != '\r') {
            out.back() += ch;
        }
    }
    return out;
}

inline std::string trim(std::string s) {
    auto blank = [](unsigned char c) { return std::isspace(c) != 0; };
    s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), blank));
    s.erase(std::find_if_not(s.rbegin(), s.rend(), blank).base(), s.end());
    return s;
}

inline std::optional<double> parse_real(const std::string& s) {
    if (s.empty()) return std::nullopt;
    std::size_t used = 0;
    try {
        const double v = std::stod(s, &used);
        if (used != s.size()) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace detail

inline constexpr std::array<std::string_view, 5> kManifestColumns = {"path", "score", "score_std", "content_group",
                                                                     "polarity"};

/// Loads and validates a manifest. Every problem is collected before the load fails, so one
/// error lists all bad rows. Relative paths resolve against the manifest's directory.
inline std::vector<ManifestRow> load_manifest(const std::filesystem::path& path, bool check_files = true) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open manifest " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::ManifestError, path.string() + ": missing header");
    const auto header = detail::split_csv(line);
    std::array<std::size_t, 5> col{};
    for (std::size_t k = 0; k < kManifestColumns.size(); ++k) {
        auto it = std::find_if(header.begin(), header.end(),
                               [&](const std::string& h) { return detail::trim(h) == kManifestColumns[k]; });
        if (it == header.end())
            throw Error(ErrorKind::ManifestError,
                        path.string() + ": missing column '" + std::string(kManifestColumns[k]) + "'");
        col[k] = static_cast<std::size_t>(it - header.begin());
    }

    const std::filesystem::path base = path.parent_path();
    std::vector<ManifestRow> rows;
    std::vector<std::string> problems;
    std::map<std::filesystem::path, std::size_t> seen;
    std::set<Polarity> polarities;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv(line);
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (fields.size() != header.size()) {
            problems.push_back(where + "expected " + std::to_string(header.size()) + " fields, got " +
                               std::to_string(fields.size()));
            continue;
        }
        ManifestRow row;
        const std::string raw_path = detail::trim(fields[col[0]]);
        if (raw_path.empty()) {
            problems.push_back(where + "empty path");
            continue;
        }
        row.path = std::filesystem::path(raw_path).is_absolute() ? std::filesystem::path(raw_path) : base / raw_path;
        row.path = row.path.lexically_normal();

        const auto score = detail::parse_real(detail::trim(fields[col[1]]));
        if (!score || !std::isfinite(*score)) {
            problems.push_back(where + "score is not a finite number");
            continue;
        }
        row.raw_score = *score;

        const std::string std_text = detail::trim(fields[col[2]]);
        if (!std_text.empty()) {
            const auto sd = detail::parse_real(std_text);
            if (!sd || !std::isfinite(*sd) || *sd < 0.0) {
                problems.push_back(where + "score_std must be a finite non-negative number or blank");
                continue;
            }
            row.score_std = *sd;
        }

        row.content_group = detail::trim(fields[col[3]]);
        if (row.content_group.empty()) row.content_group = raw_path;

        std::string pol = detail::trim(fields[col[4]]);
        std::transform(pol.begin(), pol.end(), pol.begin(), [](unsigned char c) { return std::toupper(c); });
        if (pol == "MOS") {
            row.polarity = Polarity::Mos;
        } else if (pol == "DMOS") {
            row.polarity = Polarity::Dmos;
        } else {
            problems.push_back(where + "polarity must be MOS or DMOS");
            continue;
        }
        polarities.insert(row.polarity);
        row.score = row.polarity == Polarity::Dmos ? -row.raw_score : row.raw_score;

        if (check_files) {
            std::ifstream probe(row.path, std::ios::binary);
            if (!probe) {
                problems.push_back(where + "cannot read image " + row.path.string());
                continue;
            }
        }
        const auto key = std::filesystem::weakly_canonical(row.path);
        if (auto [it, fresh] = seen.emplace(key, line_no); !fresh)
            throw Error(ErrorKind::DuplicateRow, path.string() + ": " + where + row.path.string() +
                                                     " already listed on line " + std::to_string(it->second));
        rows.push_back(std::move(row));
    }
    if (polarities.size() > 1) problems.push_back("manifest mixes MOS and DMOS rows");
    if (!problems.empty()) {
        std::string msg = path.string() + ": " + std::to_string(problems.size()) + " problem(s)";
        for (const auto& p : problems) msg += "\n  " + p;
        throw Error(ErrorKind::ManifestError, msg);
    }
    return rows;
}

// ---- feature cache ------------------------------------------------------------------------

inline constexpr std::string_view kCacheMagic = "FQCH";
inline constexpr std::uint32_t kCacheFormat = 1;

/// Append-only binary feature cache keyed by pixel digest.
///
/// File: "FQCH", u32 format, then records of
///   u32 digest length, digest, u32 layout length, layout, u32 n, n x f64, u32 m, m x u64 slots.
/// Later records for the same digest supersede earlier ones. A record whose layout differs from
/// the running extractor is a miss. A damaged file is discarded and started afresh.
class FeatureCache {
public:
    using WarningSink = std::function<void(const std::string&)>;

    explicit FeatureCache(std::filesystem::path path, WarningSink warn = default_warning)
        : path_(std::move(path)), warn_(std::move(warn)) {
        load();
    }

    [[nodiscard]] std::optional<features::FeatureVector> get(const std::string& digest) const {
        std::shared_lock lock(mutex_);
        auto it = records_.find(digest);
        if (it == records_.end() || it->second.layout_version != features::kLayoutVersion) return std::nullopt;
        return it->second;
    }

    /// Appends a record unless an identical one is already present.
    void put(const std::string& digest, const features::FeatureVector& fv) {
        std::unique_lock lock(mutex_);
        if (auto it = records_.find(digest); it != records_.end() && it->second.layout_version == fv.layout_version &&
                                             it->second.values == fv.values)
            return;
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        if (!out) throw Error(ErrorKind::CacheError, "cannot append to cache " + path_.string());
        write_record(out, digest, fv);
        out.flush();
        if (!out) throw Error(ErrorKind::CacheError, "write failed on cache " + path_.string());
        records_[digest] = fv;
    }

    /// Number of distinct digests stored, regardless of layout.
    [[nodiscard]] std::size_t size() const {
        std::shared_lock lock(mutex_);
        return records_.size();
    }

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

    static void default_warning(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

private:
    template <class T>
    static void put_raw(std::ostream& out, const T& v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }

    template <class T>
    static bool get_raw(std::istream& in, T& v) {
        return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v));
    }

    static void write_string(std::ostream& out, std::string_view s) {
        put_raw(out, static_cast<std::uint32_t>(s.size()));
        out.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

    static bool read_string(std::istream& in, std::string& s, std::uint32_t limit) {
        std::uint32_t n = 0;
        if (!get_raw(in, n) || n > limit) return false;
        s.resize(n);
        return static_cast<bool>(in.read(s.data(), n));
    }

    static void write_record(std::ostream& out, const std::string& digest, const features::FeatureVector& fv) {
        write_string(out, digest);
        write_string(out, fv.layout_version);
        put_raw(out, static_cast<std::uint32_t>(fv.values.size()));
        out.write(reinterpret_cast<const char*>(fv.values.data()),
                  static_cast<std::streamsize>(fv.values.size() * sizeof(double)));
        put_raw(out, static_cast<std::uint32_t>(fv.degenerate_slots.size()));
        for (std::size_t s : fv.degenerate_slots) put_raw(out, static_cast<std::uint64_t>(s));
    }

    void start_fresh() {
        std::ofstream out(path_, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::CacheError, "cannot create cache " + path_.string());
        out.write(kCacheMagic.data(), static_cast<std::streamsize>(kCacheMagic.size()));
        put_raw(out, kCacheFormat);
        records_.clear();
    }

    void load() {
        std::ifstream in(path_, std::ios::binary);
        if (!in) {
            if (!path_.parent_path().empty()) std::filesystem::create_directories(path_.parent_path());
            start_fresh();
            return;
        }
        char magic[4] = {};
        std::uint32_t format = 0;
        if (!in.read(magic, 4) || std::string_view(magic, 4) != kCacheMagic || !get_raw(in, format) ||
            format != kCacheFormat) {
            warn_("cache " + path_.string() + " is not a valid feature cache; rebuilding");
            in.close();
            start_fresh();
            return;
        }
        constexpr std::uint32_t kLimit = 1u << 20;
        while (in.peek() != std::char_traits<char>::eof()) {
            std::string digest;
            features::FeatureVector fv;
            std::uint32_t n = 0, m = 0;
            bool ok = read_string(in, digest, kLimit) && read_string(in, fv.layout_version, kLimit) &&
                      get_raw(in, n) && n <= kLimit;
            if (ok) {
                fv.values.resize(n);
                ok = static_cast<bool>(in.read(reinterpret_cast<char*>(fv.values.data()),
                                               static_cast<std::streamsize>(n * sizeof(double)))) &&
                     get_raw(in, m) && m <= n;
            }
            for (std::uint32_t i = 0; ok && i < m; ++i) {
                std::uint64_t s = 0;
                ok = get_raw(in, s);
                fv.degenerate_slots.push_back(static_cast<std::size_t>(s));
            }
            if (!ok) {
                warn_("cache " + path_.string() + " is corrupt; rebuilding");
                in.close();
                start_fresh();
                return;
            }
            records_[digest] = std::move(fv);
        }
    }

    std::filesystem::path path_;
    WarningSink warn_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, features::FeatureVector> records_;
};

// ---- distortion generators ----------------------------------------------------------------

/// Adds N(0, sigma^2) to every sample of R, then G, then B, and clips to [0, 255].
inline RgbImage add_white_noise(const RgbImage& img, double sigma, std::uint64_t seed) {
    if (!(sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "noise sigma must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    RgbImage out = img;
    for (Plane* p : {&out.r, &out.g, &out.b})
        for (double& v : p->values()) v = std::clamp(v + noise(rng), 0.0, 255.0);
    return out;
}

inline int blur_radius(double sigma) { return std::max(1, static_cast<int>(std::ceil(4.0 * sigma))); }

/// Separable Gaussian blur, kernel truncated at 4 sigma and normalized, mirror borders.
inline RgbImage gaussian_blur(const RgbImage& img, double sigma) {
    if (!(sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "blur sigma must be positive");
    const auto kernel = maps::gaussian_kernel(blur_radius(sigma), sigma);
    return {maps::convolve_separable(img.r, kernel), maps::convolve_separable(img.g, kernel),
            maps::convolve_separable(img.b, kernel)};
}

}  // namespace friquee::data

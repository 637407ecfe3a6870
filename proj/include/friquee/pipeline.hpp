#pragma once

// Manifest-level extraction with the feature cache, and conversion to evaluation datasets.

#include <algorithm>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "friquee/dataset.hpp"
#include "friquee/error.hpp"
#include "friquee/evaluation.hpp"
#include "friquee/features.hpp"
#include "friquee/image_io.hpp"
#include "friquee/parallel.hpp"

namespace friquee {

struct ExtractFailure {
    std::size_t row = 0;
    std::filesystem::path path;
    ErrorKind kind = ErrorKind::IoError;
    std::string message;
};

struct ExtractResult {
    std::vector<std::optional<features::FeatureVector>> vectors;  ///< one per manifest row
    std::vector<ExtractFailure> failures;  ///< ordered by row
    std::size_t cache_hits = 0;
    std::size_t computed = 0;
};

/// Called after each row with (rows finished, total rows, row path). Serialized by the caller.
using Progress = std::function<void(std::size_t, std::size_t, const std::filesystem::path&)>;

/// Decodes one image and returns its features, consulting and filling `cache` when given.
inline features::FeatureVector extract_file(const std::filesystem::path& path, data::FeatureCache* cache) {
    const RgbImage img = io::decode_image(path);
    const std::string key = data::digest(img);
    if (cache)
        if (auto fv = cache->get(key)) return *fv;
    features::FeatureVector fv = features::extract_all(img);
    if (cache) cache->put(key, fv);
    return fv;
}

/// Extracts every row on up to `jobs` threads. Rows are processed in fixed-size batches and new
/// cache records are appended in row order after each batch, so the cache file does not depend
/// on the thread count.
inline ExtractResult extract_rows(const std::vector<data::ManifestRow>& rows, data::FeatureCache* cache,
                                  unsigned jobs, const Progress& progress = {}) {
    constexpr std::size_t kBatch = 32;
    ExtractResult out;
    out.vectors.resize(rows.size());
    std::vector<std::optional<ExtractFailure>> failed(rows.size());
    std::mutex progress_mutex;
    std::size_t done = 0;

    for (std::size_t first = 0; first < rows.size(); first += kBatch) {
        const std::size_t count = std::min(kBatch, rows.size() - first);
        std::vector<std::string> keys(count);
        std::vector<char> fresh(count, 0);
        parallel_for(count, jobs, [&](std::size_t k) {
            const std::size_t i = first + k;
            try {
                const RgbImage img = io::decode_image(rows[i].path);
                keys[k] = data::digest(img);
                std::optional<features::FeatureVector> fv = cache ? cache->get(keys[k]) : std::nullopt;
                if (!fv) {
                    fv = features::extract_all(img);
                    fresh[k] = 1;
                }
                out.vectors[i] = std::move(fv);
            } catch (const Error& e) {
                failed[i] = ExtractFailure{i, rows[i].path, e.kind(), e.detail()};
            } catch (const std::exception& e) {
                failed[i] = ExtractFailure{i, rows[i].path, ErrorKind::InvalidArgument, e.what()};
            }
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(++done, rows.size(), rows[i].path);
            }
        });
        for (std::size_t k = 0; k < count; ++k) {
            const std::size_t i = first + k;
            if (!out.vectors[i]) continue;
            if (fresh[k]) {
                ++out.computed;
                if (cache) cache->put(keys[k], *out.vectors[i]);
            } else {
                ++out.cache_hits;
            }
        }
    }
    for (auto& f : failed)
        if (f) out.failures.push_back(std::move(*f));
    return out;
}

/// Rows with features, in manifest order, as an evaluation dataset.
inline eval::Dataset make_dataset(const std::vector<data::ManifestRow>& rows, const ExtractResult& ex) {
    eval::Dataset d;
    d.layout_version = std::string(features::kLayoutVersion);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!ex.vectors[i]) continue;
        d.features.push_back(ex.vectors[i]->values);
        d.scores.push_back(rows[i].score);
        d.score_std.push_back(rows[i].score_std);
        d.groups.push_back(rows[i].content_group);
    }
    return d;
}

}  // namespace friquee

#pragma once

// Labelled (text, visual, label) triples with per-item split tags, plus the
// JSON and "EMAPDATA" binary file formats.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emap/error.hpp"
#include "emap/io.hpp"
#include "emap/numeric.hpp"

namespace emap {

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

inline Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw InputError("unknown split tag: " + s);
}

struct PairedDataset {
    std::size_t num_classes = 2;
    Matrix t;  // count x d1
    Matrix v;  // count x d2
    std::vector<int> labels;
    std::vector<Split> splits;
    io::json config = io::json::object();  // provenance (generator params, seed)

    // Pre-projection latent vectors, kept only in audit mode.
    std::optional<Matrix> latent_t;
    std::optional<Matrix> latent_v;

    std::size_t size() const { return labels.size(); }
    std::size_t d1() const { return static_cast<std::size_t>(t.cols()); }
    std::size_t d2() const { return static_cast<std::size_t>(v.cols()); }

    std::vector<std::size_t> indices(Split s) const {
        std::vector<std::size_t> out;
        for (std::size_t k = 0; k < splits.size(); ++k)
            if (splits[k] == s) out.push_back(k);
        return out;
    }

    /// Items at `idx`, in that order (latents are not carried over).
    PairedDataset subset(const std::vector<std::size_t>& idx) const {
        PairedDataset out;
        out.num_classes = num_classes;
        out.config = config;
        out.t.resize(static_cast<Eigen::Index>(idx.size()), t.cols());
        out.v.resize(static_cast<Eigen::Index>(idx.size()), v.cols());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            out.t.row(static_cast<Eigen::Index>(k)) = t.row(static_cast<Eigen::Index>(idx[k]));
            out.v.row(static_cast<Eigen::Index>(k)) = v.row(static_cast<Eigen::Index>(idx[k]));
            out.labels.push_back(labels[idx[k]]);
            out.splits.push_back(splits[idx[k]]);
        }
        return out;
    }

    PairedDataset split(Split s) const { return subset(indices(s)); }

    void validate() const {
        const auto n = static_cast<Eigen::Index>(labels.size());
        if (t.rows() != n || v.rows() != n || splits.size() != labels.size())
            throw InputError("dataset: feature rows, labels and split tags differ in count");
        if (num_classes < 1) throw InputError("dataset: num_classes must be >= 1");
        for (int y : labels)
            if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
                throw InputError("dataset: label " + std::to_string(y) + " outside [0, " +
                                 std::to_string(num_classes) + ")");
        if (!t.allFinite() || !v.allFinite()) throw InputError("dataset: non-finite features");
    }
};

inline constexpr std::string_view kDatasetMagic = "EMAPDATA";

namespace detail {
inline io::json rows_to_json(const Matrix& m) {
    io::json rows = io::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
    return rows;
}

inline Matrix rows_from_json(const io::json& j, std::size_t count, std::size_t cols, const char* what) {
    if (!j.is_array() || j.size() != count) throw InputError(std::string("dataset: ") + what + " must have count rows");
    Matrix m(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < count; ++i) {
        const auto& row = j[i];
        if (!row.is_array() || row.size() != cols) throw InputError(std::string("dataset: ragged ") + what + " row");
        for (std::size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c].get<double>();
    }
    return m;
}
}  // namespace detail

inline io::json dataset_to_json(const PairedDataset& ds) {
    io::json j = {{"format", "emap-dataset"}, {"version", 1},          {"d1", ds.d1()},
                  {"d2", ds.d2()},            {"num_classes", ds.num_classes}, {"count", ds.size()},
                  {"config", ds.config}};
    std::vector<std::string> tags;
    for (Split s : ds.splits) tags.emplace_back(split_name(s));
    j["splits"] = tags;
    j["labels"] = ds.labels;
    j["t"] = detail::rows_to_json(ds.t);
    j["v"] = detail::rows_to_json(ds.v);
    if (ds.latent_t && ds.latent_v) {
        j["latent_t"] = detail::rows_to_json(*ds.latent_t);
        j["latent_v"] = detail::rows_to_json(*ds.latent_v);
    }
    return j;
}

inline PairedDataset dataset_from_json(const io::json& j) {
    try {
        PairedDataset ds;
        const auto count = j.at("count").get<std::size_t>();
        const auto d1 = j.at("d1").get<std::size_t>();
        const auto d2 = j.at("d2").get<std::size_t>();
        ds.num_classes = j.at("num_classes").get<std::size_t>();
        if (j.contains("config")) ds.config = j.at("config");
        ds.labels = j.at("labels").get<std::vector<int>>();
        for (const auto& s : j.at("splits")) ds.splits.push_back(parse_split(s.get<std::string>()));
        if (ds.labels.size() != count || ds.splits.size() != count)
            throw InputError("dataset: labels/splits length differs from count");
        ds.t = detail::rows_from_json(j.at("t"), count, d1, "t");
        ds.v = detail::rows_from_json(j.at("v"), count, d2, "v");
        if (j.contains("latent_t") && j.contains("latent_v")) {
            const auto ld = j.at("latent_t").empty() ? 0 : j.at("latent_t")[0].size();
            ds.latent_t = detail::rows_from_json(j.at("latent_t"), count, ld, "latent_t");
            ds.latent_v = detail::rows_from_json(j.at("latent_v"), count, ld, "latent_v");
        }
        ds.validate();
        return ds;
    } catch (const io::json::exception& e) {
        throw InputError(std::string("dataset: ") + e.what());
    }
}

/// "EMAPDATA", u32 version, u64 d1, u64 d2, u64 num_classes, u64 count,
/// u64 config length + config JSON, t (count*d1 f64), v (count*d2 f64),
/// labels (count u32), splits (count u8), u64 latent dim (0 = none) + latents.
inline std::string dataset_to_binary(const PairedDataset& ds) {
    io::Writer w;
    w.magic(kDatasetMagic);
    w.u32(1);
    w.u64(ds.d1());
    w.u64(ds.d2());
    w.u64(ds.num_classes);
    w.u64(ds.size());
    const std::string cfg = ds.config.dump();
    w.u64(cfg.size());
    w.bytes(cfg);
    for (double x : ds.t.reshaped<Eigen::RowMajor>()) w.f64(x);
    for (double x : ds.v.reshaped<Eigen::RowMajor>()) w.f64(x);
    for (int y : ds.labels) w.u32(static_cast<std::uint32_t>(y));
    for (Split s : ds.splits) w.u8(static_cast<std::uint8_t>(s));
    const bool latents = ds.latent_t && ds.latent_v;
    w.u64(latents ? static_cast<std::uint64_t>(ds.latent_t->cols()) : 0);
    if (latents) {
        for (double x : ds.latent_t->reshaped<Eigen::RowMajor>()) w.f64(x);
        for (double x : ds.latent_v->reshaped<Eigen::RowMajor>()) w.f64(x);
    }
    return w.take();
}

inline PairedDataset dataset_from_binary(std::string_view bytes) {
    io::Reader r(bytes, "dataset");
    r.expect_magic(kDatasetMagic);
    if (r.u32() != 1) throw InputError("dataset: unsupported binary version");
    PairedDataset ds;
    const auto d1 = static_cast<Eigen::Index>(r.u64());
    const auto d2 = static_cast<Eigen::Index>(r.u64());
    ds.num_classes = r.u64();
    const auto count = static_cast<Eigen::Index>(r.u64());
    ds.config = io::parse_json(r.bytes(r.u64()), "dataset config");
    r.need(static_cast<std::size_t>(count * (d1 + d2)) * 8);
    ds.t.resize(count, d1);
    ds.v.resize(count, d2);
    for (auto& x : ds.t.reshaped<Eigen::RowMajor>()) x = r.f64();
    for (auto& x : ds.v.reshaped<Eigen::RowMajor>()) x = r.f64();
    for (Eigen::Index k = 0; k < count; ++k) ds.labels.push_back(static_cast<int>(r.u32()));
    for (Eigen::Index k = 0; k < count; ++k) {
        const auto s = r.u8();
        if (s > 2) throw InputError("dataset: bad split tag");
        ds.splits.push_back(static_cast<Split>(s));
    }
    const auto ld = static_cast<Eigen::Index>(r.u64());
    if (ld > 0) {
        ds.latent_t = Matrix(count, ld);
        ds.latent_v = Matrix(count, ld);
        r.need(static_cast<std::size_t>(2 * count * ld) * 8);
        for (auto& x : ds.latent_t->reshaped<Eigen::RowMajor>()) x = r.f64();
        for (auto& x : ds.latent_v->reshaped<Eigen::RowMajor>()) x = r.f64();
    }
    if (!r.at_end()) throw InputError("dataset: trailing bytes");
    ds.validate();
    return ds;
}

inline PairedDataset read_dataset(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    if (io::has_magic(bytes, kDatasetMagic)) return dataset_from_binary(bytes);
    return dataset_from_json(io::parse_json(bytes, path.string()));
}

inline void write_dataset(const std::filesystem::path& path, const PairedDataset& ds) {
    io::write_file(path, io::is_binary_path(path) ? dataset_to_binary(ds) : io::dump(dataset_to_json(ds)));
}

}  // namespace emap

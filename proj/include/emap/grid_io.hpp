#pragma once

// Grid and decomposition files.
//
// JSON grid:  {"n", "d", "values": [i][j][c], "text_ids", "visual_ids"}; a
//             rectangular grid adds "n_visual".
// Binary grid: "EMAPGRID", u32 version, then
//             v1: u64 n, u64 d, n*n*d float64 (row-major)
//             v2: u64 n_text, u64 n_visual, u64 d, n_text*n_visual*d float64
// Decompositions mirror this with "tau", "phi", "mu" and magic "EMAPDECO".
// All binary fields are little-endian.

#include <filesystem>
#include <string>

#include "emap/grid.hpp"
#include "emap/io.hpp"

namespace emap {

inline constexpr std::string_view kGridMagic = "EMAPGRID";
inline constexpr std::string_view kDecompositionMagic = "EMAPDECO";

inline io::json grid_to_json(const ScoreGrid& g) {
    io::json values = io::json::array();
    for (std::size_t i = 0; i < g.n_text; ++i) {
        io::json row = io::json::array();
        for (std::size_t j = 0; j < g.n_visual; ++j) {
            const auto cell = g.cell(i, j);
            row.push_back(io::json(std::vector<double>(cell.begin(), cell.end())));
        }
        values.push_back(std::move(row));
    }
    io::json j = {{"n", g.n_text}, {"d", g.d}};
    if (!g.square()) j["n_visual"] = g.n_visual;
    j["values"] = std::move(values);
    j["text_ids"] = g.text_ids;
    j["visual_ids"] = g.visual_ids;
    return j;
}

inline ScoreGrid grid_from_json(const io::json& j) {
    try {
        ScoreGrid g;
        g.n_text = j.at("n").get<std::size_t>();
        g.n_visual = j.contains("n_visual") ? j.at("n_visual").get<std::size_t>() : g.n_text;
        g.d = j.at("d").get<std::size_t>();
        const auto& values = j.at("values");
        if (!values.is_array() || values.size() != g.n_text) throw InputError("grid: values must have n rows");
        g.values.reserve(g.n_text * g.n_visual * g.d);
        for (const auto& row : values) {
            if (!row.is_array() || row.size() != g.n_visual) throw InputError("grid: ragged values row");
            for (const auto& cell : row) {
                // d == 1 grids may store scalars instead of 1-element arrays.
                if (cell.is_number() && g.d == 1) {
                    g.values.push_back(cell.get<double>());
                    continue;
                }
                if (!cell.is_array() || cell.size() != g.d) throw InputError("grid: cell does not have d entries");
                for (const auto& x : cell) g.values.push_back(x.get<double>());
            }
        }
        if (j.contains("text_ids")) g.text_ids = j.at("text_ids").get<std::vector<std::string>>();
        if (j.contains("visual_ids")) g.visual_ids = j.at("visual_ids").get<std::vector<std::string>>();
        g.validate();
        return g;
    } catch (const io::json::exception& e) {
        throw InputError(std::string("grid: ") + e.what());
    }
}

inline std::string grid_to_binary(const ScoreGrid& g) {
    io::Writer w;
    w.magic(kGridMagic);
    if (g.square()) {
        w.u32(1);
        w.u64(g.n_text);
    } else {
        w.u32(2);
        w.u64(g.n_text);
        w.u64(g.n_visual);
    }
    w.u64(g.d);
    for (double x : g.values) w.f64(x);
    return w.take();
}

inline ScoreGrid grid_from_binary(std::string_view bytes) {
    io::Reader r(bytes, "grid");
    r.expect_magic(kGridMagic);
    const auto version = r.u32();
    ScoreGrid g;
    if (version == 1) {
        g.n_text = g.n_visual = r.u64();
    } else if (version == 2) {
        g.n_text = r.u64();
        g.n_visual = r.u64();
    } else {
        throw InputError("grid: unsupported binary version " + std::to_string(version));
    }
    g.d = r.u64();
    const std::size_t count = g.n_text * g.n_visual * g.d;
    r.need(count * 8);
    g.values.resize(count);
    for (auto& x : g.values) x = r.f64();
    if (!r.at_end()) throw InputError("grid: trailing bytes after values");
    g.validate();
    return g;
}

inline ScoreGrid read_grid(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    if (io::has_magic(bytes, kGridMagic)) return grid_from_binary(bytes);
    return grid_from_json(io::parse_json(bytes, path.string()));
}

inline void write_grid(const std::filesystem::path& path, const ScoreGrid& g) {
    io::write_file(path, io::is_binary_path(path) ? grid_to_binary(g) : io::dump(grid_to_json(g)));
}

namespace detail {
inline io::json matrix_to_json(const Matrix& m) {
    io::json rows = io::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row(m.row(i).begin(), m.row(i).end());
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const io::json& j, Eigen::Index cols, const char* what) {
    if (!j.is_array()) throw InputError(std::string("expected array for ") + what);
    Matrix m(static_cast<Eigen::Index>(j.size()), cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw InputError(std::string("ragged rows in ") + what);
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}
}  // namespace detail

inline io::json decomposition_to_json(const AdditiveDecomposition& dec) {
    io::json j = {{"n", dec.n_text()}, {"d", dec.d()}};
    if (dec.n_text() != dec.n_visual()) j["n_visual"] = dec.n_visual();
    j["tau"] = detail::matrix_to_json(dec.tau);
    j["phi"] = detail::matrix_to_json(dec.phi);
    j["mu"] = std::vector<double>(dec.mu.begin(), dec.mu.end());
    return j;
}

inline AdditiveDecomposition decomposition_from_json(const io::json& j) {
    try {
        const auto d = j.at("d").get<Eigen::Index>();
        AdditiveDecomposition dec;
        dec.tau = detail::matrix_from_json(j.at("tau"), d, "tau");
        dec.phi = detail::matrix_from_json(j.at("phi"), d, "phi");
        const auto mu = j.at("mu").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(mu.size()) != d) throw InputError("mu must have d entries");
        dec.mu = Eigen::Map<const Vector>(mu.data(), d);
        const auto n = j.at("n").get<Eigen::Index>();
        const auto nv = j.contains("n_visual") ? j.at("n_visual").get<Eigen::Index>() : n;
        if (dec.tau.rows() != n || dec.phi.rows() != nv) throw InputError("decomposition: row counts differ from n");
        dec.validate();
        return dec;
    } catch (const io::json::exception& e) {
        throw InputError(std::string("decomposition: ") + e.what());
    }
}

inline std::string decomposition_to_binary(const AdditiveDecomposition& dec) {
    io::Writer w;
    w.magic(kDecompositionMagic);
    const bool sq = dec.n_text() == dec.n_visual();
    w.u32(sq ? 1 : 2);
    w.u64(dec.n_text());
    if (!sq) w.u64(dec.n_visual());
    w.u64(dec.d());
    for (double x : dec.tau.reshaped<Eigen::RowMajor>()) w.f64(x);
    for (double x : dec.phi.reshaped<Eigen::RowMajor>()) w.f64(x);
    for (double x : dec.mu) w.f64(x);
    return w.take();
}

inline AdditiveDecomposition decomposition_from_binary(std::string_view bytes) {
    io::Reader r(bytes, "decomposition");
    r.expect_magic(kDecompositionMagic);
    const auto version = r.u32();
    if (version != 1 && version != 2) throw InputError("decomposition: unsupported binary version");
    const auto nt = static_cast<Eigen::Index>(r.u64());
    const auto nv = version == 2 ? static_cast<Eigen::Index>(r.u64()) : nt;
    const auto d = static_cast<Eigen::Index>(r.u64());
    r.need(static_cast<std::size_t>((nt + nv + 1) * d) * 8);
    AdditiveDecomposition dec{Matrix(nt, d), Matrix(nv, d), Vector(d)};
    for (auto& x : dec.tau.reshaped<Eigen::RowMajor>()) x = r.f64();
    for (auto& x : dec.phi.reshaped<Eigen::RowMajor>()) x = r.f64();
    for (auto& x : dec.mu) x = r.f64();
    if (!r.at_end()) throw InputError("decomposition: trailing bytes");
    dec.validate();
    return dec;
}

inline AdditiveDecomposition read_decomposition(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    if (io::has_magic(bytes, kDecompositionMagic)) return decomposition_from_binary(bytes);
    return decomposition_from_json(io::parse_json(bytes, path.string()));
}

inline void write_decomposition(const std::filesystem::path& path, const AdditiveDecomposition& dec) {
    io::write_file(path, io::is_binary_path(path) ? decomposition_to_binary(dec)
                                                  : io::dump(decomposition_to_json(dec)));
}

}  // namespace emap

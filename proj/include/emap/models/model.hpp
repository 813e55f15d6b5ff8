#pragma once

// Model variant, dispatch helpers and the JSON model file:
//   {"kind": ..., "d1", "d2", "num_classes", "seed", "config": {...}, "params": {...}}

#include <filesystem>
#include <string>
#include <variant>

#include "emap/grid.hpp"
#include "emap/io.hpp"
#include "emap/models/adaboost.hpp"
#include "emap/models/feedforward.hpp"
#include "emap/models/linear.hpp"
#include "emap/models/poly2.hpp"

namespace emap::models {

using Model = std::variant<LinearModel, Poly2Model, FeedForwardModel, AdaBoostModel>;

inline std::string kind_name(const Model& m) {
    static const char* names[] = {"linear", "poly2", "feedforward", "adaboost"};
    return names[m.index()];
}

inline std::size_t text_dim(const Model& m) {
    return std::visit([](const auto& x) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, AdaBoostModel>) return x.d1;
        else return x.d1();
    }, m);
}

inline std::size_t visual_dim(const Model& m) {
    return std::visit([](const auto& x) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, AdaBoostModel>) return x.d2;
        else return x.d2();
    }, m);
}

inline std::size_t output_dim(const Model& m) {
    return std::visit([](const auto& x) { return x.num_classes(); }, m);
}

inline void check_dims(const Model& m, std::size_t d1, std::size_t d2) {
    if (d1 != text_dim(m) || d2 != visual_dim(m))
        throw InputError("feature dimensions (" + std::to_string(d1) + ", " + std::to_string(d2) +
                         ") do not match the model (" + std::to_string(text_dim(m)) + ", " +
                         std::to_string(visual_dim(m)) + ")");
}

/// Logits for one (t, v) pair.
inline std::vector<double> predict(const Model& m, std::span<const double> t, std::span<const double> v) {
    check_dims(m, t.size(), v.size());
    return std::visit([&](const auto& x) { return x.predict(t, v); }, m);
}

/// Logits for paired rows of t and v.
inline Matrix predict_paired(const Model& m, const Matrix& t, const Matrix& v) {
    check_dims(m, static_cast<std::size_t>(t.cols()), static_cast<std::size_t>(v.cols()));
    if (t.rows() != v.rows()) throw InputError("text and visual row counts differ");
    return std::visit([&](const auto& x) -> Matrix { return x.logits(t, v); }, m);
}

/// Scorer-compatible adapter (grid-core's build_grid).
inline auto scorer_for(const Model& m) {
    return [&m](std::span<const double> t, std::span<const double> v) { return predict(m, t, v); };
}

/// Score grid of texts x visuals using each model's batched row path.
inline ScoreGrid model_grid(const Model& m, const Matrix& texts, const Matrix& visuals, unsigned threads = 1) {
    check_dims(m, static_cast<std::size_t>(texts.cols()), static_cast<std::size_t>(visuals.cols()));
    const auto nt = static_cast<std::size_t>(texts.rows());
    const auto nv = static_cast<std::size_t>(visuals.rows());
    const std::size_t d = output_dim(m);
    if (const auto* ff = std::get_if<FeedForwardModel>(&m)) {
        const Matrix a = ff->project_text(texts);
        const Matrix b = ff->project_visual(visuals);
        return build_grid_rows(
            nt, nv, d,
            [&](std::size_t i, std::span<double> row) {
                ff->score_projected_row(a.row(static_cast<Eigen::Index>(i)), b, row);
            },
            threads);
    }
    return std::visit(
        [&](const auto& x) {
            if constexpr (!std::is_same_v<std::decay_t<decltype(x)>, FeedForwardModel>) {
                return build_grid_rows(
                    nt, nv, d,
                    [&](std::size_t i, std::span<double> row) {
                        const auto r = texts.row(static_cast<Eigen::Index>(i));
                        x.score_row(std::span<const double>(r.data(), static_cast<std::size_t>(r.size())), visuals,
                                    row);
                    },
                    threads);
            } else {
                return ScoreGrid{};
            }
        },
        m);
}

inline void validate(const Model& m) {
    std::visit([](const auto& x) { x.validate(); }, m);
}

// ---- serialization ---------------------------------------------------------

namespace detail {

inline io::json mat(const Matrix& m) {
    io::json rows = io::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
    return rows;
}

inline io::json vec(const Eigen::RowVectorXd& v) { return std::vector<double>(v.begin(), v.end()); }

inline Matrix mat_from(const io::json& j) {
    if (!j.is_array()) throw InputError("model: expected a nested array");
    if (j.empty()) return Matrix(0, 0);
    const auto cols = j[0].size();
    Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != cols) throw InputError("model: ragged matrix");
        for (std::size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
    }
    return m;
}

inline Eigen::RowVectorXd vec_from(const io::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline io::json layer(const DenseLayer& l) { return {{"w", mat(l.w)}, {"b", vec(l.b)}}; }
inline DenseLayer layer_from(const io::json& j) { return {mat_from(j.at("w")), vec_from(j.at("b"))}; }

inline io::json tree_json(const DecisionTree& t) {
    io::json nodes = io::json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.label});
    return nodes;
}

inline DecisionTree tree_from(const io::json& j) {
    DecisionTree t;
    for (const auto& n : j) {
        if (!n.is_array() || n.size() != 5) throw InputError("model: tree node must be [feature, threshold, left, right, label]");
        t.nodes.push_back({n[0].get<int>(), n[1].get<double>(), n[2].get<int>(), n[3].get<int>(), n[4].get<int>()});
    }
    return t;
}

}  // namespace detail

inline io::json config_json(const Model& m) {
    return std::visit(
        [](const auto& x) -> io::json {
            using T = std::decay_t<decltype(x)>;
            const auto& c = x.config;
            if constexpr (std::is_same_v<T, LinearModel>) {
                return {{"l2", c.l2}, {"lr", c.lr}, {"epochs", c.epochs}, {"seed", c.seed}};
            } else if constexpr (std::is_same_v<T, Poly2Model>) {
                return {{"l2", c.l2},         {"lr", c.lr},     {"momentum", c.momentum},
                        {"epochs", c.epochs}, {"seed", c.seed}, {"memory_budget_bytes", c.memory_budget_bytes}};
            } else if constexpr (std::is_same_v<T, FeedForwardModel>) {
                return {{"width", c.width},
                        {"hidden", c.hidden},
                        {"activation", activation_name(c.activation)},
                        {"lr", c.lr},
                        {"momentum", c.momentum},
                        {"epochs", c.epochs},
                        {"plateau_patience", c.plateau_patience},
                        {"l2", c.l2},
                        {"seed", c.seed}};
            } else {
                return {{"stages", c.stages},
                        {"max_depth", c.max_depth},
                        {"restriction", restriction_name(c.restriction)},
                        {"seed", c.seed}};
            }
        },
        m);
}

inline LinearConfig linear_config_from(const io::json& j) {
    LinearConfig c;
    c.l2 = j.value("l2", c.l2);
    c.lr = j.value("lr", c.lr);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    return c;
}

inline Poly2Config poly2_config_from(const io::json& j) {
    Poly2Config c;
    c.l2 = j.value("l2", c.l2);
    c.lr = j.value("lr", c.lr);
    c.momentum = j.value("momentum", c.momentum);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.memory_budget_bytes = j.value("memory_budget_bytes", c.memory_budget_bytes);
    return c;
}

inline FeedForwardConfig feedforward_config_from(const io::json& j) {
    FeedForwardConfig c;
    c.width = j.value("width", c.width);
    if (j.contains("hidden") && j["hidden"].is_number_unsigned()) c.hidden = {j["hidden"].get<std::size_t>()};
    else c.hidden = j.value("hidden", c.hidden);
    c.activation = parse_activation(j.value("activation", std::string(activation_name(c.activation))));
    c.lr = j.value("lr", c.lr);
    c.momentum = j.value("momentum", c.momentum);
    c.epochs = j.value("epochs", c.epochs);
    c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
    c.l2 = j.value("l2", c.l2);
    c.seed = j.value("seed", c.seed);
    return c;
}

inline AdaBoostConfig adaboost_config_from(const io::json& j) {
    AdaBoostConfig c;
    c.stages = j.value("stages", c.stages);
    c.max_depth = j.value("max_depth", c.max_depth);
    const auto r = j.value("restriction", std::string("full"));
    if (r == "full") c.restriction = BoostRestriction::full;
    else if (r == "unimodal") c.restriction = BoostRestriction::unimodal;
    else throw InputError("unknown adaboost restriction: " + r);
    c.seed = j.value("seed", c.seed);
    return c;
}

inline io::json model_to_json(const Model& m) {
    io::json j = {{"format", "emap-model"},
                  {"kind", kind_name(m)},
                  {"d1", text_dim(m)},
                  {"d2", visual_dim(m)},
                  {"num_classes", output_dim(m)},
                  {"config", config_json(m)}};
    j["seed"] = j["config"]["seed"];
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, LinearModel>) {
                j["params"] = {{"w_t", detail::mat(x.w_t)}, {"w_v", detail::mat(x.w_v)}, {"b", detail::vec(x.b)}};
            } else if constexpr (std::is_same_v<T, Poly2Model>) {
                j["params"] = {{"w_t", detail::mat(x.w_t)},
                               {"w_v", detail::mat(x.w_v)},
                               {"cross", detail::mat(x.cross)},
                               {"b", detail::vec(x.b)}};
            } else if constexpr (std::is_same_v<T, FeedForwardModel>) {
                io::json hidden = io::json::array();
                for (const auto& l : x.hidden) hidden.push_back(detail::layer(l));
                j["params"] = {{"proj_t", detail::layer(x.proj_t)},
                               {"proj_v", detail::layer(x.proj_v)},
                               {"hidden", hidden},
                               {"output", detail::layer(x.output)}};
            } else {
                io::json stages = io::json::array();
                for (const auto& s : x.stages)
                    stages.push_back(
                        {{"alpha", s.alpha}, {"modality", modality_name(s.modality)}, {"tree", detail::tree_json(s.tree)}});
                j["params"] = {{"stages", stages}, {"stop_reason", x.stop_reason}};
            }
        },
        m);
    return j;
}

inline Model model_from_json(const io::json& j) {
    try {
        const auto kind = j.at("kind").get<std::string>();
        const auto& p = j.at("params");
        const auto& cfg = j.contains("config") ? j.at("config") : io::json::object();
        Model out;
        if (kind == "linear") {
            LinearModel m{detail::mat_from(p.at("w_t")), detail::mat_from(p.at("w_v")), detail::vec_from(p.at("b")),
                          linear_config_from(cfg)};
            out = std::move(m);
        } else if (kind == "poly2") {
            Poly2Model m{detail::mat_from(p.at("w_t")), detail::mat_from(p.at("w_v")), detail::mat_from(p.at("cross")),
                         detail::vec_from(p.at("b")), poly2_config_from(cfg)};
            out = std::move(m);
        } else if (kind == "feedforward" || kind == "mlp") {
            FeedForwardModel m;
            m.proj_t = detail::layer_from(p.at("proj_t"));
            m.proj_v = detail::layer_from(p.at("proj_v"));
            for (const auto& l : p.at("hidden")) m.hidden.push_back(detail::layer_from(l));
            m.output = detail::layer_from(p.at("output"));
            m.config = feedforward_config_from(cfg);
            out = std::move(m);
        } else if (kind == "adaboost") {
            AdaBoostModel m;
            m.d1 = j.at("d1").get<std::size_t>();
            m.d2 = j.at("d2").get<std::size_t>();
            m.config = adaboost_config_from(cfg);
            m.stop_reason = p.value("stop_reason", std::string());
            for (const auto& s : p.at("stages")) {
                const auto mod = s.at("modality").get<std::string>();
                BoostStage st{detail::tree_from(s.at("tree")), s.at("alpha").get<double>(),
                              mod == "text" ? Modality::text : mod == "visual" ? Modality::visual : Modality::both};
                m.stages.push_back(std::move(st));
            }
            out = std::move(m);
        } else {
            throw InputError("unknown model kind: " + kind);
        }
        validate(out);
        return out;
    } catch (const io::json::exception& e) {
        throw InputError(std::string("model: ") + e.what());
    }
}

inline Model read_model(const std::filesystem::path& path) {
    return model_from_json(io::parse_json(io::read_file(path), path.string()));
}

inline void write_model(const std::filesystem::path& path, const Model& m) {
    io::write_file(path, io::dump(model_to_json(m)));
}

/// Canonical kind for a user-facing name ("mlp" is accepted for feedforward).
inline std::string canonical_kind(const std::string& kind) {
    if (kind == "mlp") return "feedforward";
    if (kind == "linear" || kind == "poly2" || kind == "feedforward" || kind == "adaboost") return kind;
    throw InputError("unknown model kind: " + kind + " (expected linear, poly2, mlp or adaboost)");
}

/// Trains a model of `kind` with settings from `cfg` (keys as in config_json;
/// unknown keys are rejected).
inline Model train_model(const std::string& kind, const PairedDataset& data, const io::json& settings) {
    const std::string k = canonical_kind(kind);
    const io::json cfg = settings.is_null() ? io::json::object() : settings;
    if (!cfg.is_object()) throw InputError("model config must be a JSON object");
    const Model blank = k == "linear" ? Model(LinearModel{})
                        : k == "poly2" ? Model(Poly2Model{})
                        : k == "feedforward" ? Model(FeedForwardModel{})
                                             : Model(AdaBoostModel{});
    const io::json known = config_json(blank);
    for (const auto& [key, value] : cfg.items())
        if (!known.contains(key)) throw InputError("unknown " + k + " config key: " + key);
    try {
        if (k == "linear") return train_linear(data, linear_config_from(cfg));
        if (k == "poly2") return train_poly2(data, poly2_config_from(cfg));
        if (k == "feedforward") return train_feedforward(data, feedforward_config_from(cfg));
        return train_adaboost(data, adaboost_config_from(cfg));
    } catch (const io::json::exception& e) {
        throw InputError(std::string("model config: ") + e.what());
    }
}

}  // namespace emap::models

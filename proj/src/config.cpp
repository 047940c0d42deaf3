#include "svlq/config.hpp"

#include <fstream>
#include <set>

#include "svlq/errors.hpp"

namespace svlq {

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + ": expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!ok.count(it.key())) throw ValidationError(where + ": unknown key '" + it.key() + "'");
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ValidationError(where + ": expected a number");
    return j.get<double>();
}

int integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) throw ValidationError(where + ": expected an integer");
    return j.get<int>();
}

TriangleKernel parse_kernel(const json& spec, const TimeGrid& grid, int rows, int cols,
                            const std::string& where) {
    if (!spec.is_object() || !spec.contains("family"))
        throw ValidationError(where + ": kernel needs a 'family'");
    const std::string fam = spec.at("family").get<std::string>();
    if (fam == "zero") {
        reject_unknown(spec, {"family"}, where);
        return TriangleKernel::zero(grid, rows, cols);
    }
    if (fam == "constant") {
        reject_unknown(spec, {"family", "c"}, where);
        return TriangleKernel::family(grid, matrix_from_json(spec.at("c"), rows, cols, where + ".c"),
                                      1.0);
    }
    if (fam == "fractional") {
        reject_unknown(spec, {"family", "c", "alpha"}, where);
        const double alpha = number(spec.at("alpha"), where + ".alpha");
        try {
            return TriangleKernel::family(
                grid, matrix_from_json(spec.at("c"), rows, cols, where + ".c"), alpha);
        } catch (const KernelNotSquareIntegrable& e) {
            throw KernelNotSquareIntegrable(where + ": " + e.what());
        }
    }
    if (fam == "table") {
        reject_unknown(spec, {"family", "table", "diagonal"}, where);
        const json& tab = spec.at("table");
        const int N = grid.steps();
        const std::size_t expect = static_cast<std::size_t>(N) * (N + 1) / 2;
        if (!tab.is_array() || tab.size() != expect)
            throw ValidationError(where + ".table: expected " + std::to_string(expect) +
                                  " entries ordered (i, j), i > j");
        std::size_t at = 0;
        TriangleKernel K = TriangleKernel::zero(grid, rows, cols);
        for (int i = 1; i <= N; ++i)
            for (int j = 0; j < i; ++j, ++at)
                K.mut(i, j) = matrix_from_json(tab[at], rows, cols, where + ".table");
        K.fill_diagonal();
        if (spec.contains("diagonal")) {
            const json& dg = spec.at("diagonal");
            if (!dg.is_array() || static_cast<int>(dg.size()) != N + 1)
                throw ValidationError(where + ".diagonal: expected N+1 entries");
            for (int k = 0; k <= N; ++k)
                K.mut(k, k) = matrix_from_json(dg[k], rows, cols, where + ".diagonal");
        }
        if (!K.all_finite()) throw ValidationError(where + ": non-finite sample");
        return K;
    }
    throw ValidationError(where + ": unknown kernel family '" + fam + "'");
}

MatrixField parse_field(const json& spec, const TimeGrid& grid, int rows, int cols,
                        const std::string& where) {
    if (!spec.is_object()) return MatrixField::constant(grid, matrix_from_json(spec, rows, cols, where));
    if (!spec.contains("family")) throw ValidationError(where + ": field needs a 'family'");
    const std::string fam = spec.at("family").get<std::string>();
    if (fam == "constant") {
        reject_unknown(spec, {"family", "value"}, where);
        return MatrixField::constant(grid, matrix_from_json(spec.at("value"), rows, cols, where));
    }
    if (fam == "polynomial") {
        reject_unknown(spec, {"family", "coefficients"}, where);
        std::vector<Mat> cs;
        for (const auto& c : spec.at("coefficients"))
            cs.push_back(matrix_from_json(c, rows, cols, where + ".coefficients"));
        return MatrixField::from_function(grid, rows, cols, [&](double t) {
            Mat acc = Mat::Zero(rows, cols);
            for (auto it = cs.rbegin(); it != cs.rend(); ++it) acc = (acc * t + *it).eval();
            return acc;
        });
    }
    if (fam == "table") {
        reject_unknown(spec, {"family", "table"}, where);
        const json& tab = spec.at("table");
        if (!tab.is_array() || static_cast<int>(tab.size()) != grid.steps() + 1)
            throw ValidationError(where + ".table: expected N+1 node samples");
        MatrixField f(grid, rows, cols);
        for (int k = 0; k <= grid.steps(); ++k)
            f(k) = matrix_from_json(tab[k], rows, cols, where + ".table");
        return f;
    }
    throw ValidationError(where + ": unknown field family '" + fam + "'");
}

json kernel_to_json(const TriangleKernel& K) {
    if (K.has_family()) {
        if (K.alpha() == 1.0) return {{"family", "constant"}, {"c", matrix_to_json(K.family_coef())}};
        return {{"family", "fractional"}, {"c", matrix_to_json(K.family_coef())}, {"alpha", K.alpha()}};
    }
    if (K.is_zero()) return {{"family", "zero"}};
    json tab = json::array(), dg = json::array();
    for (int i = 1; i <= K.steps(); ++i)
        for (int j = 0; j < i; ++j) tab.push_back(matrix_to_json(K(i, j)));
    for (int k = 0; k <= K.steps(); ++k) dg.push_back(matrix_to_json(K(k, k)));
    return {{"family", "table"}, {"table", tab}, {"diagonal", dg}};
}

json field_to_json(const MatrixField& f) {
    json tab = json::array();
    for (int k = 0; k <= f.steps(); ++k) tab.push_back(matrix_to_json(f(k)));
    return {{"family", "table"}, {"table", tab}};
}

bool contains_table(const json& j) {
    if (j.is_object()) {
        if (j.contains("family") && j["family"] == "table") return true;
        for (const auto& v : j) if (contains_table(v)) return true;
    } else if (j.is_array()) {
        for (const auto& v : j) if (contains_table(v)) return true;
    }
    return false;
}

}  // namespace

json matrix_to_json(const Mat& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

Mat matrix_from_json(const json& j, int rows, int cols, const std::string& where) {
    if (j.is_number()) {
        const double v = j.get<double>();
        if (rows == cols) return v * Mat::Identity(rows, cols);
        if (rows * cols == 1) return Mat::Constant(1, 1, v);
        throw ValidationError(where + ": scalar given for a " + std::to_string(rows) + "x" +
                              std::to_string(cols) + " entry");
    }
    if (!j.is_array() || j.empty()) throw ValidationError(where + ": expected a matrix");
    Mat m(rows, cols);
    if (j[0].is_number()) {
        if (static_cast<int>(j.size()) != rows * cols || (rows != 1 && cols != 1))
            throw ValidationError(where + ": vector length does not match " +
                                  std::to_string(rows) + "x" + std::to_string(cols));
        for (int i = 0; i < rows * cols; ++i) m(i / cols, i % cols) = number(j[i], where);
        return m;
    }
    if (static_cast<int>(j.size()) != rows)
        throw ValidationError(where + ": expected " + std::to_string(rows) + " rows");
    for (int r = 0; r < rows; ++r) {
        if (!j[r].is_array() || static_cast<int>(j[r].size()) != cols)
            throw ValidationError(where + ": expected " + std::to_string(cols) + " columns");
        for (int c = 0; c < cols; ++c) m(r, c) = number(j[r][c], where);
    }
    return m;
}

Problem build_problem(const json& cfg) {
    reject_unknown(cfg, {"dimensions", "horizon", "steps", "kernels", "weights", "inhomogeneous",
                         "input"},
                   "config");
    Problem p;
    const json& dims = cfg.at("dimensions");
    reject_unknown(dims, {"d", "l"}, "dimensions");
    p.d = integer(dims.at("d"), "dimensions.d");
    p.l = integer(dims.at("l"), "dimensions.l");
    if (p.d < 1 || p.l < 1) throw ValidationError("dimensions: d and l must be positive");
    try {
        p.grid = make_grid(number(cfg.at("horizon"), "horizon"), integer(cfg.at("steps"), "steps"));
    } catch (const std::invalid_argument& e) {
        throw ValidationError(std::string("grid: ") + e.what());
    }
    const TimeGrid& g = p.grid;
    const int d = p.d, l = p.l;

    const json empty = json::object();
    const json& kern = cfg.value("kernels", empty);
    reject_unknown(kern, {"A", "B", "C", "D"}, "kernels");
    auto kernel = [&](const json& sec, const char* key, int r, int c, const std::string& where) {
        return sec.contains(key) ? parse_kernel(sec.at(key), g, r, c, where)
                                 : TriangleKernel::zero(g, r, c);
    };
    p.A = kernel(kern, "A", d, d, "kernels.A");
    p.B = kernel(kern, "B", d, l, "kernels.B");
    p.C = kernel(kern, "C", d, d, "kernels.C");
    p.D = kernel(kern, "D", d, l, "kernels.D");

    const json& w = cfg.at("weights");
    reject_unknown(w, {"Q", "R", "S"}, "weights");
    auto field = [&](const json& sec, const char* key, int r, int c, const std::string& where) {
        return sec.contains(key) ? parse_field(sec.at(key), g, r, c, where)
                                 : MatrixField::zero(g, r, c);
    };
    if (!w.contains("R")) throw ValidationError("weights.R: required");
    p.Q = field(w, "Q", d, d, "weights.Q");
    p.R = field(w, "R", l, l, "weights.R");
    p.S = field(w, "S", l, d, "weights.S");
    for (int k = 0; k <= g.steps(); ++k) {
        if (p.Q(k) != p.Q(k).transpose()) throw ValidationError("weights.Q: not symmetric");
        if (p.R(k) != p.R(k).transpose()) throw ValidationError("weights.R: not symmetric");
    }

    const json& inh = cfg.value("inhomogeneous", empty);
    reject_unknown(inh, {"b", "sigma", "q", "rho"}, "inhomogeneous");
    p.b = kernel(inh, "b", d, 1, "inhomogeneous.b");
    p.sigma = kernel(inh, "sigma", d, 1, "inhomogeneous.sigma");
    p.q = field(inh, "q", d, 1, "inhomogeneous.q");
    p.rho = field(inh, "rho", l, 1, "inhomogeneous.rho");

    const json& in = cfg.value("input", empty);
    reject_unknown(in, {"t0_index", "x"}, "input");
    p.t0 = in.contains("t0_index") ? integer(in.at("t0_index"), "input.t0_index") : 0;
    p.x = field(in, "x", d, 1, "input.x");

    p.source = cfg.dump();
    validate_problem(p);
    return p;
}

Problem load_problem(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config file " + path.string());
    json cfg;
    try {
        cfg = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return build_problem(cfg);
}

json problem_to_json(const Problem& p) {
    return {
        {"dimensions", {{"d", p.d}, {"l", p.l}}},
        {"horizon", p.grid.horizon()},
        {"steps", p.grid.steps()},
        {"kernels",
         {{"A", kernel_to_json(p.A)}, {"B", kernel_to_json(p.B)}, {"C", kernel_to_json(p.C)},
          {"D", kernel_to_json(p.D)}}},
        {"weights", {{"Q", field_to_json(p.Q)}, {"R", field_to_json(p.R)}, {"S", field_to_json(p.S)}}},
        {"inhomogeneous",
         {{"b", kernel_to_json(p.b)}, {"sigma", kernel_to_json(p.sigma)}, {"q", field_to_json(p.q)},
          {"rho", field_to_json(p.rho)}}},
        {"input", {{"t0_index", p.t0}, {"x", field_to_json(p.x)}}},
    };
}

json refine_config(const json& config, int factor) {
    if (contains_table(config))
        throw ValidationError("refine: tabulated fields cannot be resampled on a finer grid");
    json out = config;
    out["steps"] = config.at("steps").get<int>() * factor;
    if (out.contains("input") && out["input"].contains("t0_index"))
        out["input"]["t0_index"] = out["input"]["t0_index"].get<int>() * factor;
    return out;
}

}  // namespace svlq

#include "svlq/artifacts.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace svlq {

namespace {

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

void row_major(std::ostringstream& os, const Mat& m) {
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) os << ',' << num(m(r, c));
}

std::string header(const std::string& lead, int rows, int cols) {
    std::string h = lead;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) h += ",m" + std::to_string(r) + "_" + std::to_string(c);
    return h + "\n";
}

std::vector<std::vector<double>> read_rows(const fs::path& path, std::size_t width) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::getline(in, line);  // header
    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                vals.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                         ": not a number: " + cell);
            }
        }
        if (vals.size() != width)
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                                     std::to_string(width) + " columns");
        rows.push_back(std::move(vals));
    }
    return rows;
}

Mat unpack(const std::vector<double>& row, std::size_t offset, int rows, int cols) {
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = row[offset + r * cols + c];
    return m;
}

}  // namespace

void write_atomic(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_field_csv(const fs::path& path, const MatrixField& f, const TimeGrid& grid) {
    std::ostringstream os;
    os << header("node,t", f.rows(), f.cols());
    for (int k = 0; k <= f.steps(); ++k) {
        os << k << ',' << num(grid.t(k));
        row_major(os, f(k));
        os << '\n';
    }
    write_atomic(path, os.str());
}

MatrixField read_field_csv(const fs::path& path, const TimeGrid& grid, int rows, int cols) {
    const auto data = read_rows(path, 2 + static_cast<std::size_t>(rows) * cols);
    if (static_cast<int>(data.size()) != grid.steps() + 1)
        throw std::runtime_error(path.string() + ": expected " +
                                 std::to_string(grid.steps() + 1) + " nodes");
    MatrixField f(grid, rows, cols);
    for (int k = 0; k <= grid.steps(); ++k) {
        if (static_cast<int>(data[k][0]) != k)
            throw std::runtime_error(path.string() + ": nodes out of order");
        f(k) = unpack(data[k], 2, rows, cols);
    }
    return f;
}

void write_triangle_csv(const fs::path& path, const TriangleKernel& K, const TimeGrid& grid) {
    std::ostringstream os;
    os << header("i,j,t_i,t_j,diagonal", K.rows(), K.cols());
    for (int i = 0; i <= K.steps(); ++i)
        for (int j = 0; j <= i; ++j) {
            os << i << ',' << j << ',' << num(grid.t(i)) << ',' << num(grid.t(j)) << ','
               << (i == j ? 1 : 0);
            row_major(os, K(i, j));
            os << '\n';
        }
    write_atomic(path, os.str());
}

TriangleKernel read_triangle_csv(const fs::path& path, const TimeGrid& grid, int rows, int cols) {
    const auto data = read_rows(path, 5 + static_cast<std::size_t>(rows) * cols);
    const int N = grid.steps();
    if (static_cast<int>(data.size()) != (N + 1) * (N + 2) / 2)
        throw std::runtime_error(path.string() + ": wrong number of triangle entries");
    TriangleKernel K = TriangleKernel::zero(grid, rows, cols);
    for (const auto& row : data) {
        const int i = static_cast<int>(row[0]), j = static_cast<int>(row[1]);
        if (i < 0 || i > N || j < 0 || j > i)
            throw std::runtime_error(path.string() + ": index out of range");
        K.mut(i, j) = unpack(row, 5, rows, cols);
    }
    return K;
}

void write_pyramid(const fs::path& bin, const fs::path& sidecar, const Pyramid& P2) {
    const int d = P2.dim(), N = P2.steps();
    std::string bytes;
    auto put = [&](double v) {
        std::uint64_t u;
        std::memcpy(&u, &v, sizeof u);
        if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
        char buf[8];
        std::memcpy(buf, &u, 8);
        bytes.append(buf, 8);
    };
    std::size_t blocks = 0;
    for (int i = 0; i <= N; ++i)
        for (int j = 0; j <= i; ++j)
            for (int k = 0; k <= j; ++k) {
                const MapC b = P2.block(i, j, k);
                for (int r = 0; r < d; ++r)
                    for (int c = 0; c < d; ++c) put(b(r, c));
                ++blocks;
            }
    write_atomic(bin, bytes);
    const json meta{{"dtype", "float64"},
                    {"endianness", "little"},
                    {"d", d},
                    {"steps", N},
                    {"blocks", blocks},
                    {"ordering", "for i in 0..N, j in 0..i, k in 0..j: block P2(t_i, t_j, t_k)"},
                    {"block_layout", "row-major d x d"},
                    {"symmetry", "P2(t_j, t_i, t_k) is the transpose of P2(t_i, t_j, t_k)"}};
    write_atomic(sidecar, meta.dump(2) + "\n");
}

Pyramid read_pyramid(const fs::path& bin, int d, int N) {
    std::ifstream in(bin, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + bin.string());
    Pyramid P2(d, N);
    Mat b(d, d);
    for (int i = 0; i <= N; ++i)
        for (int j = 0; j <= i; ++j)
            for (int k = 0; k <= j; ++k) {
                for (int r = 0; r < d; ++r)
                    for (int c = 0; c < d; ++c) {
                        std::uint64_t u;
                        char buf[8];
                        if (!in.read(buf, 8)) throw std::runtime_error(bin.string() + ": truncated");
                        std::memcpy(&u, buf, 8);
                        if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
                        double v;
                        std::memcpy(&v, &u, sizeof v);
                        b(r, c) = v;
                    }
                P2.set(i, j, k, b);
            }
    return P2;
}

void write_solution(const fs::path& dir, const Problem& p, const RiccatiSolution& sol,
                    const Feedforward& ff) {
    fs::create_directories(dir);
    write_field_csv(dir / "P1.csv", sol.P.P1, p.grid);
    write_pyramid(dir / "P2.bin", dir / "P2.json", sol.P.P2);
    write_field_csv(dir / "Xi.csv", sol.Xi_check, p.grid);
    write_triangle_csv(dir / "Gamma.csv", sol.Gamma_check, p.grid);
    write_triangle_csv(dir / "eta.csv", ff.eta.eta, p.grid);
    write_field_csv(dir / "kappa.csv", ff.kappa, p.grid);
    write_field_csv(dir / "v_hat.csv", ff.v_hat, p.grid);
}

Strategy read_strategy(const fs::path& dir, const Problem& p) {
    return {read_field_csv(dir / "Xi.csv", p.grid, p.l, p.d),
            read_triangle_csv(dir / "Gamma.csv", p.grid, p.l, p.d),
            read_field_csv(dir / "v_hat.csv", p.grid, p.l, 1)};
}

json batch_summary(const SimBatch& batch, const CostEstimate& est) {
    return {{"n_paths", batch.n_paths},
            {"seed", batch.seed},
            {"mean", est.mean},
            {"stderr", est.stderr_},
            {"flagged_paths", batch.flagged_count}};
}

std::string tool_version() { return "0.1.0"; }

json RunManifest::to_json() const {
    return {{"command", command},       {"config", config_path}, {"out_dir", out_dir},
            {"version", version},       {"parameters", parameters},
            {"timings_seconds", timings}, {"exit_code", exit_code}, {"message", message}};
}

void RunManifest::write(const fs::path& dir) const {
    write_atomic(dir / "manifest.json", to_json().dump(2) + "\n");
}

}  // namespace svlq

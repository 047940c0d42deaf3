#pragma once

#include <chrono>
#include <filesystem>
#include <string>

#include "svlq/config.hpp"
#include "svlq/ebsvie.hpp"
#include "svlq/fields.hpp"
#include "svlq/riccati.hpp"
#include "svlq/simulate.hpp"

namespace svlq {

namespace fs = std::filesystem;

// Writes to a sibling temporary file, then renames over the target.
void write_atomic(const fs::path& path, const std::string& contents);

// node, t, then the matrix entries in row-major order.
void write_field_csv(const fs::path& path, const MatrixField& f, const TimeGrid& grid);
MatrixField read_field_csv(const fs::path& path, const TimeGrid& grid, int rows, int cols);

// i, j, t_i, t_j, diagonal flag, then the entries in row-major order.
void write_triangle_csv(const fs::path& path, const TriangleKernel& K, const TimeGrid& grid);
TriangleKernel read_triangle_csv(const fs::path& path, const TimeGrid& grid, int rows, int cols);

/// P² as little-endian doubles over i >= j >= k (k fastest within (i, j)),
/// each block a row-major d x d matrix, plus a JSON sidecar describing it.
void write_pyramid(const fs::path& bin, const fs::path& sidecar, const Pyramid& P2);
Pyramid read_pyramid(const fs::path& bin, int d, int N);

void write_solution(const fs::path& dir, const Problem& p, const RiccatiSolution& sol,
                    const Feedforward& ff);
Strategy read_strategy(const fs::path& dir, const Problem& p);

json batch_summary(const SimBatch& batch, const CostEstimate& est);

struct RunManifest {
    std::string command;
    std::string config_path;
    std::string out_dir;
    std::string version;
    json parameters = json::object();
    json timings = json::object();
    int exit_code = 0;
    std::string message;

    json to_json() const;
    void write(const fs::path& dir) const;
};

std::string tool_version();

}  // namespace svlq

#include <gtest/gtest.h>

#include "support.hpp"
#include "svlq/errors.hpp"

using namespace svlq;
using namespace svlq::testing;

namespace {

std::string error_of(const json& cfg) {
    try {
        build_problem(cfg);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(BuildProblem, ScalarSmokeCase) {
    const Problem p = scalar_problem(64, 0, 0, 0, 0, 1, 1);
    EXPECT_EQ(p.d, 1);
    EXPECT_EQ(p.grid.steps(), 64);
    EXPECT_TRUE(p.A.is_zero());
    EXPECT_TRUE(p.homogeneous());
    EXPECT_EQ(p.R(10)(0, 0), 1.0);
}

TEST(BuildProblem, AsymmetricRIsRejectedWithFieldName) {
    json cfg = scalar_config(8, 0, 0, 0, 0, 1, 1);
    cfg["dimensions"]["l"] = 2;
    cfg["weights"]["R"] = {{1, 2}, {3, 1}};
    cfg["weights"]["S"] = {{0.0}, {0.0}};
    const std::string msg = error_of(cfg);
    EXPECT_NE(msg.find("R"), std::string::npos) << msg;
}

TEST(BuildProblem, FractionalAlphaBoundary) {
    json cfg = scalar_config(8, 0, 0, 0, 0, 1, 1);
    cfg["kernels"]["C"] = {{"family", "fractional"}, {"c", 1.0}, {"alpha", 0.6}};
    EXPECT_NO_THROW(build_problem(cfg));
    cfg["kernels"]["C"]["alpha"] = 0.5;
    EXPECT_THROW(build_problem(cfg), KernelNotSquareIntegrable);
}

TEST(BuildProblem, UnknownKeysAreRejected) {
    json cfg = scalar_config(8, 0, 0, 0, 0, 1, 1);
    cfg["weights"]["P"] = 1.0;
    EXPECT_NE(error_of(cfg).find("weights"), std::string::npos);
    json cfg2 = scalar_config(8, 0, 0, 0, 0, 1, 1);
    cfg2["extra"] = 1;
    EXPECT_FALSE(error_of(cfg2).empty());
    json cfg3 = scalar_config(8, 0, 0, 0, 0, 1, 1);
    cfg3["kernels"]["A"] = {{"family", "constant"}, {"c", 1.0}, {"alpha", 0.7}};
    EXPECT_NE(error_of(cfg3).find("kernels.A"), std::string::npos);
}

TEST(BuildProblem, DimensionMismatchNamesField) {
    json cfg = scalar_config(8, 0, 0, 0, 0, 1, 1);
    cfg["kernels"]["B"] = {{"family", "constant"}, {"c", {{1.0, 2.0}}}};
    EXPECT_NE(error_of(cfg).find("kernels.B"), std::string::npos);
}

TEST(BuildProblem, MissingRIsRejected) {
    json cfg = scalar_config(8, 0, 0, 0, 0, 1, 1);
    cfg["weights"].erase("R");
    EXPECT_NE(error_of(cfg).find("weights.R"), std::string::npos);
}

TEST(BuildProblem, FieldFamilies) {
    json cfg = scalar_config(4, 0, 0, 0, 0, 1, 1);
    cfg["weights"]["Q"] = {{"family", "polynomial"}, {"coefficients", {1.0, 2.0}}};
    cfg["input"]["x"] = {{"family", "table"}, {"table", {0.0, 1.0, 2.0, 3.0, 4.0}}};
    const Problem p = build_problem(cfg);
    EXPECT_DOUBLE_EQ(p.Q(2)(0, 0), 1.0 + 2.0 * 0.5);
    EXPECT_DOUBLE_EQ(p.x(3)(0, 0), 3.0);
}

TEST(BuildProblem, RoundTripIsBitExact) {
    std::mt19937_64 rng(9);
    json cfg = scalar_config(6, 0.3, 0, 0, 0, 1, 1);
    cfg["dimensions"] = {{"d", 2}, {"l", 1}};
    cfg["kernels"]["A"] = {{"family", "fractional"}, {"c", {{0.1, 0.2}, {0.3, 0.4}}}, {"alpha", 0.7}};
    cfg["weights"]["Q"] = {{2.0, 0.5}, {0.5, 1.0}};
    cfg["weights"]["S"] = {{0.1, 0.2}};
    cfg["weights"]["R"] = {{"family", "polynomial"}, {"coefficients", {1.0, 0.3}}};
    cfg["inhomogeneous"]["sigma"] = {{"family", "constant"}, {"c", {0.1, 0.7}}};
    cfg["input"]["x"] = {1.0, -1.0};
    const Problem a = build_problem(cfg);
    const Problem b = build_problem(problem_to_json(a));
    EXPECT_EQ(a.A.raw(), b.A.raw());
    EXPECT_EQ(a.sigma.raw(), b.sigma.raw());
    EXPECT_EQ(a.Q.raw(), b.Q.raw());
    EXPECT_EQ(a.R.raw(), b.R.raw());
    EXPECT_EQ(a.S.raw(), b.S.raw());
    EXPECT_EQ(a.x.raw(), b.x.raw());
    EXPECT_EQ(a.A.has_family(), b.A.has_family());

    // A problem with sampled kernels survives the round trip as well.
    Problem c = a;
    c.B = random_kernel(a.grid, rng, 2, 1);
    const Problem d = build_problem(problem_to_json(c));
    EXPECT_EQ(c.B.raw(), d.B.raw());
}

TEST(RefineConfig, ScalesStepsAndStart) {
    json cfg = scalar_config(10, 0, 1, 0, 0, 1, 1);
    cfg["input"]["t0_index"] = 3;
    const json r = refine_config(cfg, 2);
    EXPECT_EQ(r["steps"], 20);
    EXPECT_EQ(r["input"]["t0_index"], 6);
    json tab = cfg;
    tab["input"]["x"] = {{"family", "table"}, {"table", json::array()}};
    EXPECT_THROW(refine_config(tab, 2), ValidationError);
}

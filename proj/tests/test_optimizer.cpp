#include "support.hpp"

#include <gtest/gtest.h>

using namespace mvr;

namespace {

OptimConfig small_config(int iterations = 60) {
  OptimConfig c;
  c.iterations = iterations;
  c.remesh_iterations = {iterations / 2};
  c.shader = fixtures::tiny_shader();
  c.hull_resolution = 20;
  c.seed = 3;
  return c;
}

Dataset small_dataset() {
  Dataset d;
  d.views = fixtures::small_sphere_scene().views;
  return d;
}

double mean_total(const RunReport& r, std::size_t from, std::size_t to) {
  double s = 0.0;
  for (std::size_t i = from; i < to; ++i) s += r.records[i].terms.total();
  return s / double(to - from);
}

}  // namespace

TEST(Optimizer, LossDecreasesAndMeshApproachesSphere) {
  const auto res = run_reconstruction(small_dataset(), small_config(120));
  ASSERT_EQ(res.report.records.size(), 120u);
  EXPECT_LT(mean_total(res.report, 100, 120), 0.5 * mean_total(res.report, 0, 10));
  const auto& ref = fixtures::small_sphere_scene().reference;
  EXPECT_LT(symmetric_surface_distance(res.mesh, ref), symmetric_surface_distance(res.initial, ref));
  EXPECT_TRUE(check_manifold(res.mesh).ok);
  EXPECT_EQ(res.report.skipped_iterations, 0);
}

TEST(Optimizer, SeededRunsAreIdentical) {
  const auto a = run_reconstruction(small_dataset(), small_config());
  const auto b = run_reconstruction(small_dataset(), small_config());
  ASSERT_EQ(a.report.records.size(), b.report.records.size());
  for (std::size_t i = 0; i < a.report.records.size(); ++i) {
    EXPECT_EQ(a.report.records[i].terms.total(), b.report.records[i].terms.total()) << "iteration " << i;
    EXPECT_EQ(a.report.records[i].shaded_pixels, b.report.records[i].shaded_pixels);
  }
  EXPECT_EQ(a.mesh.vertices, b.mesh.vertices);
  EXPECT_EQ(a.mesh.faces, b.mesh.faces);
  EXPECT_EQ(a.shader.theta, b.shader.theta);

  auto other = small_config();
  other.seed = 4;
  const auto c = run_reconstruction(small_dataset(), other);
  EXPECT_NE(c.mesh.vertices, a.mesh.vertices);
}

TEST(Optimizer, RemeshScheduleAndHooks) {
  auto cfg = small_config(30);
  cfg.remesh_iterations = {10, 20};
  std::vector<int> remeshed_at;
  std::vector<std::size_t> sizes;
  int calls = 0;
  RunHooks hooks;
  hooks.on_remesh = [&](int it, const Mesh<float>& m) {
    remeshed_at.push_back(it);
    sizes.push_back(m.vertices.size());
  };
  hooks.on_iteration = [&](const IterationRecord& r) { EXPECT_EQ(r.iteration, calls++); };
  const auto res = run_reconstruction(small_dataset(), cfg, hooks);
  EXPECT_EQ(calls, 30);
  EXPECT_EQ(remeshed_at, (std::vector<int>{10, 20}));
  ASSERT_EQ(sizes.size(), 2u);
  EXPECT_GT(sizes[0], res.report.initial_vertices);
  EXPECT_GT(sizes[1], sizes[0]);
  EXPECT_TRUE(res.report.records[9].remeshed);
  EXPECT_FALSE(res.report.records[10].remeshed);
  EXPECT_EQ(res.report.records[10].vertex_count, sizes[0]);
  EXPECT_EQ(res.report.final_vertices, sizes[1]);
}

TEST(Optimizer, ReportCsvAndSummary) {
  const auto res = run_reconstruction(small_dataset(), small_config(20));
  const std::string csv = res.report.to_csv();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 21);
  EXPECT_EQ(csv.rfind("iteration,shading,silhouette,laplacian,normal,total,vertices,faces,shaded_pixels,rasterize_s,shade_s,"
                      "losses_s,backward_s,step_s,remesh_s,wall_s,skipped,remeshed\n",
                      0),
            0u);
  const auto s = res.report.summary();
  EXPECT_EQ(s["iterations"], 20);
  EXPECT_NEAR(s["final_losses"]["total"].get<double>(), res.report.records.back().terms.total(), 1e-12);
  double phase_sum = 0.0;
  for (const char* name : kPhaseNames) phase_sum += s["phase_seconds"][name].get<double>();
  EXPECT_LE(phase_sum, s["iteration_wall_seconds"].get<double>());
}

TEST(Optimizer, PhasesCoverIterationWallTime) {
  const auto res = run_reconstruction(small_dataset(), small_config(20));
  for (const auto& r : res.report.records) {
    for (Phase p : {Phase::rasterize, Phase::shade, Phase::losses, Phase::backward, Phase::step}) EXPECT_GT(r.phases[p], 0.0);
    EXPECT_GE(r.phases.total(), 0.95 * r.wall_seconds) << "iteration " << r.iteration;
    EXPECT_LE(r.phases.total(), r.wall_seconds);
  }
}

TEST(Optimizer, ZeroShadingWeightSkipsShader) {
  auto cfg = small_config(10);
  cfg.weights.shading = 0.0;
  const auto res = run_reconstruction(small_dataset(), cfg);
  const auto init = init_params<float>(cfg.shader, cfg.encoding, cfg.seed);
  EXPECT_EQ(res.shader.theta, init.theta);
  for (const auto& r : res.report.records) EXPECT_EQ(r.terms.shading, 0.0);
}

TEST(Optimizer, RejectsBadInput) {
  auto cfg = small_config(10);
  EXPECT_THROW(optimize({}, icosphere<float>(1, 0.5f), cfg), Error);
  // a fin: the first edge gains a third face
  Mesh<float> fin = icosphere<float>(1, 0.5f);
  fin.vertices.push_back(Vec3<float>(0.0f, 0.0f, 0.9f));
  fin.faces.push_back({fin.faces[0][0], fin.faces[0][1], static_cast<int>(fin.vertices.size()) - 1});
  EXPECT_THROW(optimize(views_as_float(small_dataset().views), fin, cfg), Error);
  cfg.remesh_iterations = {0};
  EXPECT_THROW(run_reconstruction(small_dataset(), cfg), Error);
}

TEST(Optimizer, RefinementUsesItsOwnSchedule) {
  auto cfg = small_config(10);
  cfg.refine.iterations = 8;
  cfg.refine.remesh_iterations = {4};
  const auto res = run_refinement(small_dataset(), icosphere<double>(3, 0.55), cfg);
  EXPECT_EQ(res.report.records.size(), 8u);
  EXPECT_TRUE(res.report.records[3].remeshed);
}

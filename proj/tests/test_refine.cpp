// Detail refinement: intensity sampling against an exhaustive pixel search,
// the heat high-pass against a dense factorization, the neighbor-difference
// displacement against a direct summation, fairing against analytic
// curvature, and the composed refine step.
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <vector>

#include "facegeom/error.hpp"
#include "facegeom/maps.hpp"
#include "facegeom/refine.hpp"
#include "facegeom/rng.hpp"
#include "facegeom/sparse.hpp"
#include "support/oracles.hpp"

using namespace facegeom;

namespace {

// A fully valid square stack with intensity from `shade(row, col)`; depth and
// the geometric channels are zero because sampling never reads them.
MapStack flat_stack(int res, double scale,
                    const std::function<double(int, int)>& shade) {
  MapStack s;
  s.meta.width = res;
  s.meta.height = res;
  s.meta.camera_scale = scale;
  s.intensity = Raster(res, res, 1);
  s.depth = Raster(res, res, 1);
  s.xyz = Raster(res, res, 3);
  s.correspondence = Raster(res, res, 3);
  s.mask = Mask(res, res, 1);
  for (int r = 0; r < res; ++r)
    for (int c = 0; c < res; ++c) s.intensity.at(r, c) = shade(r, c);
  return s;
}

// Places grid-mesh vertices exactly on pixel centers (col0 + 2i, row0 + 2j).
TriangleMesh mesh_on_pixel_centers(const MapMeta& meta, int n, int row0, int col0) {
  TriangleMesh mesh = oracles::make_grid_mesh(n, n, 1.0);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      Vec3& v = mesh.vertices[j * n + i];
      v = Vec3(col_to_x(meta, col0 + 2 * i), row_to_y(meta, row0 + 2 * j), 0.0);
    }
  return mesh;
}

}  // namespace

// ---- intensity sampling -----------------------------------------------------

TEST_CASE("sampling copies the exact pixel under each vertex") {
  const MapStack stack = flat_stack(64, 0.5, [](int r, int c) {
    return ((r + c) % 2) ? 0.75 : 0.25;
  });
  const TriangleMesh mesh = mesh_on_pixel_centers(stack.meta, 6, 10, 14);
  RefineConfig cfg;
  const VertexTexture tex = sample_intensity(mesh, stack, cfg);
  REQUIRE(int(tex.tau.size()) == mesh.vertex_count());
  for (int j = 0; j < 6; ++j)
    for (int i = 0; i < 6; ++i)
      CHECK(tex.tau[j * 6 + i] == stack.intensity.at(10 + 2 * j, 14 + 2 * i));
}

TEST_CASE("sampling a constant image yields a constant field") {
  const MapStack stack = flat_stack(48, 0.5, [](int, int) { return 0.37; });
  TriangleMesh mesh = mesh_on_pixel_centers(stack.meta, 5, 8, 8);
  oracles::jitter_vertices(mesh, 0.9, 31);
  RefineConfig cfg;
  const VertexTexture tex = sample_intensity(mesh, stack, cfg);
  for (double t : tex.tau) CHECK(t == 0.37);
}

TEST_CASE("sampling matches an exhaustive nearest-valid-pixel search") {
  SplitMix64 rng(404);
  const int res = 56;
  const MapStack stack = flat_stack(res, 0.5, [&](int, int) {
    return 0.0;  // overwritten below
  });
  MapStack painted = stack;
  SplitMix64 paint(405);
  for (int r = 0; r < res; ++r)
    for (int c = 0; c < res; ++c) painted.intensity.at(r, c) = paint.next_double();

  // Random projections well inside the raster so the radius cap never bites.
  TriangleMesh mesh = oracles::make_grid_mesh(8, 8, 1.0);
  for (auto& v : mesh.vertices) {
    const double colf = 8.0 + 40.0 * rng.next_double();
    const double rowf = 8.0 + 40.0 * rng.next_double();
    v = Vec3(col_to_x(painted.meta, colf), row_to_y(painted.meta, rowf), 0.0);
  }
  RefineConfig cfg;
  const VertexTexture tex = sample_intensity(mesh, painted, cfg);
  for (int i = 0; i < mesh.vertex_count(); ++i) {
    const double colf = x_to_col(painted.meta, mesh.vertices[i].x());
    const double rowf = y_to_row(painted.meta, mesh.vertices[i].y());
    double best_d2 = 0.0;
    int best_r = -1, best_c = -1;
    for (int r = 0; r < res; ++r)
      for (int c = 0; c < res; ++c) {
        if (!painted.mask.at(r, c)) continue;
        const double d2 = (r - rowf) * (r - rowf) + (c - colf) * (c - colf);
        if (best_r < 0 || d2 < best_d2) {
          best_d2 = d2;
          best_r = r;
          best_c = c;
        }
      }
    REQUIRE(best_r >= 0);
    CHECK(tex.tau[i] == painted.intensity.at(best_r, best_c));
  }
}

TEST_CASE("off-mask vertices inherit ring means, stragglers the global mean") {
  // Mask valid only on the left quarter; three groups of vertices:
  //  - 0, 1, 8 project onto distinct valid pixels;
  //  - 2 neighbors two sampled vertices, 3 and 4 only reach 2 a round later;
  //  - 5, 6, 7 form their own far-off component and never gain a sampled ring.
  const int res = 64;
  MapStack stack = flat_stack(res, 0.5, [](int, int) { return 0.0; });
  stack.mask = Mask(res, res, 0);
  for (int r = 0; r < res; ++r)
    for (int c = 0; c < 16; ++c) stack.mask.at(r, c) = 1;
  stack.intensity.at(8, 4) = 0.2;
  stack.intensity.at(8, 6) = 0.6;
  stack.intensity.at(6, 5) = 0.9;

  TriangleMesh mesh;
  auto at_pixel = [&](double row, double col) {
    return Vec3(col_to_x(stack.meta, col), row_to_y(stack.meta, row), 0.0);
  };
  mesh.vertices = {at_pixel(8, 4),  at_pixel(8, 6),  at_pixel(8, 40),
                   at_pixel(10, 44), at_pixel(8, 48), at_pixel(20, 52),
                   at_pixel(20, 56), at_pixel(24, 54), at_pixel(6, 5)};
  mesh.faces = {{0, 1, 2}, {2, 3, 4}, {5, 6, 7}, {0, 1, 8}};

  RefineConfig cfg;
  const VertexTexture tex = sample_intensity(mesh, stack, cfg);
  CHECK(tex.tau[0] == 0.2);
  CHECK(tex.tau[1] == 0.6);
  CHECK(tex.tau[8] == 0.9);
  // Ring of 2 = {0, 1, 3, 4}; only 0 and 1 carry values in round one.
  CHECK(tex.tau[2] == doctest::Approx(0.4).epsilon(1e-15));
  // 3 and 4 see only vertex 2, assigned the round before.
  CHECK(tex.tau[3] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(tex.tau[4] == doctest::Approx(0.4).epsilon(1e-15));
  // The detached component falls back to the mean of everything assigned.
  const double global = (0.2 + 0.6 + 0.9 + 3 * 0.4) / 6.0;
  CHECK(tex.tau[5] == doctest::Approx(global).epsilon(1e-15));
  CHECK(tex.tau[6] == doctest::Approx(global).epsilon(1e-15));
  CHECK(tex.tau[7] == doctest::Approx(global).epsilon(1e-15));
}

TEST_CASE("the search radius bounds how far a projection may reach") {
  const int res = 32;
  MapStack stack = flat_stack(res, 0.5, [](int, int) { return 0.0; });
  stack.mask = Mask(res, res, 0);
  for (int r = 0; r < res; ++r)
    for (int c = 0; c < 16; ++c) stack.mask.at(r, c) = 1;
  stack.intensity.at(8, 4) = 0.3;
  stack.intensity.at(8, 6) = 0.7;
  stack.intensity.at(8, 15) = 0.55;

  TriangleMesh mesh;
  auto at_pixel = [&](double row, double col) {
    return Vec3(col_to_x(stack.meta, col), row_to_y(stack.meta, row), 0.0);
  };
  mesh.vertices = {at_pixel(8, 4), at_pixel(8, 6), at_pixel(8.2, 19.3)};
  mesh.faces = {{0, 1, 2}};

  RefineConfig wide;
  wide.sample_radius_px = 5.0;  // border pixel at distance ~4.3 is reachable
  CHECK(sample_intensity(mesh, stack, wide).tau[2] == 0.55);

  RefineConfig tight;
  tight.sample_radius_px = 1.0;  // unreachable: falls back to the ring mean
  CHECK(sample_intensity(mesh, stack, tight).tau[2] ==
        doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("an all-invalid mask raises NoValidPixels") {
  MapStack stack = flat_stack(16, 0.5, [](int, int) { return 0.5; });
  stack.mask = Mask(16, 16, 0);
  TriangleMesh mesh;
  mesh.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  mesh.faces = {{0, 1, 2}};
  RefineConfig cfg;
  try {
    sample_intensity(mesh, stack, cfg);
    FAIL("expected NoValidPixels");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoValidPixels);
  }
}

// ---- the heat high-pass -------------------------------------------------------

TEST_CASE("high-pass of a constant field is zero") {
  const TriangleMesh mesh = oracles::make_icosphere(2, 5.0);
  RefineConfig cfg;
  const std::vector<double> tau(std::size_t(mesh.vertex_count()), 0.37);
  for (double m : highpass_texture(mesh, tau, cfg)) CHECK(std::abs(m) < 1e-10);
}

TEST_CASE("high-pass vanishes in the zero-time limit") {
  const TriangleMesh mesh = oracles::make_icosphere(1, 5.0);
  SplitMix64 rng(99);
  std::vector<double> tau(std::size_t(mesh.vertex_count()));
  for (double& t : tau) t = rng.next_double();
  RefineConfig cfg;
  cfg.dt = 1e-12;
  for (double m : highpass_texture(mesh, tau, cfg)) CHECK(std::abs(m) < 1e-6);
}

TEST_CASE("high-pass matches a dense factorization") {
  auto run = [](const TriangleMesh& mesh, std::uint64_t seed) {
    const int n = mesh.vertex_count();
    SplitMix64 rng(seed);
    std::vector<double> tau(n, 0.0);
    for (double& t : tau) t = rng.next_double();
    RefineConfig cfg;
    const std::vector<double> mu = highpass_texture(mesh, tau, cfg);

    std::vector<double> a = oracles::dense_from_sparse(cotangent_laplacian(mesh));
    for (double& v : a) v *= -cfg.dt;
    for (int i = 0; i < n; ++i) a[std::size_t(i) * n + i] += 1.0;
    const std::vector<double> smooth = oracles::gauss_solve(n, a, tau);
    for (int i = 0; i < n; ++i)
      CHECK(std::abs(mu[std::size_t(i)] - (tau[std::size_t(i)] - smooth[std::size_t(i)])) <
            1e-8);
  };
  run(oracles::make_icosphere(2, 8.0), 7);  // 162 vertices, closed
  TriangleMesh grid = oracles::make_grid_mesh(12, 12, 1.0);
  oracles::jitter_vertices(grid, 0.2, 8);  // 144 vertices, with boundary
  run(grid, 9);
}

TEST_CASE("high-pass is linear in the input field") {
  const TriangleMesh mesh = oracles::make_icosphere(2, 6.0);
  const int n = mesh.vertex_count();
  SplitMix64 rng(123);
  std::vector<double> t1(n, 0.0), t2(n, 0.0), mix(n, 0.0);
  const double a = 1.75, b = -0.6;
  for (int i = 0; i < n; ++i) {
    t1[std::size_t(i)] = rng.next_double();
    t2[std::size_t(i)] = rng.next_double();
    mix[std::size_t(i)] = a * t1[std::size_t(i)] + b * t2[std::size_t(i)];
  }
  RefineConfig cfg;
  const auto m1 = highpass_texture(mesh, t1, cfg);
  const auto m2 = highpass_texture(mesh, t2, cfg);
  const auto mm = highpass_texture(mesh, mix, cfg);
  for (int i = 0; i < n; ++i)
    CHECK(std::abs(mm[std::size_t(i)] - (a * m1[std::size_t(i)] + b * m2[std::size_t(i)])) <
          1e-8);
}

TEST_CASE("high-pass rejects a field of the wrong length") {
  const TriangleMesh mesh = oracles::make_icosphere(1, 5.0);
  RefineConfig cfg;
  try {
    highpass_texture(mesh, std::vector<double>(3, 0.0), cfg);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

// ---- the neighbor-difference displacement ----------------------------------

TEST_CASE("detail displacement of a constant field is zero") {
  TriangleMesh mesh = oracles::make_grid_mesh(6, 6, 1.0);
  oracles::jitter_vertices(mesh, 0.3, 55);
  RefineConfig cfg;
  const std::vector<double> mu(std::size_t(mesh.vertex_count()), 0.42);
  for (double d : data_driven_displacement(mesh, mu, cfg)) CHECK(d == 0.0);
}

TEST_CASE("detail displacement hand case: tangent neighbors at unit distance") {
  // Both ring neighbors of vertex 0 lie in its tangent plane at distance 1
  // with the same field difference, so the weighted mean collapses to
  // gain * 0.1 regardless of the weights.
  TriangleMesh mesh;
  mesh.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  mesh.faces = {{0, 1, 2}};
  RefineConfig cfg;
  cfg.gain = 2.0;
  const std::vector<double> mu = {0.1, 0.0, 0.0};
  const std::vector<double> delta = data_driven_displacement(mesh, mu, cfg);
  CHECK(delta[0] == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("detail displacement matches a direct summation") {
  auto check_mesh = [](const TriangleMesh& mesh, std::uint64_t seed) {
    const int n = mesh.vertex_count();
    SplitMix64 rng(seed);
    std::vector<double> mu(n, 0.0);
    for (double& m : mu) m = rng.next_double();
    RefineConfig cfg;
    cfg.gain = 1.3;
    const std::vector<double> delta = data_driven_displacement(mesh, mu, cfg);

    // Neighbor sets rebuilt from the edge list rather than the adjacency
    // helper the library uses.
    std::vector<std::set<int>> ring(n);
    for (const auto& [a, b] : edge_list(mesh)) {
      ring[std::size_t(a)].insert(b);
      ring[std::size_t(b)].insert(a);
    }
    const VertexNormals normals = vertex_normals(mesh);
    for (int i = 0; i < n; ++i) {
      double acc = 0.0, wsum = 0.0;
      for (int j : ring[std::size_t(i)]) {
        const Vec3 d = mesh.vertices[i] - mesh.vertices[j];
        const double len = d.norm();
        const double w = std::exp(-len);
        acc += w * (mu[std::size_t(i)] - mu[std::size_t(j)]) *
               (1.0 - std::abs(d.dot(normals.normals[i])) / len);
        wsum += w;
      }
      const double want = ring[std::size_t(i)].empty() ? 0.0 : cfg.gain * acc / wsum;
      CHECK(std::abs(delta[std::size_t(i)] - want) < 1e-12);
    }
  };
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TriangleMesh grid = oracles::make_grid_mesh(10, 10, 1.0);
    oracles::jitter_vertices(grid, 0.4, 1000 + seed);
    check_mesh(grid, seed);
  }
  check_mesh(oracles::make_icosphere(1, 3.0), 77);
}

TEST_CASE("detail displacement ignores constant shifts of the field") {
  TriangleMesh mesh = oracles::make_grid_mesh(7, 7, 1.0);
  oracles::jitter_vertices(mesh, 0.3, 61);
  const int n = mesh.vertex_count();
  SplitMix64 rng(62);
  std::vector<double> mu(n, 0.0), shifted(n, 0.0);
  for (int i = 0; i < n; ++i) {
    mu[std::size_t(i)] = rng.next_double();
    shifted[std::size_t(i)] = mu[std::size_t(i)] + 7.5;
  }
  RefineConfig cfg;
  const auto d1 = data_driven_displacement(mesh, mu, cfg);
  const auto d2 = data_driven_displacement(mesh, shifted, cfg);
  for (int i = 0; i < n; ++i)
    CHECK(std::abs(d1[std::size_t(i)] - d2[std::size_t(i)]) < 1e-12);
}

TEST_CASE("coincident ring neighbors raise ZeroLengthEdge") {
  TriangleMesh mesh;
  mesh.vertices = {Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(0, 1, 0)};
  mesh.faces = {{0, 1, 2}};
  RefineConfig cfg;
  try {
    data_driven_displacement(mesh, {0.0, 0.1, 0.2}, cfg);
    FAIL("expected ZeroLengthEdge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroLengthEdge);
  }
}

// ---- fairing -----------------------------------------------------------------

TEST_CASE("fairing on an exact plane is zero everywhere") {
  const TriangleMesh mesh = oracles::make_grid_mesh(9, 9, 1.0);
  RefineConfig cfg;
  for (double d : fairing_displacement(mesh, cfg)) CHECK(std::abs(d) < 1e-12);
}

TEST_CASE("fairing on a sphere is uniformly inward at the analytic rate") {
  // Mean curvature of a radius-10 sphere: <L v / area, n> = -2H = -0.2. The
  // barycentric area lumping overshoots at the twelve valence-5 vertices, so
  // individual values get a loose band while the average must be tight.
  const double radius = 10.0;
  const TriangleMesh mesh = oracles::make_icosphere(3, radius);
  RefineConfig cfg;
  cfg.fairing_step = 0.5;
  const std::vector<double> delta = fairing_displacement(mesh, cfg);
  const double expected = -cfg.fairing_step * 2.0 / radius;
  double sum = 0.0;
  for (double d : delta) {
    CHECK(d < 0.0);
    CHECK(std::abs(d - expected) < 0.25 * std::abs(expected));
    sum += d;
  }
  const double mean = sum / double(delta.size());
  CHECK(std::abs(mean - expected) < 0.05 * std::abs(expected));
}

TEST_CASE("a zero fairing step produces no displacement") {
  TriangleMesh mesh = oracles::make_icosphere(1, 4.0);
  oracles::jitter_vertices(mesh, 0.2, 17);
  RefineConfig cfg;
  cfg.fairing_step = 0.0;
  for (double d : fairing_displacement(mesh, cfg)) CHECK(d == 0.0);
}

// ---- applying displacements ---------------------------------------------------

TEST_CASE("displacements move vertices along their own normals") {
  const TriangleMesh mesh = oracles::make_icosphere(2, 5.0);
  const int n = mesh.vertex_count();
  SplitMix64 rng(5150);
  std::vector<double> dmu(n, 0.0), ds(n, 0.0);
  for (int i = 0; i < n; ++i) {
    dmu[std::size_t(i)] = rng.next_double() - 0.5;
    ds[std::size_t(i)] = rng.next_double() - 0.5;
  }
  RefineConfig cfg;
  cfg.eta = 0.3;
  const VertexNormals normals = vertex_normals(mesh);
  const TriangleMesh out = apply_detail_displacement(mesh, dmu, ds, cfg);
  REQUIRE(out.vertex_count() == n);
  REQUIRE(out.faces == mesh.faces);
  for (int i = 0; i < n; ++i) {
    const double amount =
        cfg.eta * dmu[std::size_t(i)] + (1.0 - cfg.eta) * ds[std::size_t(i)];
    const Vec3 want = mesh.vertices[i] + amount * normals.normals[i];
    CHECK((out.vertices[i] - want).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("eta zero reduces to a pure fairing move") {
  const TriangleMesh mesh = oracles::make_icosphere(1, 6.0);
  const int n = mesh.vertex_count();
  std::vector<double> dmu(std::size_t(n), 123.0);  // must be ignored entirely
  std::vector<double> ds(std::size_t(n), 0.25);
  RefineConfig cfg;
  cfg.eta = 0.0;
  const VertexNormals normals = vertex_normals(mesh);
  const TriangleMesh out = apply_detail_displacement(mesh, dmu, ds, cfg);
  for (int i = 0; i < n; ++i) {
    const Vec3 want = mesh.vertices[i] + 0.25 * normals.normals[i];
    CHECK((out.vertices[i] - want).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("zero displacements are an exact identity") {
  const TriangleMesh mesh = oracles::make_icosphere(1, 2.0);
  const std::vector<double> zeros(std::size_t(mesh.vertex_count()), 0.0);
  RefineConfig cfg;
  const TriangleMesh out = apply_detail_displacement(mesh, zeros, zeros, cfg);
  for (int i = 0; i < mesh.vertex_count(); ++i)
    CHECK(out.vertices[i] == mesh.vertices[i]);
  CHECK(out.faces == mesh.faces);
}

TEST_CASE("displacement arrays of the wrong length are rejected") {
  const TriangleMesh mesh = oracles::make_icosphere(1, 2.0);
  const std::vector<double> good(std::size_t(mesh.vertex_count()), 0.0);
  const std::vector<double> bad(3, 0.0);
  RefineConfig cfg;
  try {
    apply_detail_displacement(mesh, bad, good, cfg);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("a sinusoidal field on a plane displaces at the predicted amplitude") {
  // On a unit grid the ring of an interior vertex is three symmetric offset
  // pairs, so the weighted neighbor mean of sin(k x) has a closed form and
  // delta = gain * (1 - (w10 + (w10 + w11) cos k) / (2 w10 + w11)) * mu with
  // w10 = exp(-1) (axis steps) and w11 = exp(-sqrt(2)) (the diagonal).
  const int n = 20;
  const TriangleMesh mesh = oracles::make_grid_mesh(n, n, 1.0);
  const double k = 2.0 * M_PI / 5.0, amp = 0.01;
  std::vector<double> mu(std::size_t(mesh.vertex_count()));
  for (int i = 0; i < mesh.vertex_count(); ++i)
    mu[std::size_t(i)] = amp * std::sin(k * mesh.vertices[i].x());
  RefineConfig cfg;
  cfg.eta = 0.2;
  cfg.gain = 1.5;

  const double w10 = std::exp(-1.0), w11 = std::exp(-std::sqrt(2.0));
  const double lowpass = (2.0 * w10 + 2.0 * (w10 + w11) * std::cos(k)) /
                         (4.0 * w10 + 2.0 * w11);
  const double factor = cfg.gain * (1.0 - lowpass);

  const std::vector<double> zeros(std::size_t(mesh.vertex_count()), 0.0);
  const std::vector<double> delta = data_driven_displacement(mesh, mu, cfg);
  const TriangleMesh out = apply_detail_displacement(mesh, delta, zeros, cfg);
  for (int j = 1; j + 1 < n; ++j)
    for (int i = 1; i + 1 < n; ++i) {
      const int v = j * n + i;
      const double want = cfg.eta * factor * mu[std::size_t(v)];
      CHECK(std::abs((out.vertices[v].z() - mesh.vertices[v].z()) - want) < 1e-12);
    }
}

// ---- the composed refine step --------------------------------------------------

TEST_CASE("refining under constant intensity is a pure fairing step") {
  const TriangleMesh sphere = oracles::make_icosphere(1, 8.0);
  const MapStack stack = flat_stack(64, 0.4, [](int, int) { return 0.6; });
  RefineConfig cfg;  // subdivision_levels = 1
  const RefineResult result = refine_mesh(sphere, stack, cfg);

  const TriangleMesh fine = subdivide_midpoint(sphere, 1);
  REQUIRE(result.mesh.vertex_count() == fine.vertex_count());
  CHECK(fine.vertex_count() ==
        sphere.vertex_count() + int(edge_list(sphere).size()));
  CHECK(int(result.texture.tau.size()) == fine.vertex_count());
  CHECK(int(result.texture.mu.size()) == fine.vertex_count());
  for (double t : result.texture.tau) CHECK(t == 0.6);
  for (double m : result.texture.mu) CHECK(std::abs(m) < 1e-10);

  const std::vector<double> zeros(std::size_t(fine.vertex_count()), 0.0);
  const TriangleMesh expected =
      apply_detail_displacement(fine, zeros, fairing_displacement(fine, cfg), cfg);
  for (int i = 0; i < fine.vertex_count(); ++i)
    CHECK((result.mesh.vertices[i] - expected.vertices[i]).cwiseAbs().maxCoeff() <
          1e-9);
}

TEST_CASE("refining with every stage disabled is the identity") {
  TriangleMesh mesh = oracles::make_icosphere(1, 8.0);
  oracles::jitter_vertices(mesh, 0.2, 3);
  const MapStack stack = flat_stack(64, 0.4, [](int, int) { return 0.5; });
  RefineConfig cfg;
  cfg.subdivision_levels = 0;
  cfg.eta = 0.0;
  cfg.fairing_step = 0.0;
  const RefineResult result = refine_mesh(mesh, stack, cfg);
  REQUIRE(result.mesh.vertex_count() == mesh.vertex_count());
  for (int i = 0; i < mesh.vertex_count(); ++i)
    CHECK(result.mesh.vertices[i] == mesh.vertices[i]);
  CHECK(result.mesh.faces == mesh.faces);
}

TEST_CASE("a detail-free refine smooths a noisy sphere") {
  TriangleMesh noisy = oracles::make_icosphere(2, 10.0);
  oracles::jitter_vertices(noisy, 0.5, 29);
  const MapStack stack = flat_stack(64, 0.4, [](int, int) { return 0.5; });
  RefineConfig cfg;
  cfg.subdivision_levels = 0;
  cfg.eta = 0.0;
  cfg.fairing_step = 0.4;

  auto curvature_energy = [](const TriangleMesh& mesh) {
    const SparseOperator lap = cotangent_laplacian(mesh);
    const std::vector<double> areas = barycentric_vertex_areas(mesh);
    double energy = 0.0;
    for (int i = 0; i < mesh.vertex_count(); ++i) {
      Vec3 lv = Vec3::Zero();
      for (int j = 0; j < mesh.vertex_count(); ++j) {
        const double w = lap.coeff(i, j);
        if (w != 0.0) lv += w * mesh.vertices[j];
      }
      if (areas[std::size_t(i)] > 0.0) energy += lv.squaredNorm() / areas[std::size_t(i)];
    }
    return energy;
  };

  const RefineResult result = refine_mesh(noisy, stack, cfg);
  CHECK(curvature_energy(result.mesh) < curvature_energy(noisy));
}

TEST_CASE("refine configuration bounds are enforced") {
  auto expect_invalid = [](RefineConfig cfg) {
    try {
      cfg.validate();
      FAIL("expected ValidationError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ValidationError);
    }
  };
  RefineConfig cfg;
  cfg.dt = -0.1;
  expect_invalid(cfg);
  cfg = RefineConfig{};
  cfg.dt = std::nan("");
  expect_invalid(cfg);
  cfg = RefineConfig{};
  cfg.eta = 1.5;
  expect_invalid(cfg);
  cfg = RefineConfig{};
  cfg.eta = -0.1;
  expect_invalid(cfg);
  cfg = RefineConfig{};
  cfg.gain = -1.0;
  expect_invalid(cfg);
  cfg = RefineConfig{};
  cfg.fairing_step = -0.5;
  expect_invalid(cfg);
  cfg = RefineConfig{};
  cfg.subdivision_levels = -1;
  expect_invalid(cfg);
  cfg = RefineConfig{};
  cfg.subdivision_levels = 4;
  expect_invalid(cfg);
  cfg = RefineConfig{};
  cfg.sample_radius_px = -2.0;
  expect_invalid(cfg);
  RefineConfig good;
  good.validate();  // the defaults must pass
}

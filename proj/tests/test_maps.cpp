// Raster IO (PFM/PGM/meta JSON), map-stack loading with its cross-checks,
// and the depth-to-normals finite differences.
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "facegeom/error.hpp"
#include "facegeom/maps.hpp"
#include "facegeom/rng.hpp"

using namespace facegeom;
namespace fs = std::filesystem;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

fs::path temp_dir() {
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() /
                 ("facegeom_maps_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

// A tiny internally consistent stack: 4x3, plane depth, full mask.
MapStack plane_stack() {
  MapStack s;
  s.meta.width = 4;
  s.meta.height = 3;
  s.meta.camera_scale = 0.5;
  s.intensity = Raster(4, 3, 1, 0.5);
  s.depth = Raster(4, 3, 1, 10.0);
  s.xyz = Raster(4, 3, 3, 0.0);
  s.correspondence = Raster(4, 3, 3, 0.0);
  s.mask = Mask(4, 3, 1);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) {
      s.xyz.at(r, c, 0) = col_to_x(s.meta, c);
      s.xyz.at(r, c, 1) = row_to_y(s.meta, r);
      s.xyz.at(r, c, 2) = 10.0;
      s.correspondence.at(r, c, 0) = c * 0.1;
      s.correspondence.at(r, c, 1) = r * 0.1;
    }
  return s;
}

void knock_out(MapStack& s, int r, int c) {
  s.mask.at(r, c) = 0;
  s.intensity.at(r, c) = kNaN;
  s.depth.at(r, c) = kNaN;
  for (int ch = 0; ch < 3; ++ch) {
    s.xyz.at(r, c, ch) = kNaN;
    s.correspondence.at(r, c, ch) = kNaN;
  }
}

}  // namespace

TEST_CASE("pixel-center coordinate mapping round-trips and is y-up") {
  MapMeta meta;
  meta.width = 8;
  meta.height = 6;
  meta.camera_scale = 0.25;
  CHECK(col_to_x(meta, 0) < col_to_x(meta, 7));   // x grows with column
  CHECK(row_to_y(meta, 0) > row_to_y(meta, 5));   // y shrinks downward
  for (double c : {0.0, 1.5, 7.0})
    CHECK(x_to_col(meta, col_to_x(meta, c)) == doctest::Approx(c).epsilon(1e-14));
  for (double r : {0.0, 2.25, 5.0})
    CHECK(y_to_row(meta, row_to_y(meta, r)) == doctest::Approx(r).epsilon(1e-14));
  // One column step is exactly one camera_scale in mm.
  CHECK(col_to_x(meta, 3) - col_to_x(meta, 2) == doctest::Approx(0.25));
}

TEST_CASE("PFM round-trip is bit-exact for float32 values including NaN") {
  const fs::path dir = temp_dir();
  Raster r(5, 4, 1);
  SplitMix64 rng(2);
  for (auto& v : r.data) v = double(float(rng.next_range(-100, 100)));
  r.at(2, 3) = kNaN;
  r.at(0, 0) = 0.0;
  write_pfm(dir / "gray.pfm", r);
  const Raster back = read_pfm(dir / "gray.pfm");
  REQUIRE(back.width == 5);
  REQUIRE(back.height == 4);
  REQUIRE(back.channels == 1);
  for (int row = 0; row < 4; ++row)
    for (int col = 0; col < 5; ++col) {
      if (std::isnan(r.at(row, col)))
        CHECK(std::isnan(back.at(row, col)));
      else
        CHECK(back.at(row, col) == r.at(row, col));
    }

  Raster rgb(3, 2, 3);
  for (auto& v : rgb.data) v = double(float(rng.next_range(-1, 1)));
  write_pfm(dir / "color.pfm", rgb);
  const Raster rgb_back = read_pfm(dir / "color.pfm");
  REQUIRE(rgb_back.channels == 3);
  CHECK(rgb_back.data == rgb.data);
  fs::remove_all(dir);
}

TEST_CASE("PFM reader accepts big-endian scales and rejects junk") {
  const fs::path dir = temp_dir();

  // Hand-written big-endian 1x1 file holding 1.0f.
  {
    std::ofstream out(dir / "be.pfm", std::ios::binary);
    out << "Pf\n1 1\n1.0\n";
    const unsigned char be[4] = {0x3f, 0x80, 0x00, 0x00};
    out.write(reinterpret_cast<const char*>(be), 4);
  }
  const Raster be = read_pfm(dir / "be.pfm");
  CHECK(be.at(0, 0) == 1.0);

  // Comment lines in the header are tolerated.
  {
    std::ofstream out(dir / "comment.pfm", std::ios::binary);
    out << "Pf\n# a comment\n1 1\n-1.0\n";
    const float v = 2.5f;
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
  CHECK(read_pfm(dir / "comment.pfm").at(0, 0) == 2.5);

  {
    std::ofstream out(dir / "badmagic.pfm", std::ios::binary);
    out << "P6\n1 1\n-1.0\nxxxx";
  }
  CHECK_THROWS_AS(read_pfm(dir / "badmagic.pfm"), Error);

  {
    std::ofstream out(dir / "truncated.pfm", std::ios::binary);
    out << "Pf\n2 2\n-1.0\n";
    const float v = 1.0f;
    out.write(reinterpret_cast<const char*>(&v), 4);  // 1 of 4 pixels
  }
  CHECK_THROWS_AS(read_pfm(dir / "truncated.pfm"), Error);

  {
    std::ofstream out(dir / "zerodim.pfm", std::ios::binary);
    out << "Pf\n0 2\n-1.0\n";
  }
  CHECK_THROWS_AS(read_pfm(dir / "zerodim.pfm"), Error);

  CHECK_THROWS_AS(read_pfm(dir / "missing.pfm"), Error);
  fs::remove_all(dir);
}

TEST_CASE("PFM rows are stored bottom-up") {
  const fs::path dir = temp_dir();
  Raster r(1, 2, 1);
  r.at(0, 0) = 7.0;  // top row
  r.at(1, 0) = 3.0;  // bottom row
  write_pfm(dir / "rows.pfm", r);

  std::ifstream in(dir / "rows.pfm", std::ios::binary);
  std::string line;
  std::getline(in, line);  // Pf
  std::getline(in, line);  // dims
  std::getline(in, line);  // scale
  float first, second;
  in.read(reinterpret_cast<char*>(&first), 4);
  in.read(reinterpret_cast<char*>(&second), 4);
  CHECK(first == 3.0f);   // bottom row written first
  CHECK(second == 7.0f);
  fs::remove_all(dir);
}

TEST_CASE("PGM masks round-trip and reject non-binary values") {
  const fs::path dir = temp_dir();
  Mask m(3, 2);
  m.at(0, 1) = 1;
  m.at(1, 2) = 1;
  write_pgm(dir / "m.pgm", m);
  const Mask back = read_pgm(dir / "m.pgm");
  CHECK(back.data == m.data);
  CHECK(back.count() == 2);

  {
    std::ofstream out(dir / "gray.pgm", std::ios::binary);
    out << "P5\n2 1\n255\n";
    const unsigned char px[2] = {255, 128};  // 128 is neither valid nor invalid
    out.write(reinterpret_cast<const char*>(px), 2);
  }
  CHECK_THROWS_AS(read_pgm(dir / "gray.pgm"), Error);

  {
    std::ofstream out(dir / "max16.pgm", std::ios::binary);
    out << "P5\n1 1\n65535\n";
    out.write("\0\xff", 2);
  }
  CHECK_THROWS_AS(read_pgm(dir / "max16.pgm"), Error);
  fs::remove_all(dir);
}

TEST_CASE("meta JSON round-trips and rejects missing keys") {
  const fs::path dir = temp_dir();
  MapMeta meta;
  meta.width = 9;
  meta.height = 7;
  meta.depth_units = "m";
  meta.camera_scale = 1.25;
  write_map_meta(dir / "meta.json", meta);
  const MapMeta back = read_map_meta(dir / "meta.json");
  CHECK(back.width == 9);
  CHECK(back.height == 7);
  CHECK(back.depth_units == "m");
  CHECK(back.depth_sign == "larger_is_closer");
  CHECK(back.camera_scale == 1.25);

  {
    std::ofstream out(dir / "partial.json");
    out << "{\"width\": 4, \"height\": 4}";
  }
  CHECK_THROWS_AS(read_map_meta(dir / "partial.json"), Error);

  {
    std::ofstream out(dir / "broken.json");
    out << "{not json";
  }
  CHECK_THROWS_AS(read_map_meta(dir / "broken.json"), Error);
  fs::remove_all(dir);
}

TEST_CASE("map stack save/load round-trip preserves data and mask") {
  const fs::path dir = temp_dir();
  MapStack s = plane_stack();
  knock_out(s, 1, 2);
  save_map_stack(dir / "s", s);
  const MapStack back = load_map_stack(dir / "s");
  CHECK(back.mask.count() == 11);
  CHECK_FALSE(back.mask.at(1, 2));
  CHECK(back.depth.at(0, 0) == 10.0);
  CHECK(std::isnan(back.depth.at(1, 2)));
  CHECK(back.correspondence.at(2, 3, 1) == doctest::Approx(0.2).epsilon(1e-7));
  CHECK(back.meta.camera_scale == 0.5);
  fs::remove_all(dir);
}

TEST_CASE("map stack loads with an implied mask when the PGM is absent") {
  const fs::path dir = temp_dir();
  MapStack s = plane_stack();
  knock_out(s, 0, 0);
  save_map_stack(dir / "s", s);
  fs::remove(dir / "s.mask.pgm");
  const MapStack back = load_map_stack(dir / "s");
  CHECK(back.mask.count() == 11);
  CHECK_FALSE(back.mask.at(0, 0));
  fs::remove_all(dir);
}

TEST_CASE("meter depths are converted to millimeters on load") {
  const fs::path dir = temp_dir();
  MapStack s = plane_stack();
  // Express depth and camera z in meters.
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) {
      s.depth.at(r, c) = 0.01;
      s.xyz.at(r, c, 2) = 0.01;
    }
  s.meta.depth_units = "m";
  save_map_stack(dir / "s", s);
  const MapStack back = load_map_stack(dir / "s");
  CHECK(back.depth.at(1, 1) == doctest::Approx(10.0).epsilon(1e-6));
  CHECK(back.xyz.at(1, 1, 2) == doctest::Approx(10.0).epsilon(1e-6));
  CHECK(back.meta.depth_units == "mm");
  fs::remove_all(dir);
}

TEST_CASE("stack loading rejects inconsistent inputs") {
  const fs::path dir = temp_dir();

  SUBCASE("dimension mismatch between channels") {
    MapStack s = plane_stack();
    save_map_stack(dir / "s", s);
    Raster small(3, 3, 1, 10.0);
    write_pfm(dir / "s.depth.pfm", small);
    try {
      load_map_stack(dir / "s");
      FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DimensionMismatch);
    }
  }

  SUBCASE("meta disagreeing with raster dimensions") {
    MapStack s = plane_stack();
    save_map_stack(dir / "s", s);
    MapMeta meta = s.meta;
    meta.width = 5;
    write_map_meta(dir / "s.meta.json", meta);
    try {
      load_map_stack(dir / "s");
      FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DimensionMismatch);
    }
  }

  SUBCASE("mask claiming validity where depth is NaN") {
    MapStack s = plane_stack();
    s.depth.at(1, 1) = kNaN;  // mask still says valid there
    save_map_stack(dir / "s", s);
    try {
      load_map_stack(dir / "s");
      FAIL("expected MaskChannelConflict");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MaskChannelConflict);
    }
  }

  SUBCASE("intensity outside [0,1] on the mask") {
    MapStack s = plane_stack();
    s.intensity.at(0, 1) = 1.5;
    save_map_stack(dir / "s", s);
    try {
      load_map_stack(dir / "s");
      FAIL("expected ValidationError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ValidationError);
    }
  }

  SUBCASE("wrong channel count") {
    MapStack s = plane_stack();
    save_map_stack(dir / "s", s);
    Raster threech(4, 3, 3, 10.0);
    write_pfm(dir / "s.depth.pfm", threech);
    CHECK_THROWS_AS(load_map_stack(dir / "s"), Error);
  }

  fs::remove_all(dir);
}

TEST_CASE("off-mask pixels are canonicalized to NaN in all float channels") {
  const fs::path dir = temp_dir();
  MapStack s = plane_stack();
  s.mask.at(2, 2) = 0;  // leave the float channels finite there
  save_map_stack(dir / "s", s);
  const MapStack back = load_map_stack(dir / "s");
  CHECK(std::isnan(back.intensity.at(2, 2)));
  CHECK(std::isnan(back.depth.at(2, 2)));
  CHECK(std::isnan(back.xyz.at(2, 2, 1)));
  CHECK(std::isnan(back.correspondence.at(2, 2, 2)));
  fs::remove_all(dir);
}

// ---- depth_to_normals -----------------------------------------------------

TEST_CASE("normals of a constant-depth plane point along +z") {
  const Raster depth(6, 5, 1, 12.0);
  const Mask mask(6, 5, 1);
  const Raster n = depth_to_normals(depth, mask, 0.5);
  REQUIRE(n.channels == 3);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 6; ++c) {
      CHECK(n.at(r, c, 0) == doctest::Approx(0.0).epsilon(1e-15));
      CHECK(n.at(r, c, 1) == doctest::Approx(0.0).epsilon(1e-15));
      CHECK(n.at(r, c, 2) == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("normals of a linear ramp match the analytic slope") {
  // depth = 2x + 3y with x = col*s and y = -(row)*s (y up).
  const double s = 0.25;
  Raster depth(7, 7, 1);
  Mask mask(7, 7, 1);
  for (int r = 0; r < 7; ++r)
    for (int c = 0; c < 7; ++c) depth.at(r, c) = 2.0 * (c * s) + 3.0 * (-double(r) * s);

  const Raster n = depth_to_normals(depth, mask, s);
  const Vec3 expect = Vec3(-2.0, -3.0, 1.0).normalized();
  for (int r = 0; r < 7; ++r)
    for (int c = 0; c < 7; ++c) {
      // Borders use one-sided differences; a linear field makes them exact too.
      CHECK(n.at(r, c, 0) == doctest::Approx(expect.x()).epsilon(1e-12));
      CHECK(n.at(r, c, 1) == doctest::Approx(expect.y()).epsilon(1e-12));
      CHECK(n.at(r, c, 2) == doctest::Approx(expect.z()).epsilon(1e-12));
    }
}

TEST_CASE("normals are NaN off the mask and where an axis has no neighbor") {
  Raster depth(3, 3, 1, 5.0);
  Mask mask(3, 3, 0);
  // A single valid column: y-gradient exists, x-gradient has no neighbor.
  mask.at(0, 1) = mask.at(1, 1) = mask.at(2, 1) = 1;
  depth.at(0, 0) = kNaN;
  const Raster n = depth_to_normals(depth, mask, 1.0);
  CHECK(std::isnan(n.at(1, 0, 0)));        // off-mask
  CHECK(std::isnan(n.at(1, 1, 0)));        // on-mask but x-underdetermined
  // An isolated pixel has no neighbors at all.
  Mask lone(3, 3, 0);
  lone.at(1, 1) = 1;
  const Raster ln = depth_to_normals(depth, lone, 1.0);
  CHECK(std::isnan(ln.at(1, 1, 2)));
}

TEST_CASE("one-sided differences engage at mask borders") {
  // Two valid pixels in a row: both must use the same one-sided x-gradient.
  Raster depth(3, 1, 1, 0.0);
  Mask mask(3, 1, 0);
  mask.at(0, 0) = mask.at(0, 1) = 1;
  depth.at(0, 0) = 1.0;
  depth.at(0, 1) = 2.0;
  depth.at(0, 2) = kNaN;
  const Raster n = depth_to_normals(depth, mask, 1.0);
  // gx = 1 for both, gy undefined -> NaN? No: a 1-row mask has no y neighbors,
  // so everything is NaN along y and the normal is NaN.
  CHECK(std::isnan(n.at(0, 0, 0)));

  // Add a second row to give y neighbors.
  Raster d2(3, 2, 1, 0.0);
  Mask m2(3, 2, 0);
  m2.at(0, 0) = m2.at(0, 1) = m2.at(1, 0) = m2.at(1, 1) = 1;
  d2.at(0, 0) = 1.0;
  d2.at(0, 1) = 2.0;
  d2.at(1, 0) = 1.0;
  d2.at(1, 1) = 2.0;
  d2.at(0, 2) = d2.at(1, 2) = kNaN;
  const Raster n2 = depth_to_normals(d2, m2, 1.0);
  const Vec3 expect = Vec3(-1.0, 0.0, 1.0).normalized();
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      CHECK(n2.at(r, c, 0) == doctest::Approx(expect.x()).epsilon(1e-12));
      CHECK(n2.at(r, c, 2) == doctest::Approx(expect.z()).epsilon(1e-12));
    }
}

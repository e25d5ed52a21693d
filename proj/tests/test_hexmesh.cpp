#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"

using namespace hdivfwd;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("hdivfwd_hexmesh_" + name)).string();
}

CompartmentTable one_label() {
  CompartmentTable t;
  t.add(1, "a", 1.0);
  return t;
}

}  // namespace

TEST(HexMesh, SingleCellHasSixBoundaryFaces) {
  const auto m = oracle::box(1, 1, 1);
  EXPECT_EQ(m.element_count(), 1);
  EXPECT_EQ(m.face_count(), 6);
  EXPECT_EQ(m.interior_face_count(), 0);
  EXPECT_EQ(m.vertex_count(), 8);
}

TEST(HexMesh, TwoCellBarHasOneInteriorXFace) {
  const auto m = oracle::box(2, 1, 1);
  ASSERT_EQ(m.interior_face_count(), 1);
  // hand count: 2 end faces + 4 long sides of 2 cells each = 10 boundary faces
  EXPECT_EQ(m.boundary_face_count(), 10);
  EXPECT_EQ(m.face_count(), 11);
  for (const auto& f : m.faces())
    if (!f.boundary()) {
      EXPECT_EQ(f.axis, Axis::x);
      EXPECT_EQ(f.minus, 0);
      EXPECT_EQ(f.plus, 1);
    }
}

TEST(HexMesh, CubeOfThreeHas54InteriorFaces) {
  const auto m = oracle::box(3, 3, 3);
  EXPECT_EQ(m.interior_face_count(), 54);
  const auto c = oracle::count_faces(3, 3, 3, m.labels());
  EXPECT_EQ(c.interior, 54);
  EXPECT_EQ(c.boundary, m.boundary_face_count());
}

TEST(HexMesh, FaceCountsMatchBruteForceOnRandomMasks) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int nx = 2 + trial % 4, ny = 3, nz = 1 + trial % 3;
    std::vector<Label> labels(static_cast<std::size_t>(nx * ny * nz));
    for (auto& l : labels) l = static_cast<Label>(rng() % 3);
    if (std::all_of(labels.begin(), labels.end(), [](Label l) { return l == 0; })) labels[0] = 1;
    const HexMesh m({nx, ny, nz}, 1.5, {0, 0, 0}, labels);
    const auto c = oracle::count_faces(nx, ny, nz, labels);
    EXPECT_EQ(m.interior_face_count(), c.interior);
    EXPECT_EQ(m.boundary_face_count(), c.boundary);
    EXPECT_EQ(2 * m.interior_face_count() + m.boundary_face_count(), 6 * m.element_count());
    for (std::int32_t e = 0; e < m.element_count(); ++e) {
      const auto& ef = m.element_faces(e);
      for (int q = 0; q < 6; ++q) {
        const Face& f = m.face(ef[static_cast<std::size_t>(q)]);
        EXPECT_EQ(static_cast<int>(f.axis), q / 2);
        EXPECT_EQ(q % 2 == 0 ? f.plus : f.minus, e);
      }
    }
  }
}

TEST(HexMesh, FaceOrderingIsByAxisThenLattice) {
  const auto m = oracle::box(3, 2, 2);
  for (std::int32_t f = 1; f < m.face_count(); ++f) {
    const auto& a = m.face(f - 1);
    const auto& b = m.face(f);
    const auto key = [&](const Face& x) {
      return std::make_tuple(static_cast<int>(x.axis), x.lattice[2], x.lattice[1], x.lattice[0]);
    };
    EXPECT_LT(key(a), key(b));
  }
}

TEST(HexMesh, LocateAssignsBoundaryPointsToLowerCell) {
  const auto m = oracle::box(2, 1, 1, 2.0);
  EXPECT_EQ(m.locate_element({2.0, 1.0, 1.0}), 0);
  EXPECT_EQ(m.locate_element({2.0001, 1.0, 1.0}), 1);
  EXPECT_THROW(m.locate_element({-1.0, 1.0, 1.0}), PlacementError);
}

TEST(HexMesh, SingleLayerSphereLabelsByCentroid) {
  SphereSpec s;
  const double h = 1.0;
  s.radii = {4.0 * h};
  s.labels = {1};
  s.spacing = h;
  s.dims = {12, 12, 12};
  s.center = Vec3{6.0, 6.0, 6.0};
  const auto m = generate_sphere_mesh(s);
  for (std::int32_t c = 0; c < 12 * 12 * 12; ++c) {
    const auto ijk = m.cell_coords(c);
    const Vec3 x{ijk[0] + 0.5, ijk[1] + 0.5, ijk[2] + 0.5};
    const bool inside = norm(x - Vec3{6, 6, 6}) <= 4.0;
    EXPECT_EQ(m.cell_label(c), inside ? 1 : 0);
  }
}

TEST(HexMesh, SphereSpecValidation) {
  auto s = SphereSpec::four_layer(2.0);
  s.radii = {80, 78, 86, 92};
  EXPECT_THROW(generate_sphere_mesh(s), ValidationError);
  s = SphereSpec::four_layer(2.0);
  s.dims = {40, 40, 40};
  EXPECT_THROW(generate_sphere_mesh(s), DimensionError);
  s = SphereSpec::four_layer(2.0);
  EXPECT_THROW(generate_leaky_sphere(s, 79.0), ValidationError);
  EXPECT_THROW(generate_leaky_sphere(s, 93.0), ValidationError);
}

TEST(HexMesh, SphereLabelingHasCubeSymmetry) {
  auto s = SphereSpec::four_layer(4.0);
  const auto m = generate_sphere_mesh(s);
  const auto& d = m.dims();
  ASSERT_EQ(d[0], d[1]);
  ASSERT_EQ(d[1], d[2]);
  const int n = d[0];
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const auto l = m.cell_label(m.cell_index(i, j, k));
        ASSERT_EQ(l, m.cell_label(m.cell_index(n - 1 - i, j, k)));
        ASSERT_EQ(l, m.cell_label(m.cell_index(j, i, k)));
        ASSERT_EQ(l, m.cell_label(m.cell_index(k, j, i)));
      }
}

TEST(HexMesh, GenerationIsDeterministic) {
  const auto a = generate_sphere_mesh(SphereSpec::four_layer(4.0));
  const auto b = generate_sphere_mesh(SphereSpec::four_layer(4.0));
  EXPECT_EQ(a.labels(), b.labels());
  EXPECT_EQ(a.element_count(), b.element_count());
}

// Published model sizes. The 2 mm element count appears in the text as
// 407,904 and in the table as 407,907; the face count settles it.
TEST(HexMesh, FourLayerSphereAt2mmMatchesPublishedSize) {
  const auto m = generate_sphere_mesh(SphereSpec::four_layer(2.0));
  EXPECT_EQ(m.element_count(), 407904);
  EXPECT_EQ(m.face_count(), 1243716);
  EXPECT_EQ(m.vertex_count(), 428185);
}

TEST(HexMesh, FourLayerSphereAt1mmMatchesPublishedSize) {
  const auto m = generate_sphere_mesh(SphereSpec::four_layer(1.0));
  EXPECT_EQ(m.element_count(), 3262312);
  EXPECT_EQ(m.face_count(), 9866772);
}

TEST(HexMesh, LeakySpheresMatchPublishedLeakCounts) {
  const auto s = SphereSpec::four_layer(2.0);
  EXPECT_EQ(count_leaks(generate_leaky_sphere(s, 82.0), 2, 4), 10080);
  EXPECT_EQ(count_leaks(generate_leaky_sphere(s, 83.0), 2, 4), 1344);
  EXPECT_EQ(count_leaks(generate_leaky_sphere(s, 84.0), 2, 4), 0);
}

TEST(HexMesh, CountLeaksOnTwoCells) {
  const auto m = oracle::box(2, 1, 1, 1.0, [](int i, int, int) { return static_cast<Label>(i == 0 ? 2 : 4); });
  EXPECT_EQ(count_leaks(m, 2, 4), 4);
  EXPECT_EQ(count_leaks(m, 4, 2), 4);
  EXPECT_THROW(count_leaks(m, 2, 3), ValidationError);
  const auto sep = oracle::box(3, 1, 1, 1.0, [](int i, int, int) { return static_cast<Label>(i == 0 ? 2 : i == 1 ? 3 : 4); });
  EXPECT_EQ(count_leaks(sep, 2, 4), 0);
}

TEST(HexMesh, LeakCountIsSymmetric) {
  const auto m = generate_leaky_sphere(SphereSpec::four_layer(4.0), 82.0);
  EXPECT_EQ(count_leaks(m, 2, 4), count_leaks(m, 4, 2));
}

TEST(HexMesh, VoxelFileRoundTrip) {
  const auto m = generate_sphere_mesh(SphereSpec::four_layer(8.0));
  const auto path = temp_path("rt.hxm");
  save_labeled_voxels(path, m);
  const auto back = load_labeled_voxels(path, CompartmentTable::four_layer_sphere());
  EXPECT_EQ(back.labels(), m.labels());
  EXPECT_EQ(back.dims(), m.dims());
  EXPECT_EQ(back.spacing(), m.spacing());
  EXPECT_EQ(back.origin(), m.origin());
  std::remove(path.c_str());
}

TEST(HexMesh, VoxelFileTwoByOneByOne) {
  const auto path = temp_path("bar.hxm");
  {
    std::ofstream out(path, std::ios::binary);
    out << "HXM1 2 1 1 1 0 0 0\n";
    out.put(1).put(1);
  }
  const auto m = load_labeled_voxels(path, one_label());
  EXPECT_EQ(m.element_count(), 2);
  EXPECT_EQ(m.face_count(), 11);
  EXPECT_EQ(load_labeled_voxels(path, one_label(), 3.0).spacing(), 3.0);
  std::remove(path.c_str());
}

TEST(HexMesh, VoxelFileErrors) {
  const auto path = temp_path("bad.hxm");
  auto write = [&](const std::string& header, std::vector<char> payload) {
    std::ofstream out(path, std::ios::binary);
    out << header;
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  };
  write("HXM1 2 1 1 1 0 0 0\n", {0, 0});
  EXPECT_THROW(load_labeled_voxels(path, one_label()), EmptyDomainError);
  write("HXM1 2 1 1 1 0 0 0\n", {1});
  EXPECT_THROW(load_labeled_voxels(path, one_label()), ValidationError);
  write("HXM1 2 1 1 1 0 0 0\n", {1, 7});
  EXPECT_THROW(load_labeled_voxels(path, one_label()), ValidationError);
  write("HXM2 2 1 1 1 0 0 0\n", {1, 1});
  EXPECT_THROW(load_labeled_voxels(path, one_label()), ValidationError);
  write("HXM1 2 1 1\n", {1, 1});
  EXPECT_THROW(load_labeled_voxels(path, one_label()), ValidationError);
  std::remove(path.c_str());
  EXPECT_THROW(load_labeled_voxels(path, one_label()), ValidationError);
}

TEST(HexMesh, ConstructionRejectsBadInput) {
  EXPECT_THROW(HexMesh({1, 1, 1}, 0.0, {0, 0, 0}, {1}), ValidationError);
  EXPECT_THROW(HexMesh({2, 1, 1}, 1.0, {0, 0, 0}, {1}), ValidationError);
  EXPECT_THROW(HexMesh({1, 1, 1}, 1.0, {0, 0, 0}, {0}), EmptyDomainError);
}

TEST(CompartmentTable, RejectsBadEntries) {
  CompartmentTable t;
  EXPECT_THROW(t.add(1, "a", 0.0), ValidationError);
  EXPECT_THROW(t.add(0, "air", 1.0), ValidationError);
  t.add(1, "a", 1.0);
  EXPECT_THROW(t.add(1, "b", 2.0), ValidationError);
  EXPECT_THROW(t.sigma(2), ValidationError);
}

#pragma once

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace ctmhd {

using Vec3 = Eigen::Vector3d;

struct Box {
  Vec3 lo{0.0, 0.0, 0.0};
  Vec3 hi{1.0, 1.0, 1.0};
};

/// Triangular face. Vertex indices are stored in ascending global order;
/// the unit normal points outward on boundary faces and from tet_plus to
/// tet_minus on interior faces.
struct Face {
  std::array<int, 3> v{};
  int tet_plus = -1;
  int tet_minus = -1;  ///< -1 on boundary faces
  Vec3 normal = Vec3::Zero();
  double area = 0.0;
  double diameter = 0.0;  ///< h_F, the longest side
  bool on_boundary() const { return tet_minus < 0; }
};

/// Edge with vertices in ascending global order; unit tangent points from
/// the lower-index vertex to the higher-index one.
struct Edge {
  std::array<int, 2> v{};
  Vec3 tangent = Vec3::Zero();
  double length = 0.0;
  bool on_boundary = false;
};

/// Tetrahedral mesh of a box with globally oriented faces and edges.
/// Immutable after construction.
struct TetMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> tets;  ///< positively oriented
  std::vector<Face> faces;
  std::vector<Edge> edges;

  /// tet_faces[t][i] is the global face opposite local vertex i.
  std::vector<std::array<int, 4>> tet_faces;
  /// tet_face_sign[t][i] = +1 if faces[tet_faces[t][i]].normal is outward
  /// for tet t, else -1.
  std::vector<std::array<int, 4>> tet_face_sign;
  /// tet_edges[t][k] for local edges (0,1),(0,2),(0,3),(1,2),(1,3),(2,3).
  std::vector<std::array<int, 6>> tet_edges;

  std::vector<bool> vertex_on_boundary;
  std::vector<double> tet_volume;
  std::vector<double> tet_diameter;
  double h = 0.0;  ///< max tet diameter

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_tets() const { return static_cast<int>(tets.size()); }
  int n_faces() const { return static_cast<int>(faces.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }

  Vec3 tet_centroid(int t) const;
  /// Vertices of face i of tet t (the face opposite local vertex i),
  /// as stored in the global face record.
  const Face& face_of(int t, int i) const { return faces[tet_faces[t][i]]; }

  /// V - E + F - T; equals 1 for a mesh of a box.
  long euler_characteristic() const {
    return static_cast<long>(n_vertices()) - n_edges() + n_faces() - n_tets();
  }
};

/// Kuhn (6-tet-per-cube) subdivision of an axis-aligned box, n cells per
/// axis. For the unit cube h = sqrt(3)/n.
TetMesh build_box_mesh(const Box& box, int n);

/// Red refinement: every tet is split into 8 children through its edge
/// midpoints; h is halved exactly and boundary markers are preserved.
TetMesh refine_uniform(const TetMesh& mesh);

/// Rebuild the face/edge/adjacency tables of a mesh given only vertices and
/// tets. Deterministic: entities are ordered lexicographically by their
/// sorted vertex indices. Called by the mesh builders.
void build_entity_tables(TetMesh& mesh);

}  // namespace ctmhd

#include "ctmhd/mesh.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace ctmhd {

Vec3 TetMesh::tet_centroid(int t) const {
  const auto& tv = tets[t];
  return 0.25 * (vertices[tv[0]] + vertices[tv[1]] + vertices[tv[2]] + vertices[tv[3]]);
}

namespace {

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).cross(c - a).dot(d - a) / 6.0;
}

// Local faces: face i is opposite vertex i.
constexpr int kLocalFace[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
constexpr int kLocalEdge[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};

}  // namespace

void build_entity_tables(TetMesh& mesh) {
  const int nt = mesh.n_tets();
  mesh.tet_volume.assign(nt, 0.0);
  mesh.tet_diameter.assign(nt, 0.0);
  mesh.h = 0.0;

  for (int t = 0; t < nt; ++t) {
    auto& tv = mesh.tets[t];
    double vol = signed_volume(mesh.vertices[tv[0]], mesh.vertices[tv[1]],
                               mesh.vertices[tv[2]], mesh.vertices[tv[3]]);
    if (vol < 0.0) {
      std::swap(tv[2], tv[3]);
      vol = -vol;
    }
    if (!(vol > 0.0)) throw std::runtime_error("mesh: degenerate tet");
    mesh.tet_volume[t] = vol;
    double diam = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        diam = std::max(diam, (mesh.vertices[tv[a]] - mesh.vertices[tv[b]]).norm());
    mesh.tet_diameter[t] = diam;
    mesh.h = std::max(mesh.h, diam);
  }

  // Edges, lexicographic by sorted vertex pair.
  std::map<std::array<int, 2>, int> edge_id;
  for (const auto& tv : mesh.tets) {
    for (const auto& le : kLocalEdge) {
      std::array<int, 2> key{tv[le[0]], tv[le[1]]};
      if (key[0] > key[1]) std::swap(key[0], key[1]);
      edge_id.emplace(key, 0);
    }
  }
  mesh.edges.clear();
  mesh.edges.reserve(edge_id.size());
  for (auto& [key, id] : edge_id) {
    id = static_cast<int>(mesh.edges.size());
    Edge e;
    e.v = key;
    Vec3 d = mesh.vertices[key[1]] - mesh.vertices[key[0]];
    e.length = d.norm();
    e.tangent = d / e.length;
    mesh.edges.push_back(e);
  }
  mesh.tet_edges.assign(nt, {});
  for (int t = 0; t < nt; ++t) {
    for (int k = 0; k < 6; ++k) {
      std::array<int, 2> key{mesh.tets[t][kLocalEdge[k][0]], mesh.tets[t][kLocalEdge[k][1]]};
      if (key[0] > key[1]) std::swap(key[0], key[1]);
      mesh.tet_edges[t][k] = edge_id.at(key);
    }
  }

  // Faces, lexicographic by sorted vertex triple.
  std::map<std::array<int, 3>, int> face_id;
  for (const auto& tv : mesh.tets) {
    for (const auto& lf : kLocalFace) {
      std::array<int, 3> key{tv[lf[0]], tv[lf[1]], tv[lf[2]]};
      std::sort(key.begin(), key.end());
      face_id.emplace(key, 0);
    }
  }
  mesh.faces.clear();
  mesh.faces.reserve(face_id.size());
  for (auto& [key, id] : face_id) {
    id = static_cast<int>(mesh.faces.size());
    Face f;
    f.v = key;
    const Vec3 &a = mesh.vertices[key[0]], &b = mesh.vertices[key[1]], &c = mesh.vertices[key[2]];
    Vec3 cr = (b - a).cross(c - a);
    f.area = 0.5 * cr.norm();
    f.normal = cr.normalized();
    f.diameter = std::max({(b - a).norm(), (c - a).norm(), (c - b).norm()});
    mesh.faces.push_back(f);
  }

  mesh.tet_faces.assign(nt, {});
  for (int t = 0; t < nt; ++t) {
    for (int i = 0; i < 4; ++i) {
      std::array<int, 3> key{mesh.tets[t][kLocalFace[i][0]], mesh.tets[t][kLocalFace[i][1]],
                             mesh.tets[t][kLocalFace[i][2]]};
      std::sort(key.begin(), key.end());
      int fid = face_id.at(key);
      mesh.tet_faces[t][i] = fid;
      Face& f = mesh.faces[fid];
      if (f.tet_plus < 0)
        f.tet_plus = t;
      else if (f.tet_minus < 0)
        f.tet_minus = t;
      else
        throw std::runtime_error("mesh: face shared by more than two tets");
    }
  }

  // Orient normals: outward on the boundary, K+ -> K- in the interior
  // (K+ is the tet the normal points away from).
  for (Face& f : mesh.faces) {
    Vec3 fc = (mesh.vertices[f.v[0]] + mesh.vertices[f.v[1]] + mesh.vertices[f.v[2]]) / 3.0;
    if (f.on_boundary()) {
      if (f.normal.dot(mesh.tet_centroid(f.tet_plus) - fc) > 0.0) f.normal = -f.normal;
    } else {
      if (f.normal.dot(mesh.tet_centroid(f.tet_plus) - fc) > 0.0)
        std::swap(f.tet_plus, f.tet_minus);
    }
  }

  mesh.tet_face_sign.assign(nt, {});
  for (int t = 0; t < nt; ++t) {
    for (int i = 0; i < 4; ++i) {
      const Face& f = mesh.faces[mesh.tet_faces[t][i]];
      Vec3 fc = (mesh.vertices[f.v[0]] + mesh.vertices[f.v[1]] + mesh.vertices[f.v[2]]) / 3.0;
      mesh.tet_face_sign[t][i] = f.normal.dot(fc - mesh.tet_centroid(t)) > 0.0 ? 1 : -1;
    }
  }

  // Boundary markers for edges and vertices.
  mesh.vertex_on_boundary.assign(mesh.n_vertices(), false);
  std::map<std::array<int, 2>, int>::const_iterator it;
  for (const Face& f : mesh.faces) {
    if (!f.on_boundary()) continue;
    for (int a = 0; a < 3; ++a) {
      mesh.vertex_on_boundary[f.v[a]] = true;
      for (int b = a + 1; b < 3; ++b) {
        std::array<int, 2> key{f.v[a], f.v[b]};
        it = edge_id.find(key);
        if (it != edge_id.end()) mesh.edges[it->second].on_boundary = true;
      }
    }
  }
}

TetMesh build_box_mesh(const Box& box, int n) {
  if (n < 1) throw std::invalid_argument("build_box_mesh: n must be >= 1");
  Vec3 ext = box.hi - box.lo;
  if (!(ext.x() > 0.0 && ext.y() > 0.0 && ext.z() > 0.0))
    throw std::invalid_argument("build_box_mesh: degenerate box");

  TetMesh mesh;
  const int m = n + 1;
  auto vid = [m](int i, int j, int k) { return i + m * (j + m * k); };
  mesh.vertices.resize(static_cast<size_t>(m) * m * m);
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i)
        mesh.vertices[vid(i, j, k)] =
            box.lo + Vec3(ext.x() * i / n, ext.y() * j / n, ext.z() * k / n);

  // Kuhn subdivision: the 6 tets of each cell follow the monotone lattice
  // paths from corner (i,j,k) to corner (i+1,j+1,k+1), one per axis
  // permutation. Path order coincides with ascending global index.
  constexpr int kPerm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  mesh.tets.reserve(static_cast<size_t>(6) * n * n * n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        for (const auto& p : kPerm) {
          std::array<int, 3> c{i, j, k};
          std::array<int, 4> tv;
          tv[0] = vid(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            c[p[s]] += 1;
            tv[s + 1] = vid(c[0], c[1], c[2]);
          }
          mesh.tets.push_back(tv);
        }

  build_entity_tables(mesh);
  return mesh;
}

TetMesh refine_uniform(const TetMesh& mesh) {
  TetMesh fine;
  fine.vertices = mesh.vertices;
  fine.vertices.reserve(mesh.vertices.size() + mesh.edges.size());
  const int nv = mesh.n_vertices();
  for (const Edge& e : mesh.edges)
    fine.vertices.push_back(0.5 * (mesh.vertices[e.v[0]] + mesh.vertices[e.v[1]]));

  // Bey's rule on ascending-index vertex order: 4 corner children plus the
  // octahedron split along the (m02, m13) diagonal. For Kuhn meshes this is
  // self-similar, so h halves exactly.
  std::map<std::array<int, 2>, int> edge_id;
  for (int e = 0; e < mesh.n_edges(); ++e) edge_id[mesh.edges[e].v] = nv + e;
  auto mid = [&](int a, int b) {
    return edge_id.at(a < b ? std::array<int, 2>{a, b} : std::array<int, 2>{b, a});
  };

  constexpr int kChild[8][4][2] = {
      {{0, 0}, {0, 1}, {0, 2}, {0, 3}}, {{0, 1}, {1, 1}, {1, 2}, {1, 3}},
      {{0, 2}, {1, 2}, {2, 2}, {2, 3}}, {{0, 3}, {1, 3}, {2, 3}, {3, 3}},
      {{0, 1}, {0, 2}, {0, 3}, {1, 3}}, {{0, 1}, {0, 2}, {1, 2}, {1, 3}},
      {{0, 2}, {0, 3}, {1, 3}, {2, 3}}, {{0, 2}, {1, 2}, {1, 3}, {2, 3}}};

  fine.tets.reserve(8 * mesh.tets.size());
  for (const auto& tv : mesh.tets) {
    std::array<int, 4> w = tv;
    std::sort(w.begin(), w.end());
    for (const auto& child : kChild) {
      std::array<int, 4> cv;
      for (int s = 0; s < 4; ++s) {
        int a = child[s][0], b = child[s][1];
        cv[s] = (a == b) ? w[a] : mid(w[a], w[b]);
      }
      fine.tets.push_back(cv);
    }
  }

  build_entity_tables(fine);
  return fine;
}

}  // namespace ctmhd

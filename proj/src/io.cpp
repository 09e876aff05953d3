#include "ctmhd/io.hpp"

#include "ctmhd/parallel.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace ctmhd {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(17);
  return out;
}

void vtk_header(std::ofstream& out, const TetMesh& mesh) {
  out << "# vtk DataFile Version 3.0\nctmhd fields\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.n_vertices() << " double\n";
  for (const Vec3& v : mesh.vertices) out << v.x() << " " << v.y() << " " << v.z() << "\n";
  out << "CELLS " << mesh.n_tets() << " " << 5 * mesh.n_tets() << "\n";
  for (const auto& t : mesh.tets)
    out << "4 " << t[0] << " " << t[1] << " " << t[2] << " " << t[3] << "\n";
  out << "CELL_TYPES " << mesh.n_tets() << "\n";
  for (int t = 0; t < mesh.n_tets(); ++t) out << "10\n";
}

}  // namespace

void write_vtk(const std::string& path, const TetMesh& mesh) {
  auto out = open_out(path);
  vtk_header(out, mesh);
}

void write_vtk(const std::string& path, const MhdProblem& prob, const State& state) {
  const TetMesh& mesh = prob.mesh();
  auto out = open_out(path);
  vtk_header(out, mesh);

  const Eigen::Vector4d center(0.25, 0.25, 0.25, 0.25);
  const FeSpace& Vh = prob.space(SpaceKind::Vh);
  const FeSpace& Wh = prob.space(SpaceKind::Wh);
  const FeSpace& Dh = prob.space(SpaceKind::Dh);

  out << "CELL_DATA " << mesh.n_tets() << "\n";
  auto vectors = [&](const char* name, auto&& eval) {
    out << "VECTORS " << name << " double\n";
    for (int t = 0; t < mesh.n_tets(); ++t) {
      Vec3 v = eval(t);
      out << v.x() << " " << v.y() << " " << v.z() << "\n";
    }
  };
  vectors("u", [&](int t) { return Vh.eval_vector(t, center, state.xu); });
  vectors("H", [&](int t) { return Wh.eval_vector(t, center, state.xH); });
  vectors("B", [&](int t) { return Dh.eval_curl(t, state.xA); });
  vectors("J", [&](int t) { return Wh.eval_curl(t, state.xH); });
  out << "SCALARS p double 1\nLOOKUP_TABLE default\n";
  for (int t = 0; t < mesh.n_tets(); ++t) out << state.xp(t) << "\n";
}

void write_matrix_market(const std::string& path, const SpMat& m) {
  auto out = open_out(path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.rows() << " " << m.cols() << " " << m.nonZeros() << "\n";
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it)
      out << it.row() + 1 << " " << it.col() + 1 << " " << it.value() << "\n";
}

void write_matrix_market(const std::string& path, const Eigen::VectorXd& v) {
  auto out = open_out(path);
  out << "%%MatrixMarket matrix array real general\n";
  out << v.size() << " 1\n";
  for (long i = 0; i < v.size(); ++i) out << v(i) << "\n";
}

SpMat read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  do {
    if (!std::getline(in, line)) throw std::runtime_error("bad MatrixMarket file " + path);
  } while (!line.empty() && line[0] == '%');
  std::istringstream hdr(line);
  long rows, cols, nnz;
  hdr >> rows >> cols >> nnz;
  TripletVec t;
  t.reserve(nnz);
  for (long k = 0; k < nnz; ++k) {
    long i, j;
    double v;
    in >> i >> j >> v;
    t.emplace_back(i - 1, j - 1, v);
  }
  SpMat m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

Eigen::VectorXd read_matrix_market_vector(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  do {
    if (!std::getline(in, line)) throw std::runtime_error("bad MatrixMarket file " + path);
  } while (!line.empty() && line[0] == '%');
  std::istringstream hdr(line);
  long rows, cols;
  hdr >> rows >> cols;
  Eigen::VectorXd v(rows);
  for (long i = 0; i < rows; ++i) in >> v(i);
  return v;
}

void write_state_json(const std::string& path, const MhdProblem& prob, const State& state,
                      const std::string& mesh_id) {
  nlohmann::json j;
  j["mesh"] = mesh_id;
  j["params"] = {{"Re", prob.params().Re},
                 {"Rm", prob.params().Rm},
                 {"kappa", prob.params().kappa},
                 {"gamma", prob.params().gamma},
                 {"alpha", prob.params().alpha}};
  auto seg = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  j["spaces"] = {{"A", "Dh"}, {"phi", "Yh"}, {"H", "Wh"}, {"r", "Sh"}, {"u", "Vh"}, {"p", "Qh"}};
  j["x_A"] = seg(state.xA);
  j["x_phi"] = seg(state.xphi);
  j["x_H"] = seg(state.xH);
  j["x_r"] = seg(state.xr);
  j["x_u"] = seg(state.xu);
  j["x_p"] = seg(state.xp);
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

}  // namespace ctmhd

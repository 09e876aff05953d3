#pragma once

#include "ctmhd/driver.hpp"

#include <string>

namespace ctmhd {

/// Legacy ASCII VTK unstructured grid: mesh plus, when a state is given,
/// cell-centered u, p, H, B = curl A and J = curl H.
void write_vtk(const std::string& path, const TetMesh& mesh);
void write_vtk(const std::string& path, const MhdProblem& prob, const State& state);

/// Matrix Market exchange: coordinate format for sparse matrices, array
/// format for vectors.
void write_matrix_market(const std::string& path, const SpMat& m);
void write_matrix_market(const std::string& path, const Eigen::VectorXd& v);
SpMat read_matrix_market(const std::string& path);
Eigen::VectorXd read_matrix_market_vector(const std::string& path);

/// Raw coefficient arrays with a JSON header (space kinds, mesh id, params).
void write_state_json(const std::string& path, const MhdProblem& prob, const State& state,
                      const std::string& mesh_id);

}  // namespace ctmhd

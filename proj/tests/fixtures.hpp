#ifndef ROAMTOK_TESTS_FIXTURES_HPP
#define ROAMTOK_TESTS_FIXTURES_HPP

#include <string>
#include <vector>

#include "roamtok/config.hpp"
#include "roamtok/graph_process.hpp"
#include "roamtok/observation_model.hpp"

namespace roamtok::testing {

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = static_cast<Eigen::Index>(rows.begin()->size());
  Matrix m(r, c);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

/// Scalar agents y_i = h_iᵀθ + w_i with the given rows and variances.
inline GlobalModel scalar_model(const std::vector<std::vector<double>>& rows,
                                const std::vector<double>& var, const Vector& theta,
                                NoiseKind noise = NoiseKind::Gaussian) {
  std::vector<AgentModel> agents;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Matrix h(1, static_cast<Eigen::Index>(rows[i].size()));
    for (std::size_t j = 0; j < rows[i].size(); ++j) h(0, static_cast<Eigen::Index>(j)) = rows[i][j];
    agents.emplace_back(i, h, mat({{var[i]}}));
  }
  return GlobalModel(std::move(agents), theta, noise);
}

inline GlobalModel ref5_model(NoiseKind noise = NoiseKind::Gaussian) {
  return scalar_model({{1, 0}, {0, 1}, {1, 1}, {1, -1}, {2, 1}}, {1.0, 0.5, 2.0, 1.0, 1.5},
                      vec({1.0, -0.5}), noise);
}

inline Adjacency ref5_static_graph() {
  return Adjacency::from_rows({{0, 1, 1, 0, 0},
                               {0, 0, 1, 0, 0},
                               {0, 0, 0, 1, 1},
                               {0, 1, 0, 0, 1},
                               {1, 0, 0, 0, 0}});
}

inline Adjacency directed_cycle(std::size_t n) {
  Adjacency a(n);
  for (std::size_t i = 0; i < n; ++i) a.set(i, (i + 1) % n, true);
  return a;
}

inline std::string config_path(const std::string& name) {
  return std::string(ROAMTOK_CONFIG_DIR) + "/" + name;
}

inline RunSetup load_reference(const std::string& name) {
  return build_run_setup(load_config_file(config_path(name)), ROAMTOK_CONFIG_DIR);
}

}  // namespace roamtok::testing

#endif  // ROAMTOK_TESTS_FIXTURES_HPP

#pragma once

#include <cstdint>
#include <string>

#include "ntklab/linalg.hpp"
#include "ntklab/network.hpp"
#include "ntklab/rng.hpp"
#include "oracles.hpp"

namespace testutil {

inline ntklab::Mat random_mat(std::size_t r, std::size_t c, std::uint64_t seed) {
  ntklab::CounterRng rng(seed);
  ntklab::Mat m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

inline ntklab::Vec random_vec(std::size_t n, std::uint64_t seed) {
  ntklab::CounterRng rng(seed);
  ntklab::Vec v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

inline oracle::Dense to_dense(const ntklab::Mat& m) {
  oracle::Dense d(m.rows(), oracle::Vec(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) d[i][j] = m(i, j);
  return d;
}

inline oracle::Net to_oracle(const ntklab::Params& p) {
  oracle::Net net;
  for (const auto& w : p.weights) net.weights.push_back(to_dense(w));
  net.activation = ntklab::to_string(p.activation);
  return net;
}

inline double rel_frobenius(const ntklab::Mat& a, const ntklab::Mat& b) {
  return ntklab::frobenius_norm(ntklab::subtract(a, b)) /
         std::max(ntklab::frobenius_norm(b), 1e-300);
}

inline ntklab::NetConfig cfg3(std::size_t d, std::size_t n1, std::size_t n2,
                              ntklab::Activation a = ntklab::Activation::sigmoid) {
  ntklab::NetConfig c;
  c.widths = {d, n1, n2};
  c.activation = a;
  return c;
}

}  // namespace testutil

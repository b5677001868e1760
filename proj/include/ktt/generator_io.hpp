#pragma once

// Serialized TT generator.
//
//   magic      4 bytes  "KGN1"
//   meta_len   u64
//   meta       JSON text: dim, degree, ts, eps, eigenvalues [[re, im], ...]
//   basis      TT container holding U_X
//   xi_tail    u64 rows, u64 cols, complex f64 column-major
//   xi_plus    same layout
//
// Reading reassembles the order-2d operator from the stored factors.

#include <array>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "ktt/errors.hpp"
#include "ktt/generator_tt.hpp"
#include "ktt/tt_io.hpp"

namespace ktt {

inline constexpr std::array<char, 4> kGeneratorMagic{'K', 'G', 'N', '1'};

struct GeneratorMeta {
  std::size_t dim = 0;
  std::size_t degree = 0;
  double ts = 0.0;
  double eps = 0.0;
};

namespace detail {

inline void write_cmatrix(std::ostream& os, const Eigen::MatrixXcd& m) {
  write_u64(os, static_cast<std::uint64_t>(m.rows()));
  write_u64(os, static_cast<std::uint64_t>(m.cols()));
  os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(cplx)));
}

inline Eigen::MatrixXcd read_cmatrix(std::istream& is) {
  const std::uint64_t rows = read_u64(is), cols = read_u64(is);
  if (rows > (1u << 20) || cols > (1u << 20)) throw ValidationError("implausible tail matrix shape");
  Eigen::MatrixXcd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  if (!is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(cplx)))) {
    throw ValidationError("truncated generator file");
  }
  return m;
}

}  // namespace detail

inline void write_generator(std::ostream& os, const GeneratorTT& g, double eps) {
  nlohmann::json meta;
  meta["dim"] = g.dict.dim();
  meta["degree"] = g.dict.degree();
  meta["ts"] = g.ts;
  meta["eps"] = eps;
  auto& ev = meta["eigenvalues"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < g.lambdas.size(); ++i) ev.push_back({g.lambdas(i).real(), g.lambdas(i).imag()});
  const std::string text = meta.dump();
  os.write(kGeneratorMagic.data(), kGeneratorMagic.size());
  detail::write_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_tt(os, g.basis);
  detail::write_cmatrix(os, g.xi_tail);
  detail::write_cmatrix(os, g.xi_plus_tail);
  if (!os) throw Error("failed to write generator");
}

inline GeneratorTT read_generator(std::istream& is, GeneratorMeta* meta_out = nullptr) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kGeneratorMagic) {
    throw ValidationError("not a generator file (bad magic)");
  }
  const std::uint64_t len = detail::read_u64(is);
  if (len > (1u << 30)) throw ValidationError("implausible metadata length");
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw ValidationError("truncated generator file");

  GeneratorMeta meta;
  GeneratorTT g;
  try {
    const auto j = nlohmann::json::parse(text);
    meta.dim = j.at("dim").get<std::size_t>();
    meta.degree = j.at("degree").get<std::size_t>();
    meta.ts = j.at("ts").get<double>();
    meta.eps = j.at("eps").get<double>();
    const auto& ev = j.at("eigenvalues");
    g.lambdas.resize(static_cast<Eigen::Index>(ev.size()));
    for (std::size_t i = 0; i < ev.size(); ++i)
      g.lambdas(static_cast<Eigen::Index>(i)) = cplx(ev[i].at(0).get<double>(), ev[i].at(1).get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad generator metadata: ") + e.what());
  }

  g.dict = MonomialDictionary(meta.dim, meta.degree);
  g.ts = meta.ts;
  g.basis = read_tt<double>(is);
  g.xi_tail = detail::read_cmatrix(is);
  g.xi_plus_tail = detail::read_cmatrix(is);
  if (g.basis.order() != meta.dim || g.xi_tail.cols() != g.lambdas.size() ||
      g.xi_plus_tail.rows() != g.lambdas.size()) {
    throw ValidationError("generator file parts are inconsistent");
  }
  g.mu = generator_eigenvalues(g.lambdas, g.ts, &g.warnings);
  g.pinv_rank = static_cast<std::size_t>(g.lambdas.size());
  g.assembled = assemble_operator(g.basis, g.xi_tail, g.mu.asDiagonal() * g.xi_plus_tail);
  g.element_count = g.assembled->element_count();
  if (meta_out) *meta_out = meta;
  return g;
}

inline void save_generator(const std::string& path, const GeneratorTT& g, double eps) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open " + path + " for writing");
  write_generator(os, g, eps);
}

inline GeneratorTT load_generator(const std::string& path, GeneratorMeta* meta = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path);
  return read_generator(is, meta);
}

}  // namespace ktt

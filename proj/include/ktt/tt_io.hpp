#pragma once

// Binary TT container.
//
//   magic      4 bytes  "KTT1"
//   d          u64
//   n_1..n_d   u64 each
//   r_0..r_d   u64 each
//   field      u8       0 = real, 1 = complex
//   cores      core 1 .. core d in storage order, f64 each (re, im pairs for complex)
//
// All multi-byte values are little-endian.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "ktt/errors.hpp"
#include "ktt/tt_tensor.hpp"

namespace ktt {

static_assert(std::endian::native == std::endian::little,
              "TT container I/O assumes a little-endian host");

inline constexpr std::array<char, 4> kTTMagic{'K', 'T', 'T', '1'};

namespace detail {

inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw ValidationError("truncated TT container");
  return v;
}

}  // namespace detail

template <typename Scalar>
void write_tt(std::ostream& os, const TTTensor<Scalar>& t) {
  os.write(kTTMagic.data(), kTTMagic.size());
  detail::write_u64(os, t.order());
  for (std::size_t n : t.mode_sizes()) detail::write_u64(os, n);
  for (std::size_t r : t.ranks()) detail::write_u64(os, r);
  const auto field = static_cast<std::uint8_t>(scalar_traits<Scalar>::field);
  os.write(reinterpret_cast<const char*>(&field), 1);
  for (const auto& c : t.cores()) {
    os.write(reinterpret_cast<const char*>(c.data().data()),
             static_cast<std::streamsize>(c.data().size_bytes()));
  }
  if (!os) throw Error("failed to write TT container");
}

template <typename Scalar>
TTTensor<Scalar> read_tt(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kTTMagic) {
    throw ValidationError("not a TT container (bad magic)");
  }
  const std::uint64_t d = detail::read_u64(is);
  if (d == 0 || d > 4096) throw ValidationError("TT container has implausible order");
  std::vector<std::size_t> n(d), r(d + 1);
  for (auto& v : n) v = detail::read_u64(is);
  for (auto& v : r) v = detail::read_u64(is);
  std::uint8_t field = 0;
  if (!is.read(reinterpret_cast<char*>(&field), 1)) throw ValidationError("truncated TT container");
  if (field != static_cast<std::uint8_t>(scalar_traits<Scalar>::field)) {
    throw ValidationError("TT container scalar field does not match the requested type");
  }
  std::vector<Core<Scalar>> cores;
  cores.reserve(d);
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t count = r[k] * n[k] * r[k + 1];
    std::vector<Scalar> data(count);
    if (!is.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(count * sizeof(Scalar)))) {
      throw ValidationError("truncated TT container");
    }
    cores.emplace_back(r[k], n[k], r[k + 1], std::move(data));
  }
  return TTTensor<Scalar>(std::move(cores));
}

}  // namespace ktt

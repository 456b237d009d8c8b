#pragma once

#include <filesystem>
#include <iosfwd>

#include "ssmctb/tensor.hpp"

namespace ssmctb {

/// SSTB1 layout: the 8 ASCII bytes "SSTB0001", a u32 rank, rank x u64
/// extents, then the row-major f64 payload. Every integer and float is
/// little-endian regardless of host byte order.
inline constexpr char kSstbMagic[8] = {'S', 'S', 'T', 'B', '0', '0', '0', '1'};

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace ssmctb

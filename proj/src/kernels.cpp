// Data-parallel kernels over population rows. Each has a serial reference
// used by the tests and the benchmark.

#include <cstdint>
#include <vector>

#include "svytree/tree.hpp"

namespace svytree {

std::vector<std::uint32_t> classify_rows(const Partition& partition,
                                         const Frame& frame) {
  const FrameBinding binding(partition, frame);
  const auto n = static_cast<std::ptrdiff_t>(frame.size());
  std::vector<std::uint32_t> out(frame.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t row = 0; row < n; ++row) {
    out[static_cast<std::size_t>(row)] =
        static_cast<std::uint32_t>(binding.box_of_row(static_cast<std::size_t>(row)));
  }
  return out;
}

std::vector<std::uint32_t> classify_rows_serial(const Partition& partition,
                                                const Frame& frame) {
  const FrameBinding binding(partition, frame);
  std::vector<std::uint32_t> out(frame.size());
  for (std::size_t row = 0; row < frame.size(); ++row) {
    out[row] = static_cast<std::uint32_t>(binding.box_of_row(row));
  }
  return out;
}

}  // namespace svytree

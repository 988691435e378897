#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dspkat/fixed_point.hpp"

namespace dspkat {

class MemhParseError : public std::runtime_error {
 public:
  MemhParseError(int line, const std::string& detail, const std::string& source = {})
      : std::runtime_error((source.empty() ? "" : source + ": ") + "line " + std::to_string(line) + ": " + detail),
        line_(line),
        detail_(detail) {}
  int line() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  int line_;
  std::string detail_;
};

/// Raised when a region read touches addresses that were never written.
class UninitializedError : public std::runtime_error {
 public:
  explicit UninitializedError(std::vector<std::uint32_t> addrs);
  const std::vector<std::uint32_t>& addresses() const { return addrs_; }

 private:
  std::vector<std::uint32_t> addrs_;
};

/// Sparse word-addressed memory. Absent addresses are uninitialized, which
/// compares differently from a stored zero.
class MemoryImage {
 public:
  explicit MemoryImage(int word_bits = 16);

  int word_bits() const { return word_bits_; }
  std::uint32_t word_mask() const;

  void set(std::uint32_t addr, std::uint32_t word);
  std::optional<std::uint32_t> get(std::uint32_t addr) const;
  bool contains(std::uint32_t addr) const { return cells_.count(addr) != 0; }
  void erase(std::uint32_t addr) { cells_.erase(addr); }
  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }

  /// Copy every cell of `other` into this image (other wins on overlap).
  void merge(const MemoryImage& other);

  const std::map<std::uint32_t, std::uint32_t>& cells() const { return cells_; }

  friend bool operator==(const MemoryImage&, const MemoryImage&) = default;

 private:
  int word_bits_;
  std::map<std::uint32_t, std::uint32_t> cells_;
};

/// Reads the $readmemh-style text format: `@ADDR` sets the cursor, hex words
/// fill consecutive addresses, `//` and `/* */` comments are ignored.
MemoryImage parse_memh(std::string_view text, int word_bits);
/// Canonical writer: ascending `@ADDR VALUE` lines, uppercase, zero padded.
std::string emit_memh(const MemoryImage& img);

MemoryImage read_memh_file(const std::string& path, int word_bits);
void write_memh_file(const std::string& path, const MemoryImage& img);

/// A contiguous block of memory holding one step's data.
struct RegionLayout {
  std::uint32_t base = 0;
  std::uint32_t extent = 0;  // words
  QFormat fmt = kQ12_4;
  bool complex = false;  // (re, im) at consecutive addresses

  int word_bits() const { return fmt.width(); }
  std::uint32_t element_count() const { return complex ? extent / 2 : extent; }
  std::uint32_t end() const { return base + extent; }
  bool contains(std::uint32_t addr) const { return addr >= base && addr < end(); }
};

/// Addresses inside the layout that are not initialized in `img`.
std::vector<std::uint32_t> missing_addresses(const MemoryImage& img, const RegionLayout& layout);

std::vector<Fixed> read_region(const MemoryImage& img, const RegionLayout& layout);
std::vector<CFixed> read_complex_region(const MemoryImage& img, const RegionLayout& layout);
std::vector<std::int32_t> read_region_raw(const MemoryImage& img, const RegionLayout& layout);

void write_region(MemoryImage& img, const RegionLayout& layout, const std::vector<Fixed>& data);
void write_complex_region(MemoryImage& img, const RegionLayout& layout, const std::vector<CFixed>& data);
void write_region_raw(MemoryImage& img, const RegionLayout& layout, const std::vector<std::int32_t>& raws);

/// Sub-image holding only the cells of `img` inside `layout`.
MemoryImage extract_region(const MemoryImage& img, const RegionLayout& layout);

}  // namespace dspkat

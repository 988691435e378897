#include "dspkat/mem_image.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dspkat {

namespace {

std::string describe_addresses(const std::vector<std::uint32_t>& addrs) {
  std::ostringstream os;
  os << addrs.size() << " uninitialized address(es):";
  const std::size_t shown = std::min<std::size_t>(addrs.size(), 8);
  for (std::size_t i = 0; i < shown; ++i) os << " 0x" << std::hex << std::uppercase << addrs[i];
  if (shown < addrs.size()) os << " ...";
  return os.str();
}

bool is_hex(char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; }

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  return std::toupper(static_cast<unsigned char>(c)) - 'A' + 10;
}

void check_word_bits(int word_bits) {
  if (word_bits != 16 && word_bits != 24) throw ContractError("memory word width must be 16 or 24 bits");
}

void require_layout_fits(const RegionLayout& layout, std::size_t words) {
  if (words != layout.extent) {
    throw std::length_error("region data length " + std::to_string(words) + " does not match layout extent " +
                            std::to_string(layout.extent));
  }
}

}  // namespace

UninitializedError::UninitializedError(std::vector<std::uint32_t> addrs)
    : std::runtime_error(describe_addresses(addrs)), addrs_(std::move(addrs)) {}

MemoryImage::MemoryImage(int word_bits) : word_bits_(word_bits) { check_word_bits(word_bits); }

std::uint32_t MemoryImage::word_mask() const { return (std::uint32_t{1} << word_bits_) - 1; }

void MemoryImage::set(std::uint32_t addr, std::uint32_t word) {
  if (word > word_mask()) throw ContractError("word exceeds " + std::to_string(word_bits_) + "-bit width");
  cells_[addr] = word;
}

std::optional<std::uint32_t> MemoryImage::get(std::uint32_t addr) const {
  auto it = cells_.find(addr);
  if (it == cells_.end()) return std::nullopt;
  return it->second;
}

void MemoryImage::merge(const MemoryImage& other) {
  for (const auto& [addr, word] : other.cells()) set(addr, word);
}

MemoryImage parse_memh(std::string_view text, int word_bits) {
  check_word_bits(word_bits);
  MemoryImage img(word_bits);
  std::uint64_t cursor = 0;
  int line = 1;
  std::size_t i = 0;
  const std::size_t n = text.size();

  auto read_hex = [&](std::size_t start, std::size_t& end) {
    end = start;
    while (end < n && !std::isspace(static_cast<unsigned char>(text[end])) && text[end] != '/' && text[end] != '@')
      ++end;
    const std::string_view tok = text.substr(start, end - start);
    if (tok.empty()) throw MemhParseError(line, "empty token");
    std::uint64_t v = 0;
    for (char c : tok) {
      if (!is_hex(c)) throw MemhParseError(line, "malformed token '" + std::string(tok) + "'");
      v = (v << 4) | static_cast<std::uint64_t>(hex_value(c));
      if (v > 0xFFFFFFFFull) throw MemhParseError(line, "token '" + std::string(tok) + "' exceeds 32 bits");
    }
    return v;
  };

  while (i < n) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '/' && i + 1 < n && text[i + 1] == '/') {
      while (i < n && text[i] != '\n') ++i;
    } else if (c == '/' && i + 1 < n && text[i + 1] == '*') {
      const int opened = line;
      i += 2;
      while (i + 1 < n && !(text[i] == '*' && text[i + 1] == '/')) {
        if (text[i] == '\n') ++line;
        ++i;
      }
      if (i + 1 >= n) throw MemhParseError(opened, "unterminated block comment");
      i += 2;
    } else if (c == '@') {
      std::size_t end = 0;
      cursor = read_hex(i + 1, end);
      i = end;
    } else {
      std::size_t end = 0;
      const std::uint64_t v = read_hex(i, end);
      if (v > img.word_mask()) {
        throw MemhParseError(line, "value '" + std::string(text.substr(i, end - i)) + "' wider than " +
                                       std::to_string(word_bits) + " bits");
      }
      if (cursor > 0xFFFFFFFFull) throw MemhParseError(line, "address overflow");
      img.set(static_cast<std::uint32_t>(cursor), static_cast<std::uint32_t>(v));
      ++cursor;
      i = end;
    }
  }
  return img;
}

std::string emit_memh(const MemoryImage& img) {
  std::string out;
  const int digits = img.word_bits() / 4;
  char buf[32];
  for (const auto& [addr, word] : img.cells()) {
    std::snprintf(buf, sizeof buf, "@%04X %0*X\n", addr, digits, word);
    out += buf;
  }
  return out;
}

MemoryImage read_memh_file(const std::string& path, int word_bits) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_memh(ss.str(), word_bits);
  } catch (const MemhParseError& e) {
    throw MemhParseError(e.line(), e.detail(), path);
  }
}

void write_memh_file(const std::string& path, const MemoryImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << emit_memh(img);
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<std::uint32_t> missing_addresses(const MemoryImage& img, const RegionLayout& layout) {
  std::vector<std::uint32_t> missing;
  for (std::uint32_t a = layout.base; a < layout.end(); ++a)
    if (!img.contains(a)) missing.push_back(a);
  return missing;
}

std::vector<std::int32_t> read_region_raw(const MemoryImage& img, const RegionLayout& layout) {
  if (img.word_bits() != layout.word_bits()) throw ContractError("region word width does not match image");
  auto missing = missing_addresses(img, layout);
  if (!missing.empty()) throw UninitializedError(std::move(missing));
  std::vector<std::int32_t> raws;
  raws.reserve(layout.extent);
  const int bits = layout.word_bits();
  for (std::uint32_t a = layout.base; a < layout.end(); ++a) raws.push_back(sign_extend(*img.get(a), bits));
  return raws;
}

std::vector<Fixed> read_region(const MemoryImage& img, const RegionLayout& layout) {
  if (layout.complex) throw ContractError("read_region on a complex layout");
  std::vector<Fixed> out;
  for (std::int32_t r : read_region_raw(img, layout)) out.push_back({r, layout.fmt});
  return out;
}

std::vector<CFixed> read_complex_region(const MemoryImage& img, const RegionLayout& layout) {
  if (!layout.complex) throw ContractError("read_complex_region on a real layout");
  const auto raws = read_region_raw(img, layout);
  std::vector<CFixed> out;
  out.reserve(raws.size() / 2);
  for (std::size_t i = 0; i + 1 < raws.size(); i += 2)
    out.push_back({{raws[i], layout.fmt}, {raws[i + 1], layout.fmt}});
  return out;
}

void write_region_raw(MemoryImage& img, const RegionLayout& layout, const std::vector<std::int32_t>& raws) {
  if (img.word_bits() != layout.word_bits()) throw ContractError("region word width does not match image");
  require_layout_fits(layout, raws.size());
  const std::uint32_t mask = layout.fmt.word_mask();
  for (std::uint32_t i = 0; i < layout.extent; ++i) {
    const std::int32_t r = raws[i];
    if (r > layout.fmt.max_raw() || r < layout.fmt.min_raw()) throw ContractError("raw value out of format range");
    img.set(layout.base + i, static_cast<std::uint32_t>(r) & mask);
  }
}

void write_region(MemoryImage& img, const RegionLayout& layout, const std::vector<Fixed>& data) {
  if (layout.complex) throw ContractError("write_region on a complex layout");
  std::vector<std::int32_t> raws;
  raws.reserve(data.size());
  for (const Fixed& f : data) {
    if (f.fmt != layout.fmt) throw ContractError("element format does not match layout");
    raws.push_back(f.raw);
  }
  write_region_raw(img, layout, raws);
}

void write_complex_region(MemoryImage& img, const RegionLayout& layout, const std::vector<CFixed>& data) {
  if (!layout.complex) throw ContractError("write_complex_region on a real layout");
  std::vector<std::int32_t> raws;
  raws.reserve(data.size() * 2);
  for (const CFixed& c : data) {
    if (c.re.fmt != layout.fmt || c.im.fmt != layout.fmt) throw ContractError("element format does not match layout");
    raws.push_back(c.re.raw);
    raws.push_back(c.im.raw);
  }
  write_region_raw(img, layout, raws);
}

MemoryImage extract_region(const MemoryImage& img, const RegionLayout& layout) {
  MemoryImage out(img.word_bits());
  auto it = img.cells().lower_bound(layout.base);
  for (; it != img.cells().end() && it->first < layout.end(); ++it) out.set(it->first, it->second);
  return out;
}

}  // namespace dspkat

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "dspkat/mem_image.hpp"
#include "dspkat/memory_map.hpp"
#include "dspkat/rng.hpp"

using namespace dspkat;

namespace {

MemoryImage random_image(Rng& rng, int bits) {
  MemoryImage img(bits);
  const std::uint32_t mask = bits == 16 ? 0xFFFFu : 0xFFFFFFu;
  const auto cells = rng.below(60);
  for (std::uint64_t i = 0; i < cells; ++i)
    img.set(static_cast<std::uint32_t>(rng.below(0x20000)), static_cast<std::uint32_t>(rng.next() & mask));
  return img;
}

// Re-serializes an image with runs, random whitespace and comments between
// tokens; the parsed result must not change.
std::string noisy_text(const MemoryImage& img, Rng& rng) {
  static const char* fillers[] = {" ", "\n", "\t", "  \n\n ", " // note\n", " /* c */ ", "/*multi\nline*/\n", "\r\n"};
  const int digits = img.word_bits() / 4;
  std::string out = "/* header */\n";
  std::uint64_t cursor = ~0ull;
  char buf[32];
  for (const auto& [addr, word] : img.cells()) {
    if (addr != cursor) {
      std::snprintf(buf, sizeof buf, "@%x", addr);
      out += buf;
      out += fillers[rng.below(8)];
    }
    std::snprintf(buf, sizeof buf, rng.below(2) ? "%0*X" : "%0*x", static_cast<int>(rng.below(digits) + 1), word);
    out += buf;
    out += fillers[rng.below(8)];
    cursor = std::uint64_t{addr} + 1;
  }
  return out;
}

}  // namespace

TEST_CASE("parse_memh examples") {
  const auto a = parse_memh("@123 E3B0 // example", 16);
  CHECK(a.size() == 1);
  CHECK(a.get(0x123) == 0xE3B0u);

  const auto b = parse_memh("@0 AAAA BBBB", 16);
  CHECK(b.get(0) == 0xAAAAu);
  CHECK(b.get(1) == 0xBBBBu);

  const auto c = parse_memh("/* hdr */ @EC50 FF8174", 24);
  CHECK(c.get(0xEC50) == 0xFF8174u);

  const auto d = parse_memh("@123    E3B0         // example for Q12,4 format\n", 16);
  CHECK(d.get(0x123) == 0xE3B0u);
  const auto e = parse_memh("@EC50    FF8174       // example for Q0.23 format\n", 24);
  CHECK(e.get(0xEC50) == 0xFF8174u);
}

TEST_CASE("parse_memh errors carry the line number") {
  try {
    parse_memh("@0 0001\n0002\n12345\n", 16);
    FAIL("expected a parse error");
  } catch (const MemhParseError& err) {
    CHECK(err.line() == 3);
  }
  CHECK_THROWS_AS(parse_memh("@0 12G4", 16), MemhParseError);
  CHECK_THROWS_AS(parse_memh("@0 1000000", 24), MemhParseError);
  CHECK_THROWS_AS(parse_memh("@0 /* open", 24), MemhParseError);
  CHECK_THROWS_AS(parse_memh("", 20), ContractError);
}

TEST_CASE("emit_memh canonical form") {
  MemoryImage img(16);
  img.set(0x123, 0xE3B0);
  CHECK(emit_memh(img) == "@0123 E3B0\n");
  CHECK(emit_memh(MemoryImage(16)).empty());
  MemoryImage w(24);
  w.set(0x10, 0xab);
  w.set(0x2, 0xFF8174);
  CHECK(emit_memh(w) == "@0002 FF8174\n@0010 0000AB\n");
}

TEST_CASE("round trip and comment insensitivity") {
  Rng rng(99);
  for (int i = 0; i < 300; ++i) {
    const int bits = rng.below(2) ? 16 : 24;
    const MemoryImage img = random_image(rng, bits);
    const std::string canon = emit_memh(img);
    CHECK(parse_memh(canon, bits) == img);
    CHECK(emit_memh(parse_memh(canon, bits)) == canon);
    CHECK(parse_memh(noisy_text(img, rng), bits) == img);
  }
}

TEST_CASE("file round trip") {
  const auto path = std::filesystem::temp_directory_path() / "dspkat_test_mem.memh";
  MemoryImage img(24);
  img.set(0x4000, 0x123456);
  write_memh_file(path.string(), img);
  CHECK(read_memh_file(path.string(), 24) == img);
  std::filesystem::remove(path);
}

TEST_CASE("uninitialized differs from zero") {
  MemoryImage a(16), b(16);
  a.set(5, 0);
  CHECK_FALSE(a == b);
  CHECK_FALSE(b.get(5).has_value());
  CHECK_THROWS_AS(a.set(1, 0x10000), ContractError);
}

TEST_CASE("regions") {
  MemoryImage img(16);
  img.set(0x10, 0xE3B0);
  const RegionLayout one{0x10, 1, kQ12_4, false};
  const auto vals = read_region(img, one);
  REQUIRE(vals.size() == 1);
  CHECK(to_real(vals[0]) == -453.0);
  CHECK(read_region(img, RegionLayout{0x10, 0, kQ12_4, false}).empty());

  MemoryImage c(24);
  c.set(0x4000, 0x400000);
  c.set(0x4001, 0x000000);
  const auto cv = read_complex_region(c, RegionLayout{0x4000, 2, kQ0_23, true});
  REQUIRE(cv.size() == 1);
  CHECK(to_real(cv[0].re) == 0.5);
  CHECK(to_real(cv[0].im) == 0.0);

  try {
    read_region(img, RegionLayout{0x10, 3, kQ12_4, false});
    FAIL("expected UninitializedError");
  } catch (const UninitializedError& e) {
    CHECK(e.addresses() == std::vector<std::uint32_t>{0x11, 0x12});
  }

  MemoryImage w(16);
  w.set(0x100, 0x1234);
  const RegionLayout lay{0x20, 2, kQ12_4, false};
  write_region(w, lay, {quantize(0.5, kQ12_4), quantize(1.0, kQ12_4)});
  write_region(w, lay, {quantize(0.5, kQ12_4), quantize(-2.0, kQ12_4)});
  const auto back = read_region(w, lay);
  CHECK(to_real(back[0]) == 0.5);
  CHECK(to_real(back[1]) == -2.0);
  CHECK(w.get(0x100) == 0x1234u);
  CHECK_THROWS(write_region(w, lay, {quantize(0.5, kQ12_4)}));
}

TEST_CASE("region_for sizes and disjointness") {
  const ChainConfig cfg;
  const auto adc = region_for(Step::kAdc, cfg);
  CHECK(adc.base == 0x0000);
  CHECK(adc.extent == 3 * 17 * 64);
  CHECK(adc.word_bits() == 16);
  const auto mti = region_for(Step::kMti, cfg);
  CHECK(mti.base == 0x2000);
  CHECK(mti.extent == 3 * 16 * 64);
  const auto rfft = region_for(Step::kRfft, cfg);
  CHECK(rfft.base == 0x4000);
  CHECK(rfft.extent == 3 * 16 * 32 * 2);
  CHECK(rfft.word_bits() == 24);
  const auto cfft = region_for(Step::kCfft, cfg);
  CHECK(cfft.base == 0x8000);
  CHECK(cfft.extent == 3 * 32 * 16 * 2);

  // Every valid config fits its windows, so the regions never overlap.
  for (std::uint32_t n : {16u, 32u, 64u, 128u, 256u})
    for (std::uint32_t m : {2u, 3u, 5u, 9u, 17u, 33u})
      for (std::uint32_t r : {1u, 2u, 3u}) {
        ChainConfig c;
        c.samples = n;
        c.bursts = m;
        c.channels = r;
        if (!config_violations(c).empty()) continue;
        const RegionLayout ls[] = {region_for(Step::kAdc, c), region_for(Step::kMti, c), region_for(Step::kRfft, c),
                                   region_for(Step::kCfft, c)};
        for (int i = 0; i < 4; ++i)
          for (int j = i + 1; j < 4; ++j) CHECK((ls[i].end() <= ls[j].base || ls[j].end() <= ls[i].base));
      }
}
